//! Best responses, pure Nash dynamics, equilibrium verification and
//! welfare-optimal allocations.
//!
//! A bidder facing opponents whose bid sum is the random variable `G` (with
//! finite support) has deviation utility `E[v(y / (y + G))] - y`, a
//! probability-weighted sum of concave functions of `y`. Every equilibrium
//! check in this module reduces to maximizing that function exactly with
//! [`maximize_by_slope`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{
    allocate, check_len, effective_welfare, share, social_welfare, utility_profile, Allocation,
    BidProfile, Bidder, CorrelatedBidDistribution, Game,
};
use crate::search::maximize_by_slope;
use crate::valuations::ValuationFunction;

/// Deviation gains below this are reported as exactly zero.
pub const EPSILON_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Convergence threshold on the largest bid movement per iteration.
    pub bid_tolerance: f64,
    pub max_iterations: usize,
    /// Weight on the best response in `b <- (1 - damping) b + damping BR(b)`.
    pub damping: f64,
    /// Points per axis for grid-based cross-checks.
    pub deviation_grid_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            bid_tolerance: 1e-9,
            max_iterations: 10_000,
            damping: 0.5,
            deviation_grid_size: 10_001,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bid_tolerance.is_nan() || self.bid_tolerance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bid_tolerance {} must be positive",
                self.bid_tolerance
            )));
        }
        if self.max_iterations == 0 || self.deviation_grid_size == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations and deviation_grid_size must be positive".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping {} must lie in (0, 1]",
                self.damping
            )));
        }
        Ok(())
    }

    /// Bracket width for the inner 1-D searches.
    pub(crate) fn search_tolerance(&self) -> f64 {
        (self.bid_tolerance * 1e-4).max(1e-17)
    }
}

/// Outcome of a best-response computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub bid: f64,
    /// Supremum of the deviation utility. Equals the utility at `bid` unless
    /// `degenerate` is set.
    pub utility: f64,
    /// Set when the supremum is only approached as the bid tends to 0, which
    /// happens when opponents bid nothing with positive probability.
    pub degenerate: bool,
}

/// `E[v(bid / (bid + G))] - bid` for `G` given as `(value, probability)` pairs.
pub fn deviation_utility(v: &ValuationFunction, bid: f64, opponents: &[(f64, f64)]) -> f64 {
    opponents
        .iter()
        .map(|(g, p)| p * v.value(share(bid, *g)))
        .sum::<f64>()
        - bid
}

/// Best response to a random opponent bid sum, restricted to `[0, budget]`.
pub fn best_response_against(
    v: &ValuationFunction,
    budget: f64,
    opponents: &[(f64, f64)],
    tol: f64,
) -> BestResponse {
    let top = v.value(1.0);
    // P(G = 0) * v(1): the utility limit as the bid tends to 0 from above
    let idle_value: f64 = opponents
        .iter()
        .filter(|(g, _)| *g <= 0.0)
        .map(|(_, p)| p * top)
        .sum();
    let contested: Vec<(f64, f64)> = opponents
        .iter()
        .copied()
        .filter(|(g, _)| *g > 0.0)
        .collect();

    let value = |y: f64| {
        contested
            .iter()
            .map(|(g, p)| p * v.value(y / (y + g)))
            .sum::<f64>()
            + idle_value
            - y
    };
    let slope = |y: f64| {
        contested
            .iter()
            .map(|(g, p)| {
                let m = v.marginal(y / (y + g));
                if m == 0.0 {
                    0.0
                } else {
                    p * m * g / ((y + g) * (y + g))
                }
            })
            .sum::<f64>()
            - 1.0
    };
    // any bid above v(1) loses money for sure
    let hi = budget.min(top).max(0.0);
    let best = maximize_by_slope(value, slope, 0.0, hi, tol);
    if best.argmax > 0.0 {
        BestResponse {
            bid: best.argmax,
            utility: best.value,
            degenerate: false,
        }
    } else {
        BestResponse {
            bid: 0.0,
            utility: idle_value,
            degenerate: idle_value > 0.0,
        }
    }
}

/// Best response to a deterministic opponent bid sum.
pub fn best_response(v: &ValuationFunction, budget: f64, opp_total: f64, tol: f64) -> BestResponse {
    best_response_against(v, budget, &[(opp_total, 1.0)], tol)
}

/// A solved (or attempted) pure Nash equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub bids: BidProfile,
    pub allocation: Allocation,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sw: f64,
    pub ew: f64,
}

impl EquilibriumResult {
    pub(crate) fn assemble(
        game: &Game,
        bids: BidProfile,
        iterations: usize,
        converged: bool,
        config: &SolverConfig,
    ) -> Result<Self> {
        let epsilon = verify_epsilon_nash(game, &bids, config)?;
        let allocation = allocate(&bids);
        let sw = social_welfare(game, &allocation)?;
        let ew = effective_welfare(game, &allocation)?;
        Ok(EquilibriumResult {
            bids,
            allocation,
            epsilon,
            iterations,
            converged,
            sw,
            ew,
        })
    }
}

/// Bid of a bidder that is a best response to everyone else when the total
/// of all bids (its own included) is `total`: the largest `b` in
/// `[0, min(total, budget)]` at which the right derivative of
/// `y -> v(y / (y + total - b)) - y`, taken at `y = b`, is still positive.
fn bid_at_total(v: &ValuationFunction, budget: f64, total: f64, tol: f64) -> f64 {
    let slope = |b: f64| {
        let m = v.marginal(b / total);
        if m == 0.0 {
            -1.0
        } else {
            m * (total - b) / (total * total) - 1.0
        }
    };
    let cap = budget.min(total);
    maximize_by_slope(|_| 0.0, slope, 0.0, cap, tol * total).argmax
}

/// Largest distance between a bid and the bidder's exact best response;
/// `+inf` if some bidder has no best response (opponents all bid 0).
pub fn best_response_residual(game: &Game, bids: &[f64], tol: f64) -> f64 {
    let total: f64 = bids.iter().sum();
    game.bidders()
        .iter()
        .zip(bids)
        .map(|(b, bid)| {
            let br = best_response(&b.valuation, b.budget, total - bid, tol);
            if br.degenerate {
                f64::INFINITY
            } else {
                (br.bid - bid).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Pure Nash equilibrium of a full-information game.
///
/// The game is aggregative: given the total bid `B`, each bidder's
/// equilibrium-consistent share `s_i(B)` is non-increasing in `B`, so the
/// equilibrium total is the unique root of `sum_i s_i(B) = 1` and is found by
/// bisection on `B` in `(0, sum_i v_i(1)]`. `iterations` counts bisection
/// steps; `converged` is set when every bid is within `bid_tolerance` of its
/// exact best response, and `epsilon` is certified by
/// [`verify_epsilon_nash`].
pub fn pure_nash(game: &Game, config: &SolverConfig) -> Result<EquilibriumResult> {
    config.validate()?;
    let tol = config.search_tolerance();
    let excess = |total: f64| -> (f64, Vec<f64>) {
        let bids: Vec<f64> = game
            .bidders()
            .iter()
            .map(|b| bid_at_total(&b.valuation, b.budget, total, tol))
            .collect();
        (bids.iter().sum::<f64>() / total - 1.0, bids)
    };

    // no bidder ever bids above v(1)
    let mut hi: f64 = game.bidders().iter().map(|b| b.valuation.value(1.0)).sum();
    if hi.is_nan() || hi <= 0.0 {
        let profile = game.profile(vec![0.0; game.len()])?;
        return EquilibriumResult::assemble(game, profile, 0, false, config);
    }
    let mut lo = hi;
    let mut iterations = 0;
    // walk down until the shares over-commit the resource
    while excess(lo).0 <= 0.0 && lo > f64::MIN_POSITIVE {
        hi = lo;
        lo *= 0.5;
        iterations += 1;
    }
    while iterations < config.max_iterations {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if excess(mid).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, lo_bids) = excess(lo);
    let (_, hi_bids) = excess(hi);
    let residual = |bids: &[f64]| best_response_residual(game, bids, tol);
    let bids = if residual(&hi_bids) <= residual(&lo_bids) {
        hi_bids
    } else {
        lo_bids
    };
    let converged = residual(&bids) < config.bid_tolerance;
    let profile = game.profile(bids)?;
    EquilibriumResult::assemble(game, profile, iterations, converged, config)
}

/// Damped simultaneous best-response dynamics
/// `b <- (1 - d) b + d BR(b)` from `b_i = 1/(2n)` (capped at the budget).
///
/// `d` starts at `config.damping`, is halved whenever the best-response
/// residual `max_i |BR_i(b) - b_i|` grows, and recovers by 10% per step
/// (up to `config.damping`) while it shrinks. Converged when the residual
/// drops below `bid_tolerance`.
pub fn best_response_dynamics(game: &Game, config: &SolverConfig) -> Result<EquilibriumResult> {
    config.validate()?;
    let n = game.len();
    let tol = config.search_tolerance();
    let mut bids: Vec<f64> = game
        .bidders()
        .iter()
        .map(|b| (0.5 / n as f64).min(b.budget))
        .collect();
    let mut damping = config.damping;
    let mut previous = f64::INFINITY;
    let mut best = (f64::INFINITY, bids.clone());

    for it in 1..=config.max_iterations {
        let total: f64 = bids.iter().sum();
        let replies: Vec<BestResponse> = game
            .bidders()
            .iter()
            .zip(&bids)
            .map(|(b, bid)| best_response(&b.valuation, b.budget, total - bid, tol))
            .collect();
        let residual = replies
            .iter()
            .zip(&bids)
            .map(|(r, b)| {
                if r.degenerate {
                    f64::INFINITY
                } else {
                    (r.bid - b).abs()
                }
            })
            .fold(0.0, f64::max);
        if residual < best.0 {
            best = (residual, bids.clone());
        }
        if residual < config.bid_tolerance {
            let profile = game.profile(bids)?;
            return EquilibriumResult::assemble(game, profile, it, true, config);
        }
        if residual > previous {
            damping = (damping * 0.5).max(MIN_DAMPING);
        } else {
            damping = (damping * DAMPING_RECOVERY).min(config.damping);
        }
        previous = residual;
        for ((b, r), bidder) in bids.iter_mut().zip(&replies).zip(game.bidders()) {
            *b = ((1.0 - damping) * *b + damping * r.bid).min(bidder.budget);
        }
    }
    let profile = game.profile(best.1)?;
    EquilibriumResult::assemble(game, profile, config.max_iterations, false, config)
}

pub(crate) const MIN_DAMPING: f64 = 1e-3;
pub(crate) const DAMPING_RECOVERY: f64 = 1.1;

/// Per-bidder gain from the best feasible unilateral deviation.
pub fn nash_deviation_gains(
    game: &Game,
    profile: &BidProfile,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    check_len(game.len(), profile.len())?;
    let utilities = utility_profile(game, profile)?;
    let total = profile.total();
    let tol = config.search_tolerance();
    Ok(game
        .bidders()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let br = best_response(&b.valuation, b.budget, total - profile.bids()[i], tol);
            (br.utility - utilities[i]).max(0.0)
        })
        .collect())
}

/// `max_i (sup_y u_i(y, b_-i) - u_i(b))`, clipped below at 0 and floored to 0
/// under [`EPSILON_FLOOR`].
pub fn verify_epsilon_nash(
    game: &Game,
    profile: &BidProfile,
    config: &SolverConfig,
) -> Result<f64> {
    Ok(floor_epsilon(
        nash_deviation_gains(game, profile, config)?
            .into_iter()
            .fold(0.0, f64::max),
    ))
}

/// Largest gain any bidder obtains by replacing its part of the correlated
/// distribution with a single deterministic bid.
pub fn verify_cce(
    game: &Game,
    dist: &CorrelatedBidDistribution,
    config: &SolverConfig,
) -> Result<f64> {
    check_len(game.len(), dist.num_bidders())?;
    let expected = dist.expected_utilities(game);
    let tol = config.search_tolerance();
    let worst = game
        .bidders()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let br = best_response_against(&b.valuation, b.budget, &dist.opponent_totals(i), tol);
            br.utility - expected[i]
        })
        .fold(0.0, f64::max);
    Ok(floor_epsilon(worst))
}

pub(crate) fn floor_epsilon(eps: f64) -> f64 {
    if eps < EPSILON_FLOOR {
        0.0
    } else {
        eps
    }
}

/// A welfare-maximizing allocation and its value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub allocation: Allocation,
    pub value: f64,
    /// The dual price (common marginal value) at the optimum.
    pub price: f64,
}

/// Demand of a valuation capped at `cap`: `sup {x : slope of min(v, cap) at x >= price}`.
fn capped_demand(v: &ValuationFunction, cap: f64, price: f64) -> f64 {
    if price <= 0.0 {
        return 1.0;
    }
    let d = v.demand(price);
    if cap.is_finite() {
        d.min(v.share_reaching(cap))
    } else {
        d
    }
}

/// Maximizes `sum_i min(v_i(x_i), cap_i)` over the simplex by bisection on
/// the dual price. Bidders tied at the final price split the residual in
/// proportion to their demand gap across the bracket.
fn water_fill(items: &[(&ValuationFunction, f64)], tol: f64) -> (Vec<f64>, f64) {
    let total = |price: f64| -> f64 {
        items
            .iter()
            .map(|(v, cap)| capped_demand(v, *cap, price))
            .sum()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while total(hi) > 1.0 && hi < 1e300 {
        lo = hi;
        hi *= 2.0;
    }
    // total(lo) >= 1 >= total(hi)
    let target = (tol * 1e-3).max(0.0);
    for _ in 0..2000 {
        if hi - lo <= target {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let base: Vec<f64> = items
        .iter()
        .map(|(v, cap)| capped_demand(v, *cap, hi))
        .collect();
    let gap: Vec<f64> = items
        .iter()
        .zip(&base)
        .map(|((v, cap), b)| (capped_demand(v, *cap, lo) - b).max(0.0))
        .collect();
    let residual = (1.0 - base.iter().sum::<f64>()).max(0.0);
    let room: f64 = gap.iter().sum();
    let shares = base
        .iter()
        .zip(&gap)
        .map(|(b, g)| {
            let x = if room > 0.0 {
                b + residual * g / room
            } else {
                *b
            };
            x.clamp(0.0, 1.0)
        })
        .collect();
    (shares, 0.5 * (lo + hi))
}

/// `max sum_i v_i(x_i)` subject to `sum_i x_i <= 1`, for any non-empty
/// bidder list.
pub fn optimal_welfare_for(bidders: &[Bidder], tol: f64) -> Optimum {
    let items: Vec<_> = bidders
        .iter()
        .map(|b| (&b.valuation, f64::INFINITY))
        .collect();
    finish(bidders, &items, tol, false)
}

/// `max sum_i min(v_i(x_i), c_i)` subject to `sum_i x_i <= 1`.
pub fn optimal_effective_welfare_for(bidders: &[Bidder], tol: f64) -> Optimum {
    let items: Vec<_> = bidders.iter().map(|b| (&b.valuation, b.budget)).collect();
    finish(bidders, &items, tol, true)
}

fn finish(
    bidders: &[Bidder],
    items: &[(&ValuationFunction, f64)],
    tol: f64,
    capped: bool,
) -> Optimum {
    let (shares, price) = water_fill(items, tol);
    let value = bidders
        .iter()
        .zip(&shares)
        .map(|(b, x)| {
            let v = b.valuation.value(*x);
            if capped {
                v.min(b.budget)
            } else {
                v
            }
        })
        .sum();
    Optimum {
        allocation: Allocation {
            shares,
            degenerate: false,
        },
        value,
        price,
    }
}

pub fn optimal_welfare(game: &Game, tol: f64) -> Optimum {
    optimal_welfare_for(game.bidders(), tol)
}

pub fn optimal_effective_welfare(game: &Game, tol: f64) -> Optimum {
    optimal_effective_welfare_for(game.bidders(), tol)
}
