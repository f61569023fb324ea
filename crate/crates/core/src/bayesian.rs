//! Incomplete-information games with finitely many types per bidder.
//!
//! Types are drawn independently across bidders. All expectations are exact
//! sums over type profiles, so every quantity here is deterministic.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{share, Bidder, Game};
use crate::search::golden_section_max;
use crate::solvers::{
    best_response_against, deviation_utility, floor_epsilon, optimal_effective_welfare_for,
    optimal_welfare_for, SolverConfig, DAMPING_RECOVERY, MIN_DAMPING,
};
use crate::valuations::ValuationFunction;

/// One possible (valuation, budget) draw of a bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidderType {
    pub valuation: ValuationFunction,
    #[serde(
        default = "unbounded",
        serialize_with = "crate::mechanism::ser_budget",
        deserialize_with = "crate::mechanism::de_budget"
    )]
    pub budget: f64,
    pub prob: f64,
}

fn unbounded() -> f64 {
    f64::INFINITY
}

impl BidderType {
    pub fn new(valuation: ValuationFunction, budget: f64, prob: f64) -> Self {
        BidderType {
            valuation,
            budget,
            prob,
        }
    }

    fn as_bidder(&self) -> Bidder {
        Bidder::new(self.valuation.clone(), self.budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesianBidder {
    pub types: Vec<BidderType>,
}

/// A Bayesian game: per-bidder finite type distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesianGame {
    bidders: Vec<BayesianBidder>,
}

impl BayesianGame {
    pub fn new(bidders: Vec<Vec<BidderType>>) -> Result<Self> {
        if bidders.len() < 2 {
            return Err(Error::InvalidGame(format!(
                "a game needs at least 2 bidders, got {}",
                bidders.len()
            )));
        }
        for (i, types) in bidders.iter().enumerate() {
            if types.is_empty() {
                return Err(Error::InvalidGame(format!("bidder {i} has no types")));
            }
            let mut total = 0.0;
            for (t, ty) in types.iter().enumerate() {
                ty.as_bidder()
                    .check(i)
                    .map_err(|e| Error::InvalidGame(format!("type {t}: {e}")))?;
                if !(ty.prob > 0.0 && ty.prob <= 1.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "bidder {i} type {t}: probability {} must lie in (0, 1]",
                        ty.prob
                    )));
                }
                total += ty.prob;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidDistribution(format!(
                    "bidder {i}: type probabilities sum to {total}, not 1"
                )));
            }
        }
        Ok(BayesianGame {
            bidders: bidders
                .into_iter()
                .map(|types| BayesianBidder { types })
                .collect(),
        })
    }

    /// Every bidder has a single type.
    pub fn from_game(game: &Game) -> Self {
        BayesianGame {
            bidders: game
                .bidders()
                .iter()
                .map(|b| BayesianBidder {
                    types: vec![BidderType::new(b.valuation.clone(), b.budget, 1.0)],
                })
                .collect(),
        }
    }

    pub fn bidders(&self) -> &[BayesianBidder] {
        &self.bidders
    }

    pub fn len(&self) -> usize {
        self.bidders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bidders.is_empty()
    }

    pub fn type_counts(&self) -> Vec<usize> {
        self.bidders.iter().map(|b| b.types.len()).collect()
    }

    fn ty(&self, bidder: usize, ty: usize) -> Result<&BidderType> {
        let b = self.bidders.get(bidder).ok_or(Error::IndexOutOfRange {
            what: "bidder",
            index: bidder,
            len: self.bidders.len(),
        })?;
        b.types.get(ty).ok_or(Error::IndexOutOfRange {
            what: "type",
            index: ty,
            len: b.types.len(),
        })
    }

    /// Visits every type profile with its probability, in lexicographic order.
    fn for_each_profile(&self, mut visit: impl FnMut(&[usize], f64)) {
        let counts = self.type_counts();
        let mut idx = vec![0usize; counts.len()];
        loop {
            let p: f64 = idx
                .iter()
                .enumerate()
                .map(|(i, t)| self.bidders[i].types[*t].prob)
                .product();
            visit(&idx, p);
            let mut k = counts.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Distribution of the opponents' bid sum seen by `bidder`, as
    /// `(value, probability)` pairs.
    pub fn opponent_totals(&self, bidder: usize, profile: &StrategyProfile) -> Vec<(f64, f64)> {
        let mut dist = vec![(0.0, 1.0)];
        for (j, b) in self.bidders.iter().enumerate() {
            if j == bidder {
                continue;
            }
            dist = dist
                .iter()
                .flat_map(|(s, p)| {
                    b.types
                        .iter()
                        .zip(&profile.bids[j])
                        .map(move |(ty, bid)| (s + bid, p * ty.prob))
                })
                .collect();
        }
        dist
    }
}

impl<'de> Deserialize<'de> for BayesianGame {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct RawBidder {
            types: Vec<BidderType>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            bidders: Vec<RawBidder>,
        }
        let raw = Raw::deserialize(d)?;
        BayesianGame::new(raw.bidders.into_iter().map(|b| b.types).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// One deterministic bid per (bidder, type).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub bids: Vec<Vec<f64>>,
}

impl StrategyProfile {
    /// Checks shape, non-negativity and per-type budgets.
    pub fn new(bgame: &BayesianGame, bids: Vec<Vec<f64>>) -> Result<Self> {
        if bids.len() != bgame.len() {
            return Err(Error::SizeMismatch {
                expected: bgame.len(),
                actual: bids.len(),
            });
        }
        for (i, (row, b)) in bids.iter().zip(bgame.bidders()).enumerate() {
            if row.len() != b.types.len() {
                return Err(Error::SizeMismatch {
                    expected: b.types.len(),
                    actual: row.len(),
                });
            }
            for (bid, ty) in row.iter().zip(&b.types) {
                if !bid.is_finite() || *bid < 0.0 || *bid > ty.budget {
                    return Err(Error::InfeasibleBid {
                        bidder: i,
                        bid: *bid,
                        budget: ty.budget,
                    });
                }
            }
        }
        Ok(StrategyProfile { bids })
    }
}

/// Expected utility of `bidder` of type `ty` bidding `bid` while opponents
/// follow `profile`.
pub fn expected_utility(
    bgame: &BayesianGame,
    bidder: usize,
    ty: usize,
    bid: f64,
    profile: &StrategyProfile,
) -> Result<f64> {
    let t = bgame.ty(bidder, ty)?;
    if !bid.is_finite() || bid < 0.0 || bid > t.budget {
        return Err(Error::InfeasibleBid {
            bidder,
            bid,
            budget: t.budget,
        });
    }
    Ok(deviation_utility(
        &t.valuation,
        bid,
        &bgame.opponent_totals(bidder, profile),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesNashResult {
    pub profile: StrategyProfile,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest gain any (bidder, type) obtains from its best deterministic
/// deviation, floored to 0 below the solver tolerance.
pub fn verify_bayes_nash(
    bgame: &BayesianGame,
    profile: &StrategyProfile,
    config: &SolverConfig,
) -> Result<f64> {
    StrategyProfile::new(bgame, profile.bids.clone())?;
    let tol = config.search_tolerance();
    let mut worst: f64 = 0.0;
    for (i, b) in bgame.bidders().iter().enumerate() {
        let opp = bgame.opponent_totals(i, profile);
        for (t, ty) in b.types.iter().enumerate() {
            let current = deviation_utility(&ty.valuation, profile.bids[i][t], &opp);
            let br = best_response_against(&ty.valuation, ty.budget, &opp, tol);
            worst = worst.max(br.utility - current);
        }
    }
    Ok(floor_epsilon(worst))
}

/// Synchronous damped type-wise best-response dynamics.
///
/// Every type of every bidder moves toward its best response against the
/// current profile at once. The damping starts at `config.damping`, is
/// halved whenever the residual `max |BR - b|` grows and creeps back up
/// while it shrinks; the run converges
/// when the residual falls below `bid_tolerance`.
pub fn pure_bayes_nash(bgame: &BayesianGame, config: &SolverConfig) -> Result<BayesNashResult> {
    config.validate()?;
    let n = bgame.len();
    let tol = config.search_tolerance();
    let start = 0.5 / n as f64;
    let mut profile = StrategyProfile {
        bids: bgame
            .bidders()
            .iter()
            .map(|b| b.types.iter().map(|t| start.min(t.budget)).collect())
            .collect(),
    };
    let mut damping = config.damping;
    let mut previous = f64::INFINITY;
    let mut best = (f64::INFINITY, profile.clone());

    for it in 1..=config.max_iterations {
        let mut replies = profile.bids.clone();
        let mut residual: f64 = 0.0;
        for (i, b) in bgame.bidders().iter().enumerate() {
            let opp = bgame.opponent_totals(i, &profile);
            for (t, ty) in b.types.iter().enumerate() {
                let br = best_response_against(&ty.valuation, ty.budget, &opp, tol);
                let gap = if br.degenerate {
                    f64::INFINITY
                } else {
                    (br.bid - profile.bids[i][t]).abs()
                };
                residual = residual.max(gap);
                replies[i][t] = br.bid;
            }
        }
        if residual < best.0 {
            best = (residual, profile.clone());
        }
        if residual < config.bid_tolerance {
            let epsilon = verify_bayes_nash(bgame, &profile, config)?;
            return Ok(BayesNashResult {
                profile,
                epsilon,
                iterations: it,
                converged: true,
            });
        }
        if residual > previous {
            damping = (damping * 0.5).max(MIN_DAMPING);
        } else {
            damping = (damping * DAMPING_RECOVERY).min(config.damping);
        }
        previous = residual;
        for ((row, reply), b) in profile.bids.iter_mut().zip(&replies).zip(bgame.bidders()) {
            for ((bid, r), ty) in row.iter_mut().zip(reply).zip(&b.types) {
                *bid = ((1.0 - damping) * *bid + damping * r).min(ty.budget);
            }
        }
    }
    let profile = best.1;
    let epsilon = verify_bayes_nash(bgame, &profile, config)?;
    Ok(BayesNashResult {
        profile,
        epsilon,
        iterations: config.max_iterations,
        converged: false,
    })
}

/// Expected welfare at a strategy profile and the Bayesian benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesianWelfare {
    pub expected_sw: f64,
    /// `sum_i E_{own type}[ min(E_{opponents}[v_i(d_i)], c_i) ]`.
    pub expected_ew: f64,
    /// Expectation over type profiles of the realized optimal welfare.
    pub sw_star: f64,
    /// Expectation over type profiles of the realized optimal effective
    /// welfare.
    pub ew_star: f64,
}

pub fn bayesian_welfare(
    bgame: &BayesianGame,
    profile: &StrategyProfile,
    tol: f64,
) -> Result<BayesianWelfare> {
    StrategyProfile::new(bgame, profile.bids.clone())?;
    // joint[i][t] = E[v_i(d_i) ; type of i is t]
    let mut joint: Vec<Vec<f64>> = bgame
        .bidders()
        .iter()
        .map(|b| vec![0.0; b.types.len()])
        .collect();
    let (mut sw, mut sw_star, mut ew_star) = (0.0, 0.0, 0.0);
    bgame.for_each_profile(|idx, p| {
        let bids: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(i, t)| profile.bids[i][*t])
            .collect();
        let total: f64 = bids.iter().sum();
        let realized: Vec<Bidder> = idx
            .iter()
            .enumerate()
            .map(|(i, t)| bgame.bidders[i].types[*t].as_bidder())
            .collect();
        for (i, (t, bidder)) in idx.iter().zip(&realized).enumerate() {
            let value = bidder.valuation.value(share(bids[i], total - bids[i]));
            joint[i][*t] += p * value;
            sw += p * value;
        }
        sw_star += p * optimal_welfare_for(&realized, tol).value;
        ew_star += p * optimal_effective_welfare_for(&realized, tol).value;
    });
    let ew = bgame
        .bidders()
        .iter()
        .zip(&joint)
        .map(|(b, row)| {
            b.types
                .iter()
                .zip(row)
                .map(|(ty, mass)| ty.prob * (mass / ty.prob).min(ty.budget))
                .sum::<f64>()
        })
        .sum();
    Ok(BayesianWelfare {
        expected_sw: sw,
        expected_ew: ew,
        sw_star,
        ew_star,
    })
}

/// Caveat attached to every report of the two-bidder program: it treats
/// vanishing bids as exactly zero and near-total shares as exactly one.
pub const ROUNDING_CAVEAT: &str =
    "program rounds negligible bids to 0 and near-total shares to 1; it is not the unrounded game";

/// Parameters of the two-bidder coarse-correlated Bayesian construction:
/// bidder 1 has value `x` w.p. `p1` (else ~0), bidder 2 has `alpha x` w.p.
/// `p2` (else ~0); when both are high they bid `gamma` and `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBidderCceParams {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub p1: f64,
    pub p2: f64,
}

impl TwoBidderCceParams {
    pub fn new(alpha: f64, gamma: f64, delta: f64, p1: f64, p2: f64) -> Result<Self> {
        let p = TwoBidderCceParams {
            alpha,
            gamma,
            delta,
            p1,
            p2,
        };
        if !p.in_box() {
            return Err(Error::InvalidParameter(format!(
                "{p:?} outside gamma, delta >= 0 and alpha, p1, p2 in [0, 1]"
            )));
        }
        Ok(p)
    }

    fn in_box(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        self.gamma >= 0.0 && self.delta >= 0.0 && unit(self.alpha) && unit(self.p1) && unit(self.p2)
    }

    /// Expected welfare over expected optimal welfare of the construction.
    /// `None` when the ratio is undefined.
    pub fn objective(&self) -> Option<f64> {
        let sum = self.gamma + self.delta;
        if sum <= 0.0 {
            return None;
        }
        ratio_objective(self.alpha, self.p1, self.p2, self.gamma / sum)
    }

    /// `[lhs - rhs]` of the two no-deviation constraints.
    pub fn constraint_slacks(&self) -> [f64; 2] {
        let sum = self.gamma + self.delta;
        if sum <= 0.0 {
            return [f64::NEG_INFINITY; 2];
        }
        slacks(self.alpha, self.p1, self.p2, self.gamma / sum, sum)
    }

    pub fn is_feasible(&self, slack: f64) -> bool {
        self.in_box() && self.constraint_slacks().iter().all(|s| *s >= -slack)
    }
}

/// Objective in terms of the high-high share ratio `r = gamma / (gamma + delta)`.
fn ratio_objective(alpha: f64, p1: f64, p2: f64, r: f64) -> Option<f64> {
    let denom = p1 + alpha * (1.0 - p1) * p2;
    if denom <= 0.0 {
        return None;
    }
    let num = p1 * p2 * (r + alpha * (1.0 - r)) + p1 * (1.0 - p2) + alpha * (1.0 - p1) * p2;
    Some(num / denom)
}

/// Constraint slacks with `gamma = r s`, `delta = (1 - r) s`.
fn slacks(alpha: f64, p1: f64, p2: f64, r: f64, s: f64) -> [f64; 2] {
    let (gamma, delta) = (r * s, (1.0 - r) * s);
    let first = p2 * r - p2 * gamma - (p2.sqrt() - delta.sqrt()).powi(2);
    let second = alpha * p1 * (1.0 - r) - p1 * delta - ((alpha * p1).sqrt() - gamma.sqrt()).powi(2);
    [first, second]
}

/// Largest `p1` and `p2` in `[0, 1]` satisfying the two constraints for
/// fixed `alpha`, share ratio `r` and scale `s`, or `None` when no
/// probability does.
///
/// In `t = sqrt(p1)` the second constraint reads
/// `-(alpha r + (1 - r) s) t^2 + 2 sqrt(alpha r s) t - r s >= 0`, and in
/// `u = sqrt(p2)` the first reads
/// `-(1 - r + r s) u^2 + 2 sqrt((1 - r) s) u - (1 - r) s >= 0`; both are
/// concave quadratics, so the largest root is the answer.
fn largest_feasible_probs(alpha: f64, r: f64, s: f64) -> Option<(f64, f64)> {
    let upper_root = |a: f64, b: f64, c: f64| -> Option<f64> {
        // largest root of -a z^2 + 2 b z - c
        if a <= 0.0 {
            return None;
        }
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        Some((b + disc.sqrt()) / a)
    };
    let t = upper_root(alpha * r + (1.0 - r) * s, (alpha * r * s).sqrt(), r * s)?;
    let u = upper_root(1.0 - r + r * s, ((1.0 - r) * s).sqrt(), (1.0 - r) * s)?;
    let (p1, p2) = ((t * t).min(1.0), (u * u).min(1.0));
    if p1 > 0.0 && p2 > 0.0 {
        Some((p1, p2))
    } else {
        None
    }
}

/// Reduced search point `(alpha, r, s)`.
type Point = [f64; 3];

fn reduced_objective(x: &Point) -> Option<f64> {
    let [alpha, r, s] = *x;
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&r) || !(s > 0.0 && s <= 1.0) {
        return None;
    }
    let (p1, p2) = largest_feasible_probs(alpha, r, s)?;
    ratio_objective(alpha, p1, p2, r)
}

fn params_at(x: &Point) -> Option<TwoBidderCceParams> {
    let [alpha, r, s] = *x;
    let (p1, p2) = largest_feasible_probs(alpha, r, s)?;
    TwoBidderCceParams::new(alpha, r * s, (1.0 - r) * s, p1, p2).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoBidderCceSolution {
    pub params: TwoBidderCceParams,
    pub objective: f64,
    pub grid_evaluations: usize,
    pub refine_sweeps: usize,
}

/// Minimizes the ratio objective subject to both no-deviation constraints.
///
/// The objective depends on `gamma, delta` only through
/// `r = gamma / (gamma + delta)` and is non-increasing in `p1` and in `p2`,
/// while each constraint involves a single probability. So for every
/// `(alpha, r, s = gamma + delta)` the probabilities are set to their largest
/// feasible values ([`largest_feasible_probs`]); points where none exist are
/// filtered out. A grid with `grid_resolution` points per axis seeds a
/// coordinate descent of at most `refine_iterations` sweeps, each sweep a
/// golden-section search along every axis within a shrinking window.
pub fn two_bidder_cce_program(
    grid_resolution: usize,
    refine_iterations: usize,
) -> Result<TwoBidderCceSolution> {
    if grid_resolution < 10 {
        return Err(Error::InvalidParameter(format!(
            "grid resolution {grid_resolution} must be at least 10"
        )));
    }
    let h = 1.0 / (grid_resolution - 1) as f64;
    let axis: Vec<f64> = (0..grid_resolution).map(|k| k as f64 * h).collect();

    let mut best: Option<(f64, Point)> = None;
    let mut evaluations = 0;
    for &alpha in &axis {
        for &r in &axis {
            for &s in &axis {
                let x = [alpha, r, s];
                evaluations += 1;
                if let Some(obj) = reduced_objective(&x) {
                    if best.is_none_or(|(b, _)| obj < b) {
                        best = Some((obj, x));
                    }
                }
            }
        }
    }
    let (mut obj, mut x) = best.ok_or_else(|| {
        Error::InvalidParameter("no feasible grid point; increase the resolution".into())
    })?;

    let mut window = h;
    let mut sweeps = 0;
    while sweeps < refine_iterations && window > 1e-13 {
        sweeps += 1;
        let before = obj;
        for k in 0..3 {
            let along = |z: f64| {
                let mut y = x;
                y[k] = z;
                reduced_objective(&y).map_or(f64::NEG_INFINITY, |o| -o)
            };
            let lo = (x[k] - window).max(0.0);
            let hi = (x[k] + window).min(1.0);
            let m = golden_section_max(along, lo, hi, window * 1e-3);
            if -m.value < obj {
                obj = -m.value;
                x[k] = m.argmax;
            }
        }
        // shrink once a sweep stops paying off
        if before - obj < 1e-15 {
            window *= 0.5;
        }
    }

    let params = params_at(&x)
        .ok_or_else(|| Error::InvalidParameter("refinement left the feasible region".into()))?;
    Ok(TwoBidderCceSolution {
        objective: params.objective().unwrap_or(obj),
        params,
        grid_evaluations: evaluations,
        refine_sweeps: sweeps,
    })
}
