//! The proportional allocation mechanism.
//!
//! Bidder `i` receives `d_i = b_i / B` where `B` is the sum of all bids and
//! pays `b_i`, so its utility is `v_i(d_i) - b_i`. An all-zero bid vector
//! allocates nothing to anyone and is flagged as degenerate.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::valuations::ValuationFunction;

/// A bidder: a valuation and a budget (`+inf` when unconstrained).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bidder {
    pub valuation: ValuationFunction,
    #[serde(
        default = "unbounded",
        serialize_with = "ser_budget",
        deserialize_with = "de_budget"
    )]
    pub budget: f64,
}

fn unbounded() -> f64 {
    f64::INFINITY
}

pub(crate) fn ser_budget<S: Serializer>(
    budget: &f64,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    if budget.is_finite() {
        s.serialize_some(budget)
    } else {
        s.serialize_none()
    }
}

pub(crate) fn de_budget<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl Bidder {
    pub fn new(valuation: ValuationFunction, budget: f64) -> Self {
        Bidder { valuation, budget }
    }

    pub fn unbudgeted(valuation: ValuationFunction) -> Self {
        Bidder::new(valuation, f64::INFINITY)
    }

    pub fn is_budgeted(&self) -> bool {
        self.budget.is_finite()
    }

    pub(crate) fn check(&self, index: usize) -> Result<()> {
        self.valuation
            .validate()
            .into_result()
            .map_err(|e| Error::InvalidGame(format!("bidder {index}: {e}")))?;
        if self.budget.is_nan() || self.budget <= 0.0 {
            return Err(Error::InvalidGame(format!(
                "bidder {index}: budget {} must be positive",
                self.budget
            )));
        }
        Ok(())
    }
}

/// A full-information game among at least two bidders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Game {
    bidders: Vec<Bidder>,
}

impl Game {
    pub fn new(bidders: Vec<Bidder>) -> Result<Self> {
        if bidders.len() < 2 {
            return Err(Error::InvalidGame(format!(
                "a game needs at least 2 bidders, got {}",
                bidders.len()
            )));
        }
        for (i, b) in bidders.iter().enumerate() {
            b.check(i)?;
        }
        Ok(Game { bidders })
    }

    /// All bidders unbudgeted.
    pub fn from_valuations(
        valuations: impl IntoIterator<Item = ValuationFunction>,
    ) -> Result<Self> {
        Game::new(valuations.into_iter().map(Bidder::unbudgeted).collect())
    }

    pub fn bidders(&self) -> &[Bidder] {
        &self.bidders
    }

    pub fn len(&self) -> usize {
        self.bidders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bidders.is_empty()
    }

    pub fn is_budgeted(&self) -> bool {
        self.bidders.iter().any(Bidder::is_budgeted)
    }

    /// A bid profile checked against this game's size and budgets.
    pub fn profile(&self, bids: Vec<f64>) -> Result<BidProfile> {
        check_len(self.len(), bids.len())?;
        let profile = BidProfile::new(bids)?;
        for (i, (bid, bidder)) in profile.bids.iter().zip(&self.bidders).enumerate() {
            if *bid > bidder.budget {
                return Err(Error::InfeasibleBid {
                    bidder: i,
                    bid: *bid,
                    budget: bidder.budget,
                });
            }
        }
        Ok(profile)
    }
}

impl<'de> Deserialize<'de> for Game {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            bidders: Vec<Bidder>,
        }
        let raw = Raw::deserialize(d)?;
        Game::new(raw.bidders).map_err(serde::de::Error::custom)
    }
}

/// Non-negative bids, one per bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidProfile {
    bids: Vec<f64>,
}

impl BidProfile {
    pub fn new(bids: Vec<f64>) -> Result<Self> {
        if let Some((i, b)) = bids
            .iter()
            .enumerate()
            .find(|(_, b)| !b.is_finite() || **b < 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "bid {b} of bidder {i} must be finite and non-negative"
            )));
        }
        Ok(BidProfile { bids })
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.bids.iter().sum()
    }

    /// Sum of the bids of everyone except `i`.
    pub fn others(&self, i: usize) -> f64 {
        self.bids
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, b)| b)
            .sum()
    }

    pub fn into_bids(self) -> Vec<f64> {
        self.bids
    }
}

/// Resource shares, one per bidder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub shares: Vec<f64>,
    /// Set when derived from an all-zero bid vector.
    pub degenerate: bool,
}

impl Allocation {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if let Some(s) = shares.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Domain {
                x: *s,
                domain: "[0, 1]",
            });
        }
        let total: f64 = shares.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "shares sum to {total} > 1"
            )));
        }
        Ok(Allocation {
            shares,
            degenerate: false,
        })
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }
}

/// Share obtained by bidding `bid` against opponents bidding `others` in total.
pub fn share(bid: f64, others: f64) -> f64 {
    let total = bid + others;
    if total > 0.0 {
        bid / total
    } else {
        0.0
    }
}

/// `d_i = b_i / sum_j b_j`; all zeros (flagged degenerate) when every bid is 0.
pub fn allocate(profile: &BidProfile) -> Allocation {
    let total = profile.total();
    if total > 0.0 {
        Allocation {
            shares: profile.bids().iter().map(|b| b / total).collect(),
            degenerate: false,
        }
    } else {
        Allocation {
            shares: vec![0.0; profile.len()],
            degenerate: true,
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, actual })
    }
}

/// `u_i = v_i(d_i) - b_i` for every bidder.
pub fn utility_profile(game: &Game, profile: &BidProfile) -> Result<Vec<f64>> {
    check_len(game.len(), profile.len())?;
    let alloc = allocate(profile);
    Ok(game
        .bidders()
        .iter()
        .zip(alloc.shares.iter().zip(profile.bids()))
        .map(|(bidder, (d, b))| bidder.valuation.value(*d) - b)
        .collect())
}

/// `SW(d) = sum_i v_i(d_i)`.
pub fn social_welfare(game: &Game, alloc: &Allocation) -> Result<f64> {
    welfare_of(game.bidders(), alloc)
}

pub(crate) fn welfare_of(bidders: &[Bidder], alloc: &Allocation) -> Result<f64> {
    check_len(bidders.len(), alloc.len())?;
    Ok(bidders
        .iter()
        .zip(&alloc.shares)
        .map(|(b, d)| b.valuation.value(*d))
        .sum())
}

/// `EW(d) = sum_i min(v_i(d_i), c_i)`.
pub fn effective_welfare(game: &Game, alloc: &Allocation) -> Result<f64> {
    effective_welfare_of(game.bidders(), alloc)
}

pub(crate) fn effective_welfare_of(bidders: &[Bidder], alloc: &Allocation) -> Result<f64> {
    check_len(bidders.len(), alloc.len())?;
    Ok(bidders
        .iter()
        .zip(&alloc.shares)
        .map(|(b, d)| b.valuation.value(*d).min(b.budget))
        .sum())
}

/// Effective welfare of the random allocation induced by `dist`:
/// `sum_i min(E[v_i(d_i)], c_i)`.
pub fn effective_welfare_random(game: &Game, dist: &CorrelatedBidDistribution) -> Result<f64> {
    check_len(game.len(), dist.num_bidders())?;
    let expected = dist.expected_values(game);
    Ok(game
        .bidders()
        .iter()
        .zip(expected)
        .map(|(b, ev)| ev.min(b.budget))
        .sum())
}

/// A finite-support, possibly correlated, distribution over bid profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelatedBidDistribution {
    support: Vec<(BidProfile, f64)>,
}

impl CorrelatedBidDistribution {
    /// Checks probabilities (non-negative, summing to 1 within 1e-12) and
    /// budget feasibility of every profile against `game`.
    pub fn new(game: &Game, support: Vec<(BidProfile, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let mut total = 0.0;
        for (profile, p) in &support {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} must be non-negative"
                )));
            }
            game.profile(profile.bids().to_vec())?;
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(CorrelatedBidDistribution { support })
    }

    pub fn point_mass(profile: BidProfile) -> Self {
        CorrelatedBidDistribution {
            support: vec![(profile, 1.0)],
        }
    }

    pub fn support(&self) -> &[(BidProfile, f64)] {
        &self.support
    }

    pub fn num_bidders(&self) -> usize {
        self.support.first().map_or(0, |(p, _)| p.len())
    }

    /// `E[v_i(d_i)]` for every bidder.
    pub fn expected_values(&self, game: &Game) -> Vec<f64> {
        let mut out = vec![0.0; game.len()];
        for (profile, p) in &self.support {
            let alloc = allocate(profile);
            for (acc, (b, d)) in out.iter_mut().zip(game.bidders().iter().zip(&alloc.shares)) {
                *acc += p * b.valuation.value(*d);
            }
        }
        out
    }

    /// `E[u_i]` for every bidder.
    pub fn expected_utilities(&self, game: &Game) -> Vec<f64> {
        let mut out = self.expected_values(game);
        for (profile, p) in &self.support {
            for (acc, b) in out.iter_mut().zip(profile.bids()) {
                *acc -= p * b;
            }
        }
        out
    }

    /// Expected social welfare.
    pub fn expected_social_welfare(&self, game: &Game) -> f64 {
        self.expected_values(game).iter().sum()
    }

    /// Distribution of the opponents' bid sum seen by bidder `i`, as
    /// `(value, probability)` pairs.
    pub fn opponent_totals(&self, i: usize) -> Vec<(f64, f64)> {
        self.support
            .iter()
            .map(|(profile, p)| (profile.others(i), *p))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tight_linear_game(n: usize) -> Game {
        let weak = (n as f64 - 1.0) / (2.0 * n as f64 - 3.0);
        let mut vals = vec![ValuationFunction::linear(1.0)];
        vals.extend((1..n).map(|_| ValuationFunction::linear(weak)));
        Game::from_valuations(vals).unwrap()
    }

    fn tight_linear_bids(n: usize) -> Vec<f64> {
        let mut bids = vec![0.25];
        bids.extend((1..n).map(|_| 1.0 / (4.0 * (n as f64 - 1.0))));
        bids
    }

    #[test]
    fn allocate_examples() {
        let a = allocate(&BidProfile::new(vec![0.25, 0.25]).unwrap());
        assert_eq!(a.shares, vec![0.5, 0.5]);
        assert!(!a.degenerate);

        let a = allocate(&BidProfile::new(tight_linear_bids(4)).unwrap());
        let expected = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (d, e) in a.shares.iter().zip(expected) {
            assert!((d - e).abs() < 1e-15);
        }

        let a = allocate(&BidProfile::new(vec![0.0, 0.0]).unwrap());
        assert_eq!(a.shares, vec![0.0, 0.0]);
        assert!(a.degenerate);
    }

    #[test]
    fn utility_examples() {
        let game = Game::from_valuations(vec![ValuationFunction::linear(1.0); 2]).unwrap();
        let u = utility_profile(&game, &game.profile(vec![0.25, 0.25]).unwrap()).unwrap();
        assert_eq!(u, vec![0.25, 0.25]);
        let u = utility_profile(&game, &game.profile(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(u, vec![0.0, 0.0]);

        for n in [2usize, 5, 40] {
            let game = tight_linear_game(n);
            let u = utility_profile(&game, &game.profile(tight_linear_bids(n)).unwrap()).unwrap();
            assert!((u[0] - 0.25).abs() < 1e-14);
            let rest: f64 = u[1..].iter().sum();
            assert!((rest - 1.0 / (4.0 * (2.0 * n as f64 - 3.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn utility_size_mismatch() {
        let game = tight_linear_game(3);
        let profile = BidProfile::new(vec![0.1, 0.1]).unwrap();
        assert_eq!(
            utility_profile(&game, &profile),
            Err(Error::SizeMismatch {
                expected: 3,
                actual: 2
            })
        );
    }

    #[test]
    fn social_welfare_examples() {
        let n = 100;
        let game = tight_linear_game(n);
        let sw = social_welfare(
            &game,
            &allocate(&game.profile(tight_linear_bids(n)).unwrap()),
        )
        .unwrap();
        let nf = n as f64;
        assert!((sw - (0.5 + (nf - 1.0) / (2.0 * (2.0 * nf - 3.0)))).abs() < 1e-14);

        let zero = Allocation::new(vec![0.0; n]).unwrap();
        assert_eq!(social_welfare(&game, &zero).unwrap(), 0.0);

        let sqrt = Game::from_valuations(vec![ValuationFunction::power(1.0, 0.5); 2]).unwrap();
        let sw = social_welfare(&sqrt, &Allocation::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert!((sw - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    fn budget_game(alpha: f64) -> Game {
        Game::new(vec![
            Bidder::new(
                ValuationFunction::linear(1.0),
                alpha / (1.0 + alpha).powi(2),
            ),
            Bidder::unbudgeted(ValuationFunction::linear(alpha)),
        ])
        .unwrap()
    }

    #[test]
    fn effective_welfare_examples() {
        let alpha: f64 = 0.5;
        let game = budget_game(alpha);
        let sq = (1.0 + alpha).powi(2);
        let eq = game.profile(vec![alpha / sq, alpha * alpha / sq]).unwrap();
        let ew = effective_welfare(&game, &allocate(&eq)).unwrap();
        assert!((ew - (alpha + alpha.powi(2) + alpha.powi(3)) / sq).abs() < 1e-15);
        assert!((ew - 0.388_889).abs() < 1e-6);

        let c1 = alpha / sq;
        let bench = Allocation::new(vec![c1, 1.0 - c1]).unwrap();
        let ew_star = effective_welfare(&game, &bench).unwrap();
        assert!((ew_star - (2.0 * alpha + alpha.powi(2) + alpha.powi(3)) / sq).abs() < 1e-15);
        assert!((ew_star - 0.611_111).abs() < 1e-6);

        let free = tight_linear_game(4);
        let alloc = allocate(&free.profile(tight_linear_bids(4)).unwrap());
        assert_eq!(
            effective_welfare(&free, &alloc).unwrap(),
            social_welfare(&free, &alloc).unwrap()
        );
    }

    #[test]
    fn profile_enforces_budgets() {
        let game = budget_game(0.5);
        assert!(matches!(
            game.profile(vec![0.5, 0.1]),
            Err(Error::InfeasibleBid { bidder: 0, .. })
        ));
        assert!(game.profile(vec![-0.1, 0.1]).is_err());
        assert!(game.profile(vec![0.1]).is_err());
    }

    #[test]
    fn game_needs_two_valid_bidders() {
        assert!(Game::from_valuations([ValuationFunction::linear(1.0)]).is_err());
        assert!(Game::from_valuations(vec![
            ValuationFunction::linear(1.0),
            ValuationFunction::linear(-1.0)
        ])
        .is_err());
        let zero_budget = Game::new(vec![
            Bidder::new(ValuationFunction::linear(1.0), 0.0),
            Bidder::unbudgeted(ValuationFunction::linear(1.0)),
        ]);
        assert!(zero_budget.is_err());
    }

    #[test]
    fn distribution_checks() {
        let game = budget_game(0.5);
        let p = BidProfile::new(vec![0.1, 0.1]).unwrap();
        assert!(CorrelatedBidDistribution::new(&game, vec![(p.clone(), 0.9)]).is_err());
        let over = BidProfile::new(vec![0.9, 0.1]).unwrap();
        assert!(CorrelatedBidDistribution::new(&game, vec![(over, 1.0)]).is_err());
        let dist = CorrelatedBidDistribution::new(&game, vec![(p.clone(), 1.0)]).unwrap();
        let det = effective_welfare(&game, &allocate(&p)).unwrap();
        assert_eq!(effective_welfare_random(&game, &dist).unwrap(), det);
    }

    fn random_game_and_bids() -> impl Strategy<Value = (Game, Vec<f64>)> {
        (2usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec((0.05..2.0f64, 0.2..=1.0f64, 0.01..2.0f64, any::<bool>()), n),
                prop::collection::vec(0.0..1.0f64, n),
            )
                .prop_map(|(params, bids)| {
                    let bidders = params
                        .iter()
                        .zip(&bids)
                        .map(|((c, r, budget, capped), bid)| {
                            let budget = if *capped {
                                budget.max(*bid)
                            } else {
                                f64::INFINITY
                            };
                            Bidder::new(ValuationFunction::power(*c, *r), budget)
                        })
                        .collect();
                    (Game::new(bidders).unwrap(), bids)
                })
        })
    }

    proptest! {
        #[test]
        fn welfare_accounting_identity((game, bids) in random_game_and_bids()) {
            let profile = game.profile(bids).unwrap();
            let alloc = allocate(&profile);
            let sw = social_welfare(&game, &alloc).unwrap();
            let ew = effective_welfare(&game, &alloc).unwrap();
            let u: f64 = utility_profile(&game, &profile).unwrap().iter().sum();
            prop_assert!((sw - (u + profile.total())).abs() < 1e-12);
            prop_assert!(ew <= sw + 1e-15);
            if !game.is_budgeted() {
                prop_assert_eq!(ew, sw);
            }
            let point = CorrelatedBidDistribution::point_mass(profile.clone());
            prop_assert!((effective_welfare_random(&game, &point).unwrap() - ew).abs() < 1e-15);
            if profile.total() > 0.0 {
                let s: f64 = alloc.shares.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn shares_monotone_in_bids(bids in prop::collection::vec(0.01..1.0f64, 2..6), i in 0usize..6, bump in 1e-6..0.5f64) {
            let i = i % bids.len();
            let j = (i + 1) % bids.len();
            let base = allocate(&BidProfile::new(bids.clone()).unwrap());
            let mut up = bids.clone();
            up[i] += bump;
            let raised = allocate(&BidProfile::new(up).unwrap());
            prop_assert!(raised.shares[i] > base.shares[i]);
            prop_assert!(raised.shares[j] < base.shares[j]);
        }
    }
}
