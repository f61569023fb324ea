//! Game files, random instance generation, and batch experiments.

use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bayesian::{pure_bayes_nash, BayesianGame, BidderType};
use crate::bounds::{
    bayesian_poa_report, poa_report, smoothness_certificate, DeviationInstance,
    DiscreteDistribution, PoAReport, SmoothnessParams,
};
use crate::error::{Error, Result};
use crate::mechanism::{Bidder, Game};
use crate::solvers::{optimal_welfare, pure_nash, SolverConfig};
use crate::valuations::ValuationFunction;

/// Tolerance handed to the welfare benchmarks.
pub const BENCHMARK_TOLERANCE: f64 = 1e-12;

/// A full-information or Bayesian game.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GameSpec {
    Full(Game),
    Bayesian(BayesianGame),
}

impl GameSpec {
    pub fn len(&self) -> usize {
        match self {
            GameSpec::Full(g) => g.len(),
            GameSpec::Bayesian(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parses a JSON game file: `{"bidders": [{"valuation": .., "budget": ..}]}`,
/// or, when any bidder carries a `types` list, the Bayesian form
/// `{"bidders": [{"types": [{"valuation": .., "budget": .., "prob": ..}]}]}`.
///
/// Syntax errors come back as [`Error::Parse`], invalid games as
/// [`Error::InvalidGame`]; both carry the line and column.
pub fn parse_game_spec(text: &str) -> Result<GameSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let bayesian = value
        .get("bidders")
        .and_then(Value::as_array)
        .is_some_and(|bs| bs.iter().any(|b| b.get("types").is_some()));
    let invalid = |e: serde_json::Error| Error::InvalidGame(e.to_string());
    if bayesian {
        serde_json::from_str(text)
            .map(GameSpec::Bayesian)
            .map_err(invalid)
    } else {
        serde_json::from_str(text)
            .map(GameSpec::Full)
            .map_err(invalid)
    }
}

pub fn read_game_spec(path: &std::path::Path) -> Result<GameSpec> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_game_spec(&text)
}

/// Relative weights of the valuation families drawn by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyMix {
    pub linear: f64,
    pub power: f64,
    pub piecewise: f64,
}

impl Default for FamilyMix {
    fn default() -> Self {
        FamilyMix {
            linear: 0.4,
            power: 0.4,
            piecewise: 0.2,
        }
    }
}

/// Per-instance checks an experiment can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentCheck {
    /// Welfare ratios against the proven lower bounds.
    Thresholds,
    /// `sum u >= SW*/2 - sum_i x*_i B_-i` at the optimal allocation `x*`
    /// (full-information unbudgeted games only).
    Smoothness,
    /// Certified epsilon at most `epsilon_tolerance`.
    Epsilon,
}

/// Generator settings and checks for a batch of random games. Missing fields
/// take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub instances: usize,
    /// Inclusive range of the number of bidders.
    pub bidders: [usize; 2],
    pub mix: FamilyMix,
    /// Slopes of linear and piecewise-linear valuations, coefficients of
    /// power valuations.
    pub slope: [f64; 2],
    pub exponent: [f64; 2],
    /// Inclusive range of piecewise-linear segment counts.
    pub segments: [usize; 2],
    pub budgeted: bool,
    /// Budgets are log-uniform in this range.
    pub budget: [f64; 2],
    /// Inclusive range of types per bidder; `None` for full information.
    pub types: Option<[usize; 2]>,
    pub checks: Vec<ExperimentCheck>,
    pub solver: SolverConfig,
    pub epsilon_tolerance: f64,
    /// Largest tolerated fraction of non-converged or failed instances.
    pub max_flagged_rate: f64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            seed: 0,
            instances: 100,
            bidders: [2, 6],
            mix: FamilyMix::default(),
            slope: [0.1, 2.0],
            exponent: [0.3, 1.0],
            segments: [2, 4],
            budgeted: false,
            budget: [0.01, 1.0],
            types: None,
            checks: vec![
                ExperimentCheck::Thresholds,
                ExperimentCheck::Smoothness,
                ExperimentCheck::Epsilon,
            ],
            solver: SolverConfig::default(),
            epsilon_tolerance: 1e-6,
            max_flagged_rate: 0.01,
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.instances == 0 {
            return bad("instances must be at least 1".into());
        }
        let [lo, hi] = self.bidders;
        if lo < 2 || hi < lo {
            return bad(format!(
                "bidder range [{lo}, {hi}] must satisfy 2 <= lo <= hi"
            ));
        }
        let FamilyMix {
            linear,
            power,
            piecewise,
        } = self.mix;
        if [linear, power, piecewise]
            .iter()
            .any(|w| !(w.is_finite() && *w >= 0.0))
            || linear + power + piecewise <= 0.0
        {
            return bad("family weights must be non-negative and not all 0".into());
        }
        let [a, b] = self.slope;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return bad(format!("slope range [{a}, {b}] must satisfy 0 < lo <= hi"));
        }
        let [a, b] = self.exponent;
        if !(a > 0.0 && a <= b && b <= 1.0) {
            return bad(format!("exponent range [{a}, {b}] must lie in (0, 1]"));
        }
        let [a, b] = self.segments;
        if a < 1 || b < a {
            return bad(format!(
                "segment range [{a}, {b}] must satisfy 1 <= lo <= hi"
            ));
        }
        let [a, b] = self.budget;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return bad(format!("budget range [{a}, {b}] must satisfy 0 < lo <= hi"));
        }
        if let Some([a, b]) = self.types {
            if a < 1 || b < a {
                return bad(format!("type range [{a}, {b}] must satisfy 1 <= lo <= hi"));
            }
        }
        if self.epsilon_tolerance.is_nan() || self.epsilon_tolerance < 0.0 {
            return bad("epsilon_tolerance must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.max_flagged_rate) {
            return bad("max_flagged_rate must lie in [0, 1]".into());
        }
        self.solver.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn runs(&self, check: ExperimentCheck) -> bool {
        self.checks.contains(&check)
    }
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// A valuation drawn from the experiment's family mix and parameter ranges.
pub fn random_valuation<R: Rng + ?Sized>(spec: &ExperimentSpec, rng: &mut R) -> ValuationFunction {
    let FamilyMix {
        linear,
        power,
        piecewise,
    } = spec.mix;
    let pick = rng.random::<f64>() * (linear + power + piecewise);
    if pick < linear {
        ValuationFunction::linear(uniform(rng, spec.slope))
    } else if pick < linear + power {
        ValuationFunction::power(uniform(rng, spec.slope), uniform(rng, spec.exponent))
    } else {
        let k = rng.random_range(spec.segments[0]..=spec.segments[1]);
        let mut cuts: Vec<f64> = (1..k).map(|_| rng.random::<f64>()).collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        let mut slopes: Vec<f64> = (0..k).map(|_| uniform(rng, spec.slope)).collect();
        slopes.sort_by(|a, b| b.total_cmp(a));
        let segments: Vec<(f64, f64)> = cuts
            .windows(2)
            .zip(slopes)
            .filter(|(w, _)| w[1] > w[0])
            .map(|(w, s)| (w[1] - w[0], s))
            .collect();
        ValuationFunction::from_slopes(segments)
    }
}

fn random_budget<R: Rng + ?Sized>(spec: &ExperimentSpec, rng: &mut R) -> f64 {
    if spec.budgeted {
        let [lo, hi] = spec.budget;
        uniform(rng, [lo.ln(), hi.ln()]).exp()
    } else {
        f64::INFINITY
    }
}

/// The `index`-th game of an experiment; a pure function of the experiment seed
/// and `index`.
pub fn generate_random_game(spec: &ExperimentSpec, index: usize) -> Result<GameSpec> {
    spec.validate()?;
    let mut rng = instance_rng(spec.seed, index);
    let n = rng.random_range(spec.bidders[0]..=spec.bidders[1]);
    match spec.types {
        None => {
            let bidders = (0..n)
                .map(|_| {
                    let v = random_valuation(spec, &mut rng);
                    Bidder::new(v, random_budget(spec, &mut rng))
                })
                .collect();
            Ok(GameSpec::Full(Game::new(bidders)?))
        }
        Some([lo, hi]) => {
            let bidders = (0..n)
                .map(|_| {
                    let k = rng.random_range(lo..=hi);
                    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..=1.0)).collect();
                    let mass: f64 = weights.iter().sum();
                    weights
                        .iter()
                        .map(|w| {
                            let v = random_valuation(spec, &mut rng);
                            BidderType::new(v, random_budget(spec, &mut rng), w / mass)
                        })
                        .collect()
                })
                .collect();
            Ok(GameSpec::Bayesian(BayesianGame::new(bidders)?))
        }
    }
}

/// The `index`-th random deviation-bound instance for `seed`: a valuation
/// from the default generator mix, `z` uniform in `[0, 1]`, `mu` uniform in
/// `(1/3, 2]`, and an opponent total with 1 to 5 support points in `[0, 2]`.
pub fn random_deviation_instance(seed: u64, index: usize) -> DeviationInstance {
    let spec = ExperimentSpec::default();
    let mut rng = instance_rng(seed, index);
    let valuation = random_valuation(&spec, &mut rng);
    let z = rng.random::<f64>();
    let mu = 1.0 / 3.0 + (2.0 - 1.0 / 3.0) * (1.0 - rng.random::<f64>());
    let k = rng.random_range(1..=5);
    let mut support: Vec<(f64, f64)> = (0..k)
        .map(|_| (2.0 * rng.random::<f64>(), rng.random_range(0.05..=1.0)))
        .collect();
    if support.iter().all(|(g, _)| *g == 0.0) {
        support[0].0 = 1.0;
    }
    let mass: f64 = support.iter().map(|(_, p)| p).sum();
    for (_, p) in &mut support {
        *p /= mass;
    }
    DeviationInstance {
        valuation,
        z,
        mu,
        gamma: DiscreteDistribution::new(support).expect("normalized support"),
    }
}

/// One CSV row per instance. Empty cells mark quantities that were not
/// computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRow {
    pub game: usize,
    pub bidders: usize,
    pub bayesian: bool,
    pub budgeted: bool,
    pub converged: bool,
    pub iterations: usize,
    pub epsilon: Option<f64>,
    pub sw: Option<f64>,
    pub sw_star: Option<f64>,
    pub ew: Option<f64>,
    pub ew_star: Option<f64>,
    pub ratio_sw: Option<f64>,
    pub ratio_ew: Option<f64>,
    pub ratio_sw_ew: Option<f64>,
    pub smoothness_slack: Option<f64>,
    pub violations: Option<usize>,
    pub error: Option<String>,
}

impl InstanceRow {
    fn flagged(&self) -> bool {
        !self.converged || self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub instances: usize,
    pub converged: usize,
    pub non_converged: usize,
    pub errors: usize,
    pub violations: usize,
    pub flagged_rate: f64,
    pub min_ratio_sw: Option<f64>,
    pub mean_ratio_sw: Option<f64>,
    pub min_ratio_ew: Option<f64>,
    pub mean_ratio_ew: Option<f64>,
    pub min_ratio_sw_ew: Option<f64>,
    pub min_smoothness_slack: Option<f64>,
    pub max_epsilon: Option<f64>,
    /// No violations, no hard errors, and the flagged rate within bounds.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub rows: Vec<InstanceRow>,
}

impl ExperimentReport {
    /// Rows as CSV with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

fn blank_row(index: usize, bidders: usize, bayesian: bool, budgeted: bool) -> InstanceRow {
    InstanceRow {
        game: index,
        bidders,
        bayesian,
        budgeted,
        converged: false,
        iterations: 0,
        epsilon: None,
        sw: None,
        sw_star: None,
        ew: None,
        ew_star: None,
        ratio_sw: None,
        ratio_ew: None,
        ratio_sw_ew: None,
        smoothness_slack: None,
        violations: None,
        error: None,
    }
}

fn fill_report(row: &mut InstanceRow, report: &PoAReport, spec: &ExperimentSpec) {
    row.sw = Some(report.sw);
    row.sw_star = Some(report.sw_star);
    row.ew = Some(report.ew);
    row.ew_star = Some(report.ew_star);
    row.ratio_sw = report.ratio_sw;
    row.ratio_ew = report.ratio_ew;
    row.ratio_sw_ew = report.ratio_sw_ew;
    if spec.runs(ExperimentCheck::Thresholds) {
        row.violations = Some(report.violations());
    }
}

fn add_violations(row: &mut InstanceRow, count: usize) {
    row.violations = Some(row.violations.unwrap_or(0) + count);
}

fn solve_full(game: &Game, spec: &ExperimentSpec, row: &mut InstanceRow) -> Result<()> {
    let eq = pure_nash(game, &spec.solver)?;
    row.converged = eq.converged;
    row.iterations = eq.iterations;
    row.epsilon = Some(eq.epsilon);
    if !eq.converged {
        return Ok(());
    }
    fill_report(row, &poa_report(game, &eq, BENCHMARK_TOLERANCE)?, spec);
    if spec.runs(ExperimentCheck::Epsilon) {
        add_violations(row, usize::from(eq.epsilon > spec.epsilon_tolerance));
    }
    if spec.runs(ExperimentCheck::Smoothness) && !game.is_budgeted() {
        let opt = optimal_welfare(game, BENCHMARK_TOLERANCE);
        let c = smoothness_certificate(
            game,
            &eq.bids,
            &opt.allocation,
            SmoothnessParams::new(0.5, 1.0)?,
        )?;
        row.smoothness_slack = Some(c.slack());
        add_violations(row, usize::from(!c.holds));
    }
    Ok(())
}

fn solve_bayesian(
    bgame: &BayesianGame,
    spec: &ExperimentSpec,
    row: &mut InstanceRow,
) -> Result<()> {
    let res = pure_bayes_nash(bgame, &spec.solver)?;
    row.converged = res.converged;
    row.iterations = res.iterations;
    row.epsilon = Some(res.epsilon);
    if !res.converged {
        return Ok(());
    }
    fill_report(
        row,
        &bayesian_poa_report(bgame, &res, BENCHMARK_TOLERANCE)?,
        spec,
    );
    if spec.runs(ExperimentCheck::Epsilon) {
        add_violations(row, usize::from(res.epsilon > spec.epsilon_tolerance));
    }
    Ok(())
}

/// Generates, solves and checks a single instance; failures are recorded in
/// the row rather than returned.
pub fn run_instance(spec: &ExperimentSpec, index: usize) -> InstanceRow {
    let game = match generate_random_game(spec, index) {
        Ok(g) => g,
        Err(e) => {
            let mut row = blank_row(index, 0, spec.types.is_some(), spec.budgeted);
            row.error = Some(e.to_string());
            return row;
        }
    };
    let (mut row, outcome) = match &game {
        GameSpec::Full(g) => {
            let mut row = blank_row(index, g.len(), false, g.is_budgeted());
            let out = solve_full(g, spec, &mut row);
            (row, out)
        }
        GameSpec::Bayesian(g) => {
            let mut row = blank_row(index, g.len(), true, spec.budgeted);
            let out = solve_bayesian(g, spec, &mut row);
            (row, out)
        }
    };
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row
}

fn summarize(spec: &ExperimentSpec, rows: &[InstanceRow]) -> ExperimentSummary {
    let min = |f: &dyn Fn(&InstanceRow) -> Option<f64>| rows.iter().filter_map(f).reduce(f64::min);
    let mean = |f: &dyn Fn(&InstanceRow) -> Option<f64>| {
        let vals: Vec<f64> = rows.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let converged = rows.iter().filter(|r| r.converged).count();
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let violations = rows.iter().filter_map(|r| r.violations).sum();
    let flagged_rate = rows.iter().filter(|r| r.flagged()).count() as f64 / rows.len() as f64;
    ExperimentSummary {
        instances: rows.len(),
        converged,
        non_converged: rows.len() - converged,
        errors,
        violations,
        flagged_rate,
        min_ratio_sw: min(&|r| r.ratio_sw),
        mean_ratio_sw: mean(&|r| r.ratio_sw),
        min_ratio_ew: min(&|r| r.ratio_ew),
        mean_ratio_ew: mean(&|r| r.ratio_ew),
        min_ratio_sw_ew: min(&|r| r.ratio_sw_ew),
        min_smoothness_slack: min(&|r| r.smoothness_slack),
        max_epsilon: rows.iter().filter_map(|r| r.epsilon).reduce(f64::max),
        passed: violations == 0 && errors == 0 && flagged_rate <= spec.max_flagged_rate,
    }
}

/// Runs every instance (in parallel) and summarizes. Rows are in index
/// order, so a fixed spec always yields the same CSV bytes.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let rows: Vec<InstanceRow> = (0..spec.instances)
        .into_par_iter()
        .map(|i| run_instance(spec, i))
        .collect();
    Ok(ExperimentReport {
        summary: summarize(spec, &rows),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::budget_example_game;

    const TWO_LINEAR: &str = r#"{"bidders": [
        {"valuation": {"kind": "linear", "slope": 1.0}},
        {"valuation": {"kind": "linear", "slope": 0.5}, "budget": null}
    ]}"#;

    #[test]
    fn parses_full_information_game() {
        let GameSpec::Full(g) = parse_game_spec(TWO_LINEAR).unwrap() else {
            panic!("expected a full-information game");
        };
        assert_eq!(g.len(), 2);
        assert!(!g.is_budgeted());
    }

    #[test]
    fn parses_budget_example() {
        let text = r#"{"bidders": [
            {"valuation": {"kind": "linear", "slope": 1.0}, "budget": 0.2222222222222222},
            {"valuation": {"kind": "linear", "slope": 0.5}}
        ]}"#;
        let GameSpec::Full(g) = parse_game_spec(text).unwrap() else {
            panic!("expected a full-information game");
        };
        assert_eq!(g, budget_example_game(0.5).unwrap());
    }

    #[test]
    fn parses_bayesian_game() {
        let text = r#"{"bidders": [
            {"types": [{"valuation": {"kind": "linear", "slope": 1.0}, "prob": 1.0}]},
            {"types": [
                {"valuation": {"kind": "linear", "slope": 1.0}, "prob": 0.5},
                {"valuation": {"kind": "power", "coef": 1.0, "exp": 0.5}, "budget": 0.3, "prob": 0.5}
            ]}
        ]}"#;
        let GameSpec::Bayesian(g) = parse_game_spec(text).unwrap() else {
            panic!("expected a Bayesian game");
        };
        assert_eq!(g.type_counts(), vec![1, 2]);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let text = r#"{"bidders": [
            {"types": [{"valuation": {"kind": "linear", "slope": 1.0}, "prob": 1.0}]},
            {"types": [
                {"valuation": {"kind": "linear", "slope": 1.0}, "prob": 0.5},
                {"valuation": {"kind": "linear", "slope": 0.5}, "prob": 0.4}
            ]}
        ]}"#;
        let err = parse_game_spec(text).unwrap_err();
        assert!(matches!(err, Error::InvalidGame(_)), "{err}");
        assert!(err.to_string().contains("bidder 1"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_game_spec("{\"bidders\": [\n  {\"valuation\": }\n]}").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn invalid_valuation_names_bidder() {
        let text = r#"{"bidders": [
            {"valuation": {"kind": "linear", "slope": 1.0}},
            {"valuation": {"kind": "pwl", "knots": [[0, 0], [0.5, 1], [1, 3]]}}
        ]}"#;
        let err = parse_game_spec(text).unwrap_err();
        assert!(err.to_string().contains("bidder 1"), "{err}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ExperimentSpec {
            seed: 7,
            ..ExperimentSpec::default()
        };
        assert_eq!(
            generate_random_game(&spec, 3).unwrap(),
            generate_random_game(&spec, 3).unwrap()
        );
        assert_ne!(
            generate_random_game(&spec, 3).unwrap(),
            generate_random_game(&spec, 4).unwrap()
        );
    }

    #[test]
    fn unbudgeted_spec_gives_infinite_budgets() {
        let spec = ExperimentSpec::default();
        for i in 0..50 {
            let GameSpec::Full(g) = generate_random_game(&spec, i).unwrap() else {
                panic!("expected a full-information game");
            };
            assert!(g.bidders().iter().all(|b| b.budget == f64::INFINITY));
        }
    }

    #[test]
    fn generated_games_validate() {
        let spec = ExperimentSpec {
            budgeted: true,
            ..ExperimentSpec::default()
        };
        for i in 0..1000 {
            let GameSpec::Full(g) = generate_random_game(&spec, i).unwrap() else {
                panic!("expected a full-information game");
            };
            assert!((2..=6).contains(&g.len()));
            for b in g.bidders() {
                assert!(b.valuation.validate().is_valid());
                assert!((0.01..=1.0).contains(&b.budget));
            }
        }
        let spec = ExperimentSpec {
            types: Some([2, 3]),
            ..ExperimentSpec::default()
        };
        for i in 0..100 {
            assert!(matches!(
                generate_random_game(&spec, i).unwrap(),
                GameSpec::Bayesian(_)
            ));
        }
    }

    #[test]
    fn spec_validation() {
        let bad = [
            r#"{"instances": 0}"#,
            r#"{"bidders": [1, 3]}"#,
            r#"{"exponent": [0.5, 1.5]}"#,
            r#"{"budget": [0, 1]}"#,
            r#"{"mix": {"linear": 0, "power": 0, "piecewise": 0}}"#,
            r#"{"unknown": 1}"#,
        ];
        for text in bad {
            assert!(ExperimentSpec::from_json(text).is_err(), "{text}");
        }
        let spec = ExperimentSpec::from_json(r#"{"seed": 3, "instances": 5}"#).unwrap();
        assert_eq!(spec.bidders, [2, 6]);
    }

    #[test]
    fn experiment_is_reproducible() {
        let spec = ExperimentSpec {
            seed: 11,
            instances: 40,
            ..ExperimentSpec::default()
        };
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert!(a.summary.passed, "{:?}", a.summary);
        assert_eq!(a.rows.len(), 40);
        assert!(a.rows.iter().enumerate().all(|(i, r)| r.game == i));
        assert!(a.summary.min_ratio_sw.unwrap() >= 0.75 - 1e-6);
    }

    #[test]
    fn empty_check_list_reports_welfare_only() {
        let spec = ExperimentSpec {
            instances: 5,
            checks: vec![],
            ..ExperimentSpec::default()
        };
        let report = run_experiment(&spec).unwrap();
        for row in &report.rows {
            assert!(row.sw.is_some() && row.ratio_sw.is_some());
            assert!(row.violations.is_none() && row.smoothness_slack.is_none());
        }
        assert_eq!(report.summary.violations, 0);
    }

    #[test]
    fn random_deviation_instances_hold() {
        for i in 0..500 {
            let inst = random_deviation_instance(5, i);
            assert!(inst.mu > 1.0 / 3.0 && inst.mu <= 2.0);
            let c = inst.check().unwrap();
            assert!(c.holds, "{inst:?} {c:?}");
        }
        assert_eq!(
            random_deviation_instance(5, 9),
            random_deviation_instance(5, 9)
        );
    }

    #[test]
    fn bayesian_experiment_runs() {
        let spec = ExperimentSpec {
            instances: 10,
            bidders: [2, 3],
            types: Some([2, 3]),
            ..ExperimentSpec::default()
        };
        let report = run_experiment(&spec).unwrap();
        assert!(report.summary.passed, "{:?}", report.summary);
    }
}
