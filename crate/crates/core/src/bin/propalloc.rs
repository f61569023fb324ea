use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use propalloc::bayesian::{bayesian_welfare, pure_bayes_nash, BayesianGame};
use propalloc::bounds::{
    bayesian_poa_report, poa_report, replicate, smoothness_certificate, Case, DeviationInstance,
    PoAReport, ReplicationReport, SmoothnessParams,
};
use propalloc::harness::{
    random_deviation_instance, read_game_spec, run_experiment, ExperimentSpec, GameSpec,
    BENCHMARK_TOLERANCE,
};
use propalloc::mechanism::{BidProfile, CorrelatedBidDistribution, Game};
use propalloc::solvers::{
    best_response_dynamics, optimal_effective_welfare, optimal_welfare, pure_nash, verify_cce,
    verify_epsilon_nash, EquilibriumResult, SolverConfig,
};
use propalloc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "propalloc",
    version,
    about = "Proportional allocation games: equilibria, welfare and bounds"
)]
struct Cli {
    /// Seed for random instances (overrides the experiment file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an equilibrium or a welfare optimum.
    #[command(subcommand)]
    Solve(Solve),
    /// Certify how far a profile is from equilibrium.
    Verify(Verify),
    /// Check the welfare inequalities on instances.
    #[command(subcommand)]
    Check(Check),
    /// Rebuild a tight construction and cross-check it.
    #[command(subcommand)]
    Replicate(Replicate),
    /// Run a batch of random games described by a JSON file.
    Experiment { spec: PathBuf },
}

#[derive(Subcommand)]
enum Solve {
    /// Pure Nash equilibrium of a full-information game.
    Nash {
        game: PathBuf,
        /// Use damped best-response dynamics instead of the aggregate solver.
        #[arg(long)]
        dynamics: bool,
    },
    /// Welfare-maximizing allocation.
    Optimal {
        game: PathBuf,
        /// Maximize budget-capped (effective) welfare.
        #[arg(long)]
        effective: bool,
    },
    /// Pure Bayes-Nash equilibrium.
    Bayes { game: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    Nash,
    Cce,
}

#[derive(Args)]
struct Verify {
    kind: VerifyKind,
    game: PathBuf,
    /// `{"bids": [..]}` for nash, `{"support": [{"bids": [..], "prob": p}]}` for cce.
    profile: PathBuf,
    /// Largest acceptable epsilon.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
}

#[derive(Subcommand)]
enum Check {
    /// Deviation bound for the bid mu z E[G] against a random opponent total G.
    #[command(
        name = "lemma1",
        visible_alias = "deviation-bound",
        group = clap::ArgGroup::new("source").required(true)
    )]
    DeviationBound {
        /// Check this many random instances.
        #[arg(long, group = "source")]
        random: Option<usize>,
        /// Check the instance in this file.
        #[arg(long, group = "source")]
        instance: Option<PathBuf>,
    },
    /// Smoothness inequality at a profile against the optimal allocation.
    Smoothness {
        game: PathBuf,
        profile: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
    },
}

#[derive(Subcommand)]
enum Replicate {
    /// Linear game whose equilibrium welfare ratio tends to 3/4.
    #[command(name = "lemma3", visible_alias = "tight-linear")]
    TightLinear {
        #[arg(long, value_delimiter = ',', default_value = "100")]
        n: Vec<usize>,
    },
    /// Budget-constrained game whose effective welfare ratio tends to 1/2.
    Budget {
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.1,0.01")]
        alpha: Vec<f64>,
    },
    /// Two-bidder correlated construction program.
    #[command(name = "appendix-c", visible_alias = "two-bidder-cce")]
    TwoBidderCce {
        /// Grid points per axis.
        #[arg(long, default_value_t = 40)]
        grid: usize,
        #[arg(long, default_value_t = 200)]
        refine: usize,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportFile {
    support: Vec<SupportPoint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportPoint {
    bids: Vec<f64>,
    prob: f64,
}

/// A report plus whether it is free of violations.
struct Outcome {
    records: Vec<Value>,
    ok: bool,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn full_game(path: &Path) -> Result<Game> {
    match read_game_spec(path)? {
        GameSpec::Full(g) => Ok(g),
        GameSpec::Bayesian(_) => Err(Error::InvalidGame(format!(
            "{} is a Bayesian game; use `solve bayes`",
            path.display()
        ))),
    }
}

fn read_profile(game: &Game, path: &Path) -> Result<BidProfile> {
    let raw: BidProfile = read_json(path)?;
    game.profile(raw.into_bids())
}

fn report_fields(record: &mut Map<String, Value>, report: &PoAReport) {
    record.insert("sw_star".into(), json!(report.sw_star));
    record.insert("ew_star".into(), json!(report.ew_star));
    record.insert("ratio_sw".into(), json!(report.ratio_sw));
    record.insert("ratio_ew".into(), json!(report.ratio_ew));
    record.insert("ratio_sw_ew".into(), json!(report.ratio_sw_ew));
    record.insert("violations".into(), json!(report.violations()));
}

fn equilibrium_record(eq: &EquilibriumResult) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("bids".into(), json!(eq.bids.bids()));
    m.insert("shares".into(), json!(eq.allocation.shares));
    m.insert("epsilon".into(), json!(eq.epsilon));
    m.insert("iterations".into(), json!(eq.iterations));
    m.insert("converged".into(), json!(eq.converged));
    m.insert("sw".into(), json!(eq.sw));
    m.insert("ew".into(), json!(eq.ew));
    m
}

fn solve(cmd: &Solve) -> Result<Outcome> {
    let config = SolverConfig::default();
    match cmd {
        Solve::Nash { game, dynamics } => {
            let game = full_game(game)?;
            let eq = if *dynamics {
                best_response_dynamics(&game, &config)?
            } else {
                pure_nash(&game, &config)?
            };
            let mut record = equilibrium_record(&eq);
            let ok = if eq.converged {
                let report = poa_report(&game, &eq, BENCHMARK_TOLERANCE)?;
                report_fields(&mut record, &report);
                report.passed()
            } else {
                false
            };
            Ok(Outcome {
                records: vec![Value::Object(record)],
                ok,
            })
        }
        Solve::Optimal { game, effective } => {
            let game = full_game(game)?;
            let opt = if *effective {
                optimal_effective_welfare(&game, BENCHMARK_TOLERANCE)
            } else {
                optimal_welfare(&game, BENCHMARK_TOLERANCE)
            };
            let record = json!({
                "objective": if *effective { "effective" } else { "social" },
                "shares": opt.allocation.shares,
                "value": opt.value,
                "price": opt.price,
            });
            Ok(Outcome {
                records: vec![record],
                ok: true,
            })
        }
        Solve::Bayes { game } => {
            let bgame = match read_game_spec(game)? {
                GameSpec::Full(g) => BayesianGame::from_game(&g),
                GameSpec::Bayesian(g) => g,
            };
            let res = pure_bayes_nash(&bgame, &config)?;
            let welfare = bayesian_welfare(&bgame, &res.profile, BENCHMARK_TOLERANCE)?;
            let mut record = Map::new();
            record.insert("bids".into(), json!(res.profile.bids));
            record.insert("epsilon".into(), json!(res.epsilon));
            record.insert("iterations".into(), json!(res.iterations));
            record.insert("converged".into(), json!(res.converged));
            record.insert("sw".into(), json!(welfare.expected_sw));
            record.insert("ew".into(), json!(welfare.expected_ew));
            let ok = if res.converged {
                let report = bayesian_poa_report(&bgame, &res, BENCHMARK_TOLERANCE)?;
                report_fields(&mut record, &report);
                report.passed()
            } else {
                false
            };
            Ok(Outcome {
                records: vec![Value::Object(record)],
                ok,
            })
        }
    }
}

fn verify(cmd: &Verify) -> Result<Outcome> {
    let config = SolverConfig::default();
    let game = full_game(&cmd.game)?;
    let (kind, epsilon) = match cmd.kind {
        VerifyKind::Nash => {
            let profile = read_profile(&game, &cmd.profile)?;
            ("nash", verify_epsilon_nash(&game, &profile, &config)?)
        }
        VerifyKind::Cce => {
            let file: SupportFile = read_json(&cmd.profile)?;
            let support = file
                .support
                .into_iter()
                .map(|p| Ok((game.profile(p.bids)?, p.prob)))
                .collect::<Result<Vec<_>>>()?;
            let dist = CorrelatedBidDistribution::new(&game, support)?;
            ("cce", verify_cce(&game, &dist, &config)?)
        }
    };
    let ok = epsilon <= cmd.epsilon;
    Ok(Outcome {
        records: vec![
            json!({"kind": kind, "epsilon": epsilon, "tolerance": cmd.epsilon, "passed": ok}),
        ],
        ok,
    })
}

fn deviation_record(index: usize, inst: &DeviationInstance) -> Result<(Value, bool)> {
    let c = inst.check()?;
    let record = json!({
        "instance": index,
        "valuation": inst.valuation.to_string(),
        "z": inst.z,
        "mu": inst.mu,
        "mean_gamma": inst.gamma.mean(),
        "lhs": c.lhs,
        "rhs": c.rhs,
        "slack": c.slack(),
        "holds": c.holds,
    });
    Ok((record, c.holds))
}

fn check(cmd: &Check, seed: u64) -> Result<Outcome> {
    match cmd {
        Check::DeviationBound { random, instance } => {
            let instances: Vec<DeviationInstance> = match (random, instance) {
                (Some(n), _) => (0..*n)
                    .map(|i| random_deviation_instance(seed, i))
                    .collect(),
                (None, Some(path)) => vec![read_json(path)?],
                (None, None) => unreachable!("clap requires a source"),
            };
            let mut records = Vec::with_capacity(instances.len());
            let mut failures = 0;
            for (i, inst) in instances.iter().enumerate() {
                let (record, holds) = deviation_record(i, inst)?;
                failures += usize::from(!holds);
                records.push(record);
            }
            eprintln!("{} instances, {failures} violations", instances.len());
            Ok(Outcome {
                records,
                ok: failures == 0,
            })
        }
        Check::Smoothness {
            game,
            profile,
            lambda,
            mu,
        } => {
            let game = full_game(game)?;
            let profile = read_profile(&game, profile)?;
            let opt = optimal_welfare(&game, BENCHMARK_TOLERANCE);
            let c = smoothness_certificate(
                &game,
                &profile,
                &opt.allocation,
                SmoothnessParams::new(*lambda, *mu)?,
            )?;
            Ok(Outcome {
                records: vec![json!({
                    "lambda": lambda,
                    "mu": mu,
                    "lhs": c.lhs,
                    "rhs": c.rhs,
                    "slack": c.slack(),
                    "holds": c.holds,
                })],
                ok: c.holds,
            })
        }
    }
}

fn replication_records(report: &ReplicationReport, records: &mut Vec<Value>) {
    for c in &report.checks {
        records.push(json!({
            "case": report.case,
            "check": c.name,
            "expected": c.expected,
            "actual": c.actual,
            "deviation": c.deviation,
            "tolerance": c.tolerance,
            "passed": c.passed,
        }));
    }
    for note in &report.notes {
        eprintln!("{}: {note}", report.case);
    }
}

fn replicate_cmd(cmd: &Replicate) -> Result<Outcome> {
    let cases: Vec<Case> = match cmd {
        Replicate::TightLinear { n } => n.iter().map(|&n| Case::TightLinear { n }).collect(),
        Replicate::Budget { alpha } => alpha
            .iter()
            .map(|&alpha| Case::BudgetExample { alpha })
            .collect(),
        Replicate::TwoBidderCce { grid, refine } => vec![Case::TwoBidderCce {
            grid_resolution: *grid,
            refine_iterations: *refine,
        }],
    };
    let mut records = Vec::new();
    let mut ok = true;
    for case in cases {
        let report = replicate(case)?;
        ok &= report.passed();
        replication_records(&report, &mut records);
    }
    Ok(Outcome { records, ok })
}

fn experiment(path: &Path, cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut spec = ExperimentSpec::from_json(&text)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let report = run_experiment(&spec)?;
    let s = &report.summary;
    eprintln!(
        "{} instances: {} converged, {} errors, {} violations, min ratio_sw {:?}, min ratio_ew {:?}",
        s.instances, s.converged, s.errors, s.violations, s.min_ratio_sw, s.min_ratio_ew
    );
    let records = match cli.format {
        Format::Csv => serde_json::to_value(&report.rows),
        Format::Json => serde_json::to_value(&report),
    }
    .map_err(|e| Error::Parse(e.to_string()))?;
    let records = match records {
        Value::Array(rows) => rows,
        other => vec![other],
    };
    let ok = s.passed;
    Ok((Outcome { records, ok }, spec.output))
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) if items.iter().all(|x| !x.is_array() && !x.is_object()) => {
            items.iter().map(cell).collect::<Vec<_>>().join(";")
        }
        other => other.to_string(),
    }
}

fn render(records: &[Value], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let value = match records {
                [single] => single.clone(),
                many => Value::Array(many.to_vec()),
            };
            let mut text =
                serde_json::to_vec_pretty(&value).map_err(|e| Error::Parse(e.to_string()))?;
            text.push(b'\n');
            Ok(text)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if let Some(Value::Object(first)) = records.first() {
                w.write_record(first.keys())?;
            }
            for r in records {
                if let Value::Object(m) = r {
                    w.write_record(m.values().map(cell))?;
                }
            }
            w.into_inner().map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let seed = cli.seed.unwrap_or(0);
    let (outcome, default_out) = match &cli.command {
        Command::Solve(cmd) => (solve(cmd)?, None),
        Command::Verify(cmd) => (verify(cmd)?, None),
        Command::Check(cmd) => (check(cmd, seed)?, None),
        Command::Replicate(cmd) => (replicate_cmd(cmd)?, None),
        Command::Experiment { spec } => experiment(spec, cli)?,
    };
    let bytes = render(&outcome.records, cli.format)?;
    match cli.out.as_ref().or(default_out.as_ref()) {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
