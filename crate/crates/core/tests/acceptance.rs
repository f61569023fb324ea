//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use propalloc::bayesian::{pure_bayes_nash, two_bidder_cce_program, BayesianGame, BidderType};
use propalloc::bounds::{
    deviation_bound_check, replicate, two_bidder_cce_reference, Case, DiscreteDistribution,
};
use propalloc::harness::{
    generate_random_game, random_deviation_instance, random_valuation, run_experiment,
    ExperimentSpec, GameSpec,
};
use propalloc::mechanism::CorrelatedBidDistribution;
use propalloc::solvers::{
    best_response_against, deviation_utility, optimal_effective_welfare, optimal_welfare,
    pure_nash, verify_cce,
};
use propalloc::{SolverConfig, ValuationFunction};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: propalloc::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn criterion(id: usize, name: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(detail) if elapsed > limit => {
            Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
        }
        other => other,
    };
    match outcome {
        Ok(detail) => {
            println!("PASS [{id}] {name}: {detail} ({elapsed:.2?})");
            true
        }
        Err(why) => {
            println!("FAIL [{id}] {name}: {why} ({elapsed:.2?})");
            false
        }
    }
}

fn tight_linear_game() -> Outcome {
    let report = lib(replicate(Case::TightLinear { n: 100 }))?;
    for c in &report.checks {
        ensure(c.passed, || {
            format!("n=100 {}: expected {} got {}", c.name, c.expected, c.actual)
        })?;
    }
    let mut ratios = Vec::new();
    for n in [2, 4, 10, 100, 1000] {
        let r = lib(replicate(Case::TightLinear { n }))?;
        ensure(r.passed(), || {
            format!("n={n}: {:?}", r.failures().collect::<Vec<_>>())
        })?;
        ratios.push(r.get("ratio_sw").map(|c| c.actual).unwrap_or(f64::NAN));
    }
    ensure(ratios.windows(2).all(|w| w[0] > w[1]), || {
        format!("ratios not decreasing: {ratios:?}")
    })?;
    ensure(ratios.iter().all(|&r| r >= 0.75), || {
        format!("ratio below 3/4: {ratios:?}")
    })?;
    ensure(ratios[4] - 0.75 < 2e-4, || {
        format!("n=1000 ratio {} not near 3/4", ratios[4])
    })?;
    Ok(format!("n=100 bids and ratio match; ratios {ratios:.6?}"))
}

fn budget_example() -> Outcome {
    let mut ratios = Vec::new();
    for (alpha, want) in [(0.5, 0.63636), (0.1, 0.52606), (0.01, 0.50252)] {
        let r = lib(replicate(Case::BudgetExample { alpha }))?;
        ensure(r.passed(), || {
            format!("alpha={alpha}: {:?}", r.failures().collect::<Vec<_>>())
        })?;
        let ratio = r.get("ratio_ew").map(|c| c.actual).unwrap_or(f64::NAN);
        ensure((ratio - want).abs() <= 1e-4, || {
            format!("alpha={alpha}: ratio {ratio} vs {want}")
        })?;
        ratios.push(ratio);
    }
    ensure(ratios.windows(2).all(|w| w[0] > w[1]), || {
        format!("ratios not decreasing: {ratios:?}")
    })?;
    Ok(format!("bids, EW, EW* match; ratios {ratios:.5?}"))
}

fn two_bidder_program() -> Outcome {
    let reference = two_bidder_cce_reference();
    let obj = reference.objective().unwrap_or(f64::NAN);
    ensure((obj - 0.7154).abs() <= 1e-3, || {
        format!("reference objective {obj}")
    })?;
    let slacks = reference.constraint_slacks();
    ensure(slacks.iter().all(|&s| s >= -2e-4), || {
        format!("reference slacks {slacks:?}")
    })?;
    let sol = lib(two_bidder_cce_program(40, 200))?;
    ensure(sol.objective <= 0.7160, || {
        format!("optimizer objective {}", sol.objective)
    })?;
    let own = sol.params.constraint_slacks();
    ensure(own.iter().all(|&s| s >= -1e-9), || {
        format!("optimizer slacks {own:?}")
    })?;
    Ok(format!(
        "reference {obj:.5} (slacks {:.1e}, {:.1e}); optimizer {:.7}",
        slacks[0], slacks[1], sol.objective
    ))
}

fn random_game_bounds() -> Outcome {
    let free = lib(run_experiment(&ExperimentSpec {
        seed: 4001,
        instances: 1000,
        ..ExperimentSpec::default()
    }))?;
    let budgeted = lib(run_experiment(&ExperimentSpec {
        seed: 4002,
        instances: 1000,
        budgeted: true,
        ..ExperimentSpec::default()
    }))?;
    for (label, report) in [("unbudgeted", &free), ("budgeted", &budgeted)] {
        let s = &report.summary;
        ensure(s.errors == 0, || {
            format!("{label}: {} solver errors", s.errors)
        })?;
        ensure(s.violations == 0, || {
            format!("{label}: {} violations", s.violations)
        })?;
        ensure(s.flagged_rate < 0.01, || {
            format!("{label}: flagged rate {}", s.flagged_rate)
        })?;
    }
    for row in free.rows.iter().filter(|r| r.converged) {
        let ratio = row.ratio_sw.unwrap_or(1.0);
        ensure(ratio >= 0.75 - 1e-6, || {
            format!("game {}: SW/SW* = {ratio}", row.game)
        })?;
        let slack = row.smoothness_slack.unwrap_or(f64::NEG_INFINITY);
        ensure(slack >= -1e-9, || {
            format!("game {}: smoothness slack {slack}", row.game)
        })?;
    }
    for row in budgeted.rows.iter().filter(|r| r.converged) {
        let ew = row.ratio_ew.unwrap_or(1.0);
        ensure(ew >= 0.3596 - 1e-6, || {
            format!("game {}: EW/EW* = {ew}", row.game)
        })?;
        let sw = row.ratio_sw_ew.unwrap_or(1.0);
        ensure(sw >= 0.5 - 1e-6, || {
            format!("game {}: SW/EW* = {sw}", row.game)
        })?;
    }
    Ok(format!(
        "min SW/SW* {:.4}, min smoothness slack {:.2e}; min EW/EW* {:.4}, min SW/EW* {:.4}; {} + {} converged",
        free.summary.min_ratio_sw.unwrap_or(f64::NAN),
        free.summary.min_smoothness_slack.unwrap_or(f64::NAN),
        budgeted.summary.min_ratio_ew.unwrap_or(f64::NAN),
        budgeted.summary.min_ratio_sw_ew.unwrap_or(f64::NAN),
        free.summary.converged,
        budgeted.summary.converged,
    ))
}

fn deviation_bound() -> Outcome {
    let mut min_slack = f64::INFINITY;
    for i in 0..10_000 {
        let inst = random_deviation_instance(5001, i);
        let c = lib(inst.check())?;
        ensure(c.slack() >= -1e-9, || {
            format!("instance {i}: slack {} for {inst:?}", c.slack())
        })?;
        min_slack = min_slack.min(c.slack());
    }
    let mut worst: f64 = 0.0;
    for slope in [0.1, 0.5, 1.0, 2.0] {
        for g in [0.01, 0.5, 1.0, 3.0] {
            let gamma = lib(DiscreteDistribution::constant(g))?;
            let c = lib(deviation_bound_check(
                &ValuationFunction::linear(slope),
                1.0,
                1.0,
                &gamma,
            ))?;
            worst = worst.max((c.lhs - c.rhs).abs());
        }
    }
    ensure(worst <= 1e-12, || {
        format!("constant-opponent equality off by {worst}")
    })?;
    Ok(format!(
        "10^4 instances, min slack {min_slack:.3e}; equality gap {worst:.1e}"
    ))
}

/// Grid best-response iteration on a fixed bid grid, one (bidder, type) at a
/// time, until no bid moves.
fn grid_fixed_point(bgame: &BayesianGame, step: f64) -> Vec<Vec<f64>> {
    let points = (1.0 / step).round() as usize;
    let mut bids: Vec<Vec<f64>> = bgame
        .bidders()
        .iter()
        .map(|b| vec![0.25; b.types.len()])
        .collect();
    for _ in 0..500 {
        let mut moved = false;
        for i in 0..bgame.len() {
            for t in 0..bgame.bidders()[i].types.len() {
                let profile = propalloc::bayesian::StrategyProfile { bids: bids.clone() };
                let opp = bgame.opponent_totals(i, &profile);
                let v = &bgame.bidders()[i].types[t].valuation;
                let best = (0..=points)
                    .map(|k| k as f64 * step)
                    .map(|y| (y, deviation_utility(v, y, &opp)))
                    .fold(
                        (0.0, f64::NEG_INFINITY),
                        |a, b| if b.1 > a.1 { b } else { a },
                    );
                if (best.0 - bids[i][t]).abs() > step / 2.0 {
                    bids[i][t] = best.0;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    bids
}

fn bayesian_suite() -> Outcome {
    let tight = SolverConfig {
        bid_tolerance: 1e-12,
        ..SolverConfig::default()
    };
    let spec = ExperimentSpec {
        bidders: [2, 4],
        ..ExperimentSpec::default()
    };
    let mut worst_match: f64 = 0.0;
    for i in 0..50 {
        let Ok(GameSpec::Full(game)) = generate_random_game(&spec, i) else {
            return Err(format!("game {i} is not full-information"));
        };
        let eq = lib(pure_nash(&game, &tight))?;
        let bres = lib(pure_bayes_nash(&BayesianGame::from_game(&game), &tight))?;
        ensure(eq.converged && bres.converged, || {
            format!("game {i} did not converge")
        })?;
        for (a, b) in eq.bids.bids().iter().zip(&bres.profile.bids) {
            worst_match = worst_match.max((a - b[0]).abs());
        }
    }
    ensure(worst_match <= 1e-8, || {
        format!("single-type mismatch {worst_match}")
    })?;

    let report = lib(run_experiment(&ExperimentSpec {
        seed: 6001,
        instances: 200,
        bidders: [2, 3],
        types: Some([2, 3]),
        ..ExperimentSpec::default()
    }))?;
    let s = &report.summary;
    ensure(s.converged == 200 && s.errors == 0, || format!("{s:?}"))?;
    let max_eps = s.max_epsilon.unwrap_or(f64::NAN);
    ensure(max_eps <= 1e-6, || format!("max epsilon {max_eps}"))?;
    for row in &report.rows {
        let (sw, star) = (row.sw.unwrap_or(0.0), row.sw_star.unwrap_or(f64::INFINITY));
        ensure(sw >= 0.5 * star - 1e-6, || {
            format!("game {}: E[SW] {sw} < SW*/2 {star}", row.game)
        })?;
    }

    let inf = f64::INFINITY;
    let bgame = lib(BayesianGame::new(vec![
        vec![BidderType::new(ValuationFunction::linear(1.0), inf, 1.0)],
        vec![
            BidderType::new(ValuationFunction::linear(1.0), inf, 0.5),
            BidderType::new(ValuationFunction::linear(0.2), inf, 0.5),
        ],
    ]))?;
    let res = lib(pure_bayes_nash(&bgame, &SolverConfig::default()))?;
    let grid = grid_fixed_point(&bgame, 1e-4);
    let oracle_gap = res
        .profile
        .bids
        .iter()
        .flatten()
        .zip(grid.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(oracle_gap <= 1e-3, || {
        format!(
            "grid oracle gap {oracle_gap}: {:?} vs {grid:?}",
            res.profile.bids
        )
    })?;

    Ok(format!(
        "single-type gap {worst_match:.1e}; 200 games max eps {max_eps:.1e}, min E[SW]/SW* {:.4}; grid oracle gap {oracle_gap:.1e}",
        s.min_ratio_sw.unwrap_or(f64::NAN)
    ))
}

fn grid_argmax(f: impl Fn(f64) -> f64, cap: f64, points: usize) -> (f64, f64) {
    (0..=points)
        .map(|k| cap * k as f64 / points as f64)
        .map(|y| (y, f(y)))
        .fold(
            (0.0, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        )
}

fn random_opponents(rng: &mut ChaCha8Rng, lo: f64) -> Vec<(f64, f64)> {
    let k = rng.random_range(1..=3);
    let mut opp: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(lo..=2.0), rng.random_range(0.1..=1.0)))
        .collect();
    let mass: f64 = opp.iter().map(|o| o.1).sum();
    opp.iter_mut().for_each(|o| o.1 /= mass);
    opp
}

fn oracle_equivalence() -> Outcome {
    // water-filling against the simplex grid with step 1e-3
    let spec = ExperimentSpec {
        seed: 7001,
        bidders: [3, 3],
        budgeted: true,
        ..ExperimentSpec::default()
    };
    let mut worst_sw: f64 = 0.0;
    let mut worst_ew: f64 = 0.0;
    for i in 0..100 {
        let Ok(GameSpec::Full(game)) = generate_random_game(&spec, i) else {
            return Err(format!("game {i} is not full-information"));
        };
        let table: Vec<Vec<(f64, f64)>> = game
            .bidders()
            .iter()
            .map(|b| {
                (0..=1000)
                    .map(|k| {
                        let v = b.valuation.eval(k as f64 / 1000.0).unwrap_or(f64::NAN);
                        (v, v.min(b.budget))
                    })
                    .collect()
            })
            .collect();
        let (mut best_sw, mut best_ew) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for a in 0..=1000 {
            for b in 0..=(1000 - a) {
                let c = 1000 - a - b;
                let (x, y, z) = (table[0][a], table[1][b], table[2][c]);
                best_sw = best_sw.max(x.0 + y.0 + z.0);
                best_ew = best_ew.max(x.1 + y.1 + z.1);
            }
        }
        let sw_star = optimal_welfare(&game, 1e-12).value;
        let ew_star = optimal_effective_welfare(&game, 1e-12).value;
        ensure(best_sw <= sw_star + 1e-9, || {
            format!("game {i}: grid SW {best_sw} beats SW* {sw_star}")
        })?;
        ensure(best_ew <= ew_star + 1e-9, || {
            format!("game {i}: grid EW {best_ew} beats EW* {ew_star}")
        })?;
        worst_sw = worst_sw.max(sw_star - best_sw);
        worst_ew = worst_ew.max(ew_star - best_ew);
    }
    ensure(worst_sw <= 2e-3, || {
        format!("SW* exceeds grid by {worst_sw}")
    })?;
    ensure(worst_ew <= 2e-3, || {
        format!("EW* exceeds grid by {worst_ew}")
    })?;

    // best response against a dense bid grid
    let mut rng = ChaCha8Rng::seed_from_u64(7002);
    let gen = ExperimentSpec::default();
    let mut worst_bid: f64 = 0.0;
    for i in 0..1000 {
        let v = random_valuation(&gen, &mut rng);
        let budget = if rng.random::<bool>() {
            f64::INFINITY
        } else {
            rng.random_range(0.01..=1.0)
        };
        let opp = random_opponents(&mut rng, 0.01);
        let br = best_response_against(&v, budget, &opp, 1e-13);
        let cap = budget.min(v.eval(1.0).unwrap_or(0.0));
        let (arg, best) = grid_argmax(|y| deviation_utility(&v, y, &opp), cap, 100_000);
        ensure(br.utility >= best - 1e-12, || {
            format!("instance {i}: grid utility {best} beats {}", br.utility)
        })?;
        ensure((br.bid - arg).abs() <= 1e-4, || {
            format!("instance {i}: bid {} vs grid {arg}", br.bid)
        })?;
        worst_bid = worst_bid.max((br.bid - arg).abs());
    }

    // verify_cce against a grid deviation search
    let config = SolverConfig::default();
    let mut worst_cce: f64 = 0.0;
    let mut positive = 0;
    for i in 0..100 {
        let Ok(GameSpec::Full(game)) = generate_random_game(
            &ExperimentSpec {
                seed: 7003,
                bidders: [2, 3],
                ..ExperimentSpec::default()
            },
            i,
        ) else {
            return Err(format!("game {i} is not full-information"));
        };
        let eq = lib(pure_nash(&game, &config))?;
        let k = rng.random_range(2..=4);
        let support = (0..k)
            .map(|_| {
                let bids = eq
                    .bids
                    .bids()
                    .iter()
                    .map(|b| (b * rng.random_range(0.5..=1.5)).max(0.01))
                    .collect();
                Ok((lib(game.profile(bids))?, rng.random_range(0.1..=1.0)))
            })
            .collect::<Result<Vec<_>, String>>()?;
        let mass: f64 = support.iter().map(|s| s.1).sum();
        let support = support.into_iter().map(|(p, w)| (p, w / mass)).collect();
        let dist = lib(CorrelatedBidDistribution::new(&game, support))?;
        let eps = lib(verify_cce(&game, &dist, &config))?;
        let expected = dist.expected_utilities(&game);
        let grid_eps = game
            .bidders()
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let opp = dist.opponent_totals(j);
                let cap = b.budget.min(b.valuation.eval(1.0).unwrap_or(0.0));
                grid_argmax(|y| deviation_utility(&b.valuation, y, &opp), cap, 100_000).1
                    - expected[j]
            })
            .fold(0.0, f64::max);
        positive += usize::from(eps > 0.0);
        worst_cce = worst_cce.max((eps - grid_eps).abs());
    }
    ensure(worst_cce <= 1e-4, || {
        format!("verify_cce differs from grid by {worst_cce}")
    })?;

    Ok(format!(
        "water-filling gap SW {worst_sw:.1e} EW {worst_ew:.1e}; best-response bid gap {worst_bid:.1e}; cce gap {worst_cce:.1e} ({positive}/100 with eps > 0)"
    ))
}

/// Index range `(lo, hi)` of grid points within `eps` of the maximum, or
/// `None` when those points are not contiguous.
fn near_optimal_interval(u: &[f64], eps: f64) -> Option<(usize, usize)> {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside: Vec<usize> = (0..u.len()).filter(|&k| u[k] >= max - eps).collect();
    let (lo, hi) = (inside[0], inside[inside.len() - 1]);
    (hi - lo + 1 == inside.len()).then_some((lo, hi))
}

fn uniqueness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8001);
    let gen = ExperimentSpec::default();
    let points = 20_000;
    let mut widths = (0usize, 0usize);
    for i in 0..500 {
        let v = random_valuation(&gen, &mut rng);
        let opp = random_opponents(&mut rng, 0.05);
        let cap = v.eval(1.0).unwrap_or(0.0);
        let u: Vec<f64> = (0..=points)
            .map(|k| deviation_utility(&v, cap * k as f64 / points as f64, &opp))
            .collect();
        let wide = near_optimal_interval(&u, 1e-3);
        let narrow = near_optimal_interval(&u, 1e-6);
        let (Some(wide), Some(narrow)) = (wide, narrow) else {
            return Err(format!(
                "instance {i}: near-optimal set not contiguous ({v}, {opp:?})"
            ));
        };
        let inside = wide.0 <= narrow.0 && narrow.1 <= wide.1;
        let strict = inside && (wide.0 < narrow.0 || narrow.1 < wide.1);
        ensure(strict, || {
            format!("instance {i}: {narrow:?} not strictly inside {wide:?}")
        })?;
        widths.0 += wide.1 - wide.0;
        widths.1 += narrow.1 - narrow.0;
    }
    Ok(format!(
        "500 instances; mean interval width {:.1} grid steps at 1e-3, {:.1} at 1e-6",
        widths.0 as f64 / 500.0,
        widths.1 as f64 / 500.0
    ))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "tight linear game", secs(5), tight_linear_game),
        criterion(2, "budget counterexample", secs(1), budget_example),
        criterion(
            3,
            "two-bidder correlated program",
            secs(60),
            two_bidder_program,
        ),
        criterion(
            4,
            "random-game welfare bounds",
            secs(300),
            random_game_bounds,
        ),
        criterion(5, "deviation bound", secs(30), deviation_bound),
        criterion(6, "Bayesian suite", secs(300), bayesian_suite),
        criterion(7, "oracle equivalence", secs(600), oracle_equivalence),
        criterion(8, "best-response uniqueness", secs(600), uniqueness),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
