//! Pure Bayes-Nash equilibrium of a game with private types, and its
//! expected welfare against the expected optimum.

use propalloc::bayesian::{pure_bayes_nash, BayesianGame, BidderType};
use propalloc::bounds::bayesian_poa_report;
use propalloc::{SolverConfig, ValuationFunction};

fn main() -> propalloc::Result<()> {
    let inf = f64::INFINITY;
    let bgame = BayesianGame::new(vec![
        vec![BidderType::new(ValuationFunction::linear(1.0), inf, 1.0)],
        vec![
            BidderType::new(ValuationFunction::linear(1.0), inf, 0.5),
            BidderType::new(ValuationFunction::linear(0.2), inf, 0.5),
        ],
        vec![
            BidderType::new(ValuationFunction::power(1.0, 0.5), inf, 0.3),
            BidderType::new(ValuationFunction::linear(0.6), inf, 0.7),
        ],
    ])?;
    let res = pure_bayes_nash(&bgame, &SolverConfig::default())?;
    println!(
        "converged {} after {} rounds, epsilon {:e}",
        res.converged, res.iterations, res.epsilon
    );
    for (i, bids) in res.profile.bids.iter().enumerate() {
        println!("bidder {i}: bid per type {bids:.5?}");
    }
    let report = bayesian_poa_report(&bgame, &res, 1e-12)?;
    println!(
        "E[SW] = {:.6}, E[SW*] = {:.6}, ratio {:.4}",
        report.sw,
        report.sw_star,
        report.ratio_sw.unwrap_or(f64::NAN)
    );
    Ok(())
}
