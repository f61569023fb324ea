//! Pure Nash equilibrium by the aggregate solver and by damped best-response
//! dynamics, with the certified epsilon.

use propalloc::solvers::{best_response_dynamics, pure_nash};
use propalloc::{Game, SolverConfig, ValuationFunction};

fn main() -> propalloc::Result<()> {
    let game = Game::from_valuations([
        ValuationFunction::linear(1.0),
        ValuationFunction::power(1.2, 0.6),
        ValuationFunction::piecewise_linear([(0.0, 0.0), (0.4, 0.6), (1.0, 0.9)]),
        ValuationFunction::linear(0.4),
    ])?;
    let config = SolverConfig::default();

    let eq = pure_nash(&game, &config)?;
    println!(
        "aggregate solver: {} steps, converged {}",
        eq.iterations, eq.converged
    );
    println!("  bids    {:?}", eq.bids.bids());
    println!("  epsilon {:e}, SW {:.6}", eq.epsilon, eq.sw);

    let dynamics = best_response_dynamics(&game, &config)?;
    println!(
        "best-response dynamics: {} rounds, converged {}",
        dynamics.iterations, dynamics.converged
    );
    let gap = eq
        .bids
        .bids()
        .iter()
        .zip(dynamics.bids.bids())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("  largest bid difference {gap:e}");
    Ok(())
}
