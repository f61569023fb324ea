//! Certifying a correlated bid distribution: the pure equilibrium passes, a
//! randomized perturbation of it does not.

use propalloc::solvers::{pure_nash, verify_cce};
use propalloc::{CorrelatedBidDistribution, Game, SolverConfig, ValuationFunction};

fn main() -> propalloc::Result<()> {
    let game = Game::from_valuations([
        ValuationFunction::linear(1.0),
        ValuationFunction::power(1.0, 0.5),
    ])?;
    let config = SolverConfig::default();
    let eq = pure_nash(&game, &config)?;
    let point = CorrelatedBidDistribution::point_mass(eq.bids.clone());
    println!(
        "point mass on the equilibrium: epsilon {:e}",
        verify_cce(&game, &point, &config)?
    );

    let [a, b] = [eq.bids.bids()[0], eq.bids.bids()[1]];
    let spread = CorrelatedBidDistribution::new(
        &game,
        vec![
            (game.profile(vec![0.8 * a, 1.2 * b])?, 0.5),
            (game.profile(vec![1.2 * a, 0.8 * b])?, 0.5),
        ],
    )?;
    println!(
        "anti-correlated perturbation: epsilon {:e}",
        verify_cce(&game, &spread, &config)?
    );
    Ok(())
}
