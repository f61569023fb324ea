//! Optimal social and effective welfare by water-filling.

use propalloc::solvers::{optimal_effective_welfare, optimal_welfare};
use propalloc::{Bidder, Game, ValuationFunction};

fn main() -> propalloc::Result<()> {
    let game = Game::new(vec![
        Bidder::new(ValuationFunction::linear(2.0), 0.5),
        Bidder::unbudgeted(ValuationFunction::power(1.0, 0.5)),
        Bidder::new(ValuationFunction::linear(0.8), 0.1),
    ])?;
    let sw = optimal_welfare(&game, 1e-12);
    println!(
        "SW* = {:.6} at shares {:.4?} (price {:.4})",
        sw.value, sw.allocation.shares, sw.price
    );
    let ew = optimal_effective_welfare(&game, 1e-12);
    println!(
        "EW* = {:.6} at shares {:.4?} (price {:.4})",
        ew.value, ew.allocation.shares, ew.price
    );
    Ok(())
}
