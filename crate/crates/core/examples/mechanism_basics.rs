//! Shares, utilities and welfare of a fixed bid profile.

use propalloc::mechanism::{allocate, effective_welfare, social_welfare, utility_profile};
use propalloc::{Bidder, Game, ValuationFunction};

fn main() -> propalloc::Result<()> {
    let game = Game::new(vec![
        Bidder::unbudgeted(ValuationFunction::linear(1.0)),
        Bidder::new(ValuationFunction::power(1.0, 0.5), 0.3),
        Bidder::unbudgeted(ValuationFunction::from_slopes([(0.3, 1.5), (0.7, 0.5)])),
    ])?;
    let profile = game.profile(vec![0.2, 0.3, 0.1])?;
    let alloc = allocate(&profile);
    let utilities = utility_profile(&game, &profile)?;

    for (i, (bidder, (d, u))) in game
        .bidders()
        .iter()
        .zip(alloc.shares.iter().zip(&utilities))
        .enumerate()
    {
        println!(
            "bidder {i}: v = {}, share {d:.4}, utility {u:.4}",
            bidder.valuation
        );
    }
    println!("social welfare    {:.6}", social_welfare(&game, &alloc)?);
    println!("effective welfare {:.6}", effective_welfare(&game, &alloc)?);
    Ok(())
}
