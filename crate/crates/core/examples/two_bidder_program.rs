//! The two-bidder correlated construction: the published point and the
//! optimizer's own minimum of the ratio program.

use propalloc::bayesian::{two_bidder_cce_program, ROUNDING_CAVEAT};
use propalloc::bounds::two_bidder_cce_reference;

fn main() -> propalloc::Result<()> {
    let reference = two_bidder_cce_reference();
    println!(
        "reference point: objective {:.5}, slacks {:?}",
        reference.objective().unwrap_or(f64::NAN),
        reference.constraint_slacks()
    );
    let sol = two_bidder_cce_program(40, 200)?;
    let p = sol.params;
    println!(
        "optimizer: objective {:.7} at alpha {:.5}, gamma {:.5}, delta {:.5}, p1 {:.5}, p2 {:.5}",
        sol.objective, p.alpha, p.gamma, p.delta, p.p1, p.p2
    );
    println!(
        "  ({} grid points, {} refinement sweeps)",
        sol.grid_evaluations, sol.refine_sweeps
    );
    println!("note: {ROUNDING_CAVEAT}");
    Ok(())
}
