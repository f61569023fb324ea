//! The linear game whose equilibrium welfare ratio decreases to 3/4.

use propalloc::bounds::{replicate, Case};

fn main() -> propalloc::Result<()> {
    for n in [2, 4, 10, 100, 1000] {
        let report = replicate(Case::TightLinear { n })?;
        let ratio = report.get("ratio_sw").map_or(f64::NAN, |c| c.actual);
        println!(
            "n = {n:>4}: SW/SW* = {ratio:.6}, all checks passed: {}",
            report.passed()
        );
    }
    Ok(())
}
