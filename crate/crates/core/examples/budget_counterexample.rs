//! Two budget-constrained bidders whose effective-welfare ratio tends to 1/2.

use propalloc::bounds::{replicate, Case};

fn main() -> propalloc::Result<()> {
    for alpha in [0.5, 0.1, 0.01, 0.001] {
        let report = replicate(Case::BudgetExample { alpha })?;
        println!("alpha = {alpha}:");
        for c in &report.checks {
            println!(
                "  {:<14} expected {:<12.6e} got {:<12.6e} {}",
                c.name,
                c.expected,
                c.actual,
                if c.passed { "ok" } else { "FAIL" }
            );
        }
    }
    Ok(())
}
