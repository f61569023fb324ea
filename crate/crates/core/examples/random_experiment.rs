//! A seeded batch of random budgeted games, written as CSV to stdout.

use propalloc::harness::{run_experiment, ExperimentSpec};

fn main() -> propalloc::Result<()> {
    let spec = ExperimentSpec {
        seed: 42,
        instances: 20,
        budgeted: true,
        ..ExperimentSpec::default()
    };
    let report = run_experiment(&spec)?;
    print!("{}", report.to_csv()?);
    let s = &report.summary;
    eprintln!(
        "min EW/EW* {:.4}, min SW/EW* {:.4}, violations {}",
        s.min_ratio_ew.unwrap_or(f64::NAN),
        s.min_ratio_sw_ew.unwrap_or(f64::NAN),
        s.violations
    );
    Ok(())
}
