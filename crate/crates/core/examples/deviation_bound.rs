//! The deterministic deviation `mu z E[G]` against a random opponent total
//! `G` earns at least `(3 mu - 1)/(4 mu) v(z) - mu z E[G]`.

use propalloc::bounds::{deviation_bound_check, DiscreteDistribution};
use propalloc::harness::random_deviation_instance;
use propalloc::ValuationFunction;

fn main() -> propalloc::Result<()> {
    let v = ValuationFunction::linear(1.0);
    let constant = DiscreteDistribution::constant(0.5)?;
    let c = deviation_bound_check(&v, 1.0, 1.0, &constant)?;
    println!(
        "constant opponents: lhs {:.3e}, rhs {:.3e} (tight)",
        c.lhs, c.rhs
    );

    let coin = DiscreteDistribution::new(vec![(0.0, 0.5), (1.0, 0.5)])?;
    let c = deviation_bound_check(&v, 1.0, 1.0, &coin)?;
    println!("coin-flip opponents: lhs {:.6}, rhs {:.6}", c.lhs, c.rhs);

    let slack = (0..10_000)
        .map(|i| random_deviation_instance(1, i).check().map(|c| c.slack()))
        .collect::<propalloc::Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    println!("10000 random instances: smallest slack {slack:.3e}");
    Ok(())
}
