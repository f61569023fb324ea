//! Proportional allocation games.
//!
//! Bidders compete for a divisible resource by submitting non-negative bids;
//! bidder `i` receives the share `b_i / sum_j b_j` and pays its bid. This crate
//! provides:
//!
//! - [`valuations`]: concave non-decreasing valuation families.
//! - [`mechanism`]: allocation, utilities, social and effective welfare.
//! - [`solvers`]: best responses, pure Nash dynamics, equilibrium
//!   verification (pure and coarse-correlated) and water-filling optima.
//! - [`bayesian`]: finite-type incomplete-information games and the
//!   two-bidder coarse-correlated Bayesian program.
//! - [`bounds`]: instance-level checks of the deviation and smoothness
//!   inequalities, price-of-anarchy reports and replication of the tight
//!   constructions.
//! - [`harness`]: game files, random generators and batch experiments.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```bash
//! cargo run -p propalloc --example best_response_dynamics
//! ```

pub mod bayesian;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod mechanism;
pub mod search;
pub mod solvers;
pub mod valuations;

pub use error::{Error, Result};
pub use mechanism::{Allocation, BidProfile, Bidder, CorrelatedBidDistribution, Game};
pub use solvers::{EquilibriumResult, SolverConfig};
pub use valuations::ValuationFunction;
