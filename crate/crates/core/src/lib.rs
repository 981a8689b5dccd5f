//! (1+1)-ES with the generalized one-fifth success rule on scaling-invariant
//! functions, and the Monte Carlo machinery around its normalized chain.

pub mod chain;
pub mod drift;
pub mod error;
pub mod es;
pub mod estimators;
pub mod experiment;
pub mod linalg;
pub mod numfmt;
pub mod objective;
pub mod rng;
pub mod stats;

pub use chain::{run_chain, z_step, ChainRecord, NormalizedState};
pub use error::{Error, Result};
pub use es::{ord, run_trajectory, sol, star, step, AlgoParams, AlgoState, Trajectory};
pub use objective::{HomogeneousCore, MonotoneTransform, ObjectiveFunction, PNorm};
