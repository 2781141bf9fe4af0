//! Nonlocal LWR traffic model: kernels, entropy calculus, finite-volume
//! solvers and the diagnostics used to study the singular limit ε → 0.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod flux_entropy;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod local_solver;
pub mod nonlocal_solver;
pub mod oracles;

pub use error::{Error, Result};
pub use grid::{Extension, Grid, GridFunction};
pub use flux_entropy::{Entropy, EntropyPair, Flux, Velocity};
pub use harness::{run_sweep, validate_scenario, Scenario, SweepResult};
pub use kernels::{build_weights, build_weights_shifted, convolve, Kernel, ScaledKernelWeights, TabulatedKernel};
pub use local_solver::{solve_local, RiemannDatum};
pub use nonlocal_solver::{solve, NonlocalModel, SolverConfig, Trajectory};
