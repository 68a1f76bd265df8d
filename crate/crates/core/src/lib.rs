//! Quenching solutions of the one-dimensional two-sided Riemann-Liouville
//! fractional convection-diffusion Kawarada problem
//!
//! ```text
//! v_t = d+(x,t) D+^σ v + d-(x,t) D-^σ v + (b/x) v_x + (κ - v)^(-θ),   0 < x < a
//! v(0,t) = v(a,t) = 0,   v(x,0) = ψ(x)
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`fracops`]: Grünwald weights, the grid and the dense spatial operator `S`.
//! - [`linalg`]: dense LU with partial pivoting, a Hessenberg route for
//!   repeated shifted solves, norms.
//! - [`stepping`]: the Padé [1/1] step with an Euler-predicted source and the
//!   arc-length step-size monitor.
//! - [`quenchlab`]: the simulation driver and the four experiment procedures
//!   (critical length, quench-time sweeps, quench location, Milne orders).
//! - [`cli`]: config parsing, CSV and gnuplot output, property suites.

pub mod cli;
pub mod error;
pub mod fracops;
pub mod linalg;
pub mod quenchlab;
pub mod stepping;

pub use error::{LinalgError, ParamError, QuenchOverflow};
pub use fracops::{
    assemble_operator, grunwald_weights, source_eval, Coefficient, Grid, GrunwaldWeights,
    InitialProfile, OperatorMatrix, ProblemSpec, SourceTerm,
};
pub use quenchlab::{
    critical_length_search, convergence_order, quench_time_sweep, run_simulation, RunConfig,
    RunOutcome, SnapshotPolicy,
};
pub use stepping::{PadeStepper, SolutionState, SolverRoute, StabilityMode, StepControls};
