//! Simulation driver and experiment procedures.
//!
//! A run either quenches (`max v >= κ - δ`), settles to a steady state
//! (`||v_t||_∞ < steady_eps`), or hits its horizon. The experiment procedures
//! are thin loops over [`run_simulation`]:
//!
//! - [`critical_length_search`] bisects on the interval length `a`.
//! - [`quench_time_sweep`] tabulates quench time and location over one parameter.
//! - [`convergence_order`] estimates spatial orders of `v` and `v_t` from three
//!   nested grids.

mod critical;
mod driver;
mod order;
mod sweep;

use thiserror::Error;

use crate::error::ParamError;

pub use critical::{critical_length_search, BisectionTrial, CriticalLength};
pub use driver::{
    classify_steady, run_simulation, Diagnostic, PeakSample, QuenchEvent, RunConfig, RunOutcome,
    SimulationRun, Snapshot, SnapshotPolicy, SnapshotSeries,
};
pub use order::{convergence_order, milne_order, restrict_to_coarse, ConvergenceOrders, EvalTime};
pub use sweep::{quench_time_sweep, SweepParam, SweepRow, SweepTable};

#[derive(Debug, Clone, Error)]
pub enum QuenchlabError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(
        "invalid bracket: a_lo = {a_lo} gave {lo}, a_hi = {a_hi} gave {hi} \
         (need no quench at a_lo and a quench at a_hi)"
    )]
    InvalidBracket {
        a_lo: f64,
        lo: RunOutcome,
        a_hi: f64,
        hi: RunOutcome,
    },
    #[error("numerical failure in trial with {context}: {message}")]
    NumericalFailure { context: String, message: String },
    #[error("evaluation time {t_eval} is not reached by every run (quench times {quench_times:?})")]
    EvaluationTime {
        t_eval: f64,
        quench_times: Vec<Option<f64>>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
