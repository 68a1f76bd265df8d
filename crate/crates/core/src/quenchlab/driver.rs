use std::collections::VecDeque;
use std::fmt;

use log::warn;

use crate::error::ParamError;
use crate::fracops::{Grid, ProblemSpec, SourceTerm, M_MATRIX_SIGMA_MIN};
use crate::stepping::{
    adaptive_tau, admissible_tau_bound, first_step_rho, PadeStepper, SolutionState, SolverRoute,
    StepControls, StepError,
};

/// Minimum step count before a steady state may be declared.
const STEADY_MIN_STEPS: usize = 10;

/// Nodes whose values differ from the maximum by at most this much tie for `x*`.
const ARGMAX_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    #[default]
    None,
    LastSteps(usize),
    EveryStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    /// Number of subintervals `L`; `h = a / L`.
    pub intervals: usize,
    pub controls: StepControls,
    pub t_max: f64,
    pub quench_delta: f64,
    pub steady_eps: f64,
    pub snapshot_policy: SnapshotPolicy,
    pub solver: SolverRoute,
    /// Stop after this many steps (reported as `MaxTimeReached`).
    pub max_steps: Option<usize>,
}

impl RunConfig {
    /// `L = 100`, `τ0 = 2e-4`, `t_max = 20`, `δ = 0.01`, `steady_eps = 1e-8`.
    pub fn new(spec: ProblemSpec) -> Self {
        Self {
            spec,
            intervals: 100,
            controls: StepControls::new(2e-4),
            t_max: 20.0,
            quench_delta: 0.01,
            steady_eps: 1e-8,
            snapshot_policy: SnapshotPolicy::None,
            solver: SolverRoute::default(),
            max_steps: None,
        }
    }

    pub fn with_length(&self, a: f64) -> Self {
        let mut c = self.clone();
        c.spec.a = a;
        c
    }

    pub fn grid(&self) -> Result<Grid, ParamError> {
        Grid::new(self.spec.a, self.intervals)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.spec.validate()?;
        let kappa = self.spec.kappa;
        if !(self.quench_delta > 0.0 && self.quench_delta < kappa) {
            return Err(ParamError::QuenchDelta {
                delta: self.quench_delta,
                kappa,
            });
        }
        for (name, value) in [
            ("steady_eps", self.steady_eps),
            ("t_max", self.t_max),
            ("tau0", self.controls.tau0),
        ] {
            if !value.is_finite() {
                return Err(ParamError::NotFinite { name, value });
            }
            if value <= 0.0 {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        if let Some(cap) = self.controls.courant_cap {
            if !(cap > 0.0) {
                return Err(ParamError::NotPositive {
                    name: "courant_cap",
                    value: cap,
                });
            }
        }
        let grid = self.grid()?;
        self.spec.check_on_grid(&grid, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchEvent {
    /// Quenching time `T_a`.
    pub t_quench: f64,
    /// Quenching location `x*`.
    pub x_star: f64,
    pub v_peak: f64,
    pub vt_peak: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Quenched(QuenchEvent),
    SteadyState { t: f64 },
    MaxTimeReached { t: f64 },
    NumericalFailure(String),
}

impl RunOutcome {
    pub fn is_quenched(&self) -> bool {
        matches!(self, RunOutcome::Quenched(_))
    }

    pub fn quench(&self) -> Option<&QuenchEvent> {
        match self {
            RunOutcome::Quenched(q) => Some(q),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunOutcome::Quenched(_) => "quenched",
            RunOutcome::SteadyState { .. } => "steady",
            RunOutcome::MaxTimeReached { .. } => "max-time",
            RunOutcome::NumericalFailure(_) => "failure",
        }
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunOutcome::Quenched(q) => write!(
                f,
                "quenched at T = {:.6} (x* = {:.6}, max v = {:.6}, max v_t = {:.4})",
                q.t_quench, q.x_star, q.v_peak, q.vt_peak
            ),
            RunOutcome::SteadyState { t } => write!(f, "steady state at t = {t:.6}"),
            RunOutcome::MaxTimeReached { t } => write!(f, "horizon reached at t = {t:.6}"),
            RunOutcome::NumericalFailure(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSample {
    pub t: f64,
    pub v_max: f64,
    pub vt_max: f64,
}

/// Recorded states, oldest first, plus the per-step peak trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotSeries {
    pub records: Vec<Snapshot>,
    pub peaks: Vec<PeakSample>,
}

impl SnapshotSeries {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.peaks.is_empty()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// σ below `(√17 - 1)/2`: no M-matrix guarantee.
    SigmaBelowMMatrixBound { sigma: f64 },
    /// First step exceeding the stability bound in warn mode.
    StabilityBoundExceeded { step: usize, tau: f64, bound: f64 },
    /// First step violates `τ1 < 1/ϱ`.
    FirstStepCap { tau: f64, rho: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::SigmaBelowMMatrixBound { sigma } => write!(
                f,
                "sigma = {sigma} is below {M_MATRIX_SIGMA_MIN:.4}; monotonicity and positivity guarantees do not apply"
            ),
            Diagnostic::StabilityBoundExceeded { step, tau, bound } => write!(
                f,
                "step {step}: tau = {tau:.3e} exceeds the stability bound {bound:.3e}"
            ),
            Diagnostic::FirstStepCap { tau, rho } => {
                write!(f, "first step tau = {tau:.3e} violates tau < 1/rho = {:.3e}", 1.0 / rho)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub outcome: RunOutcome,
    pub snapshots: SnapshotSeries,
    pub diagnostics: Vec<Diagnostic>,
    pub final_state: SolutionState,
    pub grid: Grid,
}

/// `||(v - v_prev) / τ_prev||_∞ < eps`; false before the first step.
pub fn classify_steady(state: &SolutionState, eps: f64) -> bool {
    state.rate_inf_norm().is_some_and(|r| r < eps)
}

fn argmax_smallest(v: &[f64]) -> (usize, f64) {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let idx = v
        .iter()
        .position(|&x| x >= max - ARGMAX_TIE_TOL)
        .unwrap_or(0);
    (idx, max)
}

fn peak_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::MIN, f64::max)
}

struct Recorder {
    policy: SnapshotPolicy,
    records: VecDeque<Snapshot>,
    peaks: Vec<PeakSample>,
}

impl Recorder {
    fn new(policy: SnapshotPolicy) -> Self {
        Self {
            policy,
            records: VecDeque::new(),
            peaks: Vec::new(),
        }
    }

    fn record(&mut self, state: &SolutionState, vt: &[f64]) {
        let keep = match self.policy {
            SnapshotPolicy::None => return,
            SnapshotPolicy::LastSteps(0) => 0,
            SnapshotPolicy::LastSteps(k) => k,
            SnapshotPolicy::EveryStep => usize::MAX,
        };
        self.peaks.push(PeakSample {
            t: state.t,
            v_max: peak_of(&state.v),
            vt_max: peak_of(vt),
        });
        if keep == 0 {
            return;
        }
        if self.records.len() == keep {
            self.records.pop_front();
        }
        self.records.push_back(Snapshot {
            t: state.t,
            v: state.v.clone(),
            vt: vt.to_vec(),
        });
    }

    fn finish(self) -> SnapshotSeries {
        SnapshotSeries {
            records: self.records.into(),
            peaks: self.peaks,
        }
    }
}

/// Steps the problem until it quenches, reaches a steady state, or runs out
/// of time. Numerical breakdowns are reported as
/// [`RunOutcome::NumericalFailure`]; only an invalid configuration is an `Err`.
pub fn run_simulation(config: &RunConfig) -> Result<SimulationRun, ParamError> {
    config.validate()?;
    let grid = config.grid()?;
    let spec = &config.spec;
    let mut stepper = PadeStepper::new(spec, &grid, config.solver)?;
    let mut diagnostics = Vec::new();
    let push = |d: Diagnostic, diags: &mut Vec<Diagnostic>| {
        warn!("{d}");
        diags.push(d);
    };

    if spec.sigma < M_MATRIX_SIGMA_MIN {
        push(Diagnostic::SigmaBelowMMatrixBound { sigma: spec.sigma }, &mut diagnostics);
    }

    let bound = admissible_tau_bound(spec, &grid);
    let h_sigma = stepper.h_sigma();
    let kappa = spec.kappa;
    let threshold = kappa - config.quench_delta;
    let kawarada = matches!(spec.source, SourceTerm::Kawarada);
    let mut recorder = Recorder::new(config.snapshot_policy);
    let mut state = stepper.initial_state();
    let mut warned_bound = false;

    let outcome = loop {
        let tau = adaptive_tau(&state, &config.controls, bound, h_sigma);
        if tau > bound && !warned_bound {
            warned_bound = true;
            push(
                Diagnostic::StabilityBoundExceeded {
                    step: state.n + 1,
                    tau,
                    bound,
                },
                &mut diagnostics,
            );
        }
        if state.n == 0 && kawarada {
            if let Ok(rho) = first_step_rho(spec, &state.v, tau) {
                if tau * rho >= 1.0 {
                    push(Diagnostic::FirstStepCap { tau, rho }, &mut diagnostics);
                }
            }
        }

        let next = match stepper.step(&state, tau) {
            Ok(next) => next,
            Err(StepError::Quench { .. }) => {
                // The source blew up inside the step; the attempted step time
                // is the quench time, located at the last accepted state.
                let (idx, v_peak) = argmax_smallest(&state.v);
                let vt = state.rate().unwrap_or_else(|| vec![0.0; state.v.len()]);
                break RunOutcome::Quenched(QuenchEvent {
                    t_quench: state.t + tau,
                    x_star: grid.interior()[idx],
                    v_peak,
                    vt_peak: peak_of(&vt),
                    step: state.n + 1,
                });
            }
            Err(e) => break RunOutcome::NumericalFailure(e.to_string()),
        };
        if let Some(k) = next.v.iter().position(|v| !v.is_finite()) {
            state = next;
            break RunOutcome::NumericalFailure(format!(
                "non-finite value at x = {} in step {}",
                grid.interior()[k],
                state.n
            ));
        }
        state = next;
        let vt = state.rate().expect("stepped state has a previous level");
        recorder.record(&state, &vt);

        let (idx, v_peak) = argmax_smallest(&state.v);
        if kawarada && v_peak >= threshold {
            break RunOutcome::Quenched(QuenchEvent {
                t_quench: state.t,
                x_star: grid.interior()[idx],
                v_peak,
                vt_peak: peak_of(&vt),
                step: state.n,
            });
        }
        if state.n >= STEADY_MIN_STEPS && classify_steady(&state, config.steady_eps) {
            break RunOutcome::SteadyState { t: state.t };
        }
        if state.t >= config.t_max || config.max_steps.is_some_and(|m| state.n >= m) {
            break RunOutcome::MaxTimeReached { t: state.t };
        }
    };

    Ok(SimulationRun {
        outcome,
        snapshots: recorder.finish(),
        diagnostics,
        final_state: state,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inf_norm;

    #[test]
    fn steady_classification() {
        let mut s = SolutionState::initial(vec![0.3, 0.4]);
        assert!(!classify_steady(&s, 1e-8));
        s.v_prev = Some(s.v.clone());
        s.tau_prev = Some(1e-4);
        assert!(classify_steady(&s, 1e-8));
        s.v[1] += 1e-4;
        assert!(!classify_steady(&s, 1e-8));
    }

    #[test]
    fn argmax_prefers_smallest_index() {
        assert_eq!(argmax_smallest(&[0.1, 0.5, 0.5, 0.2]), (1, 0.5));
        assert_eq!(argmax_smallest(&[0.1, 0.5 - 1e-13, 0.5]).0, 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = RunConfig::new(ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0));
        c.quench_delta = 1.5;
        assert!(matches!(run_simulation(&c), Err(ParamError::QuenchDelta { .. })));
        let mut c = RunConfig::new(ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0));
        c.t_max = 0.0;
        assert!(run_simulation(&c).is_err());
        let mut c = RunConfig::new(ProblemSpec::kawarada(2.5, 1.0, 1.0, 0.0));
        c.t_max = 1.0;
        assert!(matches!(run_simulation(&c), Err(ParamError::SigmaOutOfRange(_))));
    }

    #[test]
    fn subcritical_interval_settles() {
        let spec = ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0);
        let mut c = RunConfig::new(spec);
        c.t_max = 10.0;
        let run = run_simulation(&c).unwrap();
        let RunOutcome::SteadyState { t } = run.outcome else {
            panic!("expected steady state, got {}", run.outcome);
        };
        assert!(t < 10.0);
        assert!(run.final_state.rate_inf_norm().unwrap() < 1e-8);
        assert!(run.final_state.v.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn snapshot_policies() {
        let spec = ProblemSpec::kawarada(2.0, 1.0, std::f64::consts::PI, 0.0);
        let mut c = RunConfig::new(spec);
        c.intervals = 40;
        c.snapshot_policy = SnapshotPolicy::LastSteps(20);
        let run = run_simulation(&c).unwrap();
        let q = *run.outcome.quench().expect("pi interval quenches");
        assert_eq!(run.snapshots.records.len(), 20);
        assert_eq!(run.snapshots.peaks.len(), q.step);
        assert_eq!(run.snapshots.last().unwrap().t, q.t_quench);
        assert!(run.snapshots.records.windows(2).all(|w| w[0].t < w[1].t));
        assert!(q.v_peak >= 0.99 && q.v_peak < 1.0);
        assert!(q.vt_peak > 0.0);

        c.snapshot_policy = SnapshotPolicy::None;
        let plain = run_simulation(&c).unwrap();
        assert!(plain.snapshots.is_empty());
        assert_eq!(plain.outcome, run.outcome);
    }

    #[test]
    fn max_steps_stops_early() {
        let mut c = RunConfig::new(ProblemSpec::kawarada(1.8, 1.0, 2.0, 0.0));
        c.max_steps = Some(25);
        let run = run_simulation(&c).unwrap();
        assert!(matches!(run.outcome, RunOutcome::MaxTimeReached { .. }));
        assert_eq!(run.final_state.n, 25);
    }

    #[test]
    fn predictor_overflow_becomes_quench() {
        // A huge fixed step overshoots the ceiling in the predictor.
        let mut c = RunConfig::new(ProblemSpec::kawarada(2.0, 1.0, 3.0, 0.0));
        c.intervals = 20;
        c.controls = StepControls::fixed(0.3);
        c.quench_delta = 1e-6;
        let run = run_simulation(&c).unwrap();
        let q = run.outcome.quench().copied().expect("quench");
        assert!(q.t_quench > 0.0);
        assert!(q.x_star > 0.0 && q.x_star < 3.0);
    }

    #[test]
    fn warnings_are_collected() {
        let mut c = RunConfig::new(ProblemSpec::kawarada(1.55, 1.0, 1.0, 0.5));
        c.max_steps = Some(3);
        let run = run_simulation(&c).unwrap();
        assert!(run
            .diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::SigmaBelowMMatrixBound { .. })));
        assert!(run
            .diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::StabilityBoundExceeded { step: 1, .. })));
    }

    #[test]
    fn identical_configs_are_bitwise_identical() {
        let mut c = RunConfig::new(ProblemSpec::kawarada(1.8, 1.0, 2.0, -0.5));
        c.intervals = 50;
        let a = run_simulation(&c).unwrap();
        let b = run_simulation(&c).unwrap();
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.final_state, b.final_state);
        let d: Vec<f64> = a.final_state.v.iter().zip(&b.final_state.v).map(|(x, y)| x - y).collect();
        assert_eq!(inf_norm(&d), 0.0);
    }
}
