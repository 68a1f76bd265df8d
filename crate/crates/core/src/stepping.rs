//! Padé [1/1] time stepping with an Euler-predicted source.
//!
//! One step of size τ maps `v^{n-1}` to
//!
//! ```text
//! v^n = (I - τ/2 S)^{-1} (I + τ/2 S) (v^{n-1} + τ/2 p^{n-1}) + τ/2 p^n
//! p^n ≈ p(v^{n-1} + τ (S v^{n-1} + p^{n-1}))
//! ```

use thiserror::Error;

use crate::error::{LinalgError, ParamError, QuenchOverflow};
use crate::fracops::{
    assemble_operator, grunwald_weights, source_eval_into, Grid, GrunwaldWeights, OperatorMatrix,
    ProblemSpec, SourceTerm,
};
use crate::linalg::{hessenberg, lu_factor, HessenbergForm, LuFactorization};

/// Relative τ change below which a cached factorization is reused.
const TAU_REUSE_TOL: f64 = 1e-12;

/// `enforce` mode keeps τ strictly inside the stability bound.
const ENFORCE_MARGIN: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityMode {
    Enforce,
    #[default]
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControls {
    pub tau0: f64,
    pub stability_mode: StabilityMode,
    /// Ceiling on `τ_n / h^σ`.
    pub courant_cap: Option<f64>,
    /// `false` keeps τ = τ0 at every step (before caps).
    pub adaptive: bool,
}

impl StepControls {
    pub fn new(tau0: f64) -> Self {
        Self {
            tau0,
            stability_mode: StabilityMode::Warn,
            courant_cap: None,
            adaptive: true,
        }
    }

    pub fn fixed(tau0: f64) -> Self {
        Self {
            adaptive: false,
            ..Self::new(tau0)
        }
    }

    pub fn enforcing(tau0: f64) -> Self {
        Self {
            stability_mode: StabilityMode::Enforce,
            ..Self::new(tau0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub t: f64,
    pub n: usize,
    pub v: Vec<f64>,
    pub v_prev: Option<Vec<f64>>,
    pub tau_prev: Option<f64>,
}

impl SolutionState {
    pub fn initial(v: Vec<f64>) -> Self {
        Self {
            t: 0.0,
            n: 0,
            v,
            v_prev: None,
            tau_prev: None,
        }
    }

    /// Backward-difference rate `(v^n - v^{n-1}) / τ_n`.
    pub fn rate(&self) -> Option<Vec<f64>> {
        let prev = self.v_prev.as_ref()?;
        let tau = self.tau_prev?;
        Some(self.v.iter().zip(prev).map(|(a, b)| (a - b) / tau).collect())
    }

    pub fn rate_inf_norm(&self) -> Option<f64> {
        let prev = self.v_prev.as_ref()?;
        let tau = self.tau_prev?;
        Some(
            self.v
                .iter()
                .zip(prev)
                .fold(0.0, |m, (a, b)| m.max(((a - b) / tau).abs())),
        )
    }
}

/// Which stage of a step hit the quenching ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStage {
    Source,
    Predictor,
}

impl std::fmt::Display for StepStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepStage::Source => "source",
            StepStage::Predictor => "predictor",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("quench overflow in {stage} evaluation: {overflow}")]
    Quench {
        stage: StepStage,
        overflow: QuenchOverflow,
    },
    #[error("implicit system failed, step size likely violates the stability constraint: {0}")]
    Singular(#[from] LinalgError),
    #[error("step size {0} must be positive and finite")]
    InvalidStep(f64),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// `h^σ / (2[(d+)max + (d-)max] + c_max)` with maxima over interior nodes.
pub fn admissible_tau_bound(spec: &ProblemSpec, grid: &Grid) -> f64 {
    admissible_tau_bound_at(spec, grid, 0.0)
}

pub fn admissible_tau_bound_at(spec: &ProblemSpec, grid: &Grid, t: f64) -> f64 {
    let x = grid.interior();
    let dp = x.iter().map(|&xk| spec.d_plus.eval(xk, t)).fold(f64::MIN, f64::max);
    let dm = x.iter().map(|&xk| spec.d_minus.eval(xk, t)).fold(f64::MIN, f64::max);
    // |c| = |b| / x peaks at the first interior node x_1 = h.
    let c_max = x.iter().map(|&xk| spec.convection(xk).abs()).fold(0.0, f64::max);
    grid.h().powf(spec.sigma) / (2.0 * (dp + dm) + c_max)
}

/// Arc-length step `τ0 / sqrt(1 + ||v_t||²)`, then the Courant cap and, in
/// enforce mode, the stability bound. The first step uses τ0.
pub fn adaptive_tau(state: &SolutionState, controls: &StepControls, bound: f64, h_sigma: f64) -> f64 {
    let mut tau = controls.tau0;
    if controls.adaptive {
        if let Some(rate) = state.rate_inf_norm() {
            tau = controls.tau0 / (1.0 + rate * rate).sqrt();
        }
    }
    if let Some(cap) = controls.courant_cap {
        tau = tau.min(cap * h_sigma);
    }
    if controls.stability_mode == StabilityMode::Enforce {
        tau = tau.min(bound * ENFORCE_MARGIN);
    }
    tau
}

/// `max p(τ p^0)`; the first step is bounded below κ when `τ < 1/ϱ`.
pub fn first_step_rho(spec: &ProblemSpec, v0: &[f64], tau: f64) -> Result<f64, QuenchOverflow> {
    let mut p0 = vec![0.0; v0.len()];
    source_eval_into(v0, spec.kappa, spec.theta, &mut p0)?;
    let arg: Vec<f64> = p0.iter().map(|p| tau * p).collect();
    source_eval_into(&arg, spec.kappa, spec.theta, &mut p0)?;
    Ok(p0.iter().cloned().fold(0.0, f64::max))
}

fn eval_source(
    spec: &ProblemSpec,
    v: &[f64],
    x: &[f64],
    t: f64,
    stage: StepStage,
    out: &mut [f64],
) -> Result<(), StepError> {
    match &spec.source {
        SourceTerm::Kawarada => source_eval_into(v, spec.kappa, spec.theta, out)
            .map_err(|overflow| StepError::Quench { stage, overflow }),
        SourceTerm::Forcing(g) => {
            for (o, &xk) in out.iter_mut().zip(x) {
                *o = g(xk, t);
            }
            Ok(())
        }
    }
}

fn advance(
    state: &SolutionState,
    op: &OperatorMatrix,
    spec: &ProblemSpec,
    tau: f64,
    solve: impl FnOnce(&[f64]) -> Result<Vec<f64>, LinalgError>,
) -> Result<SolutionState, StepError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(StepError::InvalidStep(tau));
    }
    let n = state.v.len();
    let v = &state.v;
    let x = &op.interior_x;
    let half = 0.5 * tau;

    let mut p_old = vec![0.0; n];
    eval_source(spec, v, x, state.t, StepStage::Source, &mut p_old)?;

    let mut sv = vec![0.0; n];
    op.s.mat_vec_into(v, &mut sv);
    let predicted: Vec<f64> = (0..n).map(|k| v[k] + tau * (sv[k] + p_old[k])).collect();
    let mut p_new = vec![0.0; n];
    eval_source(spec, &predicted, x, state.t + tau, StepStage::Predictor, &mut p_new)?;

    let u: Vec<f64> = (0..n).map(|k| v[k] + half * p_old[k]).collect();
    let mut su = sv;
    op.s.mat_vec_into(&u, &mut su);
    let rhs: Vec<f64> = (0..n).map(|k| u[k] + half * su[k]).collect();
    let mut next = solve(&rhs)?;
    for (vk, pk) in next.iter_mut().zip(&p_new) {
        *vk += half * pk;
    }

    Ok(SolutionState {
        t: state.t + tau,
        n: state.n + 1,
        v: next,
        v_prev: Some(state.v.clone()),
        tau_prev: Some(tau),
    })
}

/// One step against an explicit operator, factoring `I - τ/2 S` afresh.
pub fn pade_step(
    state: &SolutionState,
    op: &OperatorMatrix,
    spec: &ProblemSpec,
    tau: f64,
) -> Result<SolutionState, StepError> {
    advance(state, op, spec, tau, |rhs| {
        lu_factor(&op.s.shifted(1.0, -0.5 * tau))?.solve(rhs)
    })
}

/// How the stepper solves `(I - τ/2 S) x = r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverRoute {
    /// Reduce `S` to Hessenberg form once; each solve is O(n²) for any τ.
    #[default]
    Hessenberg,
    /// LU with partial pivoting, cached while τ is unchanged.
    DenseLu,
}

enum Solver {
    Hessenberg(HessenbergForm),
    DenseLu(Option<LuFactorization>),
}

/// A stepping session for one problem on one grid.
///
/// Time-dependent coefficients force reassembly of `S` at the start of each
/// step and always use the LU route.
pub struct PadeStepper {
    spec: ProblemSpec,
    grid: Grid,
    weights: GrunwaldWeights,
    op: OperatorMatrix,
    solver: Solver,
}

impl PadeStepper {
    pub fn new(spec: &ProblemSpec, grid: &Grid, route: SolverRoute) -> Result<Self, ParamError> {
        spec.validate()?;
        spec.check_on_grid(grid, 0.0)?;
        let weights = grunwald_weights(spec.sigma, grid.intervals() + 1)?;
        let op = assemble_operator(spec, grid, &weights, 0.0)?;
        let route = if spec.is_time_dependent() {
            SolverRoute::DenseLu
        } else {
            route
        };
        let solver = match route {
            SolverRoute::Hessenberg => Solver::Hessenberg(
                hessenberg(&op.s).map_err(|_| ParamError::NotFinite {
                    name: "operator entry",
                    value: f64::NAN,
                })?,
            ),
            SolverRoute::DenseLu => Solver::DenseLu(None),
        };
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            weights,
            op,
            solver,
        })
    }

    pub fn operator(&self) -> &OperatorMatrix {
        &self.op
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn route(&self) -> SolverRoute {
        match self.solver {
            Solver::Hessenberg(_) => SolverRoute::Hessenberg,
            Solver::DenseLu(_) => SolverRoute::DenseLu,
        }
    }

    /// Initial interior vector from ψ.
    pub fn initial_state(&self) -> SolutionState {
        SolutionState::initial(self.grid.interior().iter().map(|&x| self.spec.psi.eval(x)).collect())
    }

    fn refresh_operator(&mut self, t: f64) -> Result<(), ParamError> {
        if self.spec.is_time_dependent() && self.op.assembled_at_t != t {
            self.spec.check_on_grid(&self.grid, t)?;
            self.op = assemble_operator(&self.spec, &self.grid, &self.weights, t)?;
            self.solver = Solver::DenseLu(None);
        }
        Ok(())
    }

    fn implicit_solve(
        solver: &mut Solver,
        op: &OperatorMatrix,
        tau: f64,
        rhs: &[f64],
    ) -> Result<Vec<f64>, LinalgError> {
        match solver {
            Solver::Hessenberg(hf) => hf.solve_shifted(1.0, -0.5 * tau, rhs),
            Solver::DenseLu(cache) => {
                let reuse = cache.as_ref().is_some_and(|f| {
                    let cached = f64::from_bits(f.fingerprint().tau_bits.unwrap_or(0));
                    (tau - cached).abs() <= TAU_REUSE_TOL * cached
                });
                if !reuse {
                    *cache = Some(lu_factor(&op.s.shifted(1.0, -0.5 * tau))?.tagged(tau));
                }
                cache.as_ref().expect("factorization cached above").solve(rhs)
            }
        }
    }

    pub fn step(&mut self, state: &SolutionState, tau: f64) -> Result<SolutionState, StepError> {
        self.refresh_operator(state.t)?;
        let Self { spec, op, solver, .. } = self;
        advance(state, op, spec, tau, |rhs| Self::implicit_solve(solver, op, tau, rhs))
    }

    /// Frozen-source error propagation `E <- (I - τ/2 S)^{-1} (I + τ/2 S) E`.
    pub fn propagate_frozen(&mut self, e: &[f64], tau: f64) -> Result<Vec<f64>, LinalgError> {
        let mut se = vec![0.0; e.len()];
        self.op.s.mat_vec_into(e, &mut se);
        let rhs: Vec<f64> = e.iter().zip(&se).map(|(a, b)| a + 0.5 * tau * b).collect();
        Self::implicit_solve(&mut self.solver, &self.op, tau, &rhs)
    }

    /// `h^σ` for the Courant cap.
    pub fn h_sigma(&self) -> f64 {
        self.grid.h().powf(self.spec.sigma)
    }
}

/// Largest componentwise decrease `max(v_prev - v, 0)`; zero for a monotone step.
pub fn monotonicity_defect(state: &SolutionState) -> f64 {
    match &state.v_prev {
        Some(prev) => state
            .v
            .iter()
            .zip(prev)
            .fold(0.0, |m, (a, b)| m.max(b - a)),
        None => 0.0,
    }
}
