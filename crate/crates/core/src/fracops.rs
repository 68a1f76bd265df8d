//! Grünwald-Letnikov weights and the dense spatial operator.
//!
//! The interior unknowns live at `x_1 .. x_{L-1}`; both Dirichlet values are
//! zero and drop out of the truncated Grünwald sums. Row `k` of `S` collects
//!
//! ```text
//! d+_k/h^σ [(1-σ/2) Σ_j z_j v_{k-j} + (σ/2) Σ_j z_j v_{k-j+1}]      (left sums)
//! d-_k/h^σ [(1-σ/2) Σ_j z_j v_{k+j} + (σ/2) Σ_j z_j v_{k+j-1}]      (right sums)
//! c_k/h (v_{k+1} - v_k),   c_k = b / x_k
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{ParamError, QuenchOverflow};
use crate::linalg::DenseMatrix;

/// Smallest order for which the shifted-weight combinations stay positive,
/// `(√17 - 1) / 2`. Below it the M-matrix structure of the step matrices is
/// no longer guaranteed.
pub const M_MATRIX_SIGMA_MIN: f64 = 1.561_552_812_808_830_3;

/// A diffusivity `d(x, t)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field {
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        time_dependent: bool,
    },
}

impl Coefficient {
    pub fn field(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, time_dependent: bool) -> Self {
        Coefficient::Field {
            f: Arc::new(f),
            time_dependent,
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field { f, .. } => f(x, t),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Coefficient::Field { time_dependent: true, .. })
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Field { .. } => None,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field { time_dependent, .. } => {
                write!(f, "Field {{ time_dependent: {time_dependent} }}")
            }
        }
    }
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Coefficient::Constant(a), Coefficient::Constant(b)) => a == b,
            (Coefficient::Field { f: a, .. }, Coefficient::Field { f: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Initial profile `ψ(x)`.
#[derive(Clone, Default)]
pub enum InitialProfile {
    #[default]
    Zero,
    Field(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl InitialProfile {
    pub fn field(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialProfile::Field(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialProfile::Zero => 0.0,
            InitialProfile::Field(f) => f(x),
        }
    }
}

impl fmt::Debug for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialProfile::Zero => write!(f, "Zero"),
            InitialProfile::Field(_) => write!(f, "Field"),
        }
    }
}

impl PartialEq for InitialProfile {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (InitialProfile::Zero, InitialProfile::Zero) => true,
            (InitialProfile::Field(a), InitialProfile::Field(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Reaction term of the model.
///
/// `Kawarada` is the singular source `(κ - v)^(-θ)`. `Forcing` replaces it
/// with a bounded, solution-independent `g(x, t)`, which turns the model into
/// a linear problem with manufactured solutions.
#[derive(Clone, Default)]
pub enum SourceTerm {
    #[default]
    Kawarada,
    Forcing(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl SourceTerm {
    pub fn forcing(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SourceTerm::Forcing(Arc::new(f))
    }
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTerm::Kawarada => write!(f, "Kawarada"),
            SourceTerm::Forcing(_) => write!(f, "Forcing"),
        }
    }
}

impl PartialEq for SourceTerm {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SourceTerm::Kawarada, SourceTerm::Kawarada) => true,
            (SourceTerm::Forcing(a), SourceTerm::Forcing(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Parameters of the continuous problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub sigma: f64,
    pub theta: f64,
    pub kappa: f64,
    pub a: f64,
    /// Convection strength in `c(x, t) = b / x`.
    pub b: f64,
    pub d_plus: Coefficient,
    pub d_minus: Coefficient,
    pub psi: InitialProfile,
    pub source: SourceTerm,
}

impl ProblemSpec {
    /// Kawarada problem with `κ = 1`, `d+ = d- = 1/2`, `ψ = 0`.
    pub fn kawarada(sigma: f64, theta: f64, a: f64, b: f64) -> Self {
        Self {
            sigma,
            theta,
            kappa: 1.0,
            a,
            b,
            d_plus: Coefficient::Constant(0.5),
            d_minus: Coefficient::Constant(0.5),
            psi: InitialProfile::Zero,
            source: SourceTerm::Kawarada,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("sigma", self.sigma),
            ("theta", self.theta),
            ("kappa", self.kappa),
            ("a", self.a),
            ("b", self.b),
        ] {
            if !value.is_finite() {
                return Err(ParamError::NotFinite { name, value });
            }
        }
        if !(self.sigma > 1.0 && self.sigma <= 2.0) {
            return Err(ParamError::SigmaOutOfRange(self.sigma));
        }
        for (name, value) in [("theta", self.theta), ("kappa", self.kappa), ("a", self.a)] {
            if value <= 0.0 {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        Ok(())
    }

    pub fn is_time_dependent(&self) -> bool {
        self.d_plus.is_time_dependent() || self.d_minus.is_time_dependent()
    }

    pub fn convection(&self, x: f64) -> f64 {
        self.b / x
    }

    /// Checks the grid-level invariants: positive diffusivities at time `t`
    /// and `0 <= ψ < κ` at every node.
    pub fn check_on_grid(&self, grid: &Grid, t: f64) -> Result<(), ParamError> {
        for &x in grid.interior() {
            for (name, d) in [("d_plus", &self.d_plus), ("d_minus", &self.d_minus)] {
                let value = d.eval(x, t);
                if !(value > 0.0) || !value.is_finite() {
                    return Err(ParamError::Diffusivity { name, x, t, value });
                }
            }
        }
        if matches!(self.source, SourceTerm::Kawarada) {
            for &x in grid.nodes() {
                let value = self.psi.eval(x);
                if !(value >= 0.0 && value < self.kappa) {
                    return Err(ParamError::InitialProfile {
                        x,
                        value,
                        kappa: self.kappa,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Coefficients `z_j = (-1)^j binom(σ, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrunwaldWeights {
    pub sigma: f64,
    pub z: Vec<f64>,
}

impl GrunwaldWeights {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn partial_sums(&self) -> Vec<f64> {
        self.z
            .iter()
            .scan(0.0, |acc, z| {
                *acc += z;
                Some(*acc)
            })
            .collect()
    }

    /// `(1 - σ/2) z_m + (σ/2) z_{m+1}`: the weight a shifted-average row puts on
    /// the node `m` places away, for `m >= 0`.
    pub fn shifted_combination(&self, m: usize) -> f64 {
        (1.0 - 0.5 * self.sigma) * self.z[m] + 0.5 * self.sigma * self.z[m + 1]
    }
}

pub fn grunwald_weights(sigma: f64, count: usize) -> Result<GrunwaldWeights, ParamError> {
    if !(sigma > 1.0 && sigma <= 2.0) {
        return Err(ParamError::SigmaOutOfRange(sigma));
    }
    if count < 3 {
        return Err(ParamError::TooFewWeights { min: 3, got: count });
    }
    let mut z = Vec::with_capacity(count);
    z.push(1.0);
    for j in 1..count {
        let prev = z[j - 1];
        z.push(prev * ((j as f64 - 1.0 - sigma) / j as f64));
    }
    Ok(GrunwaldWeights { sigma, z })
}

/// Uniform grid `x_k = k h`, `k = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    intervals: usize,
    h: f64,
    x: Vec<f64>,
}

impl Grid {
    pub fn new(a: f64, intervals: usize) -> Result<Self, ParamError> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(ParamError::NotPositive { name: "a", value: a });
        }
        if intervals < 2 {
            return Err(ParamError::TooFewIntervals(intervals));
        }
        let h = a / intervals as f64;
        let mut x: Vec<f64> = (0..=intervals).map(|k| k as f64 * h).collect();
        x[intervals] = a;
        Ok(Self { intervals, h, x })
    }

    /// Number of subintervals `L`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.x[self.intervals]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    /// `x_1 .. x_{L-1}`
    pub fn interior(&self) -> &[f64] {
        &self.x[1..self.intervals]
    }

    pub fn unknowns(&self) -> usize {
        self.intervals - 1
    }
}

/// The assembled operator `S` together with its per-row scales.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub s: DenseMatrix,
    pub assembled_at_t: f64,
    /// `d+_k / h^σ`
    pub xi: Vec<f64>,
    /// `d-_k / h^σ`
    pub omega: Vec<f64>,
    /// `c_k / h`
    pub varsigma: Vec<f64>,
    pub interior_x: Vec<f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.s.dim()
    }
}

pub fn assemble_operator(
    spec: &ProblemSpec,
    grid: &Grid,
    weights: &GrunwaldWeights,
    t: f64,
) -> Result<OperatorMatrix, ParamError> {
    spec.validate()?;
    if weights.sigma != spec.sigma {
        return Err(ParamError::WeightOrderMismatch {
            weights: weights.sigma,
            problem: spec.sigma,
        });
    }
    let l = grid.intervals();
    if weights.len() < l + 1 {
        return Err(ParamError::TooFewWeights {
            min: l + 1,
            got: weights.len(),
        });
    }
    if (grid.length() - spec.a).abs() > 1e-12 * spec.a {
        return Err(ParamError::GridMismatch {
            grid: grid.length(),
            problem: spec.a,
        });
    }

    let sigma = spec.sigma;
    let h = grid.h();
    let h_sigma = h.powf(sigma);
    let x = grid.interior().to_vec();
    let xi: Vec<f64> = x.iter().map(|&xk| spec.d_plus.eval(xk, t) / h_sigma).collect();
    let omega: Vec<f64> = x.iter().map(|&xk| spec.d_minus.eval(xk, t) / h_sigma).collect();
    let varsigma: Vec<f64> = x.iter().map(|&xk| spec.convection(xk) / h).collect();

    let n = grid.unknowns();
    let g: Vec<f64> = (0..n).map(|m| weights.shifted_combination(m)).collect();
    let half_sigma_z0 = 0.5 * sigma * weights.z[0];
    let s = DenseMatrix::from_fn(n, |i, j| {
        let (xi_k, om_k, c_k) = (xi[i], omega[i], varsigma[i]);
        if i == j {
            (xi_k + om_k) * g[0] - c_k
        } else if j == i + 1 {
            xi_k * half_sigma_z0 + om_k * g[1] + c_k
        } else if i == j + 1 {
            om_k * half_sigma_z0 + xi_k * g[1]
        } else if i > j {
            xi_k * g[i - j]
        } else {
            om_k * g[j - i]
        }
    });

    Ok(OperatorMatrix {
        s,
        assembled_at_t: t,
        xi,
        omega,
        varsigma,
        interior_x: x,
    })
}

/// `p_k = (κ - v_k)^(-θ)`.
pub fn source_eval(v: &[f64], spec: &ProblemSpec) -> Result<Vec<f64>, QuenchOverflow> {
    let mut out = vec![0.0; v.len()];
    source_eval_into(v, spec.kappa, spec.theta, &mut out)?;
    Ok(out)
}

pub(crate) fn source_eval_into(
    v: &[f64],
    kappa: f64,
    theta: f64,
    out: &mut [f64],
) -> Result<(), QuenchOverflow> {
    for (index, (&vk, o)) in v.iter().zip(out.iter_mut()).enumerate() {
        // `!(vk < kappa)` also catches NaN.
        if !(vk < kappa) {
            return Err(QuenchOverflow {
                index,
                value: vk,
                kappa,
            });
        }
        *o = if theta == 1.0 {
            1.0 / (kappa - vk)
        } else {
            (kappa - vk).powf(-theta)
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_two_weights_terminate() {
        let w = grunwald_weights(2.0, 5).unwrap();
        assert_eq!(w.z, vec![1.0, -2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn leading_weights() {
        let w = grunwald_weights(1.5, 3).unwrap();
        assert_eq!(w.z, vec![1.0, -1.5, 0.375]);
        // (-1)^3 binom(1.5, 3) = -(1.5)(0.5)(-0.5)/6
        let w = grunwald_weights(1.5, 4).unwrap();
        assert!((w.z[3] - 0.0625).abs() < 1e-16);
    }

    #[test]
    fn weight_domain_errors() {
        assert_eq!(grunwald_weights(1.0, 5), Err(ParamError::SigmaOutOfRange(1.0)));
        assert_eq!(grunwald_weights(2.1, 5), Err(ParamError::SigmaOutOfRange(2.1)));
        assert!(grunwald_weights(f64::NAN, 5).is_err());
        assert_eq!(grunwald_weights(1.5, 2), Err(ParamError::TooFewWeights { min: 3, got: 2 }));
    }

    #[test]
    fn grid_endpoints() {
        let g = Grid::new(std::f64::consts::PI, 100).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.length(), std::f64::consts::PI);
        assert_eq!(g.unknowns(), 99);
        assert_eq!(g.interior().len(), 99);
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(-1.0, 10).is_err());
    }

    #[test]
    fn order_two_operator_is_classical_second_difference() {
        let spec = ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0);
        let grid = Grid::new(1.0, 10).unwrap();
        let w = grunwald_weights(2.0, 11).unwrap();
        let op = assemble_operator(&spec, &grid, &w, 0.0).unwrap();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        for i in 0..9usize {
            for j in 0..9 {
                let expected = match i.abs_diff(j) {
                    0 => -2.0 * inv_h2,
                    1 => inv_h2,
                    _ => 0.0,
                };
                assert!((op.s[(i, j)] - expected).abs() <= 1e-12 * inv_h2, "({i},{j})");
            }
        }
    }

    #[test]
    fn lower_band_entry_by_hand() {
        // sigma = 1.8, L = 4: row k = 3, column j = 1 (k > j + 1)
        let sigma: f64 = 1.8;
        let spec = ProblemSpec::kawarada(sigma, 1.0, 1.0, 0.3);
        let grid = Grid::new(1.0, 4).unwrap();
        let w = grunwald_weights(sigma, 5).unwrap();
        let op = assemble_operator(&spec, &grid, &w, 0.0).unwrap();
        let z2 = sigma * (sigma - 1.0) / 2.0;
        let z3 = z2 * (2.0 - sigma) / 3.0;
        let h = 0.25_f64;
        let expected = 0.5 / h.powf(sigma) * ((1.0 - sigma / 2.0) * z2 + sigma / 2.0 * z3);
        assert!((op.s[(2, 0)] - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn convection_enters_diagonal_and_superdiagonal_only() {
        let grid = Grid::new(2.0, 8).unwrap();
        let w = grunwald_weights(1.7, 9).unwrap();
        let still = assemble_operator(&ProblemSpec::kawarada(1.7, 1.0, 2.0, 0.0), &grid, &w, 0.0).unwrap();
        let moving = assemble_operator(&ProblemSpec::kawarada(1.7, 1.0, 2.0, 0.8), &grid, &w, 0.0).unwrap();
        let h = grid.h();
        for i in 0..7 {
            let c = 0.8 / grid.interior()[i] / h;
            for j in 0..7 {
                let d = moving.s[(i, j)] - still.s[(i, j)];
                let expected = if j == i { -c } else if j == i + 1 { c } else { 0.0 };
                assert!((d - expected).abs() < 1e-10 * c, "({i},{j})");
            }
        }
    }

    #[test]
    fn assembly_preconditions() {
        let spec = ProblemSpec::kawarada(1.8, 1.0, 1.0, 0.0);
        let grid = Grid::new(1.0, 10).unwrap();
        let short = grunwald_weights(1.8, 5).unwrap();
        assert!(matches!(
            assemble_operator(&spec, &grid, &short, 0.0),
            Err(ParamError::TooFewWeights { .. })
        ));
        let wrong = grunwald_weights(1.7, 11).unwrap();
        assert!(matches!(
            assemble_operator(&spec, &grid, &wrong, 0.0),
            Err(ParamError::WeightOrderMismatch { .. })
        ));
        let other = Grid::new(2.0, 10).unwrap();
        let w = grunwald_weights(1.8, 11).unwrap();
        assert!(matches!(
            assemble_operator(&spec, &other, &w, 0.0),
            Err(ParamError::GridMismatch { .. })
        ));
    }

    #[test]
    fn time_independent_reassembly_is_identical() {
        let spec = ProblemSpec::kawarada(1.6, 1.0, 1.5, -0.4);
        let grid = Grid::new(1.5, 20).unwrap();
        let w = grunwald_weights(1.6, 21).unwrap();
        let a = assemble_operator(&spec, &grid, &w, 0.0).unwrap();
        let b = assemble_operator(&spec, &grid, &w, 3.7).unwrap();
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn source_values() {
        let spec = ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0);
        assert_eq!(source_eval(&[0.0; 4], &spec).unwrap(), vec![1.0; 4]);
        let p = source_eval(&[0.99], &spec).unwrap();
        assert!((p[0] - 100.0).abs() < 1e-10);
        let spec2 = ProblemSpec { theta: 2.0, ..spec.clone() };
        assert!((source_eval(&[0.5], &spec2).unwrap()[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn source_overflow_is_an_error() {
        let spec = ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0);
        let err = source_eval(&[0.1, 1.0, 0.2], &spec).unwrap_err();
        assert_eq!(err.index, 1);
        assert!(source_eval(&[1.5], &spec).is_err());
        assert!(source_eval(&[f64::NAN], &spec).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0).validate().is_ok());
        assert!(ProblemSpec::kawarada(0.9, 1.0, 1.0, 0.0).validate().is_err());
        assert!(ProblemSpec::kawarada(1.5, 0.0, 1.0, 0.0).validate().is_err());
        assert!(ProblemSpec::kawarada(1.5, 1.0, -1.0, 0.0).validate().is_err());
        let grid = Grid::new(1.0, 10).unwrap();
        let mut spec = ProblemSpec::kawarada(1.5, 1.0, 1.0, 0.0);
        spec.psi = InitialProfile::field(|_| 1.0);
        assert!(matches!(spec.check_on_grid(&grid, 0.0), Err(ParamError::InitialProfile { .. })));
        spec.psi = InitialProfile::Zero;
        spec.d_minus = Coefficient::field(|x, _| x - 0.5, false);
        assert!(matches!(spec.check_on_grid(&grid, 0.0), Err(ParamError::Diffusivity { .. })));
    }
}
