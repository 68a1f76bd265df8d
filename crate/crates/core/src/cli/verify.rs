//! Property suites run by `fracquench verify`.
//!
//! Every check carries its own oracle: exact Gamma-function binomials for the
//! weights, a directly built three-point matrix for the σ = 2 reduction,
//! analytic Riemann-Liouville derivatives of a polynomial for operator
//! accuracy, and explicit inverses for the M-matrix properties.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::fracops::{assemble_operator, grunwald_weights, Grid, ProblemSpec};
use crate::linalg::{inf_norm, lu_factor, DenseMatrix};
use crate::quenchlab::{run_simulation, RunConfig, SnapshotPolicy};
use crate::stepping::{admissible_tau_bound, monotonicity_defect, PadeStepper, SolverRoute};

pub const WEIGHT_SIGMAS: [f64; 5] = [1.1, 1.5, 1.5616, 1.8, 2.0];
pub const WEIGHT_TERMS: usize = 200;
/// Orders inside the M-matrix range `[(√17 - 1)/2, 2]`.
pub const LEMMA_SIGMAS: [f64; 3] = [1.5616, 1.8, 2.0];
/// Convection strengths with `c = b/x >= 0`, the sign the matrix lemmas rely on.
pub const LEMMA_B: [f64; 2] = [0.0, 1.0];
pub const MONOTONE_B: [f64; 3] = [-1.0, 0.0, 1.0];
/// Allowed componentwise decrease per step.
pub const MONOTONE_TOL: f64 = 1e-12;
pub const MATRIX_UNKNOWNS: usize = 40;
pub const MONOTONE_STEPS: usize = 500;
pub const STABILITY_STEPS: usize = 100;
pub const STABILITY_TRIALS: usize = 10;
pub const STABILITY_SEED: u64 = 0x5eed_0001;
pub const ACCURACY_SIGMAS: [f64; 6] = [1.1, 1.5, 1.5616, 1.8, 1.9, 2.0];
pub const ACCURACY_INTERVALS: [usize; 4] = [40, 80, 160, 320];
pub const MIN_SPATIAL_ORDER: f64 = 1.9;

/// Fraction of the admissible bound used for the matrix and stability checks.
const TAU_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Weights,
    Matrix,
    Monotone,
    Stability,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weights" => Ok(Suite::Weights),
            "matrix" => Ok(Suite::Matrix),
            "monotone" => Ok(Suite::Monotone),
            "stability" => Ok(Suite::Stability),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite `{s}` (weights, matrix, monotone, stability, all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: &'static str, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            suite,
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.suite, self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Weights => weight_checks(),
        Suite::Matrix => {
            let mut c = reduction_checks();
            c.extend(m_matrix_checks());
            c.extend(spatial_accuracy_checks());
            c
        }
        Suite::Monotone => {
            let mut c = monotonicity_checks();
            c.extend(mirror_symmetry_checks());
            c
        }
        Suite::Stability => stability_checks(STABILITY_SEED),
        Suite::All => [Suite::Weights, Suite::Matrix, Suite::Monotone, Suite::Stability]
            .into_iter()
            .flat_map(run_suite)
            .collect(),
    }
}

/// `(-1)^j binom(σ, j)` through the Gamma function; exact for integer σ.
pub fn binomial_weight(sigma: f64, j: usize) -> f64 {
    if sigma.fract() == 0.0 {
        let s = sigma as i64;
        let j = j as i64;
        if j > s {
            return 0.0;
        }
        let mut c = 1.0;
        for i in 0..j {
            c = c * (s - i) as f64 / (i + 1) as f64;
        }
        return if j % 2 == 0 { c } else { -c };
    }
    // binom(σ, j) (-1)^j = Γ(j - σ) / (Γ(-σ) Γ(j + 1)), with the reflection
    // formula 1/Γ(-σ) = -sin(πσ) Γ(σ + 1) / π.
    let jf = j as f64;
    let ratio = if jf - sigma < 1.0 {
        gamma(jf - sigma) / gamma(jf + 1.0)
    } else {
        (ln_gamma(jf - sigma) - ln_gamma(jf + 1.0)).exp()
    };
    -(std::f64::consts::PI * sigma).sin() * gamma(sigma + 1.0) / std::f64::consts::PI * ratio
}

pub fn weight_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for sigma in WEIGHT_SIGMAS {
        let w = grunwald_weights(sigma, WEIGHT_TERMS).expect("valid order");
        let z = &w.z;
        let head = z[0] == 1.0 && z[1] == -sigma && z[2] == sigma * (sigma - 1.0) / 2.0;
        out.push(Check::new(
            "weights",
            format!("sigma={sigma}: z0, z1, z2 exact"),
            head,
            format!("z0={} z1={} z2={}", z[0], z[1], z[2]),
        ));

        let tail_ok = z[2] <= 1.0 && z[2..].windows(2).all(|p| p[0] >= p[1]) && z[2..].iter().all(|&x| x >= 0.0);
        out.push(Check::new(
            "weights",
            format!("sigma={sigma}: 1 >= z2 >= z3 >= ... >= 0"),
            tail_ok,
            format!("{} terms, z_last={:.3e}", z.len(), z[z.len() - 1]),
        ));

        let sums = w.partial_sums();
        let worst = sums[1..].iter().cloned().fold(f64::MIN, f64::max);
        out.push(Check::new(
            "weights",
            format!("sigma={sigma}: partial sums <= 0"),
            worst <= 0.0,
            format!("max partial sum {worst:.3e}"),
        ));

        let rel = z
            .iter()
            .enumerate()
            .map(|(j, &zj)| {
                let exact = binomial_weight(sigma, j);
                if exact == 0.0 {
                    zj.abs()
                } else {
                    ((zj - exact) / exact).abs()
                }
            })
            .fold(0.0, f64::max);
        out.push(Check::new(
            "weights",
            format!("sigma={sigma}: matches Gamma binomials"),
            rel <= 1e-12,
            format!("max relative error {rel:.2e}"),
        ));
    }
    out
}

/// `d (v_{k-1} - 2 v_k + v_{k+1}) / h² + c_k (v_{k+1} - v_k) / h`, built directly.
pub fn classical_operator(spec: &ProblemSpec, grid: &Grid) -> DenseMatrix {
    let n = grid.unknowns();
    let h = grid.h();
    let x = grid.interior();
    DenseMatrix::from_fn(n, |k, j| {
        let d = (spec.d_plus.eval(x[k], 0.0) + spec.d_minus.eval(x[k], 0.0)) / (h * h);
        let c = spec.convection(x[k]) / h;
        if j == k {
            -2.0 * d - c
        } else if j == k + 1 {
            d + c
        } else if j + 1 == k {
            d
        } else {
            0.0
        }
    })
}

pub fn reduction_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for (b, intervals) in [(0.0, 41), (1.0, 41), (-1.0, 100), (0.5, 17)] {
        let spec = ProblemSpec::kawarada(2.0, 1.0, 1.0, b);
        let grid = Grid::new(1.0, intervals).expect("grid");
        let w = grunwald_weights(2.0, intervals + 1).expect("weights");
        let s = assemble_operator(&spec, &grid, &w, 0.0).expect("operator").s;
        let classical = classical_operator(&spec, &grid);
        let n = s.dim();
        let diff = DenseMatrix::from_fn(n, |i, j| s[(i, j)] - classical[(i, j)]);
        let ratio = diff.inf_norm() / classical.inf_norm();
        out.push(Check::new(
            "matrix",
            format!("sigma=2 reduction (b={b}, L={intervals})"),
            ratio <= 1e-12,
            format!("||S - S_classical|| / ||S_classical|| = {ratio:.2e}"),
        ));
    }
    out
}

fn explicit_inverse(p: &DenseMatrix) -> Option<DenseMatrix> {
    let lu = lu_factor(p).ok()?;
    let n = p.dim();
    let mut inv = DenseMatrix::zeros(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        let col = lu.solve(&e).ok()?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Some(inv)
}

/// Matrix properties of `P = I - τ/2 S` and `Q = I + τ/2 S` at the admissible
/// step for one `(σ, b)` pair on `(0, 1)` with `MATRIX_UNKNOWNS` unknowns.
pub fn m_matrix_case(sigma: f64, b: f64) -> Vec<Check> {
    let spec = ProblemSpec::kawarada(sigma, 1.0, 1.0, b);
    let grid = Grid::new(1.0, MATRIX_UNKNOWNS + 1).expect("grid");
    let w = grunwald_weights(sigma, grid.intervals() + 1).expect("weights");
    let s = assemble_operator(&spec, &grid, &w, 0.0).expect("operator").s;
    let tau = TAU_FRACTION * admissible_tau_bound(&spec, &grid);
    let p = s.shifted(1.0, -0.5 * tau);
    let q = s.shifted(1.0, 0.5 * tau);
    let n = p.dim();
    let label = |what: &str| format!("sigma={sigma}, b={b}: {what}");

    let mut sign_bad = 0;
    let mut dominance_margin = f64::INFINITY;
    for k in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if j == k {
                if !(p[(k, k)] > 0.0) {
                    sign_bad += 1;
                }
            } else {
                if p[(k, j)] > 0.0 {
                    sign_bad += 1;
                }
                off += p[(k, j)].abs();
            }
        }
        dominance_margin = dominance_margin.min(p[(k, k)] - off);
    }
    let mut out = vec![
        Check::new(
            "matrix",
            label("P sign pattern (p_kk > 0, p_kj <= 0)"),
            sign_bad == 0,
            format!("{sign_bad} entries with the wrong sign"),
        ),
        Check::new(
            "matrix",
            label("P strictly diagonally dominant"),
            dominance_margin > 0.0,
            format!("min (p_kk - sum |p_kj|) = {dominance_margin:.3e}"),
        ),
    ];

    let min_inv = explicit_inverse(&p)
        .map(|inv| inv.as_slice().iter().cloned().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    out.push(Check::new(
        "matrix",
        label("P^-1 entrywise >= -1e-12"),
        min_inv >= -1e-12,
        format!("min entry {min_inv:.3e}"),
    ));

    let min_q = q.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(Check::new(
        "matrix",
        label("Q = I + tau/2 S entrywise >= 0"),
        min_q >= 0.0,
        format!("min entry {min_q:.3e}"),
    ));

    let norm = 0.5 * tau * s.inf_norm();
    out.push(Check::new(
        "matrix",
        label("||tau/2 S|| < 1"),
        norm < 1.0,
        format!("||tau/2 S||_inf = {norm:.6}"),
    ));
    out
}

pub fn m_matrix_checks() -> Vec<Check> {
    LEMMA_SIGMAS
        .iter()
        .flat_map(|&s| LEMMA_B.iter().map(move |&b| (s, b)))
        .flat_map(|(s, b)| m_matrix_case(s, b))
        .collect()
}

/// Test function `x⁴ (a - x)⁴`; its zero extension is smooth enough for the
/// shifted Grünwald formula to reach second order.
pub fn accuracy_test_function(a: f64, x: f64) -> f64 {
    (x * (a - x)).powi(4)
}

/// Left Riemann-Liouville derivative of `x⁴ (a - x)⁴` from the monomial
/// rule `D^σ x^p = Γ(p + 1) / Γ(p + 1 - σ) x^(p - σ)`.
pub fn left_rl_derivative(sigma: f64, a: f64, x: f64) -> f64 {
    // x⁴ (a - x)⁴ = Σ_m C(4, m) a^(4 - m) (-1)^m x^(4 + m)
    const C4: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    (0..5)
        .map(|m| {
            let p = 4.0 + m as f64;
            let coef = C4[m] * a.powi(4 - m as i32) * if m % 2 == 0 { 1.0 } else { -1.0 };
            coef * gamma(p + 1.0) / gamma(p + 1.0 - sigma) * x.powf(p - sigma)
        })
        .sum()
}

/// Discrete `L²` errors of `S f` against the analytic operator, per grid.
pub fn spatial_errors(sigma: f64, intervals: &[usize]) -> Vec<f64> {
    let a = 1.0;
    let spec = ProblemSpec::kawarada(sigma, 1.0, a, 0.0);
    intervals
        .iter()
        .map(|&l| {
            let grid = Grid::new(a, l).expect("grid");
            let w = grunwald_weights(sigma, l + 1).expect("weights");
            let op = assemble_operator(&spec, &grid, &w, 0.0).expect("operator");
            let x = grid.interior();
            let f: Vec<f64> = x.iter().map(|&xk| accuracy_test_function(a, xk)).collect();
            let mut sf = vec![0.0; f.len()];
            op.s.mat_vec_into(&f, &mut sf);
            // d+ = d- = 1/2; the right derivative mirrors the left one because
            // the test function is symmetric about a/2.
            let sum: f64 = x
                .iter()
                .zip(&sf)
                .map(|(&xk, s)| {
                    let exact = 0.5 * left_rl_derivative(sigma, a, xk) + 0.5 * left_rl_derivative(sigma, a, a - xk);
                    (s - exact).powi(2)
                })
                .sum();
            (grid.h() * sum).sqrt()
        })
        .collect()
}

pub fn spatial_accuracy_checks() -> Vec<Check> {
    ACCURACY_SIGMAS
        .par_iter()
        .map(|&sigma| {
            let e = spatial_errors(sigma, &ACCURACY_INTERVALS);
            let orders: Vec<f64> = e.windows(2).map(|p| (p[0] / p[1]).log2()).collect();
            let min = orders.iter().cloned().fold(f64::INFINITY, f64::min);
            let shown: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
            Check::new(
                "matrix",
                format!("sigma={sigma}: spatial order >= {MIN_SPATIAL_ORDER}"),
                min >= MIN_SPATIAL_ORDER,
                format!("observed orders [{}] on L = {:?}", shown.join(", "), ACCURACY_INTERVALS),
            )
        })
        .collect()
}

/// Steps from `v⁰ = 0` on `(0, 1)` inside the stability bound and records the
/// worst decrease, the minimum and the maximum over all steps.
pub fn monotonicity_case(sigma: f64, b: f64, steps: usize) -> (f64, f64, f64) {
    let spec = ProblemSpec::kawarada(sigma, 1.0, 1.0, b);
    let grid = Grid::new(1.0, MATRIX_UNKNOWNS + 1).expect("grid");
    let bound = admissible_tau_bound(&spec, &grid);
    let tau = TAU_FRACTION * bound;
    let mut stepper = PadeStepper::new(&spec, &grid, SolverRoute::Hessenberg).expect("stepper");
    let mut state = stepper.initial_state();
    let (mut defect, mut vmin, mut vmax) = (0.0_f64, f64::INFINITY, f64::MIN);
    for _ in 0..steps {
        state = match stepper.step(&state, tau) {
            Ok(s) => s,
            Err(_) => return (f64::INFINITY, f64::NAN, f64::NAN),
        };
        defect = defect.max(monotonicity_defect(&state));
        for &v in &state.v {
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
    }
    (defect, vmin, vmax)
}

pub fn monotonicity_checks() -> Vec<Check> {
    let cases: Vec<(f64, f64)> = LEMMA_SIGMAS
        .iter()
        .flat_map(|&s| MONOTONE_B.iter().map(move |&b| (s, b)))
        .collect();
    cases
        .par_iter()
        .flat_map_iter(|&(sigma, b)| {
            let (defect, vmin, vmax) = monotonicity_case(sigma, b, MONOTONE_STEPS);
            let label = |w: &str| format!("sigma={sigma}, b={b}: {w}");
            vec![
                Check::new(
                    "monotone",
                    label("componentwise nondecreasing"),
                    defect <= MONOTONE_TOL,
                    format!("largest decrease {defect:.3e} over {MONOTONE_STEPS} steps"),
                ),
                Check::new(
                    "monotone",
                    label("0 <= v < kappa"),
                    vmin >= 0.0 && vmax < 1.0,
                    format!("min {vmin:.3e}, max {vmax:.6e}"),
                ),
            ]
        })
        .collect()
}

/// Largest `||v - reverse(v)||_∞` over every recorded step of a `b = 0` run.
pub fn mirror_defect(sigma: f64, a: f64) -> (f64, usize) {
    let mut c = RunConfig::new(ProblemSpec::kawarada(sigma, 1.0, a, 0.0));
    c.snapshot_policy = SnapshotPolicy::EveryStep;
    let run = run_simulation(&c).expect("valid config");
    let worst = run
        .snapshots
        .records
        .iter()
        .map(|s| {
            s.v.iter()
                .zip(s.v.iter().rev())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    (worst, run.snapshots.records.len())
}

pub fn mirror_symmetry_checks() -> Vec<Check> {
    [(2.0, std::f64::consts::PI), (1.8, 2.0), (1.5616, 1.0)]
        .par_iter()
        .map(|&(sigma, a)| {
            let (worst, n) = mirror_defect(sigma, a);
            Check::new(
                "monotone",
                format!("sigma={sigma}, a={a:.4}, b=0: mirror symmetry"),
                worst < 1e-9 && n > 0,
                format!("max ||v - reverse(v)|| = {worst:.2e} over {n} snapshots"),
            )
        })
        .collect()
}

/// Frozen-source error growth: the worst `||E^n|| / ||E^0||` over all trials
/// and steps.
pub fn stability_case(sigma: f64, b: f64, seed: u64) -> f64 {
    let spec = ProblemSpec::kawarada(sigma, 1.0, 1.0, b);
    let grid = Grid::new(1.0, MATRIX_UNKNOWNS + 1).expect("grid");
    let tau = TAU_FRACTION * admissible_tau_bound(&spec, &grid);
    let mut stepper = PadeStepper::new(&spec, &grid, SolverRoute::DenseLu).expect("stepper");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..STABILITY_TRIALS {
        let e0: Vec<f64> = (0..grid.unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n0 = inf_norm(&e0);
        let mut e = e0;
        for _ in 0..STABILITY_STEPS {
            e = match stepper.propagate_frozen(&e, tau) {
                Ok(e) => e,
                Err(_) => return f64::INFINITY,
            };
            worst = worst.max(inf_norm(&e) / n0);
        }
    }
    worst
}

pub fn stability_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for (i, &sigma) in LEMMA_SIGMAS.iter().enumerate() {
        for (j, &b) in LEMMA_B.iter().enumerate() {
            let growth = stability_case(sigma, b, seed + (10 * i + j) as u64);
            out.push(Check::new(
                "stability",
                format!("sigma={sigma}, b={b}: ||E^n|| <= ||E^0||"),
                growth <= 1.0 + 1e-10,
                format!(
                    "max ratio {growth:.12} over {STABILITY_TRIALS} perturbations x {STABILITY_STEPS} steps"
                ),
            ));
        }
    }
    out
}
