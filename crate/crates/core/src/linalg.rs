//! Small dense linear algebra kit.
//!
//! Everything here is sized for the interior systems of the solver
//! (`L - 1 <= 1000`), so storage is plain row-major `Vec<f64>`.

use std::ops::{Index, IndexMut};

use crate::error::LinalgError;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from row-major data; `data.len()` must be a square.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `alpha * I + beta * self`
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= beta;
        }
        for i in 0..self.n {
            out[(i, i)] += alpha;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if other.n != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn check_finite(&self) -> Result<(), LinalgError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(LinalgError::NonFinite {
                row: p / self.n,
                col: p % self.n,
            }),
            None => Ok(()),
        }
    }

    /// `out = self * v`, without allocating.
    pub fn mat_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mat_vec(a: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if v.len() != a.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.dim(),
            got: v.len(),
        });
    }
    let mut out = vec![0.0; a.dim()];
    a.mat_vec_into(v, &mut out);
    Ok(out)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Identifies the matrix a factorization was built from: its dimension and,
/// for the stepping systems `I - (τ/2) S`, the bit pattern of τ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint {
    pub dim: usize,
    pub tau_bits: Option<u64>,
}

/// `P A = L U` with unit-diagonal `L` stored below the diagonal of `lu`.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    lu: DenseMatrix,
    perm: Vec<usize>,
    swaps: usize,
    fingerprint: Fingerprint,
}

pub fn lu_factor(a: &DenseMatrix) -> Result<LuFactorization, LinalgError> {
    a.check_finite()?;
    let n = a.dim();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == 0.0 {
            return Err(LinalgError::Singular { column: k });
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            swaps += 1;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let l = lu[(i, k)] / pivot;
            lu[(i, k)] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
    }
    Ok(LuFactorization {
        lu,
        perm,
        swaps,
        fingerprint: Fingerprint {
            dim: n,
            tau_bits: None,
        },
    })
}

pub fn lu_solve(f: &LuFactorization, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    f.solve(rhs)
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub(crate) fn tagged(mut self, tau: f64) -> Self {
        self.fingerprint.tau_bits = Some(tau.to_bits());
        self
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn determinant(&self) -> f64 {
        let sign = if self.swaps % 2 == 0 { 1.0 } else { -1.0 };
        (0..self.dim()).map(|i| self.lu[(i, i)]).product::<f64>() * sign
    }

    /// Unit lower-triangular factor.
    pub fn lower(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim(), |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    pub fn upper(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim(), |i, j| if j >= i { self.lu[(i, j)] } else { 0.0 })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

/// Orthogonal similarity `A = Q H Q^T` with `H` upper Hessenberg.
///
/// Lets the stepper solve `(αI + βA) x = r` for a new shift at O(n²) cost,
/// since `αI + βH` stays Hessenberg.
#[derive(Debug, Clone)]
pub struct HessenbergForm {
    q: DenseMatrix,
    h: DenseMatrix,
}

pub fn hessenberg(a: &DenseMatrix) -> Result<HessenbergForm, LinalgError> {
    a.check_finite()?;
    let n = a.dim();
    let mut h = a.clone();
    let mut q = DenseMatrix::identity(n);
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: f64 = (k + 1..n).map(|i| h[(i, k)] * h[(i, k)]).sum();
        if alpha_sq == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -alpha_sq.sqrt() } else { alpha_sq.sqrt() };
        for i in 0..n {
            v[i] = if i > k { h[(i, k)] } else { 0.0 };
        }
        v[k + 1] -= alpha;
        let vnorm_sq: f64 = v[k + 1..].iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let scale = 2.0 / vnorm_sq;
        // H <- (I - s v v^T) H
        for j in k..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * h[(i, j)]).sum::<f64>() * scale;
            for i in k + 1..n {
                h[(i, j)] -= s * v[i];
            }
        }
        // H <- H (I - s v v^T), Q <- Q (I - s v v^T)
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let row = &mut m.data[i * n..(i + 1) * n];
                let s = dot(&row[k + 1..], &v[k + 1..]) * scale;
                for (r, vi) in row[k + 1..].iter_mut().zip(&v[k + 1..]) {
                    *r -= s * vi;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    Ok(HessenbergForm { q, h })
}

impl HessenbergForm {
    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    /// Solves `(αI + βA) x = rhs` through the Hessenberg factor with
    /// adjacent-row partial pivoting.
    pub fn solve_shifted(&self, alpha: f64, beta: f64, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        // c = Q^T rhs
        let mut c = vec![0.0; n];
        for (i, r) in rhs.iter().enumerate() {
            let qrow = self.q.row(i);
            for (cj, qij) in c.iter_mut().zip(qrow) {
                *cj += qij * r;
            }
        }
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            let lo = i.saturating_sub(1);
            let src = self.h.row(i);
            let dst = &mut m[i * n..(i + 1) * n];
            for j in lo..n {
                dst[j] = beta * src[j];
            }
            dst[i] += alpha;
        }
        for k in 0..n.saturating_sub(1) {
            if m[(k + 1) * n + k].abs() > m[k * n + k].abs() {
                for j in k..n {
                    m.swap(k * n + j, (k + 1) * n + j);
                }
                c.swap(k, k + 1);
            }
            let pivot = m[k * n + k];
            if pivot == 0.0 {
                return Err(LinalgError::Singular { column: k });
            }
            let l = m[(k + 1) * n + k] / pivot;
            if l != 0.0 {
                let (top, bottom) = m.split_at_mut((k + 1) * n);
                let prow = &top[k * n + k + 1..k * n + n];
                let trow = &mut bottom[k + 1..n];
                for (t, p) in trow.iter_mut().zip(prow) {
                    *t -= l * p;
                }
                bottom[k] = 0.0;
                c[k + 1] -= l * c[k];
            }
        }
        if n > 0 && m[(n - 1) * n + n - 1] == 0.0 {
            return Err(LinalgError::Singular { column: n - 1 });
        }
        for i in (0..n).rev() {
            let row = &m[i * n..(i + 1) * n];
            let s = dot(&row[i + 1..], &c[i + 1..]);
            c[i] = (c[i] - s) / row[i];
        }
        let mut x = vec![0.0; n];
        self.q.mat_vec_into(&c, &mut x);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64, diag_boost: f64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DenseMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            m[(i, i)] += diag_boost;
        }
        m
    }

    fn residual_inf(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = mat_vec(a, x).unwrap();
        inf_norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
    }

    #[test]
    fn identity_factors_trivially() {
        let f = lu_factor(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(f.lower(), DenseMatrix::identity(4));
        assert_eq!(f.upper(), DenseMatrix::identity(4));
        assert_eq!(f.permutation(), &[0, 1, 2, 3]);
        let r = vec![1.0, -2.0, 3.5, 0.0];
        assert_eq!(lu_solve(&f, &r).unwrap(), r);
    }

    #[test]
    fn second_difference_determinant() {
        // det tridiag(1,-2,1) of order 3 = -2(4-1) - 1(-2) = -4
        let a = DenseMatrix::from_rows(3, vec![-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0]).unwrap();
        let f = lu_factor(&a).unwrap();
        assert!((f.determinant() + 4.0).abs() < 1e-14);
    }

    #[test]
    fn pivot_sign_enters_determinant() {
        let a = DenseMatrix::from_rows(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let f = lu_factor(&a).unwrap();
        assert_eq!(f.determinant(), -1.0);
    }

    #[test]
    fn hilbert_residual() {
        let a = DenseMatrix::from_fn(4, |i, j| 1.0 / (i + j + 1) as f64);
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let x = lu_solve(&lu_factor(&a).unwrap(), &b).unwrap();
        assert!(residual_inf(&a, &x, &b) < 1e-8);
    }

    #[test]
    fn diagonal_solve() {
        let a = DenseMatrix::identity(5).shifted(0.0, 2.0);
        let x = lu_solve(&lu_factor(&a).unwrap(), &[1.0; 5]).unwrap();
        assert_eq!(x, vec![0.5; 5]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DenseMatrix::from_rows(2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(lu_factor(&a), Err(LinalgError::Singular { column: 1 })));
        assert!(matches!(lu_factor(&DenseMatrix::zeros(3)), Err(LinalgError::Singular { column: 0 })));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = DenseMatrix::identity(3);
        a[(1, 2)] = f64::NAN;
        assert_eq!(lu_factor(&a).unwrap_err(), LinalgError::NonFinite { row: 1, col: 2 });
    }

    #[test]
    fn dimension_mismatch() {
        let f = lu_factor(&DenseMatrix::identity(3)).unwrap();
        assert!(matches!(f.solve(&[1.0, 2.0]), Err(LinalgError::DimensionMismatch { expected: 3, got: 2 })));
        assert!(mat_vec(&DenseMatrix::identity(2), &[1.0]).is_err());
    }

    #[test]
    fn random_solve_multiply_back() {
        let a = random_matrix(20, 7, 10.0);
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let x = lu_solve(&lu_factor(&a).unwrap(), &b).unwrap();
        let rel = residual_inf(&a, &x, &b) / (a.inf_norm() * inf_norm(&x) + inf_norm(&b));
        assert!(rel < 1e-10, "relative residual {rel}");
    }

    #[test]
    fn factors_reproduce_permuted_source() {
        for seed in 0..5 {
            let a = random_matrix(50, seed, 0.0);
            let f = lu_factor(&a).unwrap();
            let lu = f.lower().mul(&f.upper()).unwrap();
            let pa = DenseMatrix::from_fn(50, |i, j| a[(f.permutation()[i], j)]);
            let diff = DenseMatrix::from_fn(50, |i, j| lu[(i, j)] - pa[(i, j)]);
            assert!(diff.inf_norm() <= 1e-10 * a.inf_norm());
        }
    }

    #[test]
    fn norms() {
        assert_eq!(inf_norm(&[1.0, -3.0, 2.0]), 3.0);
        assert_eq!(two_norm(&[3.0, 4.0]), 5.0);
        let v = vec![0.25, -1.0, 7.0];
        assert_eq!(mat_vec(&DenseMatrix::identity(3), &v).unwrap(), v);
    }

    #[test]
    fn hessenberg_similarity() {
        let a = random_matrix(30, 11, 0.0);
        let hf = hessenberg(&a).unwrap();
        for i in 0..30usize {
            for j in 0..i.saturating_sub(1) {
                assert_eq!(hf.h()[(i, j)], 0.0);
            }
        }
        let qhqt = hf.q().mul(hf.h()).unwrap().mul(&hf.q().transpose()).unwrap();
        let diff = DenseMatrix::from_fn(30, |i, j| qhqt[(i, j)] - a[(i, j)]);
        assert!(diff.inf_norm() < 1e-12 * a.inf_norm());
        let qtq = hf.q().transpose().mul(hf.q()).unwrap();
        let orth = DenseMatrix::from_fn(30, |i, j| qtq[(i, j)] - if i == j { 1.0 } else { 0.0 });
        assert!(orth.inf_norm() < 1e-13);
    }

    #[test]
    fn hessenberg_shifted_solve_matches_lu() {
        let a = random_matrix(40, 3, 0.0);
        let hf = hessenberg(&a).unwrap();
        let b: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64).cos()).collect();
        for (alpha, beta) in [(1.0, -0.05), (1.0, 0.3), (2.0, 1.0)] {
            let shifted = a.shifted(alpha, beta);
            let x_lu = lu_solve(&lu_factor(&shifted).unwrap(), &b).unwrap();
            let x_h = hf.solve_shifted(alpha, beta, &b).unwrap();
            let d: Vec<f64> = x_lu.iter().zip(&x_h).map(|(p, q)| p - q).collect();
            assert!(inf_norm(&d) < 1e-10 * inf_norm(&x_lu), "alpha={alpha} beta={beta}");
        }
    }

    #[test]
    fn hessenberg_singular_shift() {
        let hf = hessenberg(&DenseMatrix::identity(3)).unwrap();
        assert!(matches!(hf.solve_shifted(1.0, -1.0, &[1.0; 3]), Err(LinalgError::Singular { .. })));
    }
}
