//! Small dense symmetric linear algebra.
//!
//! Everything here operates on plain `Vec<f64>` vectors and a row-major
//! [`SymMatrix`]. Dimensions in this crate stay in the low hundreds, so the
//! routines favour determinism and simplicity over blocking or SIMD.

use nalgebra::DMatrix;
use thiserror::Error;

/// Symmetry tolerance accepted by the checked constructors.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Above this dimension [`eigen_decompose`] switches from cyclic Jacobi to a
/// tridiagonal QL decomposition.
pub const JACOBI_MAX_DIM: usize = 40;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix or vector contains a non-finite entry")]
    NonFinite,
    #[error("shifted matrix is numerically singular (smallest |eigenvalue + shift| = {gap:e})")]
    SingularShift { gap: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix must have at least one row")]
    Empty,
    #[error("jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += c * x`
pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn scaled(c: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| c * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Dense symmetric matrix stored row-major with both triangles populated.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix needs dim >= 1");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(LinalgError::DimMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    /// Checked constructor: entries must be symmetric within [`SYMMETRY_TOL`].
    /// The stored matrix is the exact symmetric part.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != dim * dim {
            return Err(LinalgError::DimMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::symmetrize(dim, data))
    }

    /// Symmetric part `(A + Aᵀ)/2` of an arbitrary square row-major matrix.
    pub fn symmetrize(dim: usize, mut data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Adds `v` to `(i, j)` and, when off-diagonal, to `(j, i)`.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
        if i != j {
            self.data[j * self.dim + i] += v;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, c: f64, other: &SymMatrix) {
        assert_eq!(self.dim, other.dim);
        axpy(c, &other.data, &mut self.data);
    }

    /// `self += c * (u vᵀ + v uᵀ) / 2`
    pub fn add_sym_outer(&mut self, c: f64, u: &[f64], v: &[f64]) {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] += 0.5 * c * (u[i] * v[j] + v[i] * u[j]);
            }
        }
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        let mut out = Self::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.data[a * k + b] = self.get(i, j);
            }
        }
        out
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Row-major `n × n`; column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Vec<f64>,
}

impl EigDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.eigenvectors[i * n + k]).collect()
    }

    /// Coordinates of `x` in the eigenbasis, `Qᵀx`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.eigenvectors[i * n..(i + 1) * n];
            axpy(xi, row, &mut out);
        }
        out
    }

    /// Maps eigenbasis coordinates back, `Q y`.
    pub fn unproject(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| dot(&self.eigenvectors[i * n..(i + 1) * n], y))
            .collect()
    }

    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = (0..n)
                    .map(|k| {
                        self.eigenvectors[i * n + k]
                            * self.eigenvalues[k]
                            * self.eigenvectors[j * n + k]
                    })
                    .sum();
            }
        }
        SymMatrix::symmetrize(n, data)
    }

    fn sorted(mut values: Vec<f64>, vectors: Vec<f64>) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut sorted_vecs = vec![0.0; n * n];
        for (new_k, &old_k) in order.iter().enumerate() {
            for i in 0..n {
                sorted_vecs[i * n + new_k] = vectors[i * n + old_k];
            }
        }
        values = order.iter().map(|&k| values[k]).collect();
        Self {
            eigenvalues: values,
            eigenvectors: sorted_vecs,
        }
    }
}

/// Eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomposition> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(EigDecomposition::sorted(vec![0.0; n], v));
    }
    let threshold = f64::EPSILON * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q] * m[p * n + q])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            let values = (0..n).map(|i| m[i * n + i]).collect();
            return Ok(EigDecomposition::sorted(values, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= threshold / (n as f64) {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS))
}

/// Eigendecomposition through Householder tridiagonalization and implicit QL.
/// Preferred over [`sym_eig`] for large matrices.
pub fn sym_eig_tridiagonal(a: &SymMatrix) -> Result<EigDecomposition> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.dim();
    let dm = DMatrix::from_row_slice(n, n, a.as_slice());
    let eig = dm.symmetric_eigen();
    let mut vectors = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            vectors[i * n + k] = eig.eigenvectors[(i, k)];
        }
    }
    Ok(EigDecomposition::sorted(
        eig.eigenvalues.iter().copied().collect(),
        vectors,
    ))
}

/// Jacobi for small matrices, tridiagonal QL above [`JACOBI_MAX_DIM`].
pub fn eigen_decompose(a: &SymMatrix) -> Result<EigDecomposition> {
    if a.dim() <= JACOBI_MAX_DIM {
        sym_eig(a)
    } else {
        sym_eig_tridiagonal(a)
    }
}

/// Spectral norm, the largest absolute eigenvalue.
pub fn operator_norm(a: &SymMatrix) -> Result<f64> {
    let eig = eigen_decompose(a)?;
    Ok(eig.min_eigenvalue().abs().max(eig.max_eigenvalue().abs()))
}

/// Solves `(A + shift·I) x = b`.
pub fn solve_shifted(a: &SymMatrix, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(LinalgError::DimMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if !shift.is_finite() || !all_finite(b) {
        return Err(LinalgError::NonFinite);
    }
    let eig = eigen_decompose(a)?;
    let gap = eig
        .eigenvalues
        .iter()
        .map(|l| (l + shift).abs())
        .fold(f64::INFINITY, f64::min);
    if gap <= 1e-12 {
        return Err(LinalgError::SingularShift { gap });
    }

    let mut shifted = a.as_slice().to_vec();
    for i in 0..n {
        shifted[i * n + i] += shift;
    }
    let lu = LuFactors::new(n, shifted.clone());
    let mut x = lu.solve(b);
    // one round of iterative refinement
    let r: Vec<f64> = (0..n)
        .map(|i| b[i] - dot(&shifted[i * n..(i + 1) * n], &x))
        .collect();
    let dx = lu.solve(&r);
    axpy(1.0, &dx, &mut x);
    Ok(x)
}

struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    fn new(n: usize, mut lu: Vec<f64>) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .unwrap();
            if pivot != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot * n + j);
                }
                perm.swap(k, pivot);
            }
            let d = lu[k * n + k];
            if d == 0.0 {
                continue;
            }
            for i in (k + 1)..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Self { n, lu, perm }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, rng.random_range(-2.0..2.0));
            }
        }
        m
    }

    fn check_decomposition(a: &SymMatrix, eig: &EigDecomposition) {
        let n = a.dim();
        for k in 1..n {
            assert!(eig.eigenvalues[k - 1] <= eig.eigenvalues[k]);
        }
        for p in 0..n {
            for q in 0..n {
                let qp = eig.vector(p);
                let qq = eig.vector(q);
                let expected = if p == q { 1.0 } else { 0.0 };
                assert!((dot(&qp, &qq) - expected).abs() <= 1e-9);
            }
        }
        let rec = eig.reconstruct();
        let tol = 1e-8 * a.max_abs().max(1.0);
        for (x, y) in rec.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() <= tol, "reconstruction {x} vs {y}");
        }
    }

    #[test]
    fn diagonal_matrix_has_axis_eigenvectors() {
        let a = SymMatrix::from_diag(&[2.0, 5.0]);
        let eig = sym_eig(&a).unwrap();
        assert_eq!(eig.eigenvalues, vec![2.0, 5.0]);
        assert_eq!(eig.vector(0), vec![1.0, 0.0]);
        assert_eq!(eig.vector(1), vec![0.0, 1.0]);
    }

    #[test]
    fn swap_matrix_eigenvalues() {
        let a = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let eig = sym_eig(&a).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
        check_decomposition(&a, &eig);
    }

    #[test]
    fn random_5x5_reconstructs() {
        let a = random_sym(5, 7);
        check_decomposition(&a, &sym_eig(&a).unwrap());
    }

    #[test]
    fn jacobi_and_tridiagonal_agree() {
        for (n, seed) in [(3, 1), (8, 2), (25, 3), (60, 4)] {
            let a = random_sym(n, seed);
            let j = sym_eig(&a).unwrap();
            let t = sym_eig_tridiagonal(&a).unwrap();
            check_decomposition(&a, &j);
            check_decomposition(&a, &t);
            for (x, y) in j.eigenvalues.iter().zip(&t.eigenvalues) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = SymMatrix::zeros(2);
        a.set(0, 1, f64::NAN);
        assert_eq!(sym_eig(&a), Err(LinalgError::NonFinite));
        assert_eq!(operator_norm(&a), Err(LinalgError::NonFinite));
        a.set(0, 1, f64::INFINITY);
        assert_eq!(sym_eig_tridiagonal(&a), Err(LinalgError::NonFinite));
    }

    #[test]
    fn asymmetric_rows_are_rejected() {
        let err = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).unwrap_err();
        assert_eq!(err, LinalgError::NotSymmetric { row: 0, col: 1 });
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(
            operator_norm(&SymMatrix::from_diag(&[3.0, -4.0])).unwrap(),
            4.0
        );
        assert_eq!(operator_norm(&SymMatrix::zeros(3)).unwrap(), 0.0);
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((operator_norm(&a).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_dominates_sampled_rayleigh_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..5 {
            let a = random_sym(4, 100 + seed);
            let op = operator_norm(&a).unwrap();
            let eig = sym_eig(&a).unwrap();
            let mut best: f64 = 0.0;
            for _ in 0..1000 {
                let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nv = norm(&v);
                let v = scaled(1.0 / nv, &v);
                let r = a.quad_form(&v).abs();
                assert!(r <= op * (1.0 + 1e-12));
                best = best.max(r);
            }
            // the extremal eigenvector attains the bound
            let k = if eig.min_eigenvalue().abs() > eig.max_eigenvalue().abs() {
                0
            } else {
                3
            };
            let attained = a.quad_form(&eig.vector(k)).abs();
            assert!((attained - op).abs() <= 1e-6 * op);
            assert!(best <= op);
        }
    }

    #[test]
    fn solve_shifted_examples() {
        let x = solve_shifted(&SymMatrix::from_diag(&[1.0, 2.0]), 1.0, &[2.0, 6.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let x = solve_shifted(&SymMatrix::zeros(1), 4.0, &[8.0]).unwrap();
        assert_eq!(x, vec![2.0]);
    }

    #[test]
    fn solve_shifted_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..20 {
            let a = random_sym(4, 200 + seed);
            let shift = rng.random_range(-3.0..3.0);
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = match solve_shifted(&a, shift, &b) {
                Ok(x) => x,
                Err(LinalgError::SingularShift { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let mut ax = a.mul_vec(&x);
            axpy(shift, &x, &mut ax);
            let res = norm(&sub(&ax, &b));
            assert!(res <= 1e-9 * norm(&b).max(1.0), "residual {res}");
        }
    }

    #[test]
    fn singular_shift_is_reported() {
        let a = SymMatrix::from_diag(&[1.0, -2.0]);
        assert!(matches!(
            solve_shifted(&a, 2.0, &[1.0, 1.0]),
            Err(LinalgError::SingularShift { .. })
        ));
    }
}
