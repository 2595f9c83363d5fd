//! Complex dense linear algebra and subspace algebra.
//!
//! Every rank or positivity decision in the crate goes through a single
//! [`Tolerance`] value, so the numerical policy of a computation can be read
//! off its arguments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative cutoffs shared by all rank, positivity and equality decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Singular values below `rank_tol * largest` count as zero.
    pub rank_tol: f64,
    /// Eigenvalues above `-psd_tol * max |eigenvalue|` count as nonnegative.
    pub psd_tol: f64,
    /// Relative Frobenius slack for equality checks.
    pub eq_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            psd_tol: 1e-10,
            eq_tol: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(rank_tol: f64, psd_tol: f64, eq_tol: f64) -> Result<Self> {
        let tol = Self {
            rank_tol,
            psd_tol,
            eq_tol,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("rank_tol", self.rank_tol),
            ("psd_tol", self.psd_tol),
            ("eq_tol", self.eq_tol),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// `sqrt(sum |a_ij|^2)`, accumulated in storage order.
pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `|a - b|_F / max(|a|_F, |b|_F)`, zero when both vanish.
pub fn relative_residual(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = frobenius_norm(a).max(frobenius_norm(b));
    if scale == 0.0 {
        return 0.0;
    }
    frobenius_norm(&(a - b)) / scale
}

pub fn check_finite(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Relative distance of `a` from its adjoint.
pub fn hermitian_residual(a: &ComplexMatrix) -> f64 {
    let diff = frobenius_norm(&(a - a.adjoint()));
    diff / frobenius_norm(a).max(1.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// `V diag(values) V^H`.
    pub fn recompose(&self) -> ComplexMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        if n == 0 {
            return ComplexMatrix::zeros(0, 0);
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn hermitian_eig(a: &ComplexMatrix, tol: &Tolerance) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    check_finite(a, "hermitian_eig input")?;
    let residual = hermitian_residual(a);
    if residual > 10.0 * tol.eq_tol {
        return Err(Error::NotHermitian { residual });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Full singular value decomposition `A = U[:, ..k] diag(s) V[:, ..k]^H`
/// with `k = min(m, n)`, `U` and `V` unitary and `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    /// `U[:, ..k] diag(s)` times `V[:, ..k]^H`.
    pub fn recompose(&self) -> ComplexMatrix {
        let k = self.s.len();
        let mut us = self.u.columns(0, k).into_owned();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * self.v.columns(0, k).adjoint()
    }
}

/// Singular value decomposition read off the Hermitian eigenproblem of
/// `[[0, A], [A^H, 0]]`, whose eigenpairs are `(±s_j, (u_j, ±v_j) / sqrt 2)`.
pub fn svd(a: &ComplexMatrix) -> Svd {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd {
            u: ComplexMatrix::identity(m, m),
            s: Vec::new(),
            v: ComplexMatrix::identity(n, n),
        };
    }
    let mut h = ComplexMatrix::zeros(m + n, m + n);
    h.view_mut((0, m), (m, n)).copy_from(a);
    h.view_mut((m, 0), (n, m)).copy_from(&a.adjoint());
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..m + n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * (m + n) as f64 * scale;

    let mut s = Vec::with_capacity(k);
    let mut us = Vec::new();
    let mut vs = Vec::new();
    for &i in order.iter().take(k) {
        let value = eig.eigenvalues[i].max(0.0);
        s.push(value);
        if value > floor {
            let x = eig.eigenvectors.view((0, i), (m, 1)).into_owned();
            let y = eig.eigenvectors.view((m, i), (n, 1)).into_owned();
            us.push(x.normalize());
            vs.push(y.normalize());
        }
    }
    Svd {
        u: complete_orthonormal(&us, m),
        s,
        v: complete_orthonormal(&vs, n),
    }
}

/// Unitary matrix whose leading columns are `cols` (orthonormalized in order).
fn complete_orthonormal(cols: &[ComplexMatrix], n: usize) -> ComplexMatrix {
    let mut out: Vec<ComplexMatrix> = Vec::with_capacity(n);
    let push = |out: &mut Vec<ComplexMatrix>, c: &ComplexMatrix| {
        let mut w = c.clone();
        for _ in 0..2 {
            for q in out.iter() {
                let proj = (q.adjoint() * &w)[(0, 0)];
                w -= q * proj;
            }
        }
        let norm = frobenius_norm(&w);
        if norm > 0.5 {
            out.push(w.unscale(norm));
        }
    };
    for c in cols {
        push(&mut out, c);
    }
    if out.len() < n {
        let mut rest = ComplexMatrix::identity(n, n);
        for q in &out {
            rest -= q * q.adjoint();
        }
        let eig = SymmetricEigen::new((&rest + rest.adjoint()).scale(0.5));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        for &i in &order {
            if out.len() == n {
                break;
            }
            push(&mut out, &eig.eigenvectors.columns(i, 1).into_owned());
        }
    }
    let mut u = ComplexMatrix::zeros(n, n);
    for (j, q) in out.iter().enumerate() {
        u.set_column(j, &q.column(0));
    }
    u
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    svd(a).s
}

/// Moore-Penrose inverse discarding singular values at or below `cutoff`.
pub fn pseudo_inverse(a: &ComplexMatrix, cutoff: f64) -> ComplexMatrix {
    let d = svd(a);
    let (m, n) = a.shape();
    let mut out = ComplexMatrix::zeros(n, m);
    for (j, &sj) in d.s.iter().enumerate() {
        if sj > cutoff {
            out += (d.v.column(j) * d.u.column(j).adjoint()).unscale(sj);
        }
    }
    out
}

pub fn numerical_rank(a: &ComplexMatrix, tol: &Tolerance) -> usize {
    let s = singular_values(a);
    let largest = s.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol.rank_tol * largest).count()
}

/// Moore-Penrose inverse of a Hermitian PSD matrix, discarding eigenvalues
/// below `rank_tol` relative to the largest.
pub fn pseudo_inverse_psd(a: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a, tol)?;
    let n = a.nrows();
    let cutoff = tol.rank_tol * eig.max_abs();
    let mut out = ComplexMatrix::zeros(n, n);
    for (j, &v) in eig.values.iter().enumerate() {
        if v > cutoff && v > 0.0 {
            let col = eig.vectors.column(j);
            out += (col * col.adjoint()).scale(1.0 / v);
        }
    }
    Ok(out)
}

/// A subspace of `C^n` held by an orthonormal basis (one column per vector).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: ComplexMatrix,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: ComplexMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: ComplexMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Wraps a basis whose columns are already orthonormal.
    pub fn from_orthonormal(basis: ComplexMatrix, tol: &Tolerance) -> Result<Self> {
        if basis.ncols() > basis.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} basis vectors in ambient dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        let k = basis.ncols();
        let gram = basis.adjoint() * &basis;
        let resid = frobenius_norm(&(gram - ComplexMatrix::identity(k, k)));
        if resid > tol.eq_tol * (k as f64).max(1.0) {
            return Err(Error::Invalid(format!(
                "basis columns are not orthonormal (residual {resid:.3e})"
            )));
        }
        Ok(Self {
            ambient_dim: basis.nrows(),
            basis,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn projector(&self) -> ComplexMatrix {
        projector(self)
    }

    /// `I - projector()`.
    pub fn complement_projector(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.ambient_dim, self.ambient_dim) - self.projector()
    }
}

/// Orthonormal basis of the span of the columns of `a`.
pub fn column_span(a: &ComplexMatrix, tol: &Tolerance) -> Subspace {
    column_span_above(a, 0.0, tol)
}

/// Column span that also drops singular values at or below the absolute `floor`.
pub fn column_span_above(a: &ComplexMatrix, floor: f64, tol: &Tolerance) -> Subspace {
    let n = a.nrows();
    if a.ncols() == 0 || n == 0 {
        return Subspace::zero(n);
    }
    let d = svd(a);
    let largest = d.s.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return Subspace::zero(n);
    }
    let cutoff = (tol.rank_tol * largest).max(floor);
    let r = d.s.iter().filter(|&&v| v > cutoff).count();
    Subspace {
        ambient_dim: n,
        basis: d.u.columns(0, r).into_owned(),
    }
}

pub fn span(ambient_dim: usize, vectors: &[ComplexVector], tol: &Tolerance) -> Result<Subspace> {
    if let Some(v) = vectors.iter().find(|v| v.len() != ambient_dim) {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} in ambient dimension {ambient_dim}",
            v.len()
        )));
    }
    let stacked = ComplexMatrix::from_fn(ambient_dim, vectors.len(), |r, c| vectors[c][r]);
    Ok(column_span(&stacked, tol))
}

fn check_ambient(s1: &Subspace, s2: &Subspace) -> Result<()> {
    if s1.ambient_dim != s2.ambient_dim {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions {} and {}",
            s1.ambient_dim, s2.ambient_dim
        )));
    }
    Ok(())
}

/// Intersection as the null space of `(I - P1) + (I - P2)`.
pub fn intersect(s1: &Subspace, s2: &Subspace, tol: &Tolerance) -> Result<Subspace> {
    check_ambient(s1, s2)?;
    let n = s1.ambient_dim;
    if s1.is_zero() || s2.is_zero() {
        return Ok(Subspace::zero(n));
    }
    let m = s1.complement_projector() + s2.complement_projector();
    let eig = hermitian_eig(&m, tol)?;
    let cutoff = tol.rank_tol * eig.max_abs().max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&j| eig.values[j] <= cutoff).collect();
    let basis = ComplexMatrix::from_fn(n, keep.len(), |r, c| eig.vectors[(r, keep[c])]);
    Ok(Subspace {
        ambient_dim: n,
        basis,
    })
}

/// Whether `s2` lies inside `s1`.
pub fn contains(s1: &Subspace, s2: &Subspace, tol: &Tolerance) -> Result<bool> {
    check_ambient(s1, s2)?;
    if s2.is_zero() {
        return Ok(true);
    }
    let resid = frobenius_norm(&(s1.complement_projector() * &s2.basis));
    Ok(resid <= tol.eq_tol * frobenius_norm(&s2.basis).max(1.0))
}

/// Orthogonal projector `B B^H`.
pub fn projector(s: &Subspace) -> ComplexMatrix {
    &s.basis * s.basis.adjoint()
}

/// Sum of two subspaces.
pub fn join(s1: &Subspace, s2: &Subspace, tol: &Tolerance) -> Result<Subspace> {
    check_ambient(s1, s2)?;
    let mut stacked = ComplexMatrix::zeros(s1.ambient_dim, s1.dim() + s2.dim());
    stacked.columns_mut(0, s1.dim()).copy_from(&s1.basis);
    stacked.columns_mut(s1.dim(), s2.dim()).copy_from(&s2.basis);
    Ok(column_span(&stacked, tol))
}

/// Mutual containment.
pub fn same_subspace(s1: &Subspace, s2: &Subspace, tol: &Tolerance) -> Result<bool> {
    Ok(contains(s1, s2, tol)? && contains(s2, s1, tol)?)
}

/// `|Π_1 - Π_2|_F`.
pub fn subspace_distance(s1: &Subspace, s2: &Subspace) -> Result<f64> {
    check_ambient(s1, s2)?;
    Ok(frobenius_norm(&(s1.projector() - s2.projector())))
}

/// JSON literal `{"rows":r,"cols":c,"re":[...],"im":[...]}`, row-major.
/// A missing `im` array means a real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixLiteral {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl MatrixLiteral {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let mut re = Vec::with_capacity(m.len());
        let mut im = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re,
            im,
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let len = self.rows * self.cols;
        if self.re.len() != len || !(self.im.is_empty() || self.im.len() == len) {
            return Err(Error::DimensionMismatch(format!(
                "matrix literal {}x{} with {} real and {} imaginary entries",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        let m = ComplexMatrix::from_fn(self.rows, self.cols, |r, c| {
            let k = r * self.cols + c;
            Complex64::new(self.re[k], self.im.get(k).copied().unwrap_or(0.0))
        });
        check_finite(&m, "matrix literal")?;
        Ok(m)
    }
}

/// Builds a real matrix from row slices.
pub fn real_matrix(rows: &[&[f64]]) -> ComplexMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    ComplexMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
}

pub fn real_vector(values: &[f64]) -> ComplexVector {
    ComplexVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, eps: f64) -> bool {
        a.shape() == b.shape() && frobenius_norm(&(a - b)) <= eps
    }

    fn random_low_rank(rng: &mut rand_chacha::ChaCha8Rng, m: usize, n: usize, r: usize) -> ComplexMatrix {
        use rand::Rng;
        let mut g = |rows: usize, cols: usize| {
            ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        };
        g(m, r) * g(r, n)
    }

    #[test]
    fn svd_reconstructs_rank_deficient_matrices() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..2000 {
            let (m, n) = (1 + trial % 6, 1 + (trial / 6) % 6);
            let r = 1 + trial % m.min(n);
            let a = random_low_rank(&mut rng, m, n, r);
            let d = svd(&a);
            let scale = frobenius_norm(&a);
            assert!(frobenius_norm(&(d.recompose() - &a)) <= 1e-13 * scale, "trial {trial}");
            assert!(close(&(d.u.adjoint() * &d.u), &ComplexMatrix::identity(m, m), 1e-12));
            assert!(close(&(d.v.adjoint() * &d.v), &ComplexMatrix::identity(n, n), 1e-12));
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(numerical_rank(&a, &tol()), r);
        }
        let empty = svd(&ComplexMatrix::zeros(3, 0));
        assert!(empty.s.is_empty() && empty.u.shape() == (3, 3));
        assert_eq!(svd(&ComplexMatrix::zeros(2, 2)).s, vec![0.0, 0.0]);
    }

    #[test]
    fn pseudo_inverse_identities() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = random_low_rank(&mut rng, 5, 4, 2);
        let x = pseudo_inverse(&a, 1e-10 * singular_values(&a)[0]);
        assert!(frobenius_norm(&(&a * &x * &a - &a)) <= 1e-12 * frobenius_norm(&a));
        assert!(frobenius_norm(&(&x * &a * &x - &x)) <= 1e-12 * frobenius_norm(&x));
        assert!(hermitian_residual(&(&a * &x)) <= 1e-12);
    }

    #[test]
    fn tolerance_defaults_and_validation() {
        let t = Tolerance::default();
        assert_eq!((t.rank_tol, t.psd_tol, t.eq_tol), (1e-10, 1e-10, 1e-9));
        assert!(Tolerance::new(1e-10, 0.0, 1e-9).is_err());
        assert!(Tolerance::new(f64::NAN, 1e-10, 1e-9).is_err());
    }

    #[test]
    fn eig_identity() {
        let e = hermitian_eig(&ComplexMatrix::identity(3, 3), &tol()).unwrap();
        assert_eq!(e.values.len(), 3);
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eig_diagonal() {
        let a = real_matrix(&[&[2.0, 0.0], &[0.0, -1.0]]);
        let e = hermitian_eig(&a, &tol()).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14 && (e.values[1] + 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(1, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_two_by_two() {
        let a = real_matrix(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let e = hermitian_eig(&a, &tol()).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-13);
        assert!((e.values[1] + 1.0).abs() < 1e-13);
        assert!(close(&e.recompose(), &a, 1e-12));
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(
            hermitian_eig(&ComplexMatrix::zeros(2, 3), &tol()),
            Err(Error::NotSquare { .. })
        ));
        let a = real_matrix(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(hermitian_eig(&a, &tol()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&ComplexMatrix::zeros(4, 4), &tol()), 0);
        assert_eq!(numerical_rank(&ComplexMatrix::identity(3, 3), &tol()), 3);
        assert_eq!(numerical_rank(&real_matrix(&[&[1.0, 1.0], &[1.0, 1.0]]), &tol()), 1);
    }

    #[test]
    fn span_examples() {
        let t = tol();
        let s = span(2, &[real_vector(&[1.0, 0.0]), real_vector(&[0.0, 1.0])], &t).unwrap();
        assert_eq!(s.dim(), 2);
        let s = span(2, &[real_vector(&[1.0, 1.0]), real_vector(&[2.0, 2.0])], &t).unwrap();
        assert_eq!(s.dim(), 1);
        let expect = real_matrix(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(close(&s.projector(), &expect, 1e-14));
        let s = span(3, &[], &t).unwrap();
        assert!(s.is_zero());
        assert_eq!(s.ambient_dim(), 3);
        assert!(span(2, &[real_vector(&[1.0])], &t).is_err());
    }

    #[test]
    fn intersect_examples() {
        let t = tol();
        let e1 = span(2, &[real_vector(&[1.0, 0.0])], &t).unwrap();
        let e2 = span(2, &[real_vector(&[0.0, 1.0])], &t).unwrap();
        let diag = span(2, &[real_vector(&[1.0, 1.0])], &t).unwrap();
        let full = Subspace::full(2);
        assert!(same_subspace(&intersect(&diag, &diag, &t).unwrap(), &diag, &t).unwrap());
        assert!(intersect(&e1, &e2, &t).unwrap().is_zero());
        let i = intersect(&full, &diag, &t).unwrap();
        assert_eq!(i.dim(), 1);
        assert!(close(&i.projector(), &diag.projector(), 1e-12));
        assert!(intersect(&e1, &Subspace::full(3), &t).is_err());
    }

    #[test]
    fn contains_examples() {
        let t = tol();
        let e1 = span(2, &[real_vector(&[1.0, 0.0])], &t).unwrap();
        let diag = span(2, &[real_vector(&[1.0, 1.0])], &t).unwrap();
        assert!(contains(&e1, &Subspace::zero(2), &t).unwrap());
        assert!(!contains(&e1, &diag, &t).unwrap());
        assert!(contains(&Subspace::full(2), &diag, &t).unwrap());
    }

    #[test]
    fn projector_examples() {
        assert!(close(&Subspace::zero(3).projector(), &ComplexMatrix::zeros(3, 3), 0.0));
        assert!(close(&Subspace::full(3).projector(), &ComplexMatrix::identity(3, 3), 0.0));
    }

    #[test]
    fn pseudo_inverse_of_rank_one() {
        let a = real_matrix(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let pinv = pseudo_inverse_psd(&a, &tol()).unwrap();
        assert!(close(&pinv, &real_matrix(&[&[0.25, 0.25], &[0.25, 0.25]]), 1e-14));
    }

    #[test]
    fn matrix_literal_rejects_bad_lengths() {
        let lit = MatrixLiteral {
            rows: 2,
            cols: 2,
            re: vec![1.0, 2.0, 3.0],
            im: vec![],
        };
        assert!(lit.to_matrix().is_err());
        let lit = MatrixLiteral {
            rows: 1,
            cols: 2,
            re: vec![1.0, 2.0],
            im: vec![0.5, -0.5],
        };
        let m = lit.to_matrix().unwrap();
        assert_eq!(m[(0, 1)], Complex64::new(2.0, -0.5));
        assert_eq!(MatrixLiteral::from_matrix(&m), lit);
    }
}
