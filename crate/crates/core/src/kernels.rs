//! Operator and scalar covariance kernels, positive definiteness, the
//! Kolmogorov factorization and its uniqueness up to a gramian unitary, the
//! reproducing kernel module and Hilbert space of a kernel, and the kernel
//! criterion for operator subordination.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert_module::{gramian, ModuleSpace, RandomVariable};
use crate::mapping::StochasticMapping;
use crate::numeric::{
    self, frobenius_norm, hermitian_eig, pseudo_inverse_psd, relative_residual, ComplexMatrix,
    ComplexVector, MatrixLiteral, Tolerance, ZERO,
};

/// An `m x m` array of `q x q` blocks indexed by labels.
///
/// Covariance kernels are Hermitian (`blocks[i][j] = blocks[j][i]^H`); cross
/// covariance kernels are not, and the constructor does not insist on it.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel {
    labels: Vec<String>,
    q: usize,
    blocks: Vec<Vec<ComplexMatrix>>,
}

impl OperatorKernel {
    pub fn new(labels: Vec<String>, q: usize, blocks: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let m = labels.len();
        if q == 0 {
            return Err(Error::Invalid("kernel block size q must be >= 1".into()));
        }
        if blocks.len() != m || blocks.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "kernel over {m} labels needs an {m}x{m} block array"
            )));
        }
        for row in &blocks {
            for b in row {
                if b.shape() != (q, q) {
                    return Err(Error::DimensionMismatch(format!(
                        "kernel block is {}x{}, expected {q}x{q}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                numeric::check_finite(b, "kernel block")?;
            }
        }
        Ok(Self { labels, q, blocks })
    }

    /// Splits an `mq x mq` matrix into blocks.
    pub fn from_assembled(labels: Vec<String>, q: usize, a: &ComplexMatrix) -> Result<Self> {
        let n = labels.len() * q;
        if a.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "assembled kernel is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols()
            )));
        }
        let m = labels.len();
        let blocks = (0..m)
            .map(|i| (0..m).map(|j| a.view((i * q, j * q), (q, q)).into_owned()).collect())
            .collect();
        Self::new(labels, q, blocks)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn block(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.blocks[i][j]
    }

    pub fn blocks(&self) -> &[Vec<ComplexMatrix>] {
        &self.blocks
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// The `mq x mq` block matrix.
    pub fn assemble(&self) -> ComplexMatrix {
        let (m, q) = (self.m(), self.q);
        let mut out = ComplexMatrix::zeros(m * q, m * q);
        for i in 0..m {
            for j in 0..m {
                out.view_mut((i * q, j * q), (q, q)).copy_from(&self.blocks[i][j]);
            }
        }
        out
    }

    pub fn is_hermitian(&self, tol: &Tolerance) -> bool {
        numeric::hermitian_residual(&self.assemble()) <= tol.eq_tol
    }

    /// The kernel `(λ, μ) ↦ K(μ, λ)^H`.
    pub fn adjoint_kernel(&self) -> Self {
        let m = self.m();
        let blocks = (0..m)
            .map(|i| (0..m).map(|j| self.blocks[j][i].adjoint()).collect())
            .collect();
        Self {
            labels: self.labels.clone(),
            q: self.q,
            blocks,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct KernelFile {
    labels: Vec<String>,
    q: usize,
    blocks: Vec<Vec<MatrixLiteral>>,
}

impl Serialize for OperatorKernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KernelFile {
            labels: self.labels.clone(),
            q: self.q,
            blocks: self
                .blocks
                .iter()
                .map(|row| row.iter().map(MatrixLiteral::from_matrix).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorKernel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = KernelFile::deserialize(d)?;
        let blocks = file
            .blocks
            .iter()
            .map(|row| row.iter().map(MatrixLiteral::to_matrix).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        OperatorKernel::new(file.labels, file.q, blocks).map_err(D::Error::custom)
    }
}

/// Complex-valued kernel `γ(λ, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarKernel {
    pub labels: Vec<String>,
    pub entries: ComplexMatrix,
}

impl ScalarKernel {
    pub fn is_positive_semidefinite(&self, tol: &Tolerance) -> Result<bool> {
        let eig = hermitian_eig(&self.entries, tol)?;
        Ok(eig.min().is_none_or(|v| v >= -tol.psd_tol * eig.max_abs()))
    }
}

/// `Γ_Φ(λ, μ) = [Φ(λ), Φ(μ)]`.
pub fn covariance_kernel(phi: &StochasticMapping) -> OperatorKernel {
    cross_covariance_kernel(phi, phi).expect("a mapping matches itself")
}

/// `Γ_{Φ,Ψ}(λ, μ) = [Φ(λ), Ψ(μ)]`.
pub fn cross_covariance_kernel(phi: &StochasticMapping, psi: &StochasticMapping) -> Result<OperatorKernel> {
    phi.space().check_same(&psi.space())?;
    phi.check_labels(psi)?;
    let blocks = phi
        .values()
        .iter()
        .map(|a| psi.values().iter().map(|b| gramian(a, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    OperatorKernel::new(phi.labels().to_vec(), phi.space().q, blocks)
}

/// Entrywise trace of an operator kernel.
pub fn trace_kernel(k: &OperatorKernel) -> ScalarKernel {
    let m = k.m();
    ScalarKernel {
        labels: k.labels.clone(),
        entries: ComplexMatrix::from_fn(m, m, |i, j| numeric::trace(&k.blocks[i][j])),
    }
}

/// `γ_Φ(λ, μ) = tr Γ_Φ(λ, μ)`.
pub fn scalar_covariance(phi: &StochasticMapping) -> ScalarKernel {
    trace_kernel(&covariance_kernel(phi))
}

/// Smallest eigenvalue of the block matrix divided by its largest magnitude
/// eigenvalue (zero for the zero kernel).
pub fn relative_min_eigenvalue(k: &OperatorKernel, tol: &Tolerance) -> Result<f64> {
    let eig = hermitian_eig(&k.assemble(), tol)?;
    let scale = eig.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(eig.min().unwrap_or(0.0) / scale)
}

/// Block-matrix positivity, equivalent to `Σ a_i K(λ_i, λ_j) a_j^H ⪰ 0` for
/// all operator coefficient systems.
pub fn is_positive_definite(k: &OperatorKernel, tol: &Tolerance) -> Result<bool> {
    Ok(relative_min_eigenvalue(k, tol)? >= -tol.psd_tol)
}

/// `Σ_ij a_i K_ij b_j^H`.
fn coefficient_form(k: &OperatorKernel, a: &[ComplexMatrix], b: &[ComplexMatrix]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(k.q, k.q);
    for (i, ai) in a.iter().enumerate() {
        let mut row = ComplexMatrix::zeros(k.q, k.q);
        for (j, bj) in b.iter().enumerate() {
            row += &k.blocks[i][j] * bj.adjoint();
        }
        out += ai * row;
    }
    out
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Brute-force positivity oracle over random operator coefficient systems.
///
/// Each trial draws Gaussian `a_1..a_m` and tests the smallest eigenvalue of
/// `Σ a_i K_ij a_j^H`. The trial then searches rank-one systems
/// `a_i = e z_i^H`, for which the operator form is `(z^H K z) e e^H`: the
/// stacked `z` is chosen by Rayleigh-Ritz over the Krylov space generated
/// from the trial's own least direction, and the form is evaluated directly.
pub fn operator_coefficient_positivity_sample(
    k: &OperatorKernel,
    trials: usize,
    seed: u64,
    tol: &Tolerance,
) -> bool {
    let (m, q) = (k.m(), k.q);
    let assembled = k.assemble();
    let sigma = frobenius_norm(&assembled);
    if sigma == 0.0 || m == 0 {
        return true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let a: Vec<ComplexMatrix> = (0..m).map(|_| random_matrix(q, q, &mut rng)).collect();
        let form = coefficient_form(k, &a, &a);
        let scale = a.iter().map(|x| frobenius_norm(x).powi(2)).sum::<f64>() * sigma;
        let sym = (&form + form.adjoint()).scale(0.5);
        let eig = hermitian_eig(&sym, tol).expect("symmetrized form is Hermitian");
        if eig.min().unwrap_or(0.0) < -tol.psd_tol * scale {
            return false;
        }

        // z_i = a_i^H y with y the least eigenvector of the operator form.
        let y = eig.vectors.column(q - 1).into_owned();
        let mut z = ComplexVector::zeros(m * q);
        for (i, ai) in a.iter().enumerate() {
            z.rows_mut(i * q, q).copy_from(&(ai.adjoint() * &y));
        }
        if let Some(w) = least_ritz_vector(&assembled, z, tol) {
            let quad = w.dotc(&(&assembled * &w)).re;
            if quad < -tol.psd_tol * sigma * w.norm_squared() {
                return false;
            }
        }
    }
    true
}

/// Unit vector minimizing `w^H K w` over the Krylov space of `K` started at `z`.
fn least_ritz_vector(k: &ComplexMatrix, z: ComplexVector, tol: &Tolerance) -> Option<ComplexVector> {
    let n = k.nrows();
    let mut basis: Vec<ComplexVector> = Vec::with_capacity(n);
    let mut next = z;
    while basis.len() < n {
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&next);
                next -= b * c;
            }
        }
        let norm = next.norm();
        if norm <= 1e-12 * frobenius_norm(k).max(1.0) * (basis.len() as f64 + 1.0) || !norm.is_finite() {
            break;
        }
        let unit = next / Complex64::new(norm, 0.0);
        next = k * &unit;
        basis.push(unit);
    }
    if basis.is_empty() {
        return None;
    }
    let v = ComplexMatrix::from_columns(&basis);
    let projected = v.adjoint() * k * &v;
    let projected = (&projected + projected.adjoint()).scale(0.5);
    let eig = hermitian_eig(&projected, tol).ok()?;
    let last = eig.values.len() - 1;
    Some(&v * eig.vectors.column(last))
}

/// Order in which eigenpairs of the block matrix become measurement
/// coordinates of a factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorOrder {
    #[default]
    Descending,
    Ascending,
}

/// Kolmogorov factorization `K(λ, μ) = [Φ(λ), Φ(μ)]` with the minimal
/// measurements dimension.
pub fn kolmogorov_factorize(k: &OperatorKernel, tol: &Tolerance) -> Result<StochasticMapping> {
    kolmogorov_factorize_ordered(k, tol, FactorOrder::Descending)
}

pub fn kolmogorov_factorize_ordered(
    k: &OperatorKernel,
    tol: &Tolerance,
    order: FactorOrder,
) -> Result<StochasticMapping> {
    let (m, q) = (k.m(), k.q);
    let eig = hermitian_eig(&k.assemble(), tol)?;
    let scale = eig.max_abs();
    if scale > 0.0 {
        let min = eig.min().unwrap_or(0.0) / scale;
        if min < -tol.psd_tol {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
    }
    let mut keep: Vec<usize> = (0..eig.values.len())
        .filter(|&j| eig.values[j] >= tol.psd_tol * scale && eig.values[j] > tol.rank_tol * scale)
        .collect();
    if order == FactorOrder::Ascending {
        keep.reverse();
    }
    let r = keep.len();
    let space = ModuleSpace::new(q, r.max(1))?;
    let values = (0..m)
        .map(|i| {
            let mut mat = ComplexMatrix::zeros(q, r.max(1));
            for (c, &j) in keep.iter().enumerate() {
                let s = eig.values[j].sqrt();
                for row in 0..q {
                    mat[(row, c)] = eig.vectors[(i * q + row, j)] * s;
                }
            }
            RandomVariable::new(space, mat)
        })
        .collect::<Result<Vec<_>>>()?;
    StochasticMapping::new(k.labels.clone(), values)
}

/// The unitary `u` on measurement coordinates with `Φ1(λ) = Φ2(λ) u^H`.
///
/// `u` has shape `p1 x p2`; it maps the measurements space of `Φ2`
/// isometrically onto that of `Φ1` and vanishes on its orthogonal complement.
pub fn gramian_unitary_connector(
    phi1: &StochasticMapping,
    phi2: &StochasticMapping,
    tol: &Tolerance,
) -> Result<ComplexMatrix> {
    phi1.check_labels(phi2)?;
    if phi1.space().q != phi2.space().q {
        return Err(Error::DimensionMismatch(format!(
            "state dimensions {} and {}",
            phi1.space().q,
            phi2.space().q
        )));
    }
    let k1 = covariance_kernel(phi1).assemble();
    let k2 = covariance_kernel(phi2).assemble();
    let residual = relative_residual(&k1, &k2);
    if residual > tol.eq_tol {
        return Err(Error::KernelMismatch { residual });
    }
    let a1 = phi1.stacked();
    let a2h = phi2.stacked().adjoint();
    let (p1, p2) = (a1.ncols(), a2h.nrows());
    if a2h.is_empty() {
        return Ok(ComplexMatrix::zeros(p1, p2));
    }
    // A2^H = U S W^H, least-squares solution u = A1^H W S^-1 U^H.
    let d = numeric::svd(&a2h);
    let largest = d.s.first().copied().unwrap_or(0.0);
    let mut out = ComplexMatrix::zeros(p1, p2);
    if largest == 0.0 {
        return Ok(out);
    }
    let a1h = a1.adjoint();
    for (j, &s) in d.s.iter().enumerate() {
        if s <= tol.rank_tol * largest {
            continue;
        }
        let left = (&a1h * d.v.column(j)).scale(1.0 / s);
        out += left * d.u.column(j).adjoint();
    }
    Ok(out)
}

fn same_kernel(a: &OperatorKernel, b: &OperatorKernel) -> bool {
    std::ptr::eq(a, b) || a == b
}

/// `Σ_i a_i Γ(λ_i, ·)` in the reproducing kernel module of `Γ`.
#[derive(Debug, Clone)]
pub struct RkhmElement<'k> {
    kernel: &'k OperatorKernel,
    coefficients: Vec<ComplexMatrix>,
}

impl<'k> RkhmElement<'k> {
    pub fn new(kernel: &'k OperatorKernel, coefficients: Vec<ComplexMatrix>) -> Result<Self> {
        if coefficients.len() != kernel.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a kernel over {} labels",
                coefficients.len(),
                kernel.m()
            )));
        }
        if let Some(c) = coefficients.iter().find(|c| c.shape() != (kernel.q, kernel.q)) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient is {}x{}, expected {q}x{q}",
                c.nrows(),
                c.ncols(),
                q = kernel.q
            )));
        }
        Ok(Self {
            kernel,
            coefficients,
        })
    }

    pub fn zero(kernel: &'k OperatorKernel) -> Self {
        let q = kernel.q;
        Self {
            kernel,
            coefficients: vec![ComplexMatrix::zeros(q, q); kernel.m()],
        }
    }

    /// `Γ(λ_index, ·)`.
    pub fn section(kernel: &'k OperatorKernel, index: usize) -> Result<Self> {
        if index >= kernel.m() {
            return Err(Error::OutOfRange {
                index,
                limit: kernel.m(),
            });
        }
        let mut e = Self::zero(kernel);
        e.coefficients[index] = ComplexMatrix::identity(kernel.q, kernel.q);
        Ok(e)
    }

    pub fn coefficients(&self) -> &[ComplexMatrix] {
        &self.coefficients
    }

    pub fn kernel(&self) -> &'k OperatorKernel {
        self.kernel
    }

    /// Value of the function at `μ`: `Σ_i a_i Γ(λ_i, μ)`.
    pub fn evaluate(&self, label: &str) -> Result<ComplexMatrix> {
        let mu = self.kernel.index_of(label)?;
        let q = self.kernel.q;
        Ok(self
            .coefficients
            .iter()
            .enumerate()
            .fold(ComplexMatrix::zeros(q, q), |acc, (i, a)| acc + a * &self.kernel.blocks[i][mu]))
    }
}

/// `[F, G] = Σ_ij a_i Γ(λ_i, λ_j) b_j^H`.
pub fn rkhm_gramian(f: &RkhmElement<'_>, g: &RkhmElement<'_>) -> Result<ComplexMatrix> {
    if !same_kernel(f.kernel, g.kernel) {
        return Err(Error::KernelMismatch { residual: f64::NAN });
    }
    Ok(coefficient_form(f.kernel, &f.coefficients, &g.coefficients))
}

/// `Σ_i Γ(·, λ_i) x_i` in the Hilbert space of `H`-valued functions
/// reproduced by `Γ`.
#[derive(Debug, Clone)]
pub struct RkhsElement<'k> {
    kernel: &'k OperatorKernel,
    coefficients: Vec<ComplexVector>,
}

impl<'k> RkhsElement<'k> {
    pub fn new(kernel: &'k OperatorKernel, coefficients: Vec<ComplexVector>) -> Result<Self> {
        if coefficients.len() != kernel.m() || coefficients.iter().any(|x| x.len() != kernel.q) {
            return Err(Error::DimensionMismatch(format!(
                "need {} coefficient vectors of length {}",
                kernel.m(),
                kernel.q
            )));
        }
        Ok(Self {
            kernel,
            coefficients,
        })
    }

    pub fn zero(kernel: &'k OperatorKernel) -> Self {
        Self {
            kernel,
            coefficients: vec![ComplexVector::zeros(kernel.q); kernel.m()],
        }
    }

    /// `Γ(·, λ_index) x`.
    pub fn section(kernel: &'k OperatorKernel, index: usize, x: ComplexVector) -> Result<Self> {
        if index >= kernel.m() {
            return Err(Error::OutOfRange {
                index,
                limit: kernel.m(),
            });
        }
        let mut e = Self::zero(kernel);
        if x.len() != kernel.q {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {}, expected {}",
                x.len(),
                kernel.q
            )));
        }
        e.coefficients[index] = x;
        Ok(e)
    }

    pub fn coefficients(&self) -> &[ComplexVector] {
        &self.coefficients
    }
}

/// `F(λ) = Σ_i Γ(λ, λ_i) x_i`.
pub fn rkhs_evaluate(f: &RkhsElement<'_>, label: &str) -> Result<ComplexVector> {
    let l = f.kernel.index_of(label)?;
    Ok(f
        .coefficients
        .iter()
        .enumerate()
        .fold(ComplexVector::zeros(f.kernel.q), |acc, (i, x)| acc + &f.kernel.blocks[l][i] * x))
}

/// `<F, G> = Σ_ij <Γ(λ_j, λ_i) x_i, y_j>`.
pub fn rkhs_inner(f: &RkhsElement<'_>, g: &RkhsElement<'_>) -> Result<Complex64> {
    if !same_kernel(f.kernel, g.kernel) {
        return Err(Error::KernelMismatch { residual: f64::NAN });
    }
    let mut total = ZERO;
    for (j, y) in g.coefficients.iter().enumerate() {
        for (i, x) in f.coefficients.iter().enumerate() {
            total += y.dotc(&(&f.kernel.blocks[j][i] * x));
        }
    }
    Ok(total)
}

/// Outcome of the kernel subordination test, clause by clause.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubordinationCriterion {
    /// Every `K_λ = Γ_{Φ,Ψ}(λ, ·)` lies in the module reproduced by `Γ_Ψ`.
    pub membership: bool,
    /// `[K_λ, K_μ] = Γ_Φ(λ, μ)` for all pairs.
    pub gramian_identity: bool,
    pub membership_residual: f64,
    pub gramian_residual: f64,
}

impl SubordinationCriterion {
    pub fn holds(&self) -> bool {
        self.membership && self.gramian_identity
    }
}

/// Kernel-side test of operator subordination of `phi` to `psi`.
///
/// The coefficients representing `K_λ` solve `C_λ K_Ψ = R_λ` (with `R_λ` the
/// `λ` block row of the cross kernel) in the least-squares sense.
pub fn subordination_criterion(
    phi: &StochasticMapping,
    psi: &StochasticMapping,
    tol: &Tolerance,
) -> Result<SubordinationCriterion> {
    let cross = cross_covariance_kernel(phi, psi)?.assemble();
    let k_psi = covariance_kernel(psi).assemble();
    let k_phi = covariance_kernel(phi).assemble();
    let pinv = pseudo_inverse_psd(&k_psi, tol)?;
    let q = phi.space().q;

    let coeffs = &cross * &pinv;
    let fitted = &coeffs * &k_psi;
    let mut membership_residual = 0.0_f64;
    let mut membership = true;
    for i in 0..phi.len() {
        let target = cross.rows(i * q, q).into_owned();
        let resid = frobenius_norm(&(fitted.rows(i * q, q) - &target));
        let allowed = tol.eq_tol * (1.0 + frobenius_norm(&target));
        membership_residual = membership_residual.max(resid / (1.0 + frobenius_norm(&target)));
        membership &= resid <= allowed;
    }

    let gram = &coeffs * &k_psi * coeffs.adjoint();
    let gramian_residual = relative_residual(&gram, &k_phi);
    Ok(SubordinationCriterion {
        membership,
        gramian_identity: gramian_residual <= tol.eq_tol,
        membership_residual,
        gramian_residual,
    })
}
