//! Random fields and random distribution fields on a finite grid.
//!
//! Integrals against test functions are rectangle-rule sums over grid
//! points, so every identity between smeared fields, covariance
//! distributions and kernel double integrals is an identity between finite
//! sums.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert_module::{gramian, ModuleSpace, RandomVariable};
use crate::kernels::{covariance_kernel, OperatorKernel};
use crate::mapping::StochasticMapping;
use crate::numeric::{self, ComplexMatrix, ComplexVector, MatrixLiteral, Tolerance, ONE, ZERO};

/// Regular grid of `n^d` points `origin + delta * (i_1, ..., i_d)`.
///
/// Points are numbered row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec")]
pub struct Grid {
    d: usize,
    n: usize,
    delta: f64,
    origin: Vec<f64>,
}

#[derive(Deserialize)]
struct GridSpec {
    d: usize,
    n: usize,
    delta: f64,
    #[serde(default)]
    origin: Option<Vec<f64>>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        let origin = spec.origin.unwrap_or_else(|| vec![0.0; spec.d]);
        Grid::new(spec.d, spec.n, spec.delta, origin)
    }
}

impl Grid {
    pub fn new(d: usize, n: usize, delta: f64, origin: Vec<f64>) -> Result<Self> {
        if !(d == 1 || d == 2) {
            return Err(Error::Invalid(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if n < 2 {
            return Err(Error::Invalid(format!("grid needs at least 2 points per axis, got {n}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Invalid(format!("grid spacing must be positive, got {delta}")));
        }
        if origin.len() != d || origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("grid origin must be a finite {d}-vector")));
        }
        Ok(Self { d, n, delta, origin })
    }

    /// Grid on `[0, (n-1) delta]^d`.
    pub fn uniform(d: usize, n: usize, delta: f64) -> Result<Self> {
        Self::new(d, n, delta, vec![0.0; d])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Number of grid points (cells).
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `delta^d`, the cell volume.
    pub fn cell_volume(&self) -> f64 {
        self.delta.powi(self.d as i32)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        let mut rest = flat;
        for a in (0..self.d).rev() {
            out[a] = rest % self.n;
            rest /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "multi-index of length {} on a {}-dimensional grid",
                multi.len(),
                self.d
            )));
        }
        let mut k = 0;
        for &i in multi {
            if i >= self.n {
                return Err(Error::OutOfRange { index: i, limit: self.n });
            }
            k = k * self.n + i;
        }
        Ok(k)
    }

    pub fn axis_coordinate(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + self.delta * i as f64
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.axis_coordinate(a, i))
            .collect()
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch("objects live on different grids".into()));
        }
        Ok(())
    }

    /// Labels `t0, t1, ...` for grid points.
    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|k| format!("t{k}")).collect()
    }
}

/// Inclusive box of grid indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl SupportBox {
    pub fn contains(&self, multi: &[usize]) -> bool {
        multi
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&i, (&lo, &hi))| lo <= i && i <= hi)
    }
}

/// Sampled test function with a recorded support box.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    grid: Grid,
    samples: Vec<Complex64>,
    support: Option<SupportBox>,
}

impl TestFunction {
    /// Support is the tightest box around the nonzero samples.
    pub fn from_samples(grid: &Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples on a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("test function samples".into()));
        }
        let mut support: Option<SupportBox> = None;
        for (k, z) in samples.iter().enumerate() {
            if *z == ZERO {
                continue;
            }
            let mi = grid.multi_index(k);
            match &mut support {
                None => {
                    support = Some(SupportBox {
                        lo: mi.clone(),
                        hi: mi,
                    })
                }
                Some(b) => {
                    for a in 0..grid.d {
                        b.lo[a] = b.lo[a].min(mi[a]);
                        b.hi[a] = b.hi[a].max(mi[a]);
                    }
                }
            }
        }
        Ok(Self {
            grid: grid.clone(),
            samples,
            support,
        })
    }

    pub fn from_real(grid: &Grid, samples: &[f64]) -> Result<Self> {
        Self::from_samples(grid, samples.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Uses a caller-declared support box, which must contain every nonzero sample.
    pub fn with_support(grid: &Grid, samples: Vec<Complex64>, support: SupportBox) -> Result<Self> {
        let tf = Self::from_samples(grid, samples)?;
        if support.lo.len() != grid.d || support.hi.len() != grid.d {
            return Err(Error::DimensionMismatch("support box dimension".into()));
        }
        for (k, z) in tf.samples.iter().enumerate() {
            if *z != ZERO && !support.contains(&grid.multi_index(k)) {
                return Err(Error::Invalid("test function does not vanish outside its support".into()));
            }
        }
        Ok(Self {
            support: Some(support),
            ..tf
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn support(&self) -> Option<&SupportBox> {
        self.support.as_ref()
    }

    /// Coordinates of the upper corner of the support box.
    pub fn support_upper_corner(&self) -> Option<Vec<f64>> {
        self.support
            .as_ref()
            .map(|b| b.hi.iter().enumerate().map(|(a, &i)| self.grid.axis_coordinate(a, i)).collect())
    }

    pub fn as_vector(&self) -> ComplexVector {
        ComplexVector::from_column_slice(&self.samples)
    }

    pub fn conj(&self) -> Self {
        Self {
            samples: self.samples.iter().map(|z| z.conj()).collect(),
            ..self.clone()
        }
    }

    /// `α φ + β ψ`.
    pub fn combine(alpha: Complex64, phi: &TestFunction, beta: Complex64, psi: &TestFunction) -> Result<Self> {
        phi.grid.check_same(&psi.grid)?;
        let samples = phi
            .samples
            .iter()
            .zip(&psi.samples)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Self::from_samples(&phi.grid, samples)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_samples(&self.grid, self.samples.iter().map(|z| z * c).collect())
            .expect("scaling keeps the sample count")
    }
}

/// JSON sample arrays `{"re":[...],"im":[...]}` in grid order; `im` may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleArray {
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl SampleArray {
    pub fn to_test_function(&self, grid: &Grid) -> Result<TestFunction> {
        if !(self.im.is_empty() || self.im.len() == self.re.len()) {
            return Err(Error::DimensionMismatch("test function re/im lengths differ".into()));
        }
        let samples = self
            .re
            .iter()
            .enumerate()
            .map(|(k, &r)| Complex64::new(r, self.im.get(k).copied().unwrap_or(0.0)))
            .collect();
        TestFunction::from_samples(grid, samples)
    }

    pub fn from_test_function(tf: &TestFunction) -> Self {
        Self {
            re: tf.samples.iter().map(|z| z.re).collect(),
            im: tf.samples.iter().map(|z| z.im).collect(),
        }
    }
}

/// Mollifier `exp(-1/(1 - |x - c|^2 / r^2))` sampled on the grid and
/// normalized to maximum 1.
///
/// When no grid point falls strictly inside the ball but the ball meets
/// the grid's cells, the result is a unit spike at the grid point nearest
/// to the center.
pub fn bump(grid: &Grid, center: &[f64], radius: f64) -> Result<TestFunction> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Invalid(format!("bump radius must be positive, got {radius}")));
    }
    if center.len() != grid.d {
        return Err(Error::DimensionMismatch(format!(
            "bump center has {} coordinates on a {}-dimensional grid",
            center.len(),
            grid.d
        )));
    }
    let mut values: Vec<f64> = (0..grid.len())
        .map(|k| {
            let x = grid.point(k);
            let rho2 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (radius * radius);
            if rho2 < 1.0 {
                (-1.0 / (1.0 - rho2)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let peak = values.iter().fold(0.0_f64, |m, &v| m.max(v));
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
        return TestFunction::from_real(grid, &values);
    }
    let half = 0.5 * grid.delta;
    let mut nearest = Vec::with_capacity(grid.d);
    for a in 0..grid.d {
        let lo = grid.origin[a] - half;
        let hi = grid.axis_coordinate(a, grid.n - 1) + half;
        if center[a] + radius < lo || center[a] - radius > hi {
            return Err(Error::OffGrid);
        }
        let i = ((center[a] - grid.origin[a]) / grid.delta).round();
        nearest.push(i.clamp(0.0, (grid.n - 1) as f64) as usize);
    }
    let mut samples = vec![ZERO; grid.len()];
    samples[grid.flat_index(&nearest)?] = ONE;
    TestFunction::from_samples(grid, samples)
}

/// Indicator of one grid cell.
pub fn cell_indicator(grid: &Grid, cell: usize) -> Result<TestFunction> {
    if cell >= grid.len() {
        return Err(Error::OutOfRange {
            index: cell,
            limit: grid.len(),
        });
    }
    let mut samples = vec![ZERO; grid.len()];
    samples[cell] = ONE;
    TestFunction::from_samples(grid, samples)
}

/// All cell indicators in grid order.
pub fn cell_basis(grid: &Grid) -> Vec<TestFunction> {
    (0..grid.len())
        .map(|c| cell_indicator(grid, c).expect("cell in range"))
        .collect()
}

/// A continuous random field sampled at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomField {
    grid: Grid,
    space: ModuleSpace,
    values: Vec<RandomVariable>,
}

impl RandomField {
    pub fn new(grid: Grid, values: Vec<RandomVariable>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} field values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let space = values[0].space();
        for v in &values {
            space.check_same(&v.space())?;
        }
        Ok(Self { grid, space, values })
    }

    pub fn zero(grid: Grid, space: ModuleSpace) -> Self {
        let values = vec![RandomVariable::zero(space); grid.len()];
        Self { grid, space, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn values(&self) -> &[RandomVariable] {
        &self.values
    }

    pub fn as_mapping(&self) -> StochasticMapping {
        StochasticMapping::new(self.grid.labels(), self.values.clone()).expect("grid labels are distinct")
    }

    /// `Γ_F(s, t) = [F(s), F(t)]` over grid points.
    pub fn covariance_kernel(&self) -> OperatorKernel {
        covariance_kernel(&self.as_mapping())
    }

    /// Pointwise right multiplication by a `p x p` matrix.
    pub fn right_mul(&self, m: &ComplexMatrix) -> Result<Self> {
        let values = self.values.iter().map(|v| v.right_mul(m)).collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), values)
    }
}

/// Field with independent standard complex Gaussian entries.
pub fn random_field(grid: &Grid, space: ModuleSpace, seed: u64) -> RandomField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| {
            let m = ComplexMatrix::from_fn(space.q, space.p, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * FRAC_1_SQRT_2
            });
            RandomVariable::new(space, m).expect("shape matches")
        })
        .collect();
    RandomField::new(grid.clone(), values).expect("one value per grid point")
}

#[derive(Serialize, Deserialize)]
pub(crate) struct FieldFile {
    pub grid: Grid,
    pub values: Vec<MatrixLiteral>,
}

impl Serialize for RandomField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldFile {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| MatrixLiteral::from_matrix(v.matrix())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RandomField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = FieldFile::deserialize(d)?;
        let values = file
            .values
            .iter()
            .map(|lit| RandomVariable::from_matrix(lit.to_matrix()?))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        RandomField::new(file.grid, values).map_err(D::Error::custom)
    }
}

/// A random distribution field restricted to the span of a finite basis of
/// test functions.
///
/// `apply` resolves any test function in the basis span into basis
/// coordinates and combines the stored values, so linearity holds by
/// construction.
#[derive(Debug, Clone)]
pub struct RandomDistributionField {
    grid: Grid,
    space: ModuleSpace,
    basis: Vec<TestFunction>,
    values: Vec<RandomVariable>,
    basis_matrix: ComplexMatrix,
    coordinate_map: ComplexMatrix,
}

impl RandomDistributionField {
    pub fn new(basis: Vec<TestFunction>, values: Vec<RandomVariable>, tol: &Tolerance) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Invalid("random distribution field needs a nonempty basis".into()));
        }
        if basis.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} basis functions for {} values",
                basis.len(),
                values.len()
            )));
        }
        let grid = basis[0].grid.clone();
        for b in &basis {
            grid.check_same(&b.grid)?;
        }
        let space = values[0].space();
        for v in &values {
            space.check_same(&v.space())?;
        }
        let basis_matrix = ComplexMatrix::from_fn(grid.len(), basis.len(), |r, c| basis[c].samples[r]);
        let largest = numeric::singular_values(&basis_matrix).first().copied().unwrap_or(0.0);
        let coordinate_map = numeric::pseudo_inverse(&basis_matrix, tol.rank_tol * largest);
        Ok(Self {
            grid,
            space,
            basis,
            values,
            basis_matrix,
            coordinate_map,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn basis(&self) -> &[TestFunction] {
        &self.basis
    }

    /// `U_φ` for each basis function, in basis order.
    pub fn values(&self) -> &[RandomVariable] {
        &self.values
    }

    /// Whether the basis spans every function on the grid.
    pub fn spans_grid(&self, tol: &Tolerance) -> bool {
        numeric::numerical_rank(&self.basis_matrix, tol) == self.grid.len()
    }

    /// Basis coordinates of `φ`, failing when `φ` is outside the span.
    pub fn coordinates(&self, phi: &TestFunction, tol: &Tolerance) -> Result<ComplexVector> {
        self.grid.check_same(&phi.grid)?;
        let s = phi.as_vector();
        let c = &self.coordinate_map * &s;
        let residual = (&self.basis_matrix * &c - &s).norm();
        if residual > tol.eq_tol * s.norm().max(1.0) {
            return Err(Error::NotRepresentable { residual });
        }
        Ok(c)
    }

    /// `U_φ`.
    pub fn apply(&self, phi: &TestFunction, tol: &Tolerance) -> Result<RandomVariable> {
        let c = self.coordinates(phi, tol)?;
        let mut m = ComplexMatrix::zeros(self.space.q, self.space.p);
        for (ck, v) in c.iter().zip(&self.values) {
            m += v.matrix() * *ck;
        }
        RandomVariable::new(self.space, m)
    }

    /// Same basis, values transformed by `f`.
    pub fn map_values<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&RandomVariable) -> Result<RandomVariable>,
    {
        let values = self.values.iter().map(f).collect::<Result<Vec<_>>>()?;
        let first = values[0].space();
        for v in &values {
            first.check_same(&v.space())?;
        }
        Ok(Self {
            space: first,
            values,
            ..self.clone()
        })
    }

    pub fn as_mapping(&self) -> StochasticMapping {
        StochasticMapping::from_values(self.values.clone()).expect("nonempty values in one space")
    }
}

/// `U^F_φ = delta^d Σ_t φ(t) F(t)`.
pub fn smear(field: &RandomField, phi: &TestFunction) -> Result<RandomVariable> {
    field.grid.check_same(&phi.grid)?;
    let w = field.grid.cell_volume();
    let mut m = ComplexMatrix::zeros(field.space.q, field.space.p);
    for (s, v) in phi.samples.iter().zip(&field.values) {
        if *s != ZERO {
            m += v.matrix() * *s;
        }
    }
    RandomVariable::new(field.space, m.scale(w))
}

/// The distribution field `φ ↦ U^F_φ` restricted to `basis`.
pub fn field_to_rdf(field: &RandomField, basis: &[TestFunction], tol: &Tolerance) -> Result<RandomDistributionField> {
    let values = basis.iter().map(|phi| smear(field, phi)).collect::<Result<Vec<_>>>()?;
    RandomDistributionField::new(basis.to_vec(), values, tol)
}

/// `C_U(φ ⊗ ψ̄)` and its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceValue {
    pub operator: ComplexMatrix,
    pub scalar: Complex64,
}

/// `C_U(φ ⊗ ψ̄) = [U_φ, U_ψ]`.
pub fn covariance_distribution(
    u: &RandomDistributionField,
    phi: &TestFunction,
    psi: &TestFunction,
    tol: &Tolerance,
) -> Result<CovarianceValue> {
    let operator = gramian(&u.apply(phi, tol)?, &u.apply(psi, tol)?)?;
    let scalar = numeric::trace(&operator);
    Ok(CovarianceValue { operator, scalar })
}

/// Operator kernel `(φ_i, φ_j) ↦ C_U(φ_i ⊗ φ̄_j)` over a family of test functions.
pub fn covariance_distribution_kernel(
    u: &RandomDistributionField,
    family: &[TestFunction],
    tol: &Tolerance,
) -> Result<OperatorKernel> {
    let values = family.iter().map(|phi| u.apply(phi, tol)).collect::<Result<Vec<_>>>()?;
    Ok(covariance_kernel(&StochasticMapping::from_values(values)?))
}

/// `C^Γ(φ ⊗ ψ̄) = delta^{2d} Σ_s Σ_t φ(s) conj(ψ(t)) Γ(s, t)`.
pub fn kernel_to_distribution(
    kernel: &OperatorKernel,
    phi: &TestFunction,
    psi: &TestFunction,
) -> Result<ComplexMatrix> {
    phi.grid.check_same(&psi.grid)?;
    let grid = &phi.grid;
    if kernel.m() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "kernel over {} points, grid has {}",
            kernel.m(),
            grid.len()
        )));
    }
    let q = kernel.q();
    let mut out = ComplexMatrix::zeros(q, q);
    for (s, a) in phi.samples.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        for (t, b) in psi.samples.iter().enumerate() {
            if *b == ZERO {
                continue;
            }
            out += kernel.block(s, t) * (a * b.conj());
        }
    }
    Ok(out.scale(grid.cell_volume().powi(2)))
}

/// Relative size of `U_{αφ+βψ} - (α U_φ + β U_ψ)`.
pub fn linearity_residual(
    u: &RandomDistributionField,
    alpha: Complex64,
    phi: &TestFunction,
    beta: Complex64,
    psi: &TestFunction,
    tol: &Tolerance,
) -> Result<f64> {
    let combined = u.apply(&TestFunction::combine(alpha, phi, beta, psi)?, tol)?;
    let separate = u.apply(phi, tol)?.scale(alpha).add(&u.apply(psi, tol)?.scale(beta))?;
    Ok(numeric::relative_residual(combined.matrix(), separate.matrix()))
}
