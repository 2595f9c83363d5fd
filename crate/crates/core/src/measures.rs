//! Stochastic measures on finite unions of grid cells, their covariance
//! bimeasures, semivariation estimates and the coherence checks that tie
//! measures, fields and distribution fields together.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{covariance_distribution, field_to_rdf, kernel_to_distribution, Grid, RandomDistributionField, RandomField, TestFunction};
use crate::hilbert_module::{gramian, ModuleSpace, RandomVariable};
use crate::kernels::OperatorKernel;
use crate::mapping::{measurements_space, StochasticMapping};
use crate::numeric::{frobenius_norm, relative_residual, subspace_distance, ComplexMatrix, MatrixLiteral, Subspace, Tolerance, ONE, ZERO};
use crate::report::{Clause, Report};

/// Largest set accepted by the exhaustive phase search.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Leaf budget for enumerating the operator coefficient family.
const FAMILY_BUDGET: u64 = 1 << 22;

const MAX_SWEEPS: usize = 500;

/// A finite union of grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    grid: Grid,
    members: BTreeSet<usize>,
}

impl CellSet {
    pub fn new(grid: &Grid, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members = BTreeSet::new();
        for c in cells {
            if c >= grid.len() {
                return Err(Error::OutOfRange {
                    index: c,
                    limit: grid.len(),
                });
            }
            members.insert(c);
        }
        Ok(Self {
            grid: grid.clone(),
            members,
        })
    }

    pub fn empty(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            members: BTreeSet::new(),
        }
    }

    pub fn all(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            members: (0..grid.len()).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.members.contains(&cell)
    }

    pub fn union(&self, other: &CellSet) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            members: self.members.union(&other.members).copied().collect(),
        })
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.members.is_disjoint(&other.members)
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.members.is_subset(&other.members)
    }
}

/// `ξ(A) = Σ_{c ∈ A} atom(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMeasure {
    grid: Grid,
    space: ModuleSpace,
    atoms: Vec<RandomVariable>,
}

impl StochasticMeasure {
    pub fn new(grid: Grid, atoms: Vec<RandomVariable>) -> Result<Self> {
        if atoms.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} atoms on a grid of {} cells",
                atoms.len(),
                grid.len()
            )));
        }
        let space = atoms[0].space();
        for a in &atoms {
            space.check_same(&a.space())?;
        }
        Ok(Self { grid, space, atoms })
    }

    pub fn zero(grid: Grid, space: ModuleSpace) -> Self {
        let atoms = vec![RandomVariable::zero(space); grid.len()];
        Self { grid, space, atoms }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn atoms(&self) -> &[RandomVariable] {
        &self.atoms
    }

    pub fn atom(&self, cell: usize) -> &RandomVariable {
        &self.atoms[cell]
    }

    pub fn as_mapping(&self) -> StochasticMapping {
        StochasticMapping::new(self.grid.labels(), self.atoms.clone()).expect("grid labels are distinct")
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    grid: Grid,
    atoms: Vec<MatrixLiteral>,
}

impl Serialize for StochasticMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureFile {
            grid: self.grid.clone(),
            atoms: self.atoms.iter().map(|a| MatrixLiteral::from_matrix(a.matrix())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StochasticMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = MeasureFile::deserialize(d)?;
        let atoms = file
            .atoms
            .iter()
            .map(|lit| RandomVariable::from_matrix(lit.to_matrix()?))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        StochasticMeasure::new(file.grid, atoms).map_err(D::Error::custom)
    }
}

/// Bimeasure given by a table of `q x q` values on pairs of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Bimeasure {
    grid: Grid,
    q: usize,
    table: Vec<ComplexMatrix>,
}

impl Bimeasure {
    pub fn new(grid: Grid, q: usize, table: Vec<ComplexMatrix>) -> Result<Self> {
        let m = grid.len();
        if table.len() != m * m {
            return Err(Error::DimensionMismatch(format!(
                "bimeasure table has {} entries, expected {}",
                table.len(),
                m * m
            )));
        }
        if table.iter().any(|b| b.nrows() != q || b.ncols() != q) {
            return Err(Error::DimensionMismatch(format!("bimeasure entries must be {q}x{q}")));
        }
        Ok(Self { grid, q, table })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn cell_value(&self, c: usize, d: usize) -> &ComplexMatrix {
        &self.table[c * self.grid.len() + d]
    }

    pub fn value(&self, a: &CellSet, b: &CellSet) -> Result<ComplexMatrix> {
        self.grid.check_same(&a.grid)?;
        self.grid.check_same(&b.grid)?;
        let mut out = ComplexMatrix::zeros(self.q, self.q);
        for c in a.iter() {
            for d in b.iter() {
                out += self.cell_value(c, d);
            }
        }
        Ok(out)
    }

    /// Operator kernel `(A_i, A_j) ↦ τ(A_i, A_j)` over a family of cell sets.
    pub fn kernel_over(&self, family: &[CellSet]) -> Result<OperatorKernel> {
        let labels = (0..family.len()).map(|i| format!("A{i}")).collect();
        let blocks = family
            .iter()
            .map(|a| family.iter().map(|b| self.value(a, b)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        OperatorKernel::new(labels, self.q, blocks)
    }
}

/// `atom(c) = delta^d F(t_c)`.
pub fn measure_from_field(field: &RandomField) -> StochasticMeasure {
    let w = Complex64::new(field.grid().cell_volume(), 0.0);
    let atoms = field.values().iter().map(|v| v.scale(w)).collect();
    StochasticMeasure::new(field.grid().clone(), atoms).expect("field shapes are consistent")
}

pub fn evaluate(xi: &StochasticMeasure, a: &CellSet) -> Result<RandomVariable> {
    xi.grid.check_same(&a.grid)?;
    let mut m = ComplexMatrix::zeros(xi.space.q, xi.space.p);
    for c in a.iter() {
        m += xi.atoms[c].matrix();
    }
    RandomVariable::new(xi.space, m)
}

/// `U^ξ_φ = Σ_c φ(t_c) atom(c)` on the given basis.
pub fn measure_to_rdf(xi: &StochasticMeasure, basis: &[TestFunction], tol: &Tolerance) -> Result<RandomDistributionField> {
    let values = basis
        .iter()
        .map(|phi| {
            xi.grid.check_same(phi.grid())?;
            let mut m = ComplexMatrix::zeros(xi.space.q, xi.space.p);
            for (s, a) in phi.samples().iter().zip(&xi.atoms) {
                if *s != ZERO {
                    m += a.matrix() * *s;
                }
            }
            RandomVariable::new(xi.space, m)
        })
        .collect::<Result<Vec<_>>>()?;
    RandomDistributionField::new(basis.to_vec(), values, tol)
}

/// `τ_ξ(A, B) = [ξ(A), ξ(B)]`.
pub fn bimeasure_of(xi: &StochasticMeasure) -> Bimeasure {
    let mut table = Vec::with_capacity(xi.atoms.len().pow(2));
    for a in &xi.atoms {
        for b in &xi.atoms {
            table.push(gramian(a, b).expect("atoms share a space"));
        }
    }
    Bimeasure::new(xi.grid.clone(), xi.space.q, table).expect("table shape")
}

/// `τ^K(A, B) = delta^{2d} Σ_{s ∈ A} Σ_{t ∈ B} K(s, t)`.
pub fn kernel_to_bimeasure(kernel: &OperatorKernel, grid: &Grid) -> Result<Bimeasure> {
    if kernel.m() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "kernel over {} points, grid has {}",
            kernel.m(),
            grid.len()
        )));
    }
    let w = grid.cell_volume().powi(2);
    let mut table = Vec::with_capacity(grid.len().pow(2));
    for i in 0..kernel.m() {
        for j in 0..kernel.m() {
            table.push(kernel.block(i, j).scale(w));
        }
    }
    Bimeasure::new(grid.clone(), kernel.q(), table)
}

/// `Σ_{c, c'} φ(t_c) ψ(t_c') τ(c, c')`.
pub fn mt_integral(tau: &Bimeasure, phi: &TestFunction, psi: &TestFunction) -> Result<ComplexMatrix> {
    tau.grid.check_same(phi.grid())?;
    tau.grid.check_same(psi.grid())?;
    let mut out = ComplexMatrix::zeros(tau.q, tau.q);
    for (c, a) in phi.samples().iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        for (d, b) in psi.samples().iter().enumerate() {
            if *b == ZERO {
                continue;
            }
            out += tau.cell_value(c, d) * (a * b);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchStrategy {
    ExhaustivePhases,
    AlternatingAscent { restarts: usize, seed: u64 },
}

/// A lower bound for a semivariation together with the coefficients that attain it.
#[derive(Debug, Clone, PartialEq)]
pub struct SemivariationEstimate {
    pub value: f64,
    /// Exact maximum over the coefficient grid that was searched.
    pub exact_on_grid: bool,
    pub converged: bool,
    pub coefficients: Vec<ComplexMatrix>,
}

const PHASES: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

fn set_atoms(xi: &StochasticMeasure, a: &CellSet) -> Result<Vec<ComplexMatrix>> {
    xi.grid.check_same(&a.grid)?;
    Ok(a.iter().map(|c| xi.atoms[c].matrix().clone()).collect())
}

/// Depth-first maximum of `|Σ_c terms[c][k_c]|_F`, with the partial sums
/// accumulated left to right. `terms[0]` is restricted to its first entry.
fn enumerate_max(terms: &[Vec<ComplexMatrix>]) -> (f64, Vec<usize>) {
    let n = terms.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let (rows, cols) = terms[0][0].shape();
    let mut partial = vec![ComplexMatrix::zeros(rows, cols); n + 1];
    let mut choice = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, vec![0usize; n]);
    fn walk(
        depth: usize,
        terms: &[Vec<ComplexMatrix>],
        partial: &mut [ComplexMatrix],
        choice: &mut [usize],
        best: &mut (f64, Vec<usize>),
    ) {
        let n = terms.len();
        if depth == n {
            let v = frobenius_norm(&partial[n]);
            if v > best.0 {
                best.0 = v;
                best.1.copy_from_slice(choice);
            }
            return;
        }
        let options = if depth == 0 { 1 } else { terms[depth].len() };
        for k in 0..options {
            let (head, tail) = partial.split_at_mut(depth + 1);
            tail[0].copy_from(&head[depth]);
            tail[0] += &terms[depth][k];
            choice[depth] = k;
            walk(depth + 1, terms, partial, choice, best);
        }
    }
    walk(0, terms, &mut partial, &mut choice, &mut best);
    best
}

fn scalar_coefficients(q: usize, alphas: &[Complex64]) -> Vec<ComplexMatrix> {
    alphas.iter().map(|a| ComplexMatrix::identity(q, q) * *a).collect()
}

fn exhaustive_scalar(atoms: &[ComplexMatrix], q: usize) -> Result<SemivariationEstimate> {
    if atoms.len() > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            size: atoms.len(),
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let terms: Vec<Vec<ComplexMatrix>> = atoms.iter().map(|x| PHASES.iter().map(|a| x * *a).collect()).collect();
    let (value, choice) = enumerate_max(&terms);
    let alphas: Vec<Complex64> = choice.iter().map(|&k| PHASES[k]).collect();
    Ok(SemivariationEstimate {
        value,
        exact_on_grid: true,
        converged: true,
        coefficients: scalar_coefficients(q, &alphas),
    })
}

fn total(coefs: &[ComplexMatrix], atoms: &[ComplexMatrix]) -> ComplexMatrix {
    let (rows, cols) = atoms[0].shape();
    let mut s = ComplexMatrix::zeros(rows, cols);
    for (a, x) in coefs.iter().zip(atoms) {
        s += a * x;
    }
    s
}

/// Coordinate ascent over unimodular scalars: each step sets `α_c` to the
/// phase of `<S - α_c X_c, X_c>`.
fn scalar_ascent(atoms: &[ComplexMatrix], start: Vec<Complex64>) -> (f64, Vec<Complex64>, bool) {
    let mut alphas = start;
    let mut s = scalar_total(atoms, &alphas);
    let mut value = frobenius_norm(&s);
    for _ in 0..MAX_SWEEPS {
        let before = value;
        for (c, x) in atoms.iter().enumerate() {
            let rest = &s - x * alphas[c];
            let inner: Complex64 = x.iter().zip(rest.iter()).map(|(xi, ri)| ri * xi.conj()).sum();
            if inner.norm() > 0.0 {
                let next = inner / inner.norm();
                let candidate = &rest + x * next;
                let v = frobenius_norm(&candidate);
                if v > value {
                    alphas[c] = next;
                    s = candidate;
                    value = v;
                }
            }
        }
        if value - before <= 1e-14 * value.max(1.0) {
            return (value, alphas, true);
        }
    }
    (value, alphas, false)
}

fn scalar_total(atoms: &[ComplexMatrix], alphas: &[Complex64]) -> ComplexMatrix {
    let (rows, cols) = atoms[0].shape();
    let mut s = ComplexMatrix::zeros(rows, cols);
    for (x, a) in atoms.iter().zip(alphas) {
        s += x * *a;
    }
    s
}

fn random_phase(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
}

fn alternating_scalar(atoms: &[ComplexMatrix], q: usize, restarts: usize, seed: u64) -> SemivariationEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (f64::NEG_INFINITY, Vec::new(), true);
    for r in 0..restarts.max(1) {
        let start = if r == 0 {
            vec![ONE; atoms.len()]
        } else {
            (0..atoms.len()).map(|_| random_phase(&mut rng)).collect()
        };
        let run = scalar_ascent(atoms, start);
        if run.0 > best.0 {
            best = run;
        }
    }
    SemivariationEstimate {
        value: best.0,
        exact_on_grid: false,
        converged: best.2,
        coefficients: scalar_coefficients(q, &best.1),
    }
}

/// `sup |Σ_{c ∈ A} α_c ξ({c})|` over unimodular scalars, estimated from below.
pub fn semivariation(xi: &StochasticMeasure, a: &CellSet, strategy: SearchStrategy) -> Result<SemivariationEstimate> {
    let atoms = set_atoms(xi, a)?;
    let q = xi.space.q;
    if atoms.is_empty() {
        return Ok(SemivariationEstimate {
            value: 0.0,
            exact_on_grid: true,
            converged: true,
            coefficients: Vec::new(),
        });
    }
    match strategy {
        SearchStrategy::ExhaustivePhases => exhaustive_scalar(&atoms, q),
        SearchStrategy::AlternatingAscent { restarts, seed } => Ok(alternating_scalar(&atoms, q, restarts, seed)),
    }
}

/// Monomial `q x q` matrices with entries in `{±1, ±i}`; a group under multiplication.
fn monomial_family(q: usize) -> Option<Vec<ComplexMatrix>> {
    match q {
        1 => Some(PHASES.iter().map(|a| ComplexMatrix::from_element(1, 1, *a)).collect()),
        2 => {
            let mut out = Vec::with_capacity(32);
            for swap in [false, true] {
                for a in PHASES {
                    for b in PHASES {
                        let mut m = ComplexMatrix::zeros(2, 2);
                        if swap {
                            m[(0, 1)] = a;
                            m[(1, 0)] = b;
                        } else {
                            m[(0, 0)] = a;
                            m[(1, 1)] = b;
                        }
                        out.push(m);
                    }
                }
            }
            Some(out)
        }
        _ => None,
    }
}

/// Coordinate ascent over unitary coefficients. Each step replaces `a_c`
/// by the unitary maximizing `Re tr(a X_c S^H)`, which never decreases the
/// convex objective `|S|_F`.
fn polar_ascent(atoms: &[ComplexMatrix], start: Vec<ComplexMatrix>) -> (f64, Vec<ComplexMatrix>, bool) {
    let mut coefs = start;
    let mut s = total(&coefs, atoms);
    let mut value = frobenius_norm(&s);
    for _ in 0..MAX_SWEEPS {
        let before = value;
        for (c, x) in atoms.iter().enumerate() {
            let m = x * s.adjoint();
            let d = crate::numeric::svd(&m);
            let next = &d.v * d.u.adjoint();
            let candidate = &s - &coefs[c] * x + &next * x;
            let v = frobenius_norm(&candidate);
            if v > value {
                coefs[c] = next;
                s = candidate;
                value = v;
            }
        }
        if value - before <= 1e-14 * value.max(1.0) {
            return (value, coefs, true);
        }
    }
    (value, coefs, false)
}

fn random_unitary(q: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(q, q, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    g.qr().q()
}

/// `sup |Σ_{c ∈ A} a_c ξ({c})|` over operator contractions `a_c`, estimated
/// from below. The scalar search is always included, so the result is at
/// least the corresponding [`semivariation`].
pub fn operator_semivariation(
    xi: &StochasticMeasure,
    a: &CellSet,
    strategy: SearchStrategy,
) -> Result<SemivariationEstimate> {
    let scalar = semivariation(xi, a, strategy)?;
    let atoms = set_atoms(xi, a)?;
    let q = xi.space.q;
    if atoms.is_empty() || q == 1 {
        return Ok(scalar);
    }
    match strategy {
        SearchStrategy::ExhaustivePhases => {
            if let Some(family) = monomial_family(q) {
                let leaves = (family.len() as u64).checked_pow(atoms.len() as u32 - 1);
                if leaves.is_some_and(|l| l <= FAMILY_BUDGET) {
                    let terms: Vec<Vec<ComplexMatrix>> =
                        atoms.iter().map(|x| family.iter().map(|f| f * x).collect()).collect();
                    let (value, choice) = enumerate_max(&terms);
                    if value > scalar.value {
                        return Ok(SemivariationEstimate {
                            value,
                            exact_on_grid: true,
                            converged: true,
                            coefficients: choice.iter().map(|&k| family[k].clone()).collect(),
                        });
                    }
                    return Ok(scalar);
                }
            }
            let (value, coefs, converged) = polar_ascent(&atoms, scalar.coefficients.clone());
            if value > scalar.value {
                return Ok(SemivariationEstimate {
                    value,
                    exact_on_grid: false,
                    converged,
                    coefficients: coefs,
                });
            }
            Ok(scalar)
        }
        SearchStrategy::AlternatingAscent { restarts, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f0b);
            let mut best = scalar.clone();
            for r in 0..restarts.max(1) {
                let start = if r == 0 {
                    scalar.coefficients.clone()
                } else {
                    (0..atoms.len()).map(|_| random_unitary(q, &mut rng)).collect()
                };
                let (value, coefs, converged) = polar_ascent(&atoms, start);
                if value > best.value {
                    best = SemivariationEstimate {
                        value,
                        exact_on_grid: false,
                        converged,
                        coefficients: coefs,
                    };
                }
            }
            Ok(best)
        }
    }
}

fn max_pair_residual<F>(pairs: &[(TestFunction, TestFunction)], mut f: F) -> Result<f64>
where
    F: FnMut(&TestFunction, &TestFunction) -> Result<(ComplexMatrix, ComplexMatrix)>,
{
    let mut worst = 0.0_f64;
    for (phi, psi) in pairs {
        let (a, b) = f(phi, psi)?;
        let r = relative_residual(&a, &b);
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    Ok(worst)
}

fn default_pairs(basis: &[TestFunction]) -> Vec<(TestFunction, TestFunction)> {
    let mut out = Vec::new();
    for phi in basis {
        for psi in basis {
            out.push((phi.clone(), psi.clone()));
        }
    }
    out
}

fn equal_spaces(name: &str, s1: &Subspace, s2: &Subspace, tol: &Tolerance) -> Result<Clause> {
    let distance = subspace_distance(s1, s2)?;
    Ok(Clause::judged(name, s1.dim() == s2.dim() && distance <= tol.eq_tol, distance, tol.eq_tol))
}

fn mt_clause(
    name: &str,
    xi: &StochasticMeasure,
    basis: &[TestFunction],
    pairs: &[(TestFunction, TestFunction)],
    tol: &Tolerance,
) -> Result<(Clause, RandomDistributionField)> {
    let u = measure_to_rdf(xi, basis, tol)?;
    let tau = bimeasure_of(xi);
    let residual = max_pair_residual(pairs, |phi, psi| {
        let c = covariance_distribution(&u, phi, psi, tol)?.operator;
        Ok((c, mt_integral(&tau, phi, &psi.conj())?))
    })?;
    Ok((Clause::check(name, residual, tol.eq_tol), u))
}

/// Checks `C_{U^ξ}(φ ⊗ ψ̄) = C^{τ_ξ}(φ ⊗ ψ̄)` on the given pairs (all basis
/// pairs when `pairs` is empty) and, when the basis spans the grid,
/// `G_ξ = G_{U^ξ}`.
pub fn measure_coherence(
    xi: &StochasticMeasure,
    basis: &[TestFunction],
    pairs: &[(TestFunction, TestFunction)],
    tol: &Tolerance,
) -> Result<Report> {
    let pairs = if pairs.is_empty() { default_pairs(basis) } else { pairs.to_vec() };
    let mut report = Report::new();
    let (clause, u) = mt_clause("covariance_equals_mt_integral", xi, basis, &pairs, tol)?;
    report.push(clause);
    if u.spans_grid(tol) {
        let g_xi = measurements_space(&xi.as_mapping(), tol);
        let g_u = measurements_space(&u.as_mapping(), tol);
        report.push(equal_spaces("measurement_spaces_agree", &g_xi, &g_u, tol)?);
    } else {
        report.push(Clause::not_applicable("measurement_spaces_agree", tol.eq_tol));
    }
    Ok(report)
}

/// Checks, for `ξ = ξ^F`, that `C_{U^ξ} = C^{τ_ξ}`, that `C_{U^F} = C^{Γ_F}`,
/// that `U^ξ = U^F` on the basis, and, when the basis spans the grid, that
/// `G_F = G_{ξ^F} = G_{U^F}`.
pub fn coherence_check(
    field: &RandomField,
    basis: &[TestFunction],
    pairs: &[(TestFunction, TestFunction)],
    tol: &Tolerance,
) -> Result<Report> {
    let pairs = if pairs.is_empty() { default_pairs(basis) } else { pairs.to_vec() };
    let xi = measure_from_field(field);
    let mut report = Report::new();
    let (clause, u_xi) = mt_clause("measure_covariance_equals_mt_integral", &xi, basis, &pairs, tol)?;
    report.push(clause);

    let u_f = field_to_rdf(field, basis, tol)?;
    let gamma = field.covariance_kernel();
    let residual = max_pair_residual(&pairs, |phi, psi| {
        let c = covariance_distribution(&u_f, phi, psi, tol)?.operator;
        Ok((c, kernel_to_distribution(&gamma, phi, psi)?))
    })?;
    report.check("field_covariance_equals_kernel_integral", residual, tol.eq_tol);

    let tau_k = kernel_to_bimeasure(&gamma, field.grid())?;
    let tau_xi = bimeasure_of(&xi);
    let residual = (0..field.grid().len().pow(2))
        .map(|k| relative_residual(&tau_k.table[k], &tau_xi.table[k]))
        .fold(0.0_f64, f64::max);
    report.check("kernel_bimeasure_equals_measure_bimeasure", residual, tol.eq_tol);

    let residual = u_xi
        .values()
        .iter()
        .zip(u_f.values())
        .map(|(a, b)| relative_residual(a.matrix(), b.matrix()))
        .fold(0.0_f64, f64::max);
    report.check("measure_rdf_equals_field_rdf", residual, tol.eq_tol);

    if u_f.spans_grid(tol) {
        let g_f = measurements_space(&field.as_mapping(), tol);
        let g_xi = measurements_space(&xi.as_mapping(), tol);
        let g_u = measurements_space(&u_f.as_mapping(), tol);
        report.push(equal_spaces("field_and_measure_spaces_agree", &g_f, &g_xi, tol)?);
        report.push(equal_spaces("field_and_rdf_spaces_agree", &g_f, &g_u, tol)?);
    } else {
        report.push(Clause::not_applicable("field_and_measure_spaces_agree", tol.eq_tol));
        report.push(Clause::not_applicable("field_and_rdf_spaces_agree", tol.eq_tol));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{cell_basis, cell_indicator};
    use crate::hilbert_module::module_norm;
    use crate::numeric::real_matrix;
    use crate::report::ClauseStatus;

    fn scalar_measure(values: &[f64]) -> StochasticMeasure {
        let grid = Grid::uniform(1, values.len(), 1.0).unwrap();
        let atoms = values
            .iter()
            .map(|&v| RandomVariable::from_matrix(real_matrix(&[&[v]])).unwrap())
            .collect();
        StochasticMeasure::new(grid, atoms).unwrap()
    }

    fn sample_field() -> RandomField {
        let grid = Grid::uniform(1, 4, 0.5).unwrap();
        let values = (0..4)
            .map(|k| {
                let k = k as f64;
                RandomVariable::from_matrix(real_matrix(&[&[1.0, k, 0.0], &[0.5 * k, 1.0, -k]])).unwrap()
            })
            .collect();
        RandomField::new(grid, values).unwrap()
    }

    #[test]
    fn cell_set_validation() {
        let g = Grid::uniform(1, 3, 1.0).unwrap();
        assert!(CellSet::new(&g, [0, 3]).is_err());
        let a = CellSet::new(&g, [2, 0, 2]).unwrap();
        assert_eq!(a.len(), 2);
        assert!(a.is_subset(&CellSet::all(&g)));
        assert!(a.is_disjoint(&CellSet::new(&g, [1]).unwrap()));
    }

    #[test]
    fn measure_from_field_examples() {
        let f = sample_field();
        let xi = measure_from_field(&f);
        assert_eq!(xi.atom(1).matrix(), &f.values()[1].matrix().scale(0.5));
        let whole = evaluate(&xi, &CellSet::all(f.grid())).unwrap();
        let ones = TestFunction::from_real(f.grid(), &[1.0; 4]).unwrap();
        let smeared = crate::fields::smear(&f, &ones).unwrap();
        assert!(relative_residual(whole.matrix(), smeared.matrix()) < 1e-15);

        let z = measure_from_field(&RandomField::zero(f.grid().clone(), f.space()));
        assert!(z.atoms().iter().all(|a| module_norm(a) == 0.0));
    }

    #[test]
    fn evaluate_examples() {
        let xi = measure_from_field(&sample_field());
        let g = xi.grid().clone();
        assert_eq!(evaluate(&xi, &CellSet::empty(&g)).unwrap(), RandomVariable::zero(xi.space()));
        assert_eq!(&evaluate(&xi, &CellSet::new(&g, [2]).unwrap()).unwrap(), xi.atom(2));
        let a = CellSet::new(&g, [0, 3]).unwrap();
        let b = CellSet::new(&g, [1]).unwrap();
        let joint = evaluate(&xi, &a.union(&b).unwrap()).unwrap();
        let split = evaluate(&xi, &a).unwrap().add(&evaluate(&xi, &b).unwrap()).unwrap();
        assert!(relative_residual(joint.matrix(), split.matrix()) < 1e-15);
        let other = Grid::uniform(1, 5, 1.0).unwrap();
        assert!(evaluate(&xi, &CellSet::empty(&other)).is_err());
    }

    #[test]
    fn measure_to_rdf_examples() {
        let tol = Tolerance::default();
        let f = sample_field();
        let xi = measure_from_field(&f);
        let basis = cell_basis(f.grid());
        let u_xi = measure_to_rdf(&xi, &basis, &tol).unwrap();
        let u_f = field_to_rdf(&f, &basis, &tol).unwrap();
        for (a, b) in u_xi.values().iter().zip(u_f.values()) {
            assert!(relative_residual(a.matrix(), b.matrix()) < 1e-15);
        }
        let atom = u_xi.apply(&cell_indicator(f.grid(), 3).unwrap(), &tol).unwrap();
        assert!(relative_residual(atom.matrix(), xi.atom(3).matrix()) < 1e-15);
    }

    #[test]
    fn bimeasure_examples() {
        let f = sample_field();
        let xi = measure_from_field(&f);
        let g = xi.grid().clone();
        let tau = bimeasure_of(&xi);
        let empty = CellSet::empty(&g);
        let b = CellSet::new(&g, [1, 2]).unwrap();
        assert_eq!(tau.value(&empty, &b).unwrap(), ComplexMatrix::zeros(2, 2));
        let a1 = CellSet::new(&g, [0]).unwrap();
        let a2 = CellSet::new(&g, [3]).unwrap();
        let lhs = tau.value(&a1.union(&a2).unwrap(), &b).unwrap();
        let rhs = tau.value(&a1, &b).unwrap() + tau.value(&a2, &b).unwrap();
        assert!(relative_residual(&lhs, &rhs) < 1e-15);
        let direct = gramian(&evaluate(&xi, &b).unwrap(), &evaluate(&xi, &b).unwrap()).unwrap();
        assert!(relative_residual(&tau.value(&b, &b).unwrap(), &direct) < 1e-14);

        let tau_k = kernel_to_bimeasure(&f.covariance_kernel(), &g).unwrap();
        assert_eq!(tau_k.cell_value(0, 1), &f.covariance_kernel().block(0, 1).scale(0.25));
        assert!(relative_residual(&tau_k.value(&b, &b).unwrap(), &tau.value(&b, &b).unwrap()) < 1e-14);
    }

    #[test]
    fn mt_integral_examples() {
        let xi = measure_from_field(&sample_field());
        let g = xi.grid().clone();
        let tau = bimeasure_of(&xi);
        let v = mt_integral(&tau, &cell_indicator(&g, 1).unwrap(), &cell_indicator(&g, 2).unwrap()).unwrap();
        assert_eq!(&v, tau.cell_value(1, 2));
        let zero = bimeasure_of(&StochasticMeasure::zero(g.clone(), xi.space()));
        let phi = TestFunction::from_real(&g, &[1.0, 2.0, 0.0, -1.0]).unwrap();
        assert_eq!(mt_integral(&zero, &phi, &phi).unwrap(), ComplexMatrix::zeros(2, 2));
    }

    #[test]
    fn semivariation_examples() {
        let single = scalar_measure(&[3.0, 5.0]);
        let all = CellSet::new(single.grid(), [0]).unwrap();
        let est = semivariation(&single, &all, SearchStrategy::ExhaustivePhases).unwrap();
        assert_eq!(est.value, 3.0);
        assert_eq!(operator_semivariation(&single, &all, SearchStrategy::ExhaustivePhases).unwrap().value, 3.0);

        let same = scalar_measure(&[1.0, 1.0]);
        let all = CellSet::all(same.grid());
        assert_eq!(semivariation(&same, &all, SearchStrategy::ExhaustivePhases).unwrap().value, 2.0);

        let opposite = scalar_measure(&[1.0, -1.0]);
        let est = semivariation(&opposite, &all, SearchStrategy::ExhaustivePhases).unwrap();
        assert_eq!(est.value, 2.0);
        assert_eq!(est.coefficients[1][(0, 0)], Complex64::new(-1.0, 0.0));

        let big = scalar_measure(&[1.0; 13]);
        assert!(matches!(
            semivariation(&big, &CellSet::all(big.grid()), SearchStrategy::ExhaustivePhases),
            Err(Error::TooLarge { .. })
        ));
        let est = semivariation(&big, &CellSet::all(big.grid()), SearchStrategy::AlternatingAscent { restarts: 3, seed: 1 }).unwrap();
        assert!((est.value - 13.0).abs() < 1e-12 && est.converged);
    }

    #[test]
    fn operator_semivariation_dominates_scalar() {
        let grid = Grid::uniform(1, 2, 1.0).unwrap();
        let atoms = vec![
            RandomVariable::from_matrix(real_matrix(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap(),
            RandomVariable::from_matrix(real_matrix(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap(),
        ];
        let xi = StochasticMeasure::new(grid.clone(), atoms).unwrap();
        let all = CellSet::all(&grid);
        let s = semivariation(&xi, &all, SearchStrategy::ExhaustivePhases).unwrap();
        let o = operator_semivariation(&xi, &all, SearchStrategy::ExhaustivePhases).unwrap();
        assert!((s.value - 2f64.sqrt()).abs() < 1e-15);
        assert!((o.value - 2.0).abs() < 1e-15);
        let o = operator_semivariation(&xi, &all, SearchStrategy::AlternatingAscent { restarts: 4, seed: 3 }).unwrap();
        assert!((o.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_examples() {
        let tol = Tolerance::default();
        let f = sample_field();
        let report = coherence_check(&f, &cell_basis(f.grid()), &[], &tol).unwrap();
        assert!(report.pass(), "{report:?}");
        assert!(report.clauses.iter().all(|c| c.status == ClauseStatus::Pass));

        let z = RandomField::zero(f.grid().clone(), f.space());
        assert!(coherence_check(&z, &cell_basis(f.grid()), &[], &tol).unwrap().pass());

        let partial = &cell_basis(f.grid())[..2];
        let report = coherence_check(&f, partial, &[], &tol).unwrap();
        assert!(report.pass());
        assert_eq!(report.clause("field_and_rdf_spaces_agree").unwrap().status, ClauseStatus::NotApplicable);

        let xi = measure_from_field(&f);
        assert!(measure_coherence(&xi, &cell_basis(f.grid()), &[], &tol).unwrap().pass());
    }

    #[test]
    fn measure_json_round_trip() {
        let xi = measure_from_field(&sample_field());
        let back: StochasticMeasure = serde_json::from_str(&serde_json::to_string(&xi).unwrap()).unwrap();
        assert_eq!(back, xi);
    }
}
