//! Observable modules along a threshold chain, the remote past, and the
//! split of a distribution field into deterministic and purely
//! nondeterministic parts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{cell_basis, field_to_rdf, Grid, RandomDistributionField, RandomField, TestFunction};
use crate::hilbert_module::{gramian, ModuleSpace, ModuleSubmodule, RandomVariable};
use crate::mapping::{measurements_space, vector_domain};
use crate::measures::measure_from_field;
use crate::numeric::{self, frobenius_norm, intersect, relative_residual, subspace_distance, ComplexMatrix, Subspace, Tolerance, ONE};
use crate::report::{Clause, Report};

/// Descending thresholds `t_0 > t_1 > ...` in the componentwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdChain {
    grid: Grid,
    thresholds: Vec<Vec<f64>>,
}

fn coordinate_slack(grid: &Grid) -> f64 {
    1e-9 * grid.delta()
}

impl ThresholdChain {
    pub fn new(grid: &Grid, thresholds: Vec<Vec<f64>>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Invalid("threshold chain must be nonempty".into()));
        }
        let slack = coordinate_slack(grid);
        for t in &thresholds {
            if t.len() != grid.d() {
                return Err(Error::DimensionMismatch(format!(
                    "threshold has {} coordinates on a {}-dimensional grid",
                    t.len(),
                    grid.d()
                )));
            }
            for (a, &x) in t.iter().enumerate() {
                let i = ((x - grid.origin()[a]) / grid.delta()).round();
                let on_grid = i >= 0.0 && i < grid.n() as f64 && (grid.axis_coordinate(a, i as usize) - x).abs() <= slack;
                if !on_grid {
                    return Err(Error::Invalid(format!("threshold coordinate {x} is not a grid coordinate")));
                }
            }
        }
        for w in thresholds.windows(2) {
            let below = w[1].iter().zip(&w[0]).all(|(b, a)| b <= a);
            if !below || w[0] == w[1] {
                return Err(Error::Invalid("thresholds must be strictly decreasing".into()));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            thresholds,
        })
    }

    /// Diagonal grid points from the upper corner down to the origin.
    pub fn diagonal(grid: &Grid) -> Self {
        let thresholds = (0..grid.n())
            .rev()
            .map(|i| (0..grid.d()).map(|a| grid.axis_coordinate(a, i)).collect())
            .collect();
        Self {
            grid: grid.clone(),
            thresholds,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn thresholds(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether `supp φ ⊂ {t ≤ t0}`.
    pub fn admits(&self, phi: &TestFunction, t0: &[f64]) -> bool {
        match phi.support_upper_corner() {
            None => true,
            Some(hi) => hi.iter().zip(t0).all(|(h, t)| *h <= t + coordinate_slack(&self.grid)),
        }
    }

    /// Grid points `t` with `t ≤ t0`.
    pub fn points_below(&self, t0: &[f64]) -> Vec<usize> {
        let slack = coordinate_slack(&self.grid);
        (0..self.grid.len())
            .filter(|&k| self.grid.point(k).iter().zip(t0).all(|(x, t)| *x <= t + slack))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableStructure {
    pub thresholds: Vec<Vec<f64>>,
    /// `H_U^{t}` per threshold.
    pub modules: Vec<ModuleSubmodule>,
    /// Vector analogue in `C^{qp}` per threshold.
    pub vector_spaces: Vec<Subspace>,
    pub remote_past: ModuleSubmodule,
    pub vector_remote_past: Subspace,
    /// Modular domain of all basis values.
    pub domain: ModuleSubmodule,
    pub vector_domain: Subspace,
}

impl ObservableStructure {
    pub fn gdims(&self) -> Vec<usize> {
        self.modules.iter().map(|m| m.gdim()).collect()
    }
}

fn structure_from_generators(
    space: ModuleSpace,
    thresholds: &[Vec<f64>],
    generators: &[Vec<RandomVariable>],
    all: &[RandomVariable],
    scale: f64,
    tol: &Tolerance,
) -> Result<ObservableStructure> {
    // Values that are roundoff relative to `scale` carry no rank.
    let floor = tol.rank_tol * scale;
    let mut modules = Vec::with_capacity(generators.len());
    let mut vector_spaces = Vec::with_capacity(generators.len());
    for gens in generators {
        modules.push(generated_above(space, gens, floor, tol)?);
        vector_spaces.push(flattened_span(space, gens, floor, tol));
    }
    let mut remote = modules[0].gspace().clone();
    let mut vector_remote = vector_spaces[0].clone();
    for (m, v) in modules.iter().zip(&vector_spaces).skip(1) {
        remote = intersect(&remote, m.gspace(), tol)?;
        vector_remote = intersect(&vector_remote, v, tol)?;
    }
    Ok(ObservableStructure {
        thresholds: thresholds.to_vec(),
        modules,
        vector_spaces,
        remote_past: ModuleSubmodule::new(space, remote)?,
        vector_remote_past: vector_remote,
        domain: generated_above(space, all, floor, tol)?,
        vector_domain: flattened_span(space, all, floor, tol),
    })
}

fn generated_above(space: ModuleSpace, gens: &[RandomVariable], floor: f64, tol: &Tolerance) -> Result<ModuleSubmodule> {
    let mut stacked = ComplexMatrix::zeros(space.p, gens.len() * space.q);
    for (k, g) in gens.iter().enumerate() {
        space.check_same(&g.space())?;
        stacked.columns_mut(k * space.q, space.q).copy_from(&g.matrix().adjoint());
    }
    ModuleSubmodule::new(space, numeric::column_span_above(&stacked, floor, tol))
}

fn flattened_span(space: ModuleSpace, gens: &[RandomVariable], floor: f64, tol: &Tolerance) -> Subspace {
    let flat: Vec<_> = gens.iter().map(|g| g.flatten()).collect();
    let stacked = ComplexMatrix::from_fn(space.q * space.p, gens.len(), |r, c| flat[c][r]);
    numeric::column_span_above(&stacked, floor, tol)
}

fn check_chain(u: &RandomDistributionField, chain: &ThresholdChain) -> Result<()> {
    u.grid().check_same(chain.grid())
}

fn value_scale(values: &[RandomVariable]) -> f64 {
    values.iter().map(|v| frobenius_norm(v.matrix())).fold(0.0_f64, f64::max)
}

/// Observable modules generated by `{U_φ : supp φ ⊂ {t ≤ t0}}` over the basis of `U`.
pub fn observable_structure(u: &RandomDistributionField, chain: &ThresholdChain, tol: &Tolerance) -> Result<ObservableStructure> {
    observable_structure_at_scale(u, chain, value_scale(u.values()), tol)
}

/// As [`observable_structure`], with ranks judged against a reference
/// magnitude `scale` instead of the largest value of `U` itself.
pub fn observable_structure_at_scale(
    u: &RandomDistributionField,
    chain: &ThresholdChain,
    scale: f64,
    tol: &Tolerance,
) -> Result<ObservableStructure> {
    check_chain(u, chain)?;
    let generators: Vec<Vec<RandomVariable>> = chain
        .thresholds
        .iter()
        .map(|t0| {
            u.basis()
                .iter()
                .zip(u.values())
                .filter(|(phi, _)| chain.admits(phi, t0))
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect();
    structure_from_generators(u.space(), &chain.thresholds, &generators, u.values(), scale, tol)
}

/// Observable modules of a field generated by `{F(t) : t ≤ t0}`.
pub fn field_observable_structure(field: &RandomField, chain: &ThresholdChain, tol: &Tolerance) -> Result<ObservableStructure> {
    field.grid().check_same(chain.grid())?;
    let generators: Vec<Vec<RandomVariable>> = chain
        .thresholds
        .iter()
        .map(|t0| chain.points_below(t0).into_iter().map(|k| field.values()[k].clone()).collect())
        .collect();
    structure_from_generators(field.space(), &chain.thresholds, &generators, field.values(), value_scale(field.values()), tol)
}

#[derive(Debug, Clone)]
pub struct WoldSplit {
    pub deterministic_part: RandomDistributionField,
    pub purely_nondeterministic_part: RandomDistributionField,
    /// Gramian projection onto the remote past, acting on the right.
    pub projector: ComplexMatrix,
    pub structure: ObservableStructure,
}

/// Both parts of the split defined by an arbitrary right projector `P`.
pub fn split_with_projector(u: &RandomDistributionField, projector: &ComplexMatrix) -> Result<(RandomDistributionField, RandomDistributionField)> {
    let p = u.space().p;
    if projector.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!("projector must be {p}x{p}")));
    }
    let complement = ComplexMatrix::identity(p, p) - projector;
    let det = u.map_values(|v| v.right_mul(projector))?;
    let pnd = u.map_values(|v| v.right_mul(&complement))?;
    Ok((det, pnd))
}

/// `U^{det}_φ = U_φ P`, `U^{p}_φ = U_φ (I - P)` with `P` the projection onto the remote past.
pub fn wold_decompose(u: &RandomDistributionField, chain: &ThresholdChain, tol: &Tolerance) -> Result<WoldSplit> {
    let structure = observable_structure(u, chain, tol)?;
    let projector = structure.remote_past.gspace().projector();
    let (deterministic_part, purely_nondeterministic_part) = split_with_projector(u, &projector)?;
    Ok(WoldSplit {
        deterministic_part,
        purely_nondeterministic_part,
        projector,
        structure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Deterministic,
    PurelyNondeterministic,
    Mixed,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Deterministic => "deterministic",
            Self::PurelyNondeterministic => "purely_nondeterministic",
            Self::Mixed => "mixed",
        }
    }
}

fn classify_spaces(remote: &Subspace, domain: &Subspace, tol: &Tolerance) -> Result<Classification> {
    if numeric::same_subspace(remote, domain, tol)? {
        Ok(Classification::Deterministic)
    } else if remote.is_zero() {
        Ok(Classification::PurelyNondeterministic)
    } else {
        Ok(Classification::Mixed)
    }
}

impl ObservableStructure {
    /// Operator classification from the modular remote past.
    pub fn classify(&self, tol: &Tolerance) -> Result<Classification> {
        classify_spaces(self.remote_past.gspace(), self.domain.gspace(), tol)
    }

    /// Classification from the vector-space remote past.
    pub fn classify_vector(&self, tol: &Tolerance) -> Result<Classification> {
        classify_spaces(&self.vector_remote_past, &self.vector_domain, tol)
    }
}

pub fn classify(u: &RandomDistributionField, chain: &ThresholdChain, tol: &Tolerance) -> Result<Classification> {
    observable_structure(u, chain, tol)?.classify(tol)
}

pub fn classify_vector(u: &RandomDistributionField, chain: &ThresholdChain, tol: &Tolerance) -> Result<Classification> {
    observable_structure(u, chain, tol)?.classify_vector(tol)
}

fn containment_residual(outer: &Subspace, inner: &Subspace) -> f64 {
    frobenius_norm(&(outer.complement_projector() * inner.basis()))
}

/// Checks the reconstruction, determinism, pure nondeterminism,
/// subordination and uncorrelatedness clauses of a split, and the
/// dimension identity `dim G_U = dim G_{-∞} + dim G_{U^p}`.
pub fn verify_split(
    u: &RandomDistributionField,
    chain: &ThresholdChain,
    det: &RandomDistributionField,
    pnd: &RandomDistributionField,
    tol: &Tolerance,
) -> Result<Report> {
    let mut report = Report::new();
    let worst = u
        .values()
        .iter()
        .zip(det.values().iter().zip(pnd.values()))
        .map(|(v, (a, b))| relative_residual(v.matrix(), &(a.matrix() + b.matrix())))
        .fold(0.0_f64, f64::max);
    report.check("parts_sum_to_field", worst, tol.eq_tol);

    let scale = value_scale(u.values());
    let s_u = observable_structure_at_scale(u, chain, scale, tol)?;
    let s_det = observable_structure_at_scale(det, chain, scale, tol)?;
    let s_pnd = observable_structure_at_scale(pnd, chain, scale, tol)?;

    let mut residual = 0.0_f64;
    let mut same_dims = true;
    for m in &s_det.modules {
        residual = residual.max(subspace_distance(m.gspace(), s_det.domain.gspace())?);
        same_dims &= m.gdim() == s_det.domain.gdim();
    }
    report.push(Clause::judged("deterministic_part_is_deterministic", same_dims, residual, tol.rank_tol));

    let leftover = s_pnd.remote_past.gdim();
    report.push(Clause::judged(
        "nondeterministic_part_is_purely_nondeterministic",
        leftover == 0,
        leftover as f64,
        tol.rank_tol,
    ));

    let residual = containment_residual(s_u.domain.gspace(), s_det.domain.gspace())
        .max(containment_residual(s_u.domain.gspace(), s_pnd.domain.gspace()));
    report.check("parts_subordinate_to_field", residual, tol.rank_tol);

    let mut residual = 0.0_f64;
    for (a, v) in det.values().iter().zip(u.values()) {
        for (b, w) in pnd.values().iter().zip(u.values()) {
            let scale = (frobenius_norm(v.matrix()) * frobenius_norm(w.matrix())).max(1.0);
            residual = residual.max(frobenius_norm(&gramian(a, b)?) / scale);
        }
    }
    report.check("parts_uncorrelated", residual, tol.rank_tol);

    let lhs = s_u.domain.gdim();
    let rhs = s_u.remote_past.gdim() + s_pnd.domain.gdim();
    report.push(Clause::judged("dimension_identity", lhs == rhs, lhs.abs_diff(rhs) as f64, tol.rank_tol));

    let joined = numeric::join(s_det.domain.gspace(), s_pnd.domain.gspace(), tol)?;
    let orthogonality = frobenius_norm(&(s_det.domain.gspace().basis().adjoint() * s_pnd.domain.gspace().basis()));
    let residual = subspace_distance(&joined, s_u.domain.gspace())?.max(orthogonality);
    report.check("orthogonal_direct_sum", residual, tol.rank_tol);
    Ok(report)
}

/// Compares the observable structures of `F`, `ξ^F` and `U^F` per
/// threshold, their classifications, and the split summands
/// `(U^F)^{det} = U^{F^{det}}`, `(U^F)^{p} = U^{F^{p}}`.
///
/// Clauses are reported not applicable when `basis` does not span the grid.
pub fn wold_coherence_with_basis(field: &RandomField, basis: &[TestFunction], chain: &ThresholdChain, tol: &Tolerance) -> Result<Report> {
    const NAMES: [&str; 5] = [
        "field_and_measure_observables_agree",
        "field_and_rdf_observables_agree",
        "classifications_agree",
        "deterministic_summands_agree",
        "nondeterministic_summands_agree",
    ];
    let mut report = Report::new();
    let u = field_to_rdf(field, basis, tol)?;
    if !u.spans_grid(tol) {
        for name in NAMES {
            report.push(Clause::not_applicable(name, tol.rank_tol));
        }
        return Ok(report);
    }
    let s_f = field_observable_structure(field, chain, tol)?;
    let xi = measure_from_field(field);
    let xi_field = RandomField::new(field.grid().clone(), xi.atoms().to_vec())?;
    let s_xi = field_observable_structure(&xi_field, chain, tol)?;
    let s_u = observable_structure(&u, chain, tol)?;

    for (name, other) in [(NAMES[0], &s_xi), (NAMES[1], &s_u)] {
        let mut residual = 0.0_f64;
        let mut dims = true;
        for (a, b) in s_f.modules.iter().zip(&other.modules) {
            residual = residual.max(subspace_distance(a.gspace(), b.gspace())?);
            dims &= a.gdim() == b.gdim();
        }
        report.push(Clause::judged(name, dims, residual, tol.rank_tol));
    }

    let classes = [
        s_f.classify(tol)?,
        s_xi.classify(tol)?,
        s_u.classify(tol)?,
    ];
    let agree = classes.iter().all(|c| *c == classes[0]);
    report.push(Clause::judged(NAMES[2], agree, if agree { 0.0 } else { 1.0 }, tol.rank_tol));

    let split = wold_decompose(&u, chain, tol)?;
    let p_f = s_f.remote_past.gspace().projector();
    let complement = ComplexMatrix::identity(field.space().p, field.space().p) - &p_f;
    let u_det = field_to_rdf(&field.right_mul(&p_f)?, basis, tol)?;
    let u_pnd = field_to_rdf(&field.right_mul(&complement)?, basis, tol)?;
    for (name, a, b) in [
        (NAMES[3], &split.deterministic_part, &u_det),
        (NAMES[4], &split.purely_nondeterministic_part, &u_pnd),
    ] {
        let scale = u.values().iter().map(|v| frobenius_norm(v.matrix())).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
        let residual = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| frobenius_norm(&(x.matrix() - y.matrix())) / scale)
            .fold(0.0_f64, f64::max);
        report.check(name, residual, tol.eq_tol);
    }
    Ok(report)
}

/// [`wold_coherence_with_basis`] with the cell-indicator basis.
pub fn wold_coherence(field: &RandomField, chain: &ThresholdChain, tol: &Tolerance) -> Result<Report> {
    wold_coherence_with_basis(field, &cell_basis(field.grid()), chain, tol)
}

/// Fields whose Wold type is known in advance.
pub mod canonical {
    use super::*;

    fn cell_weight(k: usize) -> Complex64 {
        Complex64::new(1.0 + 0.25 * k as f64, 0.5 * ((k % 3) as f64 - 1.0))
    }

    /// `F(t) = w(t) x e_0^T`: one shared measurement direction, q = 2, p = 2.
    pub fn constant_direction(grid: &Grid) -> RandomField {
        let space = ModuleSpace::new(2, 2).expect("nonzero dims");
        let values = (0..grid.len())
            .map(|k| {
                let mut m = ComplexMatrix::zeros(2, 2);
                m[(0, 0)] = cell_weight(k);
                m[(1, 0)] = cell_weight(k) * Complex64::new(0.0, -0.5);
                RandomVariable::new(space, m).expect("shape")
            })
            .collect();
        RandomField::new(grid.clone(), values).expect("one value per point")
    }

    /// q = 1 and `p = n^d - 1`: the origin carries zero and every other
    /// point its own unit row, so each point adds a fresh direction.
    pub fn innovation(grid: &Grid) -> RandomField {
        let p = grid.len() - 1;
        let space = ModuleSpace::new(1, p).expect("grid has at least two points");
        let values = (0..grid.len())
            .map(|k| {
                let mut m = ComplexMatrix::zeros(1, p);
                if k > 0 {
                    m[(0, k - 1)] = ONE;
                }
                RandomVariable::new(space, m).expect("shape")
            })
            .collect();
        RandomField::new(grid.clone(), values).expect("one value per point")
    }

    /// Block-diagonal values `diag(w(t), innovation(t))` with q = 2 and `p = n^d`.
    pub fn direct_sum(grid: &Grid) -> RandomField {
        let p = grid.len();
        let space = ModuleSpace::new(2, p).expect("nonzero dims");
        let values = (0..grid.len())
            .map(|k| {
                let mut m = ComplexMatrix::zeros(2, p);
                m[(0, 0)] = cell_weight(k);
                if k > 0 {
                    m[(1, k)] = ONE;
                }
                RandomVariable::new(space, m).expect("shape")
            })
            .collect();
        RandomField::new(grid.clone(), values).expect("one value per point")
    }

    /// The block of [`direct_sum`] that lives in the first measurement coordinate.
    pub fn direct_sum_deterministic_block(grid: &Grid) -> RandomField {
        let f = direct_sum(grid);
        let mut e0 = ComplexMatrix::zeros(grid.len(), grid.len());
        e0[(0, 0)] = ONE;
        f.right_mul(&e0).expect("square projector")
    }
}

/// Modular and vector classifications side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationPair {
    pub operator: Classification,
    pub vector: Classification,
}

pub fn classify_both(u: &RandomDistributionField, chain: &ThresholdChain, tol: &Tolerance) -> Result<ClassificationPair> {
    let s = observable_structure(u, chain, tol)?;
    Ok(ClassificationPair {
        operator: s.classify(tol)?,
        vector: s.classify_vector(tol)?,
    })
}

/// Gspace sizes of the field's values, for reporting.
pub fn field_gdim(field: &RandomField, tol: &Tolerance) -> usize {
    measurements_space(&field.as_mapping(), tol).dim()
}

/// Vector domain size of the field's values, for reporting.
pub fn field_vector_dim(field: &RandomField, tol: &Tolerance) -> usize {
    vector_domain(&field.as_mapping(), tol).dim()
}
