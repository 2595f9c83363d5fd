//! Second-order stochastic mappings over a finite index set and their
//! vector domain, modular domain and measurements space.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert_module::{submodule_generated, ModuleSpace, ModuleSubmodule, RandomVariable};
use crate::numeric::{self, contains, ComplexMatrix, MatrixLiteral, Subspace, Tolerance};

/// `λ ↦ Φ(λ)` over an ordered list of distinct labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMapping {
    labels: Vec<String>,
    space: ModuleSpace,
    values: Vec<RandomVariable>,
}

impl StochasticMapping {
    pub fn new(labels: Vec<String>, values: Vec<RandomVariable>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("stochastic mapping needs at least one value".into()));
        }
        if labels.len() != values.len() {
            return Err(Error::LabelMismatch(format!(
                "{} labels for {} values",
                labels.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::LabelMismatch(format!("duplicate label `{dup}`")));
        }
        let space = values[0].space();
        for v in &values {
            space.check_same(&v.space())?;
        }
        Ok(Self {
            labels,
            space,
            values,
        })
    }

    /// Labels `l0, l1, ...`.
    pub fn from_values(values: Vec<RandomVariable>) -> Result<Self> {
        let labels = (0..values.len()).map(|i| format!("l{i}")).collect();
        Self::new(labels, values)
    }

    pub fn from_matrices(matrices: Vec<ComplexMatrix>) -> Result<Self> {
        let values = matrices
            .into_iter()
            .map(RandomVariable::from_matrix)
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(values)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[RandomVariable] {
        &self.values
    }

    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn value(&self, label: &str) -> Result<&RandomVariable> {
        Ok(&self.values[self.index_of(label)?])
    }

    /// `mq x p` matrix stacking the values top to bottom.
    pub fn stacked(&self) -> ComplexMatrix {
        let (q, p) = (self.space.q, self.space.p);
        let mut out = ComplexMatrix::zeros(self.len() * q, p);
        for (i, v) in self.values.iter().enumerate() {
            out.rows_mut(i * q, q).copy_from(v.matrix());
        }
        out
    }

    /// Applies `f` to each value, keeping labels.
    pub fn map_values<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&RandomVariable) -> Result<RandomVariable>,
    {
        let values = self.values.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.labels.clone(), values)
    }

    pub fn check_labels(&self, other: &StochasticMapping) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::LabelMismatch("mappings are indexed by different labels".into()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MappingFile {
    labels: Vec<String>,
    q: usize,
    p: usize,
    values: Vec<MatrixLiteral>,
}

impl Serialize for StochasticMapping {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MappingFile {
            labels: self.labels.clone(),
            q: self.space.q,
            p: self.space.p,
            values: self.values.iter().map(|v| MatrixLiteral::from_matrix(v.matrix())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StochasticMapping {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = MappingFile::deserialize(d)?;
        let space = ModuleSpace::new(file.q, file.p).map_err(D::Error::custom)?;
        let values = file
            .values
            .iter()
            .map(|lit| RandomVariable::new(space, lit.to_matrix()?))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        StochasticMapping::new(file.labels, values).map_err(D::Error::custom)
    }
}

/// Sizes of the three spaces attached to a mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSummary {
    pub vector_dim: usize,
    pub modular_gdim: usize,
    pub measurement_basis: Subspace,
}

impl DomainSummary {
    pub fn modular_linear_dim(&self, q: usize) -> usize {
        q * self.modular_gdim
    }
}

/// Linear span of the values in `C^{qp}` under row-major flattening.
pub fn vector_domain(phi: &StochasticMapping, tol: &Tolerance) -> Subspace {
    let (q, p) = (phi.space.q, phi.space.p);
    let stacked = ComplexMatrix::from_fn(q * p, phi.len(), |k, j| phi.values[j].matrix()[(k / p, k % p)]);
    numeric::column_span(&stacked, tol)
}

pub fn modular_domain(phi: &StochasticMapping, tol: &Tolerance) -> ModuleSubmodule {
    submodule_generated(phi.space, &phi.values, tol).expect("values share the mapping's space")
}

pub fn measurements_space(phi: &StochasticMapping, tol: &Tolerance) -> Subspace {
    modular_domain(phi, tol).gspace().clone()
}

pub fn domain_summary(phi: &StochasticMapping, tol: &Tolerance) -> DomainSummary {
    let measurement_basis = measurements_space(phi, tol);
    DomainSummary {
        vector_dim: vector_domain(phi, tol).dim(),
        modular_gdim: measurement_basis.dim(),
        measurement_basis,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subordination {
    /// Inclusion of vector domains.
    pub vector: bool,
    /// Inclusion of modular domains.
    pub operator: bool,
}

/// Whether `phi` is (operator) subordinate to `psi`.
pub fn is_subordinate(phi: &StochasticMapping, psi: &StochasticMapping, tol: &Tolerance) -> Result<Subordination> {
    phi.space.check_same(&psi.space)?;
    let vector = contains(&vector_domain(psi, tol), &vector_domain(phi, tol), tol)?;
    let operator = contains(&measurements_space(psi, tol), &measurements_space(phi, tol), tol)?;
    Ok(Subordination { vector, operator })
}

/// `λ ↦ (Φ(λ); Ψ(λ))` in the product module with state space `C^{2q}`.
pub fn product_mapping(phi: &StochasticMapping, psi: &StochasticMapping) -> Result<StochasticMapping> {
    phi.space.check_same(&psi.space)?;
    phi.check_labels(psi)?;
    let (q, p) = (phi.space.q, phi.space.p);
    let space = ModuleSpace::new(2 * q, p)?;
    let values = phi
        .values
        .iter()
        .zip(&psi.values)
        .map(|(a, b)| {
            let mut m = ComplexMatrix::zeros(2 * q, p);
            m.rows_mut(0, q).copy_from(a.matrix());
            m.rows_mut(q, q).copy_from(b.matrix());
            RandomVariable::new(space, m)
        })
        .collect::<Result<Vec<_>>>()?;
    StochasticMapping::new(phi.labels.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{frobenius_norm, real_matrix};

    fn mapping(rows: &[&[&[f64]]]) -> StochasticMapping {
        StochasticMapping::from_matrices(rows.iter().map(|r| real_matrix(r)).collect()).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(StochasticMapping::from_values(vec![]).is_err());
        let v = RandomVariable::from_matrix(real_matrix(&[&[1.0]])).unwrap();
        assert!(StochasticMapping::new(vec!["a".into(), "a".into()], vec![v.clone(), v.clone()]).is_err());
        let w = RandomVariable::from_matrix(real_matrix(&[&[1.0, 2.0]])).unwrap();
        assert!(StochasticMapping::from_values(vec![v, w]).is_err());
    }

    #[test]
    fn vector_domain_examples() {
        let tol = Tolerance::default();
        assert_eq!(vector_domain(&mapping(&[&[&[1.0, 2.0]]]), &tol).dim(), 1);
        assert_eq!(vector_domain(&mapping(&[&[&[1.0, 2.0]], &[&[-2.0, -4.0]]]), &tol).dim(), 1);
        let units = mapping(&[
            &[&[1.0, 0.0], &[0.0, 0.0]],
            &[&[0.0, 1.0], &[0.0, 0.0]],
            &[&[0.0, 0.0], &[1.0, 0.0]],
            &[&[0.0, 0.0], &[0.0, 1.0]],
        ]);
        assert_eq!(vector_domain(&units, &tol).dim(), 4);
    }

    #[test]
    fn modular_domain_examples() {
        let tol = Tolerance::default();
        assert_eq!(modular_domain(&mapping(&[&[&[1.0, 0.0], &[0.0, 1.0]]]), &tol).gdim(), 2);
        let rows = mapping(&[&[&[1.0, 0.0, 0.0]], &[&[0.0, 1.0, 0.0]]]);
        assert_eq!(modular_domain(&rows, &tol).gdim(), 2);
        assert_eq!(modular_domain(&mapping(&[&[&[0.0, 0.0]]]), &tol).gdim(), 0);
    }

    #[test]
    fn measurements_space_examples() {
        let tol = Tolerance::default();
        let m = measurements_space(&mapping(&[&[&[1.0, 1.0]]]), &tol);
        assert_eq!(m.dim(), 1);
        let expect = real_matrix(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(frobenius_norm(&(m.projector() - expect)) < 1e-14);
        let s = domain_summary(&mapping(&[&[&[1.0, 0.0], &[0.0, 1.0]]]), &tol);
        assert_eq!((s.vector_dim, s.modular_gdim, s.modular_linear_dim(2)), (1, 2, 4));
    }

    #[test]
    fn subordination_examples() {
        let tol = Tolerance::default();
        let a = mapping(&[&[&[1.0, 1.0]]]);
        assert_eq!(
            is_subordinate(&a, &a, &tol).unwrap(),
            Subordination { vector: true, operator: true }
        );
        let psi = mapping(&[&[&[1.0, 0.0]], &[&[0.0, 1.0]]]);
        assert_eq!(
            is_subordinate(&a, &psi, &tol).unwrap(),
            Subordination { vector: true, operator: true }
        );
        let x = mapping(&[&[&[0.0, 0.0, 1.0]]]);
        let y = mapping(&[&[&[1.0, 0.0, 0.0]]]);
        assert_eq!(
            is_subordinate(&x, &y, &tol).unwrap(),
            Subordination { vector: false, operator: false }
        );
    }

    #[test]
    fn product_mapping_stacks() {
        let phi = mapping(&[&[&[1.0, 2.0]], &[&[3.0, 4.0]]]);
        let zero = mapping(&[&[&[0.0, 0.0]], &[&[0.0, 0.0]]]);
        let prod = product_mapping(&phi, &zero).unwrap();
        assert_eq!(prod.space().q, 2);
        assert_eq!(prod.values()[1].matrix(), &real_matrix(&[&[3.0, 4.0], &[0.0, 0.0]]));
        let other = StochasticMapping::new(vec!["x".into(), "y".into()], phi.values().to_vec()).unwrap();
        assert!(product_mapping(&phi, &other).is_err());
    }

    #[test]
    fn mapping_json_round_trip() {
        let phi = mapping(&[&[&[1.0, 2.0]], &[&[3.0, 4.0]]]);
        let json = serde_json::to_string(&phi).unwrap();
        let back: StochasticMapping = serde_json::from_str(&json).unwrap();
        assert_eq!(back, phi);
    }
}
