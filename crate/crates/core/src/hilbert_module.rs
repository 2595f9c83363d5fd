//! Finite model of the normal Hilbert `B(H)`-module of zero-mean
//! second-order `H`-valued random variables.
//!
//! With `H = C^q` and the scalar `L^2` space truncated to `C^p`, a random
//! variable is a `q x p` matrix `F` (the operator `V_f`), the Gramian is
//! `F G^H`, and a closed submodule is determined by its measurements subspace
//! `G ⊆ C^p`: it consists of the matrices `X` with `X P_G = X`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, column_span, ComplexMatrix, MatrixLiteral, Subspace, Tolerance};
use num_complex::Complex64;

/// Dimensions of the state space `C^q` and the measurements coordinate `C^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModuleSpace {
    pub q: usize,
    pub p: usize,
}

impl ModuleSpace {
    pub fn new(q: usize, p: usize) -> Result<Self> {
        if q == 0 || p == 0 {
            return Err(Error::Invalid(format!("module space needs q, p >= 1 (got q={q}, p={p})")));
        }
        Ok(Self { q, p })
    }

    pub fn check_same(&self, other: &ModuleSpace) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch(format!(
                "module spaces (q={}, p={}) and (q={}, p={})",
                self.q, self.p, other.q, other.p
            )));
        }
        Ok(())
    }
}

/// A second-order random variable of zero mean, stored as its `q x p` operator.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    space: ModuleSpace,
    matrix: ComplexMatrix,
}

impl RandomVariable {
    pub fn new(space: ModuleSpace, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.shape() != (space.q, space.p) {
            return Err(Error::DimensionMismatch(format!(
                "random variable matrix is {}x{}, space expects {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                space.q,
                space.p
            )));
        }
        numeric::check_finite(&matrix, "random variable")?;
        Ok(Self { space, matrix })
    }

    /// Infers the space from the matrix shape.
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        let space = ModuleSpace::new(matrix.nrows(), matrix.ncols())?;
        Self::new(space, matrix)
    }

    pub fn zero(space: ModuleSpace) -> Self {
        Self {
            space,
            matrix: ComplexMatrix::zeros(space.q, space.p),
        }
    }

    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.map(|z| z * c),
        }
    }

    pub fn add(&self, other: &RandomVariable) -> Result<Self> {
        self.space.check_same(&other.space)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &RandomVariable) -> Result<Self> {
        self.space.check_same(&other.space)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix - &other.matrix,
        })
    }

    /// Right multiplication by a `p x p` matrix acting on measurement coordinates.
    pub fn right_mul(&self, m: &ComplexMatrix) -> Result<Self> {
        if m.shape() != (self.space.p, self.space.p) {
            return Err(Error::DimensionMismatch(format!(
                "right factor is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                self.space.p,
                self.space.p
            )));
        }
        Ok(Self {
            space: self.space,
            matrix: &self.matrix * m,
        })
    }

    /// Row-major flattening into `C^{q p}`; the standard inner product of the
    /// flattened vectors equals [`scalar_product`].
    pub fn flatten(&self) -> numeric::ComplexVector {
        let (q, p) = (self.space.q, self.space.p);
        numeric::ComplexVector::from_fn(q * p, |k, _| self.matrix[(k / p, k % p)])
    }

    pub fn unflatten(space: ModuleSpace, v: &numeric::ComplexVector) -> Result<Self> {
        if v.len() != space.q * space.p {
            return Err(Error::DimensionMismatch(format!(
                "flattened vector of length {} for q={}, p={}",
                v.len(),
                space.q,
                space.p
            )));
        }
        let matrix = ComplexMatrix::from_fn(space.q, space.p, |r, c| v[r * space.p + c]);
        Ok(Self { space, matrix })
    }
}

#[derive(Serialize, Deserialize)]
struct RandomVariableFile {
    q: usize,
    p: usize,
    #[serde(flatten)]
    matrix: MatrixLiteral,
}

impl Serialize for RandomVariable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RandomVariableFile {
            q: self.space.q,
            p: self.space.p,
            matrix: MatrixLiteral::from_matrix(&self.matrix),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RandomVariable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = RandomVariableFile::deserialize(d)?;
        let space = ModuleSpace::new(file.q, file.p).map_err(serde::de::Error::custom)?;
        let matrix = file.matrix.to_matrix().map_err(serde::de::Error::custom)?;
        RandomVariable::new(space, matrix).map_err(serde::de::Error::custom)
    }
}

/// `[f, g] = F G^H`.
pub fn gramian(f: &RandomVariable, g: &RandomVariable) -> Result<ComplexMatrix> {
    f.space.check_same(&g.space)?;
    Ok(&f.matrix * g.matrix.adjoint())
}

/// `(f, g) = tr [f, g]`.
pub fn scalar_product(f: &RandomVariable, g: &RandomVariable) -> Result<Complex64> {
    Ok(numeric::trace(&gramian(f, g)?))
}

/// `(tr F F^H)^{1/2}`, the trace norm of `[f, f]` to the power one half.
pub fn module_norm(f: &RandomVariable) -> f64 {
    numeric::frobenius_norm(&f.matrix)
}

/// The outer action `a · f` of a `q x q` operator.
pub fn outer_action(a: &ComplexMatrix, f: &RandomVariable) -> Result<RandomVariable> {
    let q = f.space.q;
    if a.shape() != (q, q) {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, expected {q}x{q}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(RandomVariable {
        space: f.space,
        matrix: a * &f.matrix,
    })
}

/// A closed submodule, identified with its measurements subspace of `C^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSubmodule {
    space: ModuleSpace,
    gspace: Subspace,
}

impl ModuleSubmodule {
    pub fn new(space: ModuleSpace, gspace: Subspace) -> Result<Self> {
        if gspace.ambient_dim() != space.p {
            return Err(Error::DimensionMismatch(format!(
                "measurements subspace lives in C^{}, module expects C^{}",
                gspace.ambient_dim(),
                space.p
            )));
        }
        Ok(Self { space, gspace })
    }

    pub fn zero(space: ModuleSpace) -> Self {
        Self {
            space,
            gspace: Subspace::zero(space.p),
        }
    }

    pub fn full(space: ModuleSpace) -> Self {
        Self {
            space,
            gspace: Subspace::full(space.p),
        }
    }

    pub fn space(&self) -> ModuleSpace {
        self.space
    }

    pub fn gspace(&self) -> &Subspace {
        &self.gspace
    }

    pub fn gdim(&self) -> usize {
        self.gspace.dim()
    }

    /// Dimension as a complex linear space of matrices, `q * gdim`.
    pub fn linear_dim(&self) -> usize {
        self.space.q * self.gdim()
    }

    /// Membership test `X P_G = X`.
    pub fn contains_variable(&self, x: &RandomVariable, tol: &Tolerance) -> Result<bool> {
        self.space.check_same(&x.space)?;
        let resid = numeric::frobenius_norm(&(&x.matrix * self.gspace.complement_projector()));
        Ok(resid <= tol.eq_tol * module_norm(x).max(1.0))
    }
}

/// Submodule generated by `gens`; its measurements subspace is the span of
/// the columns of every `F^H`.
pub fn submodule_generated(
    space: ModuleSpace,
    gens: &[RandomVariable],
    tol: &Tolerance,
) -> Result<ModuleSubmodule> {
    for g in gens {
        space.check_same(&g.space)?;
    }
    let cols = gens.len() * space.q;
    let mut stacked = ComplexMatrix::zeros(space.p, cols);
    for (k, g) in gens.iter().enumerate() {
        stacked
            .columns_mut(k * space.q, space.q)
            .copy_from(&g.matrix.adjoint());
    }
    Ok(ModuleSubmodule {
        space,
        gspace: column_span(&stacked, tol),
    })
}

/// Gramian projection `f ↦ f P_G` onto a closed submodule.
pub fn gramian_projection(m: &ModuleSubmodule, f: &RandomVariable) -> Result<RandomVariable> {
    m.space.check_same(&f.space)?;
    Ok(RandomVariable {
        space: f.space,
        matrix: &f.matrix * m.gspace.projector(),
    })
}
