//! Gaussian sampling with a prescribed operator covariance, and the
//! empirical mappings built from the samples.
//!
//! Draws come from `ChaCha8Rng::seed_from_u64(seed)` switched to stream
//! `N`, so batches of different sizes under one seed are independent.
//! Each standard complex normal is `(x + i y) / sqrt(2)` with `x` then `y`
//! read from `StandardNormal`; a sample is the `p`-vector `z` filled in
//! order, and `f(λ_i) = Φ_i z` for the factorization `Φ` of the kernel.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert_module::{ModuleSpace, RandomVariable};
use crate::kernels::{covariance_kernel, kolmogorov_factorize, OperatorKernel};
use crate::mapping::StochasticMapping;
use crate::numeric::{frobenius_norm, ComplexMatrix, Tolerance};
use crate::report::{Clause, Report};

/// Centre and half-width of the accepted band for successive error ratios.
pub const RATIO_BAND: (f64, f64) = (2.15, 0.75);

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub labels: Vec<String>,
    pub q: usize,
    pub n: usize,
    pub seed: u64,
    /// Per label, a `q x N` matrix whose columns are the draws.
    pub draws: Vec<ComplexMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalKernel {
    pub kernel: OperatorKernel,
    pub n: usize,
    pub seed: u64,
}

pub fn standard_complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// `N` independent zero-mean complex Gaussian draws with `E[f(λ_i) f(λ_j)^H] = K(λ_i, λ_j)`.
pub fn sample_gaussian(k: &OperatorKernel, n: usize, seed: u64, tol: &Tolerance) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let phi = kolmogorov_factorize(k, tol)?;
    let p = phi.space().p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let mut z = ComplexMatrix::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            z[(i, j)] = standard_complex_normal(&mut rng);
        }
    }
    let draws = phi.values().iter().map(|v| v.matrix() * &z).collect();
    Ok(SampleBatch {
        labels: k.labels().to_vec(),
        q: k.q(),
        n,
        seed,
        draws,
    })
}

/// Values `draws_i / sqrt(N)` in `C^{q x N}`, so the gramians are the empirical second moments.
pub fn empirical_mapping(batch: &SampleBatch) -> Result<StochasticMapping> {
    let space = ModuleSpace::new(batch.q, batch.n)?;
    let scale = 1.0 / (batch.n as f64).sqrt();
    let values = batch
        .draws
        .iter()
        .map(|d| RandomVariable::new(space, d.scale(scale)))
        .collect::<Result<Vec<_>>>()?;
    StochasticMapping::new(batch.labels.clone(), values)
}

pub fn empirical_kernel(batch: &SampleBatch) -> Result<EmpiricalKernel> {
    Ok(EmpiricalKernel {
        kernel: covariance_kernel(&empirical_mapping(batch)?),
        n: batch.n,
        seed: batch.seed,
    })
}

/// `|K̂ - K|_F / |K|_F`, or `|K̂|_F` when `K = 0`.
pub fn relative_kernel_error(estimate: &OperatorKernel, k: &OperatorKernel) -> f64 {
    let (a, b) = (estimate.assemble(), k.assemble());
    let scale = frobenius_norm(&b);
    let diff = frobenius_norm(&(a - &b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Root mean square over seeds.
    pub error: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `error(N_k) / error(N_{k+1})`.
    pub ratios: Vec<f64>,
    pub decreasing: bool,
    pub ratios_in_band: bool,
    /// Raised when the errors do not follow the `N^{-1/2}` trend.
    pub flagged: bool,
}

impl ConvergenceReport {
    pub fn from_rows(rows: Vec<ConvergenceRow>) -> Self {
        let all_zero = rows.iter().all(|r| r.error == 0.0);
        if all_zero {
            return Self {
                rows,
                ratios: Vec::new(),
                decreasing: true,
                ratios_in_band: true,
                flagged: false,
            };
        }
        let ratios: Vec<f64> = rows.windows(2).map(|w| w[0].error / w[1].error).collect();
        let decreasing = rows.windows(2).all(|w| w[1].error < w[0].error);
        let ratios_in_band = ratios.iter().all(|r| in_band(*r));
        Self {
            rows,
            ratios,
            decreasing,
            ratios_in_band,
            flagged: !(decreasing && ratios_in_band),
        }
    }

    /// Report over precomputed errors, one per sample size.
    pub fn from_errors(ns: &[usize], errors: &[f64]) -> Self {
        let rows = ns
            .iter()
            .zip(errors)
            .map(|(&n, &e)| ConvergenceRow {
                n,
                error: e,
                per_seed: vec![e],
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn to_report(&self) -> Report {
        let mut report = Report::new();
        if self.ratios.is_empty() && self.rows.len() > 1 {
            report.push(Clause::not_applicable("error_decreases", 0.0));
            return report;
        }
        let worst_increase = self
            .rows
            .windows(2)
            .map(|w| w[1].error - w[0].error)
            .fold(f64::NEG_INFINITY, f64::max);
        if self.rows.len() > 1 {
            report.push(Clause::judged("error_decreases", self.decreasing, worst_increase.max(0.0), 0.0));
        }
        let (centre, half) = RATIO_BAND;
        for (k, r) in self.ratios.iter().enumerate() {
            report.push(Clause::judged(format!("ratio_{k}_in_band"), in_band(*r), (r - centre).abs(), half));
        }
        report
    }
}

fn in_band(r: f64) -> bool {
    let (centre, half) = RATIO_BAND;
    (centre - half..=centre + half).contains(&r)
}

/// Relative empirical-kernel errors for each `N`, averaged over seeds.
pub fn convergence_report(k: &OperatorKernel, ns: &[usize], seeds: &[u64], tol: &Tolerance) -> Result<ConvergenceReport> {
    if seeds.is_empty() {
        return Err(Error::Invalid("at least one seed is required".into()));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let per_seed = seeds
            .iter()
            .map(|&s| Ok(relative_kernel_error(&empirical_kernel(&sample_gaussian(k, n, s, tol)?)?.kernel, k)))
            .collect::<Result<Vec<f64>>>()?;
        let error = (per_seed.iter().map(|e| e * e).sum::<f64>() / per_seed.len() as f64).sqrt();
        rows.push(ConvergenceRow { n, error, per_seed });
    }
    Ok(ConvergenceReport::from_rows(rows))
}

/// Seeds `base, base + 1, ...`.
pub fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::is_positive_definite;
    use crate::numeric::{numerical_rank, relative_residual, real_matrix};

    fn identity_kernel(q: usize, m: usize) -> OperatorKernel {
        let labels = (0..m).map(|i| format!("l{i}")).collect();
        OperatorKernel::from_assembled(labels, q, &ComplexMatrix::identity(q * m, q * m)).unwrap()
    }

    #[test]
    fn law_of_large_numbers() {
        let tol = Tolerance::default();
        let k = identity_kernel(2, 3);
        let n = 10_000;
        let batch = sample_gaussian(&k, n, 42, &tol).unwrap();
        let emp = empirical_kernel(&batch).unwrap();
        let err = frobenius_norm(&(emp.kernel.assemble() - k.assemble()));
        assert!(err < 5.0 / (n as f64).sqrt() * frobenius_norm(&k.assemble()), "{err}");
        assert!(is_positive_definite(&emp.kernel, &tol).unwrap());
    }

    #[test]
    fn single_draw_is_rank_one() {
        let tol = Tolerance::default();
        let k = identity_kernel(2, 3);
        let emp = empirical_kernel(&sample_gaussian(&k, 1, 5, &tol).unwrap()).unwrap();
        assert_eq!(numerical_rank(&emp.kernel.assemble(), &tol), 1);
    }

    #[test]
    fn determinism() {
        let tol = Tolerance::default();
        let k = identity_kernel(1, 2);
        assert_eq!(sample_gaussian(&k, 50, 9, &tol).unwrap(), sample_gaussian(&k, 50, 9, &tol).unwrap());
        assert_ne!(sample_gaussian(&k, 50, 9, &tol).unwrap(), sample_gaussian(&k, 50, 10, &tol).unwrap());
    }

    #[test]
    fn rejects_indefinite_kernel() {
        let k = OperatorKernel::from_assembled(vec!["a".into(), "b".into()], 1, &real_matrix(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap();
        assert!(matches!(
            sample_gaussian(&k, 10, 0, &Tolerance::default()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn empirical_mapping_identity() {
        let tol = Tolerance::default();
        let k = identity_kernel(2, 2);
        let batch = sample_gaussian(&k, 7, 3, &tol).unwrap();
        let direct: Vec<Vec<ComplexMatrix>> = batch
            .draws
            .iter()
            .map(|a| batch.draws.iter().map(|b| (a * b.adjoint()).scale(1.0 / 7.0)).collect())
            .collect();
        let emp = empirical_kernel(&batch).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(relative_residual(emp.kernel.block(i, j), &direct[i][j]) < 1e-14);
            }
        }
        let zero = SampleBatch {
            draws: vec![ComplexMatrix::zeros(2, 7); 2],
            ..batch
        };
        assert!(empirical_mapping(&zero).unwrap().values().iter().all(|v| frobenius_norm(v.matrix()) == 0.0));
    }

    #[test]
    fn convergence_examples() {
        let tol = Tolerance::default();
        let k = identity_kernel(2, 3);
        let rep = convergence_report(&k, &[400, 1600, 6400], &seed_list(1, 8), &tol).unwrap();
        assert!(rep.decreasing);

        let flat = ConvergenceReport::from_errors(&[400, 1600], &[0.1, 0.1]);
        assert!(flat.flagged);
        assert!(!flat.to_report().pass());

        let zero = OperatorKernel::from_assembled(vec!["a".into()], 1, &ComplexMatrix::zeros(1, 1)).unwrap();
        let rep = convergence_report(&zero, &[10, 40], &[1], &tol).unwrap();
        assert!(rep.rows.iter().all(|r| r.error == 0.0));
        assert!(!rep.flagged);
    }
}
