#![allow(dead_code)]

use gfl_core::fields::{Grid, TestFunction};
use gfl_core::hilbert_module::{ModuleSpace, RandomVariable};
use gfl_core::kernels::OperatorKernel;
use gfl_core::mapping::StochasticMapping;
use gfl_core::numeric::ComplexMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cgauss(rng))
}

pub fn labels(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("x{i}")).collect()
}

pub fn random_mapping(rng: &mut ChaCha8Rng, m: usize, q: usize, p: usize) -> StochasticMapping {
    let space = ModuleSpace::new(q, p).unwrap();
    let values = (0..m)
        .map(|_| RandomVariable::new(space, random_matrix(rng, q, p)).unwrap())
        .collect();
    StochasticMapping::new(labels(m), values).unwrap()
}

/// `X X^H` with `X` of shape `mq x r`, cut into `q x q` blocks.
pub fn random_pd_kernel(rng: &mut ChaCha8Rng, m: usize, q: usize, r: usize) -> OperatorKernel {
    let x = random_matrix(rng, m * q, r);
    OperatorKernel::from_assembled(labels(m), q, &(&x * x.adjoint())).unwrap()
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).qr().q()
}

/// Hermitian kernel `V diag(λ) V^H` with prescribed eigenvalues.
pub fn kernel_with_spectrum(rng: &mut ChaCha8Rng, m: usize, q: usize, spectrum: &[f64]) -> OperatorKernel {
    let n = m * q;
    assert_eq!(spectrum.len(), n);
    let v = random_unitary(rng, n);
    let d = ComplexMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(spectrum[i], 0.0) } else { Complex64::new(0.0, 0.0) });
    let mut a = &v * d * v.adjoint();
    let h = (&a + a.adjoint()).scale(0.5);
    a.copy_from(&h);
    OperatorKernel::from_assembled(labels(m), q, &a).unwrap()
}

pub fn random_test_function(rng: &mut ChaCha8Rng, grid: &Grid) -> TestFunction {
    let samples = (0..grid.len()).map(|_| cgauss(rng)).collect();
    TestFunction::from_samples(grid, samples).unwrap()
}

pub fn random_variable(rng: &mut ChaCha8Rng, space: ModuleSpace) -> RandomVariable {
    RandomVariable::new(space, random_matrix(rng, space.q, space.p)).unwrap()
}
