mod common;

use common::*;
use gfl_core::fields::{
    cell_basis, covariance_distribution, covariance_distribution_kernel, field_to_rdf, kernel_to_distribution,
    linearity_residual, random_field, Grid, RandomField,
};
use gfl_core::hilbert_module::{gramian, gramian_projection, module_norm, scalar_product, submodule_generated, ModuleSpace, RandomVariable};
use gfl_core::kernels::{
    covariance_kernel, gramian_unitary_connector, is_positive_definite, kolmogorov_factorize,
    operator_coefficient_positivity_sample, rkhm_gramian, subordination_criterion, RkhmElement,
};
use gfl_core::mapping::{is_subordinate, measurements_space, modular_domain, vector_domain, StochasticMapping};
use gfl_core::measures::{
    bimeasure_of, evaluate, measure_coherence, operator_semivariation, semivariation, CellSet, SearchStrategy,
    StochasticMeasure,
};
use gfl_core::numeric::{
    column_span, contains, frobenius_norm, intersect, join, numerical_rank, relative_residual, same_subspace,
    subspace_distance, trace, ComplexMatrix, Tolerance,
};
use gfl_core::simulate::{empirical_kernel, sample_gaussian};
use gfl_core::wold::{canonical, split_with_projector, verify_split, wold_decompose, ThresholdChain};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn low_rank(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize, r: usize) -> ComplexMatrix {
    random_matrix(rng, rows, r) * random_matrix(rng, r, cols)
}

fn small_grid(rng: &mut rand_chacha::ChaCha8Rng) -> Grid {
    if rng.random_bool(0.5) {
        Grid::uniform(1, rng.random_range(2..=8), rng.random_range(0.1..1.0)).unwrap()
    } else {
        Grid::uniform(2, rng.random_range(2..=4), rng.random_range(0.1..1.0)).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn span_dimension_is_numerical_rank(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, r in 1usize..6) {
        let mut rng = rng(seed);
        let a = low_rank(&mut rng, rows, cols, r);
        prop_assert_eq!(column_span(&a, &tol()).dim(), numerical_rank(&a, &tol()));
        prop_assert_eq!(numerical_rank(&a, &tol()), r.min(rows).min(cols));
    }

    #[test]
    fn intersection_projector_absorbs(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = rng(seed);
        let k = rng.random_range(1..n);
        let shared = random_matrix(&mut rng, n, k);
        let mut a = shared.clone();
        a = a.insert_columns(k, 1, Complex64::new(0.0, 0.0));
        a.set_column(k, &random_matrix(&mut rng, n, 1).column(0));
        let s1 = column_span(&a, &tol());
        let s2 = column_span(&(&shared * random_matrix(&mut rng, k, k)), &tol());
        let meet = intersect(&s1, &s2, &tol()).unwrap();
        let p = meet.projector();
        prop_assert!(frobenius_norm(&(&p * s1.projector() - &p)) <= tol().eq_tol);
        prop_assert!(frobenius_norm(&(&p * s2.projector() - &p)) <= tol().eq_tol);
        prop_assert_eq!(meet.dim(), k);
    }

    #[test]
    fn mutual_containment_matches_projector_distance(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = rng(seed);
        let r = rng.random_range(1..=n);
        let a = random_matrix(&mut rng, n, r);
        let s1 = column_span(&a, &tol());
        let s2 = if rng.random_bool(0.5) {
            column_span(&(&a * random_matrix(&mut rng, r, r)), &tol())
        } else {
            let c = rng.random_range(1..=n);
            column_span(&random_matrix(&mut rng, n, c), &tol())
        };
        let mutual = same_subspace(&s1, &s2, &tol()).unwrap();
        let close = s1.dim() == s2.dim() && subspace_distance(&s1, &s2).unwrap() <= tol().eq_tol * n as f64;
        prop_assert_eq!(mutual, close);
    }

    #[test]
    fn gramian_is_sesquilinear(seed in any::<u64>(), q in 1usize..4, p in 1usize..4) {
        let mut rng = rng(seed);
        let space = ModuleSpace::new(q, p).unwrap();
        let (f, g, h) = (random_variable(&mut rng, space), random_variable(&mut rng, space), random_variable(&mut rng, space));
        let (a, b) = (cgauss(&mut rng), cgauss(&mut rng));
        let lhs = gramian(&f.scale(a).add(&g.scale(b)).unwrap(), &h).unwrap();
        let rhs = gramian(&f, &h).unwrap() * a + gramian(&g, &h).unwrap() * b;
        prop_assert!(relative_residual(&lhs, &rhs) <= tol().eq_tol);
        let swapped = gramian(&h, &f).unwrap();
        prop_assert!(relative_residual(&swapped, &gramian(&f, &h).unwrap().adjoint()) <= tol().eq_tol);
    }

    #[test]
    fn norm_trace_identity(seed in any::<u64>(), q in 1usize..4, p in 1usize..4) {
        let mut rng = rng(seed);
        let f = random_variable(&mut rng, ModuleSpace::new(q, p).unwrap());
        let n2 = module_norm(&f).powi(2);
        let sp = scalar_product(&f, &f).unwrap();
        let tr = trace(&gramian(&f, &f).unwrap());
        prop_assert!((n2 - sp.re).abs() <= tol().eq_tol * n2 && sp.im.abs() <= tol().eq_tol * n2);
        prop_assert!((n2 - tr.re).abs() <= tol().eq_tol * n2);
    }

    #[test]
    fn projection_residual_is_gramian_orthogonal(seed in any::<u64>(), q in 1usize..4, p in 2usize..5) {
        let mut rng = rng(seed);
        let space = ModuleSpace::new(q, p).unwrap();
        let gens: Vec<_> = (0..rng.random_range(1..3)).map(|_| {
            RandomVariable::new(space, low_rank(&mut rng, q, p, 1)).unwrap()
        }).collect();
        let m = submodule_generated(space, &gens, &tol()).unwrap();
        let (f, g) = (random_variable(&mut rng, space), random_variable(&mut rng, space));
        let pf = gramian_projection(&m, &f).unwrap();
        let pg = gramian_projection(&m, &g).unwrap();
        let cross = gramian(&f.sub(&pf).unwrap(), &pg).unwrap();
        prop_assert!(frobenius_norm(&cross) <= tol().eq_tol * module_norm(&f).max(1.0) * module_norm(&g).max(1.0));
    }

    #[test]
    fn generated_submodules_are_monotone(seed in any::<u64>(), q in 1usize..3, p in 2usize..6) {
        let mut rng = rng(seed);
        let space = ModuleSpace::new(q, p).unwrap();
        let mut gens: Vec<RandomVariable> = Vec::new();
        let mut previous = submodule_generated(space, &gens, &tol()).unwrap();
        for _ in 0..4 {
            gens.push(RandomVariable::new(space, low_rank(&mut rng, q, p, 1)).unwrap());
            let next = submodule_generated(space, &gens, &tol()).unwrap();
            prop_assert!(contains(next.gspace(), previous.gspace(), &tol()).unwrap());
            previous = next;
        }
    }

    #[test]
    fn modular_domain_dimension(seed in any::<u64>(), m in 1usize..4, q in 1usize..3, p in 1usize..6) {
        let mut rng = rng(seed);
        let phi = random_mapping(&mut rng, m, q, p);
        let md = modular_domain(&phi, &tol());
        prop_assert_eq!(md.linear_dim(), q * measurements_space(&phi, &tol()).dim());
        let g = measurements_space(&phi, &tol());
        let vd = vector_domain(&phi, &tol());
        for c in 0..vd.dim() {
            let x = RandomVariable::unflatten(phi.space(), &vd.basis().column(c).into_owned()).unwrap();
            prop_assert!(frobenius_norm(&(x.matrix() * g.complement_projector())) <= tol().eq_tol);
        }
    }

    #[test]
    fn vector_subordination_implies_operator(seed in any::<u64>(), m in 1usize..4, q in 1usize..3, p in 1usize..6) {
        let mut rng = rng(seed);
        let psi = random_mapping(&mut rng, m, q, p);
        let values = (0..m).map(|_| {
            let mut acc = ComplexMatrix::zeros(q, p);
            for v in psi.values() {
                acc += v.matrix() * cgauss(&mut rng);
            }
            RandomVariable::new(psi.space(), acc).unwrap()
        }).collect();
        let phi = StochasticMapping::new(psi.labels().to_vec(), values).unwrap();
        let s = is_subordinate(&phi, &psi, &tol()).unwrap();
        prop_assert!(s.vector && s.operator);
        let other = random_mapping(&mut rng, m, q, p);
        let s = is_subordinate(&other, &psi, &tol()).unwrap();
        prop_assert!(!s.vector || s.operator);
    }

    #[test]
    fn factorization_round_trip_and_uniqueness(seed in any::<u64>(), m in 1usize..5, q in 1usize..4) {
        let mut rng = rng(seed);
        let r = rng.random_range(1..=m * q);
        let k = random_pd_kernel(&mut rng, m, q, r);
        let phi = kolmogorov_factorize(&k, &tol()).unwrap();
        prop_assert!(relative_residual(&covariance_kernel(&phi).assemble(), &k.assemble()) <= tol().eq_tol);
        let w = random_unitary(&mut rng, phi.space().p);
        let phi2 = phi.map_values(|v| v.right_mul(&w)).unwrap();
        let u = gramian_unitary_connector(&phi, &phi2, &tol()).unwrap();
        let scale = phi.values().iter().map(|v| frobenius_norm(v.matrix())).fold(1.0_f64, f64::max);
        for (a, b) in phi.values().iter().zip(phi2.values()) {
            prop_assert!(frobenius_norm(&(a.matrix() - b.matrix() * u.adjoint())) <= tol().eq_tol * scale);
        }
    }

    #[test]
    fn psd_test_agrees_with_coefficient_oracle(seed in any::<u64>(), m in 1usize..5, q in 1usize..5) {
        let mut rng = rng(seed);
        let n = m * q;
        let mut spectrum: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        if rng.random_bool(0.5) {
            spectrum[0] = -rng.random_range(0.01..1.0);
        }
        let k = kernel_with_spectrum(&mut rng, m, q, &spectrum);
        prop_assert_eq!(
            is_positive_definite(&k, &tol()).unwrap(),
            operator_coefficient_positivity_sample(&k, 200, seed, &tol())
        );
    }

    #[test]
    fn criterion_matches_inclusion(seed in any::<u64>(), m in 1usize..4, q in 1usize..3) {
        let mut rng = rng(seed);
        let p = m * q + 1;
        let psi = random_mapping(&mut rng, m, q, p);
        let phi = if rng.random_bool(0.5) {
            let a = random_matrix(&mut rng, q, q);
            psi.map_values(|v| RandomVariable::new(v.space(), &a * v.matrix())).unwrap()
        } else {
            random_mapping(&mut rng, m, q, p)
        };
        let criterion = subordination_criterion(&phi, &psi, &tol()).unwrap().holds();
        let inclusion = contains(&measurements_space(&psi, &tol()), &measurements_space(&phi, &tol()), &tol()).unwrap();
        prop_assert_eq!(criterion, inclusion);
    }

    #[test]
    fn rkhm_gramian_matches_module_gramian(seed in any::<u64>(), m in 1usize..4, q in 1usize..3, p in 1usize..4) {
        let mut rng = rng(seed);
        let phi = random_mapping(&mut rng, m, q, p);
        let k = covariance_kernel(&phi);
        let a: Vec<ComplexMatrix> = (0..m).map(|_| random_matrix(&mut rng, q, q)).collect();
        let b: Vec<ComplexMatrix> = (0..m).map(|_| random_matrix(&mut rng, q, q)).collect();
        let lift = |c: &[ComplexMatrix]| {
            let mut acc = ComplexMatrix::zeros(q, p);
            for (ci, v) in c.iter().zip(phi.values()) {
                acc += ci * v.matrix();
            }
            RandomVariable::new(phi.space(), acc).unwrap()
        };
        let lhs = gramian(&lift(&a), &lift(&b)).unwrap();
        let rhs = rkhm_gramian(&RkhmElement::new(&k, a.clone()).unwrap(), &RkhmElement::new(&k, b.clone()).unwrap()).unwrap();
        prop_assert!(relative_residual(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn field_covariance_matches_kernel_integral(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let grid = small_grid(&mut rng);
        let f = random_field(&grid, ModuleSpace::new(rng.random_range(1..3), rng.random_range(1..3)).unwrap(), seed);
        let u = field_to_rdf(&f, &cell_basis(&grid), &tol()).unwrap();
        let gamma = f.covariance_kernel();
        let phi = random_test_function(&mut rng, &grid);
        let psi = random_test_function(&mut rng, &grid);
        let c = covariance_distribution(&u, &phi, &psi, &tol()).unwrap();
        prop_assert!(relative_residual(&c.operator, &kernel_to_distribution(&gamma, &phi, &psi).unwrap()) <= tol().eq_tol);
        let swapped = covariance_distribution(&u, &psi, &phi, &tol()).unwrap();
        prop_assert!(relative_residual(&swapped.operator, &c.operator.adjoint()) <= tol().eq_tol);
        let a = cgauss(&mut rng);
        let scaled = covariance_distribution(&u, &phi.scale(a), &psi, &tol()).unwrap();
        prop_assert!(relative_residual(&scaled.operator, &(&c.operator * a)) <= tol().eq_tol);
        let lin = linearity_residual(&u, a, &phi, cgauss(&mut rng), &psi, &tol()).unwrap();
        prop_assert!(lin <= tol().eq_tol);
    }

    #[test]
    fn covariance_distribution_kernel_is_pd(seed in any::<u64>(), count in 1usize..5) {
        let mut rng = rng(seed);
        let grid = small_grid(&mut rng);
        let f = random_field(&grid, ModuleSpace::new(2, 2).unwrap(), seed);
        let u = field_to_rdf(&f, &cell_basis(&grid), &tol()).unwrap();
        let family: Vec<_> = (0..count).map(|_| random_test_function(&mut rng, &grid)).collect();
        let k = covariance_distribution_kernel(&u, &family, &tol()).unwrap();
        prop_assert!(is_positive_definite(&k, &tol()).unwrap());
    }

    #[test]
    fn measure_additivity(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let grid = small_grid(&mut rng);
        let space = ModuleSpace::new(2, 2).unwrap();
        let xi = StochasticMeasure::new(grid.clone(), (0..grid.len()).map(|_| random_variable(&mut rng, space)).collect()).unwrap();
        let labels: Vec<usize> = (0..grid.len()).map(|_| rng.random_range(0..3)).collect();
        let part = |l: usize| CellSet::new(&grid, (0..grid.len()).filter(|&c| labels[c] == l)).unwrap();
        let (a, b, c) = (part(0), part(1), part(2));
        let joint = evaluate(&xi, &a.union(&b).unwrap()).unwrap();
        let split = evaluate(&xi, &a).unwrap().add(&evaluate(&xi, &b).unwrap()).unwrap();
        prop_assert!(frobenius_norm(&(joint.matrix() - split.matrix())) <= tol().eq_tol * module_norm(&joint).max(1.0));
        let tau = bimeasure_of(&xi);
        let lhs = tau.value(&a.union(&b).unwrap(), &c).unwrap();
        let rhs = tau.value(&a, &c).unwrap() + tau.value(&b, &c).unwrap();
        prop_assert!(frobenius_norm(&(&lhs - &rhs)) <= tol().eq_tol * frobenius_norm(&lhs).max(1.0));
        let lhs = tau.value(&c, &a.union(&b).unwrap()).unwrap();
        let rhs = tau.value(&c, &a).unwrap() + tau.value(&c, &b).unwrap();
        prop_assert!(frobenius_norm(&(&lhs - &rhs)) <= tol().eq_tol * frobenius_norm(&lhs).max(1.0));
        let k = tau.kernel_over(&[a, b, c]).unwrap();
        prop_assert!(is_positive_definite(&k, &tol()).unwrap());
    }

    #[test]
    fn measure_covariance_matches_mt_integral(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let grid = small_grid(&mut rng);
        let space = ModuleSpace::new(rng.random_range(1..3), rng.random_range(1..3)).unwrap();
        let xi = StochasticMeasure::new(grid.clone(), (0..grid.len()).map(|_| random_variable(&mut rng, space)).collect()).unwrap();
        let pairs: Vec<_> = (0..3).map(|_| (random_test_function(&mut rng, &grid), random_test_function(&mut rng, &grid))).collect();
        let report = measure_coherence(&xi, &cell_basis(&grid), &pairs, &tol()).unwrap();
        prop_assert!(report.pass());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn semivariation_is_monotone_and_dominated(seed in any::<u64>(), n in 2usize..7, q in 1usize..3, p in 1usize..3) {
        let mut rng = rng(seed);
        let grid = Grid::uniform(1, n, 1.0).unwrap();
        let xi = StochasticMeasure::new(grid.clone(), (0..n).map(|_| random_variable(&mut rng, ModuleSpace::new(q, p).unwrap())).collect()).unwrap();
        let cut = rng.random_range(1..=n);
        let small = CellSet::new(&grid, 0..cut).unwrap();
        let big = CellSet::all(&grid);
        let s_small = semivariation(&xi, &small, SearchStrategy::ExhaustivePhases).unwrap().value;
        let s_big = semivariation(&xi, &big, SearchStrategy::ExhaustivePhases).unwrap().value;
        prop_assert!(s_small <= s_big + tol().eq_tol);
        for strategy in [SearchStrategy::ExhaustivePhases, SearchStrategy::AlternatingAscent { restarts: 3, seed }] {
            let s = semivariation(&xi, &big, strategy).unwrap().value;
            let o = operator_semivariation(&xi, &big, strategy).unwrap().value;
            prop_assert!(s <= o + tol().eq_tol);
        }
    }

    #[test]
    fn wold_split_clauses(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = rng(seed);
        let grid = if rng.random_bool(0.5) { Grid::uniform(1, n, 1.0).unwrap() } else { Grid::uniform(2, n.min(4), 1.0).unwrap() };
        let base = match rng.random_range(0..4) {
            0 => canonical::constant_direction(&grid),
            1 => canonical::innovation(&grid),
            2 => canonical::direct_sum(&grid),
            _ => random_field(&grid, ModuleSpace::new(2, 3).unwrap(), seed),
        };
        let w = random_unitary(&mut rng, base.space().p);
        let field = base.right_mul(&w).unwrap();
        let u = field_to_rdf(&field, &cell_basis(&grid), &tol()).unwrap();
        let chain = ThresholdChain::diagonal(&grid);
        let split = wold_decompose(&u, &chain, &tol()).unwrap();
        let report = verify_split(&u, &chain, &split.deterministic_part, &split.purely_nondeterministic_part, &tol()).unwrap();
        prop_assert!(report.pass(), "{:?}", report.failures());
        for m in &split.structure.modules {
            prop_assert!(contains(m.gspace(), split.structure.remote_past.gspace(), &tol()).unwrap());
        }
        for pair in split.structure.modules.windows(2) {
            prop_assert!(contains(pair[0].gspace(), pair[1].gspace(), &tol()).unwrap());
        }
    }

    #[test]
    fn perturbed_split_is_rejected(seed in any::<u64>(), n in 3usize..6) {
        let mut rng = rng(seed);
        let grid = Grid::uniform(1, n, 1.0).unwrap();
        let w = random_unitary(&mut rng, grid.len());
        let field = canonical::direct_sum(&grid).right_mul(&w).unwrap();
        let u = field_to_rdf(&field, &cell_basis(&grid), &tol()).unwrap();
        let chain = ThresholdChain::diagonal(&grid);
        let split = wold_decompose(&u, &chain, &tol()).unwrap();
        let extra = random_matrix(&mut rng, grid.len(), 1);
        let other = join(split.structure.remote_past.gspace(), &column_span(&extra, &tol()), &tol()).unwrap();
        let (det, pnd) = split_with_projector(&u, &other.projector()).unwrap();
        prop_assert!(!verify_split(&u, &chain, &det, &pnd, &tol()).unwrap().pass());
    }

    #[test]
    fn empirical_kernels_are_pd_and_reproducible(seed in any::<u64>(), m in 1usize..4, q in 1usize..3, n in 1usize..40) {
        let mut rng = rng(seed);
        let k = random_pd_kernel(&mut rng, m, q, m * q);
        let a = sample_gaussian(&k, n, seed, &tol()).unwrap();
        let b = sample_gaussian(&k, n, seed, &tol()).unwrap();
        prop_assert_eq!(&a, &b);
        let emp = empirical_kernel(&a).unwrap();
        prop_assert!(is_positive_definite(&emp.kernel, &tol()).unwrap());
        prop_assert!(kolmogorov_factorize(&emp.kernel, &tol()).is_ok());
    }
}

#[test]
fn operator_subordination_does_not_imply_vector_subordination() {
    let space = ModuleSpace::new(2, 2).unwrap();
    let mut a = ComplexMatrix::zeros(2, 2);
    a[(0, 0)] = Complex64::new(1.0, 0.0);
    let mut b = ComplexMatrix::zeros(2, 2);
    b[(1, 0)] = Complex64::new(1.0, 0.0);
    let psi = StochasticMapping::new(vec!["x".into()], vec![RandomVariable::new(space, a).unwrap()]).unwrap();
    let phi = StochasticMapping::new(vec!["x".into()], vec![RandomVariable::new(space, b).unwrap()]).unwrap();
    let s = is_subordinate(&phi, &psi, &tol()).unwrap();
    assert!(s.operator);
    assert!(!s.vector);
}

#[test]
fn zero_field_split_is_trivial() {
    let grid = Grid::uniform(1, 3, 1.0).unwrap();
    let f = RandomField::zero(grid.clone(), ModuleSpace::new(1, 2).unwrap());
    let u = field_to_rdf(&f, &cell_basis(&grid), &tol()).unwrap();
    let chain = ThresholdChain::diagonal(&grid);
    let split = wold_decompose(&u, &chain, &tol()).unwrap();
    assert!(verify_split(&u, &chain, &split.deterministic_part, &split.purely_nondeterministic_part, &tol()).unwrap().pass());
}
