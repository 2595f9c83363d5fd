use gfl_core::fields::{covariance_distribution, covariance_distribution_kernel, field_to_rdf, kernel_to_distribution, linearity_residual, TestFunction};
use gfl_core::kernels::{
    covariance_kernel, kolmogorov_factorize, operator_coefficient_positivity_sample, subordination_criterion, OperatorKernel,
};
use gfl_core::mapping::{domain_summary, is_subordinate};
use gfl_core::measures::{bimeasure_of, coherence_check, measure_coherence, operator_semivariation, semivariation, CellSet};
use gfl_core::numeric::{hermitian_eig, hermitian_residual, numerical_rank, relative_residual};
use gfl_core::report::{Clause, Report};
use gfl_core::simulate::{convergence_report, empirical_kernel, sample_gaussian, seed_list, RATIO_BAND};
use gfl_core::wold::{classify_both, verify_split, wold_coherence_with_basis, wold_decompose};
use gfl_core::{Error, Tolerance};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{parse, CliError, CliResult};
use crate::inputs;
use crate::scenario::{Kind, Scenario};

const DEFAULT_SAMPLE_SIZES: [usize; 3] = [400, 1600, 6400];
const DEFAULT_SEED_COUNT: usize = 8;
const DEFAULT_ORACLE_TRIALS: usize = 64;

pub struct Outcome {
    pub report: Report,
    pub artifacts: Map<String, Value>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            report: Report::new(),
            artifacts: Map::new(),
        }
    }

    fn artifact(&mut self, key: &str, value: impl serde::Serialize) {
        let v = serde_json::to_value(value).expect("artifacts serialize");
        self.artifacts.insert(key.to_string(), v);
    }
}

pub fn execute(s: &Scenario) -> CliResult<Outcome> {
    match s.kind {
        Kind::Factorize => factorize(s),
        Kind::PdCheck => pd_check(s),
        Kind::Subordination => subordination(s),
        Kind::RdfCoherence => rdf_coherence(s),
        Kind::MeasureCoherence => measure_coherence_kind(s),
        Kind::Semivariation => semivariation_kind(s),
        Kind::Wold => wold(s),
        Kind::Simulate => simulate(s),
    }
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

/// `hermitian` and `min_eigenvalue` clauses; true when both pass.
fn positivity(k: &OperatorKernel, tol: &Tolerance, out: &mut Outcome) -> CliResult<bool> {
    let a = k.assemble();
    let herm = hermitian_residual(&a);
    let herm_ok = herm <= tol.eq_tol;
    out.report.check("hermitian", herm, tol.eq_tol);
    if !herm_ok {
        out.report.push(Clause::not_applicable("min_eigenvalue", tol.psd_tol));
        return Ok(false);
    }
    let eig = hermitian_eig(&a, tol)?;
    let scale = eig.max_abs();
    let min = eig.min().unwrap_or(0.0);
    let relative = if scale == 0.0 { 0.0 } else { min / scale };
    out.artifact("eigenvalues", &eig.values);
    out.artifact("min_eigenvalue", min);
    out.artifact("relative_min_eigenvalue", relative);
    let ok = relative >= -tol.psd_tol;
    out.report.push(Clause::judged("min_eigenvalue", ok, (-relative).max(0.0), tol.psd_tol));
    Ok(ok)
}

/// Passes when the smallest eigenvalue of `k` is at least `-psd_tol` times the largest magnitude.
fn positive_clause(name: &str, k: &OperatorKernel, tol: &Tolerance) -> CliResult<Clause> {
    let eig = hermitian_eig(&k.assemble(), tol)?;
    let relative = if eig.max_abs() == 0.0 { 0.0 } else { eig.min().unwrap_or(0.0) / eig.max_abs() };
    Ok(Clause::judged(name, relative >= -tol.psd_tol, (-relative).max(0.0), tol.psd_tol))
}

fn factorize(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let k = inputs::kernel(s.require("kernel")?)?;
    let mut out = Outcome::new();
    if !positivity(&k, tol, &mut out)? {
        out.report.push(Clause::not_applicable("round_trip", tol.eq_tol));
        out.report.push(Clause::not_applicable("minimal_dimension", 0.0));
        return Ok(out);
    }
    let phi = match kolmogorov_factorize(&k, tol) {
        Ok(phi) => phi,
        Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
            out.report.push(Clause::judged("round_trip", false, min_eigenvalue.abs(), tol.eq_tol));
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };
    let residual = relative_residual(&covariance_kernel(&phi).assemble(), &k.assemble());
    out.report.check("round_trip", residual, tol.eq_tol);
    let rank = numerical_rank(&k.assemble(), tol);
    let p = phi.space().p;
    let expected = rank.max(1);
    out.report
        .push(Clause::judged("minimal_dimension", p == expected, p.abs_diff(expected) as f64, 0.0));
    out.artifact("rank", rank);
    out.artifact("p", p);
    out.artifact("mapping", &phi);
    Ok(out)
}

fn pd_check(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let k = match (s.input("kernel"), s.input("mapping")) {
        (Some(v), None) => inputs::kernel(v)?,
        (None, Some(v)) => covariance_kernel(&inputs::mapping(v)?),
        _ => return Err(CliError::Validation("pd_check needs exactly one of `kernel` or `mapping`".into())),
    };
    let trials: usize = match s.input("oracle_trials") {
        Some(v) => parse(v, "oracle_trials")?,
        None => DEFAULT_ORACLE_TRIALS,
    };
    let mut out = Outcome::new();
    let pd = positivity(&k, tol, &mut out)?;
    out.artifact("positive_definite", pd);
    if trials > 0 && out.report.clause("min_eigenvalue").is_some_and(|c| c.status != gfl_core::report::ClauseStatus::NotApplicable) {
        let oracle = operator_coefficient_positivity_sample(&k, trials, s.seed, tol);
        out.artifact("coefficient_oracle_positive", oracle);
        out.report
            .push(Clause::judged("coefficient_oracle_agrees", oracle == pd, flag(oracle == pd), 0.0));
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Expectation {
    #[serde(default)]
    operator: Option<bool>,
    #[serde(default)]
    vector: Option<bool>,
}

fn subordination(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let phi = inputs::mapping(s.require("phi")?)?;
    let psi = inputs::mapping(s.require("psi")?)?;
    let sub = is_subordinate(&phi, &psi, tol)?;
    let crit = subordination_criterion(&phi, &psi, tol)?;
    let mut out = Outcome::new();
    let agree = crit.holds() == sub.operator;
    out.report.push(Clause::judged("criterion_matches_inclusion", agree, flag(agree), 0.0));
    let implied = !sub.vector || sub.operator;
    out.report.push(Clause::judged("vector_implies_operator", implied, flag(implied), 0.0));
    if let Some(v) = s.input("expect") {
        let e: Expectation = parse(v, "expect")?;
        if let Some(op) = e.operator {
            out.report.push(Clause::judged("expected_operator", op == sub.operator, flag(op == sub.operator), 0.0));
        }
        if let Some(vec) = e.vector {
            out.report.push(Clause::judged("expected_vector", vec == sub.vector, flag(vec == sub.vector), 0.0));
        }
    }
    let (dp, dq) = (domain_summary(&phi, tol), domain_summary(&psi, tol));
    out.artifact("operator_subordinate", sub.operator);
    out.artifact("vector_subordinate", sub.vector);
    out.artifact("criterion", &crit);
    out.artifact("phi_gdim", dp.modular_gdim);
    out.artifact("psi_gdim", dq.modular_gdim);
    out.artifact("phi_vector_dim", dp.vector_dim);
    out.artifact("psi_vector_dim", dq.vector_dim);
    Ok(out)
}

fn pair_family(basis: &[TestFunction], pairs: &[(TestFunction, TestFunction)]) -> (Vec<(TestFunction, TestFunction)>, Vec<TestFunction>) {
    if pairs.is_empty() {
        let all = basis
            .iter()
            .flat_map(|a| basis.iter().map(move |b| (a.clone(), b.clone())))
            .collect();
        return (all, basis.to_vec());
    }
    let mut family: Vec<TestFunction> = Vec::new();
    for (a, b) in pairs {
        for t in [a, b] {
            if !family.contains(t) {
                family.push(t.clone());
            }
        }
    }
    (pairs.to_vec(), family)
}

fn rdf_coherence(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let field = inputs::field(s.require("field")?, s.grid.as_ref(), s.seed)?;
    let grid = field.grid().clone();
    let basis = inputs::basis(s.input("basis"), &grid)?;
    let given = inputs::pairs(s.input("pairs"), &grid)?;
    let u = field_to_rdf(&field, &basis, tol)?;
    let gamma = field.covariance_kernel();
    let (pairs, family) = pair_family(&basis, &given);

    let (alpha, beta) = (Complex64::new(0.6, -0.8), Complex64::new(-1.5, 0.5));
    let (mut kernel_res, mut adjoint_res, mut linear_res) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (phi, psi) in &pairs {
        let c = covariance_distribution(&u, phi, psi, tol)?;
        kernel_res = kernel_res.max(relative_residual(&c.operator, &kernel_to_distribution(&gamma, phi, psi)?));
        let swapped = covariance_distribution(&u, psi, phi, tol)?;
        adjoint_res = adjoint_res.max(relative_residual(&swapped.operator, &c.operator.adjoint()));
        linear_res = linear_res.max(linearity_residual(&u, alpha, phi, beta, psi, tol)?);
    }
    let mut out = Outcome::new();
    out.report.check("covariance_equals_kernel_integral", kernel_res, tol.eq_tol);
    out.report.check("adjoint_symmetry", adjoint_res, tol.eq_tol);
    out.report.check("linearity", linear_res, tol.eq_tol);
    let k = covariance_distribution_kernel(&u, &family, tol)?;
    out.report.push(positive_clause("covariance_kernel_positive_definite", &k, tol)?);
    out.report.extend("coherence.", coherence_check(&field, &basis, &given, tol)?);
    out.artifact("grid", &grid);
    out.artifact("basis_size", basis.len());
    out.artifact("spans_grid", u.spans_grid(tol));
    out.artifact("pair_count", pairs.len());
    Ok(out)
}

fn measure_coherence_kind(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let xi = inputs::measure(s.require("measure")?, s.grid.as_ref(), s.seed)?;
    let grid = xi.grid().clone();
    let basis = inputs::basis(s.input("basis"), &grid)?;
    let pairs = inputs::pairs(s.input("pairs"), &grid)?;
    let mut out = Outcome::new();
    out.report.extend("", measure_coherence(&xi, &basis, &pairs, tol)?);
    let cells: Vec<CellSet> = (0..grid.len()).map(|c| CellSet::new(&grid, [c])).collect::<gfl_core::Result<_>>()?;
    let k = bimeasure_of(&xi).kernel_over(&cells)?;
    out.report.push(positive_clause("bimeasure_positive_definite", &k, tol)?);
    out.artifact("grid", &grid);
    out.artifact("cells", grid.len());
    out.artifact("q", xi.space().q);
    out.artifact("p", xi.space().p);
    Ok(out)
}

fn semivariation_kind(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let xi = inputs::measure(s.require("measure")?, s.grid.as_ref(), s.seed)?;
    let grid = xi.grid().clone();
    let set = inputs::cell_set(s.input("set"), &grid)?;
    let strategy = inputs::strategy(s.input("strategy"), s.seed)?;
    let scalar = semivariation(&xi, &set, strategy)?;
    let operator = operator_semivariation(&xi, &set, strategy)?;
    let mut out = Outcome::new();

    let slack = tol.eq_tol * operator.value.max(1.0);
    out.report.push(Clause::judged(
        "scalar_not_above_operator",
        scalar.value <= operator.value + slack,
        (scalar.value - operator.value).max(0.0),
        slack,
    ));
    let all = CellSet::all(&grid);
    if set != all {
        match semivariation(&xi, &all, strategy) {
            Ok(whole) => {
                let slack = tol.eq_tol * whole.value.max(1.0);
                out.report.push(Clause::judged(
                    "monotone_in_set",
                    scalar.value <= whole.value + slack,
                    (scalar.value - whole.value).max(0.0),
                    slack,
                ));
            }
            Err(Error::TooLarge { .. }) => out.report.push(Clause::not_applicable("monotone_in_set", tol.eq_tol)),
            Err(e) => return Err(e.into()),
        }
    }
    for (key, value) in [("expected", scalar.value), ("expected_operator", operator.value)] {
        if let Some(v) = s.input(key) {
            let e: f64 = parse(v, key)?;
            let residual = (value - e).abs() / e.abs().max(1.0);
            out.report.check(format!("matches_{key}"), residual, tol.eq_tol);
        }
    }
    out.artifact("scalar", scalar.value);
    out.artifact("operator", operator.value);
    out.artifact("scalar_exact_on_grid", scalar.exact_on_grid);
    out.artifact("operator_exact_on_grid", operator.exact_on_grid);
    out.artifact("converged", scalar.converged && operator.converged);
    out.artifact("set", set.iter().collect::<Vec<_>>());
    out.artifact("strategy", strategy);
    Ok(out)
}

fn wold(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let field = inputs::field(s.require("field")?, s.grid.as_ref(), s.seed)?;
    let grid = field.grid().clone();
    let chain = inputs::chain(s.input("chain"), &grid)?;
    let basis = inputs::basis(s.input("basis"), &grid)?;
    let u = field_to_rdf(&field, &basis, tol)?;
    let split = wold_decompose(&u, &chain, tol)?;
    let classes = classify_both(&u, &chain, tol)?;
    let mut out = Outcome::new();
    out.report.extend(
        "split.",
        verify_split(&u, &chain, &split.deterministic_part, &split.purely_nondeterministic_part, tol)?,
    );
    out.report.extend("coherence.", wold_coherence_with_basis(&field, &basis, &chain, tol)?);
    if let Some(v) = s.input("expect") {
        let expected: String = parse(v, "expect")?;
        let ok = expected == classes.operator.as_str();
        out.report.push(Clause::judged("expected_classification", ok, flag(ok), 0.0));
    }
    out.artifact("classification", classes.operator.as_str());
    out.artifact("vector_classification", classes.vector.as_str());
    out.artifact("thresholds", chain.thresholds());
    out.artifact("gdims", split.structure.gdims());
    out.artifact("remote_past_gdim", split.structure.remote_past.gdim());
    out.artifact("domain_gdim", split.structure.domain.gdim());
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Seeds {
    Count(usize),
    List(Vec<u64>),
}

fn simulate(s: &Scenario) -> CliResult<Outcome> {
    let tol = &s.tolerance;
    let k = inputs::kernel(s.require("kernel")?)?;
    let ns: Vec<usize> = match s.input("ns") {
        Some(v) => parse(v, "ns")?,
        None => DEFAULT_SAMPLE_SIZES.to_vec(),
    };
    if ns.is_empty() || ns.contains(&0) {
        return Err(CliError::Validation("`ns` must list positive sample sizes".into()));
    }
    let seeds = match s.input("seeds") {
        Some(v) => match parse::<Seeds>(v, "seeds")? {
            Seeds::Count(c) => seed_list(s.seed, c),
            Seeds::List(l) => l,
        },
        None => seed_list(s.seed, DEFAULT_SEED_COUNT),
    };
    if seeds.is_empty() {
        return Err(CliError::Validation("at least one seed is required".into()));
    }
    let mut out = Outcome::new();
    if !positivity(&k, tol, &mut out)? {
        out.report.push(Clause::not_applicable("error_decreases", 0.0));
        return Ok(out);
    }
    let rep = convergence_report(&k, &ns, &seeds, tol)?;
    out.report.extend("", rep.to_report());
    let largest = *ns.iter().max().expect("nonempty");
    let emp = empirical_kernel(&sample_gaussian(&k, largest, seeds[0], tol)?)?;
    out.report.push(positive_clause("empirical_kernel_positive_definite", &emp.kernel, tol)?);
    out.artifact("rows", &rep.rows);
    out.artifact("ratios", &rep.ratios);
    out.artifact("flagged", rep.flagged);
    out.artifact("ratio_band", json!({"centre": RATIO_BAND.0, "half_width": RATIO_BAND.1}));
    out.artifact("seeds", &seeds);
    Ok(out)
}
