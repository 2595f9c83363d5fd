//! Decoding of scenario inputs into library values.
//!
//! Shape errors (wrong JSON types, unknown keys) are parse errors; values
//! that deserialize but break a library invariant are validation errors.

use gfl_core::fields::{bump, cell_basis, cell_indicator, random_field, Grid, RandomField, SampleArray, TestFunction};
use gfl_core::hilbert_module::{ModuleSpace, RandomVariable};
use gfl_core::kernels::OperatorKernel;
use gfl_core::mapping::StochasticMapping;
use gfl_core::measures::{measure_from_field, CellSet, SearchStrategy, StochasticMeasure};
use gfl_core::numeric::{ComplexMatrix, MatrixLiteral};
use gfl_core::wold::{canonical, ThresholdChain};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{parse, CliError, CliResult};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    d: usize,
    n: usize,
    delta: f64,
    #[serde(default)]
    origin: Option<Vec<f64>>,
}

pub fn grid(v: &Value) -> CliResult<Grid> {
    let raw: RawGrid = parse(v, "grid")?;
    let origin = raw.origin.unwrap_or_else(|| vec![0.0; raw.d]);
    Ok(Grid::new(raw.d, raw.n, raw.delta, origin)?)
}

fn matrix(lit: &MatrixLiteral) -> CliResult<ComplexMatrix> {
    Ok(lit.to_matrix()?)
}

fn default_labels(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("x{i}")).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    q: Option<usize>,
    #[serde(default)]
    blocks: Option<Vec<Vec<MatrixLiteral>>>,
    #[serde(default)]
    assembled: Option<MatrixLiteral>,
}

/// `{"labels", "q", "blocks": [[matrix]]}` or `{"q", "assembled": matrix}`.
pub fn kernel(v: &Value) -> CliResult<OperatorKernel> {
    let raw: RawKernel = parse(v, "kernel")?;
    match (raw.blocks, raw.assembled) {
        (Some(blocks), None) => {
            let blocks = blocks
                .iter()
                .map(|row| row.iter().map(matrix).collect::<CliResult<Vec<_>>>())
                .collect::<CliResult<Vec<_>>>()?;
            let q = match raw.q {
                Some(q) => q,
                None => blocks.first().and_then(|r| r.first()).map_or(1, |b| b.nrows()),
            };
            let labels = raw.labels.unwrap_or_else(|| default_labels(blocks.len()));
            Ok(OperatorKernel::new(labels, q, blocks)?)
        }
        (None, Some(lit)) => {
            let a = matrix(&lit)?;
            let q = raw.q.unwrap_or(1);
            if q == 0 || a.nrows() % q != 0 {
                return Err(CliError::Validation(format!(
                    "assembled kernel of size {} is not a multiple of q = {q}",
                    a.nrows()
                )));
            }
            let labels = raw.labels.unwrap_or_else(|| default_labels(a.nrows() / q));
            Ok(OperatorKernel::from_assembled(labels, q, &a)?)
        }
        _ => Err(CliError::Validation("kernel needs exactly one of `blocks` or `assembled`".into())),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMapping {
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    q: Option<usize>,
    #[serde(default)]
    p: Option<usize>,
    values: Vec<MatrixLiteral>,
}

/// `{"labels", "q", "p", "values": [matrix]}`; `q` and `p` default to the first value's shape.
pub fn mapping(v: &Value) -> CliResult<StochasticMapping> {
    let raw: RawMapping = parse(v, "mapping")?;
    let matrices = raw.values.iter().map(matrix).collect::<CliResult<Vec<_>>>()?;
    let first = matrices.first().map(|m| m.shape());
    let q = raw.q.or(first.map(|s| s.0)).unwrap_or(1);
    let p = raw.p.or(first.map(|s| s.1)).unwrap_or(1);
    let space = ModuleSpace::new(q, p)?;
    let values = matrices
        .into_iter()
        .map(|m| RandomVariable::new(space, m))
        .collect::<gfl_core::Result<Vec<_>>>()?;
    let labels = raw.labels.unwrap_or_else(|| default_labels(values.len()));
    Ok(StochasticMapping::new(labels, values)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    generator: String,
    #[serde(default)]
    grid: Option<Value>,
    #[serde(default)]
    q: Option<usize>,
    #[serde(default)]
    p: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    #[serde(default)]
    grid: Option<Value>,
    values: Vec<MatrixLiteral>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    #[serde(default)]
    grid: Option<Value>,
    atoms: Vec<MatrixLiteral>,
}

fn own_grid(v: Option<&Value>, fallback: Option<&Grid>) -> CliResult<Grid> {
    match v {
        Some(v) => grid(v),
        None => fallback
            .cloned()
            .ok_or_else(|| CliError::Validation("no grid given (set one in the input, the scenario or --grid)".into())),
    }
}

fn values_on(grid: &Grid, lits: &[MatrixLiteral]) -> CliResult<Vec<RandomVariable>> {
    if lits.len() != grid.len() {
        return Err(CliError::Validation(format!("{} values for a grid of {} points", lits.len(), grid.len())));
    }
    let values = lits
        .iter()
        .map(|l| Ok(RandomVariable::from_matrix(matrix(l)?)?))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(values)
}

fn generated(raw: RawGenerator, fallback: Option<&Grid>, seed: u64) -> CliResult<RandomField> {
    let g = own_grid(raw.grid.as_ref(), fallback)?;
    let space = || ModuleSpace::new(raw.q.unwrap_or(2), raw.p.unwrap_or(2));
    let field = match raw.generator.as_str() {
        "innovation" => canonical::innovation(&g),
        "constant_direction" => canonical::constant_direction(&g),
        "direct_sum" => canonical::direct_sum(&g),
        "direct_sum_deterministic_block" => canonical::direct_sum_deterministic_block(&g),
        "random" => random_field(&g, space()?, raw.seed.unwrap_or(seed)),
        "zero" => RandomField::zero(g, space()?),
        other => return Err(CliError::Validation(format!("unknown generator `{other}`"))),
    };
    Ok(field)
}

/// A field file `{"grid", "values"}` or a generator `{"generator", "grid", ...}`.
pub fn field(v: &Value, fallback: Option<&Grid>, seed: u64) -> CliResult<RandomField> {
    if v.get("generator").is_some() {
        return generated(parse(v, "field generator")?, fallback, seed);
    }
    let raw: RawField = parse(v, "field")?;
    let g = own_grid(raw.grid.as_ref(), fallback)?;
    let values = values_on(&g, &raw.values)?;
    Ok(RandomField::new(g, values)?)
}

/// A measure file `{"grid", "atoms"}` or a generator, whose field becomes the measure's density.
pub fn measure(v: &Value, fallback: Option<&Grid>, seed: u64) -> CliResult<StochasticMeasure> {
    if v.get("generator").is_some() {
        return Ok(measure_from_field(&generated(parse(v, "measure generator")?, fallback, seed)?));
    }
    let raw: RawMeasure = parse(v, "measure")?;
    let g = own_grid(raw.grid.as_ref(), fallback)?;
    let atoms = values_on(&g, &raw.atoms)?;
    Ok(StochasticMeasure::new(g, atoms)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBump {
    center: Vec<f64>,
    radius: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTestFunction {
    Cell { cell: usize },
    Bump { bump: RawBump },
    Samples(SampleArray),
}

/// `{"re": [...], "im": [...]}`, `{"cell": k}` or `{"bump": {"center", "radius"}}`.
pub fn test_function(v: &Value, grid: &Grid) -> CliResult<TestFunction> {
    let raw: RawTestFunction = parse(v, "test function")?;
    Ok(match raw {
        RawTestFunction::Cell { cell } => cell_indicator(grid, cell)?,
        RawTestFunction::Bump { bump: b } => bump(grid, &b.center, b.radius)?,
        RawTestFunction::Samples(s) => s.to_test_function(grid)?,
    })
}

/// `"cells"` (the default) or a list of test functions.
pub fn basis(v: Option<&Value>, grid: &Grid) -> CliResult<Vec<TestFunction>> {
    match v {
        None => Ok(cell_basis(grid)),
        Some(Value::String(s)) if s == "cells" => Ok(cell_basis(grid)),
        Some(Value::Array(items)) => items.iter().map(|t| test_function(t, grid)).collect(),
        Some(_) => Err(CliError::Parse("basis must be \"cells\" or a list of test functions".into())),
    }
}

/// List of `[φ, ψ]`; absent means every pair of basis functions.
pub fn pairs(v: Option<&Value>, grid: &Grid) -> CliResult<Vec<(TestFunction, TestFunction)>> {
    let Some(v) = v else { return Ok(Vec::new()) };
    let items: Vec<[Value; 2]> = parse(v, "pairs")?;
    items
        .iter()
        .map(|[a, b]| Ok((test_function(a, grid)?, test_function(b, grid)?)))
        .collect()
}

/// `"diagonal"` (the default) or a list of threshold coordinates.
pub fn chain(v: Option<&Value>, grid: &Grid) -> CliResult<ThresholdChain> {
    match v {
        None => Ok(ThresholdChain::diagonal(grid)),
        Some(Value::String(s)) if s == "diagonal" => Ok(ThresholdChain::diagonal(grid)),
        Some(v @ Value::Array(_)) => {
            let thresholds: Vec<Vec<f64>> = parse(v, "chain")?;
            Ok(ThresholdChain::new(grid, thresholds)?)
        }
        Some(_) => Err(CliError::Parse("chain must be \"diagonal\" or a list of coordinates".into())),
    }
}

/// `"all"` (the default) or a list of cell indices.
pub fn cell_set(v: Option<&Value>, grid: &Grid) -> CliResult<CellSet> {
    match v {
        None => Ok(CellSet::all(grid)),
        Some(Value::String(s)) if s == "all" => Ok(CellSet::all(grid)),
        Some(v @ Value::Array(_)) => {
            let cells: Vec<usize> = parse(v, "cell set")?;
            Ok(CellSet::new(grid, cells)?)
        }
        Some(_) => Err(CliError::Parse("set must be \"all\" or a list of cell indices".into())),
    }
}

/// `{"kind": "exhaustive_phases"}` (the default) or
/// `{"kind": "alternating_ascent", "restarts": r, "seed": s}` with `seed` optional.
pub fn strategy(v: Option<&Value>, seed: u64) -> CliResult<SearchStrategy> {
    let Some(v) = v else { return Ok(SearchStrategy::ExhaustivePhases) };
    let mut v = v.clone();
    if let Value::Object(map) = &mut v {
        if map.get("kind").and_then(Value::as_str) == Some("alternating_ascent") {
            map.entry("seed").or_insert(Value::from(seed));
            map.entry("restarts").or_insert(Value::from(4));
        }
    }
    parse(&v, "strategy")
}
