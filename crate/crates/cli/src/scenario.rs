use std::fmt;
use std::path::{Path, PathBuf};

use gfl_core::fields::Grid;
use gfl_core::Tolerance;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{parse, CliError, CliResult};
use crate::inputs;

/// Seed used when neither the scenario nor the command line gives one.
pub const DEFAULT_SEED: u64 = 20_240_601;

const MAX_REFERENCE_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Factorize,
    PdCheck,
    Subordination,
    RdfCoherence,
    MeasureCoherence,
    Semivariation,
    Wold,
    Simulate,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Factorize,
        Kind::PdCheck,
        Kind::Subordination,
        Kind::RdfCoherence,
        Kind::MeasureCoherence,
        Kind::Semivariation,
        Kind::Wold,
        Kind::Simulate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Factorize => "factorize",
            Kind::PdCheck => "pd_check",
            Kind::Subordination => "subordination",
            Kind::RdfCoherence => "rdf_coherence",
            Kind::MeasureCoherence => "measure_coherence",
            Kind::Semivariation => "semivariation",
            Kind::Wold => "wold",
            Kind::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    kind: Option<Kind>,
    #[serde(default)]
    inputs: Option<Value>,
    #[serde(default)]
    tolerances: Option<RawTolerances>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    grid: Option<Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    rank_tol: Option<f64>,
    psd_tol: Option<f64>,
    eq_tol: Option<f64>,
}

/// Command-line settings that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub rank_tol: Option<f64>,
    pub psd_tol: Option<f64>,
    pub eq_tol: Option<f64>,
    pub seed: Option<u64>,
    /// Used by inputs that carry no grid of their own.
    pub grid: Option<Grid>,
    /// Kind required by a kind-specific subcommand.
    pub kind: Option<Kind>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    /// Inputs with every `{"file": ...}` reference replaced by the file contents.
    pub inputs: Value,
    pub tolerance: Tolerance,
    pub seed: u64,
    pub grid: Option<Grid>,
    pub path: PathBuf,
}

impl Scenario {
    pub fn from_value(value: Value, path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let value = resolve_references(value, base, 0)?;
        let raw: RawScenario = parse(&value, "scenario")?;

        let kind = match (raw.kind, overrides.kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Validation(format!("scenario kind is `{a}` but `{b}` was requested")));
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(CliError::Parse("scenario: missing field `kind`".into())),
        };

        let defaults = Tolerance::default();
        let file = raw.tolerances.unwrap_or_default();
        let tolerance = Tolerance {
            rank_tol: overrides.rank_tol.or(file.rank_tol).unwrap_or(defaults.rank_tol),
            psd_tol: overrides.psd_tol.or(file.psd_tol).unwrap_or(defaults.psd_tol),
            eq_tol: overrides.eq_tol.or(file.eq_tol).unwrap_or(defaults.eq_tol),
        };
        tolerance.validate()?;

        let grid = match &raw.grid {
            Some(v) => Some(inputs::grid(v)?),
            None => overrides.grid.clone(),
        };
        let inputs = raw.inputs.unwrap_or_else(|| Value::Object(Default::default()));
        if !inputs.is_object() {
            return Err(CliError::Parse("scenario: `inputs` must be an object".into()));
        }
        Ok(Self {
            name: raw.name,
            kind,
            inputs,
            tolerance,
            seed: overrides.seed.or(raw.seed).unwrap_or(DEFAULT_SEED),
            grid,
            path: path.to_path_buf(),
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        Self::from_value(read_json(path)?, path, overrides)
    }

    pub fn input(&self, key: &str) -> Option<&Value> {
        self.inputs.get(key)
    }

    pub fn require(&self, key: &str) -> CliResult<&Value> {
        self.input(key)
            .ok_or_else(|| CliError::Validation(format!("{} scenario requires input `{key}`", self.kind)))
    }
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Replaces each object of the exact form `{"file": "relative/path"}` by the
/// JSON it points to, resolving nested references against the referring file.
fn resolve_references(value: Value, base: &Path, depth: usize) -> CliResult<Value> {
    if depth > MAX_REFERENCE_DEPTH {
        return Err(CliError::Parse("file references nest too deeply".into()));
    }
    match value {
        Value::Object(map) if map.len() == 1 && map.get("file").is_some_and(Value::is_string) => {
            let rel = map["file"].as_str().expect("checked string");
            let path = base.join(rel);
            let loaded = read_json(&path)?;
            let next_base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| base.to_path_buf());
            resolve_references(loaded, &next_base, depth + 1)
        }
        Value::Object(map) => map
            .into_iter()
            .map(|(k, v)| Ok((k, resolve_references(v, base, depth)?)))
            .collect::<CliResult<serde_json::Map<_, _>>>()
            .map(Value::Object),
        Value::Array(items) => items
            .into_iter()
            .map(|v| resolve_references(v, base, depth))
            .collect::<CliResult<Vec<_>>>()
            .map(Value::Array),
        other => Ok(other),
    }
}
