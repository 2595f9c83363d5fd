//! Scenario runner behind the `gfl` binary.

pub mod error;
pub mod inputs;
pub mod kinds;
pub mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};

use gfl_core::report::Clause;
use serde::Serialize;
use serde_json::{Map, Value};

pub use error::{CliError, CliResult};
pub use scenario::{Kind, Overrides, Scenario, DEFAULT_SEED};

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub pass: bool,
    pub clauses: Vec<Clause>,
    pub artifacts: Map<String, Value>,
}

impl ScenarioReport {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

pub fn run_scenario(s: &Scenario) -> CliResult<ScenarioReport> {
    let mut outcome = kinds::execute(s)?;
    let artifacts = &mut outcome.artifacts;
    artifacts.insert("kind".into(), Value::from(s.kind.as_str()));
    artifacts.insert("seed".into(), Value::from(s.seed));
    artifacts.insert("tolerances".into(), serde_json::to_value(s.tolerance).expect("tolerance serializes"));
    Ok(ScenarioReport {
        scenario: s.name.clone(),
        pass: outcome.report.pass(),
        clauses: outcome.report.clauses,
        artifacts: outcome.artifacts,
    })
}

pub fn run_file(path: &Path, overrides: &Overrides) -> CliResult<ScenarioReport> {
    run_scenario(&Scenario::load(path, overrides)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub file: String,
    pub pass: bool,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ScenarioReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteCounts {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    /// Scenarios that did not run because of a parse or validation error.
    pub errored: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub pass: bool,
    pub counts: SuiteCounts,
    pub results: Vec<SuiteEntry>,
}

impl SuiteSummary {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// The `*.json` files directly inside `dir`, sorted by file name.
pub fn scenario_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Parse(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Parse(format!("{}: {e}", dir.display())))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "json") {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Runs every scenario in `dir` in file-name order. A scenario that fails
/// to load or run is recorded in the summary and the suite continues.
pub fn run_suite(dir: &Path, overrides: &Overrides) -> CliResult<SuiteSummary> {
    let mut counts = SuiteCounts::default();
    let mut results = Vec::new();
    for path in scenario_files(dir)? {
        let file = path.file_name().expect("listed files have names").to_string_lossy().into_owned();
        counts.total += 1;
        let entry = match run_file(&path, overrides) {
            Ok(report) => {
                if report.pass {
                    counts.passed += 1;
                } else {
                    counts.failed += 1;
                }
                SuiteEntry {
                    file,
                    pass: report.pass,
                    exit_code: report.exit_code(),
                    report: Some(report),
                    error: None,
                }
            }
            Err(e) => {
                counts.errored += 1;
                SuiteEntry {
                    file,
                    pass: false,
                    exit_code: e.exit_code(),
                    report: None,
                    error: Some(e.to_string()),
                }
            }
        };
        results.push(entry);
    }
    Ok(SuiteSummary {
        suite: dir.display().to_string(),
        pass: results.iter().all(|r| r.pass),
        counts,
        results,
    })
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.flush().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
