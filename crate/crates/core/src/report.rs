//! Pass/fail clauses with the residual and tolerance each was judged by.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub status: ClauseStatus,
}

impl Clause {
    /// Passes when `residual <= tol`; a non-finite residual fails.
    pub fn check(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self::judged(name, residual <= tol, residual, tol)
    }

    pub fn judged(name: impl Into<String>, ok: bool, residual: f64, tol: f64) -> Self {
        let ok = ok && !residual.is_nan();
        Self {
            name: name.into(),
            residual,
            tol,
            pass: ok,
            status: if ok { ClauseStatus::Pass } else { ClauseStatus::Fail },
        }
    }

    /// Does not count against the report.
    pub fn not_applicable(name: impl Into<String>, tol: f64) -> Self {
        Self {
            name: name.into(),
            residual: 0.0,
            tol,
            pass: true,
            status: ClauseStatus::NotApplicable,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub clauses: Vec<Clause>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, clause: Clause) {
        self.clauses.push(clause);
    }

    pub fn check(&mut self, name: impl Into<String>, residual: f64, tol: f64) {
        self.push(Clause::check(name, residual, tol));
    }

    pub fn extend(&mut self, prefix: &str, other: Report) {
        for mut c in other.clauses {
            c.name = format!("{prefix}{}", c.name);
            self.clauses.push(c);
        }
    }

    pub fn pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| !c.pass).collect()
    }
}
