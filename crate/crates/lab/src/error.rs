use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

/// One violated precondition, tagged with the hypothesis it belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Issue {
    /// `(A1)`, `(F1)`, … for structural hypotheses; `required`, `grid`,
    /// `ensemble` and similar for plumbing.
    pub condition: String,
    pub field: String,
    pub message: String,
}

impl Issue {
    pub fn new(condition: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            condition: condition.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn push(&mut self, issue: Issue) {
        self.issues.push(issue);
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_condition(&self, condition: &str) -> bool {
        self.issues.iter().any(|i| i.condition == condition)
    }

    pub fn into_result(self) -> Result<(), LabError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(LabError::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {} {}: {}", issue.condition, issue.field, issue.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid configuration:\n{0}")]
    Validation(ValidationReport),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("{context}: {source}")]
    Numeric {
        context: String,
        #[source]
        source: parabolic_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Output(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) | LabError::Parse(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches experiment context to core errors.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T, LabError>;
}

impl<T> Context<T> for parabolic_core::Result<T> {
    fn context(self, what: &str) -> Result<T, LabError> {
        self.map_err(|source| LabError::Numeric {
            context: what.to_string(),
            source,
        })
    }
}
