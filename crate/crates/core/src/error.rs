use std::fmt;

/// A single problem found while validating a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_issues(.0))]
    Config(Vec<ConfigIssue>),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("control {control} is not admissible in state {state}")]
    IllegalControl { control: String, state: String },
    #[error("state space exceeds the limit of {limit} states")]
    StateSpaceOverflow { limit: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config(vec![ConfigIssue { path: path.into(), message: message.into() }])
    }
}

pub type Result<T> = std::result::Result<T, Error>;
