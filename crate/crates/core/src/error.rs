use std::fmt;

/// Location inside a configuration or netlist file (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("configuration error{}: {message}", fmt_loc(.location))]
    Config {
        message: String,
        location: Option<Location>,
    },

    #[error("unknown reference: {0}")]
    Reference(String),

    #[error("physics error: {0}")]
    Physics(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("convergence failure after {iterations} iterations: {message}")]
    NoConvergence { iterations: usize, message: String },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("unsupported in this analysis: {0}")]
    Capability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("export error: {0}")]
    Export(String),

    #[error("parse error at {location}: {message}")]
    Parse { message: String, location: Location },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_loc(loc: &Option<Location>) -> String {
    match loc {
        Some(l) => format!(" at {l}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
            location: None,
        }
    }

    pub fn config_at(message: impl Into<String>, location: Location) -> Self {
        Error::Config {
            message: message.into(),
            location: Some(location),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end:
    /// 1 configuration, 2 solver/convergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Reference(_)
            | Error::Parse { .. }
            | Error::Input(_)
            | Error::Geometry(_)
            | Error::Resource(_) => 1,
            Error::Io { .. } => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
