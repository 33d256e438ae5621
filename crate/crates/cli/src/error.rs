use std::fmt;

/// Failure of a subcommand, classified by the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values (exit 64).
    Usage(String),
    /// Unreadable, unwritable or malformed files (exit 2).
    Input(String),
    /// Well-formed input the solver cannot handle, such as a disconnected
    /// graph (exit 3).
    Unsolvable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 64,
            Self::Input(_) => 2,
            Self::Unsolvable(_) => 3,
        }
    }

    /// Wraps a library error raised while reading or writing `path`.
    pub fn input(path: &std::path::Path, err: cara::Error) -> Self {
        match err {
            cara::Error::NotConnected { .. } | cara::Error::DegenerateWeights(_) => Self::solve(err),
            other => Self::Input(format!("{}: {other}", path.display())),
        }
    }

    /// Wraps a library error raised while solving.
    pub fn solve(err: cara::Error) -> Self {
        match err {
            cara::Error::NotConnected { components } => {
                let mut msg = format!("graph is not connected: {} components", components.len());
                for (k, c) in components.iter().enumerate() {
                    let ids: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                    msg.push_str(&format!("\n  component {k} ({} vertices): {}", c.len(), ids.join(" ")));
                }
                Self::Unsolvable(msg)
            }
            cara::Error::Io(e) => Self::Input(e.to_string()),
            cara::Error::Parse { .. } | cara::Error::DuplicateEdge(..) => Self::Input(err.to_string()),
            other => Self::Unsolvable(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Input(m) | Self::Unsolvable(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
