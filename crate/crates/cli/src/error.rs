use crate::io::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    /// A failure inside one of the numerical modules, tagged with its name.
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: rescaled_core::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write trace: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Tag a core error with the module it came from.
pub trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> InModule<T> for rescaled_core::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { module, source })
    }
}
