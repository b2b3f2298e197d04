use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Format,
    Domain,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Format => 2,
            ErrorKind::Domain => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Format { context: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("unknown object type: {0:?}")]
    UnknownObjectType(String),

    #[error("unknown modality: {0:?}")]
    UnknownModality(String),

    #[error("unknown anatomic site: {0:?}")]
    UnknownSite(String),

    #[error("ontology: {0}")]
    Ontology(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Usage(_) => ErrorKind::Usage,
            Error::Io { .. } | Error::Format { .. } | Error::Ontology(_) => ErrorKind::Format,
            Error::Domain(_)
            | Error::Fit(_)
            | Error::UnknownObjectType(_)
            | Error::UnknownModality(_)
            | Error::UnknownSite(_) => ErrorKind::Domain,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
