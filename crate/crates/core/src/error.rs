use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or inconsistent shapes.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("at step {h}, state {s}, action {a}: {source}")]
    Cell {
        h: usize,
        s: usize,
        a: usize,
        source: Box<Error>,
    },
    #[error("episode {episode}: {source}")]
    Episode { episode: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub(crate) fn at_cell(self, h: usize, s: usize, a: usize) -> Self {
        Error::Cell {
            h,
            s,
            a,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_episode(self, episode: usize) -> Self {
        Error::Episode {
            episode,
            source: Box::new(self),
        }
    }

    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Unsupported(_) => "unsupported",
            Error::Cell { source, .. } | Error::Episode { source, .. } => source.category(),
        }
    }
}
