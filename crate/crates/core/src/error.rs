use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a closed-form model.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario or experiment configuration cannot be realized.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was applied to an entity in the wrong state.
    #[error("state error: {0}")]
    State(String),

    /// Tensor shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A loss or gradient became NaN or infinite; training halts.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Packet routing failed at a node.
    #[error("routing error: {0}")]
    Routing(String),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
