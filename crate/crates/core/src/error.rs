use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Malformed caller input: bad generator index, bad address, det != 1.
    #[error("input error: {0}")]
    Input(String),
    /// Operation undefined for this argument.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configured size or step cap would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),
    /// A precondition the caller was responsible for is not certified.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
