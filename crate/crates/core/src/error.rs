use thiserror::Error;

/// Errors produced by parsing, graph construction, the network, training and
/// evaluation.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("sdf parse error: {0}")]
    SdfParse(String),
    #[error("pdb parse error: {0}")]
    PdbParse(String),
    #[error("pocket selection: {0}")]
    Pocket(String),
    #[error("featurization: {0}")]
    Featurize(String),
    #[error("graph: {0}")]
    Graph(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("network: {0}")]
    Net(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training: {0}")]
    Train(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
