use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate pattern space: class templates still collide after {0} redraws")]
    DegeneratePatternSpace(usize),

    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch} (stage {stage}): loss is {loss}")]
    Diverged { stage: u8, epoch: usize, loss: f64 },

    #[error("non-finite loss in finite-difference oracle")]
    NonFiniteLoss,

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
