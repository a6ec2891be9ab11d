use deepvote_core::CoreError;
use deepvote_nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("profile with m={m}, n={n} exceeds model bounds m_max={m_max}, n_max={n_max}")]
    Bounds {
        m: usize,
        n: usize,
        m_max: usize,
        n_max: usize,
    },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, ModelError>;
