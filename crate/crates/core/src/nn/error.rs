use thiserror::Error;

/// Failures from network construction, evaluation, or training.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("empty input where at least one element is required")]
    EmptyInput,

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),

    #[error("training diverged (non-finite loss); last finite epoch {last_finite_epoch}")]
    Diverged { last_finite_epoch: usize },
}
