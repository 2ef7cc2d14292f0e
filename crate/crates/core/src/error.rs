use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes disagree. `layer` names the offending MLP layer when known.
    #[error("shape mismatch in {context}{}: expected {expected}, got {got}", layer.map(|l| format!(" (layer {l})")).unwrap_or_default())]
    Shape {
        context: &'static str,
        layer: Option<usize>,
        expected: String,
        got: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset spec: {0}")]
    Spec(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("label out of range: {0}")]
    Label(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            context,
            layer: None,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for failures caused by the numbers themselves (NaN, Inf).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
