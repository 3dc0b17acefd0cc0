//! Per-layer activation functions.

use serde::{Deserialize, Serialize};

/// Element-wise activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    /// `max(0, z)`; the default for hidden layers.
    Relu,
    /// `1 / (1 + exp(-z))`, maps into (0, 1); used for decision outputs.
    Sigmoid,
    /// Identity; used for reconstruction outputs.
    Linear,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            ActivationKind::Linear => z,
        }
    }

    /// Derivative dA/dz expressed in terms of the post-activation value `a`.
    ///
    /// All three variants admit this form, which lets the backward pass run
    /// off the stored activations alone. ReLU uses subgradient 0 at z = 0.
    #[inline]
    pub fn grad_from_output(self, a: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => a * (1.0 - a),
            ActivationKind::Linear => 1.0,
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActivationKind::Relu => write!(f, "relu"),
            ActivationKind::Sigmoid => write!(f, "sigmoid"),
            ActivationKind::Linear => write!(f, "linear"),
        }
    }
}
