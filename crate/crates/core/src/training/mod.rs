//! Residual losses, their parameter gradients, and training drivers.
//!
//! A network `u_N` enters the discrete problem only through its interpolant
//! `π_h u_N`, i.e. its values at the trial-space nodes. The gradient of a
//! loss with respect to the network parameters is therefore
//! `vjp_params(nodes, (∂r/∂u)ᵀ s)` where `s` is the loss cotangent on `r`.

mod forward;
mod inverse;
mod optim;

use thiserror::Error;

pub use forward::{loss_and_grad, train_forward, Feinn, ReportRow, TrainOptions, TrainReport};
pub use inverse::{train_inverse, InverseProblem, InverseReport, InverseRow, InverseSchedule, ObservationSet};
pub use optim::{optimize, IterInfo, LineSearch, Method, OptimResult, OptimizerOptions, Termination};

use crate::nn::NnError;
use crate::weakforms::{AssemblyError, GramOperator};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss {loss} at iteration {iter}")]
    NonFinite { iter: usize, loss: f64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Which norm of the residual is minimised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    /// `Σ |r_i|`.
    L1,
    /// `½ ‖r‖²`.
    #[default]
    L2,
    /// `½ rᵀ B⁻¹ r` with `B` the test-space Gram matrix.
    Dual,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
            LossKind::Dual => "dual",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "l1" => Some(LossKind::L1),
            "l2" => Some(LossKind::L2),
            "dual" => Some(LossKind::Dual),
            _ => None,
        }
    }
}

/// A loss kind together with the Gram operator the dual loss needs.
#[derive(Debug, Clone)]
pub struct LossConfig {
    kind: LossKind,
    gram: Option<GramOperator>,
}

impl LossConfig {
    pub fn l1() -> Self {
        LossConfig { kind: LossKind::L1, gram: None }
    }

    pub fn l2() -> Self {
        LossConfig { kind: LossKind::L2, gram: None }
    }

    pub fn dual(gram: GramOperator) -> Self {
        LossConfig { kind: LossKind::Dual, gram: Some(gram) }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn gram(&self) -> Option<&GramOperator> {
        self.gram.as_ref()
    }

    /// Loss value and its cotangent `s = ∂loss/∂r`.
    pub fn evaluate(&self, r: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
        match self.kind {
            LossKind::L1 => Ok((r.iter().map(|x| x.abs()).sum(), r.iter().map(|&x| crate::nn::sign(x)).collect())),
            LossKind::L2 => Ok((0.5 * crate::linalg::dot(r, r), r.to_vec())),
            LossKind::Dual => {
                let gram =
                    self.gram.as_ref().ok_or_else(|| TrainError::Config("dual loss needs a Gram operator".into()))?;
                let riesz = gram.apply_riesz(r)?;
                Ok((0.5 * riesz.dual_norm * riesz.dual_norm, riesz.z))
            }
        }
    }
}
