//! Fitting an affine map from training pairs.
//!
//! Three procedures are available:
//!
//! * [`fit_ols`]: closed-form least squares on the mean squared distance.
//! * [`fit_distance_sgd`]: mini-batch descent on the mean (unsquared)
//!   Euclidean distance, starting from the identity.
//! * [`fit_procrustes`]: closed-form scaled orthogonal map plus shift.

mod ols;
mod procrustes;
mod sgd;

pub use ols::fit_ols;
pub use procrustes::fit_procrustes;
pub use sgd::fit_distance_sgd;

use serde::{Deserialize, Serialize};

use crate::embedding::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::map::LinearMap;
use crate::metrics;
use crate::scalar::Real;

pub const LOSS_SQUARED: &str = "mean_squared_distance";
pub const LOSS_DISTANCE: &str = "mean_distance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Ols,
    DistanceSgd,
    Procrustes,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::Ols => "ols",
            FitMethod::DistanceSgd => "distance_sgd",
            FitMethod::Procrustes => "procrustes",
        }
    }

    pub fn loss_name(self) -> &'static str {
        match self {
            FitMethod::DistanceSgd => LOSS_DISTANCE,
            FitMethod::Ols | FitMethod::Procrustes => LOSS_SQUARED,
        }
    }
}

/// Update rule for [`fit_distance_sgd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain gradient step.
    Sgd,
    /// Adam with β = (0.9, 0.999).
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub method: FitMethod,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate after an epoch without
    /// validation improvement.
    pub lr_decay: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Minimum validation-loss decrease that counts as improvement.
    pub tolerance: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            method: FitMethod::Ols,
            max_epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            lr_decay: 0.5,
            patience: 5,
            tolerance: 1e-7,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn distance_sgd() -> Self {
        Self {
            method: FitMethod::DistanceSgd,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T: Real = f64> {
    pub map: LinearMap<T>,
    pub train_loss: T,
    /// `None` for closed-form fits without a validation set.
    pub val_loss: Option<T>,
    pub epochs_run: usize,
    pub converged: bool,
}

impl<T: Real> FitResult<T> {
    /// Whether the least-squares problem was rank deficient.
    pub fn rank_deficient(&self) -> bool {
        self.map
            .provenance
            .get("rank_deficient")
            .and_then(serde_json::Value::as_bool)
            .unwrap_or(false)
    }
}

/// Mean squared distance between mapped sources and targets.
pub fn squared_loss<T: Real>(map: &LinearMap<T>, pairs: &PairedEmbeddings<T>) -> Result<T> {
    metrics::mean_squared_distance(&map.apply(pairs.source())?, pairs.target())
}

/// Mean Euclidean distance between mapped sources and targets.
pub fn distance_loss<T: Real>(map: &LinearMap<T>, pairs: &PairedEmbeddings<T>) -> Result<T> {
    metrics::mean_distance(&map.apply(pairs.source())?, pairs.target())
}

/// Loss in the sense the given method optimizes.
pub fn loss_for<T: Real>(method: FitMethod, map: &LinearMap<T>, pairs: &PairedEmbeddings<T>) -> Result<T> {
    match method {
        FitMethod::DistanceSgd => distance_loss(map, pairs),
        FitMethod::Ols | FitMethod::Procrustes => squared_loss(map, pairs),
    }
}

/// Dispatches on `config.method`. `val` is required for `distance_sgd`;
/// for the closed-form methods it only feeds the reported validation loss.
pub fn fit<T: Real>(
    train: &PairedEmbeddings<T>,
    val: Option<&PairedEmbeddings<T>>,
    config: &FitConfig,
) -> Result<FitResult<T>> {
    let mut result = match config.method {
        FitMethod::Ols => fit_ols(train)?,
        FitMethod::Procrustes => fit_procrustes(train)?,
        FitMethod::DistanceSgd => return fit_distance_sgd(train, val.ok_or(Error::EmptyValidation)?, config),
    };
    if let Some(val) = val.filter(|v| v.count() > 0) {
        result.val_loss = Some(loss_for(config.method, &result.map, val)?);
    }
    Ok(result)
}
