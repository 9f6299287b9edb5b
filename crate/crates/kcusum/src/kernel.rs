//! Kernel functions over stream observations.
//!
//! A kernel is a symmetric positive-definite similarity measure `k(x, y)`.
//! The Gaussian (RBF) kernel
//!
//! ```text
//! k(x, y) = exp(-||x - y||^2 / (2 sigma2))
//! ```
//!
//! is the one family shipped here; `sigma2 = 1` gives the plain
//! `exp(-||x-y||^2 / 2)` form. The [`KernelSpec`] carries the metadata the
//! statistics and bounds need: the sup bound `||k||_inf` and whether the
//! kernel is nonnegative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stream element: a fixed-dimension real vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    values: Vec<f64>,
}

impl Observation {
    /// Validates that `values` is non-empty and every entry is finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("observation values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "observation coordinate",
            });
        }
        Ok(Observation { values })
    }

    /// One-dimensional observation.
    pub fn scalar(x: f64) -> Result<Self> {
        Observation::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Squared Euclidean distance to `other`. Dimensions must already match.
    pub(crate) fn sq_dist(&self, other: &Observation) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub(crate) fn check_same_dim(&self, other: &Observation) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    /// Consumes the observation, returning its coordinates.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Kernel families understood by [`KernelSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
}

/// A kernel function plus the metadata needed by statistics and bounds.
///
/// For the Gaussian family the sup bound is 1 and the kernel is nonnegative;
/// both are determined by the family so they cannot be set inconsistently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    sigma2: f64,
}

impl KernelSpec {
    /// Gaussian kernel with bandwidth `sigma2 > 0`.
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2", format!("must be positive and finite, got {sigma2}")));
        }
        Ok(KernelSpec {
            family: KernelFamily::Gaussian,
            sigma2,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `||k||_inf`, the sup of `|k|` over all input pairs.
    pub fn sup_bound(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => 1.0,
        }
    }

    /// Whether `k(x, y) >= 0` for all inputs.
    pub fn is_nonnegative(&self) -> bool {
        match self.family {
            KernelFamily::Gaussian => true,
        }
    }

    /// Evaluate `k(x, y)`. Errors on dimension mismatch.
    pub fn eval(&self, x: &Observation, y: &Observation) -> Result<f64> {
        x.check_same_dim(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluation without the dimension check, for hot paths that have
    /// already validated their inputs.
    pub(crate) fn eval_unchecked(&self, x: &Observation, y: &Observation) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-x.sq_dist(y) / (2.0 * self.sigma2)).exp(),
        }
    }
}
