//! Sampleable distributions, log-likelihood-ratio models, and generated
//! streams.
//!
//! Three families cover the evaluation tasks:
//!
//! * `DiagonalGaussian` — independent normals per component;
//! * `ComponentScaledGaussian` — draw from a base distribution, pick one
//!   component uniformly at random, and multiply its value by a scale
//!   factor (the component index is redrawn for every observation);
//! * `ComponentwiseUniform` — independent `U[-half_width, +half_width]`
//!   per component.
//!
//! Sampling is deterministic given the generator state; the harness hands
//! each replicate its own ChaCha8 stream (see [`crate::rng`]).

use rand::Rng;
use rand_distr::{Distribution as RandDistribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::Observation;

/// A sampleable probability law on fixed-dimension real vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    DiagonalGaussian {
        mean: Vec<f64>,
        variances: Vec<f64>,
    },
    ComponentScaledGaussian {
        base: Box<Distribution>,
        scale_factor: f64,
    },
    ComponentwiseUniform {
        dim: usize,
        half_width: f64,
    },
}

impl Distribution {
    /// Independent normals with the given per-component means and variances.
    pub fn diagonal_gaussian(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::EmptyInput("mean"));
        }
        if mean.len() != variances.len() {
            return Err(Error::DimensionMismatch {
                left: mean.len(),
                right: variances.len(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite { context: "gaussian mean" });
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("variances", "must be strictly positive and finite"));
        }
        Ok(Distribution::DiagonalGaussian { mean, variances })
    }

    /// Draws from `base`, then scales one uniformly chosen component's value
    /// by `scale_factor`. The index is redrawn per observation.
    pub fn component_scaled(base: Distribution, scale_factor: f64) -> Result<Self> {
        if !scale_factor.is_finite() {
            return Err(Error::NonFinite { context: "scale_factor" });
        }
        Ok(Distribution::ComponentScaledGaussian {
            base: Box::new(base),
            scale_factor,
        })
    }

    /// Independent `U[-half_width, +half_width]` per component.
    pub fn componentwise_uniform(dim: usize, half_width: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid("half_width", format!("must be positive, got {half_width}")));
        }
        Ok(Distribution::ComponentwiseUniform { dim, half_width })
    }

    pub fn dim(&self) -> usize {
        match self {
            Distribution::DiagonalGaussian { mean, .. } => mean.len(),
            Distribution::ComponentScaledGaussian { base, .. } => base.dim(),
            Distribution::ComponentwiseUniform { dim, .. } => *dim,
        }
    }

    /// One draw. Deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Observation {
        match self {
            Distribution::DiagonalGaussian { mean, variances } => {
                let values = mean
                    .iter()
                    .zip(variances.iter())
                    .map(|(m, v)| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + v.sqrt() * z
                    })
                    .collect();
                Observation::new(values).expect("gaussian draw is finite")
            }
            Distribution::ComponentScaledGaussian { base, scale_factor } => {
                let mut values = base.sample(rng).into_values();
                let idx = rng.random_range(0..values.len());
                values[idx] *= scale_factor;
                Observation::new(values).expect("scaled draw is finite")
            }
            Distribution::ComponentwiseUniform { dim, half_width } => {
                let values = (0..*dim)
                    .map(|_| rng.random_range(-half_width..=*half_width))
                    .collect();
                Observation::new(values).expect("uniform draw is finite")
            }
        }
    }
}

/// Pointwise log-likelihood-ratio `log f1(x) / f0(x)` between a post-change
/// and a pre-change density, for detectors that know both.
#[derive(Debug, Clone, PartialEq)]
pub enum LlrModel {
    /// Both densities are diagonal Gaussians of the same dimension.
    GaussianDiag {
        pre_mean: Vec<f64>,
        pre_var: Vec<f64>,
        post_mean: Vec<f64>,
        post_var: Vec<f64>,
    },
}

impl LlrModel {
    pub fn gaussian_diag(
        pre_mean: Vec<f64>,
        pre_var: Vec<f64>,
        post_mean: Vec<f64>,
        post_var: Vec<f64>,
    ) -> Result<Self> {
        let pre = Distribution::diagonal_gaussian(pre_mean, pre_var)?;
        let post = Distribution::diagonal_gaussian(post_mean, post_var)?;
        if pre.dim() != post.dim() {
            return Err(Error::DimensionMismatch {
                left: pre.dim(),
                right: post.dim(),
            });
        }
        match (pre, post) {
            (
                Distribution::DiagonalGaussian { mean: pre_mean, variances: pre_var },
                Distribution::DiagonalGaussian { mean: post_mean, variances: post_var },
            ) => Ok(LlrModel::GaussianDiag { pre_mean, pre_var, post_mean, post_var }),
            _ => unreachable!(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LlrModel::GaussianDiag { pre_mean, .. } => pre_mean.len(),
        }
    }

    /// Evaluate `log f1(x) / f0(x)`; finite for every finite `x`.
    pub fn eval(&self, x: &Observation) -> Result<f64> {
        match self {
            LlrModel::GaussianDiag { pre_mean, pre_var, post_mean, post_var } => {
                if x.dim() != pre_mean.len() {
                    return Err(Error::DimensionMismatch {
                        left: x.dim(),
                        right: pre_mean.len(),
                    });
                }
                let mut llr = 0.0;
                for (((&v, &m0), &s0), (&m1, &s1)) in x
                    .values()
                    .iter()
                    .zip(pre_mean.iter())
                    .zip(pre_var.iter())
                    .zip(post_mean.iter().zip(post_var.iter()))
                {
                    llr += 0.5 * (s0 / s1).ln() + (v - m0) * (v - m0) / (2.0 * s0)
                        - (v - m1) * (v - m1) / (2.0 * s1);
                }
                Ok(llr)
            }
        }
    }
}

/// Log-likelihood ratio for the scalar variance change `N(1,1) -> N(1,4)`:
/// `(3/8) x^2 - (3/4) x + log(1/2) + 3/8`.
pub fn llr_gaussian_variance_change(x: f64) -> f64 {
    0.375 * x * x - 0.75 * x + 0.5f64.ln() + 0.375
}

/// Closed-form KL divergence between two diagonal Gaussians of equal
/// dimension, summed over components.
pub fn kl_divergence_gaussian(p: &Distribution, q: &Distribution) -> Result<f64> {
    let (pm, pv) = match p {
        Distribution::DiagonalGaussian { mean, variances } => (mean, variances),
        _ => return Err(Error::invalid("p", "kl_divergence_gaussian needs diagonal Gaussians")),
    };
    let (qm, qv) = match q {
        Distribution::DiagonalGaussian { mean, variances } => (mean, variances),
        _ => return Err(Error::invalid("q", "kl_divergence_gaussian needs diagonal Gaussians")),
    };
    if pm.len() != qm.len() {
        return Err(Error::DimensionMismatch {
            left: pm.len(),
            right: qm.len(),
        });
    }
    let mut kl = 0.0;
    for (((&m0, &v0), &m1), &v1) in pm.iter().zip(pv.iter()).zip(qm.iter()).zip(qv.iter()) {
        kl += 0.5 * ((v1 / v0).ln() + (v0 + (m0 - m1) * (m0 - m1)) / v1 - 1.0);
    }
    Ok(kl)
}

/// An endless generated observation stream with an optional change point.
///
/// Observations `1 .. change_at-1` follow `pre`; observations `change_at ..`
/// follow `post`. `change_at = 1` makes the whole stream post-change; with no
/// `post`, the stream never changes.
#[derive(Debug, Clone)]
pub struct ChangeStream<R> {
    pre: Distribution,
    post: Option<Distribution>,
    change_at: u64,
    rng: R,
    emitted: u64,
}

impl<R: Rng> ChangeStream<R> {
    pub fn new(pre: Distribution, post: Option<Distribution>, change_at: u64, rng: R) -> Result<Self> {
        if change_at == 0 {
            return Err(Error::invalid("change_at", "change point index is 1-based"));
        }
        if let Some(post) = &post {
            if post.dim() != pre.dim() {
                return Err(Error::DimensionMismatch {
                    left: pre.dim(),
                    right: post.dim(),
                });
            }
        }
        Ok(ChangeStream {
            pre,
            post,
            change_at,
            rng,
            emitted: 0,
        })
    }

    /// Stream with no change point.
    pub fn stationary(law: Distribution, rng: R) -> Self {
        ChangeStream {
            pre: law,
            post: None,
            change_at: u64::MAX,
            rng,
            emitted: 0,
        }
    }
}

impl<R: Rng> Iterator for ChangeStream<R> {
    type Item = Observation;

    fn next(&mut self) -> Option<Observation> {
        self.emitted += 1;
        let law = match &self.post {
            Some(post) if self.emitted >= self.change_at => post,
            _ => &self.pre,
        };
        Some(law.sample(&mut self.rng))
    }
}
