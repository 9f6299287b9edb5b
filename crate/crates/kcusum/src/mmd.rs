//! Maximum-mean-discrepancy building blocks.
//!
//! The squared MMD distance between distributions `p` and `q` under a kernel
//! `k` is
//!
//! ```text
//! d^2(p, q) = E[k(x, x')] + E[k(y, y')] - 2 E[k(x, y)]
//! ```
//!
//! with `x, x' ~ p` and `y, y' ~ q` independent. The four-point block
//! statistic
//!
//! ```text
//! g((x0, x1), (y0, y1)) = k(x0, x1) + k(y0, y1) - k(x0, y1) - k(x1, y0)
//! ```
//!
//! is an unbiased single-sample estimator of `d^2`, the linear statistic
//! `rho_L` averages it over disjoint consecutive pairs, and `g_delta`
//! subtracts a drift constant so the kernel detector sees negative drift
//! before a change and positive drift after one. [`mmd2_oracle`] estimates
//! `d^2` directly by Monte Carlo; tests use it as the independent reference
//! for everything built on `g`.

use rand::Rng;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Observation};
use crate::par::map_indexed;
use crate::rng::{stream_rng, DOMAIN_ORACLE};

/// One consecutive pair from the monitored stream plus one consecutive pair
/// of reference samples. All four observations share the same dimension.
#[derive(Debug, Clone, Copy)]
pub struct PairBlock<'a> {
    pub x0: &'a Observation,
    pub x1: &'a Observation,
    pub y0: &'a Observation,
    pub y1: &'a Observation,
}

impl<'a> PairBlock<'a> {
    pub fn new(
        x0: &'a Observation,
        x1: &'a Observation,
        y0: &'a Observation,
        y1: &'a Observation,
    ) -> Result<Self> {
        x0.check_same_dim(x1)?;
        x0.check_same_dim(y0)?;
        x0.check_same_dim(y1)?;
        Ok(PairBlock { x0, x1, y0, y1 })
    }
}

/// The four-point block statistic `g`.
///
/// For a nonnegative kernel bounded by `B` the result lies in `[-2B, 2B]`.
pub fn g_statistic(spec: &KernelSpec, block: &PairBlock<'_>) -> f64 {
    spec.eval_unchecked(block.x0, block.x1) + spec.eval_unchecked(block.y0, block.y1)
        - spec.eval_unchecked(block.x0, block.y1)
        - spec.eval_unchecked(block.x1, block.y0)
}

/// The shifted statistic `g - delta`. Requires `delta > 0`.
pub fn g_delta(spec: &KernelSpec, block: &PairBlock<'_>, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be > 0, got {delta}")));
    }
    Ok(g_statistic(spec, block) - delta)
}

/// The linear statistic `rho_L`: the average of `g` over the
/// `floor(n/2)` disjoint consecutive pair blocks of `X` and `Y`.
///
/// Requires `|X| = |Y| = n >= 2`. An odd trailing element is ignored.
/// Blocks are accumulated left to right, so the result is reproducible
/// bit-for-bit for a fixed input order.
pub fn rho_linear(spec: &KernelSpec, xs: &[Observation], ys: &[Observation]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::invalid(
            "n",
            format!("rho_linear needs at least 2 observations per side, got {n}"),
        ));
    }
    let pairs = n / 2;
    let mut sum = 0.0;
    for i in 0..pairs {
        let block = PairBlock::new(&xs[2 * i], &xs[2 * i + 1], &ys[2 * i], &ys[2 * i + 1])?;
        sum += g_statistic(spec, &block);
    }
    Ok(sum / pairs as f64)
}

/// A Monte Carlo estimate of the squared MMD distance with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Mmd2Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Samples per independent oracle chunk. Fixed so the chunk layout, and with
/// it the floating-point reduction, is the same at every parallelism degree.
const ORACLE_CHUNK: usize = 1 << 15;

/// Unbiased Monte Carlo estimate of `d^2(p, q)`.
///
/// Each sample draws two fresh points from each distribution and evaluates
/// `g` on the resulting block, so samples are i.i.d. with mean `d^2`.
/// Chunks own ChaCha streams derived from `(seed, chunk_index)` and are
/// reduced in index order: the result depends only on `seed` and
/// `n_samples`, not on thread count. Requires `n_samples >= 10_000`.
pub fn mmd2_oracle(
    spec: &KernelSpec,
    p: &Distribution,
    q: &Distribution,
    n_samples: usize,
    seed: u64,
) -> Result<Mmd2Estimate> {
    if n_samples < 10_000 {
        return Err(Error::invalid(
            "n_samples",
            format!("oracle needs at least 10_000 samples, got {n_samples}"),
        ));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            left: p.dim(),
            right: q.dim(),
        });
    }
    let chunks = n_samples.div_ceil(ORACLE_CHUNK);
    let partials: Vec<(f64, f64)> = map_indexed(chunks, |c| {
        let mut rng = stream_rng(seed, [c as u64, 0, 0], DOMAIN_ORACLE);
        let lo = c * ORACLE_CHUNK;
        let hi = usize::min(lo + ORACLE_CHUNK, n_samples);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in lo..hi {
            let x0 = p.sample(&mut rng);
            let x1 = p.sample(&mut rng);
            let y0 = q.sample(&mut rng);
            let y1 = q.sample(&mut rng);
            let g = spec.eval_unchecked(&x0, &x1) + spec.eval_unchecked(&y0, &y1)
                - spec.eval_unchecked(&x0, &y1)
                - spec.eval_unchecked(&x1, &y0);
            sum += g;
            sum_sq += g * g;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partials
        .into_iter()
        .fold((0.0, 0.0), |(s, q2), (ps, pq)| (s + ps, q2 + pq));
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean).max(0.0) / (n - 1.0);
    Ok(Mmd2Estimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
        n_samples,
    })
}

/// Convenience wrapper around [`Rng`] draws used by tests: `n` observations
/// from `d` in draw order.
pub fn sample_many<R: Rng>(d: &Distribution, rng: &mut R, n: usize) -> Vec<Observation> {
    (0..n).map(|_| d.sample(rng)).collect()
}
