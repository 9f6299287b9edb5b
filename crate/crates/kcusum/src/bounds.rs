//! Computable run-length bounds.
//!
//! Closed-form lower bounds on the average run length to false alarm
//! (ARL2FA) and upper bounds on the worst-case expected detection delay
//! (ESADD) for both detectors, plus the random-walk facts behind them: a
//! supermartingale tail bound for the crossing probability of a
//! negative-drift walk, a first-passage expectation bound for a
//! positive-drift walk, and a numeric search for the tail-bound exponent.
//!
//! All functions are pure arithmetic on plain inputs; nothing here samples.

use serde::Serialize;

use crate::error::{Error, Result};

/// The scalar quantities the delay bounds consume.
///
/// `second_moment_pos` is `E[((increment)^+)^2]` under the post-change law;
/// it has no closed form in general and is usually estimated by Monte Carlo.
/// `kernel_nonnegative` selects the sharper kernel-CUSUM delay constant
/// (`8 k_sup^2`, valid when `g^+ <= 2 k_sup`) over the general one
/// (`16 k_sup^2`, from `|g| <= 4 k_sup`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub h: f64,
    pub delta: f64,
    pub k_sup: f64,
    pub mmd2: f64,
    pub kl_forward: f64,
    pub second_moment_pos: f64,
    pub kernel_nonnegative: bool,
}

impl BoundInputs {
    /// Inputs for [`cusum_esadd_upper`]; kernel fields are unused.
    pub fn for_cusum(h: f64, kl_forward: f64, second_moment_pos: f64) -> Self {
        BoundInputs {
            h,
            delta: 0.0,
            k_sup: 0.0,
            mmd2: 0.0,
            kl_forward,
            second_moment_pos,
            kernel_nonnegative: true,
        }
    }

    /// Inputs for [`kcusum_esadd_upper`] with a nonnegative kernel;
    /// likelihood fields are unused.
    pub fn for_kcusum(h: f64, delta: f64, k_sup: f64, mmd2: f64) -> Self {
        BoundInputs {
            h,
            delta,
            k_sup,
            mmd2,
            kl_forward: 0.0,
            second_moment_pos: 0.0,
            kernel_nonnegative: true,
        }
    }
}

/// ARL2FA lower bound for the likelihood-ratio CUSUM: `exp(h)`, `h >= 0`.
pub fn cusum_arl2fa_lower(h: f64) -> f64 {
    h.exp()
}

/// ESADD upper bound for the likelihood-ratio CUSUM:
/// `h / kl + m2 / kl^2` with `kl = KL(post || pre)` and
/// `m2 = E_post[((llr)^+)^2]`.
pub fn cusum_esadd_upper(inputs: &BoundInputs) -> Result<f64> {
    let kl = inputs.kl_forward;
    if !(kl > 0.0) || !kl.is_finite() {
        return Err(Error::invalid("kl_forward", format!("must be > 0, got {kl}")));
    }
    if !inputs.second_moment_pos.is_finite() || inputs.second_moment_pos < 0.0 {
        return Err(Error::invalid(
            "second_moment_pos",
            format!("must be finite and >= 0, got {}", inputs.second_moment_pos),
        ));
    }
    Ok(inputs.h / kl + inputs.second_moment_pos / (kl * kl))
}

/// The tail-bound exponent for the kernel CUSUM's pre-change walk:
/// `r = (1 / (4 k_sup)) * ln(1 + delta / (4 k_sup))`, strictly positive.
pub fn kcusum_rate_r(delta: f64, k_sup: f64) -> f64 {
    (1.0 + delta / (4.0 * k_sup)).ln() / (4.0 * k_sup)
}

/// ARL2FA lower bound for the kernel CUSUM: `2 exp(r h)` with
/// `r = kcusum_rate_r(delta, k_sup)`. Equals exactly 2 at `h = 0`.
pub fn kcusum_arl2fa_lower(h: f64, delta: f64, k_sup: f64) -> f64 {
    2.0 * (kcusum_rate_r(delta, k_sup) * h).exp()
}

/// ESADD upper bound for the kernel CUSUM:
/// `2h / (mmd2 - delta) + c k_sup^2 / (mmd2 - delta)^2`, with `c = 8` for
/// nonnegative kernels and `c = 16` otherwise. Requires `mmd2 > delta`
/// (otherwise the change is undetectable).
pub fn kcusum_esadd_upper(inputs: &BoundInputs) -> Result<f64> {
    let gap = inputs.mmd2 - inputs.delta;
    if !(gap > 0.0) {
        return Err(Error::Undetectable {
            mmd2: inputs.mmd2,
            delta: inputs.delta,
        });
    }
    let c = if inputs.kernel_nonnegative { 8.0 } else { 16.0 };
    Ok(2.0 * inputs.h / gap + c * inputs.k_sup * inputs.k_sup / (gap * gap))
}

/// Tail bound for the running maximum of a random walk whose increment
/// moment generating function satisfies `M(q) <= 1`:
/// `P(sup_n S_n > h) <= exp(-q h)`.
pub fn supermartingale_tail_bound(q: f64, h: f64) -> f64 {
    (-q * h).exp()
}

/// Upper end of the exponent search interval used by [`find_q`].
pub const Q_SEARCH_MAX: f64 = 32.0;

/// Largest `q` in `(0, Q_SEARCH_MAX]` whose empirical moment generating
/// function over `increments` stays at or below `1 - tolerance`, found by
/// grid scan plus bisection. Returns `None` when no feasible `q` exists in
/// the interval (in particular whenever the sample mean is nonnegative).
pub fn find_q(increments: &[f64], tolerance: f64) -> Result<Option<f64>> {
    if increments.is_empty() {
        return Err(Error::EmptyInput("increments"));
    }
    if !(tolerance > 0.0) || tolerance >= 1.0 {
        return Err(Error::invalid("tolerance", format!("must be in (0, 1), got {tolerance}")));
    }
    let n = increments.len() as f64;
    let mgf = |q: f64| increments.iter().map(|a| (q * a).exp()).sum::<f64>() / n;
    let target = 1.0 - tolerance;

    if mgf(Q_SEARCH_MAX) <= target {
        return Ok(Some(Q_SEARCH_MAX));
    }
    // The empirical MGF is convex with M(0) = 1, so the feasible set is a
    // single interval. Scan for its rightmost feasible grid point, then
    // bisect the boundary against the first infeasible point above it.
    const GRID: usize = 512;
    let mut best: Option<usize> = None;
    for i in 1..=GRID {
        let q = Q_SEARCH_MAX * i as f64 / GRID as f64;
        if mgf(q) <= target {
            best = Some(i);
        }
    }
    let Some(i) = best else {
        return Ok(None);
    };
    let mut lo = Q_SEARCH_MAX * i as f64 / GRID as f64;
    let mut hi = Q_SEARCH_MAX * (i + 1) as f64 / GRID as f64;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mgf(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// First-passage expectation bound for a positive-drift walk leaving
/// `[a, b]`, `a <= 0 <= b`:
/// `E[T] <= ((1 - alpha) b + alpha a) / mu + m2_pos / mu^2`,
/// where `alpha` is the probability of exiting below. The one-sided form
/// used by the detector bounds sets `a = 0, alpha = 0`.
pub fn lorden_first_passage_upper(
    mu: f64,
    second_moment_pos: f64,
    b: f64,
    a: f64,
    alpha: f64,
) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid("mu", format!("drift must be > 0, got {mu}")));
    }
    if !(a <= 0.0 && 0.0 <= b) {
        return Err(Error::invalid("a", format!("need a <= 0 <= b, got a = {a}, b = {b}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("must be in [0, 1], got {alpha}")));
    }
    Ok(((1.0 - alpha) * b + alpha * a) / mu + second_moment_pos / (mu * mu))
}

/// One point of the false-alarm/delay trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub arl2fa_target: f64,
    pub h_required: f64,
    pub esadd_bound: f64,
    /// True when the target was below the bound's minimum value 2 and the
    /// threshold was clamped to zero.
    pub clamped: bool,
}

/// The trade-off curve: for each false-alarm target the smallest threshold
/// the ARL2FA bound guarantees, and the delay bound at that threshold.
/// Points are sorted by target, so `h_required` is nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
}

/// For each target `x`: `h = max(0, ln(x / 2) / r)` inverts the ARL2FA
/// bound, and the delay bound is evaluated at that `h`. Targets below 2
/// (the bound's value at `h = 0`) clamp to `h = 0` and are flagged.
pub fn tradeoff_curve(
    delta: f64,
    k_sup: f64,
    mmd2: f64,
    arl2fa_targets: &[f64],
) -> Result<TradeoffCurve> {
    if arl2fa_targets.is_empty() {
        return Err(Error::EmptyInput("arl2fa_targets"));
    }
    if !(mmd2 > delta) {
        return Err(Error::Undetectable { mmd2, delta });
    }
    let r = kcusum_rate_r(delta, k_sup);
    let mut targets = arl2fa_targets.to_vec();
    targets.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(targets.len());
    for target in targets {
        if !(target > 0.0) || !target.is_finite() {
            return Err(Error::invalid("arl2fa_target", format!("must be positive, got {target}")));
        }
        let raw = (target / 2.0).ln() / r;
        let clamped = raw < 0.0;
        let h = raw.max(0.0);
        let inputs = BoundInputs::for_kcusum(h, delta, k_sup, mmd2);
        points.push(TradeoffPoint {
            arl2fa_target: target,
            h_required: h,
            esadd_bound: kcusum_esadd_upper(&inputs)?,
            clamped,
        });
    }
    Ok(TradeoffCurve { points })
}
