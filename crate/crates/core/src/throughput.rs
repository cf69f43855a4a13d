//! Achievable throughput and the attempt-rate profile that maximizes it.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThroughputError {
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("collision duration {0} is below one slot")]
    ShortCollision(f64),
    #[error("q0 = {q0} outside [{lo}, 1]")]
    Bracket { q0: f64, lo: f64 },
}

/// Durations in backoff slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputParams {
    pub l: f64,
    pub l_c: f64,
    pub l_o: f64,
}

impl ThroughputParams {
    pub fn new(l: f64, l_c: f64, l_o: f64) -> Result<Self, ThroughputError> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(ThroughputError::NonPositive("L"));
        }
        if !(l_c >= 1.0 && l_c.is_finite()) {
            return Err(ThroughputError::ShortCollision(l_c));
        }
        if !(l_o >= 0.0 && l_o.is_finite()) {
            return Err(ThroughputError::NonPositive("L_o"));
        }
        Ok(Self { l, l_c, l_o })
    }
}

/// Fraction of time carrying payload at aggregate attempt rate `qbar`.
pub fn omega(qbar: f64, p: &ThroughputParams) -> f64 {
    if qbar <= 0.0 {
        return 0.0;
    }
    let p0 = (-qbar).exp();
    let p1 = qbar * p0;
    let pc = (1.0 - p1 - p0).max(0.0);
    let den = p1 * (p.l + p.l_o) + p0 + pc * p.l_c;
    if den == 0.0 {
        0.0
    } else {
        p1 * p.l / den
    }
}

/// Throughput-optimal rate: the root of `(q - 1) e^q = 1/L_c - 1`.
pub fn optimal_qbar(l_c: f64) -> Result<f64, ThroughputError> {
    if !(l_c > 0.0 && l_c.is_finite()) {
        return Err(ThroughputError::NonPositive("L_c"));
    }
    let rhs = 1.0 / l_c - 1.0;
    let f = |q: f64| (q - 1.0) * q.exp() - rhs;
    // f is increasing on [0, inf) with f(0) = -1/L_c < 0.
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-14 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = q * q.exp();
        if d > 0.0 {
            q -= f(q) / d;
        }
    }
    Ok(q)
}

/// Ratio `sum g^k / sum g^k m^k` for `k = 0..=K`.
fn ratio(g: f64, m: f64, k: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    let mut gk = 1.0;
    let mut gm = 1.0;
    for _ in 0..=k {
        num += gk;
        den += gm;
        gk *= g;
        gm *= g * m;
    }
    num / den
}

/// Multiplier `m` such that `q_k = q0 / m^k` has stationary rate `qstar`.
pub fn fit_multiplier(q0: f64, qstar: f64, k: usize) -> Result<f64, ThroughputError> {
    if !(qstar > 0.0 && qstar.is_finite()) {
        return Err(ThroughputError::NonPositive("qstar"));
    }
    if !(q0 >= qstar * (1.0 - 1e-12) && q0 <= 1.0 + 1e-12) {
        return Err(ThroughputError::Bracket { q0, lo: qstar });
    }
    let target = qstar / q0;
    if (target - 1.0).abs() <= 1e-15 || k == 0 {
        return Ok(1.0);
    }
    let g = 1.0 - (-qstar).exp();
    // ratio decreases in m; bisect in log m.
    let f = |lm: f64| ratio(g, lm.exp(), k) - target;
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(ThroughputError::Bracket { q0, lo: qstar });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Rates `q0 / m^k` for `k = 0..=K`.
pub fn rate_profile(q0: f64, m: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| q0 / m.powi(i as i32)).collect()
}
