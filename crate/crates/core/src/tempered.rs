//! Tempered logarithm and exponential, and the discrete Tsallis measures built on them.
//!
//! `log_t(x) = (x^(1-t) - 1) / (1 - t)` and its inverse
//! `exp_t(x) = [1 + (1-t) x]_+^(1/(1-t))`. Both reduce to `ln`/`exp` at `t = 1`.
//!
//! Every evaluation goes through `expm1`/`log1p`, which is exact to a few ulps
//! for any `1 - t` and avoids the cancellation in `x^(1-t) - 1` near `t = 1`.
//! Plain `ln`/`exp` is used only when `|1 - t|` is below [`T_SWITCH`].

use crate::error::{contract, Error, Result};

/// Below this `|1 - t|` the natural log/exp are used directly.
pub const T_SWITCH: f64 = 1e-12;

/// Tolerance on `|sum(p) - 1|` when a caller hands in a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A tempering parameter in the open interval (0, 2).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Temperature(f64);

impl Temperature {
    pub const ONE: Temperature = Temperature(1.0);

    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 && t < 2.0 {
            Ok(Temperature(t))
        } else {
            Err(Error::InvalidTemperature(t))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `1 - t`.
    #[inline]
    pub fn gap_from_one(self) -> f64 {
        1.0 - self.0
    }

    #[inline]
    pub(crate) fn is_one(self) -> bool {
        libm::fabs(1.0 - self.0) < T_SWITCH
    }

    /// The bound `-1/(1-t)` of `log_t`: a lower bound for `t < 1`, an upper bound for `t > 1`.
    /// Infinite at `t = 1`.
    pub fn log_bound(self) -> f64 {
        if self.is_one() {
            f64::NEG_INFINITY
        } else {
            -1.0 / (1.0 - self.0)
        }
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;

    fn try_from(t: f64) -> Result<Self> {
        Temperature::new(t)
    }
}

impl core::fmt::Display for Temperature {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Tempered logarithm.
///
/// `x = 0` is admitted for `t < 1` and returns the finite limit `-1/(1-t)`.
pub fn log_t(x: f64, t: Temperature) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain { what: "log_t", value: x });
    }
    if x == 0.0 {
        return if t.get() < 1.0 && !t.is_one() {
            Ok(t.log_bound())
        } else {
            Err(Error::Domain { what: "log_t", value: x })
        };
    }
    Ok(log_t_pos(x, t))
}

/// `log_t` for `x > 0`, no checks.
#[inline]
pub(crate) fn log_t_pos(x: f64, t: Temperature) -> f64 {
    let ln = libm::log(x);
    if t.is_one() {
        return ln;
    }
    let d = t.gap_from_one();
    libm::expm1(d * ln) / d
}

/// Tempered exponential. Returns exactly `0.0` below the support boundary when `t < 1`
/// and `+inf` past the pole when `t > 1`.
#[inline]
pub fn exp_t(x: f64, t: Temperature) -> f64 {
    if t.is_one() {
        return libm::exp(x);
    }
    let d = t.gap_from_one();
    let base = d * x;
    if base <= -1.0 {
        return if d > 0.0 { 0.0 } else { f64::INFINITY };
    }
    libm::exp(libm::log1p(base) / d)
}

/// Tsallis entropy `sum_c p_c log_t(1/p_c)` of a discrete distribution; zero entries contribute nothing.
pub fn tsallis_entropy(p: &[f64], t: Temperature) -> Result<f64> {
    check_distribution(p, "tsallis_entropy")?;
    Ok(p.iter()
        .filter(|&&pc| pc > 0.0)
        .map(|&pc| pc * log_t_pos(1.0 / pc, t))
        .sum())
}

/// Tsallis divergence `-sum_c p_c log_t(q_c / p_c)`.
///
/// Terms with `p_c = 0` are skipped. A zero `q_c` under positive `p_c` contributes
/// the finite cap for `t < 1` and makes the divergence infinite otherwise.
pub fn tsallis_divergence(p: &[f64], q: &[f64], t: Temperature) -> Result<f64> {
    if p.len() != q.len() {
        return Err(contract!(
            "tsallis_divergence: length mismatch ({} vs {})",
            p.len(),
            q.len()
        ));
    }
    check_distribution(p, "tsallis_divergence(p)")?;
    check_distribution(q, "tsallis_divergence(q)")?;
    let mut acc = 0.0;
    for (&pc, &qc) in p.iter().zip(q) {
        if pc == 0.0 {
            continue;
        }
        if qc == 0.0 {
            if t.get() < 1.0 && !t.is_one() {
                acc -= pc * t.log_bound();
                continue;
            }
            return Ok(f64::INFINITY);
        }
        acc -= pc * log_t_pos(qc / pc, t);
    }
    Ok(acc)
}

pub(crate) fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(contract!("{what}: empty probability vector"));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(contract!("{what}: entries must be finite and nonnegative"));
    }
    let s: f64 = p.iter().sum();
    if libm::fabs(s - 1.0) > PROB_SUM_TOL {
        return Err(contract!("{what}: probabilities sum to {s}, not 1"));
    }
    Ok(())
}
