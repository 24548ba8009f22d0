//! The tempered log-partition value `G_t(a)`, tempered class probabilities, the
//! escort distribution, and the scalar derivatives of `G` along the binary margin.
//!
//! `G` is the unique shift for which `sum_c exp_t(a_c - G) = 1`. It has a closed
//! form only at `t = 1` (log-sum-exp); otherwise it is found by a safeguarded
//! Newton iteration on the normalization residual.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Error, Result};
use crate::tempered::{check_distribution, exp_t, log_t_pos, Temperature};

/// Residual `|sum_c p_c - 1|` at which the Newton iteration stops.
pub const SOLVER_TOL: f64 = 1e-13;
/// Residual a returned [`PartitionResult`] is guaranteed to satisfy.
pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const MAX_SOLVER_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionResult {
    /// The normalizer `G_t(a)`.
    pub value: f64,
    /// `|sum_c exp_t(a_c - G) - 1|` at `value`.
    pub residual: f64,
    pub iterations: usize,
}

/// Per-class activations `a = W^T x` for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationVector(Vec<f64>);

impl ActivationVector {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        check_activations(&a)?;
        Ok(ActivationVector(a))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl core::ops::Deref for ActivationVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_activations(a: &[f64]) -> Result<()> {
    if a.len() < 2 {
        return Err(contract!("need at least 2 activations, got {}", a.len()));
    }
    if let Some(v) = a.iter().find(|v| !v.is_finite()) {
        return Err(contract!("non-finite activation {v}"));
    }
    Ok(())
}

/// Solve `sum_c exp_t(a_c - G) = 1` for `G`.
pub fn log_partition(a: &[f64], t2: Temperature) -> Result<PartitionResult> {
    check_activations(a)?;
    let shift = max_of(a);
    let (g, residual, iterations) = solve_shifted(a, shift, t2)?;
    Ok(PartitionResult {
        value: shift + g,
        residual,
        iterations,
    })
}

/// Tempered class probabilities `exp_t(a_c - G_t(a))`.
pub fn tempered_probs(a: &[f64], t2: Temperature) -> Result<Vec<f64>> {
    let mut out = vec![0.0; a.len()];
    tempered_probs_into(a, t2, &mut out)?;
    Ok(out)
}

/// As [`tempered_probs`], writing into `out` and returning the partition result.
pub fn tempered_probs_into(a: &[f64], t2: Temperature, out: &mut [f64]) -> Result<PartitionResult> {
    check_activations(a)?;
    if out.len() != a.len() {
        return Err(contract!("output length {} != {}", out.len(), a.len()));
    }
    let shift = max_of(a);
    let (g, residual, iterations) = solve_shifted(a, shift, t2)?;
    for (o, &ac) in out.iter_mut().zip(a) {
        *o = exp_t((ac - shift) - g, t2);
    }
    Ok(PartitionResult {
        value: shift + g,
        residual,
        iterations,
    })
}

/// Escort distribution `p_c^t / sum_j p_j^t`.
pub fn escort(p: &[f64], t2: Temperature) -> Result<Vec<f64>> {
    check_distribution(p, "escort")?;
    let mut out = vec![0.0; p.len()];
    escort_into(p, t2, &mut out);
    Ok(out)
}

/// Unchecked escort. Zero entries stay exactly zero.
pub(crate) fn escort_into(p: &[f64], t2: Temperature, out: &mut [f64]) {
    let t = t2.get();
    let mut z = 0.0;
    for (o, &pc) in out.iter_mut().zip(p) {
        *o = if pc > 0.0 { pow_t(pc, t) } else { 0.0 };
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

#[inline]
fn pow_t(p: f64, t: f64) -> f64 {
    if t == 1.0 {
        p
    } else {
        libm::pow(p, t)
    }
}

fn max_of(a: &[f64]) -> f64 {
    a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Returns `(g, residual, iterations)` with `G = shift + g`.
fn solve_shifted(a: &[f64], shift: f64, t2: Temperature) -> Result<(f64, f64, usize)> {
    let eval = |g: f64| -> (f64, f64) {
        let t = t2.get();
        let mut sum = 0.0;
        let mut slope = 0.0;
        for &ac in a {
            let p = exp_t((ac - shift) - g, t2);
            sum += p;
            if p > 0.0 {
                slope += pow_t(p, t);
            }
        }
        (sum - 1.0, -slope)
    };

    if t2.is_one() {
        let s: f64 = a.iter().map(|&ac| libm::exp(ac - shift)).sum();
        let g = libm::log(s);
        let (f, _) = eval(g);
        return Ok((g, libm::fabs(f), 0));
    }

    let n = a.len() as f64;
    let mut lo = 0.0;
    // At -log_t(1/C) every term is at most exp_t(log_t(1/C)) = 1/C.
    let mut hi = -log_t_pos(1.0 / n, t2);
    let (mut f_hi, _) = eval(hi);
    let mut expansions = 0;
    while f_hi > 0.0 {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Solver(alloc::format!(
                "could not bracket the log-partition root (t = {t2})"
            )));
        }
        let w = hi - lo;
        lo = hi;
        hi += w;
        f_hi = eval(hi).0;
    }

    // Start from the log-sum-exp value, which is exact at t = 1.
    let lse = libm::log(a.iter().map(|&ac| libm::exp(ac - shift)).sum::<f64>());
    let mut g = lse.clamp(lo, hi);
    let mut best = (f64::INFINITY, g);
    for it in 1..=MAX_SOLVER_ITERS {
        let (f, df) = eval(g);
        let r = libm::fabs(f);
        if r < best.0 {
            best = (r, g);
        }
        if r <= SOLVER_TOL {
            return Ok((g, r, it));
        }
        if f > 0.0 {
            lo = g;
        } else {
            hi = g;
        }
        let newton = g - f / df;
        g = if df < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * libm::fabs(hi).max(1.0) {
            break;
        }
    }
    let (f, _) = eval(g);
    if libm::fabs(f) < best.0 {
        best = (libm::fabs(f), g);
    }
    if best.0 <= NORMALIZATION_TOL {
        Ok((best.1, best.0, MAX_SOLVER_ITERS))
    } else {
        Err(Error::Solver(alloc::format!(
            "log-partition residual {} above tolerance (t = {t2})",
            best.0
        )))
    }
}

/// Two-class quantities along the scalar margin `a`, with activations `[a/2, -a/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryPartition {
    /// `G_t(a)`.
    pub g: f64,
    /// `exp_t(a/2 - G)`, probability of the `+1` class.
    pub p_pos: f64,
    /// `exp_t(-a/2 - G)`.
    pub p_neg: f64,
    /// `dG/da`.
    pub d1: f64,
    /// `d^2G/da^2`.
    pub d2: f64,
}

impl BinaryPartition {
    /// Probability of class `sign` (`+1` or `-1`).
    pub fn prob(&self, sign: f64) -> f64 {
        if sign > 0.0 {
            self.p_pos
        } else {
            self.p_neg
        }
    }
}

pub fn binary_partition(a: f64, t2: Temperature) -> Result<BinaryPartition> {
    if !a.is_finite() {
        return Err(contract!("non-finite margin {a}"));
    }
    let acts = [0.5 * a, -0.5 * a];
    let mut p = [0.0; 2];
    let res = tempered_probs_into(&acts, t2, &mut p)?;
    let t = t2.get();
    let w = [pow_or_zero(p[0], t), pow_or_zero(p[1], t)];
    let z = w[0] + w[1];
    let d1 = 0.5 * (w[0] - w[1]) / z;
    let mut num = 0.0;
    for (&pc, c) in p.iter().zip([0.5, -0.5]) {
        if pc > 0.0 {
            let dev = c - d1;
            num += libm::pow(pc, 2.0 * t - 1.0) * dev * dev;
        }
    }
    Ok(BinaryPartition {
        g: res.value,
        p_pos: p[0],
        p_neg: p[1],
        d1,
        d2: t * num / z,
    })
}

#[inline]
fn pow_or_zero(p: f64, t: f64) -> f64 {
    if p > 0.0 {
        pow_t(p, t)
    } else {
        0.0
    }
}

/// `dG/da` for the two-class margin form: the escort mean of `c/2`, in `[-1/2, 1/2]`.
pub fn partition_d1(a: f64, t2: Temperature) -> Result<f64> {
    Ok(binary_partition(a, t2)?.d1)
}

/// `d^2G/da^2` for the two-class margin form; always `>= 0`.
pub fn partition_d2(a: f64, t2: Temperature) -> Result<f64> {
    Ok(binary_partition(a, t2)?.d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    fn softmax(a: &[f64]) -> Vec<f64> {
        let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = a.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    #[test]
    fn log_partition_examples() {
        let r = log_partition(&[0.0, 0.0], t(1.0)).unwrap();
        assert!((r.value - core::f64::consts::LN_2).abs() < 1e-15);
        // exp_1.5(-G) = 1/2  =>  G = -log_1.5(1/2) = 2 (sqrt 2 - 1)
        let r = log_partition(&[0.0, 0.0], t(1.5)).unwrap();
        assert!((r.value - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!(r.residual <= NORMALIZATION_TOL);
        let g0 = log_partition(&[0.0, 0.0, 0.0], t(1.6)).unwrap().value;
        let g5 = log_partition(&[5.0, 5.0, 5.0], t(1.6)).unwrap().value;
        assert!((g5 - (5.0 + g0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_activations() {
        assert!(log_partition(&[1.0], t(1.2)).is_err());
        assert!(log_partition(&[1.0, f64::NAN], t(1.2)).is_err());
        assert!(log_partition(&[1.0, f64::INFINITY], t(0.5)).is_err());
        assert!(ActivationVector::new(vec![0.0]).is_err());
    }

    #[test]
    fn probs_examples() {
        for tv in [0.3, 0.8, 1.0, 1.6] {
            let p = tempered_probs(&[0.0, 0.0], t(tv)).unwrap();
            assert!((p[0] - 0.5).abs() < 1e-13 && (p[1] - 0.5).abs() < 1e-13);
        }
        let p = tempered_probs(&[400.0, -400.0], t(1.0)).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1e-300);
        let p = tempered_probs(&[1.0, 0.0, -1.0], t(1.0)).unwrap();
        for (got, want) in p.iter().zip([0.665_240_955_774_821_6, 0.244_728_471_054_797_6, 0.090_030_573_170_380_46]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_gives_exact_zeros_and_heavy_tail_is_positive() {
        let p = tempered_probs(&[0.0, -50.0, 3.0], t(0.5)).unwrap();
        assert_eq!(p[1], 0.0);
        let p = tempered_probs(&[0.0, -50.0, 3.0], t(1.6)).unwrap();
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn escort_examples() {
        let p = [0.1, 0.6, 0.3];
        let q = escort(&p, t(1.0)).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
        let q = escort(&[0.8, 0.2], t(1.999_999_999)).unwrap();
        assert!((q[0] - 16.0 / 17.0).abs() < 1e-8);
        let q = escort(&[0.5, 0.5], t(0.3)).unwrap();
        assert_eq!(q, vec![0.5, 0.5]);
        assert!(escort(&[0.0, 0.0], t(1.2)).is_err());
    }

    #[test]
    fn escort_preserves_argmax() {
        let p = [0.2, 0.05, 0.5, 0.25];
        for tv in [0.2, 0.9, 1.4, 1.9] {
            let q = escort(&p, t(tv)).unwrap();
            let am = q
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(am, 2);
        }
    }

    #[test]
    fn scalar_derivative_examples() {
        for tv in [0.4, 1.0, 1.6] {
            assert_eq!(partition_d1(0.0, t(tv)).unwrap(), 0.0);
        }
        assert!((partition_d1(800.0, t(1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((partition_d1(1.0, t(1.0)).unwrap() - 0.5 * (0.5f64).tanh()).abs() < 1e-14);
        assert!((partition_d2(0.0, t(1.0)).unwrap() - 0.25).abs() < 1e-14);
        // margin deep in the clamp region of t = 0.5: one class has all the mass
        assert_eq!(partition_d2(-8.0, t(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn d2_matches_finite_difference_of_d1() {
        let h = 1e-5;
        for tv in [0.5, 0.8, 1.0, 1.3, 1.6, 1.9] {
            let mut a = -6.0;
            while a <= 6.0 {
                let fd = (partition_d1(a + h, t(tv)).unwrap() - partition_d1(a - h, t(tv)).unwrap())
                    / (2.0 * h);
                let an = partition_d2(a, t(tv)).unwrap();
                assert!((fd - an).abs() <= 1e-6, "t={tv} a={a} fd={fd} an={an}");
                a += 0.37;
            }
        }
    }

    #[test]
    fn gradient_of_g_is_escort() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for tv in [0.6, 1.0, 1.6] {
            for _ in 0..20 {
                let c = rng.random_range(2..=6);
                let a: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
                let p = tempered_probs(&a, t(tv)).unwrap();
                let q = escort(&p, t(tv)).unwrap();
                for k in 0..c {
                    let mut ap = a.clone();
                    let mut am = a.clone();
                    ap[k] += h;
                    am[k] -= h;
                    let fd = (log_partition(&ap, t(tv)).unwrap().value
                        - log_partition(&am, t(tv)).unwrap().value)
                        / (2.0 * h);
                    assert!((fd - q[k]).abs() < 1e-7, "t={tv} k={k} fd={fd} q={}", q[k]);
                }
            }
        }
    }

    #[test]
    fn softmax_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = rng.random_range(2..=10);
            let a: Vec<f64> = (0..c).map(|_| rng.random_range(-20.0..20.0)).collect();
            let p = tempered_probs(&a, Temperature::ONE).unwrap();
            for (x, y) in p.iter().zip(softmax(&a)) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shift_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for tv in [0.5, 0.8, 1.0, 1.2, 1.6, 1.9] {
            for _ in 0..100 {
                let c = rng.random_range(2..=10);
                let a: Vec<f64> = (0..c).map(|_| rng.random_range(-20.0..20.0)).collect();
                let b = rng.random_range(-10.0..10.0);
                let ab: Vec<f64> = a.iter().map(|x| x + b).collect();
                let g = log_partition(&a, t(tv)).unwrap().value;
                let gb = log_partition(&ab, t(tv)).unwrap().value;
                assert!((gb - (g + b)).abs() <= 1e-9, "t={tv}");
            }
        }
    }
}
