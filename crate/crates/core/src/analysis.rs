//! Numerical checks of the loss geometry: curvature along the binary margin,
//! inflection points, and the pointwise minimizers of the expected loss.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::loss::{binary_loss_at_margin, binary_loss_d1, Sign, TemperaturePair};
use crate::model::argmax;
use crate::optim::{lbfgs_minimize, LineSearchConfig, OptimizerConfig};
use crate::partition::{binary_partition, escort_into, tempered_probs_into};
use crate::tempered::{check_distribution, log_t_pos, Temperature};

/// Slack allowed below zero before a second derivative counts as negative.
pub const CURVATURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Convex,
    QuasiConvex,
}

/// The bracket `d2G - (t2 - t1) p^(t2-1) (1/2 - dG)^2`. Its sign is the sign of the
/// loss curvature wherever `p > 0`; its zeros are the inflection points.
fn curvature_bracket(a: f64, temps: TemperaturePair) -> Result<(f64, f64)> {
    let bp = binary_partition(a, temps.t2)?;
    let p = bp.p_pos;
    if p == 0.0 {
        return Ok((0.0, 0.0));
    }
    let dev = 0.5 - bp.d1;
    let tail = libm::pow(p, temps.t2.get() - 1.0);
    Ok((bp.d2 - temps.gap() * tail * dev * dev, p))
}

/// Residual of the inflection-point equation at margin `a`.
pub fn inflection_residual(a: f64, temps: TemperaturePair) -> Result<f64> {
    Ok(curvature_bracket(a, temps)?.0)
}

/// Second derivative in the margin of the `c = +1` binary loss:
/// `p^(t2-t1) [d2G - (t2-t1) p^(t2-1) (1/2 - dG)^2]`. Exactly 0 where `p = 0`.
pub fn loss_second_derivative(a: f64, temps: TemperaturePair) -> Result<f64> {
    let (bracket, p) = curvature_bracket(a, temps)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    let gap = temps.gap();
    let factor = if gap == 0.0 { 1.0 } else { libm::pow(p, gap) };
    Ok(factor * bracket)
}

/// As [`loss_second_derivative`] for either class. The `-1` loss is the mirror image.
pub fn loss_second_derivative_signed(a: f64, c: Sign, temps: TemperaturePair) -> Result<f64> {
    loss_second_derivative(c.value() * a, temps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InflectionKind {
    /// The curvature changes sign.
    SignChange,
    /// Edge of a region where the target probability is exactly 0 and the loss is flat.
    PlateauBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inflection {
    pub margin: f64,
    pub kind: InflectionKind,
    /// [`inflection_residual`] at `margin`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub temps: TemperaturePair,
    pub grid: Vec<f64>,
    pub loss: Vec<f64>,
    pub first_deriv: Vec<f64>,
    pub second_deriv: Vec<f64>,
    pub inflection_points: Vec<Inflection>,
    pub regime: Regime,
}

impl CurvatureReport {
    pub fn min_second_deriv(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.loss)
            .zip(&self.second_deriv)
            .filter(|((_, l), _)| l.is_finite())
            .map(|(_, d)| *d)
            .fold(f64::INFINITY, f64::min)
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

fn check_interval(lo: f64, hi: f64, points: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(contract!("invalid margin interval [{lo}, {hi}]"));
    }
    if points < 3 {
        return Err(contract!("need at least 3 grid points"));
    }
    Ok(())
}

/// Curvature profile of the `c = +1` loss over `points` evenly spaced margins in `[lo, hi]`.
///
/// The regime is read off the numbers: the loss is classified convex when its second
/// derivative is nowhere below `-CURVATURE_TOL` and its first derivative never decreases
/// between grid points (the latter catches the corner at the edge of a flat plateau).
/// Points where the loss is infinite lie outside its domain and are ignored.
pub fn curvature_report(temps: TemperaturePair, lo: f64, hi: f64, points: usize) -> Result<CurvatureReport> {
    check_interval(lo, hi, points)?;
    let grid = linspace(lo, hi, points);
    let mut loss = Vec::with_capacity(points);
    let mut d1 = Vec::with_capacity(points);
    let mut d2 = Vec::with_capacity(points);
    for &a in &grid {
        let l = binary_loss_at_margin(a, Sign::Pos, temps)?;
        loss.push(l);
        if l.is_finite() {
            d1.push(binary_loss_d1(a, Sign::Pos, temps)?);
            d2.push(loss_second_derivative(a, temps)?);
        } else {
            d1.push(f64::NAN);
            d2.push(f64::NAN);
        }
    }

    let finite: Vec<usize> = (0..points).filter(|&i| loss[i].is_finite()).collect();
    let curvature_ok = finite.iter().all(|&i| d2[i] >= -CURVATURE_TOL);
    let slope_ok = finite.windows(2).all(|w| {
        let (a, b) = (d1[w[0]], d1[w[1]]);
        b >= a - CURVATURE_TOL * (1.0 + libm::fabs(a))
    });
    let regime = if curvature_ok && slope_ok {
        Regime::Convex
    } else {
        Regime::QuasiConvex
    };

    let inflection_points = if regime == Regime::QuasiConvex {
        scan_inflections(&grid, temps)?
    } else {
        Vec::new()
    };

    Ok(CurvatureReport {
        temps,
        grid,
        loss,
        first_deriv: d1,
        second_deriv: d2,
        inflection_points,
        regime,
    })
}

/// Grid resolution used by [`find_inflection`].
pub const INFLECTION_GRID: usize = 4001;

/// Margins in `[lo, hi]` where the curvature of the `c = +1` loss changes sign, refined
/// by bisection. Entering a flat plateau counts as one inflection at its edge.
///
/// Only meaningful in the quasi-convex regime; convex temperature pairs are rejected.
pub fn find_inflection(temps: TemperaturePair, lo: f64, hi: f64) -> Result<Vec<Inflection>> {
    find_inflection_signed(temps, lo, hi, Sign::Pos)
}

/// [`find_inflection`] for either class; the `-1` points mirror the `+1` points.
pub fn find_inflection_signed(temps: TemperaturePair, lo: f64, hi: f64, c: Sign) -> Result<Vec<Inflection>> {
    if temps.is_convex() {
        return Err(contract!(
            "temperatures ({}, {}) give a convex loss with no inflection point",
            temps.t1,
            temps.t2
        ));
    }
    check_interval(lo, hi, INFLECTION_GRID)?;
    match c {
        Sign::Pos => scan_inflections(&linspace(lo, hi, INFLECTION_GRID), temps),
        Sign::Neg => {
            // The -1 loss at margin a equals the +1 loss at -a.
            let mirrored = scan_inflections(&linspace(-hi, -lo, INFLECTION_GRID), temps)?;
            Ok(mirrored
                .into_iter()
                .rev()
                .map(|i| Inflection {
                    margin: -i.margin,
                    ..i
                })
                .collect())
        }
    }
}

/// -1, 0 (plateau, `p = 0`), or +1.
fn curvature_sign(a: f64, temps: TemperaturePair) -> Result<i8> {
    let (bracket, p) = curvature_bracket(a, temps)?;
    Ok(if p == 0.0 {
        0
    } else if bracket < 0.0 {
        -1
    } else {
        1
    })
}

fn scan_inflections(grid: &[f64], temps: TemperaturePair) -> Result<Vec<Inflection>> {
    let signs: Vec<i8> = grid.iter().map(|&a| curvature_sign(a, temps)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 1..grid.len() {
        let (s0, s1) = (signs[i - 1], signs[i]);
        if s0 == s1 {
            continue;
        }
        let (mut lo, mut hi) = (grid[i - 1], grid[i]);
        let plateau = s0 == 0 || s1 == 0;
        let lo_sign = s0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = curvature_sign(mid, temps)?;
            let same_side = if plateau { (s == 0) == (lo_sign == 0) } else { s == lo_sign };
            if same_side {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Report the point on the non-plateau side, where the residual is defined.
        let margin = if plateau && lo_sign != 0 { lo } else if plateau { hi } else { 0.5 * (lo + hi) };
        out.push(Inflection {
            margin,
            kind: if plateau {
                InflectionKind::PlateauBoundary
            } else {
                InflectionKind::SignChange
            },
            residual: inflection_residual(margin, temps)?,
        });
    }
    Ok(out)
}

/// Numeric and closed-form minimizers of the expected binary loss at `eta = P(c = +1 | x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesCheck {
    pub eta: f64,
    pub temps: TemperaturePair,
    pub a_star_numeric: f64,
    pub a_star_closed_form: f64,
    /// `sign(a_star_numeric) == sign(eta - 1/2)`, with both treated as 0 inside the tolerance band.
    pub sign_consistent: bool,
}

impl BayesCheck {
    pub fn abs_error(&self) -> f64 {
        libm::fabs(self.a_star_numeric - self.a_star_closed_form)
    }
}

pub const BAYES_BRACKET: (f64, f64) = (-50.0, 50.0);
pub const BAYES_GRID: usize = 10_000;
pub const BAYES_REFINE_TOL: f64 = 1e-8;
/// Half-width of the band around `eta = 1/2` (and `a = 0`) treated as a tie.
pub const SIGN_BAND: f64 = 1e-6;

/// `eta * xi(a, +1) + (1 - eta) * xi(a, -1)`.
pub fn expected_binary_loss(a: f64, eta: f64, temps: TemperaturePair) -> Result<f64> {
    let pos = binary_loss_at_margin(a, Sign::Pos, temps)?;
    let neg = binary_loss_at_margin(a, Sign::Neg, temps)?;
    Ok(eta * pos + (1.0 - eta) * neg)
}

/// `log_t2(p*) - log_t2(1 - p*)` with `p* = eta^(1/t1) / (eta^(1/t1) + (1-eta)^(1/t1))`.
pub fn bayes_closed_form(eta: f64, temps: TemperaturePair) -> f64 {
    let k = 1.0 / temps.t1.get();
    let up = libm::pow(eta, k);
    let down = libm::pow(1.0 - eta, k);
    let z = up + down;
    log_t_pos(up / z, temps.t2) - log_t_pos(down / z, temps.t2)
}

/// Minimize the expected binary loss by a coarse grid over [`BAYES_BRACKET`] followed by
/// golden-section refinement, and compare with [`bayes_closed_form`].
pub fn bayes_binary_check(eta: f64, temps: TemperaturePair) -> Result<BayesCheck> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(contract!("eta must lie in (0, 1), got {eta}"));
    }
    let f = |a: f64| expected_binary_loss(a, eta, temps);
    let (lo, hi) = BAYES_BRACKET;
    let grid = linspace(lo, hi, BAYES_GRID);
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &a) in grid.iter().enumerate() {
        let v = f(a)?;
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];

    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > BAYES_REFINE_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let numeric = 0.5 * (a + b);
    let closed = bayes_closed_form(eta, temps);

    let sign_of = |v: f64| -> i8 {
        if v > SIGN_BAND {
            1
        } else if v < -SIGN_BAND {
            -1
        } else {
            0
        }
    };
    Ok(BayesCheck {
        eta,
        temps,
        a_star_numeric: numeric,
        a_star_closed_form: closed,
        sign_consistent: sign_of(numeric) == sign_of(eta - 0.5),
    })
}

/// Result of minimizing the expected multiclass loss over zero-sum activations.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassBayesCheck {
    pub activations: Vec<f64>,
    /// Tempered probabilities at the minimizer.
    pub probs: Vec<f64>,
    /// `p^(1/t1)`, renormalized.
    pub target: Vec<f64>,
    pub max_deviation: f64,
    pub argmax_preserved: bool,
}

impl MulticlassBayesCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.argmax_preserved && self.max_deviation <= tol
    }
}

/// Expected multiclass loss `-sum_c p_c log_t1 exp_t2(a_c - G(a))` and its gradient in `a`.
pub fn expected_multiclass_loss(a: &[f64], p: &[f64], temps: TemperaturePair, grad: &mut [f64]) -> Result<f64> {
    let c = a.len();
    let mut probs = vec![0.0; c];
    let mut q = vec![0.0; c];
    tempered_probs_into(a, temps.t2, &mut probs)?;
    escort_into(&probs, temps.t2, &mut q);
    let gap = temps.gap();
    let mut value = 0.0;
    let mut weighted = 0.0;
    for k in 0..c {
        let pk = probs[k];
        if pk > 0.0 {
            value -= p[k] * log_t_pos(pk.min(1.0), temps.t1);
        } else {
            value += p[k] * temps.loss_cap().unwrap_or(f64::INFINITY);
        }
        let f = if pk > 0.0 { libm::pow(pk, gap) } else { 0.0 };
        grad[k] = -p[k] * f;
        weighted += p[k] * f;
    }
    for k in 0..c {
        grad[k] += q[k] * weighted;
    }
    Ok(value)
}

/// Minimize the expected loss over activations with `sum_c a_c = 0`, parameterized by the
/// first `C - 1` coordinates, and compare the resulting probabilities with `p^(1/t1)`.
pub fn bayes_multiclass_check(p: &[f64], temps: TemperaturePair) -> Result<MulticlassBayesCheck> {
    check_distribution(p, "bayes_multiclass_check")?;
    let c = p.len();
    if c < 2 {
        return Err(contract!("need at least 2 classes"));
    }
    if p.iter().any(|&v| v <= 0.0) {
        return Err(contract!("class probabilities must be strictly positive"));
    }

    let expand = |z: &[f64], a: &mut [f64]| {
        let mut s = 0.0;
        for k in 0..c - 1 {
            a[k] = z[k];
            s += z[k];
        }
        a[c - 1] = -s;
    };
    let mut a = vec![0.0; c];
    let mut ga = vec![0.0; c];
    let objective = |z: &[f64], gz: &mut [f64]| -> f64 {
        expand(z, &mut a);
        match expected_multiclass_loss(&a, p, temps, &mut ga) {
            Ok(v) => {
                for k in 0..c - 1 {
                    gz[k] = ga[k] - ga[c - 1];
                }
                v
            }
            Err(_) => f64::NAN,
        }
    };
    let config = OptimizerConfig {
        memory: 10,
        max_iters: 5000,
        grad_tol: 1e-12,
        line_search: LineSearchConfig::default(),
    };
    // Start from the logistic minimizer, centered; from the origin the search can run off
    // into the flat heavy-tailed region far from the minimum.
    let logs: Vec<f64> = p.iter().map(|v| libm::log(*v)).collect();
    let mean = logs.iter().sum::<f64>() / c as f64;
    let init: Vec<f64> = logs[..c - 1].iter().map(|v| v - mean).collect();
    let (z, _) = lbfgs_minimize(objective, &init, &config)?;

    let mut act = vec![0.0; c];
    expand(&z, &mut act);
    let mut probs = vec![0.0; c];
    tempered_probs_into(&act, temps.t2, &mut probs)?;
    let k = 1.0 / temps.t1.get();
    let raw: Vec<f64> = p.iter().map(|&v| libm::pow(v, k)).collect();
    let z_sum: f64 = raw.iter().sum();
    let target: Vec<f64> = raw.iter().map(|v| v / z_sum).collect();
    let max_deviation = probs
        .iter()
        .zip(&target)
        .fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)));
    let argmax_preserved = argmax(&act) == argmax(p);
    Ok(MulticlassBayesCheck {
        activations: act,
        probs,
        target,
        max_deviation,
        argmax_preserved,
    })
}

/// The temperatures `t` in the validity range used by the regime grid.
pub fn regime_grid_values() -> [Temperature; 5] {
    [0.4, 0.7, 1.0, 1.3, 1.6].map(|t| Temperature::new(t).expect("valid"))
}
