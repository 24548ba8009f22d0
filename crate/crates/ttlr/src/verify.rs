//! Property batteries run by `ttlr verify`. Each check records the measured quantity
//! next to its tolerance; failures are report content, not errors.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ttlr_core::analysis::{
    bayes_binary_check, bayes_multiclass_check, curvature_report, find_inflection, find_inflection_signed,
    loss_second_derivative, regime_grid_values, InflectionKind, Regime,
};
use ttlr_core::loss::{binary_loss_at_margin, surrogate_loss_from_activations};
use ttlr_core::{
    binary_grad, binary_loss, partition_d2, surrogate_grad, surrogate_loss, tempered_probs, Example, Sign,
    SparseVector, Temperature, TemperaturePair, WeightMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Curvature,
    Bayes,
    Gradients,
    Recovery,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Curvature, Suite::Bayes, Suite::Gradients, Suite::Recovery];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Curvature => "curvature",
            Suite::Bayes => "bayes",
            Suite::Gradients => "gradients",
            Suite::Recovery => "recovery",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    /// Residual or error; compared against `tolerance` unless the check is a predicate.
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<10} {:<48} measured {:.3e}  tol {:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.suite.name(),
                c.name,
                c.measured,
                c.tolerance
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

struct Recorder {
    suite: Suite,
    checks: Vec<Check>,
}

impl Recorder {
    fn within(&mut self, name: impl Into<String>, measured: f64, tolerance: f64) {
        self.push(name, measured, tolerance, measured <= tolerance);
    }

    fn push(&mut self, name: impl Into<String>, measured: f64, tolerance: f64, passed: bool) {
        self.checks.push(Check {
            suite: self.suite,
            name: name.into(),
            measured,
            tolerance,
            passed,
        });
    }

    fn failed(&mut self, name: impl Into<String>, err: impl fmt::Display) {
        self.push(format!("{} ({err})", name.into()), f64::NAN, 0.0, false);
    }
}

pub fn run_verification(suites: &[Suite], seed: u64) -> VerificationReport {
    let mut report = VerificationReport::default();
    for &suite in suites {
        let mut rec = Recorder {
            suite,
            checks: Vec::new(),
        };
        match suite {
            Suite::Curvature => curvature(&mut rec),
            Suite::Bayes => bayes(&mut rec, seed),
            Suite::Gradients => gradients(&mut rec, seed),
            Suite::Recovery => recovery(&mut rec, seed),
        }
        report.checks.extend(rec.checks);
    }
    report
}

fn tp(t1: f64, t2: f64) -> TemperaturePair {
    TemperaturePair::new(t1, t2).expect("valid temperatures")
}

fn curvature(rec: &mut Recorder) {
    for t1 in regime_grid_values() {
        for t2 in regime_grid_values() {
            let temps = TemperaturePair { t1, t2 };
            let name = format!("regime ({t1}, {t2})");
            match curvature_report(temps, -20.0, 20.0, 2001) {
                Ok(r) => {
                    let want = if temps.is_convex() { Regime::Convex } else { Regime::QuasiConvex };
                    rec.push(name, r.min_second_deriv(), 0.0, r.regime == want);
                }
                Err(e) => rec.failed(name, e),
            }
        }
    }

    match find_inflection(tp(0.6, 1.6), -20.0, 5.0) {
        Ok(pts) => {
            rec.push("inflection count (0.6, 1.6) on [-20, 5]", pts.len() as f64, 1.0, pts.len() == 1);
            let worst = pts.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
            rec.within("inflection residual (0.6, 1.6)", worst, 1e-6);
        }
        Err(e) => rec.failed("inflection (0.6, 1.6)", e),
    }
    match find_inflection(TemperaturePair::LOGISTIC, -20.0, 5.0) {
        Ok(_) => rec.push("inflection rejected for (1, 1)", 0.0, 0.0, false),
        Err(_) => rec.push("inflection rejected for (1, 1)", 0.0, 0.0, true),
    }

    for &t in &[0.4, 0.7] {
        let temps = tp(t, t);
        let name = format!("mirror symmetry t1 = t2 = {t}");
        let pos = find_inflection_signed(temps, -10.0, 10.0, Sign::Pos);
        let neg = find_inflection_signed(temps, -10.0, 10.0, Sign::Neg);
        match (pos, neg) {
            (Ok(p), Ok(n)) if p.len() == n.len() && !p.is_empty() => {
                let err = p
                    .iter()
                    .zip(n.iter().rev())
                    .map(|(a, b)| (a.margin + b.margin).abs())
                    .fold(0.0, f64::max);
                rec.within(name, err, 1e-9);
            }
            (Ok(_), Ok(_)) => rec.push(name, f64::NAN, 1e-9, false),
            (Err(e), _) | (_, Err(e)) => rec.failed(name, e),
        }
        if let Ok(p) = find_inflection(temps, -10.0, 10.0) {
            let edge = p.iter().find(|i| i.kind == InflectionKind::PlateauBoundary);
            let err = edge.map_or(f64::INFINITY, |i| (i.margin + 1.0 / (1.0 - t)).abs());
            rec.within(format!("plateau edge at -1/(1-t), t = {t}"), err, 1e-6);
        }
    }

    let pairs = [(1.0, 1.0), (1.3, 1.0), (1.6, 0.7), (1.3, 1.3), (1.6, 1.3), (1.6, 1.6)];
    for &(t1, t2) in &pairs {
        let temps = tp(t1, t2);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..=80 {
            let a = -10.0 + 0.25 * i as f64;
            if !binary_loss_at_margin(a, Sign::Pos, temps).is_ok_and(f64::is_finite) {
                continue;
            }
            let lhs = loss_second_derivative(a, temps).unwrap_or(f64::NAN);
            let rhs = partition_d2(a, temps.t2).unwrap_or(f64::NAN);
            worst = worst.max(rhs - lhs);
        }
        rec.within(format!("curvature ordering ({t1}, {t2})"), worst, 1e-9);
    }

    for &(t1, t2) in &[(1.0, 1.0), (0.6, 1.6), (1.3, 1.0), (1.0, 1.6), (0.8, 1.2)] {
        let temps = tp(t1, t2);
        let f = |x: f64| binary_loss_at_margin(x, Sign::Pos, temps).unwrap_or(f64::NAN);
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..=30 {
            let a = -8.0 + i as f64 * 0.53;
            let an = loss_second_derivative(a, temps).unwrap_or(f64::NAN);
            let fd = (f(a + h) - 2.0 * f(a) + f(a - h)) / (h * h);
            worst = worst.max((an - fd).abs() / an.abs().max(1e-2));
        }
        rec.within(format!("second derivative vs differences ({t1}, {t2})"), worst, 1e-4);
    }
}

pub const BAYES_TEMPS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 1.6), (0.6, 1.6), (1.3, 1.0)];

pub fn eta_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Uniform draw from the simplex interior, bounded away from zero.
pub fn random_distribution(rng: &mut impl Rng, c: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn bayes(rec: &mut Recorder, seed: u64) {
    for &(t1, t2) in &BAYES_TEMPS {
        let temps = tp(t1, t2);
        let mut worst: f64 = 0.0;
        let mut signs = true;
        for eta in eta_grid() {
            match bayes_binary_check(eta, temps) {
                Ok(c) => {
                    worst = worst.max(c.abs_error());
                    signs &= c.sign_consistent;
                }
                Err(e) => return rec.failed(format!("bayes ({t1}, {t2}) eta {eta}"), e),
            }
        }
        rec.within(format!("closed-form minimizer ({t1}, {t2})"), worst, 1e-5);
        rec.push(format!("sign rule ({t1}, {t2})"), 0.0, 0.0, signs);
    }
    match bayes_binary_check(0.75, TemperaturePair::LOGISTIC) {
        Ok(c) => rec.within("logistic minimizer at eta 0.75 is ln 3", (c.a_star_numeric - 3f64.ln()).abs(), 1e-5),
        Err(e) => rec.failed("logistic minimizer at eta 0.75", e),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let temps = tp(0.6, 1.6);
    let mut worst: f64 = 0.0;
    let mut argmax_ok = true;
    for i in 0..100 {
        let p = random_distribution(&mut rng, 3 + i % 3);
        match bayes_multiclass_check(&p, temps) {
            Ok(r) => {
                worst = worst.max(r.max_deviation);
                argmax_ok &= r.argmax_preserved;
            }
            Err(e) => return rec.failed("multiclass minimizer", e),
        }
    }
    rec.within("multiclass minimizer proportional to p^(1/t1)", worst, 1e-4);
    rec.push("multiclass argmax preserved", 0.0, 0.0, argmax_ok);
}

/// Sup-norm error between an analytic gradient and central differences of `f`,
/// relative to the gradient size (absolute below 1e-4).
pub fn gradient_error(f: impl Fn(&[f64]) -> f64, at: &[f64], analytic: &[f64], h: f64) -> f64 {
    let mut x = at.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        worst = worst.max(((up - down) / (2.0 * h) - analytic[i]).abs());
    }
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-4);
    worst / scale
}

pub const GRADIENT_TEMPS: [(f64, f64); 8] = [
    (1.0, 1.0),
    (0.6, 1.6),
    (1.0, 1.6),
    (1.3, 1.0),
    (0.8, 0.8),
    (1.5, 1.2),
    (0.4, 1.9),
    (0.7, 1.3),
];

fn gradients(rec: &mut Recorder, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst_multi: f64 = 0.0;
    let mut worst_binary: f64 = 0.0;
    for i in 0..200 {
        let (t1, t2) = GRADIENT_TEMPS[i % GRADIENT_TEMPS.len()];
        let temps = tp(t1, t2);
        let d = 1 + i % 5;
        let c = 2 + i % 4;
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let xs = SparseVector::from_dense(&x);
        let w: Vec<f64> = (0..d * c).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.7).collect();
        let label = rng.random_range(0..c);
        let ex = Example::new(xs.clone(), label);
        let wm = WeightMatrix::new(d, c, w.clone()).expect("finite");
        let f = |v: &[f64]| {
            let m = WeightMatrix::new(d, c, v.to_vec()).expect("finite");
            surrogate_loss(&ex, &m, temps).unwrap_or(f64::NAN)
        };
        match surrogate_grad(&ex, &wm, temps) {
            Ok(g) => worst_multi = worst_multi.max(gradient_error(f, &w, g.as_slice(), h)),
            Err(e) => return rec.failed(format!("surrogate gradient config {i}"), e),
        }

        let wb: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let sign = if rng.random_bool(0.5) { Sign::Pos } else { Sign::Neg };
        let fb = |v: &[f64]| binary_loss(&xs, sign, v, temps).unwrap_or(f64::NAN);
        match binary_grad(&xs, sign, &wb, temps) {
            Ok(g) => worst_binary = worst_binary.max(gradient_error(fb, &wb, &g, h)),
            Err(e) => return rec.failed(format!("binary gradient config {i}"), e),
        }
    }
    rec.within("surrogate gradient vs differences (200 configs)", worst_multi, 1e-5);
    rec.within("binary gradient vs differences (200 configs)", worst_binary, 1e-5);
}

/// Softmax regression written out directly: loss, probabilities, and the `d x C` gradient.
pub fn reference_softmax(x: &[f64], w: &[f64], classes: usize, label: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = (0..classes)
        .map(|c| x.iter().enumerate().map(|(j, xj)| xj * w[j * classes + c]).sum())
        .collect();
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = a.iter().map(|v| (v - m).exp()).sum();
    let lse = m + z.ln();
    let p: Vec<f64> = a.iter().map(|v| (v - lse).exp()).collect();
    let mut g = vec![0.0; w.len()];
    for (j, xj) in x.iter().enumerate() {
        for c in 0..classes {
            let target = if c == label { 1.0 } else { 0.0 };
            g[j * classes + c] = xj * (p[c] - target);
        }
    }
    (lse - a[label], p, g)
}

fn recovery(rec: &mut Recorder, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dl, mut dp, mut dg) = (0.0f64, 0.0f64, 0.0f64);
    let mut dt: f64 = 0.0;
    let t16 = Temperature::new(1.6).expect("valid");
    for i in 0..200 {
        let d = 1 + i % 6;
        let c = 2 + i % 5;
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let w: Vec<f64> = (0..d * c).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let label = rng.random_range(0..c);
        let ex = Example::new(SparseVector::from_dense(&x), label);
        let wm = WeightMatrix::new(d, c, w.clone()).expect("finite");
        let (loss, p, g) = reference_softmax(&x, &w, c, label);
        let ours = (|| -> ttlr_core::Result<_> {
            let a = wm.activations(&ex.x)?;
            Ok((
                surrogate_loss(&ex, &wm, TemperaturePair::LOGISTIC)?,
                tempered_probs(&a, Temperature::ONE)?,
                surrogate_grad(&ex, &wm, TemperaturePair::LOGISTIC)?,
                surrogate_loss_from_activations(&a, label, TemperaturePair { t1: Temperature::ONE, t2: t16 })?,
                tempered_probs(&a, t16)?,
            ))
        })();
        match ours {
            Ok((l, q, gw, lt, pt)) => {
                dl = dl.max((l - loss).abs());
                dp = dp.max(q.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                dg = dg.max(gw.as_slice().iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                dt = dt.max((lt + pt[label].ln()).abs());
            }
            Err(e) => return rec.failed(format!("recovery config {i}"), e),
        }
    }
    rec.within("loss equals softmax cross-entropy at (1, 1)", dl, 1e-12);
    rec.within("probabilities equal softmax at (1, 1)", dp, 1e-12);
    rec.within("gradient equals softmax gradient at (1, 1)", dg, 1e-12);
    rec.within("loss equals -ln p at (1, 1.6)", dt, 1e-12);
}
