//! The two-temperature surrogate loss `-log_t1 exp_t2(a_c - G_t2(a))`, its gradient,
//! the binary margin form, and the L2-regularized empirical objective.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{activations_into, Dataset, Example, SparseVector, WeightMatrix};
use crate::error::{contract, Error, Result};
use crate::partition::{binary_partition, escort_into, tempered_probs_into};
use crate::tempered::Temperature;

/// `(t1, t2)`: `t1` tempers the logarithm of the loss, `t2` the exponential of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperaturePair {
    pub t1: Temperature,
    pub t2: Temperature,
}

impl TemperaturePair {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        Ok(TemperaturePair {
            t1: Temperature::new(t1)?,
            t2: Temperature::new(t2)?,
        })
    }

    /// Plain logistic regression.
    pub const LOGISTIC: TemperaturePair = TemperaturePair {
        t1: Temperature::ONE,
        t2: Temperature::ONE,
    };

    /// `t2 - t1`, the exponent of the per-example importance factor.
    pub fn gap(&self) -> f64 {
        self.t2.get() - self.t1.get()
    }

    /// The binary loss is convex in the margin iff `t1 >= t2` and `t1 >= 1`.
    pub fn is_convex(&self) -> bool {
        self.t1.get() >= self.t2.get() && self.t1.get() >= 1.0
    }

    /// Upper bound `1/(1-t1)` of the loss when `t1 < 1`.
    pub fn loss_cap(&self) -> Option<f64> {
        (self.t1.get() < 1.0).then(|| -self.t1.log_bound())
    }
}

/// `+1` / `-1` class of the binary margin parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }

    /// Column index of this sign in the two-column form.
    pub fn class_index(self) -> usize {
        match self {
            Sign::Pos => 0,
            Sign::Neg => 1,
        }
    }

    pub fn from_class_index(c: usize) -> Self {
        if c == 0 {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

/// `-log_t1(p)` for a model probability `p` in `[0, 1]`.
fn loss_from_prob(p: f64, temps: TemperaturePair) -> f64 {
    if p > 0.0 {
        -crate::tempered::log_t_pos(p.min(1.0), temps.t1)
    } else {
        temps.loss_cap().unwrap_or(f64::INFINITY)
    }
}

/// Importance factor `p^(t2 - t1)`; `None` when `p = 0` and the limit is undefined.
fn importance_factor(p: f64, temps: TemperaturePair) -> Option<f64> {
    let gap = temps.gap();
    if p > 0.0 {
        if gap == 0.0 {
            Some(1.0)
        } else if p < 1e-300 {
            Some(libm::exp(gap * libm::log(p)))
        } else {
            Some(libm::pow(p, gap))
        }
    } else if gap > 0.0 || (temps.t1.get() < 1.0 && temps.t2.get() < 1.0) {
        // Either the factor vanishes, or the example sits on the flat plateau of the
        // clamped exponential where the loss is locally constant.
        Some(0.0)
    } else {
        None
    }
}

/// Scratch space for per-example evaluation.
pub(crate) struct Workspace {
    acts: Vec<f64>,
    probs: Vec<f64>,
    escort: Vec<f64>,
    /// `d loss / d a_c`.
    pub(crate) coef: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(classes: usize) -> Self {
        Workspace {
            acts: vec![0.0; classes],
            probs: vec![0.0; classes],
            escort: vec![0.0; classes],
            coef: vec![0.0; classes],
        }
    }
}

/// Loss at activations already stored in `ws.acts`; fills `ws.coef` when `want_grad`.
fn eval_from_acts(ws: &mut Workspace, label: usize, temps: TemperaturePair, want_grad: bool) -> Result<f64> {
    tempered_probs_into(&ws.acts, temps.t2, &mut ws.probs)?;
    let p = ws.probs[label];
    let loss = loss_from_prob(p, temps);
    if want_grad {
        let factor = importance_factor(p, temps).ok_or(Error::Saturated)?;
        if factor == 0.0 {
            ws.coef.iter_mut().for_each(|c| *c = 0.0);
        } else {
            escort_into(&ws.probs, temps.t2, &mut ws.escort);
            for (c, (g, &q)) in ws.coef.iter_mut().zip(&ws.escort).enumerate() {
                let target = if c == label { 1.0 } else { 0.0 };
                *g = -factor * (target - q);
            }
        }
    }
    Ok(loss)
}

pub(crate) fn eval_example(
    ws: &mut Workspace,
    w: &[f64],
    ex: &Example,
    temps: TemperaturePair,
    want_grad: bool,
) -> Result<f64> {
    let classes = ws.acts.len();
    activations_into(w, classes, &ex.x, &mut ws.acts);
    eval_from_acts(ws, ex.label, temps, want_grad)
}

fn check_shapes(ex: &Example, w: &WeightMatrix) -> Result<()> {
    if ex.x.min_dim() > w.dim() {
        return Err(contract!(
            "feature index {} out of range for weight dimension {}",
            ex.x.min_dim() - 1,
            w.dim()
        ));
    }
    if ex.label >= w.classes() {
        return Err(contract!("label {} outside 1..={}", ex.label + 1, w.classes()));
    }
    if w.classes() < 2 {
        return Err(contract!("need at least 2 classes"));
    }
    Ok(())
}

/// Per-example loss. Nonnegative; at most `1/(1-t1)` for `t1 < 1`; `+inf` when the
/// target probability is exactly zero and `t1 >= 1`.
pub fn surrogate_loss(ex: &Example, w: &WeightMatrix, temps: TemperaturePair) -> Result<f64> {
    check_shapes(ex, w)?;
    let mut ws = Workspace::new(w.classes());
    eval_example(&mut ws, w.as_slice(), ex, temps, false)
}

/// Loss as a function of the activation vector directly.
pub fn surrogate_loss_from_activations(a: &[f64], label: usize, temps: TemperaturePair) -> Result<f64> {
    if label >= a.len() {
        return Err(contract!("label {} outside 1..={}", label + 1, a.len()));
    }
    let mut ws = Workspace::new(a.len());
    ws.acts.copy_from_slice(a);
    eval_from_acts(&mut ws, label, temps, false)
}

/// Gradient of the loss with respect to the activations: `-p^(t2-t1) (onehot - escort)`.
pub fn activation_grad(a: &[f64], label: usize, temps: TemperaturePair) -> Result<Vec<f64>> {
    if label >= a.len() {
        return Err(contract!("label {} outside 1..={}", label + 1, a.len()));
    }
    let mut ws = Workspace::new(a.len());
    ws.acts.copy_from_slice(a);
    eval_from_acts(&mut ws, label, temps, true)?;
    Ok(ws.coef)
}

/// Gradient of [`surrogate_loss`] with respect to `W`. Column `c` is
/// `-p(c_n|x)^(t2-t1) [1{c = c_n} - q(c|x)] x` with `q` the escort of the model probabilities.
pub fn surrogate_grad(ex: &Example, w: &WeightMatrix, temps: TemperaturePair) -> Result<WeightMatrix> {
    check_shapes(ex, w)?;
    let classes = w.classes();
    let mut ws = Workspace::new(classes);
    eval_example(&mut ws, w.as_slice(), ex, temps, true)?;
    let mut g = WeightMatrix::zeros(w.dim(), classes);
    let out = g.as_mut_slice();
    for (j, v) in ex.x.iter() {
        for (o, &cf) in out[j * classes..(j + 1) * classes].iter_mut().zip(&ws.coef) {
            *o += v * cf;
        }
    }
    Ok(g)
}

fn binary_margin(x: &SparseVector, w: &[f64]) -> Result<f64> {
    if x.min_dim() > w.len() {
        return Err(contract!(
            "feature index {} out of range for weight dimension {}",
            x.min_dim() - 1,
            w.len()
        ));
    }
    Ok(x.dot(w))
}

/// Binary loss `-log_t1 exp_t2((c/2) a - G_t2(a))` with margin `a = <x, w>`.
pub fn binary_loss(x: &SparseVector, c: Sign, w: &[f64], temps: TemperaturePair) -> Result<f64> {
    let a = binary_margin(x, w)?;
    binary_loss_at_margin(a, c, temps)
}

/// Binary loss as a function of the margin alone.
pub fn binary_loss_at_margin(a: f64, c: Sign, temps: TemperaturePair) -> Result<f64> {
    if !a.is_finite() {
        return Err(contract!("non-finite margin {a}"));
    }
    // Same evaluation path as the two-column multiclass form [w/2, -w/2].
    surrogate_loss_from_activations(&[0.5 * a, -0.5 * a], c.class_index(), temps)
}

/// Derivative of the binary loss in the margin: `-p^(t2-t1) (c/2 - dG/da)`.
pub fn binary_loss_d1(a: f64, c: Sign, temps: TemperaturePair) -> Result<f64> {
    let bp = binary_partition(a, temps.t2)?;
    let p = bp.prob(c.value());
    let factor = importance_factor(p, temps).ok_or(Error::Saturated)?;
    if factor == 0.0 {
        return Ok(0.0);
    }
    Ok(-factor * (0.5 * c.value() - bp.d1))
}

/// Gradient of [`binary_loss`] with respect to `w`.
pub fn binary_grad(x: &SparseVector, c: Sign, w: &[f64], temps: TemperaturePair) -> Result<Vec<f64>> {
    let a = binary_margin(x, w)?;
    let d = binary_loss_d1(a, c, temps)?;
    let mut g = vec![0.0; w.len()];
    for (j, v) in x.iter() {
        g[j] = d * v;
    }
    Ok(g)
}

/// The mean surrogate loss over a dataset plus `(lambda/2) ||W||_F^2`.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    data: &'a Dataset,
    temps: TemperaturePair,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a Dataset, temps: TemperaturePair, lambda: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(contract!("objective over an empty dataset"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(contract!("regularization strength must be >= 0, got {lambda}"));
        }
        if data.num_classes() < 2 {
            return Err(contract!("need at least 2 classes"));
        }
        Ok(Objective { data, temps, lambda })
    }

    pub fn num_params(&self) -> usize {
        self.data.dim() * self.data.num_classes()
    }

    /// Value at the row-major parameters `w`; the gradient is written to `grad`.
    /// Examples are summed in index order.
    pub fn eval(&self, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        let classes = self.data.num_classes();
        if w.len() != self.num_params() || grad.len() != w.len() {
            return Err(contract!("parameter length mismatch"));
        }
        let mut ws = Workspace::new(classes);
        let inv_n = 1.0 / self.data.len() as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for ex in self.data.examples() {
            total += eval_example(&mut ws, w, ex, self.temps, true)?;
            for (j, v) in ex.x.iter() {
                let row = &mut grad[j * classes..(j + 1) * classes];
                for (o, &cf) in row.iter_mut().zip(&ws.coef) {
                    *o += v * cf;
                }
            }
        }
        let mut reg = 0.0;
        for (g, &wi) in grad.iter_mut().zip(w) {
            *g = *g * inv_n + self.lambda * wi;
            reg += wi * wi;
        }
        Ok(total * inv_n + 0.5 * self.lambda * reg)
    }

    /// Value only.
    pub fn value(&self, w: &[f64]) -> Result<f64> {
        let classes = self.data.num_classes();
        if w.len() != self.num_params() {
            return Err(contract!("parameter length mismatch"));
        }
        let mut ws = Workspace::new(classes);
        let mut total = 0.0;
        for ex in self.data.examples() {
            total += eval_example(&mut ws, w, ex, self.temps, false)?;
        }
        let reg: f64 = w.iter().map(|v| v * v).sum();
        Ok(total / self.data.len() as f64 + 0.5 * self.lambda * reg)
    }
}

/// `(value, gradient)` of the regularized empirical objective at `W`.
pub fn regularized_objective(
    data: &Dataset,
    w: &WeightMatrix,
    temps: TemperaturePair,
    lambda: f64,
) -> Result<(f64, WeightMatrix)> {
    if w.dim() != data.dim() || w.classes() != data.num_classes() {
        return Err(contract!(
            "weights are {} x {} but data is {} x {}",
            w.dim(),
            w.classes(),
            data.dim(),
            data.num_classes()
        ));
    }
    let obj = Objective::new(data, temps, lambda)?;
    let mut g = WeightMatrix::zeros(w.dim(), w.classes());
    let v = obj.eval(w.as_slice(), g.as_mut_slice())?;
    Ok((v, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tp(t1: f64, t2: f64) -> TemperaturePair {
        TemperaturePair::new(t1, t2).unwrap()
    }

    fn dense_example(x: &[f64], label: usize) -> Example {
        Example::new(SparseVector::from_dense(x), label)
    }

    fn fd_matrix(f: impl Fn(&WeightMatrix) -> f64, w: &WeightMatrix, h: f64) -> Vec<f64> {
        let mut out = vec![0.0; w.as_slice().len()];
        for i in 0..out.len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp.as_mut_slice()[i] += h;
            wm.as_mut_slice()[i] -= h;
            out[i] = (f(&wp) - f(&wm)) / (2.0 * h);
        }
        out
    }

    #[test]
    fn loss_examples() {
        let ex = dense_example(&[1.0, 2.0], 0);
        let w = WeightMatrix::zeros(2, 2);
        let l = surrogate_loss(&ex, &w, TemperaturePair::LOGISTIC).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);

        // t2 < 1 clamp: the target class gets probability exactly 0 or 1
        let temps = tp(0.6, 0.5);
        let l = surrogate_loss_from_activations(&[10.0, -10.0], 0, temps).unwrap();
        assert_eq!(l, 0.0);
        let l = surrogate_loss_from_activations(&[10.0, -10.0], 1, temps).unwrap();
        assert!((l - 2.5).abs() < 1e-15);
        let l = surrogate_loss_from_activations(&[10.0, -10.0], 1, tp(1.0, 0.5)).unwrap();
        assert_eq!(l, f64::INFINITY);
    }

    #[test]
    fn saturated_gradient_is_zero_or_error() {
        // t2 > t1 and p = 0 exactly: importance factor kills the gradient
        let g = activation_grad(&[10.0, -10.0], 1, tp(0.5, 0.8)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let ex = dense_example(&[1.0, -1.0], 1);
        let w = WeightMatrix::new(2, 2, vec![5.0, -5.0, -5.0, 5.0]).unwrap();
        let g = surrogate_grad(&ex, &w, tp(0.5, 0.8)).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        // t1 >= 1 and t2 <= t1: no finite limit
        assert_eq!(activation_grad(&[10.0, -10.0], 1, tp(1.0, 0.5)), Err(Error::Saturated));
    }

    #[test]
    fn logistic_gradient_reduction() {
        let ex = dense_example(&[0.5, -1.5, 2.0], 2);
        let w = WeightMatrix::new(3, 3, vec![0.1, -0.2, 0.3, 0.4, 0.0, -0.1, 0.2, 0.2, -0.3]).unwrap();
        let g = surrogate_grad(&ex, &w, TemperaturePair::LOGISTIC).unwrap();
        let a = w.activations(&ex.x).unwrap();
        let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = a.iter().map(|v| (v - m).exp()).sum();
        for j in 0..3 {
            for c in 0..3 {
                let q = (a[c] - m).exp() / s;
                let onehot = if c == 2 { 1.0 } else { 0.0 };
                let want = (q - onehot) * ex.x.to_dense(3)[j];
                assert!((g.get(j, c) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn surrogate_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pairs = [(1.0, 1.0), (1.3, 1.0), (1.5, 1.5), (0.6, 1.6), (1.0, 1.6), (0.8, 1.2), (0.5, 0.5), (0.7, 0.4)];
        for &(t1, t2) in &pairs {
            let temps = tp(t1, t2);
            for _ in 0..10 {
                let d = rng.random_range(1..5);
                let c = rng.random_range(2..5);
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let ex = dense_example(&x, rng.random_range(0..c));
                let w = WeightMatrix::new(d, c, (0..d * c).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap();
                let g = surrogate_grad(&ex, &w, temps).unwrap();
                let fd = fd_matrix(|w| surrogate_loss(&ex, w, temps).unwrap(), &w, 1e-6);
                let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
                for (a, b) in g.as_slice().iter().zip(&fd) {
                    assert!((a - b).abs() / scale <= 1e-5, "temps=({t1},{t2}) an={a} fd={b}");
                }
            }
        }
    }

    #[test]
    fn binary_matches_two_column_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for &(t1, t2) in &[(1.0, 1.0), (0.6, 1.6), (0.4, 0.7), (1.3, 1.1)] {
            let temps = tp(t1, t2);
            for _ in 0..50 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let w: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let xs = SparseVector::from_dense(&x);
                for c in [Sign::Pos, Sign::Neg] {
                    let lb = binary_loss(&xs, c, &w, temps).unwrap();
                    let lm = surrogate_loss(
                        &Example::new(xs.clone(), c.class_index()),
                        &WeightMatrix::from_binary(&w),
                        temps,
                    )
                    .unwrap();
                    assert!((lb - lm).abs() <= 1e-12 || (lb.is_infinite() && lm.is_infinite()));
                }
            }
        }
    }

    #[test]
    fn binary_examples() {
        let temps = TemperaturePair::LOGISTIC;
        assert!((binary_loss_at_margin(0.0, Sign::Pos, temps).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        for &(t1, t2) in &[(1.0, 1.0), (0.6, 1.6), (0.5, 0.5)] {
            let l = binary_loss_at_margin(1e3, Sign::Pos, tp(t1, t2)).unwrap();
            assert!(l < 1e-3, "({t1},{t2}) {l}");
        }
        // plateau: t2 <= t1 < 1, a <= -2/(1-t2)
        let temps = tp(0.8, 0.6);
        for a in [-5.0, -7.5, -20.0, -1e4] {
            assert!((binary_loss_at_margin(a, Sign::Pos, temps).unwrap() - 5.0).abs() < 1e-14);
        }
        // logistic closed form
        for a in [-3.0, -0.5, 0.7, 4.0] {
            let l = binary_loss_at_margin(a, Sign::Pos, temps_logistic()).unwrap();
            assert!((l - (1.0 + (-a).exp()).ln()).abs() < 1e-14);
        }
    }

    fn temps_logistic() -> TemperaturePair {
        TemperaturePair::LOGISTIC
    }

    #[test]
    fn binary_grad_examples() {
        let x = SparseVector::from_dense(&[1.0, -2.0]);
        let w = [0.3, 0.8];
        let a = x.dot(&w);
        let sigma = 1.0 / (1.0 + (-a).exp());
        let g = binary_grad(&x, Sign::Pos, &w, TemperaturePair::LOGISTIC).unwrap();
        assert!((g[0] - (sigma - 1.0) * 1.0).abs() < 1e-15);
        assert!((g[1] - (sigma - 1.0) * -2.0).abs() < 1e-15);

        // zero margin: -(c/2) x p^(t2-t1), p = 1/2
        let w0 = [0.0, 0.0];
        let temps = tp(0.6, 1.6);
        let g = binary_grad(&x, Sign::Neg, &w0, temps).unwrap();
        let f = 0.5f64.powf(1.0);
        assert!((g[0] - 0.5 * f * 1.0).abs() < 1e-14);
        assert!((g[1] - 0.5 * f * -2.0).abs() < 1e-14);
    }

    #[test]
    fn binary_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for &(t1, t2) in &[(1.0, 1.0), (0.6, 1.6), (1.3, 1.0), (0.5, 0.8), (1.0, 1.6)] {
            let temps = tp(t1, t2);
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let xs = SparseVector::from_dense(&x);
                let c = if rng.random_bool(0.5) { Sign::Pos } else { Sign::Neg };
                let g = binary_grad(&xs, c, &w, temps).unwrap();
                let h = 1e-6;
                let scale = g.iter().fold(1e-8f64, |m, v| m.max(v.abs()));
                for j in 0..3 {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[j] += h;
                    wm[j] -= h;
                    let fd = (binary_loss(&xs, c, &wp, temps).unwrap() - binary_loss(&xs, c, &wm, temps).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[j]).abs() / scale <= 1e-5, "({t1},{t2}) fd={fd} an={}", g[j]);
                }
            }
        }
    }

    #[test]
    fn loss_cap_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &t1 in &[0.4, 0.6, 0.8] {
            for &t2 in &[0.5, 1.0, 1.6] {
                let temps = tp(t1, t2);
                let cap = 1.0 / (1.0 - t1);
                for _ in 0..200 {
                    let c = rng.random_range(2..6);
                    let a: Vec<f64> = (0..c).map(|_| rng.random_range(-200.0..200.0)).collect();
                    let l = surrogate_loss_from_activations(&a, rng.random_range(0..c), temps).unwrap();
                    assert!(l >= 0.0 && l <= cap + 1e-9);
                }
            }
        }
    }

    #[test]
    fn objective_examples() {
        let ex = dense_example(&[1.0, -0.5], 1);
        let data = Dataset::new(vec![ex.clone()], 2, 3).unwrap();
        let w = WeightMatrix::new(2, 3, vec![0.2, -0.1, 0.4, 0.0, 0.3, -0.2]).unwrap();
        let temps = tp(0.6, 1.6);
        let (v, _) = regularized_objective(&data, &w, temps, 0.0).unwrap();
        assert_eq!(v, surrogate_loss(&ex, &w, temps).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let exs: Vec<Example> = (0..7)
            .map(|_| dense_example(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], rng.random_range(0..4)))
            .collect();
        let data = Dataset::new(exs, 2, 4).unwrap();
        let (v, _) = regularized_objective(&data, &WeightMatrix::zeros(2, 4), TemperaturePair::LOGISTIC, 0.3).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-14);

        let empty = Dataset::new(vec![], 2, 2).unwrap();
        assert!(regularized_objective(&empty, &WeightMatrix::zeros(2, 2), temps, 0.0).is_err());
        assert!(Objective::new(&data, temps, -1.0).is_err());
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let exs: Vec<Example> = (0..5)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                dense_example(&x, rng.random_range(0..3))
            })
            .collect();
        let data = Dataset::new(exs, 3, 3).unwrap();
        for &(t1, t2) in &[(1.0, 1.0), (0.6, 1.6), (1.2, 0.9)] {
            let temps = tp(t1, t2);
            let w = WeightMatrix::new(3, 3, (0..9).map(|_| rng.random_range(-0.7..0.7)).collect()).unwrap();
            let (_, g) = regularized_objective(&data, &w, temps, 0.05).unwrap();
            let fd = fd_matrix(|w| regularized_objective(&data, w, temps, 0.05).unwrap().0, &w, 1e-6);
            let scale = fd.iter().fold(1e-8f64, |m, v| m.max(v.abs()));
            for (a, b) in g.as_slice().iter().zip(&fd) {
                assert!((a - b).abs() / scale <= 1e-5);
            }
        }
    }

    #[test]
    fn importance_factor_damps_low_probability_examples() {
        // sweep the margin of the target class downward; gradient norm decreases with p
        let temps = tp(0.6, 1.6);
        let mut prev = f64::INFINITY;
        let mut prev_p = 1.0;
        for k in 0..40 {
            let a = [-(k as f64) * 0.5, 0.0];
            let g = activation_grad(&a, 0, temps).unwrap();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let p = crate::partition::tempered_probs(&a, temps.t2).unwrap()[0];
            assert!(p <= prev_p);
            // |coef| <= p^(t2 - t1) * sqrt(2)
            assert!(norm <= p.powf(temps.gap()) * 2f64.sqrt() + 1e-15);
            if k > 6 {
                assert!(norm <= prev, "k={k}");
            }
            prev = norm;
            prev_p = p;
        }
    }
}
