//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Fully deterministic: no randomness and a fixed evaluation order, so identical
//! inputs give bit-identical traces.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the gradient sup-norm falls to this value.
    pub grad_tol: f64,
    pub line_search: LineSearchConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-6,
            line_search: LineSearchConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if self.memory == 0 {
            return Err(contract!("L-BFGS memory must be >= 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(contract!("gradient tolerance must be > 0"));
        }
        if !(ls.c1 > 0.0 && ls.c1 < 1.0) || !(ls.backtrack > 0.0 && ls.backtrack < 1.0) {
            return Err(contract!("line search constants must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step satisfying the Armijo condition was found; the best point so far is returned.
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub value: f64,
    pub grad_norm: f64,
    /// Accepted step length along the search direction (0 for the initial record).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    /// Record 0 is the starting point; each later record is an accepted step.
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Curvature pairs rejected by the `s'y` guard.
    pub skipped_pairs: usize,
}

impl OptimizationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_value(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.value)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.grad_norm)
    }
}

/// Pairs with `s'y <= CURVATURE_EPS * |s| |y|` are not stored.
pub const CURVATURE_EPS: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: writes `-H g` into `dir`.
fn two_loop(history: &VecDeque<Pair>, g: &[f64], dir: &mut [f64], alpha: &mut Vec<f64>) {
    dir.copy_from_slice(g);
    alpha.clear();
    for p in history.iter().rev() {
        let a = p.rho * dot(&p.s, dir);
        for (d, y) in dir.iter_mut().zip(&p.y) {
            *d -= a * y;
        }
        alpha.push(a);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        dir.iter_mut().for_each(|d| *d *= gamma);
    }
    for (p, a) in history.iter().zip(alpha.iter().rev()) {
        let b = p.rho * dot(&p.y, dir);
        for (d, s) in dir.iter_mut().zip(&p.s) {
            *d += (a - b) * s;
        }
    }
    dir.iter_mut().for_each(|d| *d = -*d);
}

/// Minimize `objective`, which returns the value at `x` and writes the gradient into its
/// second argument. A non-finite value at a trial point is treated as a rejected step.
pub fn lbfgs_minimize<F>(mut objective: F, init: &[f64], config: &OptimizerConfig) -> Result<(Vec<f64>, OptimizationTrace)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    config.validate()?;
    let n = init.len();
    let mut x = init.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(contract!("objective is not finite at the initial point"));
    }

    let mut records = vec![IterationRecord {
        value: f,
        grad_norm: sup_norm(&g),
        step: 0.0,
    }];
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(config.memory);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_buf = Vec::with_capacity(config.memory);
    let mut skipped = 0;
    let ls = config.line_search;

    let termination = loop {
        if sup_norm(&g) <= config.grad_tol {
            break Termination::Converged;
        }
        if records.len() > config.max_iters {
            break Termination::MaxIterations;
        }

        two_loop(&history, &g, &mut dir, &mut alpha_buf);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) || !slope.is_finite() {
            // Lost descent; restart from steepest descent.
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &dir);
        }
        let mut step = if history.is_empty() {
            (1.0 / libm::sqrt(dot(&g, &g))).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..=ls.max_backtracks {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            let f_new = objective(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + ls.c1 * step * slope && f_new < f {
                accepted = Some(f_new);
                break;
            }
            step *= ls.backtrack;
        }
        let Some(f_new) = accepted else {
            if history.is_empty() {
                break Termination::LineSearchFailed;
            }
            // Retry once from steepest descent before giving up.
            history.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let ns = libm::sqrt(dot(&s, &s));
        let ny = libm::sqrt(dot(&y, &y));
        if sy > CURVATURE_EPS * ns * ny && sy.is_finite() {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        } else {
            skipped += 1;
        }

        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut g, &mut g_new);
        f = f_new;
        records.push(IterationRecord {
            value: f,
            grad_norm: sup_norm(&g),
            step,
        });
    };

    Ok((
        x,
        OptimizationTrace {
            records,
            termination,
            skipped_pairs: skipped,
        },
    ))
}
