//! Fitting and prediction for the multiclass two-temperature classifier.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, SparseVector, WeightMatrix};
use crate::error::{contract, Error, Result};
use crate::loss::{Objective, TemperaturePair};
use crate::optim::{lbfgs_minimize, OptimizationTrace, OptimizerConfig};
use crate::partition::tempered_probs;
use crate::tempered::Temperature;

/// Initialization and optimizer settings for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub seed: u64,
    /// Standard deviation of the Normal initialization of every weight.
    pub init_stddev: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            seed: 0,
            // variance 1e-10
            init_stddev: 1e-5,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitWarning {
    /// Every example has an all-zero feature vector; only the regularizer shapes `W`.
    NoFeatureSignal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub trace: OptimizationTrace,
    pub warnings: Vec<FitWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtlrModel {
    weights: WeightMatrix,
    temps: TemperaturePair,
    lambda: f64,
    fitted: bool,
    report: Option<FitReport>,
}

impl TtlrModel {
    /// An unfitted model with zero weights.
    pub fn new(dim: usize, num_classes: usize, temps: TemperaturePair, lambda: f64) -> Self {
        TtlrModel {
            weights: WeightMatrix::zeros(dim, num_classes),
            temps,
            lambda,
            fitted: false,
            report: None,
        }
    }

    /// A fitted model from stored parameters (e.g. a deserialized model file).
    pub fn from_parts(weights: WeightMatrix, temps: TemperaturePair, lambda: f64) -> Result<Self> {
        if weights.classes() < 2 {
            return Err(contract!("a model needs at least 2 classes"));
        }
        Ok(TtlrModel {
            weights,
            temps,
            lambda,
            fitted: true,
            report: None,
        })
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn temps(&self) -> TemperaturePair {
        self.temps
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_classes(&self) -> usize {
        self.weights.classes()
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn report(&self) -> Option<&FitReport> {
        self.report.as_ref()
    }

    fn activations(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if !self.fitted {
            return Err(contract!("model is not fitted"));
        }
        self.weights.activations(x)
    }

    /// 0-based class with the largest activation; ties go to the lowest index.
    pub fn predict(&self, x: &SparseVector) -> Result<usize> {
        let a = self.activations(x)?;
        Ok(argmax(&a))
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>> {
        let a = self.activations(x)?;
        tempered_probs(&a, self.temps.t2)
    }

    /// Fraction of examples whose predicted class equals the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(contract!("accuracy over an empty dataset"));
        }
        let mut hits = 0usize;
        for ex in data.examples() {
            if self.predict(&ex.x)? == ex.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }
}

/// Index of the first maximal entry.
pub fn argmax(a: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in a.iter().enumerate().skip(1) {
        if v > a[best] {
            best = i;
        }
    }
    best
}

/// `W` entrywise from `Normal(0, stddev^2)`, row-major, seeded.
pub fn init_weights(dim: usize, classes: usize, stddev: f64, seed: u64) -> WeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dim * classes)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            stddev * z
        })
        .collect();
    WeightMatrix::new(dim, classes, data).expect("finite init")
}

/// Minimize the regularized objective from a seeded Normal initialization.
pub fn fit(data: &Dataset, temps: TemperaturePair, lambda: f64, config: &FitConfig) -> Result<TtlrModel> {
    let init = init_weights(data.dim(), data.num_classes().max(1), config.init_stddev, config.seed);
    fit_from(data, temps, lambda, init, config)
}

/// As [`fit`], starting from the given weights.
pub fn fit_from(
    data: &Dataset,
    temps: TemperaturePair,
    lambda: f64,
    init: WeightMatrix,
    config: &FitConfig,
) -> Result<TtlrModel> {
    if data.num_classes() < 2 {
        return Err(contract!("need at least 2 classes, dataset has {}", data.num_classes()));
    }
    if !(config.init_stddev >= 0.0) {
        return Err(contract!("init_stddev must be >= 0"));
    }
    if init.dim() != data.dim() || init.classes() != data.num_classes() {
        return Err(contract!("initial weights do not match the dataset shape"));
    }
    let objective = Objective::new(data, temps, lambda)?;

    let mut failure: Option<Error> = None;
    let eval = |w: &[f64], g: &mut [f64]| match objective.eval(w, g) {
        Ok(v) => v,
        // Saturated trial points are rejected by the line search.
        Err(Error::Saturated) => f64::INFINITY,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let (w, trace) = lbfgs_minimize(eval, init.as_slice(), &config.optimizer)?;
    if let Some(e) = failure {
        return Err(e);
    }

    let mut warnings = Vec::new();
    if data.examples().iter().all(|e| e.x.values().iter().all(|&v| v == 0.0)) {
        warnings.push(FitWarning::NoFeatureSignal);
    }
    Ok(TtlrModel {
        weights: WeightMatrix::new(data.dim(), data.num_classes(), w)?,
        temps,
        lambda,
        fitted: true,
        report: Some(FitReport { trace, warnings }),
    })
}

/// The method family: logistic regression and t-logistic regression are temperature
/// special cases of the two-temperature loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// `t1 = t2 = 1`.
    PlainLr,
    /// `t1 = 1`, `t2 = t`.
    TLr(Temperature),
    Ttlr(TemperaturePair),
}

impl Method {
    pub fn t_lr(t: f64) -> Result<Self> {
        Ok(Method::TLr(Temperature::new(t)?))
    }

    pub fn ttlr(t1: f64, t2: f64) -> Result<Self> {
        Ok(Method::Ttlr(TemperaturePair::new(t1, t2)?))
    }

    /// The setting used for the noise experiments: `t1 = 0.6`, `t2 = 1.6`.
    pub fn robust_default() -> Self {
        Method::Ttlr(TemperaturePair::new(0.6, 1.6).expect("valid"))
    }

    pub fn temps(&self) -> TemperaturePair {
        match *self {
            Method::PlainLr => TemperaturePair::LOGISTIC,
            Method::TLr(t) => TemperaturePair { t1: Temperature::ONE, t2: t },
            Method::Ttlr(p) => p,
        }
    }
}

/// A fit-ready specialization: method temperatures plus regularization and fit settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trainer {
    pub method: Method,
    pub lambda: f64,
    pub config: FitConfig,
}

impl Trainer {
    pub fn temps(&self) -> TemperaturePair {
        self.method.temps()
    }

    pub fn fit(&self, data: &Dataset) -> Result<TtlrModel> {
        fit(data, self.method.temps(), self.lambda, &self.config)
    }
}

pub fn make_baseline(method: Method, lambda: f64, config: FitConfig) -> Trainer {
    Trainer { method, lambda, config }
}
