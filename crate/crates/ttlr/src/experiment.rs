//! Noise-robustness experiments: repeated train/test runs with noise injected into the
//! training set, lambda picked by k-fold cross-validation, and accuracy measured on the
//! clean test set.
//!
//! A spec can be written as TOML:
//!
//! ```toml
//! seed = 7
//! repetitions = 10
//! timing = true            # false writes 0 to the `seconds` column
//! bias = 1.0               # optional constant feature appended to every example
//! methods = [{ kind = "plain_lr" }, { kind = "t_lr", t = 1.6 }, { kind = "ttlr", t1 = 0.6, t2 = 1.6 }]
//!
//! [data]
//! source = "synthetic"     # or "files" with `train`, optional `test`, optional `dim`
//! n_train = 2000
//! n_test = 2000
//! means = [[2.0, 0.0], [-2.0, 0.0]]
//! stddev = 1.0
//!
//! [noise]
//! kind = "outlier"         # none | outlier | random_flip | margin_flip
//! levels = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
//! sigma = 10.0
//!
//! [cv]
//! folds = 5
//! lambdas = [1e-10, 1e-9, ...]   # defaults to 13 log-spaced values over [1e-10, 1e2]
//! ```
//!
//! Every random choice draws from a sub-seed derived from `seed` and a tag (`train`,
//! `test`, `split`, `noise`, `folds`, `init`), so any (level, repetition) cell can be
//! rerun on its own. Without a test file, each repetition splits the data 50/50.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ttlr_core::noise::{synth_gaussians, NoiseKind, NoiseSpec};
use ttlr_core::{fit, Dataset, FitConfig, Method, TemperaturePair};

use crate::libsvm::{read_libsvm_file, ParseOptions};

pub const LAMBDA_MIN: f64 = 1e-10;
pub const LAMBDA_MAX: f64 = 1e2;

pub fn default_lambda_grid() -> Vec<f64> {
    (-10..=2).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    PlainLr,
    TLr { t: f64 },
    Ttlr { t1: f64, t2: f64 },
}

impl MethodSpec {
    pub fn to_method(self) -> Result<Method> {
        Ok(match self {
            MethodSpec::PlainLr => Method::PlainLr,
            MethodSpec::TLr { t } => Method::t_lr(t)?,
            MethodSpec::Ttlr { t1, t2 } => Method::ttlr(t1, t2)?,
        })
    }

    /// The `method` column: `plain_lr`, `t_lr(1.6)`, `ttlr(0.6,1.6)`.
    pub fn name(self) -> String {
        match self {
            MethodSpec::PlainLr => "plain_lr".into(),
            MethodSpec::TLr { t } => format!("t_lr({t})"),
            MethodSpec::Ttlr { t1, t2 } => format!("ttlr({t1},{t2})"),
        }
    }

    pub fn temps(self) -> Result<TemperaturePair> {
        Ok(self.to_method()?.temps())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        #[serde(default = "default_n")]
        n_train: usize,
        #[serde(default = "default_n")]
        n_test: usize,
        #[serde(default = "default_means")]
        means: Vec<Vec<f64>>,
        #[serde(default = "one")]
        stddev: f64,
    },
    Files {
        train: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        #[serde(default)]
        dim: Option<usize>,
    },
}

fn default_n() -> usize {
    2000
}

fn default_means() -> Vec<Vec<f64>> {
    vec![vec![2.0, 0.0], vec![-2.0, 0.0]]
}

fn one() -> f64 {
    1.0
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            n_train: default_n(),
            n_test: default_n(),
            means: default_means(),
            stddev: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindName {
    None,
    Outlier,
    RandomFlip,
    MarginFlip,
}

impl NoiseKindName {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKindName::None => "none",
            NoiseKindName::Outlier => "outlier",
            NoiseKindName::RandomFlip => "random_flip",
            NoiseKindName::MarginFlip => "margin_flip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweep {
    pub kind: NoiseKindName,
    /// Ratio of contaminated examples, or flip probability for `random_flip`.
    #[serde(default = "zero_level")]
    pub levels: Vec<f64>,
    /// Outlier noise standard deviation.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn zero_level() -> Vec<f64> {
    vec![0.0]
}

fn default_sigma() -> f64 {
    10.0
}

impl Default for NoiseSweep {
    fn default() -> Self {
        NoiseSweep {
            kind: NoiseKindName::None,
            levels: zero_level(),
            sigma: default_sigma(),
        }
    }
}

impl NoiseSweep {
    fn spec(&self, level: f64, seed: u64) -> Option<NoiseSpec> {
        let kind = match self.kind {
            NoiseKindName::None => return None,
            NoiseKindName::Outlier => NoiseKind::Outlier {
                sigma: self.sigma,
                ratio: level,
            },
            NoiseKindName::RandomFlip => NoiseKind::RandomFlip { prob: level },
            NoiseKindName::MarginFlip => NoiseKind::MarginFlip { ratio: level },
        };
        Some(NoiseSpec { kind, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSpec {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_lambda_grid")]
    pub lambdas: Vec<f64>,
}

fn default_folds() -> usize {
    5
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: default_folds(),
            lambdas: default_lambda_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_rep")]
    pub repetitions: usize,
    #[serde(default = "yes")]
    pub timing: bool,
    #[serde(default)]
    pub bias: Option<f64>,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub noise: NoiseSweep,
    #[serde(default)]
    pub cv: CvSpec,
}

fn one_rep() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).context("invalid experiment spec")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.repetitions >= 1, "repetitions must be >= 1");
        ensure!(!self.methods.is_empty(), "at least one method is required");
        for m in &self.methods {
            m.to_method().with_context(|| format!("method {}", m.name()))?;
        }
        ensure!(self.cv.folds >= 2, "cross-validation needs at least 2 folds");
        ensure!(!self.cv.lambdas.is_empty(), "lambda grid is empty");
        for &l in &self.cv.lambdas {
            ensure!(
                (LAMBDA_MIN..=LAMBDA_MAX).contains(&l),
                "lambda {l} outside [{LAMBDA_MIN:e}, {LAMBDA_MAX:e}]"
            );
        }
        ensure!(!self.noise.levels.is_empty(), "noise level list is empty");
        for &level in &self.noise.levels {
            match self.noise.spec(level, 0) {
                Some(n) => n.validate()?,
                None => ensure!(level == 0.0, "noise kind `none` only allows level 0"),
            }
        }
        if let Some(b) = self.bias {
            ensure!(b.is_finite(), "bias value must be finite");
        }
        if let DataSource::Synthetic {
            n_train,
            n_test,
            means,
            stddev,
        } = &self.data
        {
            let c = means.len();
            ensure!(c >= 2, "synthetic data needs at least 2 class means");
            ensure!(
                *n_train > 0 && *n_test > 0 && n_train % c == 0 && n_test % c == 0,
                "synthetic train/test sizes must be positive multiples of the class count"
            );
            ensure!(*stddev > 0.0, "synthetic stddev must be > 0");
            ensure!(n_train / c >= 1 && *n_train >= self.cv.folds, "too few training points for {} folds", self.cv.folds);
        }
        Ok(())
    }
}

/// One fitted model's outcome. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub noise_kind: String,
    pub noise_level: f64,
    pub rep: usize,
    pub lambda: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

pub const CSV_HEADER: &str = "method,noise_kind,noise_level,rep,lambda,accuracy,seconds";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one named random stream of one cell.
pub fn sub_seed(seed: u64, tag: &str, rep: usize, level: usize) -> u64 {
    let mut h = splitmix64(seed);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h = splitmix64(h ^ rep as u64);
    splitmix64(h ^ level as u64)
}

/// Clean train/test data for one repetition.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

enum Loaded {
    Synthetic,
    Fixed(Split),
    Pool(Dataset),
}

fn resize(data: &Dataset, dim: usize) -> Result<Dataset> {
    Ok(Dataset::new(data.examples().to_vec(), dim, data.num_classes())?)
}

fn load(spec: &ExperimentSpec) -> Result<Loaded> {
    let DataSource::Files { train, test, dim } = &spec.data else {
        return Ok(Loaded::Synthetic);
    };
    let opts = ParseOptions {
        dim: *dim,
        labels: None,
    };
    let tr = read_libsvm_file(train, &opts).with_context(|| format!("reading {}", train.display()))?;
    let Some(test) = test else {
        return Ok(Loaded::Pool(tr.data));
    };
    let te = read_libsvm_file(
        test,
        &ParseOptions {
            dim: *dim,
            labels: Some(tr.labels.clone()),
        },
    )
    .with_context(|| format!("reading {}", test.display()))?;
    let d = tr.data.dim().max(te.data.dim());
    Ok(Loaded::Fixed(Split {
        train: resize(&tr.data, d)?,
        test: resize(&te.data, d)?,
    }))
}

fn with_bias(split: Split, bias: Option<f64>) -> Split {
    match bias {
        Some(b) => Split {
            train: split.train.with_bias(b),
            test: split.test.with_bias(b),
        },
        None => split,
    }
}

fn split_for_rep(spec: &ExperimentSpec, loaded: &Loaded, rep: usize) -> Result<Split> {
    let split = match (loaded, &spec.data) {
        (
            Loaded::Synthetic,
            DataSource::Synthetic {
                n_train,
                n_test,
                means,
                stddev,
            },
        ) => {
            let c = means.len();
            Split {
                train: synth_gaussians(n_train / c, means, *stddev, sub_seed(spec.seed, "train", rep, 0))?,
                test: synth_gaussians(n_test / c, means, *stddev, sub_seed(spec.seed, "test", rep, 0))?,
            }
        }
        (Loaded::Fixed(s), _) => s.clone(),
        (Loaded::Pool(all), _) => {
            let mut idx: Vec<usize> = (0..all.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, "split", rep, 0)));
            let half = all.len() / 2;
            ensure!(half > 0, "need at least 2 examples to split");
            Split {
                train: all.select(&idx[..half]),
                test: all.select(&idx[half..]),
            }
        }
        _ => unreachable!("loaded data matches its source"),
    };
    Ok(with_bias(split, spec.bias))
}

fn fold_ids(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut ids = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        ids[i] = pos % folds;
    }
    ids
}

/// Mean validation accuracy per lambda, in grid order.
pub fn cross_validate(
    data: &Dataset,
    temps: TemperaturePair,
    lambdas: &[f64],
    folds: usize,
    fold_seed: u64,
    config: &FitConfig,
) -> Result<Vec<f64>> {
    ensure!(data.len() >= folds, "{} examples cannot fill {folds} folds", data.len());
    let ids = fold_ids(data.len(), folds, fold_seed);
    let parts: Vec<(Dataset, Dataset)> = (0..folds)
        .map(|k| {
            let (tr, va): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| ids[i] != k);
            (data.select(&tr), data.select(&va))
        })
        .collect();
    lambdas
        .par_iter()
        .map(|&lambda| {
            let mut total = 0.0;
            for (tr, va) in &parts {
                total += fit(tr, temps, lambda, config)?.accuracy(va)?;
            }
            Ok(total / folds as f64)
        })
        .collect()
}

/// Index of the best score; ties go to the larger lambda.
pub fn select_lambda(lambdas: &[f64], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        let better = scores[i] > scores[best] || (scores[i] == scores[best] && lambdas[i] > lambdas[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Clean data of one repetition, for rerunning a single cell with [`run_cell`].
pub fn prepare_split(spec: &ExperimentSpec, rep: usize) -> Result<Split> {
    spec.validate()?;
    split_for_rep(spec, &load(spec)?, rep)
}

/// All rows of one (noise level, repetition) cell, in method order.
pub fn run_cell(spec: &ExperimentSpec, split: &Split, level_idx: usize, rep: usize) -> Result<Vec<ResultRow>> {
    let level = spec.noise.levels[level_idx];
    let noisy = match spec.noise.spec(level, sub_seed(spec.seed, "noise", rep, level_idx)) {
        Some(n) => n.apply(&split.train)?,
        None => split.train.clone(),
    };
    let config = FitConfig {
        seed: sub_seed(spec.seed, "init", rep, 0),
        ..FitConfig::default()
    };
    let fold_seed = sub_seed(spec.seed, "folds", rep, level_idx);
    let mut rows = Vec::with_capacity(spec.methods.len());
    for m in &spec.methods {
        let temps = m.temps()?;
        let scores = cross_validate(&noisy, temps, &spec.cv.lambdas, spec.cv.folds, fold_seed, &config)?;
        let lambda = spec.cv.lambdas[select_lambda(&spec.cv.lambdas, &scores)];
        let start = Instant::now();
        let model = fit(&noisy, temps, lambda, &config)?;
        let seconds = if spec.timing { start.elapsed().as_secs_f64() } else { 0.0 };
        rows.push(ResultRow {
            method: m.name(),
            noise_kind: spec.noise.kind.as_str().into(),
            noise_level: level,
            rep,
            lambda,
            accuracy: model.accuracy(&split.test)?,
            seconds,
        });
    }
    Ok(rows)
}

/// Runs every cell, in parallel, and returns rows ordered by noise level, then method,
/// then repetition.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let loaded = load(spec)?;
    let splits: Vec<Split> = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| split_for_rep(spec, &loaded, rep))
        .collect::<Result<_>>()?;
    let levels = spec.noise.levels.len();
    let cells: Vec<Vec<ResultRow>> = (0..levels * spec.repetitions)
        .into_par_iter()
        .map(|i| {
            let (level_idx, rep) = (i / spec.repetitions, i % spec.repetitions);
            run_cell(spec, &splits[rep], level_idx, rep)
                .with_context(|| format!("noise level {}, repetition {rep}", spec.noise.levels[level_idx]))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cells.len() * spec.methods.len());
    for level_idx in 0..levels {
        for m in 0..spec.methods.len() {
            for rep in 0..spec.repetitions {
                rows.push(cells[level_idx * spec.repetitions + rep][m].clone());
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        bail!("unexpected CSV header `{}`", header.join(","));
    }
    Ok(r.deserialize().collect::<csv::Result<_>>()?)
}

pub fn write_json<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    Ok(serde_json::from_reader(input)?)
}

/// Accuracy statistics over the repetitions of one (method, noise kind, level) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub noise_kind: String,
    pub noise_level: f64,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub std: f64,
}

/// Groups rows by (method, noise kind, level) in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(&ResultRow, Vec<f64>)> = Vec::new();
    for r in rows {
        let key = |g: &ResultRow| g.method == r.method && g.noise_kind == r.noise_kind && g.noise_level == r.noise_level;
        match groups.iter_mut().find(|(g, _)| key(g)) {
            Some((_, accs)) => accs.push(r.accuracy),
            None => groups.push((r, vec![r.accuracy])),
        }
    }
    groups
        .into_iter()
        .map(|(r, accs)| {
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let std = if accs.len() > 1 {
                (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                method: r.method.clone(),
                noise_kind: r.noise_kind.clone(),
                noise_level: r.noise_level,
                count: accs.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// Table of mean ± std accuracy in percent.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let width = summary.iter().map(|s| s.method.len()).max().unwrap_or(6).max(6);
    let mut s = format!("{:<width$}  {:<11}  {:>5}  {:>4}  accuracy (%)\n", "method", "noise", "level", "reps");
    for r in summary {
        let _ = writeln!(
            s,
            "{:<width$}  {:<11}  {:>5}  {:>4}  {:.2} ± {:.2}",
            r.method,
            r.noise_kind,
            r.noise_level,
            r.count,
            100.0 * r.mean,
            100.0 * r.std
        );
    }
    s
}
