//! Synthetic Gaussian data and the three training-set corruptions: outlier feature
//! noise, uniform random label flips, and large-margin label flips.
//!
//! Every generator is a pure function of its inputs and seed.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, Example, SparseVector};
use crate::error::{contract, Result};
use crate::loss::TemperaturePair;
use crate::model::{fit, FitConfig};

/// Regularization of the logistic fit that ranks margins for [`inject_margin_flip`].
pub const MARGIN_FIT_LAMBDA: f64 = 1e-4;

/// Isotropic Gaussian blobs, one per entry of `means`, with `n_per_class` points each.
/// Examples are interleaved by class: `(class 0, class 1, ..., class 0, ...)`.
pub fn synth_gaussians(n_per_class: usize, means: &[Vec<f64>], stddev: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(contract!("n_per_class must be positive"));
    }
    if means.len() < 2 {
        return Err(contract!("need at least 2 class means"));
    }
    let dim = means[0].len();
    if dim == 0 || means.iter().any(|m| m.len() != dim) {
        return Err(contract!("class means must share a positive dimension"));
    }
    for i in 0..means.len() {
        for j in 0..i {
            if means[i] == means[j] {
                return Err(contract!("class means {} and {} coincide", j + 1, i + 1));
            }
        }
    }
    if !(stddev > 0.0 && stddev.is_finite()) {
        return Err(contract!("stddev must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n_per_class * means.len());
    for _ in 0..n_per_class {
        for (c, mean) in means.iter().enumerate() {
            let x: Vec<f64> = mean
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + stddev * z
                })
                .collect();
            examples.push(Example::new(SparseVector::from_dense(&x), c));
        }
    }
    Ok(Dataset::from_parts_unchecked(examples, dim, means.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Add `Normal(0, sigma^2)` to every feature of `floor(ratio * N)` examples.
    Outlier { sigma: f64, ratio: f64 },
    /// Flip each binary label independently with probability `prob`.
    RandomFlip { prob: f64 },
    /// Flip `floor(ratio * N)` binary labels, favouring large logistic margins.
    MarginFlip { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::Outlier { sigma, ratio } => {
                check_ratio(ratio)?;
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(contract!("outlier sigma must be > 0, got {sigma}"));
                }
            }
            NoiseKind::RandomFlip { prob } => {
                if !(0.0..=1.0).contains(&prob) {
                    return Err(contract!("flip probability {prob} outside [0, 1]"));
                }
            }
            NoiseKind::MarginFlip { ratio } => check_ratio(ratio)?,
        }
        Ok(())
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.validate()?;
        match self.kind {
            NoiseKind::Outlier { sigma, ratio } => inject_outlier_noise(data, sigma, ratio, self.seed),
            NoiseKind::RandomFlip { prob } => inject_random_flip(data, prob, self.seed),
            NoiseKind::MarginFlip { ratio } => inject_margin_flip(data, ratio, self.seed),
        }
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&ratio) {
        return Err(contract!("noise ratio {ratio} outside [0, 0.5]"));
    }
    Ok(())
}

fn count_for(ratio: f64, n: usize) -> usize {
    libm::floor(ratio * n as f64) as usize
}

fn require_binary(data: &Dataset, what: &str) -> Result<()> {
    if data.num_classes() != 2 {
        return Err(contract!("{what} needs a binary dataset, got {} classes", data.num_classes()));
    }
    Ok(())
}

/// Contaminates `floor(ratio * N)` examples, chosen uniformly without replacement, with
/// i.i.d. `Normal(0, sigma^2)` noise on every coordinate. Contaminated rows become dense.
pub fn inject_outlier_noise(data: &Dataset, sigma: f64, ratio: f64, seed: u64) -> Result<Dataset> {
    NoiseSpec {
        kind: NoiseKind::Outlier { sigma, ratio },
        seed,
    }
    .validate()?;
    let k = count_for(ratio, data.len());
    if k == 0 {
        return Ok(data.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, data.len(), k).into_vec();
    chosen.sort_unstable();
    let mut examples = data.examples().to_vec();
    for &n in &chosen {
        let mut dense = examples[n].x.to_dense(data.dim());
        for v in dense.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
        examples[n].x = SparseVector::from_dense(&dense);
    }
    Ok(Dataset::from_parts_unchecked(examples, data.dim(), data.num_classes()))
}

/// Positions of the examples [`inject_outlier_noise`] would contaminate.
pub fn outlier_indices(n: usize, ratio: f64, seed: u64) -> Vec<usize> {
    let k = count_for(ratio, n);
    if k == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, n, k).into_vec();
    chosen.sort_unstable();
    chosen
}

/// Flips each label of a binary dataset independently with probability `prob`.
pub fn inject_random_flip(data: &Dataset, prob: f64, seed: u64) -> Result<Dataset> {
    require_binary(data, "random label flip")?;
    NoiseSpec {
        kind: NoiseKind::RandomFlip { prob },
        seed,
    }
    .validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = data
        .examples()
        .iter()
        .map(|e| {
            let flip = rng.random_bool(prob);
            Example::new(e.x.clone(), if flip { 1 - e.label } else { e.label })
        })
        .collect();
    Ok(Dataset::from_parts_unchecked(examples, data.dim(), 2))
}

/// `c_n <x_n, w>` with `c = +1` for class index 0 and `-1` for class index 1.
pub fn signed_margins(data: &Dataset, w: &[f64]) -> Vec<f64> {
    data.examples()
        .iter()
        .map(|e| {
            let c = if e.label == 0 { 1.0 } else { -1.0 };
            c * e.x.dot(w)
        })
        .collect()
}

/// The binary weight vector `w_+ - w_-` of a logistic fit on `data`.
pub fn logistic_margin_weights(data: &Dataset) -> Result<Vec<f64>> {
    require_binary(data, "margin weights")?;
    let model = fit(data, TemperaturePair::LOGISTIC, MARGIN_FIT_LAMBDA, &FitConfig::default())?;
    let w = model.weights();
    Ok((0..w.dim()).map(|j| w.get(j, 0) - w.get(j, 1)).collect())
}

/// Sampling weights `s_n = exp(-10 u_n / u_min)` after shifting the margins so that
/// the largest is 0. All-equal margins give uniform weights.
pub fn margin_flip_weights(margins: &[f64]) -> Vec<f64> {
    let u_max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = margins.iter().map(|u| u - u_max).collect();
    let u_min = shifted.iter().copied().fold(f64::INFINITY, f64::min);
    if !(u_min < 0.0) {
        return vec![1.0; margins.len()];
    }
    shifted.iter().map(|u| libm::exp(-10.0 * u / u_min)).collect()
}

/// Draws `k` distinct indices with probability proportional to `weights`, using
/// exponential keys `ln(U) / w` and keeping the `k` largest. Returned in ascending order.
pub fn weighted_sample_without_replacement(weights: &[f64], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = 1.0 - rng.random::<f64>();
            (libm::log(u) / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = keyed.into_iter().take(k).map(|(_, i)| i).collect();
    out.sort_unstable();
    out
}

/// Large-margin label noise: fit logistic regression on the clean data, weight every
/// example by `exp(-10 u_n / u_min)` of its shifted margin, draw `floor(ratio * N)`
/// examples without replacement from those weights and flip exactly their labels.
pub fn inject_margin_flip(data: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    require_binary(data, "margin label flip")?;
    check_ratio(ratio)?;
    let k = count_for(ratio, data.len());
    if k == 0 {
        return Ok(data.clone());
    }
    let w = logistic_margin_weights(data)?;
    margin_flip_with_weights(data, &w, ratio, seed)
}

/// [`inject_margin_flip`] with a precomputed margin weight vector.
pub fn margin_flip_with_weights(data: &Dataset, w: &[f64], ratio: f64, seed: u64) -> Result<Dataset> {
    require_binary(data, "margin label flip")?;
    check_ratio(ratio)?;
    if w.len() != data.dim() {
        return Err(contract!("weight vector length {} != dimension {}", w.len(), data.dim()));
    }
    let k = count_for(ratio, data.len());
    let s = margin_flip_weights(&signed_margins(data, w));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flipped = weighted_sample_without_replacement(&s, k, &mut rng);
    let mut examples = data.examples().to_vec();
    for &n in &flipped {
        examples[n].label = 1 - examples[n].label;
    }
    Ok(Dataset::from_parts_unchecked(examples, data.dim(), 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64) -> Dataset {
        synth_gaussians(n, &[vec![2.0, 0.0], vec![-2.0, 0.0]], 1.0, seed).unwrap()
    }

    fn flips(a: &Dataset, b: &Dataset) -> usize {
        a.labels().zip(b.labels()).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn synth_contracts() {
        assert!(synth_gaussians(0, &[vec![1.0], vec![-1.0]], 1.0, 0).is_err());
        assert!(synth_gaussians(5, &[vec![1.0], vec![1.0]], 1.0, 0).is_err());
        assert!(synth_gaussians(5, &[vec![1.0]], 1.0, 0).is_err());
        assert_eq!(blobs(50, 3), blobs(50, 3));
        assert_ne!(blobs(50, 3), blobs(50, 4));
        let d = blobs(10, 1);
        assert_eq!((d.len(), d.dim(), d.num_classes()), (20, 2, 2));
    }

    #[test]
    fn outlier_noise_counts() {
        let d = blobs(50, 2);
        assert_eq!(inject_outlier_noise(&d, 10.0, 0.0, 1).unwrap(), d);
        let noisy = inject_outlier_noise(&d, 10.0, 0.5, 1).unwrap();
        let changed = d
            .examples()
            .iter()
            .zip(noisy.examples())
            .filter(|(a, b)| a.x != b.x)
            .count();
        assert_eq!(changed, 50);
        assert_eq!(d.labels().collect::<Vec<_>>(), noisy.labels().collect::<Vec<_>>());
        assert_eq!(outlier_indices(100, 0.5, 1).len(), 50);
        assert!(inject_outlier_noise(&d, 10.0, 0.6, 1).is_err());
        assert!(inject_outlier_noise(&d, 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn outlier_noise_densifies_sparse_rows() {
        let ex = Example::new(SparseVector::new(vec![1], vec![1.0]).unwrap(), 0);
        let d = Dataset::new(vec![ex.clone(), ex], 4, 2).unwrap();
        let noisy = inject_outlier_noise(&d, 10.0, 0.5, 9).unwrap();
        let dense_rows = noisy.examples().iter().filter(|e| e.x.nnz() == 4).count();
        assert_eq!(dense_rows, 1);
    }

    #[test]
    fn random_flip_extremes() {
        let d = blobs(40, 5);
        assert_eq!(inject_random_flip(&d, 0.0, 1).unwrap(), d);
        assert_eq!(flips(&d, &inject_random_flip(&d, 1.0, 1).unwrap()), d.len());
        let three = synth_gaussians(3, &[vec![1.0], vec![0.0], vec![-1.0]], 1.0, 0).unwrap();
        assert!(inject_random_flip(&three, 0.1, 0).is_err());
    }

    #[test]
    fn margin_flip_count_is_exact() {
        let d = blobs(60, 6);
        for &r in &[0.05, 0.1, 0.33, 0.5] {
            let noisy = inject_margin_flip(&d, r, 3).unwrap();
            assert_eq!(flips(&d, &noisy), (r * 120.0).floor() as usize);
            assert_eq!(
                d.examples().iter().map(|e| &e.x).collect::<Vec<_>>(),
                noisy.examples().iter().map(|e| &e.x).collect::<Vec<_>>()
            );
        }
        assert_eq!(inject_margin_flip(&d, 0.005, 3).unwrap(), d);
    }

    #[test]
    fn margin_weights_shape() {
        let s = margin_flip_weights(&[3.0, 1.0, -1.0]);
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!((s[2] - (-10f64).exp()).abs() < 1e-18);
        assert!((s[1] - (-5f64).exp()).abs() < 1e-15);
        assert_eq!(margin_flip_weights(&[0.4, 0.4]), vec![1.0, 1.0]);
    }

    #[test]
    fn weighted_sampling_prefers_heavy_items() {
        let w = [1.0, 1e-3, 1e-3, 1e-3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut first = 0;
        for _ in 0..1000 {
            let s = weighted_sample_without_replacement(&w, 1, &mut rng);
            if s == vec![0] {
                first += 1;
            }
        }
        assert!(first > 990);
        let s = weighted_sample_without_replacement(&w, 4, &mut rng);
        assert_eq!(s, vec![0, 1, 2, 3]);
    }
}
