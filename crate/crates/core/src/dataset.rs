//! Sparse examples, weight matrices, and labelled datasets.
//!
//! Class labels are 0-based here; file formats and user-facing output use `1..=C`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};

/// Sparse real vector with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(contract!(
                "sparse vector has {} indices but {} values",
                indices.len(),
                values.len()
            ));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(contract!("sparse indices must be strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(contract!("non-finite feature value {v}"));
        }
        Ok(SparseVector { indices, values })
    }

    /// Stores every coordinate of `dense`, zeros included.
    pub fn from_dense(dense: &[f64]) -> Self {
        SparseVector {
            indices: (0..dense.len() as u32).collect(),
            values: dense.to_vec(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| (j as usize, v))
    }

    /// One past the largest stored index, or 0 when empty.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&j| j as usize + 1)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(j, v)| v * dense[j]).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }
}

/// `d x C` weight matrix stored row-major, one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    dim: usize,
    classes: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(dim: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * classes {
            return Err(contract!(
                "weight buffer of length {} does not match {dim} x {classes}",
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(contract!("weight matrix has non-finite entries"));
        }
        Ok(WeightMatrix { dim, classes, data })
    }

    pub fn zeros(dim: usize, classes: usize) -> Self {
        WeightMatrix {
            dim,
            classes,
            data: vec![0.0; dim * classes],
        }
    }

    /// Two-column form `[w/2, -w/2]` of a binary weight vector.
    pub fn from_binary(w: &[f64]) -> Self {
        let mut data = Vec::with_capacity(2 * w.len());
        for &wj in w {
            data.push(0.5 * wj);
            data.push(-0.5 * wj);
        }
        WeightMatrix {
            dim: w.len(),
            classes: 2,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, row: usize, class: usize) -> f64 {
        self.data[row * self.classes + class]
    }

    pub fn column(&self, class: usize) -> Vec<f64> {
        (0..self.dim).map(|j| self.get(j, class)).collect()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `W^T x`. Indices of `x` at or beyond `dim` are a contract violation.
    pub fn activations(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.min_dim() > self.dim {
            return Err(contract!(
                "feature index {} out of range for dimension {}",
                x.min_dim() - 1,
                self.dim
            ));
        }
        let mut a = vec![0.0; self.classes];
        activations_into(&self.data, self.classes, x, &mut a);
        Ok(a)
    }
}

/// `out = W^T x` over a row-major buffer; no bounds checks beyond slice indexing.
#[inline]
pub(crate) fn activations_into(w: &[f64], classes: usize, x: &SparseVector, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, v) in x.iter() {
        let row = &w[j * classes..(j + 1) * classes];
        for (o, &wc) in out.iter_mut().zip(row) {
            *o += v * wc;
        }
    }
}

/// A labelled example; `label` is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: SparseVector,
    pub label: usize,
}

impl Example {
    pub fn new(x: SparseVector, label: usize) -> Self {
        Example { x, label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    /// Validates that every index is below `dim` and every label below `num_classes`.
    pub fn new(examples: Vec<Example>, dim: usize, num_classes: usize) -> Result<Self> {
        for (n, ex) in examples.iter().enumerate() {
            if ex.x.min_dim() > dim {
                return Err(contract!(
                    "example {n}: feature index {} >= dimension {dim}",
                    ex.x.min_dim() - 1
                ));
            }
            if ex.label >= num_classes {
                return Err(contract!(
                    "example {n}: label {} outside 1..={num_classes}",
                    ex.label + 1
                ));
            }
        }
        Ok(Dataset {
            examples,
            dim,
            num_classes,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.examples.iter().map(|e| e.label)
    }

    /// Subset by example position, in the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }

    /// Appends a constant feature with value `value` at index `dim`.
    pub fn with_bias(&self, value: f64) -> Dataset {
        let examples = self
            .examples
            .iter()
            .map(|e| {
                let mut idx = e.x.indices().to_vec();
                let mut vals = e.x.values().to_vec();
                idx.push(self.dim as u32);
                vals.push(value);
                Example::new(SparseVector { indices: idx, values: vals }, e.label)
            })
            .collect();
        Dataset {
            examples,
            dim: self.dim + 1,
            num_classes: self.num_classes,
        }
    }

    pub(crate) fn from_parts_unchecked(examples: Vec<Example>, dim: usize, num_classes: usize) -> Self {
        Dataset {
            examples,
            dim,
            num_classes,
        }
    }
}
