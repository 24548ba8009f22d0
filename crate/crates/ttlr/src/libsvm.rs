//! LIBSVM sparse text format.
//!
//! Each non-blank line is `label idx:val idx:val ...` with 1-based, strictly increasing
//! feature indices. Text after `#` is ignored. Labels are arbitrary numbers; they are
//! mapped to classes `1..=C` (0-based internally) in ascending numeric order.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use ttlr_core::{Dataset, Example, SparseVector};

#[derive(Debug, thiserror::Error)]
pub enum LibsvmError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Original label values, indexed by class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable(Vec<f64>);

impl LabelTable {
    /// Sorts and deduplicates the given label values.
    pub fn new(mut labels: Vec<f64>) -> Result<Self, LibsvmError> {
        if labels.iter().any(|l| !l.is_finite()) {
            return Err(LibsvmError::Invalid("labels must be finite".into()));
        }
        labels.sort_by(f64::total_cmp);
        labels.dedup();
        Ok(LabelTable(labels))
    }

    /// Labels `1, 2, ..., classes`.
    pub fn sequential(classes: usize) -> Self {
        LabelTable((1..=classes).map(|c| c as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn class_of(&self, label: f64) -> Option<usize> {
        self.0.iter().position(|&l| l == label)
    }

    pub fn label(&self, class: usize) -> f64 {
        self.0[class]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Display for LabelTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Feature dimension; must cover every index present. Defaults to the largest index.
    pub dim: Option<usize>,
    /// Use this label table instead of building one from the data, e.g. for a test file.
    pub labels: Option<LabelTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub data: Dataset,
    pub labels: LabelTable,
}

struct Row {
    label: f64,
    line: usize,
    x: SparseVector,
}

fn parse_line(text: &str, line: usize) -> Result<Option<Row>, LibsvmError> {
    let content = text.split('#').next().unwrap_or("");
    let err = |column: usize, message: String| LibsvmError::Parse { line, column, message };
    let base = content.as_ptr() as usize;
    let mut tokens = content
        .split_whitespace()
        .map(|tok| (tok.as_ptr() as usize - base + 1, tok));
    let Some((col, label_tok)) = tokens.next() else {
        return Ok(None);
    };
    let label: f64 = label_tok
        .parse()
        .ok()
        .filter(|l: &f64| l.is_finite())
        .ok_or_else(|| err(col, format!("invalid label `{label_tok}`")))?;

    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (col, tok) in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(col, format!("expected `index:value`, found `{tok}`")))?;
        let idx: u32 = idx
            .parse()
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| err(col, format!("invalid feature index `{idx}`")))?;
        let val: f64 = val
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(col, format!("invalid feature value `{val}`")))?;
        if let Some(&prev) = indices.last() {
            if idx - 1 <= prev {
                return Err(err(col, format!("feature index {idx} does not increase")));
            }
        }
        indices.push(idx - 1);
        values.push(val);
    }
    let x = SparseVector::new(indices, values).map_err(|e| err(col, e.to_string()))?;
    Ok(Some(Row { label, line, x }))
}

pub fn parse_libsvm<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<LabeledData, LibsvmError> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        if let Some(row) = parse_line(&line?, n + 1)? {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(LibsvmError::Invalid("no examples in input".into()));
    }

    let max_dim = rows.iter().map(|r| r.x.min_dim()).max().unwrap_or(0);
    let dim = match opts.dim {
        Some(d) if d < max_dim => {
            return Err(LibsvmError::Invalid(format!(
                "dimension {d} is smaller than the largest feature index {max_dim}"
            )))
        }
        Some(d) => d,
        None => max_dim,
    };
    let labels = match &opts.labels {
        Some(t) => t.clone(),
        None => LabelTable::new(rows.iter().map(|r| r.label).collect())?,
    };

    let mut examples = Vec::with_capacity(rows.len());
    for row in rows {
        let class = labels.class_of(row.label).ok_or_else(|| LibsvmError::Parse {
            line: row.line,
            column: 1,
            message: format!("label {} is not in the label table [{labels}]", row.label),
        })?;
        examples.push(Example::new(row.x, class));
    }
    let data = Dataset::new(examples, dim, labels.len()).map_err(|e| LibsvmError::Invalid(e.to_string()))?;
    Ok(LabeledData { data, labels })
}

pub fn parse_libsvm_str(text: &str, opts: &ParseOptions) -> Result<LabeledData, LibsvmError> {
    parse_libsvm(text.as_bytes(), opts)
}

pub fn read_libsvm_file(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<LabeledData, LibsvmError> {
    parse_libsvm(BufReader::new(File::open(path)?), opts)
}

/// Writes every stored coordinate, zeros included, so that parsing the output gives
/// back the same dataset.
pub fn write_libsvm<W: Write>(mut out: W, data: &Dataset, labels: &LabelTable) -> io::Result<()> {
    for ex in data.examples() {
        write!(out, "{}", labels.label(ex.label))?;
        for (i, v) in ex.x.iter() {
            write!(out, " {}:{}", i + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_libsvm_file(path: impl AsRef<Path>, data: &Dataset, labels: &LabelTable) -> io::Result<()> {
    let mut out = io::BufWriter::new(File::create(path)?);
    write_libsvm(&mut out, data, labels)?;
    out.flush()
}
