//! Plain-text model files.
//!
//! ```text
//! ttlr-model v1
//! dim 3
//! classes 2
//! t1 0.6
//! t2 1.6
//! lambda 0.0001
//! labels -1 1
//! weights
//! <dim lines of `classes` numbers, row-major>
//! ```
//!
//! Numbers are written in shortest round-trip form, so reading a file back gives
//! bit-identical weights.

use std::fs;
use std::io;
use std::path::Path;

use ttlr_core::{TemperaturePair, TtlrModel, WeightMatrix};

use crate::libsvm::LabelTable;

pub const MAGIC: &str = "ttlr-model v1";

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: TtlrModel,
    pub labels: LabelTable,
}

pub fn model_to_string(model: &TtlrModel, labels: &LabelTable) -> String {
    let w = model.weights();
    let t = model.temps();
    let mut s = format!(
        "{MAGIC}\ndim {}\nclasses {}\nt1 {}\nt2 {}\nlambda {}\nlabels {labels}\nweights\n",
        w.dim(),
        w.classes(),
        t.t1.get(),
        t.t2.get(),
        model.lambda()
    );
    for row in w.as_slice().chunks(w.classes().max(1)) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> ModelFileError {
        ModelFileError::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str, ModelFileError> {
        match self.inner.next() {
            Some((n, l)) => {
                self.line = n + 1;
                Ok(l.trim())
            }
            None => {
                self.line += 1;
                Err(self.err("unexpected end of file"))
            }
        }
    }

    fn field(&mut self, key: &str) -> Result<&'a str, ModelFileError> {
        let l = self.next_line()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => Err(self.err(format!("expected `{key} <value>`"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelFileError> {
        let v = self.field(key)?;
        self.number(v)
    }

    fn number<T: std::str::FromStr>(&self, s: &str) -> Result<T, ModelFileError> {
        s.parse().map_err(|_| self.err(format!("invalid number `{s}`")))
    }
}

pub fn model_from_str(text: &str) -> Result<SavedModel, ModelFileError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next_line()? != MAGIC {
        return Err(lines.err(format!("expected header `{MAGIC}`")));
    }
    let dim: usize = lines.parsed("dim")?;
    let classes: usize = lines.parsed("classes")?;
    let t1: f64 = lines.parsed("t1")?;
    let t2: f64 = lines.parsed("t2")?;
    let temps = TemperaturePair::new(t1, t2).map_err(|e| lines.err(e.to_string()))?;
    let lambda: f64 = lines.parsed("lambda")?;
    let label_values = lines
        .field("labels")?
        .split_whitespace()
        .map(|s| lines.number(s))
        .collect::<Result<Vec<f64>, _>>()?;
    let labels = LabelTable::new(label_values).map_err(|e| lines.err(e.to_string()))?;
    if labels.len() != classes {
        return Err(lines.err(format!("{} labels for {classes} classes", labels.len())));
    }
    if lines.next_line()? != "weights" {
        return Err(lines.err("expected `weights`"));
    }
    let mut data = Vec::with_capacity(dim * classes);
    for _ in 0..dim {
        let row = lines.next_line()?;
        let before = data.len();
        for tok in row.split_whitespace() {
            data.push(lines.number::<f64>(tok)?);
        }
        if data.len() - before != classes {
            return Err(lines.err(format!("expected {classes} weights")));
        }
    }
    let weights = WeightMatrix::new(dim, classes, data).map_err(|e| lines.err(e.to_string()))?;
    let model = TtlrModel::from_parts(weights, temps, lambda).map_err(|e| lines.err(e.to_string()))?;
    Ok(SavedModel { model, labels })
}

pub fn save_model(path: impl AsRef<Path>, model: &TtlrModel, labels: &LabelTable) -> io::Result<()> {
    fs::write(path, model_to_string(model, labels))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel, ModelFileError> {
    model_from_str(&fs::read_to_string(path)?)
}
