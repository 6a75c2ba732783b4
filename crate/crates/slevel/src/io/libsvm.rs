//! LIBSVM-format sparse datasets.
//!
//! A row is `<label> <index>:<value> <index>:<value> …` with 1-based feature
//! indices, strictly increasing within a row; `#` starts a comment that runs
//! to the end of the line. Storage is compressed sparse rows, so memory is
//! proportional to the nonzero count, never to rows × features. Explicitly
//! written zeros are kept: a stored `3:0` is data, not absence.
//!
//! Labels must be integers (a fractional part of zero is accepted, so `1.0`
//! parses as `1`). They are remapped to class ids `0 … K−1` in order of first
//! appearance; the original values are retained so serialization restores the
//! input text — `parse ∘ serialize ∘ parse` is the identity.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SlevelError};

/// A labeled sparse dataset in compressed-sparse-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    /// Row start offsets into `indices`/`values`; length `rows + 1`.
    offsets: Vec<usize>,
    /// 1-based feature indices, strictly increasing within each row.
    indices: Vec<u32>,
    values: Vec<f64>,
    /// Per-row class ids in `0 … num_classes − 1`, first-seen order.
    labels: Vec<usize>,
    /// Original integer label for each class id.
    label_names: Vec<i64>,
    feature_dim: usize,
}

impl DatasetMatrix {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    /// Number of distinct feature coordinates (the largest 1-based index, or
    /// the parse-time override).
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Total stored entries, including explicit zeros.
    pub fn nonzeros(&self) -> usize {
        self.values.len()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    /// Class id of a row (0-based, first-seen order).
    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    /// The label as written in the source text.
    pub fn original_label(&self, class: usize) -> i64 {
        self.label_names[class]
    }

    /// Sparse view of one row: (1-based indices, values).
    pub fn row(&self, row: usize) -> (&[u32], &[f64]) {
        let span = self.offsets[row]..self.offsets[row + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Scatter one row into a dense buffer of length `feature_dim`.
    pub fn dense_row_into(&self, row: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.feature_dim, "dense buffer length mismatch");
        out.fill(0.0);
        let (idx, vals) = self.row(row);
        for (&i, &v) in idx.iter().zip(vals) {
            out[i as usize - 1] = v;
        }
    }

    /// Row numbers grouped by class id.
    pub fn class_partition(&self) -> Vec<Vec<usize>> {
        let mut partition = vec![Vec::new(); self.num_classes()];
        for (row, &class) in self.labels.iter().enumerate() {
            partition[class].push(row);
        }
        partition
    }

    /// Serialize back to LIBSVM text using the original labels. Values print
    /// in the shortest decimal form that round-trips, so reparsing this text
    /// reproduces `self` exactly.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for row in 0..self.rows() {
            let _ = write!(out, "{}", self.label_names[self.labels[row]]);
            let (idx, vals) = self.row(row);
            for (&i, &v) in idx.iter().zip(vals) {
                let _ = write!(out, " {i}:{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Parse LIBSVM text. `feature_dim` overrides the inferred dimension (the
/// maximum feature index); it is rejected if a row indexes past it.
pub fn parse_libsvm(text: &str, feature_dim: Option<usize>) -> Result<DatasetMatrix> {
    let mut offsets = vec![0usize];
    let mut indices: Vec<u32> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<i64> = Vec::new();
    let mut label_ids: HashMap<i64, usize> = HashMap::new();
    let mut max_index = 0u32;

    for (line_no, raw) in text.lines().enumerate() {
        let line = line_no + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank or comment-only line
        };
        let label = parse_label(label_tok)
            .ok_or_else(|| parse_err(line, format!("invalid label '{label_tok}'")))?;
        let class = *label_ids.entry(label).or_insert_with(|| {
            label_names.push(label);
            label_names.len() - 1
        });
        labels.push(class);

        let mut last_index = 0u32;
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| {
                parse_err(line, format!("expected 'index:value', got '{tok}'"))
            })?;
            let index: u32 = idx_str.parse().map_err(|_| {
                parse_err(line, format!("invalid feature index '{idx_str}'"))
            })?;
            if index == 0 {
                return Err(parse_err(line, "feature indices are 1-based; got 0".into()));
            }
            if index <= last_index {
                return Err(parse_err(
                    line,
                    format!("feature indices must strictly increase; got {index} after {last_index}"),
                ));
            }
            let value: f64 = val_str.parse().map_err(|_| {
                parse_err(line, format!("invalid feature value '{val_str}'"))
            })?;
            if !value.is_finite() {
                return Err(parse_err(line, format!("non-finite feature value '{val_str}'")));
            }
            last_index = index;
            max_index = max_index.max(index);
            indices.push(index);
            values.push(value);
        }
        offsets.push(indices.len());
    }

    if labels.is_empty() {
        return Err(SlevelError::InvalidArgument("the dataset contains no rows".into()));
    }
    let inferred = max_index as usize;
    let feature_dim = match feature_dim {
        Some(dim) if dim < inferred => {
            return Err(SlevelError::InvalidArgument(format!(
                "feature_dim override {dim} is smaller than the largest feature index {inferred}"
            )));
        }
        Some(dim) => dim,
        None => inferred,
    };

    Ok(DatasetMatrix { offsets, indices, values, labels, label_names, feature_dim })
}

/// Read and parse a LIBSVM file.
pub fn read_libsvm(path: impl AsRef<Path>, feature_dim: Option<usize>) -> Result<DatasetMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm(&text, feature_dim)
}

/// A label token must be an integer; a zero fractional part (`2.0`) and an
/// explicit sign (`+1`) are accepted.
fn parse_label(tok: &str) -> Option<i64> {
    let v: f64 = tok.parse().ok()?;
    if !v.is_finite() || v.fract() != 0.0 || v.abs() > i64::MAX as f64 {
        return None;
    }
    Some(v as i64)
}

fn parse_err(line: usize, message: String) -> SlevelError {
    SlevelError::Parse { line, message }
}
