use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::TreeEnsemble;
use crate::error::{Error, Result};

/// Labelled instances stored row-major; labels are `-1` or `+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<i8>,
}

impl Dataset {
    pub fn new(n_features: usize) -> Self {
        Dataset {
            n_features,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[i8]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let n = rows.first().map_or(0, Vec::len);
        let mut d = Dataset::new(n);
        for (r, &y) in rows.iter().zip(labels) {
            d.push(r, y)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, row: &[f64], label: i8) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        if label != 1 && label != -1 {
            return Err(Error::Config(format!("label {label} is not -1 or +1")));
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features.max(1)).take(self.len())
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut d = Dataset::new(self.n_features);
        for &i in indices {
            d.values.extend_from_slice(self.row(i));
            d.labels.push(self.labels[i]);
        }
        d
    }

    /// `n` distinct rows drawn uniformly, kept in their original order.
    pub fn subsample<R: Rng>(&self, n: usize, rng: &mut R) -> Dataset {
        if n >= self.len() {
            return self.clone();
        }
        let mut idx = sample(rng, self.len(), n).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }

    /// Fraction of rows whose predicted label differs from the stored one.
    pub fn error_rate(&self, model: &TreeEnsemble) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let wrong = (0..self.len())
            .filter(|&i| crate::ensemble::label_of(model.margin(self.row(i))) != self.labels[i])
            .count();
        wrong as f64 / self.len() as f64
    }
}
