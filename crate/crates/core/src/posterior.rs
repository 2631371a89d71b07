//! Row-major `n × S` matrix of class membership probabilities.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Posteriors {
    n_classes: usize,
    values: Vec<f64>,
}

impl Posteriors {
    /// Wraps row-major values. Every row must be a probability vector
    /// (within `1e-8`).
    pub fn from_rows(n_classes: usize, values: Vec<f64>) -> Result<Self> {
        if n_classes == 0 || values.is_empty() || !values.len().is_multiple_of(n_classes) {
            return Err(Error::invalid("posterior matrix has an inconsistent shape"));
        }
        let p = Posteriors { n_classes, values };
        for i in 0..p.n() {
            let row = p.row(i);
            let total: f64 = row.iter().sum();
            if row.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) || (total - 1.0).abs() > 1e-8 {
                return Err(Error::invalid(format!("posterior row {i} is not a probability vector")));
            }
        }
        Ok(p)
    }

    pub(crate) fn from_raw(n_classes: usize, values: Vec<f64>) -> Self {
        Posteriors { n_classes, values }
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    #[inline]
    pub fn get(&self, i: usize, class: usize) -> f64 {
        self.values[i * self.n_classes + class]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Sum of each column.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = alloc::vec![0.0; self.n_classes];
        for row in self.rows() {
            for (acc, v) in sums.iter_mut().zip(row) {
                *acc += v;
            }
        }
        sums
    }

    /// Column means, i.e. the implied class proportions.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.column_sums().into_iter().map(|s| s / n).collect()
    }

    /// Reorders columns so that new column `c` is old column `order[c]`.
    pub fn permute_classes(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            values.extend(order.iter().map(|&o| row[o]));
        }
        Posteriors::from_raw(self.n_classes, values)
    }
}
