//! Observed data: categorical indicators plus one continuous external variable.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `n` observations of `J` categorical indicators and one real external
/// variable `z`.
///
/// Indicator codes are stored row-major and are 0-based: item `j` takes
/// values in `0..cardinalities[j]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    indicators: Vec<u32>,
    cardinalities: Vec<usize>,
    z: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset after checking every invariant.
    ///
    /// `indicators` holds one row per observation. `column_names` has one
    /// label per indicator followed by the label of `z`; pass an empty vector
    /// to get `y1..yJ, z`.
    pub fn new(
        indicators: Vec<Vec<u32>>,
        cardinalities: Vec<usize>,
        z: Vec<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n_items = cardinalities.len();
        if n_items == 0 {
            return Err(Error::invalid("dataset needs at least one indicator"));
        }
        if indicators.is_empty() {
            return Err(Error::invalid("dataset needs at least one observation"));
        }
        if indicators.len() != z.len() {
            return Err(Error::invalid(format!(
                "{} indicator rows but {} external values",
                indicators.len(),
                z.len()
            )));
        }
        if let Some(j) = cardinalities.iter().position(|&k| k < 2) {
            return Err(Error::invalid(format!("item {j} has fewer than two categories")));
        }
        let mut flat = Vec::with_capacity(indicators.len() * n_items);
        for (i, row) in indicators.iter().enumerate() {
            if row.len() != n_items {
                return Err(Error::invalid(format!(
                    "row {i} has {} indicators, expected {n_items}",
                    row.len()
                )));
            }
            for (j, (&code, &k)) in row.iter().zip(&cardinalities).enumerate() {
                if code as usize >= k {
                    return Err(Error::invalid(format!(
                        "row {i}, item {j}: code {code} outside 0..{k}"
                    )));
                }
            }
            flat.extend_from_slice(row);
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("external value at row {i} is not finite")));
        }
        let column_names = if column_names.is_empty() {
            (1..=n_items)
                .map(|j| format!("y{j}"))
                .chain(core::iter::once(String::from("z")))
                .collect()
        } else if column_names.len() == n_items + 1 {
            column_names
        } else {
            return Err(Error::invalid(format!(
                "expected {} column names, got {}",
                n_items + 1,
                column_names.len()
            )));
        };
        Ok(Dataset {
            indicators: flat,
            cardinalities,
            z,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn n_items(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Indicator codes of observation `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        let j = self.n_items();
        &self.indicators[i * j..(i + 1) * j]
    }

    #[inline]
    pub fn code(&self, i: usize, item: usize) -> usize {
        self.indicators[i * self.n_items() + item] as usize
    }

    /// A new dataset holding the given rows, in order. Used for duplication
    /// and subsetting.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let indicators = rows.iter().map(|&i| self.row(i).to_vec()).collect();
        let z = rows.iter().map(|&i| self.z[i]).collect();
        Dataset::new(
            indicators,
            self.cardinalities.clone(),
            z,
            self.column_names.clone(),
        )
    }

    pub fn z_mean(&self) -> f64 {
        self.z.iter().sum::<f64>() / self.n() as f64
    }

    /// Variance of `z` with denominator `n`.
    pub fn z_variance(&self) -> f64 {
        let mean = self.z_mean();
        self.z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.n() as f64
    }
}
