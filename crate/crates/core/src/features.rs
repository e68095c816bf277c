use crate::error::{Error, Result};

/// `n_samples x n_features` matrix of extracted features, row-major, with
/// optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_samples: usize,
    n_features: usize,
    values: Vec<f32>,
    labels: Option<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn new(
        n_samples: usize,
        n_features: usize,
        values: Vec<f32>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::invalid("feature matrix needs at least one feature"));
        }
        if values.len() != n_samples * n_features {
            return Err(Error::DimensionMismatch {
                what: "feature matrix values",
                expected: n_samples * n_features,
                actual: values.len(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != n_samples {
                return Err(Error::DimensionMismatch {
                    what: "feature matrix labels",
                    expected: n_samples,
                    actual: labels.len(),
                });
            }
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(FeatureMatrix {
            n_samples,
            n_features,
            values,
            labels,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f32>], labels: Option<Vec<u32>>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    what: "feature row length",
                    expected: n_features,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_features, values, labels)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.n_features + j]
    }

    pub fn column(&self, j: usize) -> Vec<f32> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Option<Vec<u32>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n_samples {
                return Err(Error::DimensionMismatch {
                    what: "feature matrix labels",
                    expected: self.n_samples,
                    actual: l.len(),
                });
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Rows `indices`, in that order, with their labels.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            if i >= self.n_samples {
                return Err(Error::invalid(format!(
                    "row {i} out of range for {} samples",
                    self.n_samples
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(indices.len(), self.n_features, values, labels)
    }

    /// Smallest and largest value, or `None` for an empty matrix.
    pub fn value_range(&self) -> Option<(f32, f32)> {
        if self.values.is_empty() {
            return None;
        }
        Some(self.values.iter().fold(
            (f32::INFINITY, f32::NEG_INFINITY),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        ))
    }

    /// Checks the `[-1, 1]` range every extracted feature must satisfy.
    pub fn check_feature_range(&self) -> Result<()> {
        match self.values.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            None => Ok(()),
            Some(index) => Err(Error::invalid(format!(
                "feature value {} at index {index} outside [-1, 1]",
                self.values[index]
            ))),
        }
    }

    pub fn into_parts(self) -> (usize, usize, Vec<f32>, Option<Vec<u32>>) {
        (self.n_samples, self.n_features, self.values, self.labels)
    }
}
