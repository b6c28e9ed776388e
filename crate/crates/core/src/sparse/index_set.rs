use super::{Result, SparseError};

/// Strictly increasing set of indices into an ambient dimension, used for the
/// C/F point sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    /// Validates ordering and that every index is `< dim`.
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(SparseError::InvalidStructure(
                    "index set must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(SparseError::IndexOutOfRange { index: last, dim });
            }
        }
        Ok(Self { indices })
    }

    /// Positions where `mask` is true.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self {
            indices: mask
                .iter()
                .enumerate()
                .filter_map(|(i, &m)| m.then_some(i))
                .collect(),
        }
    }

    pub fn range(start: usize, end: usize) -> Self {
        Self {
            indices: (start..end).collect(),
        }
    }

    /// Indices in `0..dim` not contained in `self`.
    pub fn complement(&self, dim: usize) -> Self {
        let mut mask = vec![true; dim];
        for &i in &self.indices {
            mask[i] = false;
        }
        Self::from_mask(&mask)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Gathers `x[indices]`.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| x[i]).collect()
    }

    /// Adds `values[k]` into `x[indices[k]]`.
    pub fn scatter_add(&self, values: &[f64], x: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(values) {
            x[i] += v;
        }
    }
}
