//! Mass partitions: finite non-increasing sequences of positive masses
//! whose sum is at most one. The missing mass is dust.

use thiserror::Error;

/// Slack allowed on the constraint `sum <= 1`.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("terms sum to {0}, which exceeds 1")]
    SumExceedsOne(f64),
    #[error("term {index} is {value}; masses must be finite and nonnegative")]
    InvalidTerm { index: usize, value: f64 },
}

/// The outcome of one dislocation: the masses of the children relative to
/// the parent, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MassPartition {
    terms: Vec<f64>,
    dust: f64,
}

/// Result of a size-biased pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    /// Zero-based index into [`MassPartition::terms`].
    Child(usize),
    Dust,
}

impl MassPartition {
    /// Drops zeros, sorts in non-increasing order and computes the dust.
    pub fn normalize(raw: &[f64]) -> Result<Self, PartitionError> {
        let mut terms = Vec::with_capacity(raw.len());
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(PartitionError::InvalidTerm { index, value });
            }
            if value > 0.0 {
                terms.push(value);
            }
        }
        terms.sort_by(|a, b| b.total_cmp(a));
        let sum: f64 = terms.iter().sum();
        if sum > 1.0 + SUM_TOLERANCE {
            return Err(PartitionError::SumExceedsOne(sum));
        }
        Ok(Self {
            dust: (1.0 - sum).max(0.0),
            terms,
        })
    }

    pub fn terms(&self) -> &[f64] {
        &self.terms
    }

    pub fn dust(&self) -> f64 {
        self.dust
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The partition `(1, 0, 0, ...)`, which must carry no dislocation mass.
    pub fn is_trivial(&self) -> bool {
        self.terms.len() == 1 && self.terms[0] >= 1.0
    }

    /// `sum s_i^q`.
    pub fn power_sum(&self, q: f64) -> f64 {
        self.terms.iter().map(|s| s.powf(q)).sum()
    }

    /// Returns child `i` when `u` falls in `[s_1 + ... + s_{i-1}, s_1 + ... + s_i)`,
    /// and `Dust` once `u` passes the total mass.
    pub fn size_biased_pick(&self, u: f64) -> Pick {
        let mut upper = 0.0;
        for (i, &s) in self.terms.iter().enumerate() {
            upper += s;
            if u < upper {
                return Pick::Child(i);
            }
        }
        // a conservative partition whose sum rounded just below 1
        if self.dust == 0.0 && !self.terms.is_empty() && u < 1.0 {
            return Pick::Child(self.terms.len() - 1);
        }
        Pick::Dust
    }
}
