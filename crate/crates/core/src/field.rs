//! Cell-centred and face-normal grid functions.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

/// What a cell-centred field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Density,
    Potential,
    Source,
    Generic,
}

/// One value per primal cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalField {
    pub role: FieldRole,
    pub values: Vec<f64>,
}

impl PrimalField {
    pub fn new(role: FieldRole, values: Vec<f64>) -> Self {
        PrimalField { role, values }
    }

    pub fn constant(role: FieldRole, n: usize, value: f64) -> Self {
        PrimalField {
            role,
            values: vec![value; n],
        }
    }

    /// Index and value of the first non-positive entry, if any.
    pub fn first_non_positive(&self) -> Option<(usize, f64)> {
        first_non_positive(&self.values)
    }
}

impl Deref for PrimalField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for PrimalField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

pub(crate) fn first_non_positive(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0))
        .map(|(k, &v)| (k, v))
}

/// One value per face of each axis family; values are components along `+e^(axis)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceField {
    pub axes: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(counts: &[usize]) -> Self {
        FaceField {
            axes: counts.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn constant(counts: &[usize], value: f64) -> Self {
        FaceField {
            axes: counts.iter().map(|&n| vec![value; n]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn axis_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.axes[a]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.axes
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FaceField {
        FaceField {
            axes: self
                .axes
                .iter()
                .map(|a| a.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }
}
