//! Dense parameter vectors.
//!
//! A [`ParamVector`] never holds NaN or infinite entries: every constructor and
//! every arithmetic operation checks its output, so a value that exists is a
//! valid operand. Binary operations require equal dimensions.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("dimension", "must be at least 1"));
        }
        check_finite(&entries, "vector construction")?;
        Ok(ParamVector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "ParamVector dimension must be at least 1");
        ParamVector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Applies `op` to each pair of entries; fails on dimension mismatch or a
    /// non-finite result.
    pub fn zip_map(&self, other: &ParamVector, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_dim(other)?;
        let out: Vec<f64> = self.0.iter().zip(&other.0).map(|(&a, &b)| op(a, b)).collect();
        check_finite(&out, "element-wise operation")?;
        Ok(ParamVector(out))
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Result<Self> {
        let out: Vec<f64> = self.0.iter().map(|&a| op(a)).collect();
        check_finite(&out, "element-wise operation")?;
        Ok(ParamVector(out))
    }

    pub fn add(&self, other: &ParamVector) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ParamVector) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::non_finite("scale factor"));
        }
        self.map(|v| a * v)
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.same_dim(other)?;
        let s: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::non_finite("dot product"))
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub(crate) fn same_dim(&self, other: &ParamVector) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            })
        }
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVector::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Vec<f64> {
        v.0
    }
}

impl<'a> IntoIterator for &'a ParamVector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn check_finite(values: &[f64], context: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(context))
    }
}

/// `a * x + y`, component-wise.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    if !a.is_finite() {
        return Err(Error::non_finite("axpy scalar"));
    }
    x.zip_map(y, |xi, yi| a * xi + yi)
}

/// Element-wise product.
pub fn hadamard(x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    x.zip_map(y, |a, b| a * b)
}
