//! State-space models and the time horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, Matrix};

/// Continuous-time LTI system `ẋ = Ax + Bu`, `y = Cx`.
///
/// Stability is not required: the time-limited norm is finite for any `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

/// A reduced model has the same representation as a full one.
pub type ReducedModel = StateSpaceModel;

impl StateSpaceModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {n} rows",
                b.nrows(),
                b.ncols()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "C is {}x{}, expected {n} columns",
                c.nrows(),
                c.ncols()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// State dimension `n`.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (Matrix, Matrix, Matrix) {
        (self.a, self.b, self.c)
    }

    /// Dual system `(Aᵀ, Cᵀ, Bᵀ)`.
    pub fn transposed(&self) -> Self {
        Self {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
        }
    }

    /// Realization in the coordinates `x = T x̃`: `(T⁻¹AT, T⁻¹B, CT)`.
    pub fn similarity(&self, t: &Matrix) -> Result<Self> {
        let n = self.order();
        if t.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "similarity transform must be {n}x{n}"
            )));
        }
        let lu = t.clone().lu();
        let a = lu
            .solve(&(&self.a * t))
            .ok_or_else(|| Error::InvalidArgument("similarity transform is singular".into()))?;
        let b = lu
            .solve(&self.b)
            .ok_or_else(|| Error::InvalidArgument("similarity transform is singular".into()))?;
        Self::new(a, b, &self.c * t)
    }

    /// Checks that `other` can be compared against `self` (same inputs and outputs).
    pub fn ensure_io_compatible(&self, other: &Self) -> Result<()> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::DimensionMismatch(format!(
                "models have {}x{} and {}x{} input/output shapes",
                self.outputs(),
                self.inputs(),
                other.outputs(),
                other.inputs()
            )));
        }
        Ok(())
    }
}

/// Length `τ` of the interval `[0, τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Horizon(f64);

impl Horizon {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {tau}"
            )))
        }
    }

    pub fn tau(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Horizon {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        Self::new(tau)
    }
}

impl From<Horizon> for f64 {
    fn from(h: Horizon) -> f64 {
        h.0
    }
}
