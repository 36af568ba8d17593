use nalgebra::DVector;

use super::CzError;

/// Axis-aligned box `[lo, hi]`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl IntervalBox {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self, CzError> {
        if lo.len() != hi.len() {
            return Err(CzError::DimensionMismatch {
                op: "IntervalBox::new",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (coord, (&l, &h)) in lo.iter().zip(hi.iter()).enumerate() {
            if l.is_nan() || h.is_nan() || l > h || l == f64::INFINITY || h == f64::NEG_INFINITY {
                return Err(CzError::InvalidInterval { coord, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn from_slices(lo: &[f64], hi: &[f64]) -> Result<Self, CzError> {
        Self::new(DVector::from_column_slice(lo), DVector::from_column_slice(hi))
    }

    /// `[c - r, c + r]` in every coordinate.
    pub fn centered(center: &DVector<f64>, radius: f64) -> Result<Self, CzError> {
        Self::new(center.add_scalar(-radius), center.add_scalar(radius))
    }

    pub fn symmetric(dim: usize, radius: f64) -> Result<Self, CzError> {
        Self::centered(&DVector::zeros(dim), radius)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.hi - &self.lo
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.hi + &self.lo) / 2.0
    }

    /// Largest edge length, i.e. the infinity-norm diameter.
    pub fn max_width(&self) -> f64 {
        self.widths().iter().fold(0.0f64, |m, &w| m.max(w))
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(self.hi.iter()).all(|v| v.is_finite())
    }

    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }

    /// Componentwise inclusion `self ⊆ other` with slack `tol`.
    pub fn is_subset_of(&self, other: &IntervalBox, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|j| self.lo[j] >= other.lo[j] - tol && self.hi[j] <= other.hi[j] + tol)
    }

    /// Select a subset of coordinates.
    pub fn select(&self, coords: &[usize]) -> IntervalBox {
        IntervalBox {
            lo: DVector::from_iterator(coords.len(), coords.iter().map(|&j| self.lo[j])),
            hi: DVector::from_iterator(coords.len(), coords.iter().map(|&j| self.hi[j])),
        }
    }
}
