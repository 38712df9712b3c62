//! Per-resolution error curves.
//!
//! An `ErrorCurve` stores the values of one loss or estimator over a
//! contiguous integer range of resolutions, together with the sample
//! size it was computed for. All selection and plotting operations
//! consume this one shape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What quantity a curve holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    /// Closed-form average prediction error PE_n(r).
    ExactPE,
    /// Leave-one-out cross-validation estimate.
    CV,
    /// Unbiased prediction-error estimate.
    UE,
    /// Information-criterion estimate.
    IC,
    /// Mean squared residual.
    SigmaHat2,
    /// Realized estimation error for one training set.
    EstimationError,
    /// Closed-form expected estimation error.
    EpsExact,
    /// Closed-form upper bound on the estimation error.
    EpsUpper,
}

/// Values of one quantity on a contiguous resolution range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub kind: CurveKind,
    /// Sample size the curve refers to.
    pub n: usize,
    /// First resolution in the range.
    pub r_start: usize,
    /// values[i] is the value at resolution r_start + i.
    pub values: Vec<f64>,
}

impl ErrorCurve {
    /// Builds a curve, rejecting an empty value list.
    pub fn new(kind: CurveKind, n: usize, r_start: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("error curve must cover at least one resolution".into()));
        }
        Ok(ErrorCurve { kind, n, r_start, values })
    }

    /// Inclusive resolution range covered by the curve.
    pub fn r_range(&self) -> (usize, usize) {
        (self.r_start, self.r_start + self.values.len() - 1)
    }

    /// Value at resolution r, if covered.
    pub fn value_at(&self, r: usize) -> Option<f64> {
        r.checked_sub(self.r_start).and_then(|i| self.values.get(i)).copied()
    }

    /// Iterates (r, value) pairs in increasing r.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.r_start + i, v))
    }
}

/// Flags strict interior local minima: both neighbors strictly
/// larger. Endpoints are never minima and plateaus do not count.
pub fn strict_local_minima(values: &[f64]) -> Vec<bool> {
    let mut flags = vec![false; values.len()];
    for i in 1..values.len().saturating_sub(1) {
        flags[i] = values[i] < values[i - 1] && values[i] < values[i + 1];
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_and_lookup() {
        let c = ErrorCurve::new(CurveKind::ExactPE, 50, 2, vec![3.0, 2.0, 1.0]).unwrap();
        assert_eq!(c.r_range(), (2, 4));
        assert_eq!(c.value_at(3), Some(2.0));
        assert_eq!(c.value_at(1), None);
        assert_eq!(c.value_at(5), None);
        let pairs: Vec<_> = c.iter().collect();
        assert_eq!(pairs, vec![(2, 3.0), (3, 2.0), (4, 1.0)]);
    }

    #[test]
    fn empty_curve_rejected() {
        assert!(ErrorCurve::new(CurveKind::CV, 10, 0, vec![]).is_err());
    }

    #[test]
    fn minima_are_strict_and_interior() {
        let v = [3.0, 1.0, 2.0, 2.0, 2.0, 0.5, 4.0, 0.1];
        let flags = strict_local_minima(&v);
        // Index 1 is a strict dip, 5 is a strict dip, the plateau at
        // 2..=4 and the falling endpoint at 7 are not minima.
        assert_eq!(
            flags,
            vec![false, true, false, false, false, true, false, false]
        );
        assert_eq!(strict_local_minima(&[1.0]), vec![false]);
        assert_eq!(strict_local_minima(&[2.0, 1.0]), vec![false, false]);
    }
}
