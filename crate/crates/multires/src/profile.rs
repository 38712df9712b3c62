//! Resolution-bias profiles A(r).
//!
//! A bias profile is a nonincreasing, nonnegative function A on the
//! nonnegative integers with A(r) -> 0 as r grows. A(r) is the excess
//! expected loss of the best resolution-r predictor over the best
//! infinite-resolution predictor; its per-resolution increments
//! delta_k^2 = A(k-1) - A(k) are the variance explained by the k-th
//! covariate and feed the square-root coefficient constructions of the
//! synthetic generators.
//!
//! Canonical parameterizations:
//!
//! - `HardThreshold(r0)`:  A(r) = scale for r < r0, else 0
//! - `Exponential(xi)`:    A(r) = scale * exp(-xi * r)
//! - `Polynomial(xi)`:     A(r) = scale * (r+1)^(-xi)
//! - `Logarithmic(xi)`:    A(r) = scale * (log 2 / log(r+2))^xi
//! - `DoubleDescent(r_low, r_high)`: r^(-1) up to r_low, then a
//!   logistic tail whose coefficient makes the two branches agree at
//!   the junction
//! - `MultiDescent(segments)`: repeated double-descent segments glued
//!   continuously, each scaled so its left edge matches the previous
//!   segment's value there
//! - `Tabulated(values)`: explicit table, zero beyond its end
//!
//! The polynomial and logarithmic forms are pinned so that their unit
//! increments telescope exactly: (r+1)^(-1) has increments
//! 1/k - 1/(k+1), and (log2/log(r+2)) has increments
//! log2 * (1/log(k+1) - 1/log(k+2)). Shifting the argument is what
//! keeps both finite at r = 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bias-profile family and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum ProfileKind {
    /// A(r) = scale for r < r0, zero afterwards.
    HardThreshold { r0: usize },
    /// A(r) = scale * exp(-xi * r).
    Exponential { xi: f64 },
    /// A(r) = scale * (r+1)^(-xi).
    Polynomial { xi: f64 },
    /// A(r) = scale * (log 2 / log(r+2))^xi.
    Logarithmic { xi: f64 },
    /// Reciprocal head up to r_low, logistic tail centered at r_high.
    DoubleDescent { r_low: usize, r_high: usize },
    /// Chained double-descent segments (r_low_k, r_high_k).
    MultiDescent { segments: Vec<(usize, usize)> },
    /// Explicit nonincreasing table; zero beyond the last entry.
    Tabulated { values: Vec<f64> },
}

/// A resolution-bias function A(r) with a positive scale multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

/// One segment of the double-descent form, before any scaling.
///
/// The r = 0 case never arises from increments (they start at k = 1);
/// it is defined as the r = 1 value so the function stays total.
fn descent_segment(r_low: usize, r_high: usize, r: usize) -> f64 {
    if r <= r_low {
        1.0 / (r.max(1) as f64)
    } else {
        let coeff = (1.0 + ((r_low as f64) - (r_high as f64)).exp()) / r_low as f64;
        coeff / (1.0 + ((r as f64) - (r_high as f64)).exp())
    }
}

/// Unscaled double-descent bias: reciprocal to r_low, then a logistic
/// tail whose coefficient makes the branches agree at the junction.
pub fn double_descent_eval(r_low: usize, r_high: usize, r: usize) -> f64 {
    descent_segment(r_low, r_high, r)
}

/// Unscaled multi-descent bias over ordered segments.
///
/// Segment k applies on (r_high_{k-1}, r_high_k]; the last segment's
/// logistic tail extends beyond its r_high. Each segment carries a
/// constant c_k fixed by continuity at the previous segment's right
/// edge (c_1 = 1).
pub fn multi_descent_eval(segments: &[(usize, usize)], r: usize) -> f64 {
    debug_assert!(!segments.is_empty());
    let mut c = 1.0;
    for (k, &(lo, hi)) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        if r <= hi || last {
            return c * descent_segment(lo, hi, r);
        }
        // Continuity at the edge shared with segment k+1: the next
        // segment's reciprocal branch gives c_{k+1}/hi there.
        c = hi as f64 * c * descent_segment(lo, hi, hi);
    }
    unreachable!("segment list is nonempty")
}

impl BiasProfile {
    /// Builds a profile after validating its parameters.
    pub fn new(kind: ProfileKind, scale: f64) -> Result<Self> {
        let p = BiasProfile { kind, scale };
        p.validate()?;
        Ok(p)
    }

    /// Convenience constructor with scale 1.
    pub fn unit(kind: ProfileKind) -> Result<Self> {
        Self::new(kind, 1.0)
    }

    /// Checks every parameter constraint, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "profile.scale must be a positive finite number, got {}",
                self.scale
            )));
        }
        match &self.kind {
            ProfileKind::HardThreshold { r0 } => {
                if *r0 < 1 {
                    return Err(Error::Config("profile.params.r0 must be >= 1".into()));
                }
            }
            ProfileKind::Exponential { xi }
            | ProfileKind::Polynomial { xi }
            | ProfileKind::Logarithmic { xi } => {
                if !(xi.is_finite() && *xi > 0.0) {
                    return Err(Error::Config(format!(
                        "profile.params.xi must be a positive finite number, got {xi}"
                    )));
                }
            }
            ProfileKind::DoubleDescent { r_low, r_high } => {
                if *r_low < 1 {
                    return Err(Error::Config("profile.params.r_low must be >= 1".into()));
                }
                if r_high < r_low {
                    return Err(Error::Config(format!(
                        "profile.params.r_high must be >= r_low, got ({r_low}, {r_high})"
                    )));
                }
            }
            ProfileKind::MultiDescent { segments } => {
                if segments.is_empty() {
                    return Err(Error::Config(
                        "profile.params.segments must be nonempty".into(),
                    ));
                }
                let mut prev_hi = 0usize;
                for (i, &(lo, hi)) in segments.iter().enumerate() {
                    if lo < 1 || lo < prev_hi || hi < lo {
                        return Err(Error::Config(format!(
                            "profile.params.segments must satisfy r_low_1 <= r_high_1 <= r_low_2 <= ..., violated at segment {i}"
                        )));
                    }
                    prev_hi = hi;
                }
            }
            ProfileKind::Tabulated { values } => {
                if values.is_empty() {
                    return Err(Error::Config("profile.params.values must be nonempty".into()));
                }
                for (i, w) in values.windows(2).enumerate() {
                    if !(w[0].is_finite() && w[1].is_finite()) || w[1] > w[0] || w[1] < 0.0 {
                        return Err(Error::Config(format!(
                            "profile.params.values must be nonincreasing, nonnegative and finite, violated at index {}",
                            i + 1
                        )));
                    }
                }
                if values[0] < 0.0 || !values[0].is_finite() {
                    return Err(Error::Config(
                        "profile.params.values must be nonincreasing, nonnegative and finite, violated at index 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluates A(r). Total on validated profiles.
    pub fn eval(&self, r: usize) -> f64 {
        let base = match &self.kind {
            ProfileKind::HardThreshold { r0 } => {
                if r < *r0 {
                    1.0
                } else {
                    0.0
                }
            }
            ProfileKind::Exponential { xi } => (-xi * r as f64).exp(),
            ProfileKind::Polynomial { xi } => ((r + 1) as f64).powf(-xi),
            ProfileKind::Logarithmic { xi } => {
                (std::f64::consts::LN_2 / ((r + 2) as f64).ln()).powf(*xi)
            }
            ProfileKind::DoubleDescent { r_low, r_high } => {
                double_descent_eval(*r_low, *r_high, r)
            }
            ProfileKind::MultiDescent { segments } => multi_descent_eval(segments, r),
            ProfileKind::Tabulated { values } => values.get(r).copied().unwrap_or(0.0),
        };
        self.scale * base
    }

    /// The increment delta_k^2 = A(k-1) - A(k), for k >= 1.
    ///
    /// Clamped at zero so coefficient constructions can take square
    /// roots even when rounding makes the difference minutely negative.
    pub fn increment(&self, k: usize) -> f64 {
        debug_assert!(k >= 1, "increments are defined for k >= 1");
        (self.eval(k - 1) - self.eval(k)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hard(r0: usize) -> BiasProfile {
        BiasProfile::unit(ProfileKind::HardThreshold { r0 }).unwrap()
    }

    #[test]
    fn polynomial_telescopes_to_reciprocal() {
        let p = BiasProfile::unit(ProfileKind::Polynomial { xi: 1.0 }).unwrap();
        assert!((p.eval(7) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn hard_threshold_vanishes_at_r0() {
        assert_eq!(hard(5).eval(5), 0.0);
        assert_eq!(hard(5).eval(4), 1.0);
    }

    #[test]
    fn logarithmic_at_six() {
        let p = BiasProfile::unit(ProfileKind::Logarithmic { xi: 1.0 }).unwrap();
        let expected = std::f64::consts::LN_2 / 8.0f64.ln();
        assert!((p.eval(6) - expected).abs() < 1e-15);
        assert!((expected - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_increment_is_difference() {
        let p = BiasProfile::unit(ProfileKind::Exponential { xi: 1.0 }).unwrap();
        let expected = (-2.0f64).exp() - (-3.0f64).exp();
        assert!((p.increment(3) - expected).abs() < 1e-16);
    }

    #[test]
    fn hard_threshold_mass_sits_at_r0() {
        let p = BiasProfile::new(ProfileKind::HardThreshold { r0: 5 }, 2.5).unwrap();
        assert_eq!(p.increment(5), 2.5);
        assert_eq!(p.increment(4), 0.0);
        assert_eq!(p.increment(6), 0.0);
    }

    #[test]
    fn double_descent_paper_values() {
        // First branch at the junction.
        assert!((double_descent_eval(30, 60, 30) - 1.0 / 30.0).abs() < 1e-15);
        // Continuity across the junction.
        let left = double_descent_eval(30, 60, 30);
        let coeff = (1.0 + (-30.0f64).exp()) / 30.0;
        let right = coeff / (1.0 + (30.0f64 - 60.0).exp());
        assert!((left - right).abs() < 1e-12);
        // Midpoint of the logistic tail.
        let expected = (1.0 + (-30.0f64).exp()) / 30.0 / 2.0;
        assert!((double_descent_eval(30, 60, 60) - expected).abs() < 1e-15);
    }

    #[test]
    fn double_descent_increment_at_junction() {
        let p = BiasProfile::unit(ProfileKind::DoubleDescent { r_low: 30, r_high: 60 }).unwrap();
        let expected = 1.0 / 29.0 - 1.0 / 30.0;
        assert!((p.increment(30) - expected).abs() < 1e-15);
    }

    #[test]
    fn single_segment_multi_descent_reduces_to_double() {
        for r in 0..200 {
            let m = multi_descent_eval(&[(30, 60)], r);
            let d = double_descent_eval(30, 60, r);
            assert_eq!(m, d, "r={r}");
        }
    }

    #[test]
    fn multi_descent_continuous_at_segment_edges() {
        let segs = [(30, 60), (90, 120)];
        // Left limit at r = 60 comes from segment 1, right side from segment 2.
        let left = multi_descent_eval(&segs, 60);
        let c2 = 60.0 * double_descent_eval(30, 60, 60);
        let right = c2 * descent_segment(90, 120, 60);
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn multi_descent_nonincreasing_on_paper_grid() {
        // r_high_k = r_low_k + 30 = 60k for k = 1..3.
        let segs = [(30, 60), (90, 120), (150, 180)];
        let p = BiasProfile::unit(ProfileKind::MultiDescent { segments: segs.to_vec() }).unwrap();
        for r in 1..180 {
            assert!(
                p.eval(r + 1) <= p.eval(r) + 1e-12,
                "not monotone at r={r}: {} -> {}",
                p.eval(r),
                p.eval(r + 1)
            );
        }
    }

    #[test]
    fn tabulated_has_zero_tail() {
        let p = BiasProfile::unit(ProfileKind::Tabulated { values: vec![3.0, 1.0, 1.0] }).unwrap();
        assert_eq!(p.eval(2), 1.0);
        assert_eq!(p.eval(3), 0.0);
        assert_eq!(p.eval(100), 0.0);
        assert_eq!(p.increment(3), 1.0);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(BiasProfile::unit(ProfileKind::Exponential { xi: 0.0 }).is_err());
        assert!(BiasProfile::unit(ProfileKind::HardThreshold { r0: 0 }).is_err());
        assert!(BiasProfile::unit(ProfileKind::DoubleDescent { r_low: 10, r_high: 5 }).is_err());
        assert!(BiasProfile::new(ProfileKind::Polynomial { xi: 1.0 }, -1.0).is_err());
        assert!(BiasProfile::unit(ProfileKind::MultiDescent {
            segments: vec![(30, 60), (50, 90)],
        })
        .is_err());
        assert!(BiasProfile::unit(ProfileKind::Tabulated { values: vec![1.0, 2.0] }).is_err());
    }

    #[test]
    fn serde_schema_round_trip() {
        let p = BiasProfile::new(ProfileKind::Exponential { xi: 1.0 }, 2.0).unwrap();
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(json["kind"], "Exponential");
        assert_eq!(json["params"]["xi"], 1.0);
        assert_eq!(json["scale"], 2.0);
        let back: BiasProfile = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);
        // Scale defaults to 1 when omitted.
        let q: BiasProfile =
            serde_json::from_str(r#"{"kind":"Polynomial","params":{"xi":2.0}}"#).unwrap();
        assert_eq!(q.scale, 1.0);
    }
}
