//! Resolution selection by curve minimization.
//!
//! A selection method produces one error curve over a search range and
//! picks its leftmost minimizer. Oracle minimizes the exact prediction
//! error of the generating model and so never depends on the training
//! draw; CV, UE, and IC minimize their respective estimates computed
//! from one progressive least-squares sweep.

use serde::{Deserialize, Serialize};

use crate::curve::{CurveKind, ErrorCurve};
use crate::error::{Error, Result};
use crate::linear::{exact_pe, LinearModelSpec, TrainingSet};
use crate::ols::LinearFit;

/// Resolution selection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Cv,
    Ue,
    Ic,
}

impl Method {
    /// Stable lowercase name, used in CSV rows and error messages.
    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Cv => "cv",
            Method::Ue => "ue",
            Method::Ic => "ic",
        }
    }

    /// Largest admissible resolution at sample size n.
    ///
    /// Oracle and UE need r <= n - 3 for the expectation to exist, CV
    /// needs a nondegenerate leave-one-out fit (r <= n - 2), IC only
    /// needs a residual variance (r <= n - 1).
    pub fn r_cap(self, n: usize) -> usize {
        match self {
            Method::Oracle | Method::Ue => n.saturating_sub(3),
            Method::Cv => n.saturating_sub(2),
            Method::Ic => n.saturating_sub(1),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "cv" => Ok(Method::Cv),
            "ue" => Ok(Method::Ue),
            "ic" => Ok(Method::Ic),
            other => Err(Error::Config(format!(
                "unknown method {other:?}, expected one of oracle, cv, ue, ic"
            ))),
        }
    }
}

/// Outcome of one selection: the criterion curve and its minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub method: Method,
    pub chosen_r: usize,
    pub curve: ErrorCurve,
    pub search_lo: usize,
    pub search_hi: usize,
}

/// The smallest r attaining the minimum of the curve over
/// [r_lo, r_hi]; ties break to the smallest r.
pub fn argmin_resolution(curve: &ErrorCurve, r_lo: usize, r_hi: usize) -> Result<usize> {
    let (c_lo, c_hi) = curve.r_range();
    if r_lo > r_hi {
        return Err(Error::Config(format!("empty search range [{r_lo}, {r_hi}]")));
    }
    if r_lo < c_lo || r_hi > c_hi {
        return Err(Error::Config(format!(
            "search range [{r_lo}, {r_hi}] not covered by the curve range [{c_lo}, {c_hi}]"
        )));
    }
    let mut best_r = r_lo;
    let mut best = f64::INFINITY;
    for (r, v) in curve.iter() {
        if r < r_lo || r > r_hi {
            continue;
        }
        if v < best {
            best = v;
            best_r = r;
        }
    }
    Ok(best_r)
}

/// Runs one selection method on a training set over [r_lo, r_hi].
///
/// The generating spec is consulted only by Oracle; data-driven
/// methods see the training set alone.
pub fn select(
    method: Method,
    t: &TrainingSet,
    spec: &LinearModelSpec,
    r_lo: usize,
    r_hi: usize,
) -> Result<SelectionReport> {
    let n = t.n;
    if r_lo > r_hi {
        return Err(Error::Config(format!("empty search range [{r_lo}, {r_hi}]")));
    }
    let cap = method.r_cap(n);
    if r_hi > cap {
        return Err(Error::Config(format!(
            "search range [{r_lo}, {r_hi}] exceeds the {method} domain [0, {cap}] at n={n}"
        )));
    }
    let curve = match method {
        Method::Oracle => {
            let values: Result<Vec<f64>> =
                (r_lo..=r_hi).map(|r| exact_pe(spec, n, r)).collect();
            ErrorCurve::new(CurveKind::ExactPE, n, r_lo, values?)?
        }
        Method::Cv | Method::Ue | Method::Ic => {
            let fit = LinearFit::new(t, r_hi)?;
            let values: Result<Vec<f64>> = (r_lo..=r_hi)
                .map(|r| match method {
                    Method::Cv => fit.cv_error(r),
                    Method::Ue => fit.ue_error(r),
                    _ => fit.ic_error(r),
                })
                .collect();
            let kind = match method {
                Method::Cv => CurveKind::CV,
                Method::Ue => CurveKind::UE,
                _ => CurveKind::IC,
            };
            ErrorCurve::new(kind, n, r_lo, values?)?
        }
    };
    let chosen_r = argmin_resolution(&curve, r_lo, r_hi)?;
    Ok(SelectionReport { method, chosen_r, curve, search_lo: r_lo, search_hi: r_hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::sample_training;
    use crate::profile::{BiasProfile, ProfileKind};

    fn poly_spec(tau2: f64) -> LinearModelSpec {
        LinearModelSpec {
            profile: BiasProfile::unit(ProfileKind::Polynomial { xi: 1.0 }).unwrap(),
            tau2,
            beta0: 0.0,
        }
    }

    #[test]
    fn leftmost_tie_break() {
        let curve = ErrorCurve::new(CurveKind::CV, 10, 0, vec![3.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(argmin_resolution(&curve, 0, 3).unwrap(), 1);
        let flat = ErrorCurve::new(CurveKind::CV, 10, 2, vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(argmin_resolution(&flat, 2, 4).unwrap(), 2);
    }

    #[test]
    fn range_must_be_covered() {
        let curve = ErrorCurve::new(CurveKind::CV, 10, 1, vec![1.0, 2.0]).unwrap();
        assert!(argmin_resolution(&curve, 0, 2).is_err());
        assert!(argmin_resolution(&curve, 2, 1).is_err());
    }

    #[test]
    fn oracle_matches_table_values() {
        let spec = poly_spec(0.5);
        let t = sample_training(&spec, 50, 47, 1).unwrap();
        let rep = select(Method::Oracle, &t, &spec, 0, 47).unwrap();
        assert_eq!(rep.chosen_r, 7);
        let spec_log = LinearModelSpec {
            profile: BiasProfile::unit(ProfileKind::Logarithmic { xi: 1.0 }).unwrap(),
            tau2: 0.0,
            beta0: 0.0,
        };
        let rep = select(Method::Oracle, &t, &spec_log, 0, 47).unwrap();
        assert_eq!(rep.chosen_r, 12);
    }

    #[test]
    fn method_domain_caps_are_enforced() {
        let spec = poly_spec(0.5);
        let t = sample_training(&spec, 20, 19, 3).unwrap();
        // n = 20: caps are 17 (oracle/ue), 18 (cv), 19 (ic).
        assert!(select(Method::Ue, &t, &spec, 0, 18).is_err());
        assert!(select(Method::Cv, &t, &spec, 0, 19).is_err());
        let err = select(Method::Ic, &t, &spec, 0, 20).unwrap_err().to_string();
        assert!(err.contains("exceeds the ic domain [0, 19]"), "{err}");
        assert!(select(Method::Ue, &t, &spec, 0, 17).is_ok());
        assert!(select(Method::Ic, &t, &spec, 0, 19).is_ok());
    }

    #[test]
    fn ue_finds_noiseless_threshold() {
        // With tau2 = 0 and a hard threshold at 4 the residual sum hits
        // zero at r = 4, so UE is zero from there on and the leftmost
        // minimum is exactly 4.
        let spec = LinearModelSpec {
            profile: BiasProfile::unit(ProfileKind::HardThreshold { r0: 4 }).unwrap(),
            tau2: 0.0,
            beta0: 0.0,
        };
        let t = sample_training(&spec, 30, 12, 11).unwrap();
        let rep = select(Method::Ue, &t, &spec, 0, 12).unwrap();
        assert_eq!(rep.chosen_r, 4);
    }

    #[test]
    fn selection_is_reproducible() {
        let spec = poly_spec(0.5);
        let t = sample_training(&spec, 50, 47, 42).unwrap();
        for method in [Method::Cv, Method::Ue, Method::Ic] {
            let a = select(method, &t, &spec, 0, 47).unwrap();
            let b = select(method, &t, &spec, 0, 47).unwrap();
            assert_eq!(a, b);
            assert!(a.chosen_r <= 47);
        }
    }
}
