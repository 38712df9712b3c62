//! Rate probes: how the optimal resolution and its error scale with n.
//!
//! For a bias profile A and an estimation-error model eps(r, n), each
//! probe computes R_n = argmin_r [A(r) + eps(r, n)] and the minimal
//! objective L_n over a grid of sample sizes, then fits the transform
//! under which the theory predicts a line:
//!
//! * polynomial error r^alpha / n with A(r) decaying polynomially at
//!   rate xi: log L_n vs log n has slope -xi/(xi + alpha);
//! * exponential error alpha^r / n with A(r) = e^{-xi r}: log L_n vs
//!   log n has slope -xi/(xi + log alpha);
//! * exact linear-model error with tau^2 > 0: R_n grows like log n;
//! * exact linear-model error with tau^2 = 0: R_n grows like a
//!   fraction of n itself (no bias-variance trade-off in rates);
//! * tree-model error under a hard bias threshold: L_n decays
//!   geometrically in n, so log L_n vs n is linear.
//!
//! Fits drop the smallest 20% of the grid: the theorems are
//! asymptotic and the small-n transient bends the line.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{self, LinearModelSpec};
use crate::numeric::fit_line;
use crate::profile::{BiasProfile, ProfileKind};
use crate::tree::{self, TreeModelSpec};

/// Estimation-error model paired with the bias profile in a probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ErrorModel {
    /// eps(r, n) = r^alpha / n.
    Poly { alpha: f64 },
    /// eps(r, n) = alpha^r / n.
    Expo { alpha: f64 },
    /// Exact linear-regression estimation error at this tau^2.
    LinearExact { tau2: f64 },
    /// Exact linear-regression estimation error at tau^2 = 0.
    LinearZero,
    /// Exact tree-imputation estimation error, M categories, tau^2 = 0.
    TreeExact { m: usize },
    /// Tree-imputation error upper bound (2M/n) sum M^k A(k).
    TreeUpper { m: usize },
}

impl ErrorModel {
    /// Validates the model parameters.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorModel::Poly { alpha } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(Error::Config(format!(
                        "poly error model needs alpha > 0, got {alpha}"
                    )));
                }
            }
            ErrorModel::Expo { alpha } => {
                if !(alpha.is_finite() && alpha > 1.0) {
                    return Err(Error::Config(format!(
                        "expo error model needs alpha > 1, got {alpha}"
                    )));
                }
            }
            ErrorModel::LinearExact { tau2 } => {
                if !(tau2.is_finite() && tau2 >= 0.0) {
                    return Err(Error::Config(format!(
                        "linear-exact error model needs tau2 >= 0, got {tau2}"
                    )));
                }
            }
            ErrorModel::LinearZero => {}
            ErrorModel::TreeExact { m } | ErrorModel::TreeUpper { m } => {
                if m < 2 {
                    return Err(Error::Config(format!("tree error model needs m >= 2, got {m}")));
                }
            }
        }
        Ok(())
    }

}

/// The x/y transform under which a probe's theory predicts a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateTransform {
    /// log L_n against log n.
    LogLogLoss,
    /// R_n against log n.
    ResolutionVsLogN,
    /// R_n / n against n.
    ResolutionFraction,
    /// log L_n against n.
    LogLossVsN,
}

impl std::fmt::Display for RateTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateTransform::LogLogLoss => "log-log-loss",
            RateTransform::ResolutionVsLogN => "resolution-vs-log-n",
            RateTransform::ResolutionFraction => "resolution-fraction",
            RateTransform::LogLossVsN => "log-loss-vs-n",
        })
    }
}

/// One grid point: the optimal resolution and minimal objective at n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: u64,
    pub r_n: usize,
    pub l_n: f64,
}

/// Full probe outcome: per-n optima plus the fitted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitReport {
    pub profile: BiasProfile,
    pub error: ErrorModel,
    pub transform: RateTransform,
    pub points: Vec<RatePoint>,
    /// Number of leading (smallest-n) points excluded from the fit.
    pub fit_skip: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Theory-predicted magnitude of R_n, used only to size the search.
fn predicted_resolution(profile: &BiasProfile, error: &ErrorModel, n: u64) -> f64 {
    let nf = n as f64;
    let ln_n = nf.ln().max(1.0);
    match *error {
        ErrorModel::Poly { alpha } => match profile.kind {
            ProfileKind::HardThreshold { r0 } => (r0 + 1) as f64,
            ProfileKind::Exponential { xi } => ln_n / xi,
            ProfileKind::Polynomial { xi } => nf.powf(1.0 / (xi + alpha)),
            ProfileKind::Logarithmic { xi } => (nf / ln_n.powf(xi)).powf(1.0 / alpha),
            ProfileKind::DoubleDescent { r_high, .. } => r_high as f64 + nf.powf(1.0 / (1.0 + alpha)),
            ProfileKind::MultiDescent { ref segments } => {
                segments.last().map_or(1.0, |s| s.1 as f64) + nf.powf(1.0 / (1.0 + alpha))
            }
            ProfileKind::Tabulated { ref values } => values.len() as f64,
        },
        ErrorModel::Expo { alpha } => base_log_rate(profile, alpha.ln(), ln_n),
        ErrorModel::TreeExact { m } | ErrorModel::TreeUpper { m } => {
            base_log_rate(profile, (m as f64).ln(), ln_n)
        }
        ErrorModel::LinearExact { .. } | ErrorModel::LinearZero => {
            unreachable!("linear models scan their natural domain")
        }
    }
}

/// Shared log-rate guess for geometrically growing error models.
fn base_log_rate(profile: &BiasProfile, ln_growth: f64, ln_n: f64) -> f64 {
    match profile.kind {
        ProfileKind::HardThreshold { r0 } => (r0 + 1) as f64,
        ProfileKind::Exponential { xi } => ln_n / (xi + ln_growth),
        ProfileKind::DoubleDescent { r_high, .. } => r_high as f64 + ln_n / ln_growth,
        ProfileKind::MultiDescent { ref segments } => {
            segments.last().map_or(1.0, |s| s.1 as f64) + ln_n / ln_growth
        }
        ProfileKind::Tabulated { ref values } => values.len() as f64,
        _ => ln_n / ln_growth,
    }
}

/// Leftmost argmin of the objective over 0..=r_hi.
fn scan_argmin(mut objective: impl FnMut(usize) -> f64, r_hi: usize) -> (usize, f64) {
    let mut best_r = 0;
    let mut best = objective(0);
    for r in 1..=r_hi {
        let v = objective(r);
        if v < best {
            best = v;
            best_r = r;
        }
    }
    (best_r, best)
}

/// Computes (R_n, L_n) for one sample size.
fn optimum_at(profile: &BiasProfile, error: &ErrorModel, n: u64) -> Result<RatePoint> {
    let nf = n as f64;
    let (r_n, l_n) = match *error {
        ErrorModel::LinearExact { .. } | ErrorModel::LinearZero => {
            let tau2 = if let ErrorModel::LinearExact { tau2 } = *error { tau2 } else { 0.0 };
            if n < 4 {
                return Err(Error::Config(format!(
                    "linear rate probes need n >= 4, got n={n}"
                )));
            }
            let spec =
                LinearModelSpec { profile: profile.clone(), tau2, beta0: 0.0 };
            let r_hi = (n - 3) as usize;
            let mut err = Ok(());
            let (r, l) = scan_argmin(
                |r| match linear::exact_eps(&spec, n as usize, r) {
                    Ok(eps) => profile.eval(r) + eps,
                    Err(e) => {
                        err = Err(e);
                        f64::INFINITY
                    }
                },
                r_hi,
            );
            err?;
            (r, l)
        }
        ErrorModel::Poly { alpha } => {
            let cap = search_cap(profile, error, n);
            let (r, l) =
                scan_argmin(|r| profile.eval(r) + (r as f64).powf(alpha) / nf, cap);
            check_interior(r, cap, n)?;
            (r, l)
        }
        ErrorModel::Expo { alpha } => {
            let cap = search_cap(profile, error, n);
            let ln_a = alpha.ln();
            let (r, l) =
                scan_argmin(|r| profile.eval(r) + (r as f64 * ln_a).exp() / nf, cap);
            check_interior(r, cap, n)?;
            (r, l)
        }
        ErrorModel::TreeExact { m } => {
            let cap = search_cap(profile, error, n);
            let spec =
                TreeModelSpec { m, profile: profile.clone(), tau2: 0.0, beta0: 0.0 };
            let eps = tree::exact_eps_curve(&spec, n as usize, cap)?;
            let (r, l) = scan_argmin(|r| profile.eval(r) + eps[r], cap);
            check_interior(r, cap, n)?;
            (r, l)
        }
        ErrorModel::TreeUpper { m } => {
            let cap = search_cap(profile, error, n);
            let ln_m = (m as f64).ln();
            // Running prefix of (2M/n) sum_{k<=r} M^k A(k).
            let mut prefix = 0.0;
            let bounds: Vec<f64> = (0..=cap)
                .map(|k| {
                    let a = profile.eval(k);
                    if a > 0.0 {
                        prefix += (k as f64 * ln_m + a.ln()).exp();
                    }
                    2.0 * m as f64 / nf * prefix
                })
                .collect();
            let (r, l) = scan_argmin(|r| profile.eval(r) + bounds[r], cap);
            check_interior(r, cap, n)?;
            (r, l)
        }
    };
    Ok(RatePoint { n, r_n, l_n })
}

/// Search cap min(10 * ceil(predicted R_n), 10^6), never below 8.
fn search_cap(profile: &BiasProfile, error: &ErrorModel, n: u64) -> usize {
    let predicted = predicted_resolution(profile, error, n).max(1.0);
    ((10.0 * predicted.ceil()) as usize).clamp(8, 1_000_000)
}

fn check_interior(r: usize, cap: usize, n: u64) -> Result<()> {
    if r == cap {
        return Err(Error::Domain(format!(
            "rate probe argmin hit the search cap r_cap={cap} at n={n}; the grid is outside the regime the cap was sized for"
        )));
    }
    Ok(())
}

/// Transform declared by the theory for this profile/error pairing.
pub fn declared_transform(profile: &BiasProfile, error: &ErrorModel) -> RateTransform {
    match error {
        ErrorModel::Poly { .. } | ErrorModel::Expo { .. } => RateTransform::LogLogLoss,
        ErrorModel::LinearExact { .. } => RateTransform::ResolutionVsLogN,
        ErrorModel::LinearZero => RateTransform::ResolutionFraction,
        ErrorModel::TreeExact { .. } | ErrorModel::TreeUpper { .. } => {
            if matches!(profile.kind, ProfileKind::HardThreshold { .. }) {
                RateTransform::LogLossVsN
            } else {
                RateTransform::ResolutionVsLogN
            }
        }
    }
}

/// Per-n optima (R_n, L_n), computed concurrently, assembled in grid
/// order.
pub fn optima(
    profile: &BiasProfile,
    error: &ErrorModel,
    n_grid: &[u64],
) -> Result<Vec<RatePoint>> {
    profile.validate()?;
    error.validate()?;
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid.is_empty() {
        return Err(Error::Config("n_grid must be strictly increasing and nonempty".into()));
    }
    n_grid
        .par_iter()
        .map(|&n| optimum_at(profile, error, n))
        .collect::<Result<Vec<_>>>()
}

/// Runs the probe across the grid and fits the declared transform.
pub fn rate_probe(
    profile: &BiasProfile,
    error: &ErrorModel,
    n_grid: &[u64],
) -> Result<RateFitReport> {
    let points = optima(profile, error, n_grid)?;
    let fit_skip = points.len() / 5;
    let fit_points = &points[fit_skip..];
    if fit_points.len() < 2 {
        return Err(Error::Config(format!(
            "n_grid has {} points, too short for a rate fit after dropping the transient 20%",
            points.len()
        )));
    }
    let transform = declared_transform(profile, error);
    let mut xs = Vec::with_capacity(fit_points.len());
    let mut ys = Vec::with_capacity(fit_points.len());
    for p in fit_points {
        let (x, y) = match transform {
            RateTransform::LogLogLoss => ((p.n as f64).ln(), loss_ln(p)?),
            RateTransform::ResolutionVsLogN => ((p.n as f64).ln(), p.r_n as f64),
            RateTransform::ResolutionFraction => (p.n as f64, p.r_n as f64 / p.n as f64),
            RateTransform::LogLossVsN => (p.n as f64, loss_ln(p)?),
        };
        xs.push(x);
        ys.push(y);
    }
    let (slope, intercept, r2) = fit_line(&xs, &ys)?;
    Ok(RateFitReport {
        profile: profile.clone(),
        error: error.clone(),
        transform,
        points,
        fit_skip,
        slope,
        intercept,
        r2,
    })
}

fn loss_ln(p: &RatePoint) -> Result<f64> {
    if p.l_n > 0.0 {
        Ok(p.l_n.ln())
    } else {
        Err(Error::Domain(format!(
            "log fit undefined: loss is {} at n={}",
            p.l_n, p.n
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(kind: ProfileKind) -> BiasProfile {
        BiasProfile::unit(kind).unwrap()
    }

    #[test]
    fn polynomial_bias_polynomial_error_rate() {
        let report = rate_probe(
            &profile(ProfileKind::Polynomial { xi: 1.0 }),
            &ErrorModel::Poly { alpha: 1.0 },
            &[1_000, 10_000, 100_000, 1_000_000, 10_000_000],
        )
        .unwrap();
        assert_eq!(report.transform, RateTransform::LogLogLoss);
        assert!((report.slope + 0.5).abs() <= 0.05, "slope {}", report.slope);
    }

    #[test]
    fn exponential_bias_exponential_error_rate() {
        let report = rate_probe(
            &profile(ProfileKind::Exponential { xi: 1.0 }),
            &ErrorModel::Expo { alpha: 2.0 },
            &[1_000, 10_000, 100_000, 1_000_000, 10_000_000],
        )
        .unwrap();
        let want = -1.0 / (1.0 + 2.0_f64.ln());
        assert!((report.slope - want).abs() <= 0.05, "slope {}", report.slope);
    }

    #[test]
    fn linear_exact_resolution_tracks_log_n() {
        let grid: Vec<u64> = (1..=40).map(|i| 50 * i).collect();
        let report = rate_probe(
            &profile(ProfileKind::Exponential { xi: 1.0 }),
            &ErrorModel::LinearExact { tau2: 0.5 },
            &grid,
        )
        .unwrap();
        assert_eq!(report.transform, RateTransform::ResolutionVsLogN);
        assert!((0.85..=1.15).contains(&report.slope), "slope {}", report.slope);
        assert!((1.2..=2.2).contains(&report.intercept), "intercept {}", report.intercept);
        // tau2 > 0: the optimum is nondecreasing in n.
        assert!(report.points.windows(2).all(|w| w[0].r_n <= w[1].r_n));
    }

    #[test]
    fn linear_zero_resolution_is_a_stable_fraction() {
        let grid: Vec<u64> = (1..=10).map(|i| 200 * i).collect();
        let report = rate_probe(
            &profile(ProfileKind::Polynomial { xi: 1.0 }),
            &ErrorModel::LinearZero,
            &grid,
        )
        .unwrap();
        assert_eq!(report.transform, RateTransform::ResolutionFraction);
        let fracs: Vec<f64> =
            report.points.iter().map(|p| p.r_n as f64 / p.n as f64).collect();
        assert!(fracs.iter().all(|f| (0.05..0.95).contains(f)), "{fracs:?}");
        let top = &fracs[fracs.len() / 2..];
        let spread = top.iter().cloned().fold(f64::MIN, f64::max)
            - top.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 0.1, "fraction spread {spread}");
    }

    #[test]
    fn tree_upper_bound_resolution_tracks_log_n() {
        let report = rate_probe(
            &profile(ProfileKind::Exponential { xi: 0.5 }),
            &ErrorModel::TreeUpper { m: 2 },
            &[1_000, 10_000, 100_000, 1_000_000],
        )
        .unwrap();
        assert_eq!(report.transform, RateTransform::ResolutionVsLogN);
        // Balance point grows like log n / log 2, slope about 1.44.
        assert!((1.2..=1.7).contains(&report.slope), "slope {}", report.slope);
    }

    #[test]
    fn tree_hard_threshold_loss_decays_geometrically() {
        let grid: Vec<u64> = (1..=6).map(|i| 200 * i).collect();
        let report = rate_probe(
            &profile(ProfileKind::HardThreshold { r0: 2 }),
            &ErrorModel::TreeExact { m: 2 },
            &grid,
        )
        .unwrap();
        assert_eq!(report.transform, RateTransform::LogLossVsN);
        let want = (1.0 - 0.25_f64).ln();
        assert!((report.slope - want).abs() <= 0.02, "slope {}", report.slope);
    }

    #[test]
    fn grid_must_increase() {
        let err = rate_probe(
            &profile(ProfileKind::Polynomial { xi: 1.0 }),
            &ErrorModel::Poly { alpha: 1.0 },
            &[100, 100],
        )
        .unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
    }

    #[test]
    fn model_validation_rejects_bad_parameters() {
        assert!(ErrorModel::Poly { alpha: 0.0 }.validate().is_err());
        assert!(ErrorModel::Expo { alpha: 1.0 }.validate().is_err());
        assert!(ErrorModel::TreeExact { m: 1 }.validate().is_err());
        assert!(ErrorModel::LinearExact { tau2: -0.1 }.validate().is_err());
    }
}
