//! The normal linear model with unbounded resolution.
//!
//! The response is Y = beta_0 + sum_k beta_k X_k + eta with X_k iid
//! standard normal, eta ~ N(0, tau^2), and coefficients pinned to a
//! bias profile by beta_k = sqrt(A(k-1) - A(k)), so that the best
//! resolution-r predictor misses exactly A(r) of the response variance.
//! Because the unmodeled tail sum_{k > r_max} beta_k X_k is itself a
//! centered normal with variance A(r_max), independent of everything
//! kept, generation folds it into the noise term: samples are exact
//! draws from the infinite model restricted to the first r_max
//! covariates, not truncations.
//!
//! Closed forms implemented here, for n - r - 2 > 0:
//!
//! - expected estimation error
//!   eps(r, n) = (A(r) + tau^2) / (n - r - 2) * ((n - 2)/n + r)
//! - average prediction error
//!   PE_n(r) = (tau^2 + A(r)) (n + 1)(n - 2) / (n (n - r - 2))
//! - E[sigma_hat^2_r] = (n - r - 1)/n * (tau^2 + A(r))
//! - E[CV_n(r)] = PE_{n-1}(r),
//!   E[IC_n(r)] = (tau^2 + A(r)) (n - r - 1)(n + 2r + 2) / n^2

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::BiasProfile;
use crate::seed;

/// Generative parameters of the linear family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelSpec {
    pub profile: BiasProfile,
    /// Intrinsic variance tau^2 of the infinite-resolution residual.
    pub tau2: f64,
    /// Intercept beta_0.
    #[serde(default)]
    pub beta0: f64,
}

impl LinearModelSpec {
    /// Validates profile and noise parameters.
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if !(self.tau2.is_finite() && self.tau2 >= 0.0) {
            return Err(Error::Config(format!(
                "tau2 must be finite and nonnegative, got {}",
                self.tau2
            )));
        }
        if !self.beta0.is_finite() {
            return Err(Error::Config(format!("beta0 must be finite, got {}", self.beta0)));
        }
        Ok(())
    }

    /// Coefficient beta_k = sqrt(A(k-1) - A(k)) for k >= 1; beta_0 for k = 0.
    pub fn beta(&self, k: usize) -> f64 {
        if k == 0 {
            self.beta0
        } else {
            self.profile.increment(k).sqrt()
        }
    }

    /// True coefficient vector (beta_0, ..., beta_r) of the best
    /// resolution-r predictor.
    pub fn theta_star(&self, r: usize) -> Vec<f64> {
        (0..=r).map(|k| self.beta(k)).collect()
    }
}

/// One sampled training set of the linear family.
///
/// Covariates are stored row-major with an explicit all-ones column 0,
/// so row i is (1, x_i1, ..., x_{i r_max}).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub n: usize,
    pub r_max: usize,
    covariates: Vec<f64>,
    pub responses: Vec<f64>,
    /// Seed the set was generated from; None for imported data.
    pub seed: Option<u64>,
}

impl TrainingSet {
    /// Covariate x_{ij} (column 0 is the constant 1).
    #[inline]
    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.covariates[i * (self.r_max + 1) + j]
    }

    /// Row i as a slice (1, x_i1, ..., x_{i r_max}).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.r_max + 1;
        &self.covariates[i * w..(i + 1) * w]
    }

    /// Builds a set from raw parts, checking the intercept column.
    pub fn from_parts(n: usize, r_max: usize, covariates: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if covariates.len() != n * (r_max + 1) || responses.len() != n {
            return Err(Error::Config(format!(
                "covariates/responses have wrong length for n={n}, r_max={r_max}"
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) || responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("covariates and responses must be finite".into()));
        }
        for i in 0..n {
            if covariates[i * (r_max + 1)] != 1.0 {
                return Err(Error::Config(format!("x0 must be identically 1, violated at row {i}")));
            }
        }
        Ok(TrainingSet { n, r_max, covariates, responses, seed: None })
    }
}

/// Samples a training set of size n at generation resolution r_max.
///
/// Draw order per unit: the r_max covariates left to right, then the
/// unit's noise. This order is part of the reproducibility contract.
pub fn sample_training(spec: &LinearModelSpec, n: usize, r_max: usize, seed: u64) -> Result<TrainingSet> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let betas: Vec<f64> = (1..=r_max).map(|k| spec.beta(k)).collect();
    // Unmodeled tail folded into the noise: eta ~ N(0, tau2 + A(r_max)).
    let noise_sd = (spec.tau2 + spec.profile.eval(r_max)).sqrt();
    let mut rng = seed::direct_rng(seed);
    let w = r_max + 1;
    let mut covariates = vec![0.0; n * w];
    let mut responses = vec![0.0; n];
    for i in 0..n {
        covariates[i * w] = 1.0;
        let mut y = spec.beta0;
        for k in 1..=r_max {
            let x: f64 = rng.sample(StandardNormal);
            covariates[i * w + k] = x;
            y += betas[k - 1] * x;
        }
        let eta: f64 = rng.sample(StandardNormal);
        responses[i] = y + noise_sd * eta;
    }
    Ok(TrainingSet { n, r_max, covariates, responses, seed: Some(seed) })
}

fn check_pe_domain(n: usize, r: usize) -> Result<()> {
    if n < 3 || r > n - 3 {
        return Err(Error::Domain(format!(
            "expectation does not exist: requires r <= n - 3, got r={r}, n={n}"
        )));
    }
    Ok(())
}

/// Closed-form expected estimation error eps(r, n).
pub fn exact_eps(spec: &LinearModelSpec, n: usize, r: usize) -> Result<f64> {
    check_pe_domain(n, r)?;
    let (nf, rf) = (n as f64, r as f64);
    Ok((spec.profile.eval(r) + spec.tau2) / (nf - rf - 2.0) * ((nf - 2.0) / nf + rf))
}

/// Closed-form average prediction error PE_n(r), including tau^2.
pub fn exact_pe(spec: &LinearModelSpec, n: usize, r: usize) -> Result<f64> {
    check_pe_domain(n, r)?;
    let (nf, rf) = (n as f64, r as f64);
    Ok((spec.tau2 + spec.profile.eval(r)) * (nf + 1.0) * (nf - 2.0) / (nf * (nf - rf - 2.0)))
}

/// Squared distance between a fitted coefficient vector and the true
/// one; with orthonormal covariates this is the realized estimation
/// error of the fitted resolution-r predictor.
pub fn estimation_error(theta_hat: &[f64], spec: &LinearModelSpec, r: usize) -> Result<f64> {
    if theta_hat.len() != r + 1 {
        return Err(Error::Config(format!(
            "theta_hat has length {}, expected r + 1 = {}",
            theta_hat.len(),
            r + 1
        )));
    }
    Ok(crate::numeric::neumaier_sum(
        theta_hat.iter().enumerate().map(|(k, &t)| (t - spec.beta(k)) * (t - spec.beta(k))),
    ))
}

/// E[CV_n(r)] = PE_{n-1}(r); requires r <= n - 4.
pub fn expected_cv(spec: &LinearModelSpec, n: usize, r: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("expectation does not exist: n must be >= 1".into()));
    }
    exact_pe(spec, n - 1, r)
}

/// E[IC_n(r)] = (tau^2 + A(r)) (n - r - 1)(n + 2r + 2) / n^2.
pub fn expected_ic(spec: &LinearModelSpec, n: usize, r: usize) -> Result<f64> {
    if r + 1 > n {
        return Err(Error::Domain(format!(
            "expectation does not exist: requires r + 1 <= n, got r={r}, n={n}"
        )));
    }
    let (nf, rf) = (n as f64, r as f64);
    Ok((spec.tau2 + spec.profile.eval(r)) * (nf - rf - 1.0) * (nf + 2.0 * rf + 2.0) / (nf * nf))
}

/// E[sigma_hat^2_r] = (n - r - 1)/n * (tau^2 + A(r)).
pub fn expected_sigma_hat2(spec: &LinearModelSpec, n: usize, r: usize) -> Result<f64> {
    if r + 1 > n {
        return Err(Error::Domain(format!(
            "expectation does not exist: requires r + 1 <= n, got r={r}, n={n}"
        )));
    }
    let (nf, rf) = (n as f64, r as f64);
    Ok((nf - rf - 1.0) / nf * (spec.tau2 + spec.profile.eval(r)))
}
