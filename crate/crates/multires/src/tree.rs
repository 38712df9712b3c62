//! The regression-tree model with categorical covariates.
//!
//! Covariates X_1, X_2, ... are iid uniform on {1..M}; the response is
//! Y = beta_0 + sum_k beta_k (1{X_k = 1} - 1/M) + eta with
//! beta_k = M/sqrt(M-1) * sqrt(A(k-1) - A(k)), which gives the best
//! resolution-r predictor a resolution bias of exactly A(r). The
//! predictor is highest-resolution imputation: average the responses
//! of the training units matching the target's covariate prefix at the
//! deepest nonempty depth <= r (depth 0 always matches and yields the
//! global mean).
//!
//! Write Z_k for the number of training units matching a fixed depth-k
//! prefix of interest. The chain Z_0 = n -> Z_1 -> ... is Markov with
//! Binomial(Z_k, 1/M) thinning, and Z_k ~ Binomial(n, M^{-k})
//! marginally. Uniformity makes all depth-k prefixes exchangeable, so
//! the expected estimation error collapses to binomial sums over the
//! deepest-match events. When the target matches at depth r the
//! matched responses are unconditional depth-r draws and contribute
//! pure variance. When the deepest match is some k < r, the event
//! itself conditions the matched units: each of them disagrees with
//! the target at depth k+1, so its (k+1)-coordinate is uniform over
//! the other M-1 categories. Given a stop at depth k with Z_k = z,
//! integrating that conditional law gives the event value
//!
//! ```text
//! v(k, z) = (A(k+1) + tau^2)/z + (A(k+1) - A(r))
//!         + delta_{k+1} * M/(M-1)^2 * (M + (M-2)/z)
//! ```
//!
//! with delta_{k+1} = A(k) - A(k+1). Only the increment delta_{k+1}
//! is inflated by the conditioning; as M grows the factor tends to 1
//! and v collapses to the naive (A(k) + tau^2)/z + (A(k) - A(r)).
//! Summing v against the chain law needs the same three marginal
//! sums regardless:
//!
//! ```text
//! eps(r, n) = (A(r) + tau^2) S1(r)
//!           + sum_{k<r} (A(k+1) + tau^2 + delta_{k+1} M(M-2)/(M-1)^2) S2(k)
//!           + sum_{k<r} (A(k+1) - A(r)  + delta_{k+1} M^2/(M-1)^2)    S3(k)
//! S1(k) = E[1{Z_k>0} / Z_k]      S2(k) = E[1{Z_k>0} q^{Z_k} / Z_k]
//! S3(k) = E[1{Z_k>0} q^{Z_k}]    with q = 1 - 1/M
//! ```
//!
//! using that E[1{stop at k}/Z_k] = S2(k) and P(stop at k) = S3(k).
//! This value is verified against exhaustive enumeration, against a
//! joint-law dynamic program, and against plain Monte Carlo in the
//! integration tests; dropping the delta inflation fails all three.
//!
//! The pmfs are evaluated in log space so that M^{-k} can underflow
//! without poisoning the sums. Sampling stays exact at finite
//! generation depth by folding the tail variance A(r_max) into one
//! extra hidden uniform covariate that the estimator never sees.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial_ln_pmf, neumaier_sum};
use crate::profile::BiasProfile;
use crate::seed;

/// Generative parameters of the tree family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModelSpec {
    /// Number of categories per covariate, M >= 2.
    pub m: usize,
    pub profile: BiasProfile,
    /// Intrinsic variance tau^2.
    pub tau2: f64,
    /// Intercept beta_0.
    #[serde(default)]
    pub beta0: f64,
}

impl TreeModelSpec {
    /// Validates category count, profile, and noise parameters.
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("m must be >= 2, got {}", self.m)));
        }
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

    /// Coefficient beta_k = M/sqrt(M-1) * sqrt(A(k-1) - A(k)) for
    /// k >= 1; beta_0 for k = 0.
    pub fn beta(&self, k: usize) -> f64 {
        if k == 0 {
            self.beta0
        } else {
            let m = self.m as f64;
            m / (m - 1.0).sqrt() * self.profile.increment(k).sqrt()
        }
    }

    /// Conditional mean E[Y | X_1..X_len = prefix].
    pub fn conditional_mean(&self, prefix: &[u32]) -> f64 {
        let m = self.m as f64;
        let mut y = self.beta0;
        for (j, &v) in prefix.iter().enumerate() {
            let ind = if v == 1 { 1.0 } else { 0.0 };
            y += self.beta(j + 1) * (ind - 1.0 / m);
        }
        y
    }
}

/// One sampled categorical training set.
///
/// Covariates are stored row-major, n x r_max, values in {1..M}; the
/// intercept covariate X_0 = 1 is implicit.
#[derive(Debug)]
pub struct CategoricalTrainingSet {
    pub n: usize,
    pub r_max: usize,
    covariates: Vec<u32>,
    pub responses: Vec<f64>,
    /// Seed the set was generated from; None for imported data.
    pub seed: Option<u64>,
    /// Unit order sorted lexicographically by covariate row; built on
    /// first use, then shared immutably.
    order: OnceLock<Vec<u32>>,
}

impl PartialEq for CategoricalTrainingSet {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.r_max == other.r_max
            && self.covariates == other.covariates
            && self.responses == other.responses
            && self.seed == other.seed
    }
}

impl Clone for CategoricalTrainingSet {
    fn clone(&self) -> Self {
        CategoricalTrainingSet {
            n: self.n,
            r_max: self.r_max,
            covariates: self.covariates.clone(),
            responses: self.responses.clone(),
            seed: self.seed,
            order: OnceLock::new(),
        }
    }
}

impl CategoricalTrainingSet {
    /// Covariate x_{ik} for k in 1..=r_max.
    #[inline]
    pub fn x(&self, i: usize, k: usize) -> u32 {
        debug_assert!((1..=self.r_max).contains(&k));
        self.covariates[i * self.r_max + k - 1]
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.covariates[i * self.r_max..(i + 1) * self.r_max]
    }

    /// Builds a set from raw parts, checking category ranges.
    pub fn from_parts(
        n: usize,
        r_max: usize,
        m: usize,
        covariates: Vec<u32>,
        responses: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if r_max == 0 {
            return Err(Error::Config("r_max must be >= 1".into()));
        }
        if covariates.len() != n * r_max || responses.len() != n {
            return Err(Error::Config(format!(
                "covariates/responses have wrong length for n={n}, r_max={r_max}"
            )));
        }
        if let Some(bad) = covariates.iter().position(|&v| v < 1 || v as usize > m) {
            return Err(Error::Config(format!(
                "covariate entries must lie in 1..={m}, violated at flat index {bad}"
            )));
        }
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("responses must be finite".into()));
        }
        Ok(CategoricalTrainingSet {
            n,
            r_max,
            covariates,
            responses,
            seed: None,
            order: OnceLock::new(),
        })
    }

    /// Unit order sorted by covariate row, built lazily.
    fn sorted_order(&self) -> &[u32] {
        self.order.get_or_init(|| {
            let mut order: Vec<u32> = (0..self.n as u32).collect();
            order.sort_by(|&a, &b| self.row(a as usize).cmp(self.row(b as usize)));
            order
        })
    }

    /// Narrows [lo, hi) to units whose covariate at depth `depth`
    /// equals v; depths are 1-based.
    fn narrow(&self, lo: usize, hi: usize, depth: usize, v: u32) -> (usize, usize) {
        let order = self.sorted_order();
        let lo2 = lo + order[lo..hi].partition_point(|&u| self.x(u as usize, depth) < v);
        let hi2 = lo2 + order[lo2..hi].partition_point(|&u| self.x(u as usize, depth) == v);
        (lo2, hi2)
    }

    fn range_mean(&self, lo: usize, hi: usize) -> f64 {
        let order = self.sorted_order();
        neumaier_sum(order[lo..hi].iter().map(|&u| self.responses[u as usize]))
            / (hi - lo) as f64
    }
}

/// Samples a categorical training set of size n at generation
/// resolution r_max.
///
/// Draw order per unit: the r_max covariates left to right, the hidden
/// tail covariate, then the unit's noise. This order is part of the
/// reproducibility contract.
pub fn sample_training(
    spec: &TreeModelSpec,
    n: usize,
    r_max: usize,
    seed: u64,
) -> Result<CategoricalTrainingSet> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    if r_max == 0 {
        return Err(Error::Config("r_max must be >= 1".into()));
    }
    let m = spec.m as f64;
    let betas: Vec<f64> = (1..=r_max).map(|k| spec.beta(k)).collect();
    // Hidden tail covariate carrying the variance beyond r_max.
    let beta_tail = m / (m - 1.0).sqrt() * spec.profile.eval(r_max).sqrt();
    let noise_sd = spec.tau2.sqrt();
    let mut rng = seed::direct_rng(seed);
    let mut covariates = vec![0u32; n * r_max];
    let mut responses = vec![0.0; n];
    let m_u32 = spec.m as u32;
    for i in 0..n {
        let mut y = spec.beta0;
        for k in 1..=r_max {
            let x: u32 = rng.random_range(1..=m_u32);
            covariates[i * r_max + k - 1] = x;
            let ind = if x == 1 { 1.0 } else { 0.0 };
            y += betas[k - 1] * (ind - 1.0 / m);
        }
        let tail: u32 = rng.random_range(1..=m_u32);
        let ind = if tail == 1 { 1.0 } else { 0.0 };
        y += beta_tail * (ind - 1.0 / m);
        let eta: f64 = rng.sample(StandardNormal);
        responses[i] = y + noise_sd * eta;
    }
    Ok(CategoricalTrainingSet {
        n,
        r_max,
        covariates,
        responses,
        seed: Some(seed),
        order: OnceLock::new(),
    })
}

/// Highest-resolution imputation: the mean response of training units
/// matching the target prefix at the deepest nonempty depth <= r.
pub fn predict_impute(t: &CategoricalTrainingSet, r: usize, x_prefix: &[u32]) -> Result<f64> {
    if x_prefix.len() < r {
        return Err(Error::Config(format!(
            "x_prefix has length {}, needs at least r = {r}",
            x_prefix.len()
        )));
    }
    if r > t.r_max {
        return Err(Error::Config(format!(
            "r={r} exceeds the generated resolution r_max={}",
            t.r_max
        )));
    }
    let (mut lo, mut hi) = (0usize, t.n);
    for depth in 1..=r {
        let (lo2, hi2) = t.narrow(lo, hi, depth, x_prefix[depth - 1]);
        if lo2 == hi2 {
            break;
        }
        (lo, hi) = (lo2, hi2);
    }
    Ok(t.range_mean(lo, hi))
}

/// E[1/(Z + 1)] for Z ~ Binomial(n, M^{-k}), in closed form:
/// M^k/(n+1) * (1 - (1 - M^{-k})^{n+1}).
pub fn mean_inv_count_plus_one(n: usize, m: usize, k: usize) -> f64 {
    let p = (-(k as f64) * (m as f64).ln()).exp();
    let nf = n as f64;
    // 1 - (1-p)^(n+1), written to survive tiny p.
    let one_minus = -(((nf + 1.0) * (-p).ln_1p()).exp_m1());
    one_minus / ((nf + 1.0) * p)
}

/// The three per-depth binomial sums S1, S2, S3.
///
/// The z loop is restricted to a 45-sigma window around the binomial
/// mean: the excluded tail mass is below exp(-500), far under every
/// tolerance in use, and the window keeps large-n evaluation cheap.
fn chain_sums(n: usize, m: usize, k: usize) -> (f64, f64, f64) {
    let p = (-(k as f64) * (m as f64).ln()).exp();
    let ln_q = (-1.0 / m as f64).ln_1p();
    let mean = n as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    let z_lo = ((mean - 45.0 * sd).floor().max(1.0)) as usize;
    let z_hi = ((mean + 45.0 * sd).ceil() as usize + 10).min(n);
    let mut t1 = Vec::with_capacity(z_hi + 1 - z_lo);
    let mut t2 = Vec::with_capacity(z_hi + 1 - z_lo);
    let mut t3 = Vec::with_capacity(z_hi + 1 - z_lo);
    for z in z_lo..=z_hi {
        let lp = binomial_ln_pmf(n as u64, z as u64, p);
        let pmf = lp.exp();
        let pmf_q = (lp + z as f64 * ln_q).exp();
        t1.push(pmf / z as f64);
        t2.push(pmf_q / z as f64);
        t3.push(pmf_q);
    }
    (neumaier_sum(t1), neumaier_sum(t2), neumaier_sum(t3))
}

/// Expected estimation errors eps(r, n) for every r in 0..=r_hi,
/// sharing one pass of binomial chain sums.
pub fn exact_eps_curve(spec: &TreeModelSpec, n: usize, r_hi: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let a: Vec<f64> = (0..=r_hi).map(|k| spec.profile.eval(k)).collect();
    let sums: Vec<(f64, f64, f64)> = (0..=r_hi).map(|k| chain_sums(n, spec.m, k)).collect();
    // Conditioning weights on the increment delta_{k+1} at a stopped
    // match: the matched units' next coordinate avoids the target's.
    let mf = spec.m as f64;
    let w_bias = mf * mf / ((mf - 1.0) * (mf - 1.0));
    let w_var = mf * (mf - 2.0) / ((mf - 1.0) * (mf - 1.0));
    let mut out = Vec::with_capacity(r_hi + 1);
    for r in 0..=r_hi {
        let mut terms = Vec::with_capacity(2 * r + 1);
        for k in 0..r {
            let delta = (a[k] - a[k + 1]).max(0.0);
            terms.push((a[k + 1] + spec.tau2 + delta * w_var) * sums[k].1);
            terms.push((a[k + 1] - a[r] + delta * w_bias) * sums[k].2);
        }
        terms.push((a[r] + spec.tau2) * sums[r].0);
        out.push(neumaier_sum(terms));
    }
    Ok(out)
}

/// Expected estimation error eps(r, n) of highest-resolution
/// imputation, computed exactly from the binomial matching chain.
pub fn exact_eps(spec: &TreeModelSpec, n: usize, r: usize) -> Result<f64> {
    Ok(exact_eps_curve(spec, n, r)?[r])
}

/// Upper bound (2M/n) sum_{k=0}^r M^k A(k) on the estimation error in
/// the deterministic world. Warns when tau^2 > 0 because the bound is
/// derived for, and independent of, tau^2 = 0.
pub fn eps_upper_bound(spec: &TreeModelSpec, n: usize, r: usize) -> Result<f64> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    if spec.tau2 > 0.0 {
        eprintln!(
            "warning: the estimation-error upper bound assumes tau2 = 0; ignoring tau2 = {}",
            spec.tau2
        );
    }
    let ln_m = (spec.m as f64).ln();
    let terms = (0..=r).map(|k| {
        let a = spec.profile.eval(k);
        if a > 0.0 {
            (k as f64 * ln_m + a.ln()).exp()
        } else {
            0.0
        }
    });
    Ok(2.0 * spec.m as f64 / n as f64 * neumaier_sum(terms))
}

/// Monte Carlo estimate of eps(r, n): fresh training set and fresh
/// target per replication, literal imputation predictor.
pub fn mc_eps(spec: &TreeModelSpec, n: usize, r: usize, reps: usize, seed: u64) -> Result<f64> {
    spec.validate()?;
    if reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    use rayon::prelude::*;
    let sq_errors: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let t_seed = seed::child_seed(seed, 2 * rep as u64);
            let t = sample_training(spec, n, r, t_seed)?;
            let mut rng = seed::replication_rng(seed, 2 * rep as u64 + 1);
            let prefix: Vec<u32> =
                (0..r).map(|_| rng.random_range(1..=spec.m as u32)).collect();
            let truth = spec.conditional_mean(&prefix);
            let pred = predict_impute(&t, r, &prefix)?;
            Ok((pred - truth) * (pred - truth))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(neumaier_sum(sq_errors.iter().copied()) / reps as f64)
}

/// Exact estimation error of one training set: the expectation of the
/// squared prediction error over a fresh uniform target, by
/// enumerating deepest-match events down the sorted prefix tree.
pub fn estimation_error(t: &CategoricalTrainingSet, spec: &TreeModelSpec, r: usize) -> Result<f64> {
    spec.validate()?;
    if r > t.r_max {
        return Err(Error::Config(format!(
            "r={r} exceeds the generated resolution r_max={}",
            t.r_max
        )));
    }
    let a: Vec<f64> = (0..=r).map(|k| spec.profile.eval(k)).collect();
    let betas: Vec<f64> = (0..=r).map(|k| spec.beta(k)).collect();
    let m = spec.m as f64;
    let mut contributions = Vec::new();
    // Stack of (depth k, lo, hi, conditional mean through depth k).
    let mut stack = vec![(0usize, 0usize, t.n, spec.beta0)];
    while let Some((k, lo, hi, cmean)) = stack.pop() {
        let theta = t.range_mean(lo, hi);
        if k == r {
            // Target matches an observed depth-r prefix exactly.
            let d = theta - cmean;
            contributions.push((1.0 / m).powi(r as i32) * d * d);
            continue;
        }
        // Children of this prefix, as runs of equal values at depth k+1.
        let mut observed = 0usize;
        let mut one_observed = false;
        let mut cursor = lo;
        while cursor < hi {
            let v = t.x(t.sorted_order()[cursor] as usize, k + 1);
            let (lo2, hi2) = t.narrow(cursor, hi, k + 1, v);
            debug_assert_eq!(lo2, cursor);
            observed += 1;
            one_observed |= v == 1;
            let ind = if v == 1 { 1.0 } else { 0.0 };
            stack.push((k + 1, lo2, hi2, cmean + betas[k + 1] * (ind - 1.0 / m)));
            cursor = hi2;
        }
        let absent = spec.m - observed;
        if absent > 0 {
            // Deepest match stops here: the target's next value is one
            // of the absent categories (each equally likely), deeper
            // values are free.
            let q1 = if one_observed { 0.0 } else { 1.0 / absent as f64 };
            let tmean = betas[k + 1] * (q1 - 1.0 / m);
            let tvar = betas[k + 1] * betas[k + 1] * q1 * (1.0 - q1);
            let freevar = a[k + 1] - a[r];
            let d = theta - cmean - tmean;
            let prob = (1.0 / m).powi(k as i32) * absent as f64 / m;
            contributions.push(prob * (d * d + tvar + freevar));
        }
    }
    Ok(neumaier_sum(contributions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileKind;

    fn spec(kind: ProfileKind, m: usize, tau2: f64) -> TreeModelSpec {
        TreeModelSpec { m, profile: BiasProfile::unit(kind).unwrap(), tau2, beta0: 0.0 }
    }

    #[test]
    fn single_binary_covariate_gives_two_response_values() {
        let s = spec(ProfileKind::HardThreshold { r0: 1 }, 2, 0.0);
        let t = sample_training(&s, 40, 1, 5).unwrap();
        // beta_1 = 2, tail beta is 0, so Y = beta_0 +/- beta_1 / 2.
        for i in 0..t.n {
            let expect = if t.x(i, 1) == 1 { 1.0 } else { -1.0 };
            assert!((t.responses[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = spec(ProfileKind::Exponential { xi: 1.0 }, 3, 0.5);
        let a = sample_training(&s, 15, 4, 123).unwrap();
        let b = sample_training(&s, 15, 4, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn depth_zero_prediction_is_the_global_mean() {
        let s = spec(ProfileKind::Polynomial { xi: 1.0 }, 2, 0.2);
        let t = sample_training(&s, 17, 3, 9).unwrap();
        let got = predict_impute(&t, 0, &[]).unwrap();
        assert!((got - crate::numeric::mean(&t.responses)).abs() < 1e-13);
    }

    #[test]
    fn unique_deep_match_returns_that_unit() {
        // Hand-built n = 4, M = 2 set: unit 3 is the only (2, 2) row.
        let cov = vec![1, 1, 1, 2, 2, 1, 2, 2];
        let t = CategoricalTrainingSet::from_parts(4, 2, 2, cov, vec![1.0, 2.0, 3.0, 8.0]).unwrap();
        assert_eq!(predict_impute(&t, 2, &[2, 2]).unwrap(), 8.0);
        // Target (1, 2) matches at depth 2 exactly by unit 1.
        assert_eq!(predict_impute(&t, 2, &[1, 2]).unwrap(), 2.0);
    }

    #[test]
    fn fallback_uses_deepest_nonempty_depth() {
        // No unit starts with 2 at depth 1 except units 2 and 3; the
        // prefix (2, 1) matches at depth 1 only -> mean of those two.
        let cov = vec![1, 1, 1, 2, 2, 2, 2, 2];
        let t = CategoricalTrainingSet::from_parts(4, 2, 2, cov, vec![1.0, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(predict_impute(&t, 2, &[2, 1]).unwrap(), 5.0);
        // A prefix absent even at depth 1 would fall back to the global
        // mean, which only happens when M > observed values; here both
        // depth-1 values occur, so any prefix matches at depth >= 1.
    }

    #[test]
    fn closed_form_inverse_count_matches_pmf_sum() {
        let (n, m, k) = (4usize, 2usize, 1usize);
        let direct: f64 = (0..=n)
            .map(|z| binomial_ln_pmf(n as u64, z as u64, 0.5).exp() / (z as f64 + 1.0))
            .sum();
        assert!((direct - 0.3875).abs() < 1e-12);
        assert!((mean_inv_count_plus_one(n, m, k) - 0.3875).abs() < 1e-12);
        // k = 0 degenerates to 1/(n+1).
        assert!((mean_inv_count_plus_one(9, 3, 0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn upper_bound_hand_value() {
        let s = spec(ProfileKind::HardThreshold { r0: 2 }, 2, 0.0);
        let got = eps_upper_bound(&s, 100, 5).unwrap();
        assert!((got - 0.12).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn exact_eps_at_depth_zero_is_variance_over_n() {
        let s = spec(ProfileKind::Exponential { xi: 1.0 }, 2, 0.5);
        let got = exact_eps(&s, 12, 0).unwrap();
        assert!((got - 1.5 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn stop_depth_weighted_inverse_counts_match_the_joint_chain_law() {
        // S1 and S2 summarize the matching chain marginally; the sum
        // (A(r)+tau2) S1(r) + sum_{k<r} (A(k)+tau2) S2(k) must equal
        // E[(A(K^r)+tau2)/Z_{K^r}] under the joint law of the chain,
        // where K is the last depth with a nonempty match. Walk the
        // chain with exact binomial transitions and compare.
        let cases = [
            (spec(ProfileKind::Exponential { xi: 0.7 }, 3, 0.4), 9usize, 4usize),
            (spec(ProfileKind::HardThreshold { r0: 2 }, 2, 0.25), 12, 5),
        ];
        for (s, n, r_hi) in cases {
            let mut choose = vec![vec![0.0f64; n + 1]; n + 1];
            for z in 0..=n {
                choose[z][0] = 1.0;
                for w in 1..=z {
                    choose[z][w] = choose[z - 1][w - 1] + choose[z - 1][w];
                }
            }
            let mf = s.m as f64;
            let (p_child, q) = (1.0 / mf, 1.0 - 1.0 / mf);
            let a = |k: usize| s.profile.eval(k);
            for r in 0..=r_hi {
                let marginal: f64 = (0..r)
                    .map(|k| (a(k) + s.tau2) * chain_sums(n, s.m, k).1)
                    .sum::<f64>()
                    + (a(r) + s.tau2) * chain_sums(n, s.m, r).0;
                // Joint route: distribution of Z_k restricted to the
                // no-stop-yet paths, stop mass collected along the way.
                let mut dist = vec![0.0f64; n + 1];
                dist[n] = 1.0;
                let mut joint = 0.0;
                for k in 0..r {
                    let mut next = vec![0.0f64; n + 1];
                    for z in 1..=n {
                        if dist[z] == 0.0 {
                            continue;
                        }
                        joint += dist[z] * q.powi(z as i32) * (a(k) + s.tau2) / z as f64;
                        for w in 1..=z {
                            next[w] += dist[z]
                                * choose[z][w]
                                * p_child.powi(w as i32)
                                * q.powi((z - w) as i32);
                        }
                    }
                    dist = next;
                }
                for z in 1..=n {
                    joint += dist[z] * (a(r) + s.tau2) / z as f64;
                }
                assert!(
                    (marginal - joint).abs() <= 1e-10 * marginal.abs().max(1e-300),
                    "m={}, n={n}, r={r}: {marginal} vs {joint}",
                    s.m
                );
            }
        }
    }

    #[test]
    fn estimation_error_events_cover_all_targets() {
        // Total event probability must be 1; verify through a profile
        // where every event weight is the bare probability: A == 0
        // everywhere and unit responses shifted by 1 make each event
        // contribute prob * (theta - 0)^2 with theta = 1.
        let s = TreeModelSpec {
            m: 3,
            profile: BiasProfile::unit(ProfileKind::Tabulated { values: vec![0.0] }).unwrap(),
            tau2: 0.0,
            beta0: 1.0,
        };
        let mut t = sample_training(&s, 7, 3, 77).unwrap();
        // With A == 0 and tau2 = 0 all responses equal beta0 = 1;
        // recenter the model's beta0 to 0 so theta - cmean = 1 exactly.
        let probe = TreeModelSpec { beta0: 0.0, ..s.clone() };
        t.seed = None;
        let total = estimation_error(&t, &probe, 3).unwrap();
        assert!((total - 1.0).abs() < 1e-12, "event mass {total}");
    }
}
