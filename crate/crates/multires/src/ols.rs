//! Progressive least squares over nested designs.
//!
//! Selection needs the fit at every resolution r = 0..=r_hi of one
//! training set. Independent solves would cost O(n r^3); this module
//! instead runs a single Householder QR over the widest design and
//! snapshots per-resolution quantities as each column is processed:
//!
//! - after column r, the trailing coordinates of Q^T y span the
//!   residual space, so RSS(r) = sum_{i > r} (Q^T y)_i^2;
//! - the hat diagonal grows by one orthonormal direction per column,
//!   h_i(r) = h_i(r-1) + q_r[i]^2, and the residual vector shrinks by
//!   e(r) = e(r-1) - q_r (Q^T y)_r, where q_r is column r of thin Q;
//! - coefficients at any r come from back-solving the leading block
//!   of R against the head of Q^T y.
//!
//! An orthogonal decomposition is used instead of the normal equations
//! because resolutions approach n - 3 where X^T X is badly
//! conditioned. The hat diagonal feeds the closed-form leave-one-out
//! identity CV_n(r) = (1/n) sum_i (e_i / (1 - h_ii))^2, which must
//! agree with literally refitting n times; leverages within 1e-10 of 1
//! are rejected as degenerate rather than divided by.

use crate::error::{Error, Result};
use crate::linear::TrainingSet;
use crate::numeric::neumaier_sum;

const LEVERAGE_TOL: f64 = 1e-10;

/// One QR pass over a training set, queryable at every resolution up
/// to the requested maximum.
pub struct LinearFit {
    n: usize,
    r_hi: usize,
    /// Column-major n x (r_hi + 1): Householder vectors on and below
    /// the diagonal, the strict upper triangle of R above it.
    work: Vec<f64>,
    /// Diagonal of R.
    diag: Vec<f64>,
    /// Q^T y.
    qty: Vec<f64>,
    rss: Vec<f64>,
    cv: Vec<f64>,
    /// First resolution with a leave-one-out degeneracy, with the
    /// offending unit and its leverage. All later resolutions are
    /// degenerate too since leverages only grow.
    cv_bad: Option<(usize, usize, f64)>,
}

fn norm2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl LinearFit {
    /// Factorizes the first r_hi + 1 columns of the design.
    pub fn new(t: &TrainingSet, r_hi: usize) -> Result<Self> {
        let n = t.n;
        if r_hi > t.r_max {
            return Err(Error::Config(format!(
                "r={r_hi} exceeds the generated resolution r_max={}",
                t.r_max
            )));
        }
        if r_hi + 1 > n {
            return Err(Error::Domain(format!(
                "empirical risk minimizer not unique: r + 1 = {} exceeds n = {n}",
                r_hi + 1
            )));
        }
        let cols = r_hi + 1;
        let mut work = vec![0.0; n * cols];
        for j in 0..cols {
            for i in 0..n {
                work[j * n + i] = t.x(i, j);
            }
        }
        let mut qty = t.responses.clone();
        let mut diag = vec![0.0; cols];
        let mut hbeta = vec![0.0; cols];
        let mut rss = vec![0.0; cols];
        let mut cv = vec![0.0; cols];
        let mut lev = vec![0.0; n];
        let mut res = t.responses.clone();
        let mut cv_bad: Option<(usize, usize, f64)> = None;
        let mut q = vec![0.0; n];

        for j in 0..cols {
            let (head, tail) = work.split_at_mut((j + 1) * n);
            let col = &mut head[j * n..];
            let norm = norm2(&col[j..]);
            // Orthogonal steps preserve the full column norm, so a
            // below-diagonal part that collapsed relative to it means
            // the column lies in the span of its predecessors.
            if norm <= 64.0 * f64::EPSILON * norm2(col) {
                return Err(Error::Domain(format!(
                    "empirical risk minimizer not unique: design column {j} is linearly dependent"
                )));
            }
            // Reflect x onto alpha e_j with the stable sign choice.
            let alpha = if col[j] > 0.0 { -norm } else { norm };
            col[j] -= alpha;
            diag[j] = alpha;
            let vsq: f64 = col[j..].iter().map(|v| v * v).sum();
            let beta = 2.0 / vsq;
            hbeta[j] = beta;
            for k in 0..cols - j - 1 {
                let colk = &mut tail[k * n..(k + 1) * n];
                let s: f64 = col[j..].iter().zip(&colk[j..]).map(|(v, x)| v * x).sum();
                let bs = beta * s;
                for (v, x) in col[j..].iter().zip(colk[j..].iter_mut()) {
                    *x -= bs * v;
                }
            }
            let s: f64 = col[j..].iter().zip(&qty[j..]).map(|(v, y)| v * y).sum();
            let bs = beta * s;
            for (v, y) in col[j..].iter().zip(qty[j..].iter_mut()) {
                *y -= bs * v;
            }

            // q_j = H_0 ... H_j e_j, applied in reverse order.
            q.fill(0.0);
            q[j] = 1.0;
            for tt in (0..=j).rev() {
                let v = &work[tt * n + tt..(tt + 1) * n];
                let s: f64 = v.iter().zip(&q[tt..]).map(|(v, x)| v * x).sum();
                let bs = hbeta[tt] * s;
                for (v, x) in v.iter().zip(q[tt..].iter_mut()) {
                    *x -= bs * v;
                }
            }
            for i in 0..n {
                lev[i] += q[i] * q[i];
                res[i] -= q[i] * qty[j];
            }

            rss[j] = neumaier_sum(qty[j + 1..].iter().map(|y| y * y));
            if cv_bad.is_none() {
                let (imax, hmax) = lev
                    .iter()
                    .copied()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("n >= 1");
                if hmax >= 1.0 - LEVERAGE_TOL {
                    cv_bad = Some((j, imax, hmax));
                } else {
                    cv[j] = neumaier_sum(
                        res.iter().zip(&lev).map(|(e, h)| (e / (1.0 - h)) * (e / (1.0 - h))),
                    ) / n as f64;
                }
            }
        }

        Ok(LinearFit { n, r_hi, work, diag, qty, rss, cv, cv_bad })
    }

    /// Highest resolution the factorization covers.
    pub fn r_hi(&self) -> usize {
        self.r_hi
    }

    fn check_r(&self, r: usize) -> Result<()> {
        if r > self.r_hi {
            return Err(Error::Config(format!(
                "r={r} exceeds the factorized resolution {}",
                self.r_hi
            )));
        }
        Ok(())
    }

    /// Least-squares coefficients (theta_0, ..., theta_r).
    pub fn coefficients(&self, r: usize) -> Result<Vec<f64>> {
        self.check_r(r)?;
        let n = self.n;
        let mut theta = vec![0.0; r + 1];
        for t in (0..=r).rev() {
            let mut s = self.qty[t];
            for u in t + 1..=r {
                s -= self.work[u * n + t] * theta[u];
            }
            theta[t] = s / self.diag[t];
        }
        Ok(theta)
    }

    /// Residual sum of squares at resolution r.
    pub fn rss(&self, r: usize) -> Result<f64> {
        self.check_r(r)?;
        Ok(self.rss[r])
    }

    /// Mean squared residual sigma_hat^2_r = RSS / n.
    pub fn sigma_hat2(&self, r: usize) -> Result<f64> {
        self.check_r(r)?;
        Ok(self.rss[r] / self.n as f64)
    }

    /// Leave-one-out cross-validation error via the leverage identity.
    pub fn cv_error(&self, r: usize) -> Result<f64> {
        self.check_r(r)?;
        if let Some((r0, i, h)) = self.cv_bad {
            if r >= r0 {
                return Err(Error::Domain(format!(
                    "degenerate leave-one-out fit: leverage {h} at unit {i} from r={r0}"
                )));
            }
        }
        Ok(self.cv[r])
    }

    /// Unbiased prediction-error estimate
    /// UE_n(r) = sigma_hat^2_r (n - 2)(n + 1) / ((n - r - 2)(n - r - 1)).
    pub fn ue_error(&self, r: usize) -> Result<f64> {
        self.check_r(r)?;
        let n = self.n;
        if n < 3 || r > n - 3 {
            return Err(Error::Domain(format!(
                "unbiased estimator undefined: requires r <= n - 3, got r={r}, n={n}"
            )));
        }
        let (nf, rf) = (n as f64, r as f64);
        Ok(self.rss[r] / nf * (nf - 2.0) * (nf + 1.0) / ((nf - rf - 2.0) * (nf - rf - 1.0)))
    }

    /// Information-criterion estimate IC_n(r) = sigma_hat^2_r (n + 2(r+1)) / n.
    pub fn ic_error(&self, r: usize) -> Result<f64> {
        self.check_r(r)?;
        let nf = self.n as f64;
        Ok(self.rss[r] / nf * (nf + 2.0 * (r as f64 + 1.0)) / nf)
    }
}

/// Least-squares coefficients for the first r + 1 covariates.
pub fn ols_fit(t: &TrainingSet, r: usize) -> Result<Vec<f64>> {
    LinearFit::new(t, r)?.coefficients(r)
}

/// Leave-one-out cross-validation error at resolution r.
pub fn cv_error(t: &TrainingSet, r: usize) -> Result<f64> {
    LinearFit::new(t, r)?.cv_error(r)
}

/// Unbiased prediction-error estimate at resolution r.
pub fn ue_error(t: &TrainingSet, r: usize) -> Result<f64> {
    LinearFit::new(t, r)?.ue_error(r)
}

/// Information-criterion estimate at resolution r.
pub fn ic_error(t: &TrainingSet, r: usize) -> Result<f64> {
    LinearFit::new(t, r)?.ic_error(r)
}

/// Mean squared residual at resolution r.
pub fn sigma_hat2(t: &TrainingSet, r: usize) -> Result<f64> {
    LinearFit::new(t, r)?.sigma_hat2(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{sample_training, LinearModelSpec, TrainingSet};
    use crate::numeric::mean;
    use crate::profile::{BiasProfile, ProfileKind};

    fn tiny_set(ys: &[f64], xs: &[f64]) -> TrainingSet {
        let n = ys.len();
        let mut cov = Vec::with_capacity(n * 2);
        for &x in xs {
            cov.push(1.0);
            cov.push(x);
        }
        TrainingSet::from_parts(n, 1, cov, ys.to_vec()).unwrap()
    }

    #[test]
    fn intercept_only_fit_is_the_mean() {
        let t = tiny_set(&[1.0, 2.0, 6.0, 3.0], &[0.3, -0.2, 1.0, 2.0]);
        let theta = ols_fit(&t, 0).unwrap();
        assert!((theta[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_parameter_fit_matches_hand_solution() {
        // Normal equations for (1, x) on four points, solved by hand:
        // sums: Sx, Sy, Sxx, Sxy; slope = (n Sxy - Sx Sy)/(n Sxx - Sx^2).
        let ys = [1.0, 2.0, 2.0, 4.0];
        let xs = [0.0, 1.0, 2.0, 3.0];
        let t = tiny_set(&ys, &xs);
        let (sx, sy) = (6.0, 9.0);
        let (sxx, sxy) = (14.0, 18.0);
        let slope = (4.0 * sxy - sx * sy) / (4.0 * sxx - sx * sx);
        let icept = (sy - slope * sx) / 4.0;
        let theta = ols_fit(&t, 1).unwrap();
        assert!((theta[0] - icept).abs() < 1e-12, "{theta:?}");
        assert!((theta[1] - slope).abs() < 1e-12, "{theta:?}");
    }

    #[test]
    fn noiseless_threshold_model_interpolates() {
        let spec = LinearModelSpec {
            profile: BiasProfile::unit(ProfileKind::HardThreshold { r0: 3 }).unwrap(),
            tau2: 0.0,
            beta0: 0.5,
        };
        let t = sample_training(&spec, 25, 6, 11).unwrap();
        for r in 3..=6 {
            let rss = LinearFit::new(&t, r).unwrap().rss(r).unwrap();
            assert!(rss < 1e-10, "r={r} rss={rss}");
        }
    }

    #[test]
    fn intercept_only_cv_has_closed_form() {
        let t = tiny_set(&[1.0, 5.0, 2.0, 0.0], &[0.0, 1.0, 2.0, 3.0]);
        let n = 4.0;
        let ybar = mean(&t.responses);
        let expected =
            t.responses.iter().map(|y| ((y - ybar) * n / (n - 1.0)).powi(2)).sum::<f64>() / n;
        let got = cv_error(&t, 0).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn interpolating_fit_has_zero_residual_and_degenerate_cv() {
        // n = r + 1 interpolates: sigma_hat^2 = 0 and every leverage is 1.
        let t = tiny_set(&[1.0, -2.0], &[0.0, 1.0]);
        assert!(sigma_hat2(&t, 1).unwrap() < 1e-24);
        let err = cv_error(&t, 1).unwrap_err();
        assert!(err.to_string().contains("degenerate leave-one-out fit"), "{err}");
    }

    #[test]
    fn ue_penalty_factor_at_the_boundary() {
        let spec = LinearModelSpec {
            profile: BiasProfile::unit(ProfileKind::Exponential { xi: 1.0 }).unwrap(),
            tau2: 0.5,
            beta0: 0.0,
        };
        let t = sample_training(&spec, 50, 47, 3).unwrap();
        let fit = LinearFit::new(&t, 47).unwrap();
        let s2 = fit.sigma_hat2(47).unwrap();
        let ue = fit.ue_error(47).unwrap();
        assert!((ue - s2 * 1224.0).abs() < 1e-9 * ue.abs().max(1.0), "ue={ue} s2={s2}");
    }

    #[test]
    fn population_variance_at_r0_on_fixed_points() {
        let t = tiny_set(&[1.0, 2.0, 3.0, 4.0, 10.0], &[0.0; 5]);
        // Divisor n, not n - 1.
        let ybar = 4.0;
        let expected = t.responses.iter().map(|y| (y - ybar) * (y - ybar)).sum::<f64>() / 5.0;
        assert!((sigma_hat2(&t, 0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn overparameterized_fit_is_rejected() {
        let t = tiny_set(&[1.0, 2.0], &[0.5, 1.5]);
        let err = LinearFit::new(&t, 2);
        assert!(err.is_err());
        let t2 = tiny_set(&[1.0], &[0.5]);
        let err = ols_fit(&t2, 1).unwrap_err();
        assert!(err.to_string().contains("empirical risk minimizer not unique"), "{err}");
    }

    #[test]
    fn rank_deficient_column_is_rejected() {
        // Second covariate identical to the intercept column.
        let t = TrainingSet::from_parts(
            3,
            1,
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let err = ols_fit(&t, 1).unwrap_err();
        assert!(err.to_string().contains("not unique"), "{err}");
    }
}
