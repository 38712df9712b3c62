//! Covariate-ordering probes: how much a misordered analyst loses.
//!
//! The oracle adds covariates in decreasing importance, giving bias
//! A(r) = sum_{j>r} delta_j^2 with delta_j^2 = A(j-1) - A(j). A second
//! analyst uses a permuted ordering; at resolution r they hold
//! g(r) = r - M_r of the true top-r covariates plus M_r stand-ins from
//! far down the importance order, so their bias is
//! A'(r) = sum over indices outside their chosen prefix. The probe
//! builds permutations realizing prescribed mistake counts M_r,
//! computes A and A' exactly from increment sums, and tracks the
//! penalty ratio A'(R_n)/A(R_n) at the rate-optimal resolutions.
//!
//! Both A and A' are plain (uncompensated) descending-index sums of
//! nonnegative increments over a finite universe plus a shared tail.
//! Round-to-nearest is monotone, so a subset's plain descending sum
//! never exceeds its superset's: the inequality A'(r) <= A(r - M_r)
//! then holds exactly in floating point, not merely up to rounding.
//! Compensated summation would break that exactness, which is why it
//! is deliberately not used here.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::BiasProfile;
use crate::rates::{self, ErrorModel};

/// Families of misorderings, specified by how many of the true top-r
/// covariates the analyst holds at each r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PermSpec {
    /// The oracle ordering itself.
    Identity,
    /// The c most recent important covariates are always missing:
    /// M_r = min(r, c).
    ConstantDelay { c: usize },
    /// A fixed fraction of the prefix is wrong: M_r = floor(gamma r).
    FractionDelay { gamma: f64 },
    /// Only r^(1/a) of the prefix is right: M_r = r - ceil(r^(1/a)).
    LogGap { a: f64 },
}

impl PermSpec {
    /// Validates the family parameters.
    pub fn validate(&self) -> Result<()> {
        match *self {
            PermSpec::Identity | PermSpec::ConstantDelay { .. } => Ok(()),
            PermSpec::FractionDelay { gamma } => {
                if !(gamma.is_finite() && (0.0..1.0).contains(&gamma)) {
                    return Err(Error::Config(format!(
                        "fraction-delay needs gamma in [0, 1), got {gamma}"
                    )));
                }
                Ok(())
            }
            PermSpec::LogGap { a } => {
                if !(a.is_finite() && a > 1.0) {
                    return Err(Error::Config(format!("log-gap needs a > 1, got {a}")));
                }
                Ok(())
            }
        }
    }

    /// Raw count of true top-i covariates inside the analyst's first i.
    fn originals_raw(&self, i: usize) -> usize {
        match *self {
            PermSpec::Identity => i,
            PermSpec::ConstantDelay { c } => i.saturating_sub(c),
            PermSpec::FractionDelay { gamma } => snap_ceil((1.0 - gamma) * i as f64),
            PermSpec::LogGap { a } => snap_ceil((i as f64).powf(1.0 / a)),
        }
    }
}

/// Ceiling that forgives float noise on exact integers, so perfect
/// powers and exact fractions land where the formula intends.
fn snap_ceil(v: f64) -> usize {
    let nearest = v.round();
    if (v - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        v.ceil() as usize
    }
}

/// One per-resolution row of the ordering table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingRow {
    pub r: usize,
    pub m_r: usize,
    pub a_r: f64,
    pub a_prime_r: f64,
}

/// Penalty ratio at one rate-optimal resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingRatio {
    pub n: u64,
    pub r_n: usize,
    pub ratio: f64,
}

/// Full ordering-probe outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub perm: PermSpec,
    pub profile: BiasProfile,
    pub error: ErrorModel,
    pub rows: Vec<OrderingRow>,
    pub ratios: Vec<OrderingRatio>,
}

/// Plain descending-index sum of increments over (from, j_max], plus
/// the closed-form tail beyond j_max. This exact summation order is
/// shared by every bias quantity in this module.
pub fn tail_increment_sum(profile: &BiasProfile, from: usize, j_max: usize) -> f64 {
    let mut sum = profile.eval(j_max);
    let mut j = j_max;
    while j > from {
        sum += profile.increment(j);
        j -= 1;
    }
    sum
}

/// Runs the ordering probe: exact A and A' per resolution, mistake
/// counts, and the bias ratio at each grid point's optimal resolution.
pub fn ordering_experiment(
    profile: &BiasProfile,
    perm: &PermSpec,
    n_grid: &[u64],
    error: &ErrorModel,
) -> Result<OrderingReport> {
    profile.validate()?;
    perm.validate()?;
    let optima = rates::optima(profile, error, n_grid)?;
    let r_hi = optima.iter().map(|p| p.r_n).max().unwrap_or(0).max(1);
    // Finite index universe: large enough that the junk pool beyond
    // g(j_max) can absorb every stand-in the prefixes ever need.
    let j_max = 2 * r_hi + 64;
    // Monotone prefix-hit counts, clamped to single steps so they
    // always describe a realizable permutation.
    let mut g = vec![0usize; j_max + 1];
    for i in 1..=j_max {
        g[i] = perm.originals_raw(i).clamp(g[i - 1], (g[i - 1] + 1).min(i));
    }
    let pool_start = g[j_max];
    let increments: Vec<f64> = (0..=j_max)
        .map(|j| if j == 0 { 0.0 } else { profile.increment(j) })
        .collect();
    let tail = profile.eval(j_max);
    let rows: Vec<OrderingRow> = (0..=r_hi)
        .into_par_iter()
        .map(|r| {
            let junk_used = r - g[r];
            debug_assert!(pool_start + junk_used <= j_max);
            let mut a_r = tail;
            let mut a_prime = tail;
            for j in (1..=j_max).rev() {
                if j > r {
                    a_r += increments[j];
                }
                // The analyst's prefix holds the top g(r) covariates
                // plus the first junk_used indices after pool_start.
                let chosen = j <= g[r] || (j > pool_start && j <= pool_start + junk_used);
                if !chosen {
                    a_prime += increments[j];
                }
            }
            OrderingRow { r, m_r: junk_used, a_r, a_prime_r: a_prime }
        })
        .collect();
    let ratios = optima
        .iter()
        .map(|p| {
            let row = rows[p.r_n];
            if row.a_r == 0.0 {
                return Err(Error::Domain(format!(
                    "bias ratio undefined: A(R_n) = 0 at n={}, R_n={}",
                    p.n, p.r_n
                )));
            }
            Ok(OrderingRatio { n: p.n, r_n: p.r_n, ratio: row.a_prime_r / row.a_r })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderingReport {
        perm: perm.clone(),
        profile: profile.clone(),
        error: error.clone(),
        rows,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileKind;

    fn profile(kind: ProfileKind) -> BiasProfile {
        BiasProfile::unit(kind).unwrap()
    }

    fn grid() -> Vec<u64> {
        vec![100, 200, 400, 800]
    }

    #[test]
    fn identity_ordering_changes_nothing() {
        let report = ordering_experiment(
            &profile(ProfileKind::Exponential { xi: 1.0 }),
            &PermSpec::Identity,
            &grid(),
            &ErrorModel::LinearExact { tau2: 0.5 },
        )
        .unwrap();
        for row in &report.rows {
            assert_eq!(row.m_r, 0);
            assert_eq!(row.a_prime_r.to_bits(), row.a_r.to_bits());
        }
        for q in &report.ratios {
            assert_eq!(q.ratio, 1.0);
        }
    }

    #[test]
    fn mistake_counts_match_the_families() {
        let specs = [
            PermSpec::ConstantDelay { c: 2 },
            PermSpec::FractionDelay { gamma: 0.5 },
            PermSpec::LogGap { a: 2.0 },
        ];
        for perm in &specs {
            let report = ordering_experiment(
                &profile(ProfileKind::Polynomial { xi: 1.0 }),
                perm,
                &grid(),
                &ErrorModel::Poly { alpha: 1.0 },
            )
            .unwrap();
            for row in &report.rows {
                assert!(row.m_r <= row.r);
                let want = match perm {
                    PermSpec::ConstantDelay { c } => row.r.min(*c),
                    PermSpec::FractionDelay { gamma } => (gamma * row.r as f64).floor() as usize,
                    PermSpec::LogGap { a } => {
                        if row.r == 0 {
                            0
                        } else {
                            row.r - snap_ceil((row.r as f64).powf(1.0 / a))
                        }
                    }
                    PermSpec::Identity => 0,
                };
                assert_eq!(row.m_r, want, "{perm:?} at r={}", row.r);
            }
        }
    }

    #[test]
    fn misordering_inequality_holds_exactly() {
        let profiles = [
            profile(ProfileKind::Exponential { xi: 1.0 }),
            profile(ProfileKind::Polynomial { xi: 1.5 }),
        ];
        let perms = [
            PermSpec::ConstantDelay { c: 3 },
            PermSpec::FractionDelay { gamma: 0.3 },
            PermSpec::LogGap { a: 2.0 },
        ];
        for pr in &profiles {
            for perm in &perms {
                let report = ordering_experiment(
                    pr,
                    perm,
                    &grid(),
                    &ErrorModel::LinearExact { tau2: 0.5 },
                )
                .unwrap();
                let j_max = 2 * report.rows.last().unwrap().r + 64;
                for row in &report.rows {
                    // Exact float inequality, no tolerance.
                    let bound = tail_increment_sum(pr, row.r - row.m_r, j_max);
                    assert!(
                        row.a_prime_r <= bound,
                        "{perm:?} r={} a'={} bound={}",
                        row.r,
                        row.a_prime_r,
                        bound
                    );
                }
            }
        }
    }

    #[test]
    fn constant_delay_ratio_is_bounded_by_the_decay_jump() {
        let report = ordering_experiment(
            &profile(ProfileKind::Exponential { xi: 1.0 }),
            &PermSpec::ConstantDelay { c: 2 },
            &grid(),
            &ErrorModel::LinearExact { tau2: 0.5 },
        )
        .unwrap();
        // Missing the top 2 covariates costs at most A(r-2)/A(r) = e^2.
        let cap = 1.1 * 2.0_f64.exp();
        for q in &report.ratios {
            assert!(q.ratio >= 1.0);
            assert!(q.ratio <= cap, "ratio {}", q.ratio);
        }
    }

    #[test]
    fn fraction_delay_ratio_is_bounded() {
        let report = ordering_experiment(
            &profile(ProfileKind::Polynomial { xi: 1.0 }),
            &PermSpec::FractionDelay { gamma: 0.5 },
            &grid(),
            &ErrorModel::LinearZero,
        )
        .unwrap();
        for q in &report.ratios {
            assert!(q.ratio >= 1.0 && q.ratio <= 2.0 * 1.1, "ratio {}", q.ratio);
        }
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(PermSpec::FractionDelay { gamma: 1.0 }.validate().is_err());
        assert!(PermSpec::LogGap { a: 1.0 }.validate().is_err());
        assert!(PermSpec::ConstantDelay { c: 5 }.validate().is_ok());
    }
}
