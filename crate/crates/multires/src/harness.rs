//! Seeded, replicable Monte Carlo experiments.
//!
//! Every replication derives its randomness from (master_seed,
//! rep_index) alone, so results are bit-identical for any worker
//! count and any scheduling order. Replications run in parallel;
//! aggregation is a sequential reduce in rep_index order, and a failed
//! replication aborts the whole experiment rather than being skipped,
//! because silent skipping would bias the aggregate exactly where the
//! heavy tails live.
//!
//! Each replication samples a fresh training set, runs the configured
//! selection methods, and scores each method by its realized
//! prediction error tau^2 + A(chosen_r) + eps(chosen_r, T), where eps
//! is the exact estimation error of the fitted predictor on this
//! training set. Scores are standardized per replication by the exact
//! prediction error at the oracle-optimal resolution, so the Oracle
//! row has expectation 1 by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveKind, ErrorCurve};
use crate::error::{Error, Result};
use crate::linear::{self, LinearModelSpec};
use crate::numeric::{mean, neumaier_sum, quantile_nearest_rank};
use crate::ols::{self, LinearFit};
use crate::seed;
use crate::select::{self, Method};
use crate::tree::{self, TreeModelSpec};

/// Generative family of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Tree,
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub profile: crate::profile::BiasProfile,
    pub tau2: f64,
    pub n: usize,
    pub reps: usize,
    /// Inclusive resolution search range [lo, hi], shared by all
    /// methods; must respect every configured method's domain.
    pub search_range: (usize, usize),
    pub methods: Vec<Method>,
    pub master_seed: u64,
    /// Resolution the training sets are generated at.
    pub r_max_generation: usize,
    /// Categories per covariate; tree family only.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Intercept beta_0.
    #[serde(default)]
    pub beta0: f64,
}

fn default_m() -> usize {
    2
}

impl ExperimentConfig {
    /// Validates the configuration against every method's domain.
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("methods contains {m} twice")));
            }
        }
        let (lo, hi) = self.search_range;
        if lo > hi {
            return Err(Error::Config(format!("empty search range [{lo}, {hi}]")));
        }
        if hi > self.r_max_generation {
            return Err(Error::Config(format!(
                "search range reaches r={hi} but training sets are generated at r_max={}",
                self.r_max_generation
            )));
        }
        for m in &self.methods {
            let cap = m.r_cap(self.n);
            if hi > cap {
                return Err(Error::Config(format!(
                    "search range [{lo}, {hi}] exceeds the {m} domain [0, {cap}] at n={}",
                    self.n
                )));
            }
        }
        if self.family == Family::Tree {
            if self.methods.iter().any(|m| *m != Method::Oracle) {
                return Err(Error::Config(
                    "the tree family supports only the oracle method; cv, ue, and ic are \
                     least-squares criteria"
                        .into(),
                ));
            }
            if self.m < 2 {
                return Err(Error::Config(format!("m must be >= 2, got {}", self.m)));
            }
        }
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

    fn linear_spec(&self) -> LinearModelSpec {
        LinearModelSpec { profile: self.profile.clone(), tau2: self.tau2, beta0: self.beta0 }
    }

    fn tree_spec(&self) -> TreeModelSpec {
        TreeModelSpec {
            m: self.m,
            profile: self.profile.clone(),
            tau2: self.tau2,
            beta0: self.beta0,
        }
    }
}

/// One method's outcome within a replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub chosen_r: usize,
    /// Realized prediction error standardized by the oracle optimum.
    pub std_pe: f64,
}

/// Record of one replication, methods in configuration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep_index: usize,
    pub outcomes: Vec<MethodOutcome>,
}

/// The oracle-optimal resolution and its exact prediction error for
/// this configuration; the standardization denominator.
pub fn oracle_reference(config: &ExperimentConfig) -> Result<(usize, f64)> {
    let (lo, hi) = config.search_range;
    match config.family {
        Family::Linear => {
            let spec = config.linear_spec();
            let hi = hi.min(config.n.saturating_sub(3));
            if lo > hi {
                return Err(Error::Config(format!(
                    "oracle reference range [{lo}, {hi}] is empty at n={}",
                    config.n
                )));
            }
            let values: Result<Vec<f64>> =
                (lo..=hi).map(|r| linear::exact_pe(&spec, config.n, r)).collect();
            let curve = ErrorCurve::new(CurveKind::ExactPE, config.n, lo, values?)?;
            let r_opt = select::argmin_resolution(&curve, lo, hi)?;
            let pe_opt = curve.value_at(r_opt).expect("argmin lies in the curve range");
            Ok((r_opt, pe_opt))
        }
        Family::Tree => {
            let spec = config.tree_spec();
            let eps = tree::exact_eps_curve(&spec, config.n, hi)?;
            let values: Vec<f64> = (lo..=hi)
                .map(|r| config.tau2 + config.profile.eval(r) + eps[r])
                .collect();
            let curve = ErrorCurve::new(CurveKind::ExactPE, config.n, lo, values)?;
            let r_opt = select::argmin_resolution(&curve, lo, hi)?;
            let pe_opt = curve.value_at(r_opt).expect("argmin lies in the curve range");
            Ok((r_opt, pe_opt))
        }
    }
}

/// Runs one replication; all randomness derives from (master_seed,
/// rep_index).
pub fn run_replication(config: &ExperimentConfig, rep_index: usize) -> Result<RepRecord> {
    config.validate()?;
    if rep_index >= config.reps {
        return Err(Error::Config(format!(
            "rep_index {rep_index} out of range for reps={}",
            config.reps
        )));
    }
    let child = seed::child_seed(config.master_seed, rep_index as u64);
    let (_, pe_opt) = oracle_reference(config)?;
    let (lo, hi) = config.search_range;
    let outcomes = match config.family {
        Family::Linear => {
            let spec = config.linear_spec();
            let t = linear::sample_training(&spec, config.n, config.r_max_generation, child)?;
            let mut outcomes = Vec::with_capacity(config.methods.len());
            for &method in &config.methods {
                let report = select::select(method, &t, &spec, lo, hi)?;
                let coeffs = ols::ols_fit(&t, report.chosen_r)?;
                let eps = linear::estimation_error(&coeffs, &spec, report.chosen_r)?;
                let pe = config.tau2 + config.profile.eval(report.chosen_r) + eps;
                outcomes.push(MethodOutcome {
                    method,
                    chosen_r: report.chosen_r,
                    std_pe: pe / pe_opt,
                });
            }
            outcomes
        }
        Family::Tree => {
            let spec = config.tree_spec();
            let t = tree::sample_training(&spec, config.n, config.r_max_generation, child)?;
            let eps_curve = tree::exact_eps_curve(&spec, config.n, hi)?;
            let values: Vec<f64> = (lo..=hi)
                .map(|r| config.tau2 + config.profile.eval(r) + eps_curve[r])
                .collect();
            let curve = ErrorCurve::new(CurveKind::ExactPE, config.n, lo, values)?;
            let chosen_r = select::argmin_resolution(&curve, lo, hi)?;
            let eps = tree::estimation_error(&t, &spec, chosen_r)?;
            let pe = config.tau2 + config.profile.eval(chosen_r) + eps;
            vec![MethodOutcome { method: Method::Oracle, chosen_r, std_pe: pe / pe_opt }]
        }
    };
    Ok(RepRecord { rep_index, outcomes })
}

/// Runs every replication in parallel; errors surface in rep order.
pub fn run_all_replications(config: &ExperimentConfig) -> Result<Vec<RepRecord>> {
    config.validate()?;
    let results: Vec<Result<RepRecord>> =
        (0..config.reps).into_par_iter().map(|i| run_replication(config, i)).collect();
    results.into_iter().collect()
}

/// One aggregated table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub mean_r: f64,
    pub qr_lo_r: f64,
    pub qr_hi_r: f64,
    pub mean_std_pe: f64,
    pub qr_lo_std_pe: f64,
    pub qr_hi_std_pe: f64,
}

/// Aggregated experiment: one row per method plus the oracle anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub rows: Vec<TableRow>,
    pub r_opt: usize,
    pub pe_opt: f64,
    pub reps: usize,
}

/// Mean and the 95% quantile range (2.5% and 97.5% nearest-rank order
/// statistics). The mean is never clamped into the range: heavy tails
/// legitimately push it past the 97.5% quantile.
fn aggregate(values: &[f64]) -> (f64, f64, f64) {
    (
        mean(values),
        quantile_nearest_rank(values, 0.025),
        quantile_nearest_rank(values, 0.975),
    )
}

/// Runs the experiment and aggregates per-method summaries.
pub fn run_table_experiment(config: &ExperimentConfig) -> Result<TableReport> {
    let records = run_all_replications(config)?;
    let (r_opt, pe_opt) = oracle_reference(config)?;
    let mut rows = Vec::with_capacity(config.methods.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        let rs: Vec<f64> = records.iter().map(|r| r.outcomes[mi].chosen_r as f64).collect();
        let pes: Vec<f64> = records.iter().map(|r| r.outcomes[mi].std_pe).collect();
        let (mean_r, qr_lo_r, qr_hi_r) = aggregate(&rs);
        let (mean_std_pe, qr_lo_std_pe, qr_hi_std_pe) = aggregate(&pes);
        rows.push(TableRow {
            method,
            mean_r,
            qr_lo_r,
            qr_hi_r,
            mean_std_pe,
            qr_lo_std_pe,
            qr_hi_std_pe,
        });
    }
    Ok(TableReport { rows, r_opt, pe_opt, reps: config.reps })
}

/// Monte Carlo means of the CV, UE, and IC criteria per resolution,
/// alongside the exact prediction error curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasCurves {
    pub exact: ErrorCurve,
    pub cv: ErrorCurve,
    pub ue: ErrorCurve,
    pub ic: ErrorCurve,
}

/// Estimator-bias experiment: per-resolution means of each criterion
/// over fresh training sets, against the exact curve. Linear family
/// only; the range must stay within the strictest (UE) domain.
pub fn estimator_bias_curves(config: &ExperimentConfig) -> Result<BiasCurves> {
    config.validate()?;
    if config.family != Family::Linear {
        return Err(Error::Config(
            "estimator bias curves are defined for the linear family only".into(),
        ));
    }
    let (lo, hi) = config.search_range;
    let ue_cap = config.n.saturating_sub(3);
    if hi > ue_cap {
        return Err(Error::Config(format!(
            "bias curves need search range within the ue domain [0, {ue_cap}] at n={}",
            config.n
        )));
    }
    let spec = config.linear_spec();
    let width = hi - lo + 1;
    let per_rep: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..config.reps)
        .into_par_iter()
        .map(|i| {
            let child = seed::child_seed(config.master_seed, i as u64);
            let t = linear::sample_training(&spec, config.n, config.r_max_generation, child)?;
            let fit = LinearFit::new(&t, hi)?;
            let mut cv = Vec::with_capacity(width);
            let mut ue = Vec::with_capacity(width);
            let mut ic = Vec::with_capacity(width);
            for r in lo..=hi {
                cv.push(fit.cv_error(r)?);
                ue.push(fit.ue_error(r)?);
                ic.push(fit.ic_error(r)?);
            }
            Ok((cv, ue, ic))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let column_mean = |pick: fn(&(Vec<f64>, Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..width)
            .map(|j| {
                neumaier_sum(per_rep.iter().map(|rec| pick(rec)[j])) / config.reps as f64
            })
            .collect()
    };
    let exact: Result<Vec<f64>> =
        (lo..=hi).map(|r| linear::exact_pe(&spec, config.n, r)).collect();
    Ok(BiasCurves {
        exact: ErrorCurve::new(CurveKind::ExactPE, config.n, lo, exact?)?,
        cv: ErrorCurve::new(CurveKind::CV, config.n, lo, column_mean(|rec| &rec.0))?,
        ue: ErrorCurve::new(CurveKind::UE, config.n, lo, column_mean(|rec| &rec.1))?,
        ic: ErrorCurve::new(CurveKind::IC, config.n, lo, column_mean(|rec| &rec.2))?,
    })
}

/// Runs a closure inside a dedicated thread pool of the given size.
/// Results are identical for any worker count; this only bounds
/// parallelism.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool construction failed: {e}")))?;
    Ok(pool.install(f))
}
