//! Multi-resolution prediction error analysis.
//!
//! A predictor built at resolution r uses the first r covariates of an
//! importance-ordered sequence. Its average prediction error splits
//! into three parts: the intrinsic variance tau^2 that no covariate
//! removes, the resolution bias A(r) from truncating the sequence at
//! r, and the estimation error from fitting the resolution-r predictor
//! on n training units. This crate constructs synthetic models whose
//! A(r) is exactly a prescribed decay profile, evaluates the resulting
//! error curves in closed form for least-squares regression and for
//! prefix-matching tree imputation, selects resolutions by
//! cross-validation, unbiased estimation, or an information criterion,
//! and probes how the optimal resolution scales with n, all under
//! seeded, bit-reproducible Monte Carlo.
//!
//! Modules:
//!
//! * [`profile`]: bias decay profiles A(r) and their increments;
//! * [`linear`]: the Gaussian linear family calibrated to a profile,
//!   with exact error formulas;
//! * [`ols`]: progressive least squares across nested designs, with
//!   leave-one-out, unbiased, and information-criterion estimates;
//! * [`tree`]: the categorical tree family, prefix-matching imputation,
//!   and exact matching-chain error sums;
//! * [`select`]: curve minimization and selection methods;
//! * [`rates`]: scaling of the optimal resolution and loss with n;
//! * [`ordering`]: the cost of misordered covariate sequences;
//! * [`harness`]: deterministic parallel Monte Carlo experiments;
//! * [`emit`], [`chart`]: CSV/JSON reports and SVG line charts;
//! * [`curve`], [`numeric`], [`seed`], [`error`]: shared plumbing.

pub mod chart;
pub mod curve;
pub mod emit;
pub mod error;
pub mod harness;
pub mod linear;
pub mod numeric;
pub mod ols;
pub mod ordering;
pub mod profile;
pub mod rates;
pub mod seed;
pub mod select;
pub mod tree;

pub use curve::{strict_local_minima, CurveKind, ErrorCurve};
pub use error::{Error, Result};
pub use harness::{
    estimator_bias_curves, oracle_reference, run_all_replications, run_replication,
    run_table_experiment, with_workers, BiasCurves, ExperimentConfig, Family, MethodOutcome,
    RepRecord, TableReport, TableRow,
};
pub use linear::{
    exact_eps, exact_pe, expected_cv, expected_ic, expected_sigma_hat2, sample_training,
    LinearModelSpec, TrainingSet,
};
pub use ordering::{ordering_experiment, OrderingRatio, OrderingReport, OrderingRow, PermSpec};
pub use profile::{BiasProfile, ProfileKind};
pub use rates::{rate_probe, ErrorModel, RateFitReport, RatePoint, RateTransform};
pub use select::{argmin_resolution, select, Method, SelectionReport};
