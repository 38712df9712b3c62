//! CSV and JSON report emission.
//!
//! Every float is printed with 17 significant digits, enough to
//! reconstruct the exact 64-bit value, and every writer has a reader
//! that round-trips the producing report type. Column layouts are
//! stable: downstream plots and the acceptance checks parse them.

use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{BiasCurves, TableReport, TableRow};
use crate::linear::TrainingSet;
use crate::numeric::fmt_g17;
use crate::ordering::{OrderingRatio, OrderingReport, OrderingRow};
use crate::rates::{RateFitReport, RatePoint};
use crate::tree::CategoricalTrainingSet;

/// One row of the exact linear prediction-error table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeExactRow {
    pub r: usize,
    pub a_r: f64,
    pub eps_exact: f64,
    pub pe_exact: f64,
}

/// One row of the descent-structure table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentRow {
    pub r: usize,
    pub a_r: f64,
    pub pe_exact: f64,
    pub local_min: bool,
}

/// One row of the tree error table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeCurveRow {
    pub r: usize,
    pub eps_exact: f64,
    pub eps_upper: f64,
    pub a_r: f64,
}

/// One row of the estimator-bias figure table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureRow {
    pub r: usize,
    pub exact_pe: f64,
    pub cv_mean: f64,
    pub ue_mean: f64,
    pub ic_mean: f64,
}

fn open_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn open_reader(path: &Path, want_header: &[&str]) -> Result<csv::Reader<File>> {
    let mut rdr = csv::Reader::from_reader(File::open(path)?);
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if got != want_header {
        return Err(Error::Config(format!(
            "unexpected CSV header in {}: got {got:?}, want {want_header:?}",
            path.display()
        )));
    }
    Ok(rdr)
}

fn field_f64(record: &csv::StringRecord, idx: usize, what: &str) -> Result<f64> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::Config(format!("missing CSV field {what}")))?;
    raw.parse::<f64>()
        .map_err(|_| Error::Config(format!("CSV field {what} is not a number: {raw:?}")))
}

fn field_usize(record: &csv::StringRecord, idx: usize, what: &str) -> Result<usize> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::Config(format!("missing CSV field {what}")))?;
    raw.parse::<usize>()
        .map_err(|_| Error::Config(format!("CSV field {what} is not a nonnegative integer: {raw:?}")))
}

/// Writes the (r, A_r, eps_exact, pe_exact) table.
pub fn write_pe_exact_csv(path: &Path, rows: &[PeExactRow]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["r", "A_r", "eps_exact", "pe_exact"])?;
    for row in rows {
        w.write_record([
            row.r.to_string(),
            fmt_g17(row.a_r),
            fmt_g17(row.eps_exact),
            fmt_g17(row.pe_exact),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a pe_exact table.
pub fn read_pe_exact_csv(path: &Path) -> Result<Vec<PeExactRow>> {
    let mut rdr = open_reader(path, &["r", "A_r", "eps_exact", "pe_exact"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(PeExactRow {
            r: field_usize(&record, 0, "r")?,
            a_r: field_f64(&record, 1, "A_r")?,
            eps_exact: field_f64(&record, 2, "eps_exact")?,
            pe_exact: field_f64(&record, 3, "pe_exact")?,
        });
    }
    Ok(rows)
}

/// Writes the descent table with its local-minimum flags (1/0).
pub fn write_descent_csv(path: &Path, rows: &[DescentRow]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["r", "A_r", "pe_exact", "local_min"])?;
    for row in rows {
        w.write_record([
            row.r.to_string(),
            fmt_g17(row.a_r),
            fmt_g17(row.pe_exact),
            if row.local_min { "1".into() } else { "0".to_string() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a descent table.
pub fn read_descent_csv(path: &Path) -> Result<Vec<DescentRow>> {
    let mut rdr = open_reader(path, &["r", "A_r", "pe_exact", "local_min"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let flag = match record.get(3) {
            Some("1") => true,
            Some("0") => false,
            other => {
                return Err(Error::Config(format!(
                    "CSV field local_min must be 0 or 1, got {other:?}"
                )))
            }
        };
        rows.push(DescentRow {
            r: field_usize(&record, 0, "r")?,
            a_r: field_f64(&record, 1, "A_r")?,
            pe_exact: field_f64(&record, 2, "pe_exact")?,
            local_min: flag,
        });
    }
    Ok(rows)
}

/// Writes the tree error table (r, eps_exact, eps_upper, A_r).
pub fn write_tree_curve_csv(path: &Path, rows: &[TreeCurveRow]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["r", "eps_exact", "eps_upper", "A_r"])?;
    for row in rows {
        w.write_record([
            row.r.to_string(),
            fmt_g17(row.eps_exact),
            fmt_g17(row.eps_upper),
            fmt_g17(row.a_r),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a tree error table.
pub fn read_tree_curve_csv(path: &Path) -> Result<Vec<TreeCurveRow>> {
    let mut rdr = open_reader(path, &["r", "eps_exact", "eps_upper", "A_r"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(TreeCurveRow {
            r: field_usize(&record, 0, "r")?,
            eps_exact: field_f64(&record, 1, "eps_exact")?,
            eps_upper: field_f64(&record, 2, "eps_upper")?,
            a_r: field_f64(&record, 3, "A_r")?,
        });
    }
    Ok(rows)
}

/// Writes the aggregated experiment table, one row per method.
pub fn write_table_csv(path: &Path, report: &TableReport) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record([
        "method",
        "mean_R",
        "qr_lo_R",
        "qr_hi_R",
        "mean_stdPE",
        "qr_lo_stdPE",
        "qr_hi_stdPE",
    ])?;
    for row in &report.rows {
        w.write_record([
            row.method.name().to_string(),
            fmt_g17(row.mean_r),
            fmt_g17(row.qr_lo_r),
            fmt_g17(row.qr_hi_r),
            fmt_g17(row.mean_std_pe),
            fmt_g17(row.qr_lo_std_pe),
            fmt_g17(row.qr_hi_std_pe),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the per-method rows of an experiment table.
pub fn read_table_csv(path: &Path) -> Result<Vec<TableRow>> {
    let mut rdr = open_reader(
        path,
        &["method", "mean_R", "qr_lo_R", "qr_hi_R", "mean_stdPE", "qr_lo_stdPE", "qr_hi_stdPE"],
    )?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let method = record
            .get(0)
            .ok_or_else(|| Error::Config("missing CSV field method".into()))?
            .parse()?;
        rows.push(TableRow {
            method,
            mean_r: field_f64(&record, 1, "mean_R")?,
            qr_lo_r: field_f64(&record, 2, "qr_lo_R")?,
            qr_hi_r: field_f64(&record, 3, "qr_hi_R")?,
            mean_std_pe: field_f64(&record, 4, "mean_stdPE")?,
            qr_lo_std_pe: field_f64(&record, 5, "qr_lo_stdPE")?,
            qr_hi_std_pe: field_f64(&record, 6, "qr_hi_stdPE")?,
        });
    }
    Ok(rows)
}

/// Writes the per-n optima of a rate probe.
pub fn write_rates_csv(path: &Path, report: &RateFitReport) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["n", "R_n", "L_n"])?;
    for p in &report.points {
        w.write_record([p.n.to_string(), p.r_n.to_string(), fmt_g17(p.l_n)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back rate-probe optima.
pub fn read_rates_csv(path: &Path) -> Result<Vec<RatePoint>> {
    let mut rdr = open_reader(path, &["n", "R_n", "L_n"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let n_raw = record
            .get(0)
            .ok_or_else(|| Error::Config("missing CSV field n".into()))?;
        let n = n_raw
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("CSV field n is not an integer: {n_raw:?}")))?;
        rows.push(RatePoint {
            n,
            r_n: field_usize(&record, 1, "R_n")?,
            l_n: field_f64(&record, 2, "L_n")?,
        });
    }
    Ok(rows)
}

/// Writes the per-resolution ordering table.
pub fn write_ordering_csv(path: &Path, report: &OrderingReport) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["r", "M_r", "A_r", "A_prime_r"])?;
    for row in &report.rows {
        w.write_record([
            row.r.to_string(),
            row.m_r.to_string(),
            fmt_g17(row.a_r),
            fmt_g17(row.a_prime_r),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the per-resolution ordering table.
pub fn read_ordering_csv(path: &Path) -> Result<Vec<OrderingRow>> {
    let mut rdr = open_reader(path, &["r", "M_r", "A_r", "A_prime_r"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(OrderingRow {
            r: field_usize(&record, 0, "r")?,
            m_r: field_usize(&record, 1, "M_r")?,
            a_r: field_f64(&record, 2, "A_r")?,
            a_prime_r: field_f64(&record, 3, "A_prime_r")?,
        });
    }
    Ok(rows)
}

/// Writes the bias-penalty ratios at the rate-optimal resolutions.
pub fn write_ordering_ratio_csv(path: &Path, report: &OrderingReport) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["n", "R_n", "ratio"])?;
    for q in &report.ratios {
        w.write_record([q.n.to_string(), q.r_n.to_string(), fmt_g17(q.ratio)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the ordering ratio table.
pub fn read_ordering_ratio_csv(path: &Path) -> Result<Vec<OrderingRatio>> {
    let mut rdr = open_reader(path, &["n", "R_n", "ratio"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let n_raw = record
            .get(0)
            .ok_or_else(|| Error::Config("missing CSV field n".into()))?;
        let n = n_raw
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("CSV field n is not an integer: {n_raw:?}")))?;
        rows.push(OrderingRatio {
            n,
            r_n: field_usize(&record, 1, "R_n")?,
            ratio: field_f64(&record, 2, "ratio")?,
        });
    }
    Ok(rows)
}

/// Writes the estimator-bias figure table from the four mean curves.
pub fn write_figure_csv(path: &Path, curves: &BiasCurves) -> Result<()> {
    let range = curves.exact.r_range();
    if curves.cv.r_range() != range
        || curves.ue.r_range() != range
        || curves.ic.r_range() != range
    {
        return Err(Error::Internal("bias curves cover different ranges".into()));
    }
    let mut w = open_writer(path)?;
    w.write_record(["r", "exact_pe", "cv_mean", "ue_mean", "ic_mean"])?;
    for (i, (r, exact)) in curves.exact.iter().enumerate() {
        w.write_record([
            r.to_string(),
            fmt_g17(exact),
            fmt_g17(curves.cv.values[i]),
            fmt_g17(curves.ue.values[i]),
            fmt_g17(curves.ic.values[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the estimator-bias figure table.
pub fn read_figure_csv(path: &Path) -> Result<Vec<FigureRow>> {
    let mut rdr = open_reader(path, &["r", "exact_pe", "cv_mean", "ue_mean", "ic_mean"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(FigureRow {
            r: field_usize(&record, 0, "r")?,
            exact_pe: field_f64(&record, 1, "exact_pe")?,
            cv_mean: field_f64(&record, 2, "cv_mean")?,
            ue_mean: field_f64(&record, 3, "ue_mean")?,
            ic_mean: field_f64(&record, 4, "ic_mean")?,
        });
    }
    Ok(rows)
}

/// Serializes any report as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// Exports a linear training set (header y, x0, x1, ...).
pub fn write_training_csv(path: &Path, t: &TrainingSet) -> Result<()> {
    let mut w = open_writer(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((0..=t.r_max).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..t.n {
        let mut record = vec![fmt_g17(t.responses[i])];
        record.extend((0..=t.r_max).map(|j| fmt_g17(t.x(i, j))));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Imports a linear training set written by `write_training_csv`.
pub fn read_training_csv(path: &Path) -> Result<TrainingSet> {
    let mut rdr = csv::Reader::from_reader(File::open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 2 || header[0] != "y" {
        return Err(Error::Config(format!(
            "unexpected CSV header in {}: want y, x0, x1, ...",
            path.display()
        )));
    }
    for (j, name) in header[1..].iter().enumerate() {
        if *name != format!("x{j}") {
            return Err(Error::Config(format!(
                "unexpected CSV header column {name:?}, want x{j}"
            )));
        }
    }
    let r_max = header.len() - 2;
    let mut responses = Vec::new();
    let mut covariates = Vec::new();
    for record in rdr.records() {
        let record = record?;
        responses.push(field_f64(&record, 0, "y")?);
        for j in 0..=r_max {
            covariates.push(field_f64(&record, j + 1, &format!("x{j}"))?);
        }
    }
    TrainingSet::from_parts(responses.len(), r_max, covariates, responses)
}

/// Exports a categorical training set (header y, x1, ...), with
/// integer-coded covariate columns.
pub fn write_categorical_csv(path: &Path, t: &CategoricalTrainingSet) -> Result<()> {
    let mut w = open_writer(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=t.r_max).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for i in 0..t.n {
        let mut record = vec![fmt_g17(t.responses[i])];
        record.extend((1..=t.r_max).map(|k| t.x(i, k).to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Imports a categorical training set written by
/// `write_categorical_csv`; the category count M is needed because the
/// file encodes values, not the alphabet size.
pub fn read_categorical_csv(path: &Path, m: usize) -> Result<CategoricalTrainingSet> {
    let mut rdr = csv::Reader::from_reader(File::open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 2 || header[0] != "y" {
        return Err(Error::Config(format!(
            "unexpected CSV header in {}: want y, x1, x2, ...",
            path.display()
        )));
    }
    for (k, name) in header[1..].iter().enumerate() {
        if *name != format!("x{}", k + 1) {
            return Err(Error::Config(format!(
                "unexpected CSV header column {name:?}, want x{}",
                k + 1
            )));
        }
    }
    let r_max = header.len() - 1;
    let mut responses = Vec::new();
    let mut covariates = Vec::new();
    for record in rdr.records() {
        let record = record?;
        responses.push(field_f64(&record, 0, "y")?);
        for k in 1..=r_max {
            let raw = record
                .get(k)
                .ok_or_else(|| Error::Config(format!("missing CSV field x{k}")))?;
            let v = raw.parse::<u32>().map_err(|_| {
                Error::Config(format!("CSV field x{k} is not a category code: {raw:?}"))
            })?;
            covariates.push(v);
        }
    }
    CategoricalTrainingSet::from_parts(responses.len(), r_max, m, covariates, responses)
}
