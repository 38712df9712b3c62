//! Shared numerical helpers: compensated summation, order statistics,
//! binomial log-probabilities, and straight-line least squares.
//!
//! Sums that feed tolerance-level assertions use Neumaier's variant of
//! Kahan summation, which tracks a running compensation term and also
//! handles the case where the next addend exceeds the running sum in
//! magnitude. Quantiles use the nearest-rank convention (the 1-based
//! order statistic of rank ceil(q*N)), which always returns an element
//! of the sample and never interpolates.

use crate::error::{Error, Result};

/// Compensated (Neumaier) sum of a sequence of f64 values.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean. The slice must be nonempty.
pub fn mean(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    neumaier_sum(xs.iter().copied()) / xs.len() as f64
}

/// Nearest-rank quantile: the 1-based order statistic of rank
/// ceil(q*N), clamped to [1, N]. The slice must be nonempty.
pub fn quantile_nearest_rank(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Natural log of the Binomial(n, p) probability mass at k.
///
/// Evaluated as a difference of log-gamma terms so that it stays
/// finite far into the tails where the pmf itself underflows.
pub fn binomial_ln_pmf(n: u64, k: u64, p: f64) -> f64 {
    debug_assert!(k <= n);
    debug_assert!((0.0..=1.0).contains(&p));
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    use statrs::function::gamma::ln_gamma;
    let (nf, kf) = (n as f64, k as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    // ln(1-p) via ln_1p(-p) keeps accuracy for small p.
    ln_choose + kf * p.ln() + (nf - kf) * (-p).ln_1p()
}

/// Ordinary least-squares line fit y = slope*x + intercept.
///
/// Returns (slope, intercept, R^2). A constant response is reported
/// with R^2 = 1 since the horizontal line fits it exactly.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain(format!(
            "line fit needs at least 2 paired points, got {} x {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = neumaier_sum(xs.iter().copied()) / n;
    let my = neumaier_sum(ys.iter().copied()) / n;
    let sxx = neumaier_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = neumaier_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    if sxx == 0.0 {
        return Err(Error::Domain("line fit is degenerate: all x values equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = neumaier_sum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - (slope * x + intercept)).powi(2)),
    );
    let ss_tot = neumaier_sum(ys.iter().map(|y| (y - my) * (y - my)));
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}

/// Formats a float with 17 significant digits, enough for an exact
/// f64 round trip through text.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}
