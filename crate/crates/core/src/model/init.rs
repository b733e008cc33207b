//! Data-driven starting values.

use nalgebra::{DMatrix, DVector};

use super::types::{CovariateMatrix, SubjectSeries, OMEGA, PERIOD_HOURS};
use crate::math::{quantile, sd};

/// Empirical per-subject summaries used to initialize samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectSummary {
    /// 5th percentile of the observations, floored at 0.01.
    pub minimum: f64,
    /// Spread between the 5th and 95th percentiles, floored at 0.01.
    pub range: f64,
    /// Acrophase of the first 24 h harmonic, kept inside [0.25, 23.75].
    pub peak_hour: f64,
    /// Residual sd around the hourly mean profile, floored at 0.01.
    pub residual_sd: f64,
}

pub fn subject_summary(series: &SubjectSeries, epochs_per_hour: u32) -> SubjectSummary {
    let y = &series.y;
    let q05 = quantile(y, 0.05);
    let q95 = quantile(y, 0.95);
    let mean_y = crate::math::mean(y);

    let mut sc = 0.0;
    let mut ss = 0.0;
    let mut bins = [(0.0f64, 0usize); 24];
    for (&t, &v) in series.t_index.iter().zip(y) {
        let h = t as f64 / epochs_per_hour as f64;
        let angle = h * OMEGA;
        sc += (v - mean_y) * angle.cos();
        ss += (v - mean_y) * angle.sin();
        let b = (h.rem_euclid(PERIOD_HOURS).floor() as usize).min(23);
        bins[b].0 += v;
        bins[b].1 += 1;
    }
    let peak = (ss.atan2(sc) / OMEGA).rem_euclid(PERIOD_HOURS);

    let resid: Vec<f64> = series
        .t_index
        .iter()
        .zip(y)
        .map(|(&t, &v)| {
            let h = t as f64 / epochs_per_hour as f64;
            let b = (h.rem_euclid(PERIOD_HOURS).floor() as usize).min(23);
            v - bins[b].0 / bins[b].1 as f64
        })
        .collect();
    let residual_sd = if resid.len() > 1 { sd(&resid) } else { 0.0 };

    SubjectSummary {
        minimum: q05.max(0.01),
        range: (q95 - q05).max(0.01),
        peak_hour: peak.clamp(0.25, PERIOD_HOURS - 0.25),
        residual_sd: residual_sd.max(0.01),
    }
}

/// Ridge regression of `target` on the covariates (no extra intercept).
pub fn ridge_log_fit(x: &CovariateMatrix, target: &[f64], penalty: f64) -> Vec<f64> {
    let (n, q) = (x.rows(), x.cols());
    let xm = DMatrix::from_row_slice(n, q, x.values());
    let y = DVector::from_column_slice(target);
    let gram = xm.transpose() * &xm + DMatrix::<f64>::identity(q, q) * penalty;
    let rhs = xm.transpose() * y;
    match gram.cholesky() {
        Some(ch) => ch.solve(&rhs).iter().copied().collect(),
        None => vec![0.0; q],
    }
}
