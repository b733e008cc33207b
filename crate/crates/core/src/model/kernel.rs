//! Per-subject likelihood sums shared by the covariate model and the
//! single-subject baselines.

use super::types::{CosineForm, SubjectSeries, OMEGA};
use crate::math::HALF_LN_2PI;

/// Precomputed `cos(h w)` and `sin(h w)` for a subject's epochs, so the mean
/// at any acrophase needs no further trigonometric calls.
#[derive(Debug, Clone)]
pub(crate) struct SubjectTable {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub y: Vec<f64>,
}

impl SubjectTable {
    pub fn new(series: &SubjectSeries, epochs_per_hour: u32) -> Self {
        let r = epochs_per_hour as f64;
        let mut cos = Vec::with_capacity(series.len());
        let mut sin = Vec::with_capacity(series.len());
        for &t in &series.t_index {
            let angle = (t as f64 / r) * OMEGA;
            cos.push(angle.cos());
            sin.push(angle.sin());
        }
        Self {
            cos,
            sin,
            y: series.y.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }
}

/// Log-likelihood of one subject and its partial derivatives with respect to
/// the subject's constrained parameters (`d_log_sigma` is taken w.r.t. `log sigma`).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SubjectPartials {
    pub loglik: f64,
    pub d_m: f64,
    pub d_a: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
    pub d_phi: f64,
    pub d_log_sigma: f64,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn antilogistic_subject(
    table: &SubjectTable,
    m: f64,
    a: f64,
    alpha: f64,
    beta: f64,
    phi: f64,
    sigma: f64,
    form: CosineForm,
) -> SubjectPartials {
    let (sp, cp) = (phi * OMEGA).sin_cos();
    let mut srr = 0.0;
    let mut sr = 0.0;
    let mut sre = 0.0;
    let mut sk = 0.0;
    let mut skc = 0.0;
    let mut skd = 0.0;
    for t in 0..table.len() {
        let ch = table.cos[t];
        let sh = table.sin[t];
        let c = ch * cp + sh * sp;
        let g = match form {
            CosineForm::AsPrinted => beta * c - alpha,
            CosineForm::Marler => beta * (c - alpha),
        };
        // exp overflow for very negative g yields exactly 0, the correct limit.
        let e = 1.0 / (1.0 + (-g).exp());
        let r = table.y[t] - (m + a * e);
        srr += r * r;
        sr += r;
        sre += r * e;
        let k = r * e * (1.0 - e);
        sk += k;
        skc += k * c;
        // d cos((h - phi) w) / d phi = w sin((h - phi) w)
        skd += k * (sh * cp - ch * sp);
    }
    let n = table.len() as f64;
    let inv_var = 1.0 / (sigma * sigma);
    let (d_alpha, d_beta) = match form {
        CosineForm::AsPrinted => (-a * sk * inv_var, a * skc * inv_var),
        CosineForm::Marler => (-a * beta * sk * inv_var, a * (skc - alpha * sk) * inv_var),
    };
    SubjectPartials {
        loglik: -n * (HALF_LN_2PI + sigma.ln()) - 0.5 * srr * inv_var,
        d_m: sr * inv_var,
        d_a: sre * inv_var,
        d_alpha,
        d_beta,
        d_phi: a * beta * OMEGA * skd * inv_var,
        d_log_sigma: -n + srr * inv_var,
    }
}

/// Standard cosinor `m + a/2 + (a/2) cos((h - phi) w)`.
pub(crate) fn cosinor_subject(table: &SubjectTable, m: f64, a: f64, phi: f64, sigma: f64) -> SubjectPartials {
    let (sp, cp) = (phi * OMEGA).sin_cos();
    let half = 0.5 * a;
    let mut srr = 0.0;
    let mut sr = 0.0;
    let mut src = 0.0;
    let mut srd = 0.0;
    for t in 0..table.len() {
        let ch = table.cos[t];
        let sh = table.sin[t];
        let c = ch * cp + sh * sp;
        let r = table.y[t] - (m + half + half * c);
        srr += r * r;
        sr += r;
        src += r * c;
        srd += r * (sh * cp - ch * sp);
    }
    let n = table.len() as f64;
    let inv_var = 1.0 / (sigma * sigma);
    SubjectPartials {
        loglik: -n * (HALF_LN_2PI + sigma.ln()) - 0.5 * srr * inv_var,
        d_m: sr * inv_var,
        d_a: 0.5 * (sr + src) * inv_var,
        d_alpha: 0.0,
        d_beta: 0.0,
        d_phi: half * OMEGA * srd * inv_var,
        d_log_sigma: -n + srr * inv_var,
    }
}
