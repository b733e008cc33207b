//! Single-subject comparison models without covariates: the standard cosinor
//! and the extended (anti-logistic) cosinor. A multi-subject instance is a
//! product of independent subject posteriors laid out subject-major.

use std::ops::Range;

use super::init::subject_summary;
use super::kernel::{antilogistic_subject, cosinor_subject, SubjectTable};
use super::priors::{half_cauchy_log_scale, uniform_logit};
use super::types::{ModelSpec, SubjectParams, SubjectSeries, Variant, PERIOD_HOURS};
use crate::density::{LogDensity, PosteriorModel};
use crate::error::{Error, Result};
use crate::math::{expit, logit, CompensatedSum};

#[derive(Debug, Clone)]
pub struct BaselineModel {
    spec: ModelSpec,
    subjects: Vec<SubjectSeries>,
    tables: Vec<SubjectTable>,
}

impl BaselineModel {
    pub fn new(subjects: Vec<SubjectSeries>, spec: ModelSpec) -> Result<Self> {
        if spec.variant.is_calc() {
            return Err(Error::InvalidArgument(format!(
                "variant {} is not a single-subject baseline",
                spec.variant.label()
            )));
        }
        spec.validate(0)?;
        if subjects.is_empty() {
            return Err(Error::InvalidArgument("no subjects".into()));
        }
        for s in &subjects {
            s.validate()?;
        }
        let tables = subjects.iter().map(|s| SubjectTable::new(s, spec.epochs_per_hour)).collect();
        Ok(Self { spec, subjects, tables })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn subjects(&self) -> &[SubjectSeries] {
        &self.subjects
    }

    /// Unconstrained coordinates per subject.
    pub fn block_size(&self) -> usize {
        match self.spec.variant {
            Variant::Cosinor => 4,
            _ => 6,
        }
    }

    pub fn subject_block(&self, i: usize) -> Range<usize> {
        let k = self.block_size();
        i * k..(i + 1) * k
    }

    /// The posterior of subject `i` alone.
    pub fn subject_model(&self, i: usize) -> BaselineModel {
        BaselineModel {
            spec: self.spec,
            subjects: vec![self.subjects[i].clone()],
            tables: vec![self.tables[i].clone()],
        }
    }

    /// Subject parameters for a position; for the cosinor `alpha` and `beta`
    /// are reported as 0 and 1.
    pub fn subject_params(&self, z: &[f64], i: usize) -> SubjectParams {
        let b = &z[self.subject_block(i)];
        match self.spec.variant {
            Variant::Cosinor => SubjectParams {
                m: b[0].exp(),
                amplitude: b[1].exp(),
                phase: PERIOD_HOURS * expit(b[2]),
                sigma: b[3].exp(),
                alpha: 0.0,
                beta: 1.0,
            },
            _ => SubjectParams {
                m: b[0].exp(),
                amplitude: b[1].exp(),
                alpha: 2.0 * expit(b[2]) - 1.0,
                beta: b[3].exp(),
                phase: PERIOD_HOURS * expit(b[4]),
                sigma: b[5].exp(),
            },
        }
    }

    fn subject_names(&self) -> &'static [&'static str] {
        match self.spec.variant {
            Variant::Cosinor => &["M", "A", "phi", "sigma"],
            _ => &["m", "a", "alpha", "beta", "phi", "sigma"],
        }
    }
}

impl LogDensity for BaselineModel {
    fn dim(&self) -> usize {
        self.subjects.len() * self.block_size()
    }

    fn log_density_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let h = &self.spec.hyper;
        let mut total = CompensatedSum::new();
        for i in 0..self.subjects.len() {
            let range = self.subject_block(i);
            let b = &z[range.clone()];
            let g = &mut grad[range];
            let sp = self.subject_params(z, i);
            let (lp_m, lp_a) = (h.lmu_m.log_density(b[0]), h.log_amplitude.log_density(b[1]));
            let mut lp = lp_m + lp_a;
            match self.spec.variant {
                Variant::Cosinor => {
                    let p = cosinor_subject(&self.tables[i], sp.m, sp.amplitude, sp.phase, sp.sigma);
                    let (up, dup) = uniform_logit(b[2]);
                    let (us, dus) = half_cauchy_log_scale(b[3], h.gamma_sigma);
                    lp += up + us;
                    let pf = sp.phase / PERIOD_HOURS;
                    g[0] = p.d_m * sp.m + h.lmu_m.dlog_density(b[0]);
                    g[1] = p.d_a * sp.amplitude + h.log_amplitude.dlog_density(b[1]);
                    g[2] = p.d_phi * PERIOD_HOURS * pf * (1.0 - pf) + dup;
                    g[3] = p.d_log_sigma + dus;
                    total.add(p.loglik + lp);
                }
                _ => {
                    let p = antilogistic_subject(
                        &self.tables[i],
                        sp.m,
                        sp.amplitude,
                        sp.alpha,
                        sp.beta,
                        sp.phase,
                        sp.sigma,
                        self.spec.cosine_form,
                    );
                    let (ua, dua) = uniform_logit(b[2]);
                    let (up, dup) = uniform_logit(b[4]);
                    let (us, dus) = half_cauchy_log_scale(b[5], h.gamma_sigma);
                    lp += ua + up + us + h.lmu_beta.log_density(b[3]);
                    let ab = 0.5 * (sp.alpha + 1.0);
                    let pf = sp.phase / PERIOD_HOURS;
                    g[0] = p.d_m * sp.m + h.lmu_m.dlog_density(b[0]);
                    g[1] = p.d_a * sp.amplitude + h.log_amplitude.dlog_density(b[1]);
                    g[2] = p.d_alpha * 2.0 * ab * (1.0 - ab) + dua;
                    g[3] = p.d_beta * sp.beta + h.lmu_beta.dlog_density(b[3]);
                    g[4] = p.d_phi * PERIOD_HOURS * pf * (1.0 - pf) + dup;
                    g[5] = p.d_log_sigma + dus;
                    total.add(p.loglik + lp);
                }
            }
        }
        let v = total.value();
        if v.is_finite() && grad.iter().all(|g| g.is_finite()) {
            v
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl PosteriorModel for BaselineModel {
    fn constrained_names(&self) -> Vec<String> {
        let n = self.subjects.len();
        let mut names = Vec::new();
        for block in self.subject_names() {
            names.extend((1..=n).map(|i| format!("{block}[{i}]")));
        }
        names
    }

    fn constrain(&self, z: &[f64]) -> Vec<f64> {
        let n = self.subjects.len();
        let params: Vec<SubjectParams> = (0..n).map(|i| self.subject_params(z, i)).collect();
        let mut out = Vec::with_capacity(n * self.block_size());
        match self.spec.variant {
            Variant::Cosinor => {
                out.extend(params.iter().map(|p| p.m + 0.5 * p.amplitude));
                out.extend(params.iter().map(|p| 0.5 * p.amplitude));
                out.extend(params.iter().map(|p| p.phase));
                out.extend(params.iter().map(|p| p.sigma));
            }
            _ => {
                out.extend(params.iter().map(|p| p.m));
                out.extend(params.iter().map(|p| p.amplitude));
                out.extend(params.iter().map(|p| p.alpha));
                out.extend(params.iter().map(|p| p.beta));
                out.extend(params.iter().map(|p| p.phase));
                out.extend(params.iter().map(|p| p.sigma));
            }
        }
        out
    }

    fn unconstrain(&self, c: &[f64]) -> Result<Vec<f64>> {
        let n = self.subjects.len();
        let k = self.block_size();
        if c.len() != n * k {
            return Err(Error::DimensionMismatch(format!("expected {} constrained values, got {}", n * k, c.len())));
        }
        let mut z = vec![0.0; n * k];
        for i in 0..n {
            let col = |j: usize| c[j * n + i];
            let b = &mut z[i * k..(i + 1) * k];
            match self.spec.variant {
                Variant::Cosinor => {
                    let (big_m, big_a, phi, sigma) = (col(0), col(1), col(2), col(3));
                    let m = big_m - big_a;
                    let a = 2.0 * big_a;
                    if !(m > 0.0 && a > 0.0 && sigma > 0.0 && phi > 0.0 && phi < PERIOD_HOURS) {
                        return Err(Error::InvalidParameter(format!("cosinor subject {} out of range", i + 1)));
                    }
                    b.copy_from_slice(&[m.ln(), a.ln(), logit(phi / PERIOD_HOURS), sigma.ln()]);
                }
                _ => {
                    let (m, a, alpha, beta, phi, sigma) = (col(0), col(1), col(2), col(3), col(4), col(5));
                    if !(m > 0.0 && a > 0.0 && beta > 0.0 && sigma > 0.0)
                        || !(alpha > -1.0 && alpha < 1.0 && phi > 0.0 && phi < PERIOD_HOURS)
                    {
                        return Err(Error::InvalidParameter(format!("subject {} out of range", i + 1)));
                    }
                    b.copy_from_slice(&[
                        m.ln(),
                        a.ln(),
                        logit(0.5 * (alpha + 1.0)),
                        beta.ln(),
                        logit(phi / PERIOD_HOURS),
                        sigma.ln(),
                    ]);
                }
            }
        }
        Ok(z)
    }

    fn initial_point(&self) -> Vec<f64> {
        let k = self.block_size();
        let mut z = vec![0.0; self.subjects.len() * k];
        for (i, s) in self.subjects.iter().enumerate() {
            let sm = subject_summary(s, self.spec.epochs_per_hour);
            let phi = logit(sm.peak_hour / PERIOD_HOURS);
            let b = &mut z[i * k..(i + 1) * k];
            match self.spec.variant {
                Variant::Cosinor => {
                    b.copy_from_slice(&[sm.minimum.ln(), sm.range.ln(), phi, sm.residual_sd.ln()]);
                }
                _ => {
                    b.copy_from_slice(&[sm.minimum.ln(), sm.range.ln(), 0.0, 1.0, phi, sm.residual_sd.ln()]);
                }
            }
        }
        z
    }
}
