//! The covariate-dependent anti-logistic circadian model.
//!
//! Unconstrained layout for N subjects and Q covariates:
//!
//! | block            | size | transform                                  |
//! |------------------|------|--------------------------------------------|
//! | `z_m`            | N    | `log m_i = lmu_m + sigma_m z_m[i]`         |
//! | `z_beta`         | N    | `log beta_i = lmu_beta + sigma_beta z[i]`  |
//! | `alpha_raw`      | N    | `alpha_i = 2 expit(u) - 1`                 |
//! | `log_sigma`      | N    | `sigma_i = exp(s)`                         |
//! | population       | 4    | `lmu_m, lmu_beta, log sigma_m, log sigma_beta` |
//! | `psi_a, psi_phi` | 2Q   | identity                                   |
//! | `log r_a, log r_phi` | 2 (l1-ball only) | `r = exp(w)`               |

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::init::{ridge_log_fit, subject_summary};
use super::kernel::{antilogistic_subject, SubjectTable};
use super::priors::{alpha_log_prior, half_cauchy_log_scale, standard_normal};
use super::types::{CovariateMatrix, ModelSpec, SubjectParams, SubjectSeries, Variant, PERIOD_HOURS};
use crate::density::{LogDensity, PosteriorModel};
use crate::error::{Error, Result};
use crate::l1ball::{self, project_unchecked, project_vjp_into, ProjectionResult};
use crate::math::{expit, log_expit, logit, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalcLayout {
    pub n: usize,
    pub q: usize,
    pub l1ball: bool,
}

impl CalcLayout {
    pub fn z_m(&self, i: usize) -> usize {
        i
    }
    pub fn z_beta(&self, i: usize) -> usize {
        self.n + i
    }
    pub fn alpha_raw(&self, i: usize) -> usize {
        2 * self.n + i
    }
    pub fn log_sigma(&self, i: usize) -> usize {
        3 * self.n + i
    }
    pub fn lmu_m(&self) -> usize {
        4 * self.n
    }
    pub fn lmu_beta(&self) -> usize {
        4 * self.n + 1
    }
    pub fn log_sigma_m(&self) -> usize {
        4 * self.n + 2
    }
    pub fn log_sigma_beta(&self) -> usize {
        4 * self.n + 3
    }
    pub fn psi_a(&self, l: usize) -> usize {
        4 * self.n + 4 + l
    }
    pub fn psi_phi(&self, l: usize) -> usize {
        4 * self.n + 4 + self.q + l
    }
    pub fn log_r_a(&self) -> Option<usize> {
        self.l1ball.then(|| 4 * self.n + 4 + 2 * self.q)
    }
    pub fn log_r_phi(&self) -> Option<usize> {
        self.l1ball.then(|| 4 * self.n + 5 + 2 * self.q)
    }
    pub fn dim(&self) -> usize {
        4 * self.n + 4 + 2 * self.q + if self.l1ball { 2 } else { 0 }
    }
}

/// Constrained view of one unconstrained position.
#[derive(Debug, Clone, PartialEq)]
pub struct CalcState {
    /// Subject parameters, with amplitude and acrophase from the covariate links.
    pub subjects: Vec<SubjectParams>,
    pub lmu_m: f64,
    pub lmu_beta: f64,
    pub sigma_m: f64,
    pub sigma_beta: f64,
    pub psi_a: Vec<f64>,
    pub psi_phi: Vec<f64>,
    /// Radii; `None` in lasso mode.
    pub r_a: Option<f64>,
    pub r_phi: Option<f64>,
    pub eta_a: Vec<f64>,
    pub eta_phi: Vec<f64>,
    pub projection_a: Option<ProjectionResult>,
    pub projection_phi: Option<ProjectionResult>,
}

impl CalcState {
    /// True when every subject satisfies the support constraints, including the
    /// acrophase window.
    pub fn is_valid(&self) -> bool {
        self.subjects.iter().all(|s| s.validate().is_ok())
    }
}

/// A point in unconstrained space together with its decoded view.
#[derive(Debug, Clone)]
pub struct ParameterState {
    pub unconstrained: Vec<f64>,
    pub constrained: CalcState,
    /// Sum of the log-Jacobians of the parameter transforms.
    pub log_jacobian: f64,
}

/// Constrained parameters from which an unconstrained position is built.
#[derive(Debug, Clone, PartialEq)]
pub struct CalcParams {
    pub m: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub lmu_m: f64,
    pub lmu_beta: f64,
    pub sigma_m: f64,
    pub sigma_beta: f64,
    pub psi_a: Vec<f64>,
    pub psi_phi: Vec<f64>,
    pub r_a: Option<f64>,
    pub r_phi: Option<f64>,
}

/// Posterior of the covariate model (l1-ball or lasso coefficients).
#[derive(Debug, Clone)]
pub struct CalcModel {
    spec: ModelSpec,
    subjects: Vec<SubjectSeries>,
    x: CovariateMatrix,
    tables: Vec<SubjectTable>,
    layout: CalcLayout,
}

impl CalcModel {
    pub fn new(subjects: Vec<SubjectSeries>, x: CovariateMatrix, spec: ModelSpec) -> Result<Self> {
        if !spec.variant.is_calc() {
            return Err(Error::InvalidArgument(format!(
                "variant {} is not a covariate model",
                spec.variant.label()
            )));
        }
        spec.validate(x.cols())?;
        if subjects.is_empty() {
            return Err(Error::InvalidArgument("no subjects".into()));
        }
        if subjects.len() != x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} subjects but covariate matrix has {} rows",
                subjects.len(),
                x.rows()
            )));
        }
        for s in &subjects {
            s.validate()?;
        }
        let tables = subjects.iter().map(|s| SubjectTable::new(s, spec.epochs_per_hour)).collect();
        let layout = CalcLayout {
            n: subjects.len(),
            q: x.cols(),
            l1ball: spec.variant == Variant::CalcL1ball,
        };
        Ok(Self {
            spec,
            subjects,
            x,
            tables,
            layout,
        })
    }

    pub fn layout(&self) -> CalcLayout {
        self.layout
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn subjects(&self) -> &[SubjectSeries] {
        &self.subjects
    }

    pub fn covariates(&self) -> &CovariateMatrix {
        &self.x
    }

    /// Decodes an unconstrained position. Amplitudes and acrophases are
    /// computed but not range-checked here.
    pub fn decode(&self, z: &[f64]) -> Result<ParameterState> {
        if z.len() != self.layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "position has {} entries, model needs {}",
                z.len(),
                self.layout.dim()
            )));
        }
        let (state, log_jacobian) = self.decode_inner(z);
        Ok(ParameterState {
            unconstrained: z.to_vec(),
            constrained: state,
            log_jacobian,
        })
    }

    fn decode_inner(&self, z: &[f64]) -> (CalcState, f64) {
        let l = &self.layout;
        let lmu_m = z[l.lmu_m()];
        let lmu_beta = z[l.lmu_beta()];
        let sigma_m = z[l.log_sigma_m()].exp();
        let sigma_beta = z[l.log_sigma_beta()].exp();
        let psi_a = z[l.psi_a(0)..l.psi_a(0) + l.q].to_vec();
        let psi_phi = z[l.psi_phi(0)..l.psi_phi(0) + l.q].to_vec();
        let mut log_jac = z[l.log_sigma_m()] + z[l.log_sigma_beta()];

        let (r_a, r_phi, projection_a, projection_phi, eta_a, eta_phi) = if l.l1ball {
            let wa = z[l.log_r_a().unwrap()];
            let wp = z[l.log_r_phi().unwrap()];
            log_jac += wa + wp;
            let (ra, rp) = (wa.exp(), wp.exp());
            let pa = project_unchecked(&psi_a, ra);
            let pp = project_unchecked(&psi_phi, rp);
            let (ea, ep) = (pa.eta.clone(), pp.eta.clone());
            (Some(ra), Some(rp), Some(pa), Some(pp), ea, ep)
        } else {
            (None, None, None, None, psi_a.clone(), psi_phi.clone())
        };

        let mut subjects = Vec::with_capacity(l.n);
        for i in 0..l.n {
            let zm = z[l.z_m(i)];
            let zb = z[l.z_beta(i)];
            let u = z[l.alpha_raw(i)];
            let s = z[l.log_sigma(i)];
            let b = expit(u);
            // dm/dz = m sigma_m (the m term is added below), d alpha/du = 2B(1 - B).
            log_jac += sigma_m.ln() + sigma_beta.ln();
            log_jac += 2f64.ln() + log_expit(u) + log_expit(-u);
            log_jac += s;
            subjects.push(SubjectParams {
                m: (lmu_m + sigma_m * zm).exp(),
                alpha: 2.0 * b - 1.0,
                beta: (lmu_beta + sigma_beta * zb).exp(),
                sigma: s.exp(),
                amplitude: self.x.linear_predictor(i, &eta_a).exp(),
                phase: self.x.linear_predictor(i, &eta_phi).exp(),
            });
        }
        // m_i and beta_i also carry the log transform Jacobian.
        for sp in &subjects {
            log_jac += sp.m.ln() + sp.beta.ln();
        }
        (
            CalcState {
                subjects,
                lmu_m,
                lmu_beta,
                sigma_m,
                sigma_beta,
                psi_a,
                psi_phi,
                r_a,
                r_phi,
                eta_a,
                eta_phi,
                projection_a,
                projection_phi,
            },
            log_jac,
        )
    }

    /// Builds the unconstrained position for the given constrained parameters.
    pub fn encode(&self, p: &CalcParams) -> Result<Vec<f64>> {
        let l = &self.layout;
        let n_ok = [p.m.len(), p.alpha.len(), p.beta.len(), p.sigma.len()].iter().all(|&k| k == l.n);
        if !n_ok || p.psi_a.len() != l.q || p.psi_phi.len() != l.q {
            return Err(Error::DimensionMismatch("parameter block sizes do not match the model".into()));
        }
        if !(p.sigma_m > 0.0 && p.sigma_beta > 0.0) {
            return Err(Error::InvalidParameter("population scales must be positive".into()));
        }
        let mut z = vec![0.0; l.dim()];
        for i in 0..l.n {
            let (m, alpha, beta, sigma) = (p.m[i], p.alpha[i], p.beta[i], p.sigma[i]);
            if !(m > 0.0 && beta > 0.0 && sigma > 0.0 && alpha > -1.0 && alpha < 1.0) {
                return Err(Error::InvalidParameter(format!("subject {} parameters out of range", i + 1)));
            }
            z[l.z_m(i)] = (m.ln() - p.lmu_m) / p.sigma_m;
            z[l.z_beta(i)] = (beta.ln() - p.lmu_beta) / p.sigma_beta;
            z[l.alpha_raw(i)] = logit(0.5 * (alpha + 1.0));
            z[l.log_sigma(i)] = sigma.ln();
        }
        z[l.lmu_m()] = p.lmu_m;
        z[l.lmu_beta()] = p.lmu_beta;
        z[l.log_sigma_m()] = p.sigma_m.ln();
        z[l.log_sigma_beta()] = p.sigma_beta.ln();
        z[l.psi_a(0)..l.psi_a(0) + l.q].copy_from_slice(&p.psi_a);
        z[l.psi_phi(0)..l.psi_phi(0) + l.q].copy_from_slice(&p.psi_phi);
        if l.l1ball {
            let (ra, rp) = match (p.r_a, p.r_phi) {
                (Some(a), Some(b)) if a > 0.0 && b > 0.0 => (a, b),
                _ => return Err(Error::InvalidParameter("l1-ball mode needs positive radii".into())),
            };
            z[l.log_r_a().unwrap()] = ra.ln();
            z[l.log_r_phi().unwrap()] = rp.ln();
        }
        Ok(z)
    }

    /// Gaussian log-likelihood; `-inf` when an acrophase leaves [0, 24] or a
    /// link overflows.
    pub fn log_likelihood(&self, state: &ParameterState) -> f64 {
        if !state.constrained.is_valid() {
            return f64::NEG_INFINITY;
        }
        let mut total = CompensatedSum::new();
        for i in 0..self.layout.n {
            total.add(self.subject_log_likelihood(i, &state.constrained.subjects[i]));
        }
        total.value()
    }

    /// Log-likelihood contribution of a single subject.
    pub fn subject_log_likelihood(&self, i: usize, sp: &SubjectParams) -> f64 {
        antilogistic_subject(
            &self.tables[i],
            sp.m,
            sp.amplitude,
            sp.alpha,
            sp.beta,
            sp.phase,
            sp.sigma,
            self.spec.cosine_form,
        )
        .loglik
    }

    /// Log prior density in unconstrained coordinates, Jacobians included.
    pub fn log_prior(&self, state: &ParameterState) -> f64 {
        let mut grad = vec![0.0; self.layout.dim()];
        self.log_prior_grad(&state.unconstrained, &state.constrained, &mut grad)
    }

    pub fn log_posterior(&self, state: &ParameterState) -> f64 {
        let ll = self.log_likelihood(state);
        if ll == f64::NEG_INFINITY {
            return ll;
        }
        ll + self.log_prior(state)
    }

    /// Adds the prior gradient into `grad` and returns the log prior.
    fn log_prior_grad(&self, z: &[f64], st: &CalcState, grad: &mut [f64]) -> f64 {
        let l = &self.layout;
        let h = &self.spec.hyper;
        let mut lp = 0.0;
        for i in 0..l.n {
            let (v, d) = standard_normal(z[l.z_m(i)]);
            lp += v;
            grad[l.z_m(i)] += d;
            let (v, d) = standard_normal(z[l.z_beta(i)]);
            lp += v;
            grad[l.z_beta(i)] += d;
            let (v, d) = alpha_log_prior(z[l.alpha_raw(i)], h.beta_prior_a, h.beta_prior_b);
            lp += v;
            grad[l.alpha_raw(i)] += d;
            let (v, d) = half_cauchy_log_scale(z[l.log_sigma(i)], h.gamma_sigma);
            lp += v;
            grad[l.log_sigma(i)] += d;
        }
        lp += h.lmu_m.log_density(st.lmu_m);
        grad[l.lmu_m()] += h.lmu_m.dlog_density(st.lmu_m);
        lp += h.lmu_beta.log_density(st.lmu_beta);
        grad[l.lmu_beta()] += h.lmu_beta.dlog_density(st.lmu_beta);
        let (v, d) = half_cauchy_log_scale(z[l.log_sigma_m()], h.sigma_m_scale);
        lp += v;
        grad[l.log_sigma_m()] += d;
        let (v, d) = half_cauchy_log_scale(z[l.log_sigma_beta()], h.sigma_beta_scale);
        lp += v;
        grad[l.log_sigma_beta()] += d;

        // Latent (or direct, in lasso mode) double-exponential priors.
        for (block, tau) in [(l.psi_a(0), h.tau_a), (l.psi_phi(0), h.tau_phi)] {
            let psi = &z[block..block + l.q];
            lp += l1ball::log_dexp_sum(psi, tau);
            for (k, v) in psi.iter().enumerate() {
                if *v != 0.0 {
                    grad[block + k] -= v.signum() / tau;
                }
            }
        }
        if l.l1ball {
            for (idx, lambda) in [(l.log_r_a().unwrap(), h.lambda_a), (l.log_r_phi().unwrap(), h.lambda_phi)] {
                let w = z[idx];
                let r = w.exp();
                lp += lambda.ln() - lambda * r + w;
                grad[idx] += 1.0 - lambda * r;
            }
        }
        lp
    }

    /// Minimum distance of the position to a kink of either projection:
    /// `r - ||psi||_1` inside the ball, `min_i ||psi_i| - threshold|` outside.
    pub fn kink_margin(&self, z: &[f64]) -> f64 {
        let l = &self.layout;
        if !l.l1ball {
            return f64::INFINITY;
        }
        let mut margin = f64::INFINITY;
        for (block, idx) in [(l.psi_a(0), l.log_r_a().unwrap()), (l.psi_phi(0), l.log_r_phi().unwrap())] {
            let psi = &z[block..block + l.q];
            let r = z[idx].exp();
            let p = project_unchecked(psi, r);
            if p.inside() {
                margin = margin.min(r - psi.iter().map(|v| v.abs()).sum::<f64>());
            } else {
                for v in psi {
                    margin = margin.min((v.abs() - p.threshold).abs());
                }
            }
            for v in psi {
                margin = margin.min(v.abs());
            }
        }
        margin
    }

    /// Draws a random valid position from a broad neighbourhood of the
    /// data-driven starting point; used for testing gradients on diverse states.
    pub fn random_position<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Vec<f64> {
        let base = self.initial_point();
        let noise = Normal::new(0.0, scale).expect("positive scale");
        loop {
            let z: Vec<f64> = base.iter().map(|b| b + noise.sample(rng)).collect();
            if self.log_density(&z).is_finite() {
                return z;
            }
        }
    }

    fn constrained_values(&self, z: &[f64]) -> Vec<f64> {
        let (st, _) = self.decode_inner(z);
        let l = &self.layout;
        let mut out = Vec::with_capacity(self.constrained_len());
        out.extend(st.subjects.iter().map(|s| s.m));
        out.extend(st.subjects.iter().map(|s| s.alpha));
        out.extend(st.subjects.iter().map(|s| s.beta));
        out.extend(st.subjects.iter().map(|s| s.sigma));
        out.extend(st.subjects.iter().map(|s| s.amplitude));
        out.extend(st.subjects.iter().map(|s| s.phase));
        out.extend([st.lmu_m, st.lmu_beta, st.sigma_m, st.sigma_beta]);
        out.extend(&st.eta_a);
        out.extend(&st.eta_phi);
        if l.l1ball {
            out.extend(&st.psi_a);
            out.extend(&st.psi_phi);
            out.push(st.r_a.unwrap());
            out.push(st.r_phi.unwrap());
        }
        out
    }

    fn constrained_len(&self) -> usize {
        let l = &self.layout;
        6 * l.n + 4 + 2 * l.q + if l.l1ball { 2 * l.q + 2 } else { 0 }
    }
}

impl LogDensity for CalcModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let l = self.layout;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (st, _) = self.decode_inner(z);
        if !st.is_valid() {
            return f64::NEG_INFINITY;
        }

        let mut loglik = CompensatedSum::new();
        let mut d_eta_a = vec![0.0; l.q];
        let mut d_eta_phi = vec![0.0; l.q];
        let mut d_lmu_m = 0.0;
        let mut d_lmu_beta = 0.0;
        let mut d_log_sigma_m = 0.0;
        let mut d_log_sigma_beta = 0.0;
        for i in 0..l.n {
            let sp = &st.subjects[i];
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
            loglik.add(p.loglik);

            let d_log_m = p.d_m * sp.m;
            grad[l.z_m(i)] += d_log_m * st.sigma_m;
            d_lmu_m += d_log_m;
            d_log_sigma_m += d_log_m * st.sigma_m * z[l.z_m(i)];

            let d_log_beta = p.d_beta * sp.beta;
            grad[l.z_beta(i)] += d_log_beta * st.sigma_beta;
            d_lmu_beta += d_log_beta;
            d_log_sigma_beta += d_log_beta * st.sigma_beta * z[l.z_beta(i)];

            let b = 0.5 * (sp.alpha + 1.0);
            grad[l.alpha_raw(i)] += p.d_alpha * 2.0 * b * (1.0 - b);
            grad[l.log_sigma(i)] += p.d_log_sigma;

            let d_lin_a = p.d_a * sp.amplitude;
            let d_lin_phi = p.d_phi * sp.phase;
            for (k, x) in self.x.row(i).iter().enumerate() {
                d_eta_a[k] += x * d_lin_a;
                d_eta_phi[k] += x * d_lin_phi;
            }
        }
        let loglik = loglik.value();
        if !loglik.is_finite() {
            return f64::NEG_INFINITY;
        }
        grad[l.lmu_m()] += d_lmu_m;
        grad[l.lmu_beta()] += d_lmu_beta;
        grad[l.log_sigma_m()] += d_log_sigma_m;
        grad[l.log_sigma_beta()] += d_log_sigma_beta;

        let pa = l.psi_a(0);
        let pp = l.psi_phi(0);
        if l.l1ball {
            let ia = l.log_r_a().unwrap();
            let ip = l.log_r_phi().unwrap();
            let proj_a = st.projection_a.as_ref().unwrap();
            let proj_phi = st.projection_phi.as_ref().unwrap();
            let dr_a = project_vjp_into(&st.psi_a, proj_a, &d_eta_a, &mut grad[pa..pa + l.q]);
            let dr_phi = project_vjp_into(&st.psi_phi, proj_phi, &d_eta_phi, &mut grad[pp..pp + l.q]);
            grad[ia] += dr_a * st.r_a.unwrap();
            grad[ip] += dr_phi * st.r_phi.unwrap();
        } else {
            for k in 0..l.q {
                grad[pa + k] += d_eta_a[k];
                grad[pp + k] += d_eta_phi[k];
            }
        }

        let lp = self.log_prior_grad(z, &st, grad);
        let total = loglik + lp;
        if total.is_finite() && grad.iter().all(|g| g.is_finite()) {
            total
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl PosteriorModel for CalcModel {
    fn constrained_names(&self) -> Vec<String> {
        let l = &self.layout;
        let mut names = Vec::with_capacity(self.constrained_len());
        for block in ["m", "alpha", "beta", "sigma", "a", "phi"] {
            names.extend((1..=l.n).map(|i| format!("{block}[{i}]")));
        }
        names.extend(["lmu_m", "lmu_beta", "sigma_m", "sigma_beta"].map(String::from));
        names.extend((1..=l.q).map(|k| format!("eta_a[{k}]")));
        names.extend((1..=l.q).map(|k| format!("eta_phi[{k}]")));
        if l.l1ball {
            names.extend((1..=l.q).map(|k| format!("psi_a[{k}]")));
            names.extend((1..=l.q).map(|k| format!("psi_phi[{k}]")));
            names.push("r_a".into());
            names.push("r_phi".into());
        }
        names
    }

    fn constrain(&self, z: &[f64]) -> Vec<f64> {
        self.constrained_values(z)
    }

    fn unconstrain(&self, c: &[f64]) -> Result<Vec<f64>> {
        let l = &self.layout;
        if c.len() != self.constrained_len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} constrained values, got {}",
                self.constrained_len(),
                c.len()
            )));
        }
        let n = l.n;
        let q = l.q;
        let pop = 6 * n;
        let eta_a = 6 * n + 4;
        let (psi_a, psi_phi, r_a, r_phi) = if l.l1ball {
            let base = eta_a + 2 * q;
            (
                c[base..base + q].to_vec(),
                c[base + q..base + 2 * q].to_vec(),
                Some(c[base + 2 * q]),
                Some(c[base + 2 * q + 1]),
            )
        } else {
            (c[eta_a..eta_a + q].to_vec(), c[eta_a + q..eta_a + 2 * q].to_vec(), None, None)
        };
        self.encode(&CalcParams {
            m: c[0..n].to_vec(),
            alpha: c[n..2 * n].to_vec(),
            beta: c[2 * n..3 * n].to_vec(),
            sigma: c[3 * n..4 * n].to_vec(),
            lmu_m: c[pop],
            lmu_beta: c[pop + 1],
            sigma_m: c[pop + 2],
            sigma_beta: c[pop + 3],
            psi_a,
            psi_phi,
            r_a,
            r_phi,
        })
    }

    fn initial_point(&self) -> Vec<f64> {
        let l = &self.layout;
        let summaries: Vec<_> = self
            .subjects
            .iter()
            .map(|s| subject_summary(s, self.spec.epochs_per_hour))
            .collect();
        let log_m: Vec<f64> = summaries.iter().map(|s| s.minimum.ln()).collect();
        let lmu_m = crate::math::mean(&log_m);
        let sigma_m = crate::math::sd(&log_m).max(0.1);
        let beta0 = std::f64::consts::E;

        let log_amp: Vec<f64> = summaries.iter().map(|s| s.range.ln()).collect();
        let log_phase: Vec<f64> = summaries.iter().map(|s| s.peak_hour.ln()).collect();
        let eta_a = ridge_log_fit(&self.x, &log_amp, 1.0);
        let mut eta_phi = ridge_log_fit(&self.x, &log_phase, 1.0);
        // Shrink toward the origin until every acrophase is admissible.
        for _ in 0..60 {
            let ok = (0..l.n).all(|i| self.x.linear_predictor(i, &eta_phi).exp() <= 0.95 * PERIOD_HOURS);
            if ok {
                break;
            }
            eta_phi.iter_mut().for_each(|e| *e *= 0.5);
        }

        let (r_a, r_phi) = if l.l1ball {
            let h = &self.spec.hyper;
            let na: f64 = eta_a.iter().map(|v| v.abs()).sum();
            let np: f64 = eta_phi.iter().map(|v| v.abs()).sum();
            (
                Some((1.0 / h.lambda_a).max(1.05 * na + 1e-3)),
                Some((1.0 / h.lambda_phi).max(1.05 * np + 1e-3)),
            )
        } else {
            (None, None)
        };

        let params = CalcParams {
            m: summaries.iter().map(|s| s.minimum).collect(),
            alpha: vec![0.0; l.n],
            beta: vec![beta0; l.n],
            sigma: summaries.iter().map(|s| s.residual_sd).collect(),
            lmu_m,
            lmu_beta: beta0.ln(),
            sigma_m,
            sigma_beta: 0.5,
            psi_a: eta_a,
            psi_phi: eta_phi,
            r_a,
            r_phi,
        };
        self.encode(&params).expect("initial parameters are in range")
    }
}
