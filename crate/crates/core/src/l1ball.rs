//! The l1-ball projection prior.
//!
//! Latent coefficients `psi ~ iid DExp(0, tau)` and a radius `r ~ Expo(lambda)` are
//! mapped to `eta = argmin_{||s||_1 <= r} ||psi - s||_2`. The map is a soft
//! threshold, so `eta` has exact zeros with positive probability while the
//! latent space stays continuous.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the l1-ball prior for one coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1BallSpec {
    /// Scale of the double-exponential law on each latent coordinate.
    pub tau: f64,
    /// Rate of the exponential law on the radius.
    pub lambda: f64,
    pub dim: usize,
}

impl L1BallSpec {
    pub fn new(tau: f64, lambda: f64, dim: usize) -> Result<Self> {
        let spec = Self { tau, lambda, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidArgument("l1-ball dimension must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub eta: Vec<f64>,
    /// Indices with a nonzero projected value, ascending.
    pub active_set: Vec<usize>,
    /// Soft-threshold level; 0 when `psi` already lies inside the ball.
    pub threshold: f64,
}

impl ProjectionResult {
    pub fn inside(&self) -> bool {
        self.threshold == 0.0
    }
}

/// Euclidean projection of `psi` onto the l1 ball of radius `r`.
pub fn project(psi: &[f64], r: f64) -> Result<ProjectionResult> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive and finite, got {r}")));
    }
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("latent vector has non-finite entries".into()));
    }
    Ok(project_unchecked(psi, r))
}

/// Projection without argument validation; callers guarantee `r > 0` and finite `psi`.
pub fn project_unchecked(psi: &[f64], r: f64) -> ProjectionResult {
    let norm: f64 = psi.iter().map(|v| v.abs()).sum();
    if norm <= r {
        return ProjectionResult {
            eta: psi.to_vec(),
            active_set: (0..psi.len()).filter(|&i| psi[i] != 0.0).collect(),
            threshold: 0.0,
        };
    }

    // Descending |psi|; ties keep ascending index order (stable sort).
    let mut order: Vec<usize> = (0..psi.len()).collect();
    order.sort_by(|&i, &j| psi[j].abs().total_cmp(&psi[i].abs()));

    let mut cumsum = 0.0;
    let mut count = 0usize;
    let mut excess_at_count = 0.0;
    for (n, &idx) in order.iter().enumerate() {
        cumsum += psi[idx].abs();
        let excess = (cumsum - r).max(0.0);
        let k = n + 1;
        if psi[idx].abs() > excess / k as f64 {
            count = k;
            excess_at_count = excess;
        }
    }
    let threshold = excess_at_count / count as f64;

    let mut eta = vec![0.0; psi.len()];
    let mut active_set = Vec::with_capacity(count);
    for (i, &p) in psi.iter().enumerate() {
        let shrunk = p.abs() - threshold;
        if shrunk > 0.0 {
            eta[i] = p.signum() * shrunk;
            active_set.push(i);
        }
    }
    ProjectionResult {
        eta,
        active_set,
        threshold,
    }
}

/// Vector-Jacobian product of the projection.
///
/// Given `cotangent = dL/d eta`, returns `(dL/d psi, dL/d r)` using the active-set
/// Jacobian. At measure-zero kinks the active set reported by `result` decides.
pub fn project_vjp(psi: &[f64], result: &ProjectionResult, cotangent: &[f64]) -> (Vec<f64>, f64) {
    let mut d_psi = vec![0.0; psi.len()];
    let d_r = project_vjp_into(psi, result, cotangent, &mut d_psi);
    (d_psi, d_r)
}

/// In-place form of [`project_vjp`]; adds into `d_psi` and returns `dL/dr`.
pub fn project_vjp_into(
    psi: &[f64],
    result: &ProjectionResult,
    cotangent: &[f64],
    d_psi: &mut [f64],
) -> f64 {
    if result.inside() {
        for (d, g) in d_psi.iter_mut().zip(cotangent) {
            *d += g;
        }
        return 0.0;
    }
    let active = &result.active_set;
    if active.is_empty() {
        return 0.0;
    }
    let k = active.len() as f64;
    let signed: f64 = active.iter().map(|&i| cotangent[i] * psi[i].signum()).sum();
    for &j in active {
        d_psi[j] += cotangent[j] - psi[j].signum() * signed / k;
    }
    signed / k
}

/// One draw from the double-exponential law with the given scale.
pub fn sample_dexp<R: Rng + ?Sized>(tau: f64, rng: &mut R) -> f64 {
    let e: f64 = -(1.0 - rng.random::<f64>()).ln();
    if rng.random::<bool>() {
        tau * e
    } else {
        -tau * e
    }
}

pub fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

#[derive(Debug, Clone)]
pub struct PriorDraw {
    pub psi: Vec<f64>,
    pub r: f64,
    pub projection: ProjectionResult,
}

/// Exact draw from the generative l1-ball prior.
pub fn sample_prior<R: Rng + ?Sized>(spec: &L1BallSpec, rng: &mut R) -> PriorDraw {
    let psi: Vec<f64> = (0..spec.dim).map(|_| sample_dexp(spec.tau, rng)).collect();
    let mut r = sample_exponential(spec.lambda, rng);
    if r <= 0.0 {
        r = f64::MIN_POSITIVE;
    }
    let projection = project_unchecked(&psi, r);
    PriorDraw { psi, r, projection }
}

/// Log density of the latent coordinates and radius. The projection itself has
/// no density term.
pub fn log_prior_density(psi: &[f64], r: f64, spec: &L1BallSpec) -> f64 {
    if !(r > 0.0) {
        return f64::NEG_INFINITY;
    }
    log_dexp_sum(psi, spec.tau) + spec.lambda.ln() - spec.lambda * r
}

/// Sum of double-exponential log densities `-ln(2 tau) - |x| / tau`.
pub fn log_dexp_sum(xs: &[f64], tau: f64) -> f64 {
    let norm: f64 = xs.iter().map(|v| v.abs()).sum();
    -(xs.len() as f64) * (2.0 * tau).ln() - norm / tau
}
