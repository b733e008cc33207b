//! Monte Carlo elicitation of the l1-ball hyperparameters: `tau` from a
//! bound on the magnitude of `exp(x' eta)`, then `lambda` from a target
//! prior sparsity.
//!
//! Every candidate on a grid is evaluated on the same underlying random
//! draws, so the estimates are monotone in the candidate value and the
//! selection is insensitive to Monte Carlo noise between neighbours.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1ball::project_unchecked;
use crate::math::{mean, quantile_sorted, sd};
use crate::model::CovariateMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientRole {
    Amplitude,
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElicitationTargets {
    /// Target prior fraction of exactly-zero coefficients.
    pub xi: f64,
    /// Upper bound on the magnitude (amplitude units or hours).
    pub q: f64,
    /// Probability attached to the bound.
    pub p: f64,
    pub role: CoefficientRole,
}

impl ElicitationTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidArgument(format!("xi must lie in (0, 1), got {}", self.xi)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidArgument(format!("q must be positive, got {}", self.q)));
        }
        Ok(())
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

impl McEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let se = if xs.len() > 1 { sd(xs) / (xs.len() as f64).sqrt() } else { f64::NAN };
        Self { value: mean(xs), se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElicitationConfig {
    pub grid_tau: Vec<f64>,
    pub grid_lambda: Vec<f64>,
    pub mc_iters: usize,
}

impl Default for ElicitationConfig {
    fn default() -> Self {
        Self {
            grid_tau: log_grid(0.01, 10.0, 60),
            grid_lambda: log_grid(0.05, 20.0, 60),
            mc_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationResult {
    pub role: CoefficientRole,
    pub targets: ElicitationTargets,
    pub tau_hat: f64,
    pub lambda_hat: f64,
    pub grid_tau: Vec<f64>,
    pub grid_lambda: Vec<f64>,
    /// Magnitude estimate for each `tau` candidate.
    pub achieved_q: Vec<McEstimate>,
    /// Sparsity estimate for each `lambda` candidate at `tau_hat`.
    pub achieved_xi: Vec<McEstimate>,
    pub mc_iters: usize,
}

/// `j` points spaced evenly on the log scale from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, j: usize) -> Vec<f64> {
    if j == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..j).map(|k| (a + (b - a) * k as f64 / (j - 1) as f64).exp()).collect()
}

/// Index of the smallest `|estimate - target|`; ties go to the earlier
/// (smaller) candidate.
fn argmin_abs(estimates: &[McEstimate], target: f64) -> usize {
    let mut best = 0;
    for (k, e) in estimates.iter().enumerate() {
        if (e.value - target).abs() < (estimates[best].value - target).abs() {
            best = k;
        }
    }
    best
}

fn check_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("{name} grid values must be positive")));
    }
    Ok(())
}

/// Standard Laplace variate (unit scale).
fn std_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    if rng.random::<bool>() {
        e
    } else {
        -e
    }
}

/// Unit-scale draws from the spike-and-Laplace law: zero with probability `xi`.
fn spike_draws<R: Rng + ?Sized>(xi: f64, q: usize, s: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..s)
        .map(|_| {
            (0..q)
                .map(|_| {
                    let spike = rng.random::<f64>() < xi;
                    let l = std_laplace(rng);
                    if spike {
                        0.0
                    } else {
                        l
                    }
                })
                .collect()
        })
        .collect()
}

/// Per draw, the empirical `p`-quantile over subjects of `exp(x_i' (tau * u))`.
fn magnitude_quantiles(x: &CovariateMatrix, unit: &[Vec<f64>], tau: f64, p: f64) -> Vec<f64> {
    let mut scratch = vec![0.0; x.rows()];
    unit.iter()
        .map(|u| {
            for (i, v) in scratch.iter_mut().enumerate() {
                *v = (tau * x.linear_predictor(i, u)).exp();
            }
            scratch.sort_by(f64::total_cmp);
            quantile_sorted(&scratch, p)
        })
        .collect()
}

fn check_x(x: &CovariateMatrix) -> Result<()> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::InvalidArgument("covariate matrix is empty".into()));
    }
    if x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("covariate matrix has missing or non-finite values".into()));
    }
    Ok(())
}

/// Stage one: choose `tau` so that the averaged per-draw `p`-quantile of the
/// subject magnitudes is closest to `q`.
pub fn elicit_tau<R: Rng + ?Sized>(
    targets: &ElicitationTargets,
    x: &CovariateMatrix,
    grid_tau: &[f64],
    s: usize,
    rng: &mut R,
) -> Result<(f64, Vec<McEstimate>)> {
    targets.validate()?;
    check_grid(grid_tau, "tau")?;
    check_x(x)?;
    if s == 0 {
        return Err(Error::InvalidArgument("Monte Carlo size must be positive".into()));
    }
    let unit = spike_draws(targets.xi, x.cols(), s, rng);
    let estimates: Vec<McEstimate> = grid_tau
        .par_iter()
        .map(|&tau| McEstimate::from_samples(&magnitude_quantiles(x, &unit, tau, targets.p)))
        .collect();
    let k = argmin_abs(&estimates, targets.q);
    Ok((grid_tau[k], estimates))
}

/// Unit draws for the generative l1-ball prior: standard Laplace latent
/// coefficients and a standard exponential radius.
fn l1ball_unit_draws<R: Rng + ?Sized>(q: usize, s: usize, rng: &mut R) -> Vec<(Vec<f64>, f64)> {
    (0..s)
        .map(|_| {
            let psi = (0..q).map(|_| std_laplace(rng)).collect();
            let e: f64 = Exp1.sample(rng);
            (psi, e)
        })
        .collect()
}

fn zero_fractions(unit: &[(Vec<f64>, f64)], tau: f64, lambda: f64) -> Vec<f64> {
    let mut psi = Vec::new();
    unit.iter()
        .map(|(u, e)| {
            psi.clear();
            psi.extend(u.iter().map(|v| tau * v));
            let eta = project_unchecked(&psi, e / lambda).eta;
            eta.iter().filter(|v| **v == 0.0).count() as f64 / eta.len() as f64
        })
        .collect()
}

/// Stage two: choose `lambda` so the prior zero fraction of the projected
/// coefficients is closest to `xi`.
pub fn elicit_lambda<R: Rng + ?Sized>(
    tau_hat: f64,
    targets: &ElicitationTargets,
    q_dim: usize,
    grid_lambda: &[f64],
    s: usize,
    rng: &mut R,
) -> Result<(f64, Vec<McEstimate>)> {
    targets.validate()?;
    check_grid(grid_lambda, "lambda")?;
    if !(tau_hat > 0.0 && tau_hat.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau_hat}")));
    }
    if q_dim == 0 || s == 0 {
        return Err(Error::InvalidArgument("dimension and Monte Carlo size must be positive".into()));
    }
    let unit = l1ball_unit_draws(q_dim, s, rng);
    let estimates: Vec<McEstimate> = grid_lambda
        .par_iter()
        .map(|&lambda| McEstimate::from_samples(&zero_fractions(&unit, tau_hat, lambda)))
        .collect();
    let k = argmin_abs(&estimates, targets.xi);
    Ok((grid_lambda[k], estimates))
}

/// Expected zero fraction of `Q` projected coefficients under l1-ball(tau, lambda).
pub fn prior_sparsity_estimate<R: Rng + ?Sized>(tau: f64, lambda: f64, q: usize, s: usize, rng: &mut R) -> McEstimate {
    let unit = l1ball_unit_draws(q, s, rng);
    McEstimate::from_samples(&zero_fractions(&unit, tau, lambda))
}

/// Averaged per-draw `p`-quantile of `exp(x_i' eta)` under the
/// spike-and-Laplace law with spike weight `xi` and scale `tau`.
pub fn prior_magnitude_quantile<R: Rng + ?Sized>(
    tau: f64,
    xi: f64,
    x: &CovariateMatrix,
    p: f64,
    s: usize,
    rng: &mut R,
) -> McEstimate {
    let unit = spike_draws(xi, x.cols(), s, rng);
    McEstimate::from_samples(&magnitude_quantiles(x, &unit, tau, p))
}

/// Fraction of exact zeros among coefficient draws (rows are draws).
pub fn sparsity_of_draws(draws: &[Vec<f64>]) -> McEstimate {
    let fractions: Vec<f64> = draws
        .iter()
        .map(|d| d.iter().filter(|v| **v == 0.0).count() as f64 / d.len().max(1) as f64)
        .collect();
    McEstimate::from_samples(&fractions)
}

/// Both stages for one coefficient vector.
pub fn elicit<R: Rng + ?Sized>(
    targets: &ElicitationTargets,
    x: &CovariateMatrix,
    config: &ElicitationConfig,
    rng: &mut R,
) -> Result<ElicitationResult> {
    let (tau_hat, achieved_q) = elicit_tau(targets, x, &config.grid_tau, config.mc_iters, rng)?;
    let (lambda_hat, achieved_xi) = elicit_lambda(tau_hat, targets, x.cols(), &config.grid_lambda, config.mc_iters, rng)?;
    Ok(ElicitationResult {
        role: targets.role,
        targets: *targets,
        tau_hat,
        lambda_hat,
        grid_tau: config.grid_tau.clone(),
        grid_lambda: config.grid_lambda.clone(),
        achieved_q,
        achieved_xi,
        mc_iters: config.mc_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn targets(xi: f64, q: f64) -> ElicitationTargets {
        ElicitationTargets {
            xi,
            q,
            p: 0.95,
            role: CoefficientRole::Amplitude,
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(0.01, 10.0, 60);
        assert_eq!(g.len(), 60);
        assert!((g[0] - 0.01).abs() < 1e-15);
        assert!((g[59] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_covariates_give_unit_magnitude() {
        let x = CovariateMatrix::zeros(12, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (tau, est) = elicit_tau(&targets(0.5, 3.0), &x, &[0.1, 1.0, 5.0], 500, &mut rng).unwrap();
        assert!(est.iter().all(|e| e.value == 1.0));
        // All candidates tie, so the smallest wins.
        assert_eq!(tau, 0.1);
    }

    #[test]
    fn huge_radius_leaves_nothing_sparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = prior_sparsity_estimate(1.0, 1e-6, 15, 2000, &mut rng);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn lambda_estimates_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = log_grid(0.05, 20.0, 15);
        let (_, est) = elicit_lambda(1.0, &targets(0.9, 8.0), 15, &grid, 3000, &mut rng).unwrap();
        assert!(est.windows(2).all(|w| w[1].value >= w[0].value));
    }

    #[test]
    fn empty_grid_rejected() {
        let x = CovariateMatrix::zeros(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(elicit_tau(&targets(0.5, 3.0), &x, &[], 10, &mut rng).is_err());
        assert!(elicit_lambda(1.0, &targets(0.5, 3.0), 2, &[], 10, &mut rng).is_err());
    }

    #[test]
    fn lasso_draws_have_no_zeros() {
        let draws = vec![vec![0.3, -1.2], vec![0.01, 2.0]];
        assert_eq!(sparsity_of_draws(&draws).value, 0.0);
    }
}
