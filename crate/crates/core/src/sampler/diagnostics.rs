//! Convergence diagnostics: rank-normalized split R-hat and effective sample
//! sizes from the initial monotone sequence estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean, norm_quantile, variance};

/// An R-hat value and whether the input had no variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rhat {
    pub value: f64,
    pub degenerate: bool,
}

fn check(chains: &[&[f64]]) -> Result<usize> {
    if chains.is_empty() {
        return Err(Error::InvalidArgument("no chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch("chains have different lengths".into()));
    }
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 draws per chain, got {n}")));
    }
    Ok(n)
}

/// Splits every chain into a first and second half (dropping the middle
/// draw of odd-length chains).
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

fn is_constant(chains: &[Vec<f64>]) -> bool {
    let first = chains[0][0];
    chains.iter().flatten().all(|&x| x == first || (x.is_nan() && first.is_nan()))
}

/// Normal scores of the pooled ranks (average ranks for ties).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let flat: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = flat.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| flat[a].total_cmp(&flat[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && flat[order[j + 1]] == flat[order[i]] {
            j += 1;
        }
        let avg = 0.5 * ((i + 1) + (j + 1)) as f64;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    let mut out = Vec::with_capacity(chains.len());
    let mut pos = 0;
    for c in chains {
        out.push(
            (0..c.len())
                .map(|k| norm_quantile((ranks[pos + k] - 0.375) / (s as f64 + 0.25)))
                .collect(),
        );
        pos += c.len();
    }
    out
}

fn basic_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / chains.len() as f64;
    let b_over_n = if chains.len() > 1 { variance(&means) } else { 0.0 };
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

/// Rank-normalized split R-hat: the larger of the bulk and folded (tail) versions.
pub fn rhat(chains: &[&[f64]]) -> Result<Rhat> {
    check(chains)?;
    let halves = split(chains);
    if is_constant(&halves) || halves.iter().flatten().any(|x| !x.is_finite()) {
        return Ok(Rhat {
            value: 1.0,
            degenerate: true,
        });
    }
    let bulk = basic_rhat(&rank_normalize(&halves));
    let flat: Vec<f64> = halves.iter().flatten().copied().collect();
    let med = crate::math::median(&flat);
    let folded: Vec<Vec<f64>> = halves.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let tail = if is_constant(&folded) {
        1.0
    } else {
        basic_rhat(&rank_normalize(&folded))
    };
    Ok(Rhat {
        value: bulk.max(tail),
        degenerate: false,
    })
}

/// Multi-chain effective sample size (Geyer initial monotone sequence).
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    // Biased autocovariance of each chain at a given lag.
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| (0..n - lag).map(|i| (c[i] - mu) * (c[i + lag] - mu)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let acov0 = acov(0);
    let mean_var = acov0 * n as f64 / (n as f64 - 1.0);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += variance(&means);
    }
    let rho = |lag: usize| 1.0 - (mean_var - acov(lag)) / var_plus;

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[1] = odd;
    let mut t = 1;
    while t + 4 < n && (even + odd).is_finite() && even + odd > 0.0 {
        even = rho(t + 1);
        odd = rho(t + 2);
        if even + odd >= 0.0 {
            rho_hat[t + 1] = even;
            rho_hat[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 && max_t + 1 < n {
        rho_hat[max_t + 1] = even;
    }
    let mut t = 1;
    while t + 3 <= max_t {
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t] {
            rho_hat[t + 1] = 0.5 * (rho_hat[t - 1] + rho_hat[t]);
            rho_hat[t + 2] = rho_hat[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = (-1.0 + 2.0 * rho_hat[..max_t].iter().sum::<f64>() + rho_hat.get(max_t + 1).copied().unwrap_or(0.0)).max(1.0 / total.log10());
    total / tau
}

/// Bulk effective sample size (on rank-normalized split chains). `NaN` for
/// constant input.
pub fn ess_bulk(chains: &[&[f64]]) -> Result<f64> {
    check(chains)?;
    let halves = split(chains);
    if is_constant(&halves) || halves.iter().flatten().any(|x| !x.is_finite()) {
        return Ok(f64::NAN);
    }
    Ok(ess_raw(&rank_normalize(&halves)))
}

/// Effective sample size for the mean (split chains, no rank transform).
pub fn ess_mean(chains: &[&[f64]]) -> Result<f64> {
    check(chains)?;
    let halves = split(chains);
    if is_constant(&halves) || halves.iter().flatten().any(|x| !x.is_finite()) {
        return Ok(f64::NAN);
    }
    Ok(ess_raw(&halves))
}

/// Monte Carlo standard error of the posterior mean.
pub fn mcse_mean(chains: &[&[f64]]) -> Result<f64> {
    let ess = ess_mean(chains)?;
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    if ess.is_nan() {
        return Ok(0.0);
    }
    Ok(crate::math::sd(&pooled) / ess.sqrt())
}

/// Per-parameter diagnostics of a multi-chain run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub rhat: Vec<f64>,
    pub rhat_degenerate: Vec<bool>,
    pub ess_bulk: Vec<f64>,
    pub divergence_count: usize,
    pub rejection_count: usize,
    pub warmup_divergence_count: usize,
    pub total_iterations: usize,
}

impl Diagnostics {
    /// Largest R-hat over non-degenerate parameters (1 if there are none).
    pub fn max_rhat(&self) -> f64 {
        self.rhat
            .iter()
            .zip(&self.rhat_degenerate)
            .filter(|(_, d)| !**d)
            .map(|(r, _)| *r)
            .fold(1.0, f64::max)
    }

    pub fn divergence_rate(&self) -> f64 {
        if self.total_iterations == 0 {
            0.0
        } else {
            self.divergence_count as f64 / self.total_iterations as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_draws(seed: u64, mean: f64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mean, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn identical_constant_chains_are_degenerate() {
        let c = vec![2.5; 100];
        let r = rhat(&[&c, &c]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
        assert!(r.degenerate);
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        // Between-chain variance 6.25 vs within 1: R-hat near sqrt(1 + 6.25 / 1) on the
        // original scale; rank normalization keeps it far above 1.5.
        let a = normal_draws(1, 0.0, 1000);
        let b = normal_draws(2, 5.0, 1000);
        let r = rhat(&[&a, &b]).unwrap();
        assert!(r.value > 1.5, "{}", r.value);
    }

    #[test]
    fn iid_rhat_near_one() {
        let a = normal_draws(3, 0.0, 1000);
        let b = normal_draws(4, 0.0, 1000);
        let r = rhat(&[&a, &b]).unwrap();
        assert!(r.value < 1.01, "{}", r.value);
    }

    #[test]
    fn iid_ess_close_to_n() {
        let a = normal_draws(5, 0.0, 10_000);
        let e = ess_bulk(&[&a]).unwrap();
        assert!((0.8..=1.2).contains(&(e / 10_000.0)), "{e}");
        let e = ess_mean(&[&a]).unwrap();
        assert!((0.8..=1.2).contains(&(e / 10_000.0)), "{e}");
    }

    #[test]
    fn ar1_ess_matches_theory() {
        // AR(1) with coefficient rho: ESS/n -> (1 - rho) / (1 + rho).
        let rho = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = 0.0;
        let draws: Vec<f64> = (0..20_000)
            .map(|_| {
                x = rho * x + noise.sample(&mut rng);
                x
            })
            .collect();
        let ratio = ess_mean(&[&draws]).unwrap() / 20_000.0;
        let expect = (1.0 - rho) / (1.0 + rho);
        assert!((ratio - expect).abs() < 0.05, "{ratio} vs {expect}");
    }

    #[test]
    fn stuck_chain_flags_nonconvergence() {
        let moving = normal_draws(6, 0.0, 500);
        let stuck = vec![3.0; 500];
        let r = rhat(&[&moving, &stuck]).unwrap();
        assert!(r.value > 1.1, "{}", r.value);
    }

    #[test]
    fn too_few_draws_rejected() {
        let c = [1.0, 2.0, 3.0];
        assert!(rhat(&[&c]).is_err());
    }
}
