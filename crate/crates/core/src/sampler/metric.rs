//! Euclidean metrics for the kinetic energy.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Diag,
    Dense,
}

/// Inverse metric `M^{-1}` (an estimate of the posterior covariance).
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Diag(Vec<f64>),
    Dense {
        inv: DMatrix<f64>,
        /// Lower Cholesky factor of `inv`.
        chol: DMatrix<f64>,
    },
}

impl Metric {
    pub fn unit(kind: MetricKind, dim: usize) -> Self {
        match kind {
            MetricKind::Diag => Metric::Diag(vec![1.0; dim]),
            MetricKind::Dense => Metric::Dense {
                inv: DMatrix::identity(dim, dim),
                chol: DMatrix::identity(dim, dim),
            },
        }
    }

    pub fn dense(inv: DMatrix<f64>) -> Result<Self> {
        let chol = inv
            .clone()
            .cholesky()
            .ok_or_else(|| Error::FitFailure("adapted covariance is not positive definite".into()))?
            .l();
        Ok(Metric::Dense { inv, chol })
    }

    /// `M^{-1} p`
    pub fn velocity(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Metric::Diag(d) => p.iter().zip(d).map(|(p, m)| p * m).collect(),
            Metric::Dense { inv, .. } => {
                let n = p.len();
                let mut out = vec![0.0; n];
                for (j, pj) in p.iter().enumerate() {
                    let col = inv.column(j);
                    for (o, c) in out.iter_mut().zip(col.iter()) {
                        *o += c * pj;
                    }
                }
                out
            }
        }
    }

    /// `0.5 p' M^{-1} p`
    pub fn kinetic_energy(&self, p: &[f64]) -> f64 {
        match self {
            Metric::Diag(d) => 0.5 * p.iter().zip(d).map(|(p, m)| p * p * m).sum::<f64>(),
            Metric::Dense { .. } => 0.5 * self.velocity(p).iter().zip(p).map(|(v, p)| v * p).sum::<f64>(),
        }
    }

    /// Momentum from `N(0, M)`.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Metric::Diag(d) => d.iter().map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt()).collect(),
            Metric::Dense { chol, .. } => {
                // With M^{-1} = L L', solving L' p = z gives Cov(p) = M.
                let z = DVector::from_iterator(chol.nrows(), (0..chol.nrows()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let p = chol
                    .transpose()
                    .solve_upper_triangular(&z)
                    .expect("Cholesky factor has a positive diagonal");
                p.iter().copied().collect()
            }
        }
    }

    /// Diagonal of `M^{-1}`.
    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Metric::Diag(d) => d.clone(),
            Metric::Dense { inv, .. } => inv.diagonal().iter().copied().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_identity_matches_diag() {
        let p = [0.3, -1.2, 2.0];
        let a = Metric::unit(MetricKind::Diag, 3);
        let b = Metric::unit(MetricKind::Dense, 3);
        assert_eq!(a.velocity(&p), b.velocity(&p));
        assert!((a.kinetic_energy(&p) - b.kinetic_energy(&p)).abs() < 1e-15);
    }

    #[test]
    fn dense_momentum_covariance_is_inverse() {
        let inv = DMatrix::from_row_slice(2, 2, &[2.0, 0.9, 0.9, 1.0]);
        let m = Metric::dense(inv.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut cov = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let p = DVector::from_vec(m.sample_momentum(&mut rng));
            cov += &p * p.transpose();
        }
        cov /= n as f64;
        let expect = inv.try_inverse().unwrap();
        assert!((cov - expect).abs().max() < 0.03);
    }
}
