//! Prior log densities in unconstrained coordinates, each returning
//! `(value, derivative)` with the transform Jacobian already included.

use crate::math::{expit, ln_beta, log_expit, HALF_LN_2PI};

#[inline]
pub(crate) fn standard_normal(z: f64) -> (f64, f64) {
    (-HALF_LN_2PI - 0.5 * z * z, -z)
}

/// Scaled Beta(a, b) prior on `alpha = 2 expit(u) - 1`, expressed in `u`.
#[inline]
pub(crate) fn alpha_log_prior(u: f64, a: f64, b: f64) -> (f64, f64) {
    let p = expit(u);
    (
        a * log_expit(u) + b * log_expit(-u) - ln_beta(a, b),
        a * (1.0 - p) - b * p,
    )
}

/// Half-Cauchy(0, scale) prior on `exp(s)`, expressed in `s`.
#[inline]
pub(crate) fn half_cauchy_log_scale(s: f64, scale: f64) -> (f64, f64) {
    let x = (s - scale.ln()).exp();
    let log1p_x2 = if x > 1e100 {
        2.0 * x.ln()
    } else {
        (x * x).ln_1p()
    };
    let value = std::f64::consts::LN_2 - std::f64::consts::PI.ln() - scale.ln() - log1p_x2 + s;
    let frac = if x > 1e100 { 1.0 } else { x * x / (1.0 + x * x) };
    (value, 1.0 - 2.0 * frac)
}

/// Uniform prior on `lo + width * expit(u)`, expressed in `u`.
#[inline]
pub(crate) fn uniform_logit(u: f64) -> (f64, f64) {
    let p = expit(u);
    (log_expit(u) + log_expit(-u), 1.0 - 2.0 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &x in &[-3.0, -0.4, 0.0, 0.7, 2.5] {
            let (_, d) = standard_normal(x);
            assert!((d - fd(|v| standard_normal(v).0, x)).abs() < 1e-7);
            let (_, d) = alpha_log_prior(x, 2.0, 3.5);
            assert!((d - fd(|v| alpha_log_prior(v, 2.0, 3.5).0, x)).abs() < 1e-7);
            let (_, d) = half_cauchy_log_scale(x, 0.7);
            assert!((d - fd(|v| half_cauchy_log_scale(v, 0.7).0, x)).abs() < 1e-7);
            let (_, d) = uniform_logit(x);
            assert!((d - fd(|v| uniform_logit(v).0, x)).abs() < 1e-7);
        }
    }

    #[test]
    fn uniform_alpha_density_at_center() {
        // Beta(1,1) on (-1,1) has density 1/2; at u = 0 the Jacobian is 2 * 1/4.
        let (v, _) = alpha_log_prior(0.0, 1.0, 1.0);
        assert!((v - (0.5f64.ln() + (0.5f64).ln())).abs() < 1e-14);
    }

    #[test]
    fn half_cauchy_integrates_to_one() {
        // Integrate exp(log density in s) over s with the trapezoid rule.
        let (lo, hi, n) = (-40.0, 40.0, 400_000);
        let h = (hi - lo) / n as f64;
        let total: f64 = (0..=n)
            .map(|k| {
                let s = lo + k as f64 * h;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                w * half_cauchy_log_scale(s, 1.3).0.exp()
            })
            .sum::<f64>()
            * h;
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }
}
