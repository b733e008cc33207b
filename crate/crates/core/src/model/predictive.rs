use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::types::{circadian_mean_unchecked, ModelSpec, SubjectParams};

/// One posterior predictive trajectory at the given epochs:
/// `y*_t ~ Normal(mean(t), sigma^2)`, optionally truncated at zero.
pub fn posterior_predictive_draw<R: Rng + ?Sized>(
    sp: &SubjectParams,
    t_index: &[u32],
    spec: &ModelSpec,
    truncate_at_zero: bool,
    rng: &mut R,
) -> Vec<f64> {
    let noise = Normal::new(0.0, sp.sigma.max(0.0)).expect("finite sigma");
    t_index
        .iter()
        .map(|&t| {
            let mu = circadian_mean_unchecked(spec.hours(t), sp, spec);
            let y = if sp.sigma > 0.0 { mu + noise.sample(rng) } else { mu };
            if truncate_at_zero {
                y.max(0.0)
            } else {
                y
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp(sigma: f64) -> SubjectParams {
        SubjectParams {
            m: 0.2,
            alpha: -0.3,
            beta: 6.0,
            sigma,
            amplitude: 2.0,
            phase: 14.0,
        }
    }

    #[test]
    fn zero_noise_reproduces_mean() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        let t: Vec<u32> = (1..=100).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draw = posterior_predictive_draw(&sp(0.0), &t, &spec, false, &mut rng);
        for (k, &ti) in t.iter().enumerate() {
            assert_eq!(draw[k], circadian_mean_unchecked(spec.hours(ti), &sp(0.0), &spec));
        }
    }

    #[test]
    fn truncation_is_non_negative() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        let t: Vec<u32> = (1..=500).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draw = posterior_predictive_draw(&sp(3.0), &t, &spec, true, &mut rng);
        assert!(draw.iter().all(|&v| v >= 0.0));
        assert!(draw.contains(&0.0));
    }

    #[test]
    fn empirical_sd_matches_sigma() {
        let spec = ModelSpec::new(Variant::CalcL1ball, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = sp(0.8);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| posterior_predictive_draw(&p, &[37], &spec, false, &mut rng)[0])
            .collect();
        let s = crate::math::sd(&draws);
        assert!((s / 0.8 - 1.0).abs() < 0.02, "{s}");
    }
}
