use super::metric::Metric;
use crate::density::LogDensity;

/// Position, momentum and cached log density / gradient.
#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    pub fn new<D: LogDensity + ?Sized>(density: &D, position: Vec<f64>, momentum: Vec<f64>) -> Self {
        let mut grad = vec![0.0; position.len()];
        let log_density = density.log_density_grad(&position, &mut grad);
        Self {
            position,
            momentum,
            log_density,
            grad,
        }
    }

    /// `0.5 p' M^{-1} p`
    pub fn kinetic_energy(&self, metric: &Metric) -> f64 {
        metric.kinetic_energy(&self.momentum)
    }

    /// Total energy; `+inf` outside the support.
    pub fn hamiltonian(&self, metric: &Metric) -> f64 {
        if self.log_density == f64::NEG_INFINITY || self.log_density.is_nan() {
            return f64::INFINITY;
        }
        -self.log_density + self.kinetic_energy(metric)
    }

    /// Velocity `M^{-1} p`.
    pub fn velocity(&self, metric: &Metric) -> Vec<f64> {
        metric.velocity(&self.momentum)
    }

    pub fn is_valid(&self) -> bool {
        self.log_density.is_finite()
    }
}

/// One half-kick / drift / half-kick step of size `step` (negative steps
/// integrate backwards).
pub fn leapfrog<D: LogDensity + ?Sized>(density: &D, point: &mut PhasePoint, step: f64, metric: &Metric) {
    for (p, g) in point.momentum.iter_mut().zip(&point.grad) {
        *p += 0.5 * step * g;
    }
    let v = metric.velocity(&point.momentum);
    for (q, v) in point.position.iter_mut().zip(&v) {
        *q += step * v;
    }
    point.log_density = density.log_density_grad(&point.position, &mut point.grad);
    if !point.log_density.is_finite() {
        return;
    }
    for (p, g) in point.momentum.iter_mut().zip(&point.grad) {
        *p += 0.5 * step * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnDensity;

    fn gaussian() -> FnDensity<impl Fn(&[f64], &mut [f64]) -> f64 + Sync> {
        FnDensity::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = -x[0];
            -0.5 * x[0] * x[0]
        })
    }

    #[test]
    fn reversible() {
        let d = FnDensity::new(2, |x: &[f64], g: &mut [f64]| {
            g[0] = -x[0] - 0.3 * x[0].powi(3);
            g[1] = -2.0 * x[1];
            -0.5 * x[0] * x[0] - 0.075 * x[0].powi(4) - x[1] * x[1]
        });
        let inv_mass = Metric::Diag(vec![1.0, 0.5]);
        let start = PhasePoint::new(&d, vec![0.4, -1.2], vec![0.7, 0.1]);
        let mut pt = start.clone();
        for _ in 0..50 {
            leapfrog(&d, &mut pt, 0.05, &inv_mass);
        }
        pt.momentum.iter_mut().for_each(|p| *p = -*p);
        for _ in 0..50 {
            leapfrog(&d, &mut pt, 0.05, &inv_mass);
        }
        for (a, b) in pt.position.iter().zip(&start.position) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in pt.momentum.iter().zip(&start.momentum) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_oscillator_energy_error_is_small() {
        let d = gaussian();
        let inv_mass = Metric::Diag(vec![1.0]);
        let mut pt = PhasePoint::new(&d, vec![1.0], vec![0.5]);
        let h0 = pt.hamiltonian(&inv_mass);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            leapfrog(&d, &mut pt, 0.01, &inv_mass);
            worst = worst.max((pt.hamiltonian(&inv_mass) - h0).abs());
        }
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn free_particle_drifts_exactly() {
        let d = FnDensity::new(2, |_x: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|v| *v = 0.0);
            0.0
        });
        let inv_mass = Metric::Diag(vec![0.5, 4.0]);
        let mut pt = PhasePoint::new(&d, vec![1.0, 2.0], vec![3.0, -1.0]);
        leapfrog(&d, &mut pt, 0.1, &inv_mass);
        assert_eq!(pt.position, vec![1.0 + 0.1 * 3.0 * 0.5, 2.0 - 0.1 * 4.0]);
        assert_eq!(pt.momentum, vec![3.0, -1.0]);
    }
}
