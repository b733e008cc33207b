/// A differentiable log density on an unconstrained real vector space.
///
/// Implementations return `f64::NEG_INFINITY` for states outside the support
/// (for example an acrophase outside [0, 24]); the gradient buffer is then
/// unspecified. Implementations must be reentrant.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Log density at `position`; writes the gradient into `grad`.
    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> f64;

    fn log_density(&self, position: &[f64]) -> f64 {
        let mut grad = vec![0.0; self.dim()];
        self.log_density_grad(position, &mut grad)
    }
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        (**self).log_density_grad(position, grad)
    }

    fn log_density(&self, position: &[f64]) -> f64 {
        (**self).log_density(position)
    }
}

/// Adapter turning a closure into a [`LogDensity`].
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LogDensity for FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(position, grad)
    }
}

/// A posterior with a constrained-space view, as needed for storing draws.
pub trait PosteriorModel: LogDensity {
    /// Names of the constrained-view quantities emitted per draw.
    fn constrained_names(&self) -> Vec<String>;

    /// Constrained-view values for an unconstrained position.
    fn constrain(&self, position: &[f64]) -> Vec<f64>;

    /// Inverse of [`PosteriorModel::constrain`] on the quantities it needs.
    fn unconstrain(&self, constrained: &[f64]) -> crate::Result<Vec<f64>>;

    /// Deterministic data-driven starting point.
    fn initial_point(&self) -> Vec<f64>;
}
