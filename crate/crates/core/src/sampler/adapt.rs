//! Warmup adaptation: dual averaging of the step size and windowed
//! estimation of a diagonal or dense inverse metric.

use rand::Rng;

use nalgebra::DMatrix;

use super::leapfrog::{leapfrog, PhasePoint};
use super::metric::{Metric, MetricKind};
use crate::density::LogDensity;
use crate::error::{Error, Result};

/// Dual-averaging controller for the log step size.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(target: f64, initial_step: f64) -> Self {
        Self {
            target,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            mu: (10.0 * initial_step).ln(),
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    /// Restarts the averages around a new initial step size.
    pub fn restart(&mut self, initial_step: f64) {
        *self = Self::new(self.target, initial_step);
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        let accept_stat = if accept_stat.is_nan() { 0.0 } else { accept_stat.min(1.0) };
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept_stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// The averaged step size used after warmup.
    pub fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Streaming mean and variance per coordinate.
#[derive(Debug, Clone)]
pub struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Sample variances (n - 1 denominator).
    pub fn variance(&self) -> Vec<f64> {
        let d = (self.n.max(2) - 1) as f64;
        self.m2.iter().map(|s| s / d).collect()
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.mean.iter_mut().for_each(|m| *m = 0.0);
        self.m2.iter_mut().for_each(|m| *m = 0.0);
    }
}

pub const INIT_BUFFER: usize = 75;
pub const TERM_BUFFER: usize = 50;
pub const BASE_WINDOW: usize = 25;
/// Shortest warmup that accommodates the buffers and one window.
pub const MIN_ADAPT_WARMUP: usize = INIT_BUFFER + BASE_WINDOW + TERM_BUFFER;

/// Expanding variance windows between a fast initial and a fast terminal buffer.
#[derive(Debug, Clone)]
pub struct WindowedMetric {
    kind: MetricKind,
    num_warmup: usize,
    counter: usize,
    window_size: usize,
    next_window: usize,
    estimator: Welford,
    /// Running sum of outer products of centred draws (dense metric only).
    cross: Option<DMatrix<f64>>,
}

impl WindowedMetric {
    pub fn new(kind: MetricKind, dim: usize, num_warmup: usize) -> Result<Self> {
        if num_warmup < MIN_ADAPT_WARMUP {
            return Err(Error::InvalidArgument(format!(
                "warmup of {num_warmup} iterations is shorter than the {MIN_ADAPT_WARMUP} needed for adaptation"
            )));
        }
        Ok(Self {
            kind,
            num_warmup,
            counter: 0,
            window_size: BASE_WINDOW,
            next_window: INIT_BUFFER + BASE_WINDOW - 1,
            estimator: Welford::new(dim),
            cross: (kind == MetricKind::Dense).then(|| DMatrix::zeros(dim, dim)),
        })
    }

    fn in_window(&self) -> bool {
        self.counter >= INIT_BUFFER && self.counter < self.num_warmup - TERM_BUFFER && self.counter != self.num_warmup
    }

    fn end_of_window(&self) -> bool {
        self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.num_warmup - TERM_BUFFER - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last {
            let boundary = self.next_window + 2 * self.window_size;
            if boundary >= self.num_warmup - TERM_BUFFER {
                self.next_window = last;
            }
        }
    }

    /// Records a warmup position. Returns a regularized inverse metric at the
    /// end of each window.
    pub fn observe(&mut self, position: &[f64]) -> Result<Option<Metric>> {
        if self.in_window() {
            if let Some(cross) = self.cross.as_mut() {
                // Welford update of the co-moment matrix: uses deviations from
                // the old and the new mean.
                let old: Vec<f64> = position.iter().zip(&self.estimator.mean).map(|(x, m)| x - m).collect();
                self.estimator.add(position);
                let new: Vec<f64> = position.iter().zip(&self.estimator.mean).map(|(x, m)| x - m).collect();
                let d = old.len();
                for j in 0..d {
                    for i in 0..d {
                        cross[(i, j)] += old[i] * new[j];
                    }
                }
            } else {
                self.estimator.add(position);
            }
        }
        let out = if self.end_of_window() {
            self.compute_next_window();
            let n = self.estimator.count() as f64;
            let shrink = n / (n + 5.0);
            let ridge = 1e-3 * (5.0 / (n + 5.0));
            let metric = match self.kind {
                MetricKind::Diag => Metric::Diag(self.estimator.variance().into_iter().map(|v| shrink * v + ridge).collect()),
                MetricKind::Dense => {
                    let cross = self.cross.as_mut().expect("dense accumulator");
                    let d = cross.nrows();
                    let mut cov = cross.clone() / (n - 1.0).max(1.0);
                    // Symmetrize against rounding before factorizing.
                    cov = (&cov + cov.transpose()) * 0.5;
                    cov *= shrink;
                    for i in 0..d {
                        cov[(i, i)] += ridge;
                    }
                    cross.fill(0.0);
                    Metric::dense(cov)?
                }
            };
            self.estimator.reset();
            Some(metric)
        } else {
            None
        };
        self.counter += 1;
        Ok(out)
    }
}

/// Doubles or halves `step` until a single leapfrog step crosses an
/// acceptance probability of 0.8.
pub fn find_reasonable_step_size<D, R>(
    density: &D,
    point: &PhasePoint,
    step: f64,
    metric: &Metric,
    rng: &mut R,
) -> Result<f64>
where
    D: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let threshold = 0.8f64.ln();
    let trial = |step: f64, rng: &mut R| {
        let mut p = point.clone();
        p.momentum = metric.sample_momentum(rng);
        let h0 = p.hamiltonian(metric);
        leapfrog(density, &mut p, step, metric);
        let h = p.hamiltonian(metric);
        let h = if h.is_nan() { f64::INFINITY } else { h };
        h0 - h
    };
    let mut step = step;
    let direction = if trial(step, rng) > threshold { 1 } else { -1 };
    loop {
        let delta = trial(step, rng);
        if direction == 1 && delta <= threshold {
            break;
        }
        if direction == -1 && delta >= threshold {
            break;
        }
        step = if direction == 1 { 2.0 * step } else { 0.5 * step };
        if step > 1e7 {
            return Err(Error::FitFailure("step size diverged while searching for a reasonable value; posterior may be improper".into()));
        }
        if step < 1e-300 {
            return Err(Error::FitFailure("step size collapsed to zero; check the model gradient".into()));
        }
    }
    Ok(step)
}
