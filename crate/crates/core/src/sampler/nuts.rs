//! Multinomial No-U-Turn transitions.
//!
//! Trajectories grow by doubling in a random direction. Within a subtree the
//! proposal is drawn with probability proportional to `exp(-H)`; when a new
//! subtree is joined at the top level the draw is biased toward the new
//! subtree. Termination uses the generalized U-turn criterion on summed
//! momenta, including the checks across subtree boundaries.

use rand::Rng;

use super::leapfrog::{leapfrog, PhasePoint};
use super::metric::Metric;
use crate::density::LogDensity;
use crate::math::log_sum_exp;

/// Energy error beyond which a trajectory is flagged divergent.
pub const MAX_ENERGY_ERROR: f64 = 1000.0;

/// Per-transition statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransitionStats {
    pub divergent: bool,
    /// The trajectory hit a point outside the support.
    pub rejected: bool,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub accept_prob: f64,
    pub step_size: f64,
    pub energy: f64,
}

struct TreeState<'a, D: ?Sized> {
    density: &'a D,
    metric: &'a Metric,
    step: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
    rejected: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn sum(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct Subtree {
    proposal: PhasePoint,
    log_sum_weight: f64,
    rho: Vec<f64>,
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
}

impl<'a, D: LogDensity + ?Sized> TreeState<'a, D> {
    /// Builds a subtree of `depth` starting from `edge`, advancing `edge` to the
    /// far end. Returns `None` when the subtree is invalid (divergence, support
    /// violation or internal U-turn).
    fn build<R: Rng + ?Sized>(&mut self, edge: &mut PhasePoint, depth: usize, dir: f64, rng: &mut R) -> Option<Subtree> {
        if depth == 0 {
            leapfrog(self.density, edge, dir * self.step, self.metric);
            self.n_leapfrog += 1;
            if !edge.is_valid() {
                if edge.log_density == f64::NEG_INFINITY {
                    self.rejected = true;
                } else {
                    self.divergent = true;
                }
                return None;
            }
            let h = edge.hamiltonian(self.metric);
            let h = if h.is_nan() { f64::INFINITY } else { h };
            let delta = self.h0 - h;
            self.sum_metro_prob += if delta > 0.0 { 1.0 } else { delta.exp() };
            if h - self.h0 > MAX_ENERGY_ERROR {
                self.divergent = true;
                return None;
            }
            let v = edge.velocity(self.metric);
            return Some(Subtree {
                proposal: edge.clone(),
                log_sum_weight: delta,
                rho: edge.momentum.clone(),
                p_sharp_beg: v.clone(),
                p_sharp_end: v,
                p_beg: edge.momentum.clone(),
                p_end: edge.momentum.clone(),
            });
        }

        let init = self.build(edge, depth - 1, dir, rng)?;
        let fin = self.build(edge, depth - 1, dir, rng)?;

        let lsw = log_sum_exp(init.log_sum_weight, fin.log_sum_weight);
        let take_final = if fin.log_sum_weight > lsw {
            true
        } else {
            rng.random::<f64>() < (fin.log_sum_weight - lsw).exp()
        };
        let proposal = if take_final { fin.proposal } else { init.proposal };

        let rho = sum(&init.rho, &fin.rho);
        let mut persist = no_u_turn(&init.p_sharp_beg, &fin.p_sharp_end, &rho);
        let rho_ext = sum(&init.rho, &fin.p_beg);
        persist &= no_u_turn(&init.p_sharp_beg, &fin.p_sharp_beg, &rho_ext);
        let rho_ext = sum(&fin.rho, &init.p_end);
        persist &= no_u_turn(&init.p_sharp_end, &fin.p_sharp_end, &rho_ext);
        if !persist {
            return None;
        }
        Some(Subtree {
            proposal,
            log_sum_weight: lsw,
            rho,
            p_sharp_beg: init.p_sharp_beg,
            p_sharp_end: fin.p_sharp_end,
            p_beg: init.p_beg,
            p_end: fin.p_end,
        })
    }
}

/// One NUTS transition from `current` (which must have finite log density).
///
/// A `max_treedepth` of zero still builds the depth-0 tree, i.e. a single
/// leapfrog step with a Metropolis correction.
pub fn nuts_transition<D, R>(
    density: &D,
    current: &PhasePoint,
    step_size: f64,
    metric: &Metric,
    max_treedepth: usize,
    rng: &mut R,
) -> (PhasePoint, TransitionStats)
where
    D: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let mut start = current.clone();
    start.momentum = metric.sample_momentum(rng);
    let h0 = start.hamiltonian(metric);

    let mut ts = TreeState {
        density,
        metric,
        step: step_size,
        h0,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
        rejected: false,
    };

    let v0 = start.velocity(metric);
    let mut fwd = start.clone();
    let mut bck = start.clone();
    let mut p_sharp_fwd_fwd = v0.clone();
    let mut p_sharp_fwd_bck = v0.clone();
    let mut p_sharp_bck_fwd = v0.clone();
    let mut p_sharp_bck_bck = v0;
    let mut p_fwd_bck = start.momentum.clone();
    let mut p_bck_fwd = start.momentum.clone();
    let mut rho = start.momentum.clone();
    let mut log_sum_weight = 0.0;
    let mut sample = start.clone();
    let mut depth = 0;

    while depth < max_treedepth.max(1) {
        let forward = rng.random::<bool>();
        let (subtree, rho_fwd, rho_bck) = if forward {
            let rho_bck = rho.clone();
            let Some(t) = ts.build(&mut fwd, depth, 1.0, rng) else { break };
            p_sharp_fwd_bck = t.p_sharp_beg.clone();
            p_sharp_fwd_fwd = t.p_sharp_end.clone();
            p_fwd_bck = t.p_beg.clone();
            let rho_fwd = t.rho.clone();
            (t, rho_fwd, rho_bck)
        } else {
            let rho_fwd = rho.clone();
            let Some(t) = ts.build(&mut bck, depth, -1.0, rng) else { break };
            p_sharp_bck_fwd = t.p_sharp_beg.clone();
            p_sharp_bck_bck = t.p_sharp_end.clone();
            p_bck_fwd = t.p_beg.clone();
            let rho_bck = t.rho.clone();
            (t, rho_fwd, rho_bck)
        };
        depth += 1;

        if subtree.log_sum_weight > log_sum_weight {
            sample = subtree.proposal;
        } else if rng.random::<f64>() < (subtree.log_sum_weight - log_sum_weight).exp() {
            sample = subtree.proposal;
        }
        log_sum_weight = log_sum_exp(log_sum_weight, subtree.log_sum_weight);

        rho = sum(&rho_bck, &rho_fwd);
        let mut persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
        let mut rho_ext = rho_bck.clone();
        add_into(&mut rho_ext, &p_fwd_bck);
        persist &= no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
        let mut rho_ext = rho_fwd.clone();
        add_into(&mut rho_ext, &p_bck_fwd);
        persist &= no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
        if !persist {
            break;
        }
    }

    let accept_prob = if ts.n_leapfrog > 0 {
        ts.sum_metro_prob / ts.n_leapfrog as f64
    } else {
        0.0
    };
    let energy = sample.hamiltonian(metric);
    let stats = TransitionStats {
        divergent: ts.divergent,
        rejected: ts.rejected,
        tree_depth: depth,
        n_leapfrog: ts.n_leapfrog,
        accept_prob,
        step_size,
        energy,
    };
    (sample, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnDensity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn never_moves_into_unsupported_region() {
        // Standard normal restricted to x > 0.
        let d = FnDensity::new(1, |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            g[0] = -x[0];
            -0.5 * x[0] * x[0]
        });
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pt = PhasePoint::new(&d, vec![0.5], vec![0.0]);
        let mut rejected = 0;
        for _ in 0..5000 {
            let (next, stats) = nuts_transition(&d, &pt, 0.4, &Metric::Diag(vec![1.0]), 10, &mut rng);
            assert!(next.position[0] > 0.0);
            assert!(next.log_density.is_finite());
            rejected += stats.rejected as usize;
            assert!(!stats.divergent || !stats.rejected);
            pt = next;
        }
        assert!(rejected > 0);
    }

    #[test]
    fn depth_zero_is_metropolised_leapfrog() {
        // With treedepth 0 the move is one leapfrog step accepted with
        // probability min(1, exp(-dH)); compare the empirical acceptance rate.
        let d = FnDensity::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = -x[0];
            -0.5 * x[0] * x[0]
        });
        let step = 1.7;
        let unit = Metric::Diag(vec![1.0]);
        let start = PhasePoint::new(&d, vec![0.3], vec![0.0]);
        let mut moved = 0usize;
        let mut expected = 0.0;
        let n = 20_000;
        for k in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let (next, stats) = nuts_transition(&d, &start, step, &unit, 0, &mut rng);
            assert_eq!(stats.n_leapfrog, 1);
            assert_eq!(stats.tree_depth, 1);
            // Replay the momentum draw to compute the exact acceptance probability.
            let mut replay = ChaCha8Rng::seed_from_u64(k as u64);
            let p = unit.sample_momentum(&mut replay);
            let mut pt = start.clone();
            pt.momentum = p;
            let h0 = pt.hamiltonian(&unit);
            let dir = if replay.random::<bool>() { 1.0 } else { -1.0 };
            leapfrog(&d, &mut pt, dir * step, &unit);
            let a = (h0 - pt.hamiltonian(&unit)).exp().min(1.0);
            expected += a;
            if next.position[0] != start.position[0] {
                moved += 1;
                assert!((next.position[0] - pt.position[0]).abs() < 1e-14);
            }
        }
        let rate = moved as f64 / n as f64;
        let expected = expected / n as f64;
        assert!((rate - expected).abs() < 0.015, "{rate} vs {expected}");
    }
}
