//! Monte-Carlo ensembles for the linear Langevin processes behind the
//! variance equation.
//!
//! Both processes have the form `dx = -c(t) x dt + dW` with
//! `<dW dW> = 2 D dt`. For the Ornstein-Uhlenbeck process `c = kbar / gamma`;
//! for the Nelson process `c = D / sigma^2 - sigma_dot / sigma`, built from a
//! Gaussian wave packet. Each particle draws from its own ChaCha stream
//! (`set_stream(i)`), and partial sums are reduced per fixed-size chunk in
//! index order, so the output does not depend on `n_particles` splitting or on
//! the execution strategy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::interp_linear;
use crate::par::Execution;
use crate::units::{GaussianState, PhysicalParams, Protocol};

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub seed: u64,
    pub initial_variance: f64,
}

impl EnsembleConfig {
    pub fn new(n_particles: usize, dt: f64, seed: u64, initial_variance: f64) -> Result<Self> {
        let c = EnsembleConfig { n_particles, dt, seed, initial_variance };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 1000 {
            return Err(Error::invalid(format!("ensemble needs at least 1000 particles, got {}", self.n_particles)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("ensemble time step must be positive"));
        }
        if !(self.initial_variance > 0.0 && self.initial_variance.is_finite()) {
            return Err(Error::invalid("initial variance must be positive"));
        }
        Ok(())
    }
}

/// A five-hundredth of the trap period `2 pi sqrt(m / kappa)`.
pub fn default_dt(p: &PhysicalParams, kappa: f64) -> f64 {
    2.0 * std::f64::consts::PI * (p.mass / kappa).sqrt() / 500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Unbiased sample variance.
    pub variance: Vec<f64>,
    /// `sqrt(2 / n) * variance`.
    pub variance_se: Vec<f64>,
    pub n_particles: usize,
}

impl EnsembleStats {
    /// Fraction of sample times where `|variance - reference| <= k * se`.
    pub fn agreement_fraction(&self, reference: &[f64], k: f64) -> f64 {
        let hits = self
            .variance
            .iter()
            .zip(&self.variance_se)
            .zip(reference)
            .filter(|((v, se), r)| (*v - *r).abs() <= k * *se)
            .count();
        hits as f64 / self.variance.len().max(1) as f64
    }

    /// Fraction of sample times where two independent ensembles agree within
    /// `k` combined standard errors.
    pub fn agreement_with(&self, other: &EnsembleStats, k: f64) -> f64 {
        let n = self.variance.len().min(other.variance.len());
        let hits = (0..n)
            .filter(|&i| {
                let se = self.variance_se[i].hypot(other.variance_se[i]);
                (self.variance[i] - other.variance[i]).abs() <= k * se
            })
            .count();
        hits as f64 / n.max(1) as f64
    }

    /// Fraction of sample times where the mean is within `k` standard errors of zero.
    pub fn centred_fraction(&self, k: f64) -> f64 {
        let hits = self.mean.iter().zip(&self.mean_se).filter(|(m, se)| m.abs() <= k * *se).count();
        hits as f64 / self.mean.len().max(1) as f64
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("empty sample grid"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("sample times must be strictly increasing"));
    }
    Ok(())
}

/// Runs the ensemble for `dx = -c(t) x dt + dW`, sampling at `t_grid`.
fn simulate<F>(p: &PhysicalParams, rate: F, cfg: &EnsembleConfig, t_grid: &[f64], exec: Execution) -> Result<EnsembleStats>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    cfg.validate()?;
    check_grid(t_grid)?;
    let m = t_grid.len();
    let spread = cfg.initial_variance.sqrt();
    let n_chunks = cfg.n_particles.div_ceil(CHUNK);
    let partial = exec.map_range(n_chunks, |chunk| {
        let mut sum = vec![0.0; m];
        let mut sum2 = vec![0.0; m];
        let lo = chunk * CHUNK;
        let hi = (lo + CHUNK).min(cfg.n_particles);
        for i in lo..hi {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut x = spread * z;
            let mut t = t_grid[0];
            sum[0] += x;
            sum2[0] += x * x;
            for k in 1..m {
                let span = t_grid[k] - t;
                let steps = (span / cfg.dt).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                let amp = (2.0 * p.diffusion() * h).sqrt();
                for _ in 0..steps {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x += -rate(t) * x * h + amp * z;
                    t += h;
                }
                t = t_grid[k];
                sum[k] += x;
                sum2[k] += x * x;
            }
        }
        (sum, sum2)
    });
    let n = cfg.n_particles as f64;
    let mut total = vec![0.0; m];
    let mut total2 = vec![0.0; m];
    for (s, s2) in &partial {
        for k in 0..m {
            total[k] += s[k];
            total2[k] += s2[k];
        }
    }
    let mut stats = EnsembleStats {
        times: t_grid.to_vec(),
        mean: Vec::with_capacity(m),
        mean_se: Vec::with_capacity(m),
        variance: Vec::with_capacity(m),
        variance_se: Vec::with_capacity(m),
        n_particles: cfg.n_particles,
    };
    for k in 0..m {
        let mean = total[k] / n;
        let var = (total2[k] - n * mean * mean) / (n - 1.0);
        stats.mean.push(mean);
        stats.mean_se.push((var / n).sqrt());
        stats.variance.push(var);
        stats.variance_se.push((2.0 / n).sqrt() * var);
    }
    Ok(stats)
}

/// Ornstein-Uhlenbeck ensemble `dx = -(kbar / gamma) x dt + dW`.
pub fn simulate_ou<F>(
    p: &PhysicalParams,
    kbar_of_t: F,
    cfg: &EnsembleConfig,
    t_grid: &[f64],
    exec: Execution,
) -> Result<EnsembleStats>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let gamma = p.gamma;
    simulate(p, move |t| kbar_of_t(t) / gamma, cfg, t_grid, exec)
}

/// Nelson ensemble with drift `(hbar / m)(2 alpha - 1 / (2 sigma^2)) x`, where
/// `states[k]` is the Gaussian wave packet at `protocol.times[k]`. Between
/// samples the width and its rate are interpolated linearly.
pub fn simulate_nelson(
    p: &PhysicalParams,
    protocol: &Protocol,
    states: &[GaussianState],
    cfg: &EnsembleConfig,
    exec: Execution,
) -> Result<EnsembleStats> {
    if states.len() != protocol.len() {
        return Err(Error::invalid(format!(
            "{} wave-packet states for {} protocol samples",
            states.len(),
            protocol.len()
        )));
    }
    let times = &protocol.times;
    let sigma: Vec<f64> = states.iter().map(|s| s.sigma).collect();
    let sigma_dot: Vec<f64> = states.iter().map(|s| s.sigma_dot).collect();
    let (hbar, mass) = (p.hbar, p.mass);
    let rate = |t: f64| {
        let st = GaussianState { sigma: interp_linear(times, &sigma, t), sigma_dot: interp_linear(times, &sigma_dot, t) };
        -(hbar / mass) * (2.0 * st.alpha(p) - 0.5 / (st.sigma * st.sigma))
    };
    simulate(p, rate, cfg, times, exec)
}

/// Closed-form OU variance after a quench to constant `kbar` from `s0`.
pub fn quench_variance(p: &PhysicalParams, kbar: f64, s0: f64, t: f64) -> f64 {
    let s_eq = p.diffusion() * p.gamma / kbar;
    s_eq + (s0 - s_eq) * (-2.0 * kbar * t / p.gamma).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{equilibrium_kbar, variance_evolve, RoundTripStep};
    use crate::numerics::linspace;
    use crate::variational::ermakov_evolve;

    fn unit() -> PhysicalParams {
        PhysicalParams::normalized(1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EnsembleConfig::new(999, 0.01, 1, 1.0).is_err());
        assert!(EnsembleConfig::new(1000, 0.0, 1, 1.0).is_err());
        assert!(EnsembleConfig::new(1000, 0.01, 1, -1.0).is_err());
        assert!(EnsembleConfig::new(1000, 0.01, 1, 1.0).is_ok());
    }

    #[test]
    fn stationary_ensemble_is_flat_and_centred() {
        let p = unit();
        let kbar = equilibrium_kbar(&p, 1.0);
        let cfg = EnsembleConfig::new(10_000, 0.002, 7, 1.0).unwrap();
        let t = linspace(0.0, 5.0, 51);
        let st = simulate_ou(&p, |_| kbar, &cfg, &t, Execution::Parallel).unwrap();
        assert!(st.agreement_fraction(&vec![1.0; t.len()], 3.0) >= 0.95);
        assert!(st.centred_fraction(3.0) >= 0.95);
    }

    #[test]
    fn quench_follows_closed_form() {
        let p = unit();
        let cfg = EnsembleConfig::new(10_000, 0.001, 11, 1.0).unwrap();
        let t = linspace(0.0, 3.0, 31);
        let st = simulate_ou(&p, |_| 0.25, &cfg, &t, Execution::Parallel).unwrap();
        let exact: Vec<f64> = t.iter().map(|&t| quench_variance(&p, 0.25, 1.0, t)).collect();
        for (k, (v, e)) in st.variance.iter().zip(&exact).enumerate() {
            assert!((v - e).abs() <= 3.0 * st.variance_se[k], "t={} {v} {e}", t[k]);
        }
    }

    #[test]
    fn round_trip_step_matches_variance_ode() {
        let p = unit();
        let step = RoundTripStep::new(0.5, 0.25, 10.0, 19.0, 1.0).unwrap();
        let t = linspace(0.0, 33.0, 67);
        let cfg = EnsembleConfig::new(10_000, 0.005, 3, 1.0).unwrap();
        let st = simulate_ou(&p, |t| step.value(t), &cfg, &t, Execution::Parallel).unwrap();
        let ode = variance_evolve(&p, &|t| step.value(t), 1.0, &t).unwrap();
        assert!(st.agreement_fraction(&ode.s_vals, 3.0) >= 0.95);
        let peak = st.variance.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 2.0).abs() < 0.1, "{peak}");
    }

    #[test]
    fn nelson_matches_ou_for_same_protocol() {
        let p = unit();
        // Free expansion of a packet released from kappa = 1/4 into kappa = 1/16.
        let times = linspace(0.0, 6.0, 61);
        let n = times.len();
        let proto = Protocol::new(times.clone(), vec![1.0 / 16.0; n], vec![0.0; n], vec![1.0; n], 1.0).unwrap();
        let s0 = GaussianState::new(1.0, 0.0).unwrap();
        let states = ermakov_evolve(&p, s0, &|_| 1.0 / 16.0, &|_| 0.0, &times).unwrap();
        // Matching classical stiffness: D gamma / s - gamma s_dot / (2 s).
        let kbar: Vec<f64> = states
            .iter()
            .map(|st| equilibrium_kbar(&p, st.variance()) - p.gamma * st.sigma * st.sigma_dot / st.variance())
            .collect();
        let cfg = EnsembleConfig::new(10_000, 0.002, 5, 1.0).unwrap();
        let nel = simulate_nelson(&p, &proto, &states, &cfg, Execution::Parallel).unwrap();
        let ou_cfg = EnsembleConfig { seed: 6, ..cfg };
        let ou = simulate_ou(&p, |t| interp_linear(&times, &kbar, t), &ou_cfg, &times, Execution::Parallel).unwrap();
        assert!(nel.agreement_with(&ou, 3.0) >= 0.95);
        let exact: Vec<f64> = states.iter().map(|s| s.variance()).collect();
        assert!(nel.agreement_fraction(&exact, 3.0) >= 0.95);
    }

    #[test]
    fn standard_error_halves_with_four_times_the_particles() {
        let p = unit();
        let t = [0.0, 1.0, 2.0];
        let small = EnsembleConfig::new(2_500, 0.01, 9, 1.0).unwrap();
        let big = EnsembleConfig { n_particles: 10_000, ..small };
        let a = simulate_ou(&p, |_| 0.5, &small, &t, Execution::Parallel).unwrap();
        let b = simulate_ou(&p, |_| 0.5, &big, &t, Execution::Parallel).unwrap();
        for k in 0..t.len() {
            let r = b.variance_se[k] / a.variance_se[k];
            assert!((r - 0.5).abs() < 0.05, "{r}");
        }
    }

    #[test]
    fn output_is_bit_identical_across_strategies() {
        let p = unit();
        let t = linspace(0.0, 1.0, 11);
        let cfg = EnsembleConfig::new(3_000, 0.01, 42, 0.7).unwrap();
        let a = simulate_ou(&p, |t| 0.5 + 0.1 * t, &cfg, &t, Execution::Parallel).unwrap();
        let b = simulate_ou(&p, |t| 0.5 + 0.1 * t, &cfg, &t, Execution::Sequential).unwrap();
        let c = simulate_ou(&p, |t| 0.5 + 0.1 * t, &cfg, &t, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
