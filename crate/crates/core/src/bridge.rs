//! Classical-to-quantum bridge: the variance ODE of the overdamped
//! Ornstein-Uhlenbeck analogue, and the pointwise map from a classical
//! stiffness schedule to physical trap and interaction controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::derivative_uniform;
use crate::units::{Knob, PhysicalParams, Protocol};
use crate::variational::{stationarity_polynomial, GAUSS_OVERLAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Variance,
    Time,
}

/// Classical stiffness sampled over variance or over time, with its
/// derivative with respect to that variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessProfile {
    pub domain: Domain,
    pub grid: Vec<f64>,
    pub kbar: Vec<f64>,
    pub kbar_prime: Vec<f64>,
}

impl StiffnessProfile {
    pub fn new(domain: Domain, grid: Vec<f64>, kbar: Vec<f64>, kbar_prime: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if n < 2 || kbar.len() != n || kbar_prime.len() != n {
            return Err(Error::invalid("stiffness profile arrays must share a length of at least 2"));
        }
        if grid.iter().chain(&kbar).chain(&kbar_prime).any(|v| !v.is_finite()) {
            return Err(Error::invalid("stiffness profile contains non-finite samples"));
        }
        let inc = grid.windows(2).all(|w| w[1] > w[0]);
        let dec = grid.windows(2).all(|w| w[1] < w[0]);
        match domain {
            Domain::Time if !inc => return Err(Error::invalid("time grid must be strictly increasing")),
            Domain::Variance if !(inc || dec) => {
                return Err(Error::invalid("variance grid must be strictly monotone"))
            }
            _ => {}
        }
        Ok(StiffnessProfile { domain, grid, kbar, kbar_prime })
    }

    /// Time-domain profile with the rate estimated by fourth-order finite
    /// differences. `times` must be uniform.
    pub fn from_time_samples(times: Vec<f64>, kbar: Vec<f64>) -> Result<Self> {
        if times.len() < 5 {
            return Err(Error::invalid("need at least five time samples"));
        }
        let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let rate = derivative_uniform(&kbar, h);
        Self::new(Domain::Time, times, kbar, rate)
    }

    /// Time-domain profile from an analytic function and its derivative.
    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<Self> {
        let kbar = times.iter().map(|&t| f(t)).collect();
        let rate = times.iter().map(|&t| df(t)).collect();
        Self::new(Domain::Time, times, kbar, rate)
    }
}

/// Variance `s(t)` of the classical process together with its rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTrajectory {
    pub times: Vec<f64>,
    pub s_vals: Vec<f64>,
    pub s_dot: Vec<f64>,
}

/// Right-hand side of the variance ODE, `(2/gamma)(D gamma - kbar s)`.
pub fn variance_rate(p: &PhysicalParams, kbar: f64, s: f64) -> f64 {
    2.0 / p.gamma * (p.diffusion() * p.gamma - kbar * s)
}

/// Equilibrium classical stiffness `D gamma / s`.
pub fn equilibrium_kbar(p: &PhysicalParams, s: f64) -> f64 {
    p.diffusion() * p.gamma / s
}

/// RK4 solution of the variance ODE, sub-stepped so each step is at most a
/// hundredth of the fastest relaxation time on the grid.
pub fn variance_evolve(
    p: &PhysicalParams,
    kbar_of_t: &dyn Fn(f64) -> f64,
    s0: f64,
    t_grid: &[f64],
) -> Result<VarianceTrajectory> {
    if !(s0 > 0.0) {
        return Err(Error::invalid(format!("initial variance must be positive, got {s0}")));
    }
    if t_grid.len() < 2 {
        return Err(Error::invalid("time grid needs at least two points"));
    }
    let kmax = t_grid.iter().map(|&t| kbar_of_t(t).abs()).fold(0.0_f64, f64::max);
    let cap = if kmax > 0.0 { 0.01 * p.gamma / kmax } else { f64::INFINITY };
    let f = |t: f64, s: f64| variance_rate(p, kbar_of_t(t), s);

    let mut s_vals = Vec::with_capacity(t_grid.len());
    let mut s = s0;
    s_vals.push(s);
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        if !(span > 0.0) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        let sub = (span / cap).ceil().max(1.0) as usize;
        let h = span / sub as f64;
        let mut t = w[0];
        for _ in 0..sub {
            let k1 = f(t, s);
            let k2 = f(t + 0.5 * h, s + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, s + 0.5 * h * k2);
            let k4 = f(t + h, s + h * k3);
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NonPositiveVariance { time: t });
            }
        }
        s_vals.push(s);
    }
    let s_dot = t_grid.iter().zip(&s_vals).map(|(&t, &s)| f(t, s)).collect();
    Ok(VarianceTrajectory { times: t_grid.to_vec(), s_vals, s_dot })
}

/// Right-hand side of the bridge relation,
/// `hbar^2/(2 m s^2) + (m/gamma) kbar_dot - (m/gamma^2) kbar^2`.
pub fn bridge_rhs(p: &PhysicalParams, s: f64, kbar: f64, kbar_dot: f64) -> f64 {
    p.hbar * p.hbar / (2.0 * p.mass * s * s) + p.mass / p.gamma * kbar_dot
        - p.mass / (p.gamma * p.gamma) * kbar * kbar
}

/// Solves the bridge relation pointwise for the free control.
///
/// With `fixed == Knob::Kappa` the trap stiffness is `held_value` and the
/// coupling follows; with `Knob::G` the coupling is held and the stiffness
/// follows. A variance-domain profile must be sampled at the trajectory's
/// variances; its rate is converted with the chain rule.
pub fn controls_from_classical(
    p: &PhysicalParams,
    profile: &StiffnessProfile,
    traj: &VarianceTrajectory,
    fixed: Knob,
    held_value: f64,
) -> Result<Protocol> {
    let n = traj.times.len();
    if profile.grid.len() != n || traj.s_vals.len() != n {
        return Err(Error::invalid("profile and trajectory must be sampled on the same points"));
    }
    if !held_value.is_finite() {
        return Err(Error::invalid("held control must be finite"));
    }
    if profile.domain == Domain::Time
        && profile.grid.iter().zip(&traj.times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs()))
    {
        return Err(Error::invalid("profile and trajectory time grids differ"));
    }
    let n_atoms = p.atom_count;
    let mut kappa = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let s = traj.s_vals[i];
        let kb = profile.kbar[i];
        let kb_dot = match profile.domain {
            Domain::Time => profile.kbar_prime[i],
            Domain::Variance => profile.kbar_prime[i] * variance_rate(p, kb, s),
        };
        let rhs = bridge_rhs(p, s, kb, kb_dot);
        let sigma3 = s * s.sqrt();
        match fixed {
            Knob::Kappa => {
                kappa.push(held_value);
                g.push((held_value - rhs) * sigma3 / (GAUSS_OVERLAP * n_atoms));
            }
            Knob::G => {
                g.push(held_value);
                kappa.push(rhs + n_atoms * held_value * GAUSS_OVERLAP / sigma3);
            }
        }
    }
    let mut proto = Protocol::new(traj.times.clone(), kappa, g, traj.s_vals.clone(), n_atoms)?;
    if proto.meta.trap_inversion {
        proto.meta.notes.push("trap stiffness is non-positive on part of the protocol".into());
    }
    if proto.meta.negative_g {
        proto.meta.notes.push("interaction strength takes negative values".into());
    }
    Ok(proto)
}

/// `kbar_i + (kbar_f - kbar_i) (1 + tanh((t - t_switch)/rise_time)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedStep {
    pub kbar_i: f64,
    pub kbar_f: f64,
    pub t_switch: f64,
    pub rise_time: f64,
}

impl SmoothedStep {
    pub fn new(kbar_i: f64, kbar_f: f64, t_switch: f64, rise_time: f64) -> Result<Self> {
        if !(rise_time > 0.0) {
            return Err(Error::invalid(format!("rise_time must be positive, got {rise_time}")));
        }
        Ok(SmoothedStep { kbar_i, kbar_f, t_switch, rise_time })
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.t_switch) / self.rise_time;
        self.kbar_i + (self.kbar_f - self.kbar_i) * 0.5 * (1.0 + x.tanh())
    }

    pub fn rate(&self, t: f64) -> f64 {
        let sech = 1.0 / ((t - self.t_switch) / self.rise_time).cosh();
        (self.kbar_f - self.kbar_i) * 0.5 * sech * sech / self.rise_time
    }
}

/// Up-and-back step: `kbar_a -> kbar_b` at `t_up`, then back at `t_down`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTripStep {
    pub up: SmoothedStep,
    pub down: SmoothedStep,
}

impl RoundTripStep {
    pub fn new(kbar_a: f64, kbar_b: f64, t_up: f64, t_down: f64, rise_time: f64) -> Result<Self> {
        if !(t_down > t_up) {
            return Err(Error::invalid("the return step must come after the outgoing step"));
        }
        Ok(RoundTripStep {
            up: SmoothedStep::new(kbar_a, kbar_b, t_up, rise_time)?,
            down: SmoothedStep::new(0.0, kbar_a - kbar_b, t_down, rise_time)?,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.up.value(t) + self.down.value(t)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.up.rate(t) + self.down.rate(t)
    }
}

/// Residual of the steady-state width polynomial at the first (`false`) or
/// last (`true`) sample of a protocol.
pub fn check_stationarity(p: &PhysicalParams, protocol: &Protocol, at_end: bool) -> f64 {
    let i = if at_end { protocol.len() - 1 } else { 0 };
    let sigma = protocol.s_pred[i].sqrt();
    stationarity_polynomial(p, protocol.kappa[i], protocol.atom_count * protocol.g[i], sigma)
}
