//! Gaussian-ansatz reduction of the condensate dynamics: equilibrium widths,
//! width dynamics under time-dependent controls, and the ansatz energy.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{GaussianState, PhysicalParams};

/// `1 / (4 sqrt(pi))`, the Gaussian overlap factor of the contact term.
pub const GAUSS_OVERLAP: f64 = 0.141_047_395_886_939_07;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub kappa: f64,
    /// Effective 1D coupling; may be negative (attractive).
    pub g: f64,
    pub atom_count: f64,
}

impl TrapConfig {
    pub fn new(kappa: f64, g: f64, atom_count: f64) -> Result<Self> {
        let c = TrapConfig { kappa, g, atom_count };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid(format!("trap stiffness must be positive, got {}", self.kappa)));
        }
        if !self.g.is_finite() {
            return Err(Error::invalid("coupling must be finite"));
        }
        if !(self.atom_count >= 1.0) {
            return Err(Error::invalid(format!("atom_count must be >= 1, got {}", self.atom_count)));
        }
        Ok(())
    }

    /// Total interaction `N g`.
    pub fn interaction(&self) -> f64 {
        self.atom_count * self.g
    }

    pub fn is_attractive(&self) -> bool {
        self.g < 0.0
    }
}

/// Steady-state residual `kappa sigma^4 - hbar^2/(4m) - N g sigma / (4 sqrt(pi))`.
pub fn stationarity_polynomial(p: &PhysicalParams, kappa: f64, ng: f64, sigma: f64) -> f64 {
    kappa * sigma.powi(4) - p.hbar * p.hbar / (4.0 * p.mass) - ng * sigma * GAUSS_OVERLAP
}

/// Unique positive root of the steady-state polynomial.
pub fn equilibrium_width(p: &PhysicalParams, cfg: &TrapConfig) -> Result<f64> {
    let kappa = cfg.kappa;
    let ng = cfg.interaction();
    let fail = || Error::NoEquilibrium { kappa, interaction: ng };
    if !(kappa > 0.0) || !ng.is_finite() {
        return Err(fail());
    }
    let f = |s: f64| stationarity_polynomial(p, kappa, ng, s);
    let df = |s: f64| 4.0 * kappa * s.powi(3) - ng * GAUSS_OVERLAP;

    let scale = (p.hbar * p.hbar / (4.0 * p.mass * kappa)).powf(0.25);
    let mut lo = 1e-6 * scale;
    let mut hi = (10.0 * scale).max(10.0 * (ng.abs() * GAUSS_OVERLAP / kappa).cbrt());
    if f(lo) > 0.0 {
        return Err(fail());
    }
    let mut grow = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(fail());
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let moved = (next - x).abs();
        x = next;
        if moved <= 1e-15 * x {
            break;
        }
    }
    Ok(x)
}

/// Variational energy `(m/2) sd^2 + hbar^2/(8 m s^2) + kappa s^2 / 2 + N g/(4 sqrt(pi) s)`.
pub fn ansatz_energy(p: &PhysicalParams, state: &GaussianState, cfg: &TrapConfig) -> f64 {
    let s = state.sigma;
    0.5 * p.mass * state.sigma_dot * state.sigma_dot
        + p.hbar * p.hbar / (8.0 * p.mass * s * s)
        + 0.5 * cfg.kappa * s * s
        + cfg.interaction() * GAUSS_OVERLAP / s
}

fn ermakov_accel(p: &PhysicalParams, kappa: f64, ng: f64, sigma: f64) -> f64 {
    -kappa / p.mass * sigma
        + p.hbar * p.hbar / (4.0 * p.mass * p.mass * sigma.powi(3))
        + ng * GAUSS_OVERLAP / (p.mass * sigma * sigma)
}

/// Integrates the width equation with classical RK4 and reports the state at
/// every grid time. The internal step never exceeds 1/1000 of the shortest
/// trap period seen on the grid. The atom number is taken from `p`.
pub fn ermakov_evolve(
    p: &PhysicalParams,
    initial: GaussianState,
    kappa_of_t: &dyn Fn(f64) -> f64,
    g_of_t: &dyn Fn(f64) -> f64,
    t_grid: &[f64],
) -> Result<Vec<GaussianState>> {
    if t_grid.len() < 2 {
        return Err(Error::invalid("time grid needs at least two points"));
    }
    if !(initial.sigma > 0.0) {
        return Err(Error::NonPositiveWidth { time: t_grid[0] });
    }
    let kmax = t_grid.iter().map(|&t| kappa_of_t(t)).fold(0.0_f64, f64::max);
    let dt_cap = if kmax > 0.0 {
        2.0 * PI / (kmax / p.mass).sqrt() / 1000.0
    } else {
        f64::INFINITY
    };
    let n_atoms = p.atom_count;
    let rhs = |t: f64, s: f64, v: f64| -> (f64, f64) {
        (v, ermakov_accel(p, kappa_of_t(t), n_atoms * g_of_t(t), s))
    };

    let mut out = Vec::with_capacity(t_grid.len());
    out.push(initial);
    let (mut s, mut v) = (initial.sigma, initial.sigma_dot);
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        if !(span > 0.0) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        let sub = (span / dt_cap).ceil().max(1.0) as usize;
        let h = span / sub as f64;
        let mut t = w[0];
        for _ in 0..sub {
            let (k1s, k1v) = rhs(t, s, v);
            let (k2s, k2v) = rhs(t + 0.5 * h, s + 0.5 * h * k1s, v + 0.5 * h * k1v);
            let (k3s, k3v) = rhs(t + 0.5 * h, s + 0.5 * h * k2s, v + 0.5 * h * k2v);
            let (k4s, k4v) = rhs(t + h, s + h * k3s, v + h * k3v);
            s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            t += h;
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NonPositiveWidth { time: t });
            }
        }
        out.push(GaussianState { sigma: s, sigma_dot: v });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linspace;
    use proptest::prelude::*;

    fn unit() -> PhysicalParams {
        PhysicalParams::normalized(1.0).unwrap()
    }

    fn unit_n(n: f64) -> PhysicalParams {
        PhysicalParams::normalized(n).unwrap()
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn overlap_constant() {
        assert!((GAUSS_OVERLAP - 1.0 / (4.0 * PI.sqrt())).abs() < 1e-17);
    }

    #[test]
    fn noninteracting_width_is_oscillator_width() {
        for w in [0.5_f64, 1.0, 3.0] {
            let cfg = TrapConfig::new(w * w, 0.0, 1.0).unwrap();
            let s = equilibrium_width(&unit(), &cfg).unwrap();
            assert!((s - (0.5 / w).sqrt()).abs() < 1e-12 * s);
        }
    }

    #[test]
    fn fig3_corner_a_width_matches_bisection() {
        let cfg = TrapConfig::new(2.0, 0.031, 2000.0).unwrap();
        let s = equilibrium_width(&unit(), &cfg).unwrap();
        let oracle = bisect(|x| 2.0 * x.powi(4) - 0.25 - 62.0 * x / (4.0 * PI.sqrt()), 0.1, 10.0);
        assert!((s - oracle).abs() < 1e-12 * oracle, "{s} vs {oracle}");
        assert!((s * s - 2.7049).abs() < 1e-3);
    }

    #[test]
    fn unit_variance_at_three_root_pi() {
        let cfg = TrapConfig::new(1.0, 3.0 * PI.sqrt(), 1.0).unwrap();
        let s = equilibrium_width(&unit(), &cfg).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attractive_coupling_still_has_root() {
        let cfg = TrapConfig::new(1.0, -2.0, 1.0).unwrap();
        let s = equilibrium_width(&unit(), &cfg).unwrap();
        assert!(stationarity_polynomial(&unit(), 1.0, -2.0, s).abs() < 1e-12);
        assert!(s < (0.5_f64).sqrt());
    }

    #[test]
    fn nonpositive_stiffness_has_no_equilibrium() {
        let cfg = TrapConfig { kappa: -1.0, g: 1.0, atom_count: 1.0 };
        assert!(matches!(equilibrium_width(&unit(), &cfg), Err(Error::NoEquilibrium { .. })));
    }

    #[test]
    fn harmonic_ground_energy() {
        let cfg = TrapConfig::new(1.0, 0.0, 1.0).unwrap();
        let st = GaussianState::new(0.5_f64.sqrt(), 0.0).unwrap();
        assert!((ansatz_energy(&unit(), &st, &cfg) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = unit_n(2000.0);
        let cfg = TrapConfig::new(2.0, 0.031, 2000.0).unwrap();
        let s0 = equilibrium_width(&p, &cfg).unwrap();
        let ts = linspace(0.0, 20.0, 201);
        let tr = ermakov_evolve(&p, GaussianState::new(s0, 0.0).unwrap(), &|_| 2.0, &|_| 0.031, &ts).unwrap();
        for st in tr {
            assert!((st.sigma - s0).abs() < 1e-11);
        }
    }

    #[test]
    fn noninteracting_breathing_matches_closed_form() {
        // s = sigma^2 obeys s'' + 4 w^2 s = 2 E' with E' conserved.
        let p = unit();
        let w = 1.3_f64;
        let (sig0, sd0) = (1.1_f64, 0.2_f64);
        let c = 0.25;
        let e = sd0 * sd0 + w * w * sig0 * sig0 + c / (sig0 * sig0);
        let s_bar = e / (2.0 * w * w);
        let s0 = sig0 * sig0;
        let ds0 = 2.0 * sig0 * sd0;
        let exact = |t: f64| s_bar + (s0 - s_bar) * (2.0 * w * t).cos() + ds0 / (2.0 * w) * (2.0 * w * t).sin();

        let ts = linspace(0.0, 30.0, 601);
        let tr = ermakov_evolve(&p, GaussianState::new(sig0, sd0).unwrap(), &|_| w * w, &|_| 0.0, &ts).unwrap();
        for (t, st) in ts.iter().zip(&tr) {
            let s = st.sigma * st.sigma;
            assert!((s - exact(*t)).abs() < 1e-6 * exact(*t), "t={t}");
        }

        // Breathing period pi/w: the variance returns after half a trap period.
        let half = linspace(0.0, PI / w, 2);
        let back = ermakov_evolve(&p, GaussianState::new(sig0, sd0).unwrap(), &|_| w * w, &|_| 0.0, &half).unwrap();
        assert!((back[1].sigma - sig0).abs() < 1e-8);
    }

    #[test]
    fn energy_conserved_over_100_periods() {
        let p = unit_n(500.0);
        let cfg = TrapConfig::new(2.0, 0.05, 500.0).unwrap();
        let st0 = GaussianState::new(1.2, 0.3).unwrap();
        let e0 = ansatz_energy(&p, &st0, &cfg);
        let period = 2.0 * PI / 2.0_f64.sqrt();
        let ts = linspace(0.0, 100.0 * period, 1001);
        let tr = ermakov_evolve(&p, st0, &|_| 2.0, &|_| 0.05, &ts).unwrap();
        for st in tr {
            assert!((ansatz_energy(&p, &st, &cfg) - e0).abs() < 1e-8 * e0.abs());
        }
    }

    #[test]
    fn energy_minimum_sits_at_equilibrium() {
        let p = unit_n(100.0);
        let cfg = TrapConfig::new(1.5, 0.2, 100.0).unwrap();
        let s_eq = equilibrium_width(&p, &cfg).unwrap();
        let e_eq = ansatz_energy(&p, &GaussianState::new(s_eq, 0.0).unwrap(), &cfg);
        for i in 1..2000 {
            let s = i as f64 * 0.005;
            let e = ansatz_energy(&p, &GaussianState::new(s, 0.0).unwrap(), &cfg);
            assert!(e >= e_eq - 1e-12, "s={s}");
        }
    }

    #[test]
    fn collapse_reported_with_time() {
        let p = unit_n(1.0);
        let ts = linspace(0.0, 5.0, 51);
        // Strong attraction and no confinement drives the width to zero.
        let r = ermakov_evolve(&p, GaussianState::new(1.0, -3.0).unwrap(), &|_| 0.0, &|_| -200.0, &ts);
        assert!(matches!(r, Err(Error::NonPositiveWidth { .. })));
    }

    proptest! {
        #[test]
        fn width_monotone_in_coupling_and_stiffness(
            kappa in 0.2f64..10.0, ng in 0.0f64..300.0, dk in 0.01f64..2.0, dg in 0.01f64..50.0
        ) {
            let p = unit();
            let w = |k: f64, ng: f64| equilibrium_width(&p, &TrapConfig::new(k, ng, 1.0).unwrap()).unwrap();
            let base = w(kappa, ng);
            prop_assert!(w(kappa, ng + dg) > base);
            prop_assert!(w(kappa + dk, ng) < base);
            prop_assert!(stationarity_polynomial(&p, kappa, ng, base).abs() < 1e-10 * (1.0 + kappa * base.powi(4)));
        }
    }
}
