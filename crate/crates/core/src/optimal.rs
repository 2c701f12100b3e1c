//! Optimal stroke synthesis: the regularized cost over the classical
//! stiffness `kbar(s)`, its Euler-Lagrange boundary-value problem, the
//! duration integral, and the map back to a time-sampled protocol.
//!
//! The Dirichlet data sit on the equilibrium curve `kbar = D gamma / s`, so
//! `u = D gamma - s kbar` vanishes at both ends and the equation is singular
//! there. Near an end `u ~ A x^(2/3)` with `x` the distance in `s`; the mesh
//! is graded accordingly and the duration integrand `~ x^(-2/3)` is
//! integrated analytically on the last few nodes.

use serde::{Deserialize, Serialize};

use crate::bridge::{controls_from_classical, variance_rate, Domain, StiffnessProfile, VarianceTrajectory};
use crate::error::{Error, Result};
use crate::numerics::{linspace, thomas, trapezoid, Pchip};
use crate::par::Execution;
use crate::units::{Knob, PhysicalParams, Protocol};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub lambda: f64,
    pub mu: f64,
}

impl CostWeights {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!("weight mu must be > 0, got {mu}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("weight lambda must be >= 0, got {lambda}")));
        }
        Ok(CostWeights { lambda, mu })
    }
}

/// Which Euler-Lagrange equation to solve.
///
/// `Published` is `2 mu kbar'' = gamma s / u^2 - lambda m^2 / (8 gamma hbar^2 s)`.
/// `Exact` is the variation of the stated functional, whose first term on
/// the right carries an extra factor 1/2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElForm {
    #[default]
    Published,
    Exact,
}

impl ElForm {
    fn duration_factor(self) -> f64 {
        match self {
            ElForm::Published => 1.0,
            ElForm::Exact => 0.5,
        }
    }
}

pub const DEFAULT_MESH: usize = 2049;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeSpec {
    pub s_i: f64,
    pub s_f: f64,
    pub weights: CostWeights,
    pub fixed_knob: Knob,
    pub held_value: f64,
    pub mesh_size: usize,
    pub el_form: ElForm,
}

impl StrokeSpec {
    pub fn new(s_i: f64, s_f: f64, weights: CostWeights, fixed_knob: Knob, held_value: f64) -> Result<Self> {
        let spec = StrokeSpec {
            s_i,
            s_f,
            weights,
            fixed_knob,
            held_value,
            mesh_size: DEFAULT_MESH,
            el_form: ElForm::Published,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_i > 0.0 && self.s_f > 0.0 && self.s_i.is_finite() && self.s_f.is_finite()) {
            return Err(Error::invalid("endpoint variances must be positive"));
        }
        if self.s_i == self.s_f {
            return Err(Error::invalid("stroke endpoints must differ (s_i == s_f)"));
        }
        if self.mesh_size < 64 {
            return Err(Error::invalid(format!("mesh_size must be >= 64, got {}", self.mesh_size)));
        }
        if !self.held_value.is_finite() {
            return Err(Error::invalid("held control must be finite"));
        }
        CostWeights::new(self.weights.lambda, self.weights.mu).map(|_| ())
    }

    fn direction(&self) -> f64 {
        (self.s_f - self.s_i).signum()
    }
}

/// Phase cost density `(m^2 / (8 gamma hbar^2)) (D gamma - s kbar) / s^2`.
pub fn phase_cost(p: &PhysicalParams, s: f64, kbar: f64) -> f64 {
    p.mass * p.mass / (8.0 * p.gamma * p.hbar * p.hbar) * (p.diffusion() * p.gamma - s * kbar) / (s * s)
}

/// Nodes clustered towards both ends as `distance^(3/2)`.
pub fn graded_mesh(s_i: f64, s_f: f64, n: usize) -> Vec<f64> {
    let e = 1.5;
    let mut s: Vec<f64> = linspace(0.0, 1.0, n)
        .into_iter()
        .map(|xi: f64| {
            let a = xi.powf(e);
            let b = (1.0 - xi).powf(e);
            s_i + (s_f - s_i) * a / (a + b)
        })
        .collect();
    s[0] = s_i;
    s[n - 1] = s_f;
    s
}

/// Converged Euler-Lagrange solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElSolution {
    /// Variance-domain profile on the graded mesh.
    pub profile: StiffnessProfile,
    /// Max over interior nodes of `|R| / (|2 mu kbar''| + |first| + |second|)`.
    pub scaled_residual: f64,
    /// Max over interior nodes of `|R|`.
    pub raw_residual: f64,
    pub iterations: usize,
    /// Number of mu values visited; 1 when plain Newton sufficed.
    pub stages: usize,
}

const CONVERGED: f64 = 1e-10;
const ACCEPTABLE: f64 = 1e-8;
const MAX_ITER: usize = 50;

struct ElProblem<'a> {
    s: &'a [f64],
    dgam: f64,
    gamma: f64,
    mu: f64,
    lam_term: f64,
    c: f64,
    dir: f64,
}

impl ElProblem<'_> {
    /// Residual, per-node scale, and `u`, at interior nodes.
    fn residual(&self, k: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let s = self.s;
        let m = s.len() - 2;
        let mut r = Vec::with_capacity(m);
        let mut sc = Vec::with_capacity(m);
        let mut us = Vec::with_capacity(m);
        for i in 1..=m {
            let hm = s[i] - s[i - 1];
            let hp = s[i + 1] - s[i];
            let d2 = 2.0 * ((k[i + 1] - k[i]) / hp - (k[i] - k[i - 1]) / hm) / (hp + hm);
            let u = self.dgam - s[i] * k[i];
            let a = 2.0 * self.mu * d2;
            let b = self.dir * self.c * self.gamma * s[i] / (u * u);
            let cc = self.dir * self.lam_term / s[i];
            r.push(a - b + cc);
            sc.push(a.abs() + b.abs() + cc.abs());
            us.push(u);
        }
        (r, sc, us)
    }

    fn merit(r: &[f64], sc: &[f64]) -> f64 {
        r.iter().zip(sc).map(|(a, b)| (a / b).abs()).fold(0.0, f64::max)
    }

    fn admissible(&self, us: &[f64]) -> bool {
        us.iter().all(|u| self.dir * u > 0.0 && u.is_finite())
    }

    /// Damped Newton from `k`. Returns the scaled residual and iterations.
    fn newton(&self, k: &mut [f64]) -> (f64, usize) {
        let s = self.s;
        let m = s.len() - 2;
        let (mut r, sc, mut us) = self.residual(k);
        if !self.admissible(&us) {
            return (f64::INFINITY, 0);
        }
        let mut merit = Self::merit(&r, &sc);
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut it = 0;
        while it < MAX_ITER && merit >= CONVERGED {
            it += 1;
            for j in 0..m {
                let i = j + 1;
                let hm = s[i] - s[i - 1];
                let hp = s[i + 1] - s[i];
                let u = us[j];
                lower[j] = 2.0 * self.mu * 2.0 / (hm * (hp + hm));
                upper[j] = 2.0 * self.mu * 2.0 / (hp * (hp + hm));
                diag[j] = 2.0 * self.mu * (-2.0 / (hp * hm))
                    - self.dir * self.c * 2.0 * self.gamma * s[i] * s[i] / (u * u * u);
            }
            let mut dk: Vec<f64> = r.iter().map(|v| -v).collect();
            if !thomas(&lower, &diag, &upper, &mut dk) {
                break;
            }
            let mut step = 1.0;
            let mut trial = k.to_vec();
            let accepted = loop {
                for j in 0..m {
                    trial[j + 1] = k[j + 1] + step * dk[j];
                }
                let (rn, scn, un) = self.residual(&trial);
                if self.admissible(&un) {
                    let mn = Self::merit(&rn, &scn);
                    if mn < merit {
                        break Some((rn, un, mn));
                    }
                }
                step *= 0.5;
                if step < 1e-8 {
                    break None;
                }
            };
            match accepted {
                Some((rn, un, mn)) => {
                    k.copy_from_slice(&trial);
                    r = rn;
                    us = un;
                    merit = mn;
                }
                None => break,
            }
        }
        (merit, it)
    }
}

/// Initial guess with the endpoint dominant-balance shape `u ~ A x^(2/3)`.
fn asymptotic_guess(p: &PhysicalParams, spec: &StrokeSpec, s: &[f64], mu: f64) -> Vec<f64> {
    let dgam = p.diffusion() * p.gamma;
    let dir = spec.direction();
    let c = spec.el_form.duration_factor();
    let len = (spec.s_f - spec.s_i).abs();
    let amp = |sv: f64| (9.0 * c * p.gamma * sv * sv / (4.0 * mu)).cbrt();
    let (a_i, a_f) = (amp(spec.s_i), amp(spec.s_f));
    let shrink = if dir < 0.0 { 2.0_f64.cbrt() } else { 1.0 };
    let n = s.len();
    let mut k: Vec<f64> = s
        .iter()
        .map(|&sv| {
            let x = (sv - spec.s_i).abs();
            let a = (a_i + (a_f - a_i) * x / len) / shrink;
            let u = dir * a * (x * (len - x) / len).max(0.0).powf(2.0 / 3.0);
            (dgam - u) / sv
        })
        .collect();
    k[0] = dgam / spec.s_i;
    k[n - 1] = dgam / spec.s_f;
    k
}

/// Derivative of `k` over the nonuniform grid `s`, second order everywhere.
fn mesh_derivative(s: &[f64], k: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let hm = s[i] - s[i - 1];
        let hp = s[i + 1] - s[i];
        d[i] = (hm * hm * k[i + 1] - hp * hp * k[i - 1] + (hp * hp - hm * hm) * k[i]) / (hm * hp * (hm + hp));
    }
    let one_sided = |x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64| {
        let h1 = x1 - x0;
        let h2 = x2 - x0;
        (-(h1 + h2) / (h1 * h2)) * y0 + (h2 / (h1 * (h2 - h1))) * y1 - (h1 / (h2 * (h2 - h1))) * y2
    };
    d[0] = one_sided(s[0], s[1], s[2], k[0], k[1], k[2]);
    d[n - 1] = one_sided(s[n - 1], s[n - 2], s[n - 3], k[n - 1], k[n - 2], k[n - 3]);
    d
}

/// Solves the Euler-Lagrange equation for `kbar(s)` with equilibrium
/// Dirichlet data. For compression strokes (`s_f < s_i`) the right-hand
/// side is multiplied by `sign(s_f - s_i)`, which keeps the cost positive
/// when the variance decreases.
pub fn solve_euler_lagrange(p: &PhysicalParams, spec: &StrokeSpec) -> Result<ElSolution> {
    spec.validate()?;
    let s = graded_mesh(spec.s_i, spec.s_f, spec.mesh_size);
    let dgam = p.diffusion() * p.gamma;
    let problem_for = |mu: f64| ElProblem {
        s: &s,
        dgam,
        gamma: p.gamma,
        mu,
        lam_term: spec.weights.lambda * p.mass * p.mass / (8.0 * p.gamma * p.hbar * p.hbar),
        c: spec.el_form.duration_factor(),
        dir: spec.direction(),
    };
    let mu = spec.weights.mu;

    let mut k = asymptotic_guess(p, spec, &s, mu);
    let (mut res, mut iters) = problem_for(mu).newton(&mut k);
    let mut stages = 1;

    if res >= ACCEPTABLE {
        // Continuation from a stiffer regularization.
        let mut mu_c = 10.0 * mu;
        k = asymptotic_guess(p, spec, &s, mu_c);
        loop {
            let (r, it) = problem_for(mu_c).newton(&mut k);
            iters += it;
            stages += 1;
            res = r;
            if mu_c == mu || r >= ACCEPTABLE {
                break;
            }
            mu_c = (0.5 * mu_c).max(mu);
        }
        if res >= ACCEPTABLE {
            return Err(Error::NewtonFailed { residual: res, mu: mu_c });
        }
    }

    let problem = problem_for(mu);
    let (r, sc, us) = problem.residual(&k);
    if let Some(j) = us.iter().position(|u| !(problem.dir * u > 0.0)) {
        return Err(Error::SignViolation { node: j + 1, s: s[j + 1] });
    }
    let scaled = ElProblem::merit(&r, &sc);
    let raw = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let kp = mesh_derivative(&s, &k);
    Ok(ElSolution {
        profile: StiffnessProfile::new(Domain::Variance, s, k, kp)?,
        scaled_residual: scaled,
        raw_residual: raw,
        iterations: iters,
        stages,
    })
}

/// Least-squares power law `f = C x^(-q)` through three points.
fn power_fit(xs: &[f64], fs: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let lf: Vec<f64> = fs.iter().map(|f| f.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let mf = lf.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxf: f64 = lx.iter().zip(&lf).map(|(x, f)| (x - mx) * (f - mf)).sum();
    let q = -sxf / sxx;
    let c = (mf + q * mx).exp();
    (q, c)
}

/// Absolute duration integrand `|gamma / (2 u)|` on the profile nodes.
fn duration_integrand(p: &PhysicalParams, profile: &StiffnessProfile) -> Vec<f64> {
    let dgam = p.diffusion() * p.gamma;
    profile
        .grid
        .iter()
        .zip(&profile.kbar)
        .map(|(&s, &k)| (p.gamma / (2.0 * (dgam - s * k))).abs())
        .collect()
}

/// Cumulative time `t(s)` on the profile nodes, power-law ends included.
fn cumulative_time(p: &PhysicalParams, profile: &StiffnessProfile) -> Result<Vec<f64>> {
    if profile.domain != Domain::Variance {
        return Err(Error::invalid("duration needs a variance-domain profile"));
    }
    let s = &profile.grid;
    let n = s.len();
    if n < 8 {
        return Err(Error::invalid("profile needs at least eight nodes"));
    }
    let f = duration_integrand(p, profile);
    for (i, v) in f.iter().enumerate().take(n - 1).skip(1) {
        if !v.is_finite() {
            let endpoint = if i < n / 2 { "initial" } else { "final" };
            return Err(Error::NonIntegrable { endpoint, exponent: f64::INFINITY });
        }
    }
    let xl: Vec<f64> = (1..4).map(|i| (s[i] - s[0]).abs()).collect();
    let (ql, cl) = power_fit(&xl, &f[1..4]);
    if !(ql < 1.0) || !ql.is_finite() {
        return Err(Error::NonIntegrable { endpoint: "initial", exponent: ql });
    }
    let xr: Vec<f64> = (n - 4..n - 1).map(|i| (s[n - 1] - s[i]).abs()).collect();
    let (qr, cr) = power_fit(&xr, &f[n - 4..n - 1]);
    if !(qr < 1.0) || !qr.is_finite() {
        return Err(Error::NonIntegrable { endpoint: "final", exponent: qr });
    }

    let left = |x: f64| cl * x.powf(1.0 - ql) / (1.0 - ql);
    let right = |y: f64| cr * y.powf(1.0 - qr) / (1.0 - qr);
    let mut t = vec![0.0; n];
    for i in 1..4 {
        t[i] = left((s[i] - s[0]).abs());
    }
    for i in 4..n - 3 {
        t[i] = t[i - 1] + 0.5 * (f[i] + f[i - 1]) * (s[i] - s[i - 1]).abs();
    }
    let y_anchor = (s[n - 1] - s[n - 4]).abs();
    for i in n - 3..n {
        t[i] = t[n - 4] + right(y_anchor) - right((s[n - 1] - s[i]).abs());
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonIntegrable { endpoint: "interior", exponent: f64::NAN });
    }
    Ok(t)
}

/// `Delta t = (gamma/2) int ds / (D gamma - kbar s)` for a profile over `s`.
pub fn duration(p: &PhysicalParams, profile: &StiffnessProfile) -> Result<f64> {
    cumulative_time(p, profile).map(|t| t[t.len() - 1])
}

/// Maps a variance-domain profile to a uniform time grid of step close to
/// `dt`. Returns the predicted variance trajectory and the time-domain
/// stiffness with its time derivative from the chain rule.
pub fn reparameterize(
    p: &PhysicalParams,
    profile: &StiffnessProfile,
    dt: f64,
) -> Result<(VarianceTrajectory, StiffnessProfile)> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    let t_nodes = cumulative_time(p, profile)?;
    let total = t_nodes[t_nodes.len() - 1];
    let steps = (total / dt).ceil().max(4.0) as usize;
    let tg = linspace(0.0, total, steps + 1);

    let s_of_t = Pchip::new(t_nodes, profile.grid.clone());
    let (sx, kx, kpx) = if profile.grid[1] > profile.grid[0] {
        (profile.grid.clone(), profile.kbar.clone(), profile.kbar_prime.clone())
    } else {
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
        (rev(&profile.grid), rev(&profile.kbar), rev(&profile.kbar_prime))
    };
    let k_of_s = Pchip::new(sx.clone(), kx);
    let kp_of_s = Pchip::new(sx, kpx);

    let n = tg.len();
    let mut s_vals = Vec::with_capacity(n);
    let mut s_dot = Vec::with_capacity(n);
    let mut kbar = Vec::with_capacity(n);
    let mut kbar_dot = Vec::with_capacity(n);
    for (i, &t) in tg.iter().enumerate() {
        let s = if i == 0 {
            profile.grid[0]
        } else if i == n - 1 {
            profile.grid[profile.grid.len() - 1]
        } else {
            s_of_t.eval(t)
        };
        let (k, kp) = if i == 0 {
            (profile.kbar[0], profile.kbar_prime[0])
        } else if i == n - 1 {
            let m = profile.kbar.len() - 1;
            (profile.kbar[m], profile.kbar_prime[m])
        } else {
            (k_of_s.eval(s), kp_of_s.eval(s))
        };
        let sd = variance_rate(p, k, s);
        s_vals.push(s);
        s_dot.push(sd);
        kbar.push(k);
        kbar_dot.push(kp * sd);
    }
    let traj = VarianceTrajectory { times: tg.clone(), s_vals, s_dot };
    let time_profile = StiffnessProfile::new(Domain::Time, tg, kbar, kbar_dot)?;
    Ok((traj, time_profile))
}

/// A synthesized stroke with its intermediate products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub spec: StrokeSpec,
    pub protocol: Protocol,
    pub duration: f64,
    pub solution: ElSolution,
    pub trajectory: VarianceTrajectory,
    pub time_profile: StiffnessProfile,
}

/// Solve, reparameterize onto a grid of step `dt`, and map through the
/// bridge relation to physical controls. The atom number comes from `p`.
pub fn synthesize_stroke(p: &PhysicalParams, spec: &StrokeSpec, dt: f64) -> Result<Stroke> {
    let solution = solve_euler_lagrange(p, spec)?;
    let dur = duration(p, &solution.profile)?;
    let (trajectory, time_profile) = reparameterize(p, &solution.profile, dt)?;
    let protocol = controls_from_classical(p, &time_profile, &trajectory, spec.fixed_knob, spec.held_value)?;
    Ok(Stroke { spec: *spec, protocol, duration: dur, solution, trajectory, time_profile })
}

/// Duration of the stroke for each candidate `lambda`, other settings fixed.
pub fn lambda_scan(p: &PhysicalParams, spec: &StrokeSpec, lambdas: &[f64], exec: Execution) -> Vec<(f64, Result<f64>)> {
    exec.map(lambdas, |&lam| {
        let mut sp = *spec;
        sp.weights.lambda = lam;
        let r = solve_euler_lagrange(p, &sp).and_then(|sol| duration(p, &sol.profile));
        (lam, r)
    })
}

/// `int alpha^2 dt` along a variance trajectory, using
/// `alpha = (m / 2 hbar) sigma_dot / sigma = (m / 4 hbar) s_dot / s`.
pub fn accumulated_phase_cost(p: &PhysicalParams, traj: &VarianceTrajectory) -> f64 {
    let c = p.mass / (4.0 * p.hbar);
    let a2: Vec<f64> = traj.s_dot.iter().zip(&traj.s_vals).map(|(sd, s)| (c * sd / s).powi(2)).collect();
    trapezoid(&traj.times, &a2)
}

/// Variance path `s_i -> s_f` over `[0, total]` shaped as a tanh step of
/// the given steepness, rescaled to hit both endpoints exactly.
pub fn tanh_variance_path(s_i: f64, s_f: f64, total: f64, steepness: f64, samples: usize) -> VarianceTrajectory {
    let times = linspace(0.0, total, samples.max(2));
    let th = steepness.tanh();
    let mut s_vals = Vec::with_capacity(times.len());
    let mut s_dot = Vec::with_capacity(times.len());
    for &t in &times {
        let z = steepness * (2.0 * t / total - 1.0);
        let w = (z.tanh() + th) / (2.0 * th);
        let sech = 1.0 / z.cosh();
        s_vals.push(s_i + (s_f - s_i) * w);
        s_dot.push((s_f - s_i) * sech * sech * steepness / (total * th));
    }
    VarianceTrajectory { times, s_vals, s_dot }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{check_stationarity, variance_evolve};
    use crate::numerics::interp_linear;
    use std::f64::consts::PI;

    fn unit() -> PhysicalParams {
        PhysicalParams::normalized(1.0).unwrap()
    }

    fn g_stroke(lambda: f64, mu: f64) -> StrokeSpec {
        StrokeSpec::new(1.0, 2.0, CostWeights::new(lambda, mu).unwrap(), Knob::Kappa, 1.0).unwrap()
    }

    #[test]
    fn phase_cost_values() {
        let p = unit();
        assert_eq!(phase_cost(&p, 1.0, 0.0), 1.0 / 16.0);
        assert_eq!(phase_cost(&p, 2.0, 0.25), 0.0);
        assert!(phase_cost(&p, 2.0, 0.1) > 0.0);
        assert!(phase_cost(&p, 2.0, 0.4) < 0.0);
    }

    #[test]
    fn weights_and_spec_validation() {
        assert!(CostWeights::new(8.0, 0.0).is_err());
        assert!(CostWeights::new(-1.0, 1.0).is_err());
        let w = CostWeights::new(8.0, 1.0).unwrap();
        assert!(StrokeSpec::new(1.0, 1.0, w, Knob::Kappa, 1.0).is_err());
        let mut s = StrokeSpec::new(1.0, 2.0, w, Knob::Kappa, 1.0).unwrap();
        s.mesh_size = 32;
        assert!(s.validate().is_err());
    }

    #[test]
    fn graded_mesh_clusters_at_ends() {
        let s = graded_mesh(1.0, 2.0, 129);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[128], 2.0);
        let h0 = s[1] - s[0];
        let hmid = s[65] - s[64];
        assert!(h0 < 0.1 * hmid);
        let d = graded_mesh(2.0, 1.0, 129);
        assert!(d.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn constant_offset_duration_is_exact() {
        let p = unit();
        let c = 0.2;
        let s = graded_mesh(1.0, 3.0, 257);
        let k: Vec<f64> = s.iter().map(|s| (0.5 - c) / s).collect();
        let kp: Vec<f64> = s.iter().map(|s| -(0.5 - c) / (s * s)).collect();
        let prof = StiffnessProfile::new(Domain::Variance, s, k, kp).unwrap();
        let d = duration(&p, &prof).unwrap();
        assert!((d - 2.0 / (2.0 * c)).abs() < 1e-12, "{d}");
    }

    #[test]
    fn equilibrium_profile_is_not_integrable() {
        let p = unit();
        let s = graded_mesh(1.0, 2.0, 129);
        let k: Vec<f64> = s.iter().map(|s| 0.5 / s).collect();
        let kp = vec![0.0; s.len()];
        let prof = StiffnessProfile::new(Domain::Variance, s, k, kp).unwrap();
        assert!(matches!(duration(&p, &prof), Err(Error::NonIntegrable { .. })));
    }

    #[test]
    fn expansion_converges_below_tolerance() {
        let p = unit();
        let sol = solve_euler_lagrange(&p, &g_stroke(8.0, 0.5)).unwrap();
        assert!(sol.scaled_residual < 1e-8, "{}", sol.scaled_residual);
        let k = &sol.profile.kbar;
        assert_eq!(k[0], 0.5);
        assert_eq!(k[k.len() - 1], 0.25);
        for (s, k) in sol.profile.grid.iter().zip(k).skip(1).take(k.len() - 2) {
            assert!(0.5 - s * k > 0.0);
        }
    }

    #[test]
    fn compression_converges_and_keeps_transit_sign() {
        let p = unit();
        let spec = StrokeSpec::new(4.9423, 2.7048, CostWeights::new(0.01, 0.5).unwrap(), Knob::G, 0.031).unwrap();
        let sol = solve_euler_lagrange(&p, &spec).unwrap();
        assert!(sol.scaled_residual < 1e-8);
        for (s, k) in sol.profile.grid.iter().zip(&sol.profile.kbar).skip(1).take(spec.mesh_size - 2) {
            assert!(0.5 - s * k < 0.0);
        }
        assert!(duration(&p, &sol.profile).unwrap() > 0.0);
    }

    #[test]
    fn endpoint_exponent_approaches_two_thirds() {
        // Local exponent of u between nodes 16 and 64. At a fixed node index
        // the graded mesh sees a self-similar discretization error, so the
        // window moves towards the endpoint only through refinement.
        let p = unit();
        let local = |n: usize| {
            let mut spec = g_stroke(8.0, 1.0);
            spec.mesh_size = n;
            let sol = solve_euler_lagrange(&p, &spec).unwrap();
            let s = &sol.profile.grid;
            let u = |i: usize| 0.5 - s[i] * sol.profile.kbar[i];
            (u(64) / u(16)).ln() / ((s[64] - s[0]) / (s[16] - s[0])).ln()
        };
        let coarse = local(1025);
        let fine = local(16385);
        assert!((fine - 2.0 / 3.0).abs() < (coarse - 2.0 / 3.0).abs(), "{coarse} {fine}");
        assert!((fine - 2.0 / 3.0).abs() < 0.005, "q = {fine}");
    }

    #[test]
    fn duration_shrinks_with_mu() {
        let p = unit();
        let d: Vec<f64> = [0.1, 0.5, 1.0]
            .iter()
            .map(|&mu| duration(&p, &solve_euler_lagrange(&p, &g_stroke(8.0, mu)).unwrap().profile).unwrap())
            .collect();
        assert!(d[0] < d[1] && d[1] < d[2], "{d:?}");
    }

    #[test]
    fn reversed_stroke_runs_on_mirrored_mesh() {
        let p = unit();
        let w = CostWeights::new(0.0, 0.5).unwrap();
        let mut fwd = StrokeSpec::new(1.0, 2.0, w, Knob::Kappa, 1.0).unwrap();
        let mut bwd = StrokeSpec::new(2.0, 1.0, w, Knob::Kappa, 1.0).unwrap();
        fwd.mesh_size = 513;
        bwd.mesh_size = 513;
        let a = solve_euler_lagrange(&p, &fwd).unwrap();
        let b = solve_euler_lagrange(&p, &bwd).unwrap();
        let n = a.profile.grid.len();
        for i in 0..n {
            let j = n - 1 - i;
            assert!((a.profile.grid[i] - b.profile.grid[j]).abs() < 1e-12);
        }
        assert_eq!(a.profile.kbar[0], b.profile.kbar[n - 1]);
        assert_eq!(a.profile.kbar[n - 1], b.profile.kbar[0]);
        for i in 1..n - 1 {
            let j = n - 1 - i;
            assert!(0.5 - a.profile.grid[i] * a.profile.kbar[i] > 0.0);
            assert!(0.5 - b.profile.grid[j] * b.profile.kbar[j] < 0.0);
        }
        // Relaxing towards a wider state is helped by diffusion, so the
        // compression is the slower leg.
        let da = duration(&p, &a.profile).unwrap();
        let db = duration(&p, &b.profile).unwrap();
        assert!(da > 0.0 && db > 0.0);
    }

    #[test]
    fn reparameterized_variance_matches_direct_integration() {
        let p = unit();
        let sol = solve_euler_lagrange(&p, &g_stroke(8.0, 0.5)).unwrap();
        let (traj, prof_t) = reparameterize(&p, &sol.profile, 0.002).unwrap();
        assert_eq!(traj.times[0], 0.0);
        let d = duration(&p, &sol.profile).unwrap();
        assert!((traj.times[traj.times.len() - 1] - d).abs() < 1e-12);
        let kb = |t: f64| interp_linear(&prof_t.grid, &prof_t.kbar, t);
        let direct = variance_evolve(&p, &kb, 1.0, &traj.times).unwrap();
        let worst = traj
            .s_vals
            .iter()
            .zip(&direct.s_vals)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "worst {worst}");
    }

    #[test]
    fn synthesized_endpoints_are_stationary() {
        let p = unit();
        let stroke = synthesize_stroke(&p, &g_stroke(8.0, 0.5), 0.002).unwrap();
        let proto = &stroke.protocol;
        assert!(check_stationarity(&p, proto, false).abs() < 1e-8);
        assert!(check_stationarity(&p, proto, true).abs() < 1e-8);
        assert!((proto.g[0] - 3.0 * PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn tanh_path_hits_endpoints() {
        let tr = tanh_variance_path(1.0, 2.0, 3.0, 2.0, 301);
        assert!((tr.s_vals[0] - 1.0).abs() < 1e-15);
        assert!((tr.s_vals[300] - 2.0).abs() < 1e-15);
        let area = trapezoid(&tr.times, &tr.s_dot);
        assert!((area - 1.0).abs() < 1e-4);
    }
}
