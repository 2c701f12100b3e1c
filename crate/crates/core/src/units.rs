//! Physical parameters, the harmonic-oscillator unit system, and the value
//! types shared across modules.
//!
//! Internally every routine works in whatever consistent unit system the
//! supplied [`PhysicalParams`] are expressed in. The intended use is the
//! normalized system `hbar = m = omega0 = 1`, with SI only at the I/O edge.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Mass of a lithium-7 atom, kg.
pub const LITHIUM7_MASS: f64 = 1.17e-26;
/// One quectowatt in watts.
pub const QUECTOWATT: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    /// Drag coefficient of the classical analogue.
    pub gamma: f64,
    pub atom_count: f64,
    /// Reference angular frequency omega0.
    pub ref_frequency: f64,
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64, gamma: f64, atom_count: f64, ref_frequency: f64) -> Result<Self> {
        let p = PhysicalParams { mass, hbar, gamma, atom_count, ref_frequency };
        p.validate()?;
        Ok(p)
    }

    /// `hbar = m = omega0 = 1` and `gamma = m omega0 = 1`.
    pub fn normalized(atom_count: f64) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, atom_count, 1.0)
    }

    /// SI parameters for lithium-7 in a trap of reference frequency `f_hz`.
    /// The drag is set to `m omega0`, the SI image of the normalized choice.
    pub fn lithium7(atom_count: f64, f_hz: f64) -> Result<Self> {
        let w0 = 2.0 * std::f64::consts::PI * f_hz;
        Self::new(LITHIUM7_MASS, HBAR_SI, LITHIUM7_MASS * w0, atom_count, w0)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("hbar", self.hbar),
            ("gamma", self.gamma),
            ("ref_frequency", self.ref_frequency),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !(self.atom_count.is_finite() && self.atom_count >= 1.0) {
            return Err(Error::invalid(format!("atom_count must be >= 1, got {}", self.atom_count)));
        }
        Ok(())
    }

    /// Quantum diffusion constant `hbar / 2m`.
    pub fn diffusion(&self) -> f64 {
        self.hbar / (2.0 * self.mass)
    }

    pub fn units(&self) -> NormalizedUnits {
        NormalizedUnits::from_params(self)
    }
}

/// Harmonic-oscillator units built from `hbar`, `m` and `omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedUnits {
    pub length: f64,
    pub time: f64,
    pub energy: f64,
    pub stiffness: f64,
    pub coupling: f64,
    pub power: f64,
}

impl NormalizedUnits {
    pub fn from_params(p: &PhysicalParams) -> Self {
        let length = (p.hbar / (p.mass * p.ref_frequency)).sqrt();
        let energy = p.hbar * p.ref_frequency;
        NormalizedUnits {
            length,
            time: 1.0 / p.ref_frequency,
            energy,
            stiffness: p.mass * p.ref_frequency * p.ref_frequency,
            coupling: energy * length,
            power: energy * p.ref_frequency,
        }
    }

    pub fn unit_of(&self, kind: QuantityKind) -> f64 {
        match kind {
            QuantityKind::Length => self.length,
            QuantityKind::Time => self.time,
            QuantityKind::Variance => self.length * self.length,
            QuantityKind::Stiffness => self.stiffness,
            QuantityKind::Coupling => self.coupling,
            QuantityKind::Energy => self.energy,
            QuantityKind::Power => self.power,
            QuantityKind::Frequency => 1.0 / self.time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantityKind {
    Length,
    Time,
    Variance,
    Stiffness,
    Coupling,
    Energy,
    Power,
    Frequency,
}

impl QuantityKind {
    pub const ALL: [QuantityKind; 8] = [
        QuantityKind::Length,
        QuantityKind::Time,
        QuantityKind::Variance,
        QuantityKind::Stiffness,
        QuantityKind::Coupling,
        QuantityKind::Energy,
        QuantityKind::Power,
        QuantityKind::Frequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuantityKind::Length => "length",
            QuantityKind::Time => "time",
            QuantityKind::Variance => "variance",
            QuantityKind::Stiffness => "stiffness",
            QuantityKind::Coupling => "coupling",
            QuantityKind::Energy => "energy",
            QuantityKind::Power => "power",
            QuantityKind::Frequency => "frequency",
        }
    }
}

impl fmt::Display for QuantityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuantityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuantityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown quantity kind `{s}`")))
    }
}

pub fn to_normalized(value: f64, kind: QuantityKind, units: &NormalizedUnits) -> f64 {
    value / units.unit_of(kind)
}

pub fn to_si(value: f64, kind: QuantityKind, units: &NormalizedUnits) -> f64 {
    value * units.unit_of(kind)
}

/// Converts watts to quectowatts.
pub fn power_in_qw(power_watts: f64) -> f64 {
    power_watts / QUECTOWATT
}

/// Width of the Gaussian density and its rate of change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub sigma: f64,
    pub sigma_dot: f64,
}

impl GaussianState {
    pub fn new(sigma: f64, sigma_dot: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) || !sigma_dot.is_finite() {
            return Err(Error::invalid(format!("Gaussian width must be positive, got sigma={sigma}")));
        }
        Ok(GaussianState { sigma, sigma_dot })
    }

    /// Phase curvature `(m / 2 hbar) sigma_dot / sigma`.
    pub fn alpha(&self, p: &PhysicalParams) -> f64 {
        p.mass / (2.0 * p.hbar) * self.sigma_dot / self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Which physical control a stroke holds constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Knob {
    Kappa,
    G,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMeta {
    /// Some sample has `kappa <= 0`.
    pub trap_inversion: bool,
    /// Some sample has `g < 0`.
    pub negative_g: bool,
    pub notes: Vec<String>,
}

/// Sampled control schedule with the variance it is predicted to produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub times: Vec<f64>,
    pub kappa: Vec<f64>,
    pub g: Vec<f64>,
    pub s_pred: Vec<f64>,
    pub atom_count: f64,
    pub meta: ProtocolMeta,
}

impl Protocol {
    pub fn new(times: Vec<f64>, kappa: Vec<f64>, g: Vec<f64>, s_pred: Vec<f64>, atom_count: f64) -> Result<Self> {
        let n = times.len();
        if n < 2 || kappa.len() != n || g.len() != n || s_pred.len() != n {
            return Err(Error::invalid("protocol arrays must share a length of at least 2"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("protocol times must be strictly increasing"));
        }
        if s_pred.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("predicted variance must be positive"));
        }
        let meta = ProtocolMeta {
            trap_inversion: kappa.iter().any(|&k| k <= 0.0),
            negative_g: g.iter().any(|&v| v < 0.0),
            notes: Vec::new(),
        };
        Ok(Protocol { times, kappa, g, s_pred, atom_count, meta })
    }

    /// Constant controls held for `duration`.
    pub fn hold(kappa: f64, g: f64, s: f64, atom_count: f64, duration: f64, samples: usize) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::invalid("hold duration must be positive"));
        }
        let n = samples.max(2);
        let times = (0..n).map(|i| duration * i as f64 / (n - 1) as f64).collect();
        Self::new(times, vec![kappa; n], vec![g; n], vec![s; n], atom_count)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }

    /// Linearly interpolated `(kappa, g)` at time `t`, clamped to the ends.
    pub fn controls_at(&self, t: f64) -> (f64, f64) {
        let n = self.len();
        if t <= self.times[0] {
            return (self.kappa[0], self.g[0]);
        }
        if t >= self.times[n - 1] {
            return (self.kappa[n - 1], self.g[n - 1]);
        }
        let j = self.times.partition_point(|&x| x <= t).saturating_sub(1).min(n - 2);
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        (
            self.kappa[j] + w * (self.kappa[j + 1] - self.kappa[j]),
            self.g[j] + w * (self.g[j + 1] - self.g[j]),
        )
    }

    /// Linearly interpolated predicted variance at `t`.
    pub fn s_at(&self, t: f64) -> f64 {
        crate::numerics::interp_linear(&self.times, &self.s_pred, t)
    }

    /// Concatenates `next` after `self`, shifting its clock. The shared
    /// boundary sample is kept once.
    pub fn then(&self, next: &Protocol) -> Protocol {
        let offset = self.times[self.len() - 1] - next.times[0];
        let mut out = self.clone();
        for i in 1..next.len() {
            out.times.push(next.times[i] + offset);
            out.kappa.push(next.kappa[i]);
            out.g.push(next.g[i]);
            out.s_pred.push(next.s_pred[i]);
        }
        out.meta.trap_inversion |= next.meta.trap_inversion;
        out.meta.negative_g |= next.meta.negative_g;
        out.meta.notes.extend(next.meta.notes.iter().cloned());
        out
    }
}
