//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys set the unit mode, output
//! directory and seed; `[physics]` and `[solver]` hold shared settings; the
//! remaining tables describe what each subcommand runs. Unknown keys are
//! errors everywhere.

use std::path::{Path, PathBuf};

use feshbach_core::engine::{Direction, StrokeWeights};
use feshbach_core::optimal::{ElForm, DEFAULT_MESH};
use feshbach_core::units::{to_normalized, NormalizedUnits, QuantityKind, LITHIUM7_MASS, HBAR_SI};
use feshbach_core::{Knob, PhysicalParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    #[default]
    Normalized,
    Si,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub units: UnitMode,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub solver: Solver,
    pub equilibrium: Option<EquilibriumBlock>,
    pub stroke: Option<StrokeBlock>,
    pub step: Option<StepBlock>,
    pub validate: Option<ValidateBlock>,
    pub cycle: Option<CycleBlock>,
    pub sweep: Option<SweepBlock>,
    pub mc: Option<McBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default = "one")]
    pub atom_count: f64,
    /// Drag coefficient of the classical analogue (normalized mode only).
    pub gamma: Option<f64>,
    /// Particle mass in kg; lithium-7 when absent.
    pub mass_kg: Option<f64>,
    /// Trap reference frequency `omega0 / 2 pi`; required in SI mode.
    pub frequency_hz: Option<f64>,
}

impl Default for Physics {
    fn default() -> Self {
        Physics { atom_count: 1.0, gamma: None, mass_kg: None, frequency_hz: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub mesh_size: usize,
    pub el_form: ElForm,
    pub protocol_dt: f64,
    pub gpe_dt: f64,
    pub n_points: usize,
    pub grid_span: f64,
    pub ground_tolerance: f64,
    pub norm_tolerance: f64,
    pub boundary_limit: f64,
    pub w_irr_ratio: f64,
    pub endpoint_drift: f64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            mesh_size: DEFAULT_MESH,
            el_form: ElForm::Published,
            protocol_dt: 1e-3,
            gpe_dt: 1e-3,
            n_points: 1024,
            grid_span: 10.0,
            ground_tolerance: 1e-12,
            norm_tolerance: 1e-8,
            boundary_limit: 1e-6,
            w_irr_ratio: 0.02,
            endpoint_drift: 0.005,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumBlock {
    pub kappa: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeBlock {
    pub s_i: f64,
    pub s_f: f64,
    pub lambda: f64,
    pub mu: Vec<f64>,
    /// The control held constant; the other one follows.
    pub fixed: Knob,
    pub held: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepBlock {
    pub s_low: f64,
    pub s_high: f64,
    pub t_up: f64,
    pub t_down: f64,
    pub rise: f64,
    pub total: f64,
    pub fixed: Knob,
    pub held: f64,
    #[serde(default = "step_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {
    pub protocol: Option<PathBuf>,
    /// Frozen-control continuation after the protocol, in trap periods.
    #[serde(default)]
    pub hold_periods: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleBlock {
    pub kappa_i: f64,
    pub kappa_f: f64,
    pub g_i: f64,
    pub g_f: f64,
    pub lambda: f64,
    pub mu: StrokeWeights,
    #[serde(default = "four")]
    pub repeats: usize,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub hold_after: f64,
    #[serde(default)]
    pub dwell: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub mu_scales: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McKind {
    Stationary,
    Quench,
    Protocol,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub kind: McKind,
    #[serde(default = "particles")]
    pub n_particles: usize,
    /// Defaults to a five-hundredth of the trap period.
    pub dt: Option<f64>,
    #[serde(default = "one")]
    pub initial_variance: f64,
    /// Classical stiffness after the quench.
    pub kbar: Option<f64>,
    #[serde(default = "mc_t_end")]
    pub t_end: f64,
    #[serde(default = "mc_samples")]
    pub samples: usize,
}

fn one() -> f64 {
    1.0
}
fn four() -> usize {
    4
}
fn step_samples() -> usize {
    3001
}
fn particles() -> usize {
    10_000
}
fn mc_t_end() -> f64 {
    6.0
}
fn mc_samples() -> usize {
    61
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sc: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if sc.units == UnitMode::Si && sc.physics.frequency_hz.is_none() {
            return Err(CliError::Config("physics.frequency_hz is required when units = \"si\"".into()));
        }
        if sc.units == UnitMode::Si && sc.physics.gamma.is_some() {
            return Err(CliError::Config("physics.gamma is fixed to m omega0 when units = \"si\"".into()));
        }
        Ok(sc)
    }

    /// Parameters the numerics run in; always the normalized system.
    pub fn params(&self) -> Result<PhysicalParams, CliError> {
        let p = PhysicalParams::normalized(self.physics.atom_count)?;
        Ok(match self.physics.gamma {
            Some(g) => p.with_gamma(g)?,
            None => p,
        })
    }

    /// SI scales of the normalized units, when a frequency is known.
    pub fn reference(&self) -> Option<NormalizedUnits> {
        let f = self.physics.frequency_hz?;
        let mass = self.physics.mass_kg.unwrap_or(LITHIUM7_MASS);
        let w0 = 2.0 * std::f64::consts::PI * f;
        PhysicalParams::new(mass, HBAR_SI, mass * w0, self.physics.atom_count, w0).ok().map(|p| p.units())
    }

    /// Converts a configured value to normalized units.
    pub fn norm(&self, value: f64, kind: QuantityKind) -> f64 {
        match (self.units, self.reference()) {
            (UnitMode::Si, Some(u)) => to_normalized(value, kind, &u),
            _ => value,
        }
    }

    pub fn held_kind(knob: Knob) -> QuantityKind {
        match knob {
            Knob::Kappa => QuantityKind::Stiffness,
            Knob::G => QuantityKind::Coupling,
        }
    }
}

pub fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    block.as_ref().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let err = ScenarioFile::parse("[equilibrium]\nkapa = 1.0\ng = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("kapa"), "{err}");
        let err = ScenarioFile::parse("colour = 1\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn si_mode_needs_a_frequency() {
        assert!(ScenarioFile::parse("units = \"si\"\n").is_err());
        let sc = ScenarioFile::parse("units = \"si\"\n[physics]\nfrequency_hz = 17.5\n").unwrap();
        let u = sc.reference().unwrap();
        let t = sc.norm(u.time * 3.0, QuantityKind::Time);
        assert!((t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn defaults_fill_in() {
        let sc = ScenarioFile::parse("[equilibrium]\nkappa = 1.0\ng = 0.0\n").unwrap();
        assert_eq!(sc.solver.n_points, 1024);
        assert_eq!(sc.physics.atom_count, 1.0);
        assert_eq!(sc.units, UnitMode::Normalized);
    }
}
