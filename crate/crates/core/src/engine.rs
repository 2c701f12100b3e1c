//! Four-stroke engine cycles built from optimal strokes.
//!
//! Corners are `A = (kappa_i, g_i)`, `B = (kappa_f, g_i)`, `C = (kappa_f, g_f)`
//! and `D = (kappa_i, g_f)`. The forward cycle runs A-B-C-D-A, alternating
//! stiffness and interaction strokes; the reverse cycle runs A-D-C-B-A and
//! reuses the weight of the forward stroke it retraces. Energy gaps come from
//! Gross-Pitaevskii ground states at the corners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpe::{
    ground_state, observables, propagate, work_integral, GroundStateOptions, PropagationOptions, SpatialGrid,
    Trajectory, WaveFunction, DEFAULT_POINTS, DEFAULT_SPAN,
};
use crate::optimal::{synthesize_stroke, CostWeights, ElForm, Stroke, StrokeSpec, DEFAULT_MESH};
use crate::par::Execution;
use crate::units::{power_in_qw, Knob, NormalizedUnits, PhysicalParams, Protocol};
use crate::variational::{equilibrium_width, TrapConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Reverse,
}

/// Smoothness weight of each forward stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeWeights {
    pub ab: f64,
    pub bc: f64,
    pub cd: f64,
    pub da: f64,
}

impl StrokeWeights {
    pub fn scaled(&self, f: f64) -> Self {
        StrokeWeights { ab: self.ab * f, bc: self.bc * f, cd: self.cd * f, da: self.da * f }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub kappa_i: f64,
    pub kappa_f: f64,
    pub g_i: f64,
    pub g_f: f64,
    pub atom_count: f64,
    pub lambda: f64,
    pub mu_by_stroke: StrokeWeights,
    pub repeats: usize,
    pub direction: Direction,
}

impl CycleSpec {
    pub fn validate(&self) -> Result<()> {
        let controls = [self.kappa_i, self.kappa_f, self.g_i, self.g_f, self.atom_count];
        if controls.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("cycle controls and atom count must be positive"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be >= 1"));
        }
        let m = self.mu_by_stroke;
        for mu in [m.ab, m.bc, m.cd, m.da] {
            CostWeights::new(self.lambda, mu)?;
        }
        Ok(())
    }

    pub fn corner_config(&self, corner: char) -> TrapConfig {
        let (kappa, g) = match corner {
            'A' => (self.kappa_i, self.g_i),
            'B' => (self.kappa_f, self.g_i),
            'C' => (self.kappa_f, self.g_f),
            _ => (self.kappa_i, self.g_f),
        };
        TrapConfig { kappa, g, atom_count: self.atom_count }
    }

    /// Stroke labels in execution order.
    pub fn stroke_labels(&self) -> [&'static str; 4] {
        match self.direction {
            Direction::Forward => ["AB", "BC", "CD", "DA"],
            Direction::Reverse => ["AD", "DC", "CB", "BA"],
        }
    }

    fn mu_for(&self, label: &str) -> f64 {
        let m = self.mu_by_stroke;
        match label {
            "AB" | "BA" => m.ab,
            "BC" | "CB" => m.bc,
            "CD" | "DC" => m.cd,
            _ => m.da,
        }
    }
}

/// Numerical settings shared by cycle construction and propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSettings {
    /// Sample spacing of the synthesized protocols.
    pub protocol_dt: f64,
    pub mesh_size: usize,
    pub el_form: ElForm,
    /// Frozen-control dwell inserted between strokes.
    pub dwell: f64,
    /// Grid half-width in units of the widest corner state.
    pub grid_span: f64,
    pub n_points: usize,
    pub propagation: PropagationOptions,
    pub ground: GroundStateOptions,
    pub stability: StabilityThresholds,
    pub execution: Execution,
    /// SI scales of the units the run is expressed in; enables `power_qw`.
    pub si_reference: Option<NormalizedUnits>,
}

impl Default for CycleSettings {
    fn default() -> Self {
        CycleSettings {
            protocol_dt: 1e-3,
            mesh_size: DEFAULT_MESH,
            el_form: ElForm::Published,
            dwell: 0.0,
            grid_span: DEFAULT_SPAN,
            n_points: DEFAULT_POINTS,
            propagation: PropagationOptions::default(),
            ground: GroundStateOptions::default(),
            stability: StabilityThresholds::default(),
            execution: Execution::Parallel,
            si_reference: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityThresholds {
    /// Bound on `max |W_irr| / |Delta_BC|`.
    pub w_irr_ratio: f64,
    /// Bound on the relative endpoint-variance change over one cycle.
    pub endpoint_drift: f64,
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        StabilityThresholds { w_irr_ratio: 0.02, endpoint_drift: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub label: char,
    pub config: TrapConfig,
    /// Variational equilibrium variance.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStroke {
    pub label: String,
    pub from: char,
    pub to: char,
    /// `None` when both corners coincide.
    pub stroke: Option<Stroke>,
}

impl CycleStroke {
    pub fn duration(&self) -> f64 {
        self.stroke.as_ref().map_or(0.0, |s| s.protocol.duration())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub spec: CycleSpec,
    pub corners: [Corner; 4],
    pub strokes: Vec<CycleStroke>,
}

impl Cycle {
    pub fn corner(&self, label: char) -> &Corner {
        &self.corners[(label as u8 - b'A') as usize]
    }

    pub fn duration(&self) -> f64 {
        self.strokes.iter().map(CycleStroke::duration).sum()
    }

    /// Stroke protocols of one cycle, with dwells, starting at `t0`.
    fn timeline(&self, t0: f64, dwell: f64) -> Result<Vec<(String, Protocol)>> {
        let mut out = Vec::new();
        let mut t = t0;
        for (i, cs) in self.strokes.iter().enumerate() {
            if let Some(st) = &cs.stroke {
                let pr = shifted(&st.protocol, t);
                t += pr.duration();
                out.push((cs.label.clone(), pr));
            }
            if dwell > 0.0 && i + 1 < self.strokes.len() {
                let c = self.corner(cs.to);
                let n = ((dwell / 0.01).ceil() as usize).max(2);
                let hold = Protocol::hold(c.config.kappa, c.config.g, c.variance, self.spec.atom_count, dwell, n)?;
                out.push((format!("{}-dwell", cs.to), shifted(&hold, t)));
                t += dwell;
            }
        }
        Ok(out)
    }
}

fn shifted(pr: &Protocol, t0: f64) -> Protocol {
    let mut out = pr.clone();
    let off = t0 - pr.times[0];
    for t in &mut out.times {
        *t += off;
    }
    out
}

fn with_atoms(p: &PhysicalParams, n: f64) -> PhysicalParams {
    PhysicalParams { atom_count: n, ..*p }
}

/// Synthesizes the four strokes of `spec`, in parallel when allowed.
pub fn build_cycle(p: &PhysicalParams, spec: &CycleSpec, settings: &CycleSettings) -> Result<Cycle> {
    spec.validate()?;
    let pn = with_atoms(p, spec.atom_count);
    let mut corners = Vec::with_capacity(4);
    for label in ['A', 'B', 'C', 'D'] {
        let config = spec.corner_config(label);
        let sigma = equilibrium_width(&pn, &config).map_err(|e| Error::Corner { corner: label, source: Box::new(e) })?;
        corners.push(Corner { label, config, variance: sigma * sigma });
    }
    let corners: [Corner; 4] = corners.try_into().expect("four corners");
    let labels = spec.stroke_labels();
    let built = settings.execution.map(&labels, |label| {
        let from = label.as_bytes()[0] as char;
        let to = label.as_bytes()[1] as char;
        let (a, b) = (&corners[(from as u8 - b'A') as usize], &corners[(to as u8 - b'A') as usize]);
        let wrap = |e| Error::Stroke { cycle: 0, stroke: label.to_string(), source: Box::new(e) };
        if a.config == b.config {
            return Ok(CycleStroke { label: label.to_string(), from, to, stroke: None });
        }
        // Stiffness strokes hold g, interaction strokes hold kappa.
        let (knob, held) = if a.config.g == b.config.g { (Knob::G, a.config.g) } else { (Knob::Kappa, a.config.kappa) };
        let weights = CostWeights::new(spec.lambda, spec.mu_for(label)).map_err(wrap)?;
        let mut ss = StrokeSpec::new(a.variance, b.variance, weights, knob, held).map_err(wrap)?;
        ss.mesh_size = settings.mesh_size;
        ss.el_form = settings.el_form;
        let stroke = synthesize_stroke(&pn, &ss, settings.protocol_dt).map_err(wrap)?;
        Ok(CycleStroke { label: label.to_string(), from, to, stroke: Some(stroke) })
    });
    let strokes = built.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Cycle { spec: *spec, corners, strokes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeReport {
    pub label: String,
    pub work: f64,
    /// Ground-state energy gap between the stroke's corners.
    pub delta: f64,
    pub w_irr: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: usize,
    pub strokes: Vec<StrokeReport>,
    pub tau_cycle: f64,
    /// `None` when the interaction-expansion work vanishes.
    pub eta: Option<f64>,
    pub power: f64,
    /// Needs `CycleSettings::si_reference`.
    pub power_qw: Option<f64>,
    pub eta_ideal: Option<f64>,
    pub power_ideal: f64,
    pub start_variance: f64,
    pub end_variance: f64,
    /// `|end - start| / start` for the condensate `<x^2>`.
    pub endpoint_drift: f64,
    /// `max |W_irr| / |Delta_BC|`.
    pub w_irr_ratio: f64,
    /// RMS and maximum of `(<x^2> - s_pred) / s_pred` over the cycle.
    pub rms_variance_error: f64,
    pub max_variance_error: f64,
    /// `sum W - (E_end - E_start)`, relative to `max |W|`.
    pub energy_closure: f64,
    pub stable: bool,
}

impl CycleReport {
    pub fn stroke(&self, label: &str) -> Option<&StrokeReport> {
        self.strokes.iter().find(|s| s.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPower {
    pub eta: Option<f64>,
    pub power: f64,
}

/// `eta = -(W_AB + W_CD) / W_BC` and `P = -(W_AB + W_CD) / tau`. The
/// efficiency is undefined when `W_BC = 0`.
pub fn efficiency_and_power(w_ab: f64, w_bc: f64, w_cd: f64, tau_cycle: f64) -> Result<EfficiencyPower> {
    if !(tau_cycle > 0.0) {
        return Err(Error::invalid("cycle time must be positive"));
    }
    let out = -(w_ab + w_cd);
    let eta = if w_bc == 0.0 { None } else { Some(out / w_bc) };
    Ok(EfficiencyPower { eta, power: out / tau_cycle })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRun {
    pub trajectory: Trajectory,
    pub reports: Vec<CycleReport>,
    /// Ground-state energies at A, B, C, D.
    pub corner_energies: [f64; 4],
    /// Ground-state `<x^2>` at A, B, C, D.
    pub corner_variances: [f64; 4],
    /// Predicted variance at each trajectory record.
    pub s_pred: Vec<f64>,
    /// Relative standard deviation of `<x^2>` over the final hold.
    pub hold_plateau: Option<f64>,
}

/// Work entering from the stroke that plays the role of `forward` in
/// either direction.
fn role_work(reps: &[StrokeReport], forward: &str, field: fn(&StrokeReport) -> f64) -> f64 {
    let rev: String = forward.chars().rev().collect();
    reps.iter().find(|r| r.label == forward || r.label == rev).map_or(0.0, field)
}

/// Corner ground states on a grid wide enough for all four.
pub fn corner_ground_states(
    p: &PhysicalParams,
    cycle: &Cycle,
    settings: &CycleSettings,
) -> Result<(SpatialGrid, Vec<WaveFunction>)> {
    let pn = with_atoms(p, cycle.spec.atom_count);
    let sigma_max = cycle.corners.iter().map(|c| c.variance.sqrt()).fold(0.0, f64::max);
    let grid = SpatialGrid::new(settings.grid_span * sigma_max, settings.n_points)?;
    let states = settings.execution.map(&cycle.corners, |c| {
        ground_state(&pn, &c.config, grid, &settings.ground).map_err(|e| Error::Corner { corner: c.label, source: Box::new(e) })
    });
    Ok((grid, states.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Propagates `repeats` back-to-back cycles from the ground state of A,
/// then holds the controls of A for `hold_after`.
pub fn run_cycles(
    p: &PhysicalParams,
    cycle: &Cycle,
    repeats: usize,
    hold_after: f64,
    settings: &CycleSettings,
) -> Result<CycleRun> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let pn = with_atoms(p, cycle.spec.atom_count);
    let (_, states) = corner_ground_states(p, cycle, settings)?;
    let mut corner_energies = [0.0; 4];
    let mut corner_variances = [0.0; 4];
    for (i, (c, psi)) in cycle.corners.iter().zip(&states).enumerate() {
        let o = observables(&pn, psi, &c.config);
        corner_energies[i] = o.energy;
        corner_variances[i] = o.x2;
    }
    let energy_of = |c: char| corner_energies[(c as u8 - b'A') as usize];

    let mut psi = states[0].clone();
    let mut traj = Trajectory::default();
    let mut s_pred = Vec::new();
    let mut reports = Vec::with_capacity(repeats);
    let mut t = 0.0;
    for k in 0..repeats {
        let first_record = traj.len().saturating_sub(1);
        let a = &cycle.corners[0];
        let o_start = observables(&pn, &psi, &a.config);
        let t_start = t;
        let mut strokes = Vec::with_capacity(4);
        for (label, pr) in cycle.timeline(t, settings.dwell)? {
            let (next, seg) = propagate(&pn, &psi, &pr, &settings.propagation)
                .map_err(|e| Error::Stroke { cycle: k + 1, stroke: label.clone(), source: Box::new(e) })?;
            let skip = usize::from(!traj.is_empty());
            s_pred.extend(seg.times[skip..].iter().map(|&tt| pr.s_at(tt)));
            traj.extend(&seg);
            psi = next;
            t = *pr.times.last().unwrap();
            let w = work_integral(&seg);
            let b = label.as_bytes();
            if b.len() == 2 {
                let delta = energy_of(b[1] as char) - energy_of(b[0] as char);
                strokes.push(StrokeReport { label, work: w, delta, w_irr: w - delta, duration: pr.duration() });
            }
        }
        // Null strokes still appear in the report with zero work.
        for cs in &cycle.strokes {
            if cs.stroke.is_none() {
                strokes.push(StrokeReport { label: cs.label.clone(), work: 0.0, delta: 0.0, w_irr: 0.0, duration: 0.0 });
            }
        }
        let o_end = observables(&pn, &psi, &a.config);
        reports.push(cycle_report(
            k + 1,
            strokes,
            t - t_start,
            (o_start.x2, o_end.x2),
            (o_start.energy, o_end.energy),
            &traj,
            &s_pred,
            first_record,
            settings,
        ));
    }

    let mut hold_plateau = None;
    if hold_after > 0.0 {
        let a = &cycle.corners[0];
        let n = ((hold_after / settings.protocol_dt).ceil() as usize).max(2);
        let hold = shifted(&Protocol::hold(a.config.kappa, a.config.g, a.variance, cycle.spec.atom_count, hold_after, n)?, t);
        let (_, seg) = propagate(&pn, &psi, &hold, &settings.propagation)
            .map_err(|e| Error::Stroke { cycle: repeats, stroke: "hold".into(), source: Box::new(e) })?;
        hold_plateau = Some(relative_std(&seg.x2));
        s_pred.extend(seg.times[1..].iter().map(|&tt| hold.s_at(tt)));
        traj.extend(&seg);
    }
    Ok(CycleRun { trajectory: traj, reports, corner_energies, corner_variances, s_pred, hold_plateau })
}

#[allow(clippy::too_many_arguments)]
fn cycle_report(
    cycle: usize,
    strokes: Vec<StrokeReport>,
    tau: f64,
    (x2_start, x2_end): (f64, f64),
    (e_start, e_end): (f64, f64),
    traj: &Trajectory,
    s_pred: &[f64],
    first: usize,
    settings: &CycleSettings,
) -> CycleReport {
    let w = |r: &StrokeReport| r.work;
    let d = |r: &StrokeReport| r.delta;
    let (w_ab, w_bc, w_cd) = (role_work(&strokes, "AB", w), role_work(&strokes, "BC", w), role_work(&strokes, "CD", w));
    let (d_ab, d_bc, d_cd) = (role_work(&strokes, "AB", d), role_work(&strokes, "BC", d), role_work(&strokes, "CD", d));
    let (eta, power) = match efficiency_and_power(w_ab, w_bc, w_cd, tau) {
        Ok(ep) => (ep.eta, ep.power),
        Err(_) => (None, 0.0),
    };
    let (eta_ideal, power_ideal) = match efficiency_and_power(d_ab, d_bc, d_cd, tau) {
        Ok(ep) => (ep.eta, ep.power),
        Err(_) => (None, 0.0),
    };
    let power_qw = settings.si_reference.map(|u| power_in_qw(power * u.power));
    let w_irr_max = strokes.iter().map(|r| r.w_irr.abs()).fold(0.0, f64::max);
    let w_irr_ratio = if d_bc != 0.0 { w_irr_max / d_bc.abs() } else if w_irr_max == 0.0 { 0.0 } else { f64::INFINITY };
    let endpoint_drift = (x2_end - x2_start).abs() / x2_start;
    let mut sq = 0.0;
    let mut max_err: f64 = 0.0;
    let recs = first..traj.len();
    let count = recs.len().max(1) as f64;
    for i in recs {
        let e = (traj.x2[i] - s_pred[i]) / s_pred[i];
        sq += e * e;
        max_err = max_err.max(e.abs());
    }
    let total_w: f64 = strokes.iter().map(|r| r.work).sum();
    let scale = strokes.iter().map(|r| r.work.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let th = settings.stability;
    CycleReport {
        cycle,
        tau_cycle: tau,
        eta,
        power,
        power_qw,
        eta_ideal,
        power_ideal,
        start_variance: x2_start,
        end_variance: x2_end,
        endpoint_drift,
        w_irr_ratio,
        rms_variance_error: (sq / count).sqrt(),
        max_variance_error: max_err,
        energy_closure: (total_w - (e_end - e_start)) / scale,
        stable: w_irr_ratio < th.w_irr_ratio && endpoint_drift < th.endpoint_drift,
        strokes,
    }
}

/// Standard deviation over mean.
pub fn relative_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Factor applied to every stroke's `mu`.
    pub mu_scale: f64,
    pub tau_cycle: f64,
    /// Means over the cycles run.
    pub power: f64,
    pub eta: Option<f64>,
    pub power_ideal: f64,
    pub eta_ideal: Option<f64>,
    pub w_irr_ratio: f64,
    pub stable: bool,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(mu_scale: f64, e: &Error) -> Self {
        SweepRow {
            mu_scale,
            tau_cycle: f64::NAN,
            power: f64::NAN,
            eta: None,
            power_ideal: f64::NAN,
            eta_ideal: None,
            w_irr_ratio: f64::NAN,
            stable: false,
            error: Some(e.to_string()),
        }
    }
}

/// One row per `mu` multiplier, each averaged over `spec.repeats` cycles.
/// Rows run concurrently; a failing row is recorded and the sweep goes on.
pub fn power_sweep(p: &PhysicalParams, spec: &CycleSpec, mu_scales: &[f64], settings: &CycleSettings) -> Vec<SweepRow> {
    // Rows take the pool; work inside a row stays sequential.
    let inner = CycleSettings { execution: Execution::Sequential, ..*settings };
    settings.execution.map(mu_scales, |&f| {
        let row_spec = CycleSpec { mu_by_stroke: spec.mu_by_stroke.scaled(f), ..*spec };
        let run = build_cycle(p, &row_spec, &inner).and_then(|c| run_cycles(p, &c, spec.repeats, 0.0, &inner));
        match run {
            Ok(run) => sweep_row(f, &run.reports),
            Err(e) => SweepRow::failed(f, &e),
        }
    })
}

fn sweep_row(mu_scale: f64, reports: &[CycleReport]) -> SweepRow {
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&CycleReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mean_opt = |f: &dyn Fn(&CycleReport) -> Option<f64>| {
        reports.iter().map(f).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n)
    };
    SweepRow {
        mu_scale,
        tau_cycle: mean(&|r| r.tau_cycle),
        power: mean(&|r| r.power),
        eta: mean_opt(&|r| r.eta),
        power_ideal: mean(&|r| r.power_ideal),
        eta_ideal: mean_opt(&|r| r.eta_ideal),
        w_irr_ratio: reports.iter().map(|r| r.w_irr_ratio).fold(0.0, f64::max),
        stable: reports.iter().all(|r| r.stable),
        error: None,
    }
}
