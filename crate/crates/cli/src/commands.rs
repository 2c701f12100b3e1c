use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use feshbach_core::bridge::{controls_from_classical, variance_evolve, RoundTripStep, StiffnessProfile};
use feshbach_core::engine::{build_cycle, power_sweep, relative_std, run_cycles, CycleSettings, CycleSpec, StabilityThresholds};
use feshbach_core::gpe::{
    ground_state, observables, propagate, cumulative_work, GroundStateOptions, PropagationOptions, SpatialGrid,
};
use feshbach_core::numerics::{interp_linear, linspace};
use feshbach_core::optimal::{synthesize_stroke, CostWeights, StrokeSpec};
use feshbach_core::stochastic::{default_dt, quench_variance, simulate_nelson, simulate_ou, EnsembleConfig, EnsembleStats};
use feshbach_core::units::QuantityKind as Q;
use feshbach_core::variational::{ansatz_energy, equilibrium_width, ermakov_evolve};
use feshbach_core::{Execution, GaussianState, PhysicalParams, Protocol, TrapConfig};
use serde::Serialize;

use crate::config::{require, McKind, ScenarioFile};
use crate::output::{num, opt, Emitter};
use crate::CliError;

type Written = Vec<PathBuf>;

fn ground_opts(sc: &ScenarioFile) -> GroundStateOptions {
    GroundStateOptions { dt: sc.solver.gpe_dt, tolerance: sc.solver.ground_tolerance, ..Default::default() }
}

fn prop_opts(sc: &ScenarioFile) -> PropagationOptions {
    PropagationOptions {
        dt: sc.solver.gpe_dt,
        norm_tolerance: sc.solver.norm_tolerance,
        boundary_limit: sc.solver.boundary_limit,
        ..Default::default()
    }
}

fn grid_for(sc: &ScenarioFile, sigma_max: f64) -> Result<SpatialGrid, CliError> {
    Ok(SpatialGrid::new(sc.solver.grid_span * sigma_max, sc.solver.n_points)?)
}

#[derive(Serialize)]
struct EquilibriumResult {
    kappa: f64,
    g: f64,
    atom_count: f64,
    sigma_variational: f64,
    s_variational: f64,
    energy_variational: f64,
    s_gpe: f64,
    energy_gpe: f64,
    /// `(s_gpe - s_variational) / s_variational`.
    relative_gap: f64,
    /// GPE rms width in metres, when a trap frequency is configured.
    width_si_m: Option<f64>,
}

pub fn equilibrium(sc: &ScenarioFile, dir: &Path) -> Result<Written, CliError> {
    let b = require(&sc.equilibrium, "equilibrium")?;
    let p = sc.params()?;
    let cfg = TrapConfig::new(sc.norm(b.kappa, Q::Stiffness), sc.norm(b.g, Q::Coupling), p.atom_count)?;
    let sigma = equilibrium_width(&p, &cfg)?;
    let e_var = ansatz_energy(&p, &GaussianState::new(sigma, 0.0)?, &cfg);
    let psi = ground_state(&p, &cfg, grid_for(sc, sigma)?, &ground_opts(sc))?;
    let o = observables(&p, &psi, &cfg);
    let s = sigma * sigma;
    let res = EquilibriumResult {
        kappa: cfg.kappa,
        g: cfg.g,
        atom_count: cfg.atom_count,
        sigma_variational: sigma,
        s_variational: s,
        energy_variational: e_var,
        s_gpe: o.x2,
        energy_gpe: o.energy,
        relative_gap: (o.x2 - s) / s,
        width_si_m: sc.reference().map(|u| o.x2.sqrt() * u.length),
    };
    println!("sigma_eq = {sigma:.6}  s_eq = {s:.6}  E_ansatz = {e_var:.6}");
    println!("GPE: <x^2> = {:.6}  E = {:.6}  gap {:+.3}%", o.x2, o.energy, 100.0 * res.relative_gap);
    if let Some(w) = res.width_si_m {
        println!("GPE rms width {:.3} um", w * 1e6);
    }
    let mut em = Emitter::new(dir, "equilibrium", sc)?;
    em.json("equilibrium.json", sc, &res)?;
    Ok(em.written)
}

fn protocol_rows(pr: &Protocol) -> Vec<Vec<String>> {
    (0..pr.len()).map(|i| vec![num(pr.times[i]), num(pr.kappa[i]), num(pr.g[i]), num(pr.s_pred[i])]).collect()
}

const PROTOCOL_HEADER: [&str; 4] = ["t", "kappa", "g", "s_pred"];

pub fn synthesize(sc: &ScenarioFile, dir: &Path) -> Result<Written, CliError> {
    let b = require(&sc.stroke, "stroke")?;
    let p = sc.params()?;
    let mut em = Emitter::new(dir, "synthesize", sc)?;
    let mut summary = Vec::new();
    for &mu in &b.mu {
        let mut spec = StrokeSpec::new(
            sc.norm(b.s_i, Q::Variance),
            sc.norm(b.s_f, Q::Variance),
            CostWeights::new(b.lambda, mu)?,
            b.fixed,
            sc.norm(b.held, ScenarioFile::held_kind(b.fixed)),
        )?;
        spec.mesh_size = sc.solver.mesh_size;
        spec.el_form = sc.solver.el_form;
        let st = synthesize_stroke(&p, &spec, sc.solver.protocol_dt)?;
        println!("mu = {mu}: omega*dt = {:.4}  (EL residual {:.2e}, {} Newton steps)", st.duration, st.solution.scaled_residual, st.solution.iterations);
        for note in &st.protocol.meta.notes {
            eprintln!("warning: mu = {mu}: {note}");
        }
        em.csv(&format!("protocol_mu{mu}.csv"), &PROTOCOL_HEADER, protocol_rows(&st.protocol))?;
        summary.push(vec![num(mu), num(st.duration), num(st.solution.scaled_residual), st.solution.iterations.to_string()]);
    }
    em.csv("durations.csv", &["mu", "duration", "el_residual", "newton_iterations"], summary)?;
    Ok(em.written)
}

pub fn read_protocol(path: &Path, atom_count: f64) -> Result<Protocol, CliError> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = rd.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let idx = [col("t")?, col("kappa")?, col("g")?, col("s_pred")?];
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        for (c, &j) in idx.iter().enumerate() {
            let v: f64 = rec
                .get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad number in row {}", path.display(), line + 1)))?;
            cols[c].push(v);
        }
    }
    let [t, k, g, s] = cols;
    Ok(Protocol::new(t, k, g, s, atom_count)?)
}

fn step_protocol(sc: &ScenarioFile, p: &PhysicalParams) -> Result<Protocol, CliError> {
    let b = require(&sc.step, "step")?;
    let dg = p.diffusion() * p.gamma;
    let (s_lo, s_hi) = (sc.norm(b.s_low, Q::Variance), sc.norm(b.s_high, Q::Variance));
    let step = RoundTripStep::new(dg / s_lo, dg / s_hi, sc.norm(b.t_up, Q::Time), sc.norm(b.t_down, Q::Time), sc.norm(b.rise, Q::Time))?;
    let ts = linspace(0.0, sc.norm(b.total, Q::Time), b.samples.max(2));
    let tr = variance_evolve(p, &|t| step.value(t), s_lo, &ts)?;
    let prof = StiffnessProfile::from_fn(ts, |t| step.value(t), |t| step.rate(t))?;
    Ok(controls_from_classical(p, &prof, &tr, b.fixed, sc.norm(b.held, ScenarioFile::held_kind(b.fixed)))?)
}

#[derive(Serialize)]
struct ValidationResult {
    duration: f64,
    max_relative_deviation: f64,
    work: f64,
    energy_change: f64,
    work_energy_mismatch: f64,
    max_norm_step_drift: f64,
    plateau_relative_std: Option<f64>,
    warnings: Vec<String>,
}

pub fn validate(sc: &ScenarioFile, dir: &Path, protocol: Option<PathBuf>) -> Result<Written, CliError> {
    let p = sc.params()?;
    let vb = sc.validate.clone().unwrap_or_default();
    let pr = match protocol.or(vb.protocol) {
        Some(path) => read_protocol(&path, p.atom_count)?,
        None => step_protocol(sc, &p)?,
    };
    let cfg0 = TrapConfig::new(pr.kappa[0], pr.g[0], pr.atom_count)?;
    let s_max = pr.s_pred.iter().cloned().fold(0.0, f64::max);
    let psi0 = ground_state(&p, &cfg0, grid_for(sc, s_max.sqrt())?, &ground_opts(sc))?;
    let opts = prop_opts(sc);
    let (psi, mut tr) = propagate(&p, &psi0, &pr, &opts)?;
    let n = pr.len() - 1;
    let cfg1 = TrapConfig { kappa: pr.kappa[n], g: pr.g[n], atom_count: pr.atom_count };
    let de = observables(&p, &psi, &cfg1).energy - observables(&p, &psi0, &cfg0).energy;
    let work = cumulative_work(&tr).last().copied().unwrap_or(0.0);
    let stroke_len = tr.len();
    let mut plateau = None;
    if vb.hold_periods > 0.0 {
        let period = 2.0 * PI / (pr.kappa[n] / p.mass).sqrt();
        let dur = vb.hold_periods * period;
        let samples = ((dur / sc.solver.protocol_dt).ceil() as usize).max(2);
        let mut hold = Protocol::hold(pr.kappa[n], pr.g[n], pr.s_pred[n], pr.atom_count, dur, samples)?;
        let t_end = pr.times[n];
        hold.times.iter_mut().for_each(|t| *t += t_end);
        let (_, th) = propagate(&p, &psi, &hold, &opts)?;
        plateau = Some(relative_std(&th.x2));
        tr.extend(&th);
    }
    let s_at = |t: f64| if t <= pr.times[n] { pr.s_at(t) } else { pr.s_pred[n] };
    let max_dev = tr.times[..stroke_len]
        .iter()
        .zip(&tr.x2)
        .map(|(&t, x2)| (x2 - s_at(t)).abs() / s_at(t))
        .fold(0.0, f64::max);
    let w = cumulative_work(&tr);
    let rows = (0..tr.len()).map(|i| {
        let s = s_at(tr.times[i]);
        vec![
            num(tr.times[i]),
            num(tr.kappa[i]),
            num(tr.g[i]),
            num(tr.x2[i]),
            num(s),
            num((tr.x2[i] - s) / s),
            num(tr.energy[i]),
            num(tr.norm[i]),
            num(w[i]),
        ]
    });
    for wmsg in &tr.warnings {
        eprintln!("warning: {wmsg}");
    }
    let res = ValidationResult {
        duration: pr.duration(),
        max_relative_deviation: max_dev,
        work,
        energy_change: de,
        work_energy_mismatch: (work - de).abs() / work.abs().max(de.abs()).max(f64::MIN_POSITIVE),
        max_norm_step_drift: tr.max_norm_step_drift,
        plateau_relative_std: plateau,
        warnings: tr.warnings.clone(),
    };
    println!("max |<x^2> - s| / s = {:.3}%  work/energy mismatch {:.2e}", 100.0 * max_dev, res.work_energy_mismatch);
    if let Some(pl) = plateau {
        println!("plateau relative std = {:.3}%", 100.0 * pl);
    }
    let mut em = Emitter::new(dir, "validate", sc)?;
    em.csv("observables.csv", &["t", "kappa", "g", "x2", "s_pred", "rel_dev", "energy", "norm", "work"], rows)?;
    em.json("validation.json", sc, &res)?;
    Ok(em.written)
}

fn cycle_inputs(sc: &ScenarioFile) -> Result<(PhysicalParams, CycleSpec, CycleSettings, f64), CliError> {
    let b = require(&sc.cycle, "cycle")?;
    let p = sc.params()?;
    let spec = CycleSpec {
        kappa_i: sc.norm(b.kappa_i, Q::Stiffness),
        kappa_f: sc.norm(b.kappa_f, Q::Stiffness),
        g_i: sc.norm(b.g_i, Q::Coupling),
        g_f: sc.norm(b.g_f, Q::Coupling),
        atom_count: p.atom_count,
        lambda: b.lambda,
        mu_by_stroke: b.mu,
        repeats: b.repeats,
        direction: b.direction,
    };
    spec.validate()?;
    let s = &sc.solver;
    let settings = CycleSettings {
        protocol_dt: s.protocol_dt,
        mesh_size: s.mesh_size,
        el_form: s.el_form,
        dwell: sc.norm(b.dwell, Q::Time),
        grid_span: s.grid_span,
        n_points: s.n_points,
        propagation: prop_opts(sc),
        ground: ground_opts(sc),
        stability: StabilityThresholds { w_irr_ratio: s.w_irr_ratio, endpoint_drift: s.endpoint_drift },
        execution: Execution::Parallel,
        si_reference: sc.reference(),
    };
    Ok((p, spec, settings, sc.norm(b.hold_after, Q::Time)))
}

#[derive(Serialize)]
struct CycleResult<'a> {
    corner_energies: [f64; 4],
    corner_variances: [f64; 4],
    hold_plateau: Option<f64>,
    reports: &'a [feshbach_core::engine::CycleReport],
}

pub fn cycle(sc: &ScenarioFile, dir: &Path) -> Result<Written, CliError> {
    let (p, spec, settings, hold) = cycle_inputs(sc)?;
    let c = build_cycle(&p, &spec, &settings)?;
    let run = run_cycles(&p, &c, spec.repeats, hold, &settings)?;
    for r in &run.reports {
        println!(
            "cycle {:>2}: tau {:.3}  P {:.4}  eta {}  drift {:.3}%  W_irr/Delta_BC {:.4}  {}",
            r.cycle,
            r.tau_cycle,
            r.power,
            short(r.eta),
            100.0 * r.endpoint_drift,
            r.w_irr_ratio,
            if r.stable { "stable" } else { "unstable" }
        );
    }
    let mut em = Emitter::new(dir, "cycle", sc)?;
    let tr = &run.trajectory;
    let rows = (0..tr.len()).map(|i| {
        vec![num(tr.times[i]), num(tr.kappa[i]), num(tr.g[i]), num(tr.x2[i]), num(run.s_pred[i]), num(tr.energy[i])]
    });
    em.csv("trajectory.csv", &["t", "kappa", "g", "x2", "s_pred", "energy"], rows)?;
    let result = CycleResult {
        corner_energies: run.corner_energies,
        corner_variances: run.corner_variances,
        hold_plateau: run.hold_plateau,
        reports: &run.reports,
    };
    em.json("cycle_reports.json", sc, &result)?;
    Ok(em.written)
}

pub fn sweep(sc: &ScenarioFile, dir: &Path) -> Result<Written, CliError> {
    let (p, spec, settings, _) = cycle_inputs(sc)?;
    let b = require(&sc.sweep, "sweep")?;
    let rows = power_sweep(&p, &spec, &b.mu_scales, &settings);
    for r in &rows {
        match &r.error {
            None => println!(
                "mu x{}: tau {:.3}  P {:.4} (ideal {:.4})  eta {} (ideal {})  {}",
                r.mu_scale,
                r.tau_cycle,
                r.power,
                r.power_ideal,
                short(r.eta),
                short(r.eta_ideal),
                if r.stable { "stable" } else { "unstable" }
            ),
            Some(e) => eprintln!("mu x{}: failed: {e}", r.mu_scale),
        }
    }
    let qw = settings.si_reference.map(|u| u.power / feshbach_core::units::QUECTOWATT);
    let table = rows.iter().map(|r| {
        vec![
            num(r.mu_scale),
            num(r.tau_cycle),
            num(r.power),
            opt(qw.map(|f| r.power * f)),
            opt(r.eta),
            num(r.power_ideal),
            opt(r.eta_ideal),
            num(r.w_irr_ratio),
            r.stable.to_string(),
            r.error.clone().unwrap_or_default(),
        ]
    });
    let mut em = Emitter::new(dir, "sweep", sc)?;
    em.csv(
        "sweep.csv",
        &["mu_scale", "tau_cycle", "power", "power_qw", "eta", "power_ideal", "eta_ideal", "w_irr_ratio", "stable", "error"],
        table,
    )?;
    Ok(em.written)
}

fn short(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |e| format!("{e:.4}"))
}

#[derive(Serialize)]
struct McResult {
    kind: McKind,
    n_particles: usize,
    dt: f64,
    seed: u64,
    /// Fraction of sample times within 3 standard errors of the reference.
    agreement_fraction: f64,
    centred_fraction: f64,
}

pub fn mc(sc: &ScenarioFile, dir: &Path) -> Result<Written, CliError> {
    let b = require(&sc.mc, "mc")?;
    let p = sc.params()?;
    let seed = sc.seed.unwrap_or(0);
    let s0 = sc.norm(b.initial_variance, Q::Variance);
    let dt = b.dt.map_or_else(|| default_dt(&p, 1.0), |v| sc.norm(v, Q::Time));
    let cfg = EnsembleConfig::new(b.n_particles, dt, seed, s0)?;
    let exec = Execution::Parallel;
    let (stats, reference, extra): (EnsembleStats, Vec<f64>, Option<EnsembleStats>) = match b.kind {
        McKind::Stationary | McKind::Quench => {
            let t = linspace(0.0, sc.norm(b.t_end, Q::Time), b.samples.max(2));
            let kbar = match (b.kind, b.kbar) {
                (McKind::Quench, Some(k)) => sc.norm(k, Q::Stiffness),
                (McKind::Quench, None) => return Err(CliError::Config("mc.kbar is required for a quench".into())),
                _ => p.diffusion() * p.gamma / s0,
            };
            let st = simulate_ou(&p, |_| kbar, &cfg, &t, exec)?;
            let r = t.iter().map(|&t| quench_variance(&p, kbar, s0, t)).collect();
            (st, r, None)
        }
        McKind::Protocol => {
            let sb = require(&sc.stroke, "stroke")?;
            let mu = *sb.mu.first().ok_or_else(|| CliError::Config("stroke.mu is empty".into()))?;
            let spec = StrokeSpec::new(
                sc.norm(sb.s_i, Q::Variance),
                sc.norm(sb.s_f, Q::Variance),
                CostWeights::new(sb.lambda, mu)?,
                sb.fixed,
                sc.norm(sb.held, ScenarioFile::held_kind(sb.fixed)),
            )?;
            let st = synthesize_stroke(&p, &spec, sc.solver.protocol_dt)?;
            let pr = &st.protocol;
            let step = (pr.len() / b.samples.max(2)).max(1);
            let idx: Vec<usize> = (0..pr.len()).step_by(step).collect();
            let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let sub = Protocol::new(pick(&pr.times), pick(&pr.kappa), pick(&pr.g), pick(&pr.s_pred), pr.atom_count)?;
            let init = GaussianState::new(pr.s_pred[0].sqrt(), 0.0)?;
            let states = ermakov_evolve(&p, init, &|t| pr.controls_at(t).0, &|t| pr.controls_at(t).1, &sub.times)?;
            let ncfg = EnsembleConfig { initial_variance: pr.s_pred[0], ..cfg };
            let nel = simulate_nelson(&p, &sub, &states, &ncfg, exec)?;
            let prof = &st.time_profile;
            let ocfg = EnsembleConfig { seed: seed.wrapping_add(1), ..ncfg };
            let ou = simulate_ou(&p, |t| interp_linear(&prof.grid, &prof.kbar, t), &ocfg, &sub.times, exec)?;
            (nel, sub.s_pred.clone(), Some(ou))
        }
    };
    let agreement = match &extra {
        Some(ou) => stats.agreement_with(ou, 3.0),
        None => stats.agreement_fraction(&reference, 3.0),
    };
    let res = McResult {
        kind: b.kind,
        n_particles: b.n_particles,
        dt,
        seed,
        agreement_fraction: agreement,
        centred_fraction: stats.centred_fraction(3.0),
    };
    println!(
        "{:?}: {:.1}% of samples within 3 SE, mean centred at {:.1}%",
        b.kind,
        100.0 * agreement,
        100.0 * res.centred_fraction
    );
    let mut header = vec!["t", "variance", "variance_se", "mean", "mean_se", "reference"];
    if extra.is_some() {
        header.extend(["ou_variance", "ou_variance_se"]);
    }
    let rows = (0..stats.times.len()).map(|i| {
        let mut row = vec![
            num(stats.times[i]),
            num(stats.variance[i]),
            num(stats.variance_se[i]),
            num(stats.mean[i]),
            num(stats.mean_se[i]),
            num(reference[i]),
        ];
        if let Some(ou) = &extra {
            row.extend([num(ou.variance[i]), num(ou.variance_se[i])]);
        }
        row
    });
    let mut em = Emitter::new(dir, "mc", sc)?;
    em.csv("mc.csv", &header, rows)?;
    em.json("mc.json", sc, &res)?;
    Ok(em.written)
}
