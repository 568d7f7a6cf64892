//! The six subcommands. Each fills a [`Run`] with buffered files, warnings
//! and invariant failures; nothing here touches the filesystem except for
//! reading an external amplitude file.

use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use lcuprep::eigen::{truncate, truncate_vector, EigenPair, SolverConfig, TruncatedState};
use lcuprep::io;
use lcuprep::lattice::ModelParams;
use lcuprep::lcu::{
    amplified_block_encoding, amplified_probability, count_prep_rotations, run_and_select, success_probability,
    LcuCircuits, PrepConvention, PrepSpec,
};
use lcuprep::observables::{
    fit_scaling_law, fourier_spectrum, integrated_error, loschmidt_echo, min_states_for_error, sweep,
    two_point_correlator, EchoConfig, Method, Model, SweepEntry, TimeSeries,
};
use lcuprep::statevector::StateVector;
use lcuprep::trotter::TrotterOrder;
use lcuprep::verify::{run_all, VerifyConfig};

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

/// Fidelity and heralding tolerance for simulated preparation.
pub const PREP_TOL: f64 = 1e-9;
/// Orthogonality the excited state must reach against the ground state.
pub const ORTHO_TOL: f64 = 1e-10;
/// Estimated floating-point work above which a run is flagged long-running.
pub const LONG_RUNNING_WORK: f64 = 5e9;

pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub outputs: Outputs,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
    /// Human-readable summary for stdout.
    pub report: Vec<String>,
    pub long_running: bool,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            outputs: Outputs::default(),
            warnings: Vec::new(),
            failures: Vec::new(),
            report: Vec::new(),
            long_running: false,
        }
    }

    fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) {
        let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
        s.push('\n');
        self.outputs.add(name, s.into_bytes());
    }
}

fn bytes(f: impl FnOnce(&mut Vec<u8>) -> lcuprep::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Rough operation count of a command, used only for the long-running flag.
pub fn estimated_work(cmd: Command, cfg: &RunConfig) -> f64 {
    let dim = cfg.sector_dim() as f64;
    let steps = cfg.steps as f64;
    let runs = if cfg.m_grid.is_empty() { dim } else { cfg.m_grid.len() as f64 } + 1.0;
    let spectral = dim <= SolverConfig::default().dense_threshold as f64;
    let evolve = if spectral { dim * dim } else { 40.0 * dim * (cfg.sites as f64 + 1.0) };
    let setup = if spectral { dim.powi(3) } else { 300.0 * dim * cfg.sites as f64 };
    match cmd {
        Command::Prepare => setup,
        Command::Echo | Command::Excited => {
            let per_step = match cfg.method {
                Method::HadamardShots => 2f64.powi(cfg.sites as i32 + 1) * 4.0 * cfg.sites.pow(2) as f64,
                Method::Trotter => 2f64.powi(cfg.sites as i32) * 4.0 * cfg.sites.pow(2) as f64,
                Method::Exact => evolve,
            };
            setup + runs * steps * per_step
        }
        Command::Correlator => setup + 2.0 * runs * steps * evolve,
        Command::Sweep => {
            let points = (cfg.couplings.len() * cfg.masses.len()) as f64;
            points * (setup + runs * steps * evolve)
        }
        Command::Verify => 0.0,
    }
}

pub fn dispatch(cmd: Command, run: &mut Run) -> CliResult<()> {
    let work = estimated_work(cmd, run.cfg);
    if work > LONG_RUNNING_WORK {
        run.long_running = true;
        run.warn(format!(
            "long-running configuration (sector dimension {}, about {work:.1e} operations)",
            run.cfg.sector_dim()
        ));
    }
    if run.cfg.dry_run {
        let plan = json!({
            "command": cmd.name(),
            "sector_dimension": run.cfg.sector_dim().to_string(),
            "estimated_work": work,
            "long_running": run.long_running,
        });
        run.json("plan.json", &plan);
        run.report.push(format!("{}: dry run, nothing computed", cmd.name()));
        return Ok(());
    }
    match cmd {
        Command::Prepare => prepare(run),
        Command::Echo => echo_family(run, false),
        Command::Excited => echo_family(run, true),
        Command::Sweep => cmd_sweep(run),
        Command::Correlator => correlator(run),
        Command::Verify => verify(run),
    }
}

fn build_model(cfg: &RunConfig) -> CliResult<Model> {
    let params = ModelParams::new(cfg.sites, cfg.bare_mass, cfg.coupling)?;
    Ok(Model::with_sector(params, cfg.particles(), SolverConfig::default())?)
}

fn trotter_order(cfg: &RunConfig) -> TrotterOrder {
    TrotterOrder::from_int(cfg.order).expect("order validated")
}

fn echo_config(cfg: &RunConfig, method: Method, seed: u64) -> EchoConfig {
    EchoConfig {
        dt: cfg.dt,
        steps: cfg.steps,
        method,
        order: trotter_order(cfg),
        shots: cfg.shots,
        seed,
    }
}

fn ground(run: &mut Run, model: &Model) -> CliResult<EigenPair> {
    let gs = model.ground()?;
    if gs.degenerate {
        run.warn(format!("ground state is degenerate (gap {:.3e}); amplitudes are basis dependent", gs.gap));
    }
    Ok(gs)
}

fn load_amplitudes(path: &Path, cfg: &RunConfig) -> CliResult<TruncatedState> {
    let text = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let wrap = |e: lcuprep::Error| CliError::Validation(format!("{}: {e}", path.display()));
    let state = if path.extension().is_some_and(|e| e == "json") {
        io::truncated_from_json(&String::from_utf8_lossy(&text)).map_err(wrap)?
    } else {
        io::read_truncated_csv(&text[..]).map_err(wrap)?
    };
    if state.sites() != cfg.sites {
        return Err(CliError::Validation(format!(
            "{}: bitstrings have {} sites, config has sites = {}",
            path.display(),
            state.sites(),
            cfg.sites
        )));
    }
    Ok(state)
}

fn prepare(run: &mut Run) -> CliResult<()> {
    let cfg = run.cfg;
    let (state, energy) = match &cfg.amplitudes {
        Some(path) => {
            let loaded = load_amplitudes(path, cfg)?;
            if cfg.m < loaded.len() {
                let mut t = TruncatedState::from_entries(loaded.entries()[..cfg.m].to_vec())?;
                t.source = loaded.source;
                (t, loaded.source.map(|s| s.energy))
            } else {
                if cfg.m > loaded.len() {
                    run.warn(format!("m = {} exceeds the {} loaded amplitudes; using all", cfg.m, loaded.len()));
                }
                (loaded.clone(), loaded.source.map(|s| s.energy))
            }
        }
        None => {
            let model = build_model(cfg)?;
            let gs = ground(run, &model)?;
            (truncate(&gs, &model.basis, cfg.m)?, Some(gs.energy))
        }
    };
    if let Some(from) = state.clamped_from {
        run.warn(format!("m = {from} exceeds the sector dimension; clamped to {}", state.len()));
    }

    let lcu = LcuCircuits::new(&state, cfg.convention)?;
    let p_of = |c: PrepConvention| -> Option<f64> {
        PrepSpec::from_truncated(&state, c).and_then(|s| success_probability(&s)).ok()
    };
    let (p_direct, p_sqrt) = (p_of(PrepConvention::Direct), p_of(PrepConvention::Sqrt));
    let bare = success_probability(&lcu.spec)?;
    let (pipeline, kind, expected) = if cfg.oaa {
        (amplified_block_encoding(&lcu)?, "amplified-block-encoding", amplified_probability(bare)?)
    } else if cfg.uncompute {
        (lcu.deterministic()?, "prep-select-uncompute", 1.0)
    } else {
        (lcu.block_encoding()?, "block-encoding", bare)
    };

    let layout = lcu.layout();
    let (simulated, fidelity, heralded) = if layout.qubit_count() <= cfg.max_qubits {
        let (work, p) = run_and_select(&pipeline)?;
        let target = StateVector::from_amplitudes(state.normalized_full_vector())?;
        let f = work.fidelity(&target);
        if f < 1.0 - PREP_TOL {
            run.failures.push(format!("prepared-state fidelity {f} below 1 - {PREP_TOL:e}"));
        }
        if (p - expected).abs() > PREP_TOL {
            run.failures.push(format!("heralding probability {p} differs from predicted {expected}"));
        }
        (true, Some(f), Some(p))
    } else {
        run.warn(format!(
            "{} qubits exceed max_qubits = {}; pipeline not simulated",
            layout.qubit_count(),
            cfg.max_qubits
        ));
        (false, None, None)
    };

    run.outputs.add("truncated.csv", bytes(|w| io::write_truncated_csv(&state, w))?);
    run.outputs.add("truncated.json", (io::truncated_to_json(&state)? + "\n").into_bytes());
    run.outputs.add("prep.txt", lcu.prep.to_text().into_bytes());
    run.outputs.add("select.txt", lcu.select.to_text().into_bytes());
    if cfg.uncompute {
        run.outputs.add("uncompute.txt", lcu.uncompute.to_text().into_bytes());
    }
    run.outputs.add("circuit.txt", pipeline.to_text().into_bytes());

    let report = json!({
        "sites": state.sites(),
        "m": state.len(),
        "clamped_from": state.clamped_from,
        "energy": energy,
        "entries": state.entries().iter().map(|e| json!({
            "bitstring": e.bitstring.to_string(),
            "amplitude": e.amplitude,
        })).collect::<Vec<_>>(),
        "overlap": state.overlap(),
        "defect": state.defect(),
        "one_norm": state.one_norm(),
        "success_probability": { "direct": p_direct, "sqrt": p_sqrt },
        "convention": cfg.convention,
        "circuit": kind,
        "predicted_heralding_probability": expected,
        "ancilla_qubits": layout.ancilla,
        "work_qubits": layout.work,
        "rotations": {
            "prep": lcu.prep.rotation_count(),
            "select": lcu.select.rotation_count(),
            "pipeline": pipeline.rotation_count(),
            "prep_bound": count_prep_rotations(state.len()),
        },
        "gates": pipeline.len(),
        "simulated": simulated,
        "fidelity": fidelity,
        "heralding_probability": heralded,
    });
    run.json("report.json", &report);

    run.report.push(format!("kept {} of the state: overlap {:.6}, defect {:.6}", state.len(), state.overlap(), state.defect()));
    for e in state.entries() {
        run.report.push(format!("  {}  {:+.6}", e.bitstring, e.amplitude));
    }
    let fmt = |p: Option<f64>| p.map(|p| format!("{p:.5}")).unwrap_or_else(|| "n/a".into());
    run.report.push(format!("success probability: direct {}, sqrt {}", fmt(p_direct), fmt(p_sqrt)));
    run.report.push(format!(
        "{kind}: {} ancilla + {} work qubits, {} rotations (bound {})",
        layout.ancilla,
        layout.work,
        pipeline.rotation_count(),
        count_prep_rotations(state.len())
    ));
    run.report.push(match fidelity {
        Some(f) => format!("fidelity {f:.12}, heralded with probability {:.6}", heralded.unwrap_or(0.0)),
        None => "not simulated".into(),
    });
    Ok(())
}

struct Truncation {
    m: usize,
    state: TruncatedState,
    series: TimeSeries,
    error: f64,
}

fn summary_csv(rows: &[Truncation]) -> Vec<u8> {
    let mut s = String::from("M,overlap,defect,integrated_error\n");
    for r in rows {
        s += &format!("{},{},{},{}\n", r.m, r.state.overlap(), r.state.defect(), r.error);
    }
    s.into_bytes()
}

fn clamp_notice(run: &mut Run, dim: usize) {
    if run.cfg.m_grid.iter().any(|&m| m > dim) {
        run.warn(format!("m_grid entries above the sector dimension {dim} are clamped to it"));
    }
}

fn echo_family(run: &mut Run, excited: bool) -> CliResult<()> {
    let cfg = run.cfg;
    let model = build_model(cfg)?;
    let gs = ground(run, &model)?;
    let target = if excited {
        let ex = model.excited(&gs)?;
        if ex.degenerate {
            run.warn(format!("excited level is degenerate (gap {:.3e}); the state is basis dependent", ex.gap));
        }
        ex
    } else {
        gs.clone()
    };
    let dim = model.basis.dim();
    clamp_notice(run, dim);
    let grid = cfg.grid(dim);

    let reference = loschmidt_echo(&model, &target.amplitudes, &echo_config(cfg, Method::Exact, cfg.seed))?;
    let rows = grid
        .par_iter()
        .map(|&m| {
            let state = truncate(&target, &model.basis, m)?;
            let v = state.normalized_vector(&model.basis)?;
            let series = loschmidt_echo(&model, &v, &echo_config(cfg, cfg.method, cfg.seed.wrapping_add(m as u64)))?;
            let error = integrated_error(&reference, &series)?;
            Ok(Truncation { m, state, series, error })
        })
        .collect::<lcuprep::Result<Vec<_>>>()?;

    if let Some(n) = reference.echo_bound_violation() {
        run.failures.push(format!("exact echo exceeds 1 in modulus at step {n}"));
    }
    run.outputs.add("echo_exact.csv", bytes(|w| io::write_time_series_csv(&reference, w))?);
    let spec = fourier_spectrum(&reference, cfg.window)?;
    run.outputs.add("spectrum_exact.csv", bytes(|w| io::write_spectrum_csv(&spec, w))?);
    for r in &rows {
        if let Some(n) = r.series.echo_bound_violation() {
            run.failures.push(format!("M = {} echo exceeds its bound at step {n}", r.m));
        }
        let spec = fourier_spectrum(&r.series, cfg.window)?;
        run.outputs.add(format!("echo_M{}.csv", r.m), bytes(|w| io::write_time_series_csv(&r.series, w))?);
        run.outputs.add(format!("spectrum_M{}.csv", r.m), bytes(|w| io::write_spectrum_csv(&spec, w))?);
        run.outputs.add(
            format!("difference_M{}.csv", r.m),
            bytes(|w| io::write_difference_csv(&reference, &r.series, w))?,
        );
        run.report.push(format!(
            "M = {:>5}: overlap {:.6}, integrated error {:.3e}, dominant frequency {:.4}",
            r.m,
            r.state.overlap(),
            r.error,
            spec.dominant_peak().0
        ));
    }
    run.outputs.add("summary.csv", summary_csv(&rows));

    if excited {
        let ortho = gs.overlap(&target.amplitudes).norm();
        if ortho > ORTHO_TOL {
            run.failures.push(format!("excited state overlaps the ground state by {ortho:.3e}"));
        }
        let all: Vec<usize> = (1..=dim).collect();
        let pair = [&gs, &target]
            .par_iter()
            .map(|s| min_states_for_error(&model, &s.amplitudes, cfg.epsilon_target, &all, cfg.dt, cfg.steps))
            .collect::<lcuprep::Result<Vec<SweepEntry>>>()?;
        let report = json!({
            "ground_energy": gs.energy,
            "excited_energy": target.energy,
            "gap": target.energy - gs.energy,
            "excited_degenerate": target.degenerate,
            "ground_overlap": ortho,
            "epsilon_target": cfg.epsilon_target.to_string(),
            "m_min_ground": pair[0].m_min,
            "m_min_excited": pair[1].m_min,
            "epsilon_ground": pair[0].epsilon_achieved,
            "epsilon_excited": pair[1].epsilon_achieved,
        });
        run.json("excited_report.json", &report);
        let show = |m: Option<usize>| m.map(|m| m.to_string()).unwrap_or_else(|| "not found".into());
        run.report.push(format!(
            "energies: ground {:.10}, excited {:.10}; |<ground|excited>| = {ortho:.1e}",
            gs.energy, target.energy
        ));
        run.report.push(format!(
            "minimal M for integrated error < {}: ground {}, excited {}",
            cfg.epsilon_target,
            show(pair[0].m_min),
            show(pair[1].m_min)
        ));
    }
    Ok(())
}

fn cmd_sweep(run: &mut Run) -> CliResult<()> {
    let cfg = run.cfg;
    if cfg.particles() != cfg.sites / 2 {
        run.warn("sweep always uses half filling; sector ignored");
    }
    let dim = crate::config::binomial(cfg.sites, cfg.sites / 2) as usize;
    clamp_notice(run, dim);
    let grid = cfg.grid(dim);
    let points: Vec<(f64, f64)> = cfg
        .couplings
        .iter()
        .flat_map(|&g| cfg.masses.iter().map(move |&m| (g, m)))
        .collect();
    let res = sweep(cfg.sites, &points, cfg.target, cfg.epsilon_target, &grid, cfg.dt, cfg.steps)?;
    run.outputs.add("sweep.csv", bytes(|w| io::write_sweep_csv(&res, w))?);
    let mut curves = String::from("g,m0,M,epsilon\n");
    for e in &res.entries {
        for (m, eps) in &e.curve {
            curves += &format!("{},{},{m},{eps}\n", e.coupling, e.bare_mass);
        }
        match e.m_min {
            Some(m) => run.report.push(format!("g = {}, m0 = {}: M_min = {m}", e.coupling, e.bare_mass)),
            None => {
                let msg = format!(
                    "g = {}, m0 = {}: no grid M reaches epsilon {} (best {:.3e})",
                    e.coupling, e.bare_mass, cfg.epsilon_target, e.epsilon_achieved
                );
                run.report.push(msg.clone());
                run.warn(msg);
            }
        }
    }
    run.outputs.add("curves.csv", curves.into_bytes());
    let fit = fit_scaling_law(&res.entries);
    run.json(
        "fit.json",
        &json!({
            "law": "M = a * ln(1/g) * ln(1/m0) / (m0 * g) + b",
            "a": fit.map(|f| f.0),
            "b": fit.map(|f| f.1),
            "points_found": res.entries.iter().filter(|e| e.m_min.is_some()).count(),
            "points_total": res.entries.len(),
        }),
    );
    run.report.push(match fit {
        Some((a, b)) => format!("fit: M = {a:.4} * ln(1/g) ln(1/m0) / (m0 g) + {b:.4}"),
        None => "fit: not enough distinct points".into(),
    });
    Ok(())
}

fn correlator(run: &mut Run) -> CliResult<()> {
    let cfg = run.cfg;
    let model = build_model(cfg)?;
    let gs = ground(run, &model)?;
    let dim = model.basis.dim();
    clamp_notice(run, dim);
    let grid = cfg.grid(dim);
    let order = trotter_order(cfg);
    let corr = |v: &[lcuprep::C64], method| {
        two_point_correlator(&model, v, cfg.mu, cfg.nu, cfg.x, cfg.dt, cfg.steps, method, order)
    };
    let reference = corr(&gs.amplitudes, Method::Exact)?;
    let rows = grid
        .par_iter()
        .map(|&m| {
            let state = truncate_vector(&gs.amplitudes, &model.basis, m)?;
            let series = corr(&state.normalized_vector(&model.basis)?, cfg.method)?;
            let error = integrated_error(&reference, &series)?;
            Ok(Truncation { m, state, series, error })
        })
        .collect::<lcuprep::Result<Vec<_>>>()?;
    run.outputs.add("correlator_exact.csv", bytes(|w| io::write_time_series_csv(&reference, w))?);
    for r in &rows {
        run.outputs.add(format!("correlator_M{}.csv", r.m), bytes(|w| io::write_time_series_csv(&r.series, w))?);
        run.outputs.add(
            format!("eps_bar_M{}.csv", r.m),
            bytes(|w| io::write_difference_csv(&reference, &r.series, w))?,
        );
        run.report.push(format!(
            "M = {:>5}: overlap {:.6}, integrated error {:.3e}",
            r.m,
            r.state.overlap(),
            r.error
        ));
    }
    run.outputs.add("summary.csv", summary_csv(&rows));
    Ok(())
}

fn verify(run: &mut Run) -> CliResult<()> {
    let cfg = run.cfg;
    let report = run_all(&VerifyConfig {
        seed: cfg.seed,
        trials: cfg.trials,
        shots: cfg.shots,
        corrupt_amplitudes: cfg.inject_corruption,
    })?;
    run.outputs.add("verify_report.json", (report.to_json()? + "\n").into_bytes());
    for c in &report.checks {
        run.report.push(format!(
            "{} {}: {:.3e} (threshold {:.3e}) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        ));
        if !c.passed {
            run.failures.push(format!("{}: {}", c.name, c.detail));
        }
    }
    Ok(())
}
