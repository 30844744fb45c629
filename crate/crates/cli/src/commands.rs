//! Experiment drivers behind the `run`, `continuation`, `mms` and `report` subcommands.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;

use nich_core::diagnostics::{self, cahn_hilliard_energy, MonitorReport};
use nich_core::grid::{norm_l2, norm_linf};
use nich_core::stepper::{self, derive_chi, ManufacturedSolution, Sources, StepReport};
use nich_core::{Field, Grid, Parameters, State, Trajectory};
use thiserror::Error;

use crate::config::{parse_config, serialize_config, ConfigError, InitialKind, RunConfig};
use crate::initial::make_initial;
use crate::output::{
    at, create_dir, read_text, write_key_values, write_text, BalanceRow, BalanceWriter, IoFailure, Snapshot,
};

pub const CONFIG_FILE: &str = "config.txt";
pub const BALANCE_FILE: &str = "balance.csv";
pub const MONITOR_FILE: &str = "monitors.txt";
pub const AUDIT_FILE: &str = "initial_audit.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const SUMMARY_FILE: &str = "continuation_summary.csv";
pub const DISTANCE_FILE: &str = "rung_distances.csv";
pub const MMS_ERROR_FILE: &str = "mms_errors.csv";
pub const MMS_ORDER_FILE: &str = "mms_orders.csv";
pub const REPORT_BALANCE_FILE: &str = "report_balance.csv";
pub const REPORT_MONITOR_FILE: &str = "report_monitors.txt";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("I/O error: {0}")]
    Io(#[from] IoFailure),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            Self::Solver(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

/// Everything a completed run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub balances: Vec<BalanceRow>,
    pub monitors: MonitorReport,
}

fn solver_error(e: impl std::fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

fn balance_row(state: &State, prev: Option<(&State, &StepReport)>, params: &Parameters, cfg: &RunConfig) -> Result<BalanceRow, CliError> {
    let averaging = cfg.solver.averaging;
    let record = diagnostics::balances(state, params, averaging).map_err(solver_error)?;
    let (dt, newton_iters, entropy_residual) = match prev {
        Some((old, report)) => (
            report.dt,
            report.newton_iterations,
            diagnostics::entropy_identity_residual(state, old, report.dt, params, averaging).map_err(solver_error)?,
        ),
        None => (0.0, 0, 0.0),
    };
    Ok(BalanceRow { record, dt, newton_iters, ch_energy: cahn_hilliard_energy(&state.u, params), entropy_residual })
}

fn write_snapshots(dir: &Path, state: &State, params: &Parameters) -> Result<(), CliError> {
    let chi = derive_chi(state, params).map_err(solver_error)?;
    for (name, field) in [("u", &state.u), ("theta", &state.theta), ("chi", &chi)] {
        Snapshot::new(name, state.t, state.step_index, field).write(dir)?;
    }
    Ok(())
}

fn check_isothermal(cfg: &RunConfig, initial: &State) -> Result<(), CliError> {
    if cfg.isothermal() && initial.theta.min() != initial.theta.max() {
        return Err(ConfigError::Domain {
            key: "run.isothermal".into(),
            message: "the isothermal mode freezes a uniform initial temperature; theta0 is not uniform".into(),
        }
        .into());
    }
    Ok(())
}

/// Runs one configuration into `out`: config copy, initial audit, balance
/// series (flushed as it grows), snapshots every `snapshot_stride` steps
/// plus the final state, and the monitor report.
pub fn cmd_run(cfg: &RunConfig, seed: u64, out: &Path) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let initial = make_initial(&cfg.initial, &grid, seed)?;
    check_isothermal(cfg, &initial)?;
    let params = cfg.params;

    create_dir(out)?;
    let mut stored = cfg.clone();
    stored.initial.seed = seed;
    write_text(&out.join(CONFIG_FILE), &serialize_config(&stored))?;
    let audit = diagnostics::initial_data_audit(&initial.u, &initial.theta, &params);
    let audit_values: BTreeMap<String, f64> = [
        ("min_theta", audit.min_theta),
        ("theta_l2", audit.theta_l2),
        ("inv_theta_l1", audit.inv_theta_l1),
        ("grad_u_l2", audit.grad_u_l2),
        ("ratio_norm", audit.ratio_norm),
        ("nonpositive_temperature", if audit.nonpositive_temperature { 1.0 } else { 0.0 }),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    write_key_values(&out.join(AUDIT_FILE), &audit_values)?;

    let stride = cfg.output.snapshot_stride;
    let snap_dir = out.join(SNAPSHOT_DIR);
    if stride > 0 {
        create_dir(&snap_dir)?;
        write_snapshots(&snap_dir, &initial, &params)?;
    }

    let writer = RefCell::new(BalanceWriter::create(&out.join(BALANCE_FILE))?);
    let first_row = balance_row(&initial, None, &params, cfg)?;
    writer.borrow_mut().push(&first_row)?;
    let rows = RefCell::new(vec![first_row]);
    let previous = RefCell::new(initial.clone());
    let failure: RefCell<Option<CliError>> = RefCell::new(None);

    let result = stepper::run(initial, &params, &cfg.solver, None, cfg.t_final, |state, report| {
        if failure.borrow().is_some() {
            return;
        }
        let step = || -> Result<(), CliError> {
            let row = balance_row(state, Some((&previous.borrow(), report)), &params, cfg)?;
            writer.borrow_mut().push(&row)?;
            rows.borrow_mut().push(row);
            if stride > 0 && state.step_index % stride == 0 {
                write_snapshots(&snap_dir, state, &params)?;
            }
            *previous.borrow_mut() = state.clone();
            Ok(())
        };
        if let Err(e) = step() {
            *failure.borrow_mut() = Some(e);
        }
    });
    writer.into_inner().finish()?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let trajectory = result.map_err(solver_error)?;
    let last = trajectory.last();
    if stride > 0 && last.step_index % stride != 0 {
        write_snapshots(&snap_dir, last, &params)?;
    }
    let monitors = diagnostics::norm_monitors(&trajectory, &params, cfg.solver.averaging).map_err(solver_error)?;
    if cfg.output.monitors {
        write_key_values(&out.join(MONITOR_FILE), &monitors)?;
    }
    Ok(RunOutcome { trajectory, balances: rows.into_inner(), monitors })
}

/// Cross-rung results of the continuation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSummary {
    pub eps: Vec<f64>,
    pub monitors: Vec<MonitorReport>,
    /// Per monitor: `(min, max, max/min)` across rungs, ratio 1 when all vanish.
    pub spread: BTreeMap<String, (f64, f64, f64)>,
    /// `||(u, theta)_a - (u, theta)_b||_L2` between final states of consecutive rungs.
    pub distances: Vec<f64>,
}

pub fn validate_ladder(ladder: &[f64]) -> Result<(), CliError> {
    if ladder.is_empty() {
        return Err(CliError::Usage("the epsilon ladder is empty".into()));
    }
    if ladder.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(CliError::Usage("ladder values must be positive".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(CliError::Usage("the epsilon ladder must be strictly decreasing".into()));
    }
    Ok(())
}

fn rung_dir(out: &Path, index: usize, eps: f64) -> PathBuf {
    out.join(format!("rung_{index:02}_eps_{eps:e}"))
}

/// Runs the same scenario with `eps1..eps4 = eps` for every rung, rungs in parallel.
pub fn cmd_continuation(cfg: &RunConfig, seed: u64, ladder: &[f64], out: &Path) -> Result<ContinuationSummary, CliError> {
    validate_ladder(ladder)?;
    cfg.validate()?;
    create_dir(out)?;
    let outcomes: Vec<Result<RunOutcome, CliError>> = thread::scope(|scope| {
        let handles: Vec<_> = ladder
            .iter()
            .enumerate()
            .map(|(i, &eps)| {
                let mut rung = cfg.clone();
                rung.params = rung.params.with_regularization(eps);
                rung.output.monitors = true;
                let dir = rung_dir(out, i, eps);
                scope.spawn(move || cmd_run(&rung, seed, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rung thread panicked")).collect()
    });
    let mut runs = Vec::with_capacity(outcomes.len());
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(run) => runs.push(run),
            Err(e) => return Err(annotate(e, &format!("rung {i} (eps = {:e})", ladder[i]))),
        }
    }

    let monitors: Vec<MonitorReport> = runs.iter().map(|r| r.monitors.clone()).collect();
    let mut spread = BTreeMap::new();
    for key in monitors[0].keys() {
        let values: Vec<f64> = monitors.iter().map(|m| m[key]).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ratio = if max == 0.0 { 1.0 } else { max / min };
        spread.insert(key.clone(), (min, max, ratio));
    }
    let distances: Vec<f64> = runs
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].trajectory.last(), w[1].trajectory.last());
            let du = norm_l2(&a.u.zip_map(&b.u, |x, y| x - y));
            let dq = norm_l2(&a.theta.zip_map(&b.theta, |x, y| x - y));
            du.hypot(dq)
        })
        .collect();

    let mut summary = String::from("monitor,min,max,ratio\n");
    for (k, (min, max, ratio)) in &spread {
        summary.push_str(&format!("{k},{min:e},{max:e},{ratio:e}\n"));
    }
    write_text(&out.join(SUMMARY_FILE), &summary)?;
    let mut dist = String::from("eps_from,eps_to,l2_distance\n");
    for (w, d) in ladder.windows(2).zip(&distances) {
        dist.push_str(&format!("{:e},{:e},{d:e}\n", w[0], w[1]));
    }
    write_text(&out.join(DISTANCE_FILE), &dist)?;
    Ok(ContinuationSummary { eps: ladder.to_vec(), monitors, spread, distances })
}

fn annotate(e: CliError, context: &str) -> CliError {
    match e {
        CliError::Solver(m) => CliError::Solver(format!("{context}: {m}")),
        other => other,
    }
}

/// Final-time errors at one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsLevel {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub u_l2: f64,
    pub u_linf: f64,
    pub theta_l2: f64,
    pub theta_linf: f64,
}

/// Observed orders between consecutive levels, in the order u_l2, u_linf, theta_l2, theta_linf.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsTable {
    pub levels: Vec<MmsLevel>,
    pub orders: Vec<[f64; 4]>,
}

pub fn validate_levels(levels: &[usize]) -> Result<(), CliError> {
    if levels.len() < 3 {
        return Err(CliError::Usage(format!("at least three refinement levels are needed, got {}", levels.len())));
    }
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Usage("refinement levels must be strictly increasing".into()));
    }
    Ok(())
}

fn mms_level(cfg: &RunConfig, n: usize, dt: f64) -> Result<MmsLevel, CliError> {
    let spec = crate::config::GridSpec { nx: n, ny: n, ..cfg.grid };
    let grid: Grid = spec.build()?;
    let ms = match cfg.initial.kind {
        InitialKind::Uniform => ManufacturedSolution::constant(&grid, cfg.initial.u0, cfg.initial.theta0),
        _ => ManufacturedSolution::cosine(&grid, cfg.initial.ampu, cfg.initial.amptheta),
    };
    let (u0, q0) = ms.sample(&grid, 0.0);
    let initial = State::new(0.0, u0, q0).map_err(|e| ConfigError::Domain { key: "initial".into(), message: e.to_string() })?;
    let sources: Arc<dyn Sources> = Arc::new(ms.sources(&cfg.params));
    let solver = nich_core::SolverConfig { dt_init: dt, dt_max: dt, dt_min: cfg.solver.dt_min.min(dt), ..cfg.solver };
    let traj = stepper::run(initial, &cfg.params, &solver, Some(sources), cfg.t_final, |_, _| {}).map_err(solver_error)?;
    let last = traj.last();
    let (ue, qe) = ms.sample(&grid, last.t);
    let eu: Field = last.u.zip_map(&ue, |a, b| a - b);
    let eq: Field = last.theta.zip_map(&qe, |a, b| a - b);
    Ok(MmsLevel {
        n,
        h: grid.h()[0],
        dt,
        u_l2: norm_l2(&eu),
        u_linf: norm_linf(&eu),
        theta_l2: norm_l2(&eq),
        theta_linf: norm_linf(&eq),
    })
}

/// Manufactured-solution study: `uniform` initial kind selects the constant
/// solution, any other kind the decaying cosine with amplitudes `ampu`,
/// `amptheta`. Level `n` uses `dt = dt_init (n_0 / n)^2`.
pub fn cmd_mms(cfg: &RunConfig, levels: &[usize], out: &Path) -> Result<MmsTable, CliError> {
    validate_levels(levels)?;
    cfg.validate()?;
    create_dir(out)?;
    let n0 = levels[0] as f64;
    let results: Vec<Result<MmsLevel, CliError>> = thread::scope(|scope| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&n| {
                let dt = cfg.solver.dt_init * (n0 / n as f64).powi(2);
                scope.spawn(move || mms_level(cfg, n, dt))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("level thread panicked")).collect()
    });
    let levels: Vec<MmsLevel> = results.into_iter().collect::<Result<_, _>>()?;
    let orders: Vec<[f64; 4]> = levels
        .windows(2)
        .map(|w| {
            let r = (w[1].n as f64 / w[0].n as f64).ln();
            let o = |a: f64, b: f64| (a / b).ln() / r;
            [
                o(w[0].u_l2, w[1].u_l2),
                o(w[0].u_linf, w[1].u_linf),
                o(w[0].theta_l2, w[1].theta_l2),
                o(w[0].theta_linf, w[1].theta_linf),
            ]
        })
        .collect();

    let mut errors = String::from("n,h,dt,u_l2,u_linf,theta_l2,theta_linf\n");
    for l in &levels {
        errors.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            l.n, l.h, l.dt, l.u_l2, l.u_linf, l.theta_l2, l.theta_linf
        ));
    }
    write_text(&out.join(MMS_ERROR_FILE), &errors)?;
    let mut table = String::from("n_coarse,n_fine,order_u_l2,order_u_linf,order_theta_l2,order_theta_linf\n");
    for (w, o) in levels.windows(2).zip(&orders) {
        table.push_str(&format!("{},{},{:e},{:e},{:e},{:e}\n", w[0].n, w[1].n, o[0], o[1], o[2], o[3]));
    }
    write_text(&out.join(MMS_ORDER_FILE), &table)?;
    Ok(MmsTable { levels, orders })
}

/// Rebuilds the stored trajectory (snapshot states only) of a run directory.
pub fn load_snapshots(dir: &Path) -> Result<Vec<State>, CliError> {
    let snap_dir = dir.join(SNAPSHOT_DIR);
    let entries = at(&snap_dir, fs::read_dir(&snap_dir))?;
    let mut steps = Vec::new();
    for entry in entries {
        let entry = at(&snap_dir, entry)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(step) = name.strip_prefix("u_").and_then(|s| s.strip_suffix(".txt")) {
            if let Ok(step) = step.parse::<usize>() {
                steps.push(step);
            }
        }
    }
    steps.sort_unstable();
    let bad = |path: &Path, m: String| CliError::Io(IoFailure {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, m),
    });
    steps
        .into_iter()
        .map(|step| {
            let u = Snapshot::read(&snap_dir.join(Snapshot::file_name("u", step)))?;
            let theta_path = snap_dir.join(Snapshot::file_name("theta", step));
            let theta = Snapshot::read(&theta_path)?;
            let uf = u.to_field().map_err(|m| bad(&theta_path, m))?;
            let qf = theta.to_field().map_err(|m| bad(&theta_path, m))?;
            let state = State::new(u.t, uf, qf).map_err(|e| bad(&theta_path, e.to_string()))?;
            Ok(State { step_index: step, ..state })
        })
        .collect()
}

/// Re-derives the balance series (at snapshot times) and monitors from a run directory.
pub fn cmd_report(dir: &Path, config: Option<&Path>) -> Result<(Vec<BalanceRow>, MonitorReport), CliError> {
    let config_path = config.map(Path::to_path_buf).unwrap_or_else(|| dir.join(CONFIG_FILE));
    let cfg = parse_config(&read_text(&config_path)?)?;
    let states = load_snapshots(dir)?;
    if states.is_empty() {
        return Err(CliError::Usage(format!("no snapshots found in {}", dir.join(SNAPSHOT_DIR).display())));
    }
    let mut rows = Vec::with_capacity(states.len());
    for (i, state) in states.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| &states[j]);
        let record = diagnostics::balances(state, &cfg.params, cfg.solver.averaging).map_err(solver_error)?;
        let (dt, entropy_residual) = match prev {
            Some(old) => {
                let dt = state.t - old.t;
                (dt, diagnostics::entropy_identity_residual(state, old, dt, &cfg.params, cfg.solver.averaging).map_err(solver_error)?)
            }
            None => (0.0, 0.0),
        };
        rows.push(BalanceRow {
            record,
            dt,
            newton_iters: 0,
            ch_energy: cahn_hilliard_energy(&state.u, &cfg.params),
            entropy_residual,
        });
    }
    let trajectory = Trajectory { states, reports: Vec::new(), initial_data_ratio: f64::NAN };
    let monitors = diagnostics::norm_monitors(&trajectory, &cfg.params, cfg.solver.averaging).map_err(solver_error)?;
    crate::output::write_balance_csv(&dir.join(REPORT_BALANCE_FILE), &rows)?;
    write_key_values(&dir.join(REPORT_MONITOR_FILE), &monitors)?;
    Ok((rows, monitors))
}
