//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Every tolerance and scenario parameter is pinned in this file.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::thread;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use nich_cli::commands::{cmd_continuation, cmd_mms};
use nich_cli::config::{GridSpec, InitialKind, InitialSpec, RunConfig};
use nich_cli::initial::make_initial;
use nich_core::diagnostics::{
    cahn_hilliard_energy, entropy_budget, entropy_production_rate, entropy_test_family, heat_test_family,
    internal_energy, weak_entropy_inequality_check, weak_heat_equation_residual, TestFunction,
};
use nich_core::grid::mean;
use nich_core::stepper::{self, newton_solve, Coupling, JacobianMode, LinearSolver};
use nich_core::{FaceAveraging, Field, Grid, Parameters, SolverConfig, State, Trajectory};

type Outcome = Result<(bool, String), String>;

fn sparse(cfg: SolverConfig) -> SolverConfig {
    SolverConfig { linear_solver: LinearSolver::SparseDirect, jacobian: JacobianMode::Analytic, ..cfg }
}

fn run(initial: &State, params: &Parameters, cfg: &SolverConfig, t_final: f64) -> Result<Trajectory, String> {
    stepper::run(initial.clone(), params, cfg, None, t_final, |_, _| {}).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Criteria 1-3: spinodal run, 1D n = 128, beta = 1, eps = 0, 500 steps.

const SPINODAL_N: usize = 128;
const SPINODAL_ALPHA: f64 = 5e-4;
const SPINODAL_AMP: f64 = 2e-4;
const SPINODAL_SEED: u64 = 0;
const SPINODAL_DT: f64 = 5e-5;
const SPINODAL_STEPS: usize = 500;

const MASS_TOL: f64 = 1e-12;
const ENERGY_DRIFT_C: f64 = 5.0;
const RATIO_RANGE: (f64, f64) = (1.7, 2.3);
const ENTROPY_BUDGET_TOL: f64 = 1e-10;

fn spinodal_params() -> Parameters {
    Parameters { alpha: SPINODAL_ALPHA, beta: 1.0, ..Parameters::default() }
}

fn spinodal_initial() -> State {
    let grid = Grid::new_1d(SPINODAL_N, 1.0).unwrap();
    let spec = InitialSpec { kind: InitialKind::Spinodal, amp: SPINODAL_AMP, ..InitialSpec::default() };
    make_initial(&spec, &grid, SPINODAL_SEED).unwrap()
}

/// Base run and the run with half the step to the same final time (default solver).
fn spinodal_pair() -> Result<(Trajectory, Trajectory), String> {
    let p = spinodal_params();
    let s0 = spinodal_initial();
    let t_final = SPINODAL_DT * SPINODAL_STEPS as f64;
    let base = run(&s0, &p, &SolverConfig::fixed_step(SPINODAL_DT), t_final)?;
    let half = run(&s0, &p, &SolverConfig::fixed_step(0.5 * SPINODAL_DT), t_final)?;
    Ok((base, half))
}

fn in_range(r: f64) -> bool {
    r >= RATIO_RANGE.0 && r <= RATIO_RANGE.1
}

fn criterion_mass(base: &Trajectory) -> Outcome {
    if base.reports.len() != SPINODAL_STEPS {
        return Ok((false, format!("expected {SPINODAL_STEPS} accepted steps, got {}", base.reports.len())));
    }
    let m0 = mean(&base.initial().u);
    let scale = m0.abs().max(1.0);
    let worst = base.states.iter().map(|s| (mean(&s.u) - m0).abs() / scale).fold(0.0, f64::max);
    Ok((worst <= MASS_TOL, format!("max |<u(t)> - <u(0)>| / max(1, |<u(0)>|) = {worst:.2e} over {} steps (tol {MASS_TOL:e})", base.reports.len())))
}

fn end_drift(traj: &Trajectory, p: &Parameters) -> f64 {
    let e0 = internal_energy(traj.initial(), p);
    ((internal_energy(traj.last(), p) - e0) / e0).abs()
}

fn criterion_energy(base: &Trajectory, half: &Trajectory) -> Outcome {
    let p = spinodal_params();
    let e0 = internal_energy(base.initial(), &p);
    let worst_c = base.states.iter().map(|s| ((internal_energy(s, &p) - e0) / e0).abs() / SPINODAL_DT).fold(0.0, f64::max);
    let ratio = end_drift(base, &p) / end_drift(half, &p);
    Ok((
        worst_c <= ENERGY_DRIFT_C && in_range(ratio),
        format!(
            "max relative drift / dt = {worst_c:.3} (C = {ENERGY_DRIFT_C}), end drift {:.3e} -> {:.3e} when dt halves, ratio {ratio:.3}",
            end_drift(base, &p),
            end_drift(half, &p)
        ),
    ))
}

fn criterion_entropy(base: &Trajectory, half: &Trajectory) -> Outcome {
    let p = spinodal_params();
    let avg = FaceAveraging::Harmonic;
    let mut min_rate = f64::INFINITY;
    for s in &base.states {
        min_rate = min_rate.min(entropy_production_rate(s, &p, avg).map_err(|e| e.to_string())?);
    }
    let b = entropy_budget(base, &p, avg).map_err(|e| e.to_string())?;
    let bh = entropy_budget(half, &p, avg).map_err(|e| e.to_string())?;
    let ratio = b.accumulated_residual / bh.accumulated_residual;
    let imbalance = b.imbalance().abs().max(bh.imbalance().abs());
    Ok((
        min_rate >= 0.0 && imbalance <= ENTROPY_BUDGET_TOL && in_range(ratio),
        format!(
            "min production rate {min_rate:.3e}, budget imbalance {imbalance:.2e} (tol {ENTROPY_BUDGET_TOL:e}), identity residual {:.3e} -> {:.3e}, ratio {ratio:.3}",
            b.accumulated_residual, bh.accumulated_residual
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 4: temperature positivity over the beta x initial-condition matrix.

const POSITIVITY_BETAS: [f64; 5] = [0.0, 0.5, 1.0, 1.7, 1.9];
const POSITIVITY_N: usize = 64;
const POSITIVITY_T: f64 = 0.02;

fn criterion_positivity() -> Outcome {
    let grid = Grid::new_1d(POSITIVITY_N, 1.0).unwrap();
    let spinodal = InitialSpec { kind: InitialKind::Spinodal, amp: 0.05, ..InitialSpec::default() };
    let cosine = InitialSpec {
        kind: InitialKind::Cosine,
        ku: 2,
        ampu: 0.5,
        ktheta: 1,
        amptheta: 0.9,
        theta0: 1.0,
        ..InitialSpec::default()
    };
    let cases: Vec<(f64, &str, InitialSpec)> = POSITIVITY_BETAS
        .iter()
        .flat_map(|&b| [(b, "spinodal", spinodal), (b, "cosine", cosine)])
        .collect();
    let results: Vec<Result<(f64, usize), String>> = thread::scope(|scope| {
        let handles: Vec<_> = cases
            .iter()
            .map(|(beta, _, spec)| {
                scope.spawn(move || {
                    let p = Parameters { alpha: 1e-3, beta: *beta, ..Parameters::default() };
                    let s0 = make_initial(spec, &grid, 3).map_err(|e| e.to_string())?;
                    let mut min_theta = f64::INFINITY;
                    let traj = stepper::run(s0, &p, &SolverConfig::default(), None, POSITIVITY_T, |s, r| {
                        min_theta = min_theta.min(s.theta.min()).min(r.min_theta);
                    })
                    .map_err(|e| e.to_string())?;
                    Ok((min_theta, traj.reports.len()))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut pass = true;
    let mut worst = f64::INFINITY;
    let mut steps = 0;
    for ((beta, ic, _), r) in cases.iter().zip(results) {
        match r {
            Ok((m, n)) => {
                worst = worst.min(m);
                steps += n;
                pass &= m > 0.0;
            }
            Err(e) => return Ok((false, format!("beta = {beta}, {ic}: {e}"))),
        }
    }
    Ok((pass, format!("{} runs, {steps} accepted steps, smallest theta {worst:.4}", cases.len())))
}

// ---------------------------------------------------------------------------
// Criterion 5: one implicit step against an independent dense Newton oracle.

const ORACLE_N: usize = 8;
const ORACLE_DT: f64 = 1e-4;
const ORACLE_TOL: f64 = 1e-10;

/// Backward-Euler residual written directly from the equations, 1D, mirror boundaries.
fn oracle_residual(x: &[f64], u_old: &[f64], q_old: &[f64], dt: f64, p: &Parameters) -> Vec<f64> {
    let n = u_old.len();
    let h = 1.0 / n as f64;
    let (u, q) = x.split_at(n);
    let lap = |v: &[f64], i: usize| {
        let left = if i == 0 { v[0] } else { v[i - 1] };
        let right = if i == n - 1 { v[n - 1] } else { v[i + 1] };
        (left - 2.0 * v[i] + right) / (h * h)
    };
    let chi: Vec<f64> = (0..n).map(|i| (u[i].powi(3) - u[i] - p.lambda * q[i] - p.alpha * lap(u, i)) / q[i]).collect();
    let lap_chi: Vec<f64> = (0..n).map(|i| lap(&chi, i)).collect();
    let spow = |v: f64, e: f64| v.abs().powf(e - 1.0) * v;
    let a: Vec<f64> = q.iter().map(|&t| (p.k0 + p.k1 * t.powf(p.beta)) / (t * t)).collect();
    let face = |i: usize| 2.0 * a[i] * a[i + 1] / (a[i] + a[i + 1]) * (q[i + 1] - q[i]) / h;
    let mut r = vec![0.0; 2 * n];
    for i in 0..n {
        let r1 = p.eps[0] * spow(lap_chi[i], p.p[0]) - p.eps[1] * spow(chi[i], p.p[1]);
        r[i] = (u[i] - u_old[i]) / dt - p.m * lap_chi[i] - r1;
        let flux_right = if i + 1 < n { face(i) } else { 0.0 };
        let flux_left = if i > 0 { face(i - 1) } else { 0.0 };
        let r2 = p.eps[2] * q[i].powf(p.p[2]) - p.eps[3] * q[i].powf(-p.p[3]);
        r[n + i] = p.c_v * (q[i] * q[i] - q_old[i] * q_old[i]) / (2.0 * dt)
            + p.m * q[i] * lap_chi[i] * (chi[i] + p.lambda)
            - (flux_right - flux_left) / h
            + r2;
    }
    r
}

/// Newton with a central-difference Jacobian and dense LU; iterates until the update stalls.
fn oracle_step(u_old: &[f64], q_old: &[f64], dt: f64, p: &Parameters) -> Vec<f64> {
    let mut x: Vec<f64> = u_old.iter().chain(q_old).copied().collect();
    let m = x.len();
    for _ in 0..100 {
        let r = oracle_residual(&x, u_old, q_old, dt, p);
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..m {
            let step = 1e-6 * x[j].abs().max(1.0);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += step;
            xm[j] -= step;
            let (rp, rm) = (oracle_residual(&xp, u_old, q_old, dt, p), oracle_residual(&xm, u_old, q_old, dt, p));
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * step);
            }
        }
        let delta = jac.lu().solve(&-DVector::from_vec(r)).expect("oracle Jacobian is singular");
        for (xi, d) in x.iter_mut().zip(delta.iter()) {
            *xi += d;
        }
        if delta.amax() < 1e-15 {
            break;
        }
    }
    x
}

fn criterion_oracle() -> Outcome {
    let grid = Grid::new_1d(ORACLE_N, 1.0).unwrap();
    let u0 = Field::from_fn(grid, |x| 0.3 * (PI * x[0]).cos() + 0.05 * (2.0 * PI * x[0]).cos());
    let q0 = Field::from_fn(grid, |x| 1.0 + 0.2 * (PI * x[0]).cos() + 0.05 * x[0]);
    let old = State::new(0.0, u0.clone(), q0.clone()).unwrap();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for beta in [0.5, 1.0, 1.7] {
        for eps in [0.0, 1e-3] {
            let p = Parameters { beta, ..Parameters::default() }.with_regularization(eps);
            let reference = oracle_step(u0.values(), q0.values(), ORACLE_DT, &p);
            for cfg in [
                SolverConfig { linear_solver: LinearSolver::DenseDirect, jacobian: JacobianMode::Analytic, ..SolverConfig::default() },
                SolverConfig::default(),
            ] {
                let cfg = SolverConfig { newton_tol: 1e-12, ..cfg };
                let out = newton_solve(&old, ORACLE_DT, &p, &cfg, None).map_err(|f| format!("{:?}", f.kind))?;
                let got: Vec<f64> = out.state.u.values().iter().chain(out.state.theta.values()).copied().collect();
                let err = got.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
                cases += 1;
            }
        }
    }
    Ok((worst <= ORACLE_TOL, format!("{cases} solves (dense and Krylov paths), max |x - x_oracle| = {worst:.2e} (tol {ORACLE_TOL:e})")))
}

// ---------------------------------------------------------------------------
// Criterion 6: manufactured-solution convergence.

const MMS_LEVELS: [usize; 3] = [32, 64, 128];
const MMS_DT0: f64 = 4e-3;
const MMS_T: f64 = 0.2;
const ORDER_RANGE: (f64, f64) = (1.8, 2.2);

fn criterion_mms() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::default();
    cfg.params = Parameters { alpha: 0.1, beta: 1.5, ..Parameters::default() };
    cfg.solver = sparse(SolverConfig { dt_init: MMS_DT0, newton_tol: 1e-12, ..SolverConfig::default() });
    cfg.t_final = MMS_T;
    cfg.initial = InitialSpec { kind: InitialKind::Cosine, ampu: 0.5, amptheta: 0.3, ..InitialSpec::default() };
    let table = cmd_mms(&cfg, &MMS_LEVELS, dir.path()).map_err(|e| e.to_string())?;
    let pass = table.orders.iter().all(|o| o.iter().all(|&r| r >= ORDER_RANGE.0 && r <= ORDER_RANGE.1));
    let fmt: Vec<String> = table
        .orders
        .iter()
        .map(|o| format!("u {:.3}/{:.3} theta {:.3}/{:.3}", o[0], o[1], o[2], o[3]))
        .collect();
    Ok((pass, format!("orders (L2/Linf) {}", fmt.join("; "))))
}

// ---------------------------------------------------------------------------
// Criterion 7: frozen-temperature mode against a standard Cahn-Hilliard solver.

const ISO_N: usize = 64;
const ISO_DT: f64 = 1e-4;
const ISO_STEPS: usize = 100;
const ISO_THETA0: f64 = 1.5;
const ISO_TOL: f64 = 1e-8;

/// `u_t = M lap(f(u) - alpha lap u)` by backward Euler with exact-Jacobian Newton.
fn reference_cahn_hilliard(u0: &[f64], mobility: f64, alpha: f64, dt: f64, steps: usize) -> Vec<f64> {
    let n = u0.len();
    let h2 = (1.0 / n as f64).powi(2);
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        if i > 0 {
            lap[(i, i - 1)] = 1.0 / h2;
            lap[(i, i)] -= 1.0 / h2;
        }
        if i + 1 < n {
            lap[(i, i + 1)] = 1.0 / h2;
            lap[(i, i)] -= 1.0 / h2;
        }
    }
    let mut u = DVector::from_column_slice(u0);
    for _ in 0..steps {
        let old = u.clone();
        for _ in 0..50 {
            let mu = u.map(|v| v * v * v - v) - alpha * &lap * &u;
            let r = (&u - &old) / dt - mobility * &lap * mu;
            let dmu = DMatrix::from_diagonal(&u.map(|v| 3.0 * v * v - 1.0)) - alpha * &lap;
            let jac = DMatrix::identity(n, n) / dt - mobility * &lap * dmu;
            let delta = jac.lu().solve(&-r).expect("reference Jacobian is singular");
            u += &delta;
            if delta.amax() < 1e-15 {
                break;
            }
        }
    }
    u.as_slice().to_vec()
}

fn criterion_isothermal() -> Outcome {
    let grid = Grid::new_1d(ISO_N, 1.0).unwrap();
    let spec = InitialSpec { kind: InitialKind::Spinodal, amp: 0.05, theta0: ISO_THETA0, ..InitialSpec::default() };
    let s0 = make_initial(&spec, &grid, 11).unwrap();
    let p = Parameters { alpha: 1e-3, ..Parameters::default() };
    let cfg = SolverConfig {
        coupling: Coupling::FrozenTemperature,
        newton_tol: 1e-13,
        ..sparse(SolverConfig::fixed_step(ISO_DT))
    };
    let traj = run(&s0, &p, &cfg, ISO_DT * ISO_STEPS as f64)?;
    let reference = reference_cahn_hilliard(s0.u.values(), p.m / ISO_THETA0, p.alpha, ISO_DT, ISO_STEPS);
    let err = traj.last().u.values().iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let energies: Vec<f64> = traj.states.iter().map(|s| cahn_hilliard_energy(&s.u, &p)).collect();
    let worst_rise = energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let theta_frozen = traj.states.iter().all(|s| s.theta == s0.theta);
    Ok((
        traj.reports.len() == ISO_STEPS && err <= ISO_TOL && worst_rise <= 0.0 && theta_frozen,
        format!(
            "{} steps, max |u - u_ref| = {err:.2e} (tol {ISO_TOL:e}), largest per-step CH energy change {worst_rise:.3e}, energy {:.5} -> {:.5}",
            traj.reports.len(),
            energies[0],
            energies.last().unwrap()
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criteria 8 and 9: space-time weak forms.

const WEAK_TOL: f64 = 1e-6;

fn smooth_initial(n: usize) -> State {
    let grid = Grid::new_1d(n, 1.0).unwrap();
    let u = Field::from_fn(grid, |x| 0.3 * (PI * x[0]).cos() + 0.09 * (2.0 * PI * x[0]).cos());
    let q = Field::from_fn(grid, |x| 1.0 + 0.2 * (PI * x[0]).cos());
    State::new(0.0, u, q).unwrap()
}

const ENTROPY_N: usize = 512;
const ENTROPY_DT: f64 = 1e-3;
const ENTROPY_T: f64 = 0.05;
const ENTROPY_EPS: [f64; 2] = [1e-2, 1e-3];

fn criterion_weak_entropy() -> Outcome {
    let scenarios: Vec<f64> = std::iter::once(0.0).chain(ENTROPY_EPS).collect();
    let results: Vec<Result<(f64, f64), String>> = thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|&eps| {
                scope.spawn(move || {
                    let p = Parameters { alpha: 0.01, beta: 1.0, ..Parameters::default() }.with_regularization(eps);
                    let s0 = smooth_initial(ENTROPY_N);
                    let traj = run(&s0, &p, &sparse(SolverConfig::fixed_step(ENTROPY_DT)), ENTROPY_T)?;
                    let family = entropy_test_family(s0.u.grid(), traj.last().t);
                    let refs: Vec<&dyn TestFunction> = family.iter().map(|z| z as &dyn TestFunction).collect();
                    let margins = weak_entropy_inequality_check(&traj, &p, FaceAveraging::Harmonic, &refs)
                        .map_err(|e| e.to_string())?;
                    if margins.len() != 10 {
                        return Err(format!("expected 10 test functions, got {}", margins.len()));
                    }
                    let excess = margins
                        .iter()
                        .map(|m| (m.margin - m.regularization) / m.scale - WEAK_TOL)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let rel = margins.iter().map(|m| m.margin / m.scale).fold(f64::NEG_INFINITY, f64::max);
                    Ok((excess, rel))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut pass = true;
    let mut parts = Vec::new();
    for (eps, r) in scenarios.iter().zip(results) {
        let (excess, rel) = r?;
        pass &= excess <= 0.0;
        parts.push(format!("eps {eps:e}: max margin/scale {rel:.3e}, max (margin - regularization)/scale {:.3e}", excess + WEAK_TOL));
    }
    Ok((pass, format!("n = {ENTROPY_N}, 10 test functions each; {} (tol {WEAK_TOL:e} + regularization)", parts.join(", "))))
}

const HEAT_LEVELS: [(usize, f64); 2] = [(768, 2e-3), (1536, 1e-3)];
const HEAT_T: f64 = 0.05;
const HEAT_SHRINK: f64 = 1.7;

fn criterion_weak_heat() -> Outcome {
    let p = Parameters { alpha: 0.01, beta: 1.8, ..Parameters::default() };
    let worst: Vec<Result<f64, String>> = thread::scope(|scope| {
        let handles: Vec<_> = HEAT_LEVELS
            .iter()
            .map(|&(n, dt)| {
                scope.spawn(move || {
                    let s0 = smooth_initial(n);
                    let traj = run(&s0, &p, &sparse(SolverConfig::fixed_step(dt)), HEAT_T)?;
                    let family = heat_test_family(s0.u.grid(), traj.last().t);
                    let refs: Vec<&dyn TestFunction> = family.iter().map(|z| z as &dyn TestFunction).collect();
                    let res = weak_heat_equation_residual(&traj, &p, FaceAveraging::Harmonic, &refs).map_err(|e| e.to_string())?;
                    if res.len() != 9 {
                        return Err(format!("expected 9 test functions, got {}", res.len()));
                    }
                    Ok(res.iter().map(|r| r.residual / r.scale).fold(0.0, f64::max))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let (coarse, fine) = (worst[0].clone()?, worst[1].clone()?);
    let shrink = coarse / fine;
    Ok((
        fine <= WEAK_TOL && shrink >= HEAT_SHRINK,
        format!(
            "beta = 1.8, worst residual/scale {coarse:.2e} (n = {}) -> {fine:.2e} (n = {}), tol {WEAK_TOL:e}, shrink {shrink:.2} (>= {HEAT_SHRINK})",
            HEAT_LEVELS[0].0, HEAT_LEVELS[1].0
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 10: continuation over the regularization ladder.

const LADDER: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
const MONITOR_RATIO_MAX: f64 = 10.0;
const CONTINUATION_N: usize = 64;
const CONTINUATION_ALPHA: f64 = 0.05;
const CONTINUATION_DT_MAX: f64 = 1e-2;
const CONTINUATION_T: f64 = 2.0;

fn criterion_continuation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::default();
    cfg.params = Parameters { alpha: CONTINUATION_ALPHA, ..Parameters::default() };
    cfg.grid = GridSpec { nx: CONTINUATION_N, ..GridSpec::default() };
    cfg.solver = sparse(SolverConfig { dt_init: CONTINUATION_DT_MAX, dt_max: CONTINUATION_DT_MAX, ..SolverConfig::default() });
    cfg.t_final = CONTINUATION_T;
    cfg.initial = InitialSpec { kind: InitialKind::Spinodal, amp: 0.01, ..InitialSpec::default() };
    cfg.output.snapshot_stride = 0;
    let summary = cmd_continuation(&cfg, 5, &LADDER, dir.path()).map_err(|e| e.to_string())?;
    let (worst_key, worst) = summary
        .spread
        .iter()
        .map(|(k, v)| (k.clone(), v.2))
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let decreasing = summary.distances.windows(2).all(|w| w[1] < w[0]);
    let d: Vec<String> = summary.distances.iter().map(|d| format!("{d:.2e}")).collect();
    Ok((
        worst <= MONITOR_RATIO_MAX && decreasing,
        format!(
            "{} monitors, largest max/min ratio {worst:.3} ({worst_key}), rung distances {}",
            summary.spread.len(),
            d.join(" > ")
        ),
    ))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let start = Instant::now();
    let (spinodal, rest) = thread::scope(|scope| {
        let pair = scope.spawn(|| {
            let t = Instant::now();
            (spinodal_pair(), t.elapsed())
        });
        let rest: Vec<_> = [
            criterion_positivity as fn() -> Outcome,
            criterion_oracle,
            criterion_mms,
            criterion_isothermal,
            criterion_weak_entropy,
            criterion_weak_heat,
            criterion_continuation,
        ]
        .into_iter()
        .map(|f| scope.spawn(move || {
            let t = Instant::now();
            (f(), t.elapsed())
        }))
        .collect();
        let pair = pair.join().unwrap();
        (pair, rest.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>())
    });

    let (spinodal, spinodal_time) = spinodal;
    let mut outcomes: Vec<(Outcome, Option<std::time::Duration>)> = match &spinodal {
        Ok((base, half)) => vec![
            (criterion_mass(base), None),
            (criterion_energy(base, half), None),
            (criterion_entropy(base, half), None),
        ],
        Err(e) => vec![(Err(e.clone()), None), (Err(e.clone()), None), (Err(e.clone()), None)],
    };
    outcomes.extend(rest.into_iter().map(|(o, t)| (o, Some(t))));

    let names = [
        "mass conservation",
        "internal-energy conservation",
        "entropy structure",
        "temperature positivity",
        "oracle equivalence",
        "manufactured-solution convergence",
        "isothermal reduction",
        "entropy inequality (weak form)",
        "weak heat identity",
        "continuation stability",
    ];
    let mut failures = 0;
    for (i, ((outcome, elapsed), name)) in outcomes.into_iter().zip(names).enumerate() {
        let (pass, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        let time = elapsed.map_or(String::new(), |t| format!(" [{:.1}s]", t.as_secs_f64()));
        println!("{} criterion {:>2} {name}: {detail}{time}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!(
        "acceptance: {} passed, {failures} failed in {:.1}s (spinodal pair {:.1}s)",
        names.len() - failures,
        start.elapsed().as_secs_f64(),
        spinodal_time.as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
