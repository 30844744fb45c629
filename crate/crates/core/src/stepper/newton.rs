//! Damped Newton iteration for one implicit step.

use nalgebra::DMatrix;

use crate::model::Parameters;

use super::linear::{dense_solve, gmres, sparse_solve};
use super::residual::StepProblem;
use super::{JacobianMode, LinearSolver, SolverConfig, Sources, State};

/// Smallest damping factor tried before giving up.
const MIN_DAMPING: f64 = 1.0 / (1u64 << 30) as f64;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 1200;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub state: State,
    pub iterations: usize,
    /// Max-norm of the residual at the initial guess.
    pub initial_residual: f64,
    /// Max-norm of the residual at the returned state.
    pub residual: f64,
    pub linear_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonFailureKind {
    MaxIterations,
    DampingUnderflow,
    SingularJacobian,
    /// The initial guess could not be evaluated.
    InvalidStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonFailure {
    pub kind: NewtonFailureKind,
    /// Residual max-norm after each accepted iterate, starting with the initial guess.
    pub trace: Vec<f64>,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves one backward-Euler step of size `dt` starting from `old`.
///
/// Converged when `max|R| <= newton_tol * (1 + max|R(old)|)`, or when `max|R|`
/// is down to the rounding-error level of the residual evaluation. Each Newton
/// correction is halved until all temperatures stay at or above the floor and
/// the residual 2-norm decreases.
pub fn newton_solve(
    old: &State,
    dt: f64,
    params: &Parameters,
    cfg: &SolverConfig,
    sources: Option<&dyn Sources>,
) -> Result<NewtonOutcome, NewtonFailure> {
    let problem = StepProblem::new(old, dt, params, cfg, sources);
    let mut x = problem.initial_guess();
    let mut r = match problem.residual(&x) {
        Ok(r) => r,
        Err(_) => return Err(NewtonFailure { kind: NewtonFailureKind::InvalidStart, trace: vec![] }),
    };
    let initial_residual = max_norm(&r);
    let tol_target = cfg.newton_tol * (1.0 + initial_residual);
    let mut trace = vec![initial_residual];
    let mut linear_iterations = 0;

    for iteration in 0..=cfg.newton_max_iter {
        let target = tol_target.max(problem.roundoff_floor(&x));
        if max_norm(&r) <= target {
            let (u, theta) = problem.split(&x);
            return Ok(NewtonOutcome {
                state: State { t: old.t + dt, u, theta, step_index: old.step_index + 1 },
                iterations: iteration,
                initial_residual,
                residual: max_norm(&r),
                linear_iterations,
            });
        }
        if iteration == cfg.newton_max_iter {
            break;
        }

        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = match cfg.linear_solver {
            LinearSolver::DenseDirect => {
                let jac = match cfg.jacobian {
                    JacobianMode::Analytic => problem.jacobian(&x).to_dense(),
                    JacobianMode::FiniteDifference => fd_dense_jacobian(&problem, &x, &r),
                };
                dense_solve(jac, &rhs)
            }
            LinearSolver::SparseDirect => sparse_solve(&problem.jacobian(&x), &rhs),
            LinearSolver::Krylov => {
                let jac = problem.jacobian(&x);
                let inv_diag: Vec<f64> = jac
                    .diagonal()
                    .iter()
                    .map(|&d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
                    .collect();
                let (delta, stats) = match cfg.jacobian {
                    JacobianMode::Analytic => {
                        let mut apply = |v: &[f64]| jac.matvec(v);
                        gmres(&mut apply, &rhs, &inv_diag, cfg.krylov_forcing, GMRES_RESTART, GMRES_MAX_ITER)
                    }
                    JacobianMode::FiniteDifference => {
                        let mut apply = |v: &[f64]| fd_directional(&problem, &x, &r, v);
                        gmres(&mut apply, &rhs, &inv_diag, cfg.krylov_forcing, GMRES_RESTART, GMRES_MAX_ITER)
                    }
                };
                linear_iterations += stats.iterations;
                delta.iter().all(|v| v.is_finite()).then_some(delta)
            }
        };
        let Some(delta) = delta else {
            return Err(NewtonFailure { kind: NewtonFailureKind::SingularJacobian, trace });
        };

        let r_norm = l2(&r);
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + damping * d).collect();
            if problem.admissible(&trial) {
                if let Ok(r_trial) = problem.residual(&trial) {
                    if r_trial.iter().all(|v| v.is_finite())
                        && (l2(&r_trial) < r_norm || max_norm(&r_trial) <= target)
                    {
                        x = trial;
                        r = r_trial;
                        break;
                    }
                }
            }
            damping *= 0.5;
            if damping < MIN_DAMPING {
                return Err(NewtonFailure { kind: NewtonFailureKind::DampingUnderflow, trace });
            }
        }
        trace.push(max_norm(&r));
    }
    Err(NewtonFailure { kind: NewtonFailureKind::MaxIterations, trace })
}

fn fd_step(x: f64) -> f64 {
    f64::EPSILON.sqrt() * x.abs().max(1.0)
}

/// Forward-difference dense Jacobian, column by column.
fn fd_dense_jacobian(problem: &StepProblem<'_>, x: &[f64], r: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let mut h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let rp = match problem.residual(&xp) {
            Ok(rp) => rp,
            Err(_) => {
                h = -h;
                xp[j] = x[j] + h;
                problem.residual(&xp).unwrap_or_else(|_| r.to_vec())
            }
        };
        for i in 0..n {
            jac[(i, j)] = (rp[i] - r[i]) / h;
        }
        xp[j] = x[j];
    }
    jac
}

/// Matrix-free `J v ~ (R(x + s v) - R(x)) / s`.
fn fd_directional(problem: &StepProblem<'_>, x: &[f64], r: &[f64], v: &[f64]) -> Vec<f64> {
    let v_norm = l2(v);
    if v_norm == 0.0 {
        return vec![0.0; v.len()];
    }
    let x_norm = l2(x);
    let mut s = f64::EPSILON.sqrt() * (1.0 + x_norm) / v_norm;
    for _ in 0..2 {
        let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + s * b).collect();
        if let Ok(rp) = problem.residual(&xp) {
            return rp.iter().zip(r).map(|(a, b)| (a - b) / s).collect();
        }
        s = -s;
    }
    vec![f64::NAN; v.len()]
}
