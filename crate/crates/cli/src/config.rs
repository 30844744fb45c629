//! Flat `section.key = value` run configuration.
//!
//! Every key is optional; missing keys take the defaults below. Unknown or
//! repeated keys are errors. `#` starts a comment.
//!
//! | key | default |
//! |-----|---------|
//! | `physics.m`, `physics.alpha`, `physics.lambda`, `physics.c_v`, `physics.k0`, `physics.k1` | 1 |
//! | `physics.beta` | 1 (must lie in [0, 2)) |
//! | `physics.eps1` .. `physics.eps4` | 0 |
//! | `physics.p1`, `physics.p2`, `physics.p3` / `physics.p4` | 3 / 2 |
//! | `grid.dim` | 1 |
//! | `grid.nx`, `grid.ny` | 64 |
//! | `grid.lx`, `grid.ly` | 1 |
//! | `solver.dt_init`, `solver.dt_min`, `solver.dt_max` | 1e-3, 1e-12, 1e-1 |
//! | `solver.newton_tol`, `solver.newton_max_iter` | 1e-10, 50 |
//! | `solver.theta_floor`, `solver.growth_factor` | 1e-8, 1.2 |
//! | `solver.linear_solver` | `krylov` (`dense`, `sparse`) |
//! | `solver.jacobian` | `finite-difference` (`analytic`) |
//! | `solver.averaging` | `harmonic` (`arithmetic`) |
//! | `solver.krylov_forcing`, `solver.easy_iterations` | 1e-3, 5 |
//! | `run.t_final` | 1 |
//! | `run.isothermal` | false |
//! | `initial.kind` | `spinodal` (`uniform`, `cosine`) |
//! | `initial.u0`, `initial.theta0` | 0, 1 |
//! | `initial.amp`, `initial.mean`, `initial.seed` | 0.05, 0, 0 |
//! | `initial.ku`, `initial.ampu`, `initial.ktheta`, `initial.amptheta` | 1, 0.1, 1, 0.2 |
//! | `output.dir` | `out` |
//! | `output.snapshot_stride` | 10 (0 disables snapshots) |
//! | `output.monitors` | true |

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use nich_core::stepper::{Coupling, JacobianMode, LinearSolver};
use nich_core::{FaceAveraging, Grid, Parameters, SolverConfig};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("`{key}`: {message}")]
    Domain { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dim: 1, nx: 64, ny: 64, lx: 1.0, ly: 1.0 }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.dim, [self.nx, self.ny], [self.lx, self.ly])
            .map_err(|e| ConfigError::Domain { key: "grid".into(), message: e.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialKind {
    Uniform,
    #[default]
    Spinodal,
    Cosine,
}

impl InitialKind {
    fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Spinodal => "spinodal",
            Self::Cosine => "cosine",
        }
    }
}

/// Initial-condition generator and its parameters.
///
/// * `uniform`: `u = u0`, `theta = theta0`.
/// * `spinodal`: seeded noise in `[-amp, amp]`, recentred to mean `mean`; `theta = theta0`.
/// * `cosine`: `u = mean + ampu cos(ku pi x / lx)`, `theta = theta0 + amptheta cos(ktheta pi x / lx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub u0: f64,
    pub theta0: f64,
    pub amp: f64,
    pub mean: f64,
    pub seed: u64,
    pub ku: u32,
    pub ampu: f64,
    pub ktheta: u32,
    pub amptheta: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            kind: InitialKind::default(),
            u0: 0.0,
            theta0: 1.0,
            amp: 0.05,
            mean: 0.0,
            seed: 0,
            ku: 1,
            ampu: 0.1,
            ktheta: 1,
            amptheta: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: String,
    /// Write snapshots every this many accepted steps; 0 disables them.
    pub snapshot_stride: usize,
    pub monitors: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "out".into(), snapshot_stride: 10, monitors: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Parameters,
    pub grid: GridSpec,
    /// `solver.coupling` is driven by `run.isothermal`.
    pub solver: SolverConfig,
    pub t_final: f64,
    pub initial: InitialSpec,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: Parameters::default(),
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            t_final: 1.0,
            initial: InitialSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn isothermal(&self) -> bool {
        self.solver.coupling == Coupling::FrozenTemperature
    }

    /// Runs every domain check.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validated().map_err(|e| match e {
            nich_core::Error::InvalidParameter { name, reason } => {
                ConfigError::Domain { key: format!("physics.{name}"), message: reason }
            }
            other => ConfigError::Domain { key: "physics".into(), message: other.to_string() },
        })?;
        self.solver.validated().map_err(|e| match e {
            nich_core::Error::InvalidParameter { name, reason } => {
                ConfigError::Domain { key: format!("solver.{name}"), message: reason }
            }
            other => ConfigError::Domain { key: "solver".into(), message: other.to_string() },
        })?;
        self.grid.build()?;
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(domain("run.t_final", "must be a nonnegative finite number"));
        }
        if !(self.initial.theta0 > 0.0) {
            return Err(domain("initial.theta0", "must be positive"));
        }
        if self.initial.kind == InitialKind::Cosine && !(self.initial.theta0 - self.initial.amptheta.abs() > 0.0) {
            return Err(domain("initial.amptheta", "theta0 - |amptheta| must be positive"));
        }
        if !(self.initial.amp >= 0.0) {
            return Err(domain("initial.amp", "must be nonnegative"));
        }
        Ok(())
    }
}

fn domain(key: &str, message: &str) -> ConfigError {
    ConfigError::Domain { key: key.into(), message: message.into() }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Syntax {
        line,
        message: format!("cannot parse `{value}` as a value for `{key}`"),
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::Syntax { line, message: format!("`{key}` expects true or false, got `{value}`") }),
    }
}

fn parse_choice<T: Copy>(key: &str, value: &str, line: usize, choices: &[(&str, T)]) -> Result<T, ConfigError> {
    choices.iter().find(|(name, _)| *name == value).map(|&(_, v)| v).ok_or_else(|| {
        let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
        ConfigError::Syntax { line, message: format!("`{key}` expects one of {}, got `{value}`", names.join(", ")) }
    })
}

const LINEAR_SOLVERS: [(&str, LinearSolver); 3] = [
    ("dense", LinearSolver::DenseDirect),
    ("sparse", LinearSolver::SparseDirect),
    ("krylov", LinearSolver::Krylov),
];
const JACOBIANS: [(&str, JacobianMode); 2] =
    [("analytic", JacobianMode::Analytic), ("finite-difference", JacobianMode::FiniteDifference)];
const AVERAGING: [(&str, FaceAveraging); 2] =
    [("harmonic", FaceAveraging::Harmonic), ("arithmetic", FaceAveraging::Arithmetic)];
const KINDS: [(&str, InitialKind); 3] =
    [("uniform", InitialKind::Uniform), ("spinodal", InitialKind::Spinodal), ("cosine", InitialKind::Cosine)];

fn name_of<T: PartialEq + Copy>(choices: &[(&'static str, T)], value: T) -> &'static str {
    choices.iter().find(|(_, v)| *v == value).map(|(n, _)| *n).expect("every variant is listed")
}

fn apply(cfg: &mut RunConfig, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
    let f = |v: &str| parse_value::<f64>(key, v, line);
    let p = &mut cfg.params;
    let s = &mut cfg.solver;
    let init = &mut cfg.initial;
    match key {
        "physics.m" => p.m = f(value)?,
        "physics.alpha" => p.alpha = f(value)?,
        "physics.lambda" => p.lambda = f(value)?,
        "physics.c_v" => p.c_v = f(value)?,
        "physics.k0" => p.k0 = f(value)?,
        "physics.k1" => p.k1 = f(value)?,
        "physics.beta" => p.beta = f(value)?,
        "physics.eps1" => p.eps[0] = f(value)?,
        "physics.eps2" => p.eps[1] = f(value)?,
        "physics.eps3" => p.eps[2] = f(value)?,
        "physics.eps4" => p.eps[3] = f(value)?,
        "physics.p1" => p.p[0] = f(value)?,
        "physics.p2" => p.p[1] = f(value)?,
        "physics.p3" => p.p[2] = f(value)?,
        "physics.p4" => p.p[3] = f(value)?,
        "grid.dim" => cfg.grid.dim = parse_value(key, value, line)?,
        "grid.nx" => cfg.grid.nx = parse_value(key, value, line)?,
        "grid.ny" => cfg.grid.ny = parse_value(key, value, line)?,
        "grid.lx" => cfg.grid.lx = f(value)?,
        "grid.ly" => cfg.grid.ly = f(value)?,
        "solver.dt_init" => s.dt_init = f(value)?,
        "solver.dt_min" => s.dt_min = f(value)?,
        "solver.dt_max" => s.dt_max = f(value)?,
        "solver.newton_tol" => s.newton_tol = f(value)?,
        "solver.newton_max_iter" => s.newton_max_iter = parse_value(key, value, line)?,
        "solver.theta_floor" => s.theta_floor = f(value)?,
        "solver.growth_factor" => s.growth_factor = f(value)?,
        "solver.linear_solver" => s.linear_solver = parse_choice(key, value, line, &LINEAR_SOLVERS)?,
        "solver.jacobian" => s.jacobian = parse_choice(key, value, line, &JACOBIANS)?,
        "solver.averaging" => s.averaging = parse_choice(key, value, line, &AVERAGING)?,
        "solver.krylov_forcing" => s.krylov_forcing = f(value)?,
        "solver.easy_iterations" => s.easy_iterations = parse_value(key, value, line)?,
        "run.t_final" => cfg.t_final = f(value)?,
        "run.isothermal" => {
            s.coupling = if parse_bool(key, value, line)? { Coupling::FrozenTemperature } else { Coupling::Full }
        }
        "initial.kind" => init.kind = parse_choice(key, value, line, &KINDS)?,
        "initial.u0" => init.u0 = f(value)?,
        "initial.theta0" => init.theta0 = f(value)?,
        "initial.amp" => init.amp = f(value)?,
        "initial.mean" => init.mean = f(value)?,
        "initial.seed" => init.seed = parse_value(key, value, line)?,
        "initial.ku" => init.ku = parse_value(key, value, line)?,
        "initial.ampu" => init.ampu = f(value)?,
        "initial.ktheta" => init.ktheta = parse_value(key, value, line)?,
        "initial.amptheta" => init.amptheta = f(value)?,
        "output.dir" => cfg.output.dir = value.to_string(),
        "output.snapshot_stride" => cfg.output.snapshot_stride = parse_value(key, value, line)?,
        "output.monitors" => cfg.output.monitors = parse_bool(key, value, line)?,
        _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
    }
    Ok(())
}

/// Strict parse; the result has passed [`RunConfig::validate`].
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `section.key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !key.contains('.') || value.is_empty() {
            return Err(ConfigError::Syntax { line, message: format!("expected `section.key = value`, got `{content}`") });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
        }
        apply(&mut cfg, key, value, line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every key; floats use a lossless exponent form.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        writeln!(out, "{key} = {value}").expect("writing to a string");
    };
    let e = |v: f64| format!("{v:e}");
    let p = &cfg.params;
    put("physics.m", e(p.m));
    put("physics.alpha", e(p.alpha));
    put("physics.lambda", e(p.lambda));
    put("physics.c_v", e(p.c_v));
    put("physics.k0", e(p.k0));
    put("physics.k1", e(p.k1));
    put("physics.beta", e(p.beta));
    for i in 0..4 {
        put(&format!("physics.eps{}", i + 1), e(p.eps[i]));
    }
    for i in 0..4 {
        put(&format!("physics.p{}", i + 1), e(p.p[i]));
    }
    let g = &cfg.grid;
    put("grid.dim", g.dim.to_string());
    put("grid.nx", g.nx.to_string());
    put("grid.ny", g.ny.to_string());
    put("grid.lx", e(g.lx));
    put("grid.ly", e(g.ly));
    let s = &cfg.solver;
    put("solver.dt_init", e(s.dt_init));
    put("solver.dt_min", e(s.dt_min));
    put("solver.dt_max", e(s.dt_max));
    put("solver.newton_tol", e(s.newton_tol));
    put("solver.newton_max_iter", s.newton_max_iter.to_string());
    put("solver.theta_floor", e(s.theta_floor));
    put("solver.growth_factor", e(s.growth_factor));
    put("solver.linear_solver", name_of(&LINEAR_SOLVERS, s.linear_solver).into());
    put("solver.jacobian", name_of(&JACOBIANS, s.jacobian).into());
    put("solver.averaging", name_of(&AVERAGING, s.averaging).into());
    put("solver.krylov_forcing", e(s.krylov_forcing));
    put("solver.easy_iterations", s.easy_iterations.to_string());
    put("run.t_final", e(cfg.t_final));
    put("run.isothermal", cfg.isothermal().to_string());
    let i = &cfg.initial;
    put("initial.kind", i.kind.name().into());
    put("initial.u0", e(i.u0));
    put("initial.theta0", e(i.theta0));
    put("initial.amp", e(i.amp));
    put("initial.mean", e(i.mean));
    put("initial.seed", i.seed.to_string());
    put("initial.ku", i.ku.to_string());
    put("initial.ampu", e(i.ampu));
    put("initial.ktheta", i.ktheta.to_string());
    put("initial.amptheta", e(i.amptheta));
    put("output.dir", cfg.output.dir.clone());
    put("output.snapshot_stride", cfg.output.snapshot_stride.to_string());
    put("output.monitors", cfg.output.monitors.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.params.beta, 1.0);
        assert!(!cfg.params.is_regularized());
        assert_eq!((cfg.grid.dim, cfg.grid.nx), (1, 64));
        assert_eq!(cfg.t_final, 1.0);
    }

    #[test]
    fn beta_two_is_rejected_with_reason() {
        let err = parse_config("physics.beta = 2.0").unwrap_err();
        match err {
            ConfigError::Domain { key, message } => {
                assert_eq!(key, "physics.beta");
                assert!(message.contains("beta < 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_whitespace_and_values() {
        let text = "# header\n\n  physics.alpha = 0.01   # thin interfaces\ngrid.nx=128\nsolver.linear_solver = dense\nrun.isothermal = true\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.params.alpha, 0.01);
        assert_eq!(cfg.grid.nx, 128);
        assert_eq!(cfg.solver.linear_solver, LinearSolver::DenseDirect);
        assert!(cfg.isothermal());
    }

    #[test]
    fn errors_carry_line_or_key() {
        assert_eq!(
            parse_config("physics.m = 1\nphysics.mass = 2").unwrap_err(),
            ConfigError::UnknownKey { line: 2, key: "physics.mass".into() }
        );
        assert!(matches!(parse_config("\n\ngrid.nx 12").unwrap_err(), ConfigError::Syntax { line: 3, .. }));
        assert!(matches!(parse_config("grid.nx = twelve").unwrap_err(), ConfigError::Syntax { line: 1, .. }));
        assert!(matches!(
            parse_config("grid.nx = 8\ngrid.nx = 9").unwrap_err(),
            ConfigError::DuplicateKey { line: 2, .. }
        ));
        assert!(matches!(
            parse_config("physics.k0 = -1").unwrap_err(),
            ConfigError::Domain { key, .. } if key == "physics.k0"
        ));
        assert!(matches!(
            parse_config("solver.dt_min = 1").unwrap_err(),
            ConfigError::Domain { key, .. } if key.starts_with("solver.")
        ));
        assert!(matches!(parse_config("grid.nx = 2").unwrap_err(), ConfigError::Domain { key, .. } if key == "grid"));
    }

    #[test]
    fn cosine_temperature_must_stay_positive() {
        let err = parse_config("initial.kind = cosine\ninitial.theta0 = 1\ninitial.amptheta = 1").unwrap_err();
        assert!(matches!(err, ConfigError::Domain { key, .. } if key == "initial.amptheta"));
    }

    #[test]
    fn serialized_defaults_parse_back() {
        let text = serialize_config(&RunConfig::default());
        assert_eq!(parse_config(&text).unwrap(), RunConfig::default());
    }

    fn positive() -> impl Strategy<Value = f64> {
        (1e-6f64..1e3).prop_map(|v| v)
    }

    prop_compose! {
        fn arb_config()(
            phys in prop::collection::vec(positive(), 6),
            beta in 0.0f64..1.999,
            eps in prop::collection::vec(0.0f64..1.0, 4),
            pows in prop::collection::vec(0.5f64..5.0, 4),
            dim in 1usize..=2,
            nx in 4usize..300,
            ny in 4usize..300,
            lengths in (0.1f64..10.0, 0.1f64..10.0),
            dts in (1e-12f64..1e-6, 1e-6f64..1e-3, 1e-3f64..1.0),
            tol in 1e-14f64..1e-4,
            iters in 1usize..200,
            floor in 1e-12f64..1e-2,
            growth in 1.0f64..3.0,
            solver_ix in 0usize..3,
            jac_fd in any::<bool>(),
            harmonic in any::<bool>(),
            forcing in 1e-8f64..0.9,
            easy in 0usize..10,
            t_final in 0.0f64..100.0,
            isothermal in any::<bool>(),
            kind_ix in 0usize..3,
            init in prop::collection::vec(-2.0f64..2.0, 4),
            theta0 in 0.5f64..5.0,
            seed in any::<u64>(),
            ks in (0u32..9, 0u32..9),
            stride in 0usize..100,
            monitors in any::<bool>(),
            dir in "[a-z][a-z0-9_/]{0,12}",
        ) -> RunConfig {
            let linear_solver = LINEAR_SOLVERS[solver_ix].1;
            let jacobian = if linear_solver == LinearSolver::SparseDirect || !jac_fd {
                JacobianMode::Analytic
            } else {
                JacobianMode::FiniteDifference
            };
            RunConfig {
                params: Parameters {
                    m: phys[0], alpha: phys[1], lambda: phys[2], c_v: phys[3], k0: phys[4], k1: phys[5],
                    beta,
                    eps: [eps[0], eps[1], eps[2], eps[3]],
                    p: [pows[0], pows[1], pows[2], pows[3]],
                },
                grid: GridSpec { dim, nx, ny, lx: lengths.0, ly: lengths.1 },
                solver: SolverConfig {
                    dt_min: dts.0, dt_init: dts.1, dt_max: dts.2,
                    newton_tol: tol, newton_max_iter: iters, theta_floor: floor, growth_factor: growth,
                    linear_solver, jacobian,
                    averaging: if harmonic { FaceAveraging::Harmonic } else { FaceAveraging::Arithmetic },
                    coupling: if isothermal { Coupling::FrozenTemperature } else { Coupling::Full },
                    krylov_forcing: forcing, easy_iterations: easy,
                },
                t_final,
                initial: InitialSpec {
                    kind: KINDS[kind_ix].1,
                    u0: init[0], theta0, amp: init[1].abs(), mean: init[2], seed,
                    ku: ks.0, ampu: init[3], ktheta: ks.1, amptheta: 0.4 * theta0,
                },
                output: OutputSpec { dir, snapshot_stride: stride, monitors },
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn round_trip_is_lossless(cfg in arb_config()) {
            prop_assert!(cfg.validate().is_ok());
            let text = serialize_config(&cfg);
            prop_assert_eq!(parse_config(&text).unwrap(), cfg);
        }
    }
}
