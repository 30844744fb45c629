//! Named initial-condition generators.

use std::f64::consts::PI;

use nich_core::grid::mean;
use nich_core::{Field, Grid, State};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, InitialKind, InitialSpec};

/// Builds the initial state at `t = 0`; `seed` drives the spinodal noise.
pub fn make_initial(spec: &InitialSpec, grid: &Grid, seed: u64) -> Result<State, ConfigError> {
    let lx = grid.length()[0];
    let (u, theta) = match spec.kind {
        InitialKind::Uniform => (Field::constant(*grid, spec.u0), Field::constant(*grid, spec.theta0)),
        InitialKind::Spinodal => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise: Vec<f64> = (0..grid.cell_count())
                .map(|_| if spec.amp > 0.0 { rng.random_range(-spec.amp..=spec.amp) } else { 0.0 })
                .collect();
            let noise = Field::new(*grid, noise).expect("one value per cell");
            let shift = spec.mean - mean(&noise);
            (noise.map(|v| v + shift), Field::constant(*grid, spec.theta0))
        }
        InitialKind::Cosine => {
            if !(spec.theta0 - spec.amptheta.abs() > 0.0) {
                return Err(ConfigError::Domain {
                    key: "initial.amptheta".into(),
                    message: format!(
                        "cosine temperature profile needs theta0 - |amptheta| > 0, got {} - {}",
                        spec.theta0,
                        spec.amptheta.abs()
                    ),
                });
            }
            let (wu, wq) = (spec.ku as f64 * PI / lx, spec.ktheta as f64 * PI / lx);
            (
                Field::from_fn(*grid, |x| spec.mean + spec.ampu * (wu * x[0]).cos()),
                Field::from_fn(*grid, |x| spec.theta0 + spec.amptheta * (wq * x[0]).cos()),
            )
        }
    };
    if !(theta.min() > 0.0) {
        return Err(ConfigError::Domain {
            key: "initial".into(),
            message: format!("initial temperature must be positive everywhere, minimum is {}", theta.min()),
        });
    }
    State::new(0.0, u, theta).map_err(|e| ConfigError::Domain { key: "initial".into(), message: e.to_string() })
}
