//! Shared inputs for the benchmarks.

use imop_core::harness::{fixture, generate_observations, FixtureId};
use imop_core::Result;

/// Noisy observations of a fixture under its own data law.
pub fn observations(id: FixtureId, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let fx = fixture(id)?;
    let (obs, _) = generate_observations(&fx.instance, &fx.theta_true, &fx.law, &fx.noise, n, seed)?;
    Ok(obs.points)
}
