//! Shared fixtures for the criterion benchmarks.

use msde_core::simulate::{simulate, SimConfig};
use msde_core::{ManifoldSpec, Trajectory};

/// A seeded unit-sphere trajectory of `n_steps` steps at Δ = 0.01.
pub fn sphere_fixture(n_steps: usize) -> Trajectory {
    simulate(&SimConfig::new(ManifoldSpec::sphere(), n_steps, 0.01, 7)).expect("valid fixture config")
}

/// A seeded Klein bottle trajectory (a = 2, r = 1) at Δ = 0.01.
pub fn klein_fixture(n_steps: usize) -> Trajectory {
    let kb = ManifoldSpec::klein_bottle(2.0, 1.0).expect("valid radii");
    simulate(&SimConfig::new(kb, n_steps, 0.01, 7)).expect("valid fixture config")
}
