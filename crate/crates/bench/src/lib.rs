//! Shared setup for the solver benchmarks.

use baroflow_core::{FeSpace, GaussianPulse, Rect, State, StructuredTriMesh};

/// Space on the benchmark domain `(-5, 5)^2` with `m` cells per direction.
pub fn space(m: usize) -> FeSpace {
    let mesh = StructuredTriMesh::new(Rect::new(-5.0, 5.0, -5.0, 5.0), m).expect("valid benchmark mesh");
    FeSpace::new(mesh)
}

/// Projected Gaussian pulse at rest on `space`.
pub fn pulse(space: &FeSpace) -> State {
    GaussianPulse::default()
        .initial_state(space)
        .expect("benchmark initial data")
}
