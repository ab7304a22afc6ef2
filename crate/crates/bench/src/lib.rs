//! Fixtures shared by the benchmarks.

use sparse_music::harness::{draw_instance, ExperimentConfig, Geometry, Instance};
use sparse_music::solvers::SparseProblem;

/// Configuration on a centered `side × side` grid at the default geometry.
pub fn config(n: usize, s: usize, side: usize, sigma: f64) -> ExperimentConfig {
    ExperimentConfig { n, s, sigma, geometry: Geometry { side, ..Default::default() }, ..Default::default() }
}

/// First trial instance of `config(n, s, side, sigma)`.
pub fn instance(n: usize, s: usize, side: usize, sigma: f64) -> Instance {
    let c = config(n, s, side, sigma);
    draw_instance(&c, c.trial_seed(0)).expect("valid benchmark instance")
}

/// Single-column problem: the first data column against the normalized sensing matrix.
pub fn column_problem(inst: &Instance, epsilon: f64) -> SparseProblem {
    SparseProblem::new(inst.pair.phi_ext.clone(), inst.data.y.column(0).into_owned(), epsilon).expect("valid problem")
}
