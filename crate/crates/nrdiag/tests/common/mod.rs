#![allow(dead_code)]

use nrdiag::problems::{self, ProblemCase};
use nrdiag::SolveOptions;

pub fn case(spec: &str) -> ProblemCase {
    problems::lookup(spec).unwrap().0
}

/// The case and the initial guess of the preset named in `spec`.
pub fn start(spec: &str) -> (ProblemCase, Vec<f64>) {
    let (case, preset) = problems::lookup(spec).unwrap();
    let x0 = case.preset(&preset.expect("spec names a preset")).unwrap().to_vec();
    (case, x0)
}

pub fn opts() -> SolveOptions {
    SolveOptions::default()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Seeded generator for test data that needs no shrinking.
pub fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::SeedableRng::seed_from_u64(seed)
}
