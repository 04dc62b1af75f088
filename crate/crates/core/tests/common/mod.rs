#![allow(dead_code)]

use std::sync::OnceLock;

use slowfold::config::RunConfig;
use slowfold::frames::Representation;
use slowfold::pipeline::{compute, Artifacts, Stage};

/// Oracle run anchored at (1, 0) so θ = 0 sits on the positive x-axis.
pub fn oracle_config(order: usize, grid_n: usize) -> RunConfig {
    let mut c = RunConfig::default();
    c.model.name = "oracle".into();
    c.cycle.guess = vec![1.0, 0.0];
    c.cycle.relax_time = 0.0;
    c.cycle.grid_n = grid_n;
    c.floquet.segments = 8;
    c.validation.duality_segments = 8;
    c.expansion.order = order;
    c
}

pub fn ei_config(representation: Representation) -> RunConfig {
    let mut c = RunConfig::default();
    c.expansion.representation = representation;
    c
}

pub fn run(config: &RunConfig, until: Stage) -> Artifacts {
    let (art, failure) = compute(config, until, None);
    if let Some((stage, e)) = failure {
        panic!("stage {stage:?} failed: {e}");
    }
    art
}

/// Full E-I run in the complex representation, shared within a test binary.
pub fn ei_complex() -> &'static Artifacts {
    static CELL: OnceLock<Artifacts> = OnceLock::new();
    CELL.get_or_init(|| run(&ei_config(Representation::Complex), Stage::Validation))
}

/// E-I through the response stage in the real representation.
pub fn ei_real() -> &'static Artifacts {
    static CELL: OnceLock<Artifacts> = OnceLock::new();
    CELL.get_or_init(|| run(&ei_config(Representation::Real), Stage::Response))
}

/// Coefficients of σ^n, n ≤ order, in (1 − 2σ)^p.
pub fn binomial_series(p: f64, order: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut c = 1.0;
    for n in 1..=order {
        c *= (p - (n - 1) as f64) / n as f64 * -2.0;
        out.push(c);
    }
    out
}

pub fn grid_max_error(len: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..len)
        .map(|m| f(m as f64 / len as f64).abs())
        .fold(0.0, f64::max)
}
