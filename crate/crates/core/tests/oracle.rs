//! Closed-form checks on the planar oscillator x' = x − y − r²x,
//! y' = x + y − r²y. Its cycle is the unit circle with T = 2π and λ_s = −2.
//! With Σ = (r² − 1)/(2r²) the amplitude obeys Σ' = −2Σ, so the manifold is
//! r(σ) = (1 − 2σ)^{−1/2} along the ray at angle 2πθ. The phase gradient is
//! (−y, x)/(2πr²) and the amplitude gradient (x, y)/r⁴.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{binomial_series, grid_max_error, oracle_config, run};
use slowfold::manifold::ManifoldExpansion;
use slowfold::pipeline::Stage;
use slowfold::validation::{
    accuracy_domain, trajectory_consistency, AccuracySettings, TrajectorySettings,
};

/// +1 when K_1 points outward, −1 otherwise; the closed forms are written
/// for the outward gauge.
fn orientation(manifold: &ManifoldExpansion) -> f64 {
    manifold.k.term(1).eval_real(0.0)[0].signum()
}

fn radial(theta: f64) -> [f64; 2] {
    [(2.0 * PI * theta).cos(), (2.0 * PI * theta).sin()]
}

fn tangential(theta: f64) -> [f64; 2] {
    [-(2.0 * PI * theta).sin(), (2.0 * PI * theta).cos()]
}

#[test]
fn period_and_slow_exponent() {
    let art = run(&oracle_config(5, 256), Stage::Floquet);
    let cycle = art.cycle.as_ref().unwrap();
    assert!(
        (cycle.period - 2.0 * PI).abs() < 1e-9,
        "T = {}",
        cycle.period
    );
    let slow = art
        .analysis
        .as_ref()
        .unwrap()
        .spectrum
        .slow_exponent()
        .unwrap();
    assert!((slow + 2.0).abs() < 1e-8, "λ_s = {slow}");
    assert!(cycle.anchor[1].abs() < 1e-12 && (cycle.anchor[0] - 1.0).abs() < 1e-12);
}

#[test]
fn manifold_terms_follow_the_radial_series() {
    let order = 8;
    let art = run(&oracle_config(order, 256), Stage::Manifold);
    let man = art.manifold.as_ref().unwrap();
    let s = orientation(man);
    let coeffs = binomial_series(-0.5, order);
    for (n, coeff) in coeffs.iter().enumerate() {
        let term = man.k.term(n);
        let expected = coeff * s.powi(n as i32);
        let err = grid_max_error(256, |th| {
            let v = term.eval_real(th);
            let (r, t) = (radial(th), tangential(th));
            let along = v[0] * r[0] + v[1] * r[1] - expected;
            let across = v[0] * t[0] + v[1] * t[1];
            along.abs().max(across.abs())
        });
        assert!(err < 1e-8, "K_{n}: error {err:e} against {expected}");
    }
}

#[test]
fn response_terms_follow_the_gradients() {
    let order = 6;
    let art = run(&oracle_config(order, 256), Stage::Response);
    let man = art.manifold.as_ref().unwrap();
    let resp = art.response.as_ref().unwrap();
    let s = orientation(man);
    // ∇Θ = tangential/(2π r) and ∇Σ = s·radial/r³ along the ray.
    let phase = binomial_series(0.5, order);
    let amplitude = binomial_series(1.5, order);
    for n in 0..=order {
        let sn = s.powi(n as i32);
        let z = resp.z.term(n);
        let i = resp.i.term(n);
        let z_err = grid_max_error(256, |th| {
            let v = z.eval_real(th);
            let t = tangential(th);
            let c = phase[n] * sn / (2.0 * PI);
            (v[0] - c * t[0]).hypot(v[1] - c * t[1])
        });
        let i_err = grid_max_error(256, |th| {
            let v = i.eval_real(th);
            let r = radial(th);
            let c = amplitude[n] * sn * s;
            (v[0] - c * r[0]).hypot(v[1] - c * r[1])
        });
        assert!(z_err < 1e-8, "Z_{n}: {z_err:e}");
        assert!(i_err < 1e-8, "I_{n}: {i_err:e}");
    }
    let d = &resp.diagnostics;
    assert!(d.solvability_residual < 1e-9);
    assert!(d.normalization_residual < 1e-9);
}

#[test]
fn short_pipeline_runs_fast() {
    let start = Instant::now();
    let art = run(&oracle_config(5, 256), Stage::Validation);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "oracle pipeline took {elapsed} s");
    assert!((art.manifold.as_ref().unwrap().slow_exponent + 2.0).abs() < 1e-8);
    let iprc_err = grid_max_error(256, |th| {
        let v = art.response.as_ref().unwrap().z.term(0).eval_real(th);
        let t = tangential(th);
        (v[0] - t[0] / (2.0 * PI)).hypot(v[1] - t[1] / (2.0 * PI))
    });
    assert!(iprc_err < 1e-8, "iPRC error {iprc_err:e}");
}

#[test]
fn accuracy_bound_matches_closed_form_truncation() {
    let order = 5;
    let tol = 1e-8;
    let art = run(&oracle_config(order, 256), Stage::Manifold);
    let man = art.manifold.as_ref().unwrap();
    let model = art.model.as_ref();
    let settings = AccuracySettings {
        tolerances: vec![tol],
        ..Default::default()
    };
    let domain = accuracy_domain(man, model, &settings).unwrap();
    // Radius where |r(σ) − Σ_{n≤L} c_n σ^n| first reaches tol, by bisection.
    let coeffs = binomial_series(-0.5, order);
    let truncation = |sigma: f64| {
        let partial: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * sigma.powi(n as i32))
            .sum();
        ((1.0 - 2.0 * sigma).powf(-0.5) - partial).abs()
    };
    let (mut lo, mut hi) = (0.0, 0.45);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if truncation(mid) < tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = orientation(man);
    for m in (0..domain.theta.len()).step_by(16) {
        let outward = if s > 0.0 {
            domain.positive[0][m]
        } else {
            domain.negative[0][m]
        };
        let ratio = outward / lo;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "θ = {}: σ_max {outward} vs {lo}",
            domain.theta[m]
        );
    }
}

#[test]
fn trajectories_stay_on_the_manifold() {
    // Order 16 keeps the truncation error near 1e-12 at |σ| = 0.1.
    let art = run(&oracle_config(16, 256), Stage::Manifold);
    let man = art.manifold.as_ref().unwrap();
    let points: Vec<(f64, f64)> = [0.0, 0.13, 0.4, 0.77]
        .iter()
        .flat_map(|&th| [(th, 0.1), (th, -0.1), (th, 0.03)])
        .collect();
    let report = trajectory_consistency(
        man,
        art.model.as_ref(),
        &points,
        &TrajectorySettings::default(),
        &oracle_config(16, 256).integrator,
    )
    .unwrap();
    assert_eq!(report.inversion_failures, 0);
    assert!(
        report.conjugacy_max < 1e-8,
        "conjugacy {:e}",
        report.conjugacy_max
    );
    assert!(
        report.phase_drift_max < 1e-8,
        "phase drift {:e}",
        report.phase_drift_max
    );
    assert!(
        report.amplitude_error_max < 1e-8,
        "amplitude {:e}",
        report.amplitude_error_max
    );
}
