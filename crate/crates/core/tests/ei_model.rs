//! E-I mean-field model at its reference parameters.

mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use common::{ei_complex, ei_real};
use slowfold::frames::frame_residual;
use slowfold::model::{
    eval_field, eval_jacobian, make_ei_model, model_by_name, EiParameters, VectorField,
};
use slowfold::series::FourierSeries;

/// Reference multipliers from the published table: (value, relative tolerance).
const MU_1: (f64, f64) = (0.0537, 0.01);
const MU_2_RE: (f64, f64) = (2.3e-4, 0.02);
const MU_2_IM: (f64, f64) = (3.13e-4, 0.02);
const MU_4: (f64, f64) = (-3.99e-10, 0.05);
const MU_5: (f64, f64) = (-1.57e-10, 0.05);

fn within(value: f64, (reference, rel): (f64, f64)) -> bool {
    ((value - reference) / reference).abs() < rel
}

#[test]
fn jacobian_matches_central_differences() {
    let model = make_ei_model(EiParameters::default()).unwrap();
    let states = [
        vec![0.3, -1.2, 0.5, 0.2, 0.8, 1.1],
        vec![1.7, 0.4, 2.0, 0.05, -0.3, 0.6],
        vec![0.01, 0.0, 0.0, 0.01, 0.0, 0.0],
    ];
    let d = model.dim();
    for x in &states {
        let jac = eval_jacobian(&model, x);
        for j in 0..d {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (eval_field(&model, &xp), eval_field(&model, &xm));
            for i in 0..d {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!(
                    (jac[i * d + j] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                    "∂f_{i}/∂x_{j}: analytic {} vs {fd}",
                    jac[i * d + j]
                );
            }
        }
    }
}

#[test]
fn parameter_overrides_reach_the_model() {
    let m = model_by_name("ei", &[("tau_e".into(), 12.0)]).unwrap();
    assert!(m
        .parameters()
        .iter()
        .any(|(k, v)| k == "tau_e" && *v == 12.0));
    assert!(model_by_name("ei", &[("nope".into(), 1.0)]).is_err());
    assert!(model_by_name("lorenz", &[]).is_err());
}

#[test]
fn floquet_table_matches_published_values() {
    let art = ei_complex();
    let s = &art.analysis.as_ref().unwrap().spectrum;
    let t = art.cycle.as_ref().unwrap().period;
    let mu = &s.multipliers;
    assert!(within(mu[1].re, MU_1), "μ1 = {}", mu[1]);
    assert!(
        within(mu[2].re, MU_2_RE) && within(mu[2].im.abs(), MU_2_IM),
        "μ2 = {}",
        mu[2]
    );
    assert_relative_eq!(mu[2].re, mu[3].re);
    assert_relative_eq!(mu[2].im, -mu[3].im);
    assert!(within(mu[4].re, MU_4), "μ4 = {}", mu[4]);
    assert!(within(mu[5].re, MU_5), "μ5 = {}", mu[5]);
    let l = &s.exponents;
    for (value, reference) in [
        (l[1].re, -0.1405),
        (l[2].re, -0.377),
        (l[2].im.abs(), 0.045),
        (l[4].re, -1.040),
        (l[5].re, -1.0845),
    ] {
        assert!(within(value, (reference, 0.01)), "{value} vs {reference}");
    }
    assert_eq!(l[4].im, PI / t);
    assert_eq!(l[5].im, PI / t);
}

#[test]
fn frame_and_manifold_residuals() {
    let art = ei_complex();
    let cycle = art.cycle.as_ref().unwrap();
    let model = art.model.as_ref();
    let bundle = frame_residual(model, cycle, art.bundle.as_ref().unwrap()).unwrap();
    let adjoint = frame_residual(model, cycle, art.adjoint.as_ref().unwrap()).unwrap();
    assert!(bundle.relative < 1e-9, "bundle {:e}", bundle.relative);
    assert!(adjoint.relative < 1e-9, "adjoint {:e}", adjoint.relative);
    let checks = art.frame_checks.as_ref().unwrap();
    assert!(checks.biorthogonality < 1e-9);
    let diag = &art.manifold.as_ref().unwrap().diagnostics;
    assert!(
        diag.residuals.iter().all(|r| *r < 1e-9),
        "{:?}",
        diag.residuals
    );
    // Terms shrink with the order past the slow direction.
    for n in 2..diag.grid_max.len() {
        assert!(
            diag.grid_max[n] < diag.grid_max[n - 1],
            "{:?}",
            diag.grid_max
        );
    }
    let resp = &art.response.as_ref().unwrap().diagnostics;
    assert!(resp
        .phase_relative
        .iter()
        .chain(&resp.amplitude_relative)
        .all(|r| *r < 1e-9));
}

fn relative_gap(a: &FourierSeries, b: &FourierSeries) -> f64 {
    a.sub(b).unwrap().grid_max_norm() / b.grid_max_norm()
}

#[test]
fn real_and_complex_representations_agree() {
    let (c, r) = (ei_complex(), ei_real());
    let (rc, rr) = (c.response.as_ref().unwrap(), r.response.as_ref().unwrap());
    let (mc, mr) = (c.manifold.as_ref().unwrap(), r.manifold.as_ref().unwrap());
    // Term by term, relative to each term's own size; the high orders are
    // down to 1e-16 and carry proportionally more rounding.
    for n in 0..=rc.order() {
        let z = relative_gap(rr.z.term(n), rc.z.term(n));
        let i = relative_gap(rr.i.term(n), rc.i.term(n));
        let k = relative_gap(mr.k.term(n), mc.k.term(n));
        assert!(
            z < 1e-9 && i < 1e-9 && k < 1e-9,
            "order {n}: Z {z:e}, I {i:e}, K {k:e}"
        );
    }
    // The summed expansions over the default window.
    let gap = |a: &[f64], b: &[f64]| {
        let diff = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        diff / b.iter().map(|y| y * y).sum::<f64>().sqrt()
    };
    let mut worst: f64 = 0.0;
    for m in 0..64 {
        let theta = m as f64 / 64.0;
        for sigma in [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0] {
            worst = worst
                .max(gap(
                    &rr.phase_gradient(theta, sigma),
                    &rc.phase_gradient(theta, sigma),
                ))
                .max(gap(
                    &rr.amplitude_gradient(theta, sigma),
                    &rc.amplitude_gradient(theta, sigma),
                ))
                .max(gap(&mr.evaluate(theta, sigma), &mc.evaluate(theta, sigma)));
        }
    }
    assert!(worst < 1e-10, "summed expansions differ by {worst:e}");
}
