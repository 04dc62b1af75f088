//! Acceptance gate: one PASS/FAIL line per criterion, then a single assert.
//! Run with `cargo test --test acceptance -- --nocapture` to see the table.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{binomial_series, ei_config, grid_max_error, oracle_config};
use slowfold::frames::{build_adjoint_frame, build_bundle_frame, Representation};
use slowfold::pipeline::{compute, run_stages, Stage};
use slowfold::validation::invariance_residual;

struct Gate {
    lines: Vec<(usize, bool, String)>,
}

impl Gate {
    fn record(&mut self, criterion: usize, pass: bool, detail: String) {
        println!(
            "criterion {criterion}: {} {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        self.lines.push((criterion, pass, detail));
    }
}

fn rel_ok(value: f64, reference: f64, tol: f64) -> bool {
    ((value - reference) / reference).abs() < tol
}

#[test]
fn acceptance() {
    let mut gate = Gate { lines: Vec::new() };
    let ei = ei_config(Representation::Complex);

    // 1. Floquet table.
    let start = Instant::now();
    let (art, failure) = compute(&ei, Stage::Floquet, None);
    let floquet_secs = start.elapsed().as_secs_f64();
    assert!(
        failure.is_none(),
        "floquet stage failed: {:?}",
        failure.map(|f| f.1.to_string())
    );
    {
        let s = &art.analysis.as_ref().unwrap().spectrum;
        let t = art.cycle.as_ref().unwrap().period;
        let (mu, l) = (&s.multipliers, &s.exponents);
        let checks = [
            rel_ok(mu[1].re, 0.0537, 0.01),
            rel_ok(mu[2].re, 2.3e-4, 0.02) && rel_ok(mu[2].im.abs(), 3.13e-4, 0.02),
            rel_ok(mu[3].re, 2.3e-4, 0.02) && rel_ok(mu[3].im.abs(), 3.13e-4, 0.02),
            mu[2].im * mu[3].im < 0.0,
            rel_ok(mu[4].re, -3.99e-10, 0.05),
            rel_ok(mu[5].re, -1.57e-10, 0.05),
            rel_ok(l[1].re, -0.1405, 0.01),
            rel_ok(l[2].re, -0.377, 0.01) && rel_ok(l[2].im.abs(), 0.045, 0.01),
            rel_ok(l[4].re, -1.040, 0.01),
            rel_ok(l[5].re, -1.0845, 0.01),
            l[4].im == PI / t && l[5].im == PI / t,
            floquet_secs < 60.0,
        ];
        gate.record(
            1,
            checks.iter().all(|c| *c),
            format!(
                "mu1={:.4e} mu2={:.3e}{:+.3e}i mu4={:.3e} mu5={:.3e} lambda1={:.5} lambda2={:.4}{:+.4}i lambda4={:.4} lambda5={:.5} ({floquet_secs:.1} s)",
                mu[1].re, mu[2].re, mu[2].im, mu[4].re, mu[5].re, l[1].re, l[2].re, l[2].im, l[4].re, l[5].re
            ),
        );
    }

    // Full E-I run for criteria 2, 4, 5, 7, 8.
    let start = Instant::now();
    let (art, failure) = compute(&ei, Stage::Validation, None);
    let full_secs = start.elapsed().as_secs_f64();
    assert!(
        failure.is_none(),
        "E-I pipeline failed: {:?}",
        failure.map(|f| f.1.to_string())
    );
    let model = art.model.as_ref();
    let man = art.manifold.as_ref().unwrap();
    let resp = art.response.as_ref().unwrap();
    let report = art.validation.as_ref().unwrap();

    // 2. Invariance residual.
    {
        let dom = &report.accuracy;
        let idx = dom
            .tolerances
            .iter()
            .position(|t| *t == 1e-8)
            .expect("1e-8 among the tolerances");
        let two_sided = dom.is_two_sided(idx);
        // Independent spot check just inside the reported bounds.
        let mut spot: f64 = 0.0;
        for m in (0..dom.theta.len()).step_by(dom.theta.len() / 64) {
            let th = dom.theta[m];
            for (sign, bound) in [(1.0, dom.positive[idx][m]), (-1.0, dom.negative[idx][m])] {
                spot = spot.max(invariance_residual(man, model, th, sign * 0.99 * bound));
            }
        }
        let residuals = &man.diagnostics.residuals;
        let worst_order = residuals.iter().cloned().fold(0.0, f64::max);
        gate.record(
            2,
            two_sided && spot < 1e-8 && worst_order < 1e-9 && full_secs < 600.0,
            format!(
                "two-sided Omega at 1e-8 for every theta: {two_sided} (min extent {:.3}, {} sides at the window edge), E just inside bounds {spot:.2e}, max per-order residual {worst_order:.2e} ({full_secs:.1} s)",
                dom.min_extent(idx),
                dom.saturated[idx]
            ),
        );
    }

    // 3. Oracle exactness.
    {
        let start = Instant::now();
        let (o, failure) = compute(&oracle_config(5, 256), Stage::Response, None);
        let secs = start.elapsed().as_secs_f64();
        assert!(failure.is_none());
        let t = o.cycle.as_ref().unwrap().period;
        let slow = o.manifold.as_ref().unwrap().slow_exponent;
        let om = o.manifold.as_ref().unwrap();
        let z0 = o.response.as_ref().unwrap().z.term(0);
        let iprc = grid_max_error(256, |th| {
            let v = z0.eval_real(th);
            let a = 2.0 * PI * th;
            (v[0] + a.sin() / (2.0 * PI)).hypot(v[1] - a.cos() / (2.0 * PI))
        });
        let s = om.k.term(1).eval_real(0.0)[0].signum();
        let coeffs = binomial_series(-0.5, 5);
        let mut k_err: f64 = 0.0;
        for (n, coeff) in coeffs.iter().enumerate() {
            let c = coeff * s.powi(n as i32);
            k_err = k_err.max(grid_max_error(256, |th| {
                let v = om.k.term(n).eval_real(th);
                let a = 2.0 * PI * th;
                (v[0] - c * a.cos()).hypot(v[1] - c * a.sin())
            }));
        }
        let pass = (t - 2.0 * PI).abs() < 1e-9
            && (slow + 2.0).abs() < 1e-8
            && iprc < 1e-8
            && k_err < 1e-8
            && secs < 10.0;
        gate.record(
            3,
            pass,
            format!(
                "|T-2pi|={:.1e} |lambda_s+2|={:.1e} iPRC err={iprc:.1e} K_n err (n<=5)={k_err:.1e} ({secs:.2} s)",
                (t - 2.0 * PI).abs(),
                (slow + 2.0).abs()
            ),
        );
    }

    // 4. Eigenvalue duality.
    {
        let cc = &art.frame_checks.as_ref().unwrap().cross_check;
        let eig = cc.eigenvalue_mismatch.iter().cloned().fold(0.0, f64::max);
        let pass = eig < 1e-8 && cc.frame_duality < 1e-8 && cc.segment_duality < 1e-8;
        gate.record(
            4,
            pass,
            format!(
                "eigenvalue mismatch {eig:.1e}, Psi^T Phi = Id along the cycle {:.1e}, per segment {:.1e} (from t=0: {:.1e}, informational)",
                cc.frame_duality, cc.segment_duality, cc.cumulative_duality
            ),
        );
    }

    // 5. Orthogonality identities.
    {
        let orth = report.orthogonality.max();
        let norm = resp.diagnostics.normalization_residual;
        gate.record(
            5,
            orth < 1e-8 && norm < 1e-8 && resp.order() >= 9,
            format!(
                "max identity residual n<=9: {orth:.2e}, n=1 normalization pointwise {norm:.2e}"
            ),
        );
    }

    // 6. Antiperiodic real columns.
    {
        let cycle = art.cycle.as_ref().unwrap();
        let fa = art.analysis.as_ref().unwrap();
        let bundle =
            build_bundle_frame(model, cycle, fa, Representation::Real, &ei.expansion.scales)
                .unwrap();
        let adjoint = build_adjoint_frame(&bundle).unwrap();
        let mut worst: f64 = 0.0;
        let mut found = 0;
        for j in [4, 5] {
            for frame in [&bundle, &adjoint] {
                if let Some(d) = frame.antiperiodicity_defect(j) {
                    worst = worst.max(d);
                    found += 1;
                }
            }
        }
        gate.record(
            6,
            found == 4 && worst < 1e-9,
            format!("max |f(theta+1)+f(theta)| over bundle and iARC columns 4,5: {worst:.2e}"),
        );
    }

    // 7. Flow conjugacy.
    {
        let tr = &report.trajectory;
        let pass = tr.samples.len() == 50
            && tr.inversion_failures == 0
            && tr.conjugacy_max < 1e-6
            && tr.decay_max < 1e-6
            && (tr.horizons.last().unwrap() - 2.0 * man.period).abs() < 1e-9;
        gate.record(
            7,
            pass,
            format!(
                "{} samples to t=2T: conjugacy {:.2e}, decay ratio {:.2e}, phase drift {:.2e}",
                tr.samples.len(),
                tr.conjugacy_max,
                tr.decay_max,
                tr.phase_drift_max
            ),
        );
    }

    // 8. Directional derivatives.
    {
        let d = &report.directional;
        gate.record(
            8,
            d.samples == 50 && d.phase_max < 1e-7 && d.amplitude_max < 1e-7,
            format!(
                "<gradTheta,X>-1/T {:.2e}, <gradSigma,X>-lambda sigma {:.2e}",
                d.phase_max, d.amplitude_max
            ),
        );
    }

    // 9. Determinism.
    {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = run_stages(&ei, Stage::Validation, a.path(), true).unwrap();
        let mb = run_stages(&ei, Stage::Validation, b.path(), true).unwrap();
        let csv: Vec<_> = ma
            .files
            .iter()
            .filter(|f| f.path.ends_with(".csv"))
            .collect();
        let mut identical = ma.files == mb.files;
        for f in &csv {
            identical &= std::fs::read(a.path().join(&f.path)).unwrap()
                == std::fs::read(b.path().join(&f.path)).unwrap();
        }
        gate.record(
            9,
            identical && !csv.is_empty(),
            format!("{} CSV files compared byte for byte", csv.len()),
        );
    }

    let failed: Vec<usize> = gate.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
