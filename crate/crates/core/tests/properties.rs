//! Randomized invariants of the building blocks.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use slowfold::cycle::{check_resonances, FloquetSpectrum};
use slowfold::error::Error;
use slowfold::jet::{Arith, Jet};
use slowfold::model::{eval_field, make_ei_model, make_oracle_model, EiParameters, VectorField};
use slowfold::series::{solve_diagonal, FourierSeries};

fn real_rows(arity: usize, log_len: std::ops::Range<u32>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    log_len.prop_flat_map(move |p| {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 1usize << p), arity)
    })
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn samples_round_trip(rows in real_rows(2, 3..8)) {
        let s = FourierSeries::from_real_samples(&rows, 1.0).unwrap();
        prop_assert!(max_gap(&s.real_samples(), &rows) < 1e-12);
        prop_assert!(s.conjugate_asymmetry() < 1e-12);
    }

    #[test]
    fn evaluation_interpolates_the_grid(rows in real_rows(1, 3..7), pick in 0usize..1000) {
        let s = FourierSeries::from_real_samples(&rows, 1.0).unwrap();
        let m = pick % s.len();
        let v = s.eval_real(m as f64 / s.len() as f64);
        prop_assert!((v[0] - rows[0][m]).abs() < 1e-10);
    }

    #[test]
    fn lifting_then_folding_is_identity(rows in real_rows(3, 3..7)) {
        let s = FourierSeries::from_real_samples(&rows, 1.0).unwrap();
        let lifted = s.lifted_to_period_two().unwrap();
        prop_assert_eq!(lifted.period(), 2.0);
        // Same function: the lifted samples repeat the original ones twice.
        let twice = lifted.real_samples();
        let n = s.len();
        for (row, orig) in twice.iter().zip(&rows) {
            for m in 0..2 * n {
                prop_assert!((row[m] - orig[m % n]).abs() < 1e-10);
            }
        }
        let (back, odd) = lifted.folded_to_period_one().unwrap();
        prop_assert!(odd < 1e-12);
        prop_assert!(max_gap(&back.real_samples(), &rows) < 1e-12);
    }

    #[test]
    fn diagonal_solve_satisfies_its_equation(
        rows in real_rows(2, 3..7),
        period in 0.5f64..30.0,
        re in prop::array::uniform2(0.1f64..3.0),
        im in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let rhs = FourierSeries::from_real_samples(&rows, 1.0).unwrap();
        let shifts = [Complex64::new(-re[0], im[0]), Complex64::new(re[1], im[1])];
        let sol = solve_diagonal(&rhs, period, &shifts, None, 1e-12, 0).unwrap().solution;
        let du = sol.differentiate().samples();
        let u = sol.samples();
        let r = rhs.samples();
        for j in 0..2 {
            for m in 0..rhs.len() {
                let lhs = du[j][m] / period + shifts[j] * u[j][m];
                prop_assert!((lhs - r[j][m]).norm() < 1e-9 * (1.0 + r[j][m].norm()));
            }
        }
    }

    #[test]
    fn field_jets_are_taylor_coefficients(
        coeffs in prop::collection::vec(prop::collection::vec(-0.5f64..0.5, 5), 6),
        base in prop::collection::vec(0.05f64..1.5, 6),
    ) {
        // x(σ) = base + Σ_{n=1..4} c_n σ^n, pushed through the field as a jet.
        let order = 4;
        let model = make_ei_model(EiParameters::default()).unwrap();
        let jets: Vec<Jet> = (0..6)
            .map(|i| {
                let mut c: Vec<Vec<f64>> = coeffs[i].iter().map(|v| vec![*v]).collect();
                c[0][0] = base[i];
                Jet::new(c)
            })
            .collect();
        let out = model.field_jet(&jets);
        for sigma in [1e-3f64, -2e-3] {
            let x: Vec<f64> = (0..6)
                .map(|i| base[i] + (1..=order).map(|n| coeffs[i][n] * sigma.powi(n as i32)).sum::<f64>())
                .collect();
            let exact = eval_field(&model, &x);
            for (i, jet) in out.iter().enumerate() {
                let series: f64 = (0..=order).map(|n| jet.coefficient(n)[0] * sigma.powi(n as i32)).sum();
                // The remainder is O(σ^5) times the size of the high derivatives.
                prop_assert!((series - exact[i]).abs() < 1e-9 * (1.0 + exact[i].abs()),
                    "component {} at σ = {}: {} vs {}", i, sigma, series, exact[i]);
            }
        }
    }

    #[test]
    fn jet_products_truncate_cauchy_products(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let ja = Jet::new(a.iter().map(|v| vec![*v]).collect());
        let jb = Jet::new(b.iter().map(|v| vec![*v]).collect());
        let p = ja.mul(&jb);
        for n in 0..6 {
            let expected: f64 = (0..=n).map(|i| a[i] * b[n - i]).sum();
            prop_assert!((p.coefficient(n)[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_resonances_are_flagged(
        slow in -1.5f64..-0.05,
        count in 2usize..5,
        shift in -3i64..3,
        period in 1.0f64..25.0,
    ) {
        // λ_2 = count·λ_1 + 2πi·shift/T is resonant with multi-index (count, 0).
        let l1 = Complex64::new(slow, 0.0);
        let l2 = l1 * count as f64 + Complex64::new(0.0, 2.0 * PI * shift as f64 / period);
        let spectrum = FloquetSpectrum::from_exponents(period, vec![Complex64::new(0.0, 0.0), l1, l2]);
        let Ok(spectrum) = spectrum else { return Ok(()); };
        let report = check_resonances(&spectrum, 6, 1e-8, 256).unwrap();
        prop_assert!(report.flagged().any(|e| e.multi_index == vec![count, 0] && e.target == 2));
        let is_resonance = matches!(report.ensure_nonresonant(), Err(Error::Resonance { .. }));
        prop_assert!(is_resonance);
    }
}

#[test]
fn oracle_field_is_tangent_on_the_circle() {
    let model = make_oracle_model();
    for m in 0..16 {
        let a = 2.0 * PI * m as f64 / 16.0;
        let f = eval_field(&model, &[a.cos(), a.sin()]);
        assert!((f[0] + a.sin()).abs() < 1e-15 && (f[1] - a.cos()).abs() < 1e-15);
    }
}
