//! Fourier-Taylor parameterization K(θ, σ) = Σ K_n(θ)σⁿ of the slow
//! submanifold.
//!
//! Order n solves the homological equation
//! (1/T)K_n′ + nλ_s K_n = DX(K_0)K_n + B_n, where B_n collects the lower
//! orders. In the bundle frame the equation decouples:
//! K_n = 𝒬u, (1/T)u′ + (nλ_s − Λ̃)u = QᵀB_n.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cycle::Cycle;
use crate::error::{Error, Result};
use crate::frames::{Frame, FrameKind};
use crate::model::{eval_field, eval_jacobian, jet_compose, JetMode, VectorField};
use crate::series::{horner, FourierSeries, FourierTaylor};

/// DX(K_0(θ_m)) row-major at every grid point.
pub fn jacobian_on_grid(model: &dyn VectorField, k0: &FourierSeries) -> Vec<Vec<f64>> {
    let g = k0.real_samples();
    (0..k0.len())
        .map(|m| {
            let x: Vec<f64> = g.iter().map(|r| r[m]).collect();
            eval_jacobian(model, &x)
        })
        .collect()
}

/// Pointwise product of row-major matrices on the grid with a series.
pub fn matvec_on_grid(
    mats: &[Vec<f64>],
    v: &FourierSeries,
    transpose: bool,
) -> Result<FourierSeries> {
    let d = v.arity();
    if mats.len() != v.len() {
        return Err(Error::InvalidInput(
            "matrix grid and series differ in length".into(),
        ));
    }
    let s = v.samples();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); v.len()]; d];
    for (m, a) in mats.iter().enumerate() {
        for i in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..d {
                let e = if transpose {
                    a[j * d + i]
                } else {
                    a[i * d + j]
                };
                acc += s[j][m] * e;
            }
            out[i][m] = acc;
        }
    }
    FourierSeries::from_samples(&out, v.period())
}

/// One solved order.
#[derive(Clone, Debug)]
pub struct OrderSolution {
    pub term: FourierSeries,
    /// Smallest divisor used in the reduced solve.
    pub min_divisor: f64,
    /// Odd-mode mass dropped when folding a 2-periodic product back to period 1.
    pub odd_mass: f64,
    /// Conjugate asymmetry removed by the final real projection.
    pub symmetry_drift: f64,
}

/// Solves (1/T)K′ + nλ_s K − DX(K_0)K = rhs through the frames.
pub fn solve_homological(
    bundle: &Frame,
    adjoint: &Frame,
    rhs: &FourierSeries,
    slow_exponent: f64,
    n: usize,
    tol: f64,
) -> Result<OrderSolution> {
    if bundle.kind != FrameKind::Bundle || adjoint.kind != FrameKind::Adjoint {
        return Err(Error::InvalidInput(
            "expected a bundle frame and its adjoint".into(),
        ));
    }
    let a = adjoint.apply_transpose(&bundle.to_frame_grid(rhs)?)?;
    let (u, _, min_divisor) = bundle.solve_reduced(&a, n as f64 * slow_exponent, None, tol, n)?;
    let (mut term, odd_mass) = bundle.apply(&u)?.folded_to_period_one()?;
    let symmetry_drift = term.symmetrize_real();
    Ok(OrderSolution {
        term,
        min_divisor,
        odd_mass,
        symmetry_drift,
    })
}

/// B_n: order-n coefficient of X(Σ_{m<n} K_m σ^m).
pub fn inhomogeneity(
    model: &dyn VectorField,
    lower: &FourierTaylor,
    n: usize,
    dealias: bool,
) -> Result<FourierSeries> {
    if lower.order() + 1 != n {
        return Err(Error::InvalidInput(format!(
            "B_{n} needs orders 0..{} exactly, got 0..{}",
            n - 1,
            lower.order()
        )));
    }
    let mut k = lower.clone();
    k.push(FourierSeries::zeros(k.arity(), k.len(), k.period())?)?;
    Ok(jet_compose(model, &k, JetMode::Field, dealias)?
        .term(n)
        .clone())
}

/// Grid-max of (1/T)K_n′ + nλ_s K_n − DX(K_0)K_n − B_n.
pub fn homological_residual(
    jac: &[Vec<f64>],
    term: &FourierSeries,
    rhs: &FourierSeries,
    period_t: f64,
    slow_exponent: f64,
    n: usize,
) -> Result<f64> {
    let lhs = term
        .differentiate()
        .scale(Complex64::new(1.0 / period_t, 0.0))
        .add(&term.scale(Complex64::new(n as f64 * slow_exponent, 0.0)))?
        .sub(&matvec_on_grid(jac, term, false)?)?
        .sub(rhs)?;
    Ok(lhs.grid_max_norm())
}

/// Computes K_n for n ≥ 2 from the lower orders.
#[allow(clippy::too_many_arguments)]
pub fn next_order_kn(
    model: &dyn VectorField,
    lower: &FourierTaylor,
    bundle: &Frame,
    adjoint: &Frame,
    slow_exponent: f64,
    n: usize,
    tol: f64,
    dealias: bool,
) -> Result<(OrderSolution, FourierSeries)> {
    if n < 2 {
        return Err(Error::InvalidInput(
            "the recursion starts at order 2".into(),
        ));
    }
    let b = inhomogeneity(model, lower, n, dealias)?;
    let sol = solve_homological(bundle, adjoint, &b, slow_exponent, n, tol)?;
    Ok((sol, b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDiagnostics {
    /// Per-order homological residual, grid-max 2-norm; entry 0 is the cycle
    /// equation (1/T)K_0′ − X(K_0), entry 1 the bundle equation.
    pub residuals: Vec<f64>,
    /// Per-order smallest divisor; orders 0 and 1 involve no division.
    pub min_divisors: Vec<Option<f64>>,
    pub odd_mass: Vec<f64>,
    pub symmetry_drift: Vec<f64>,
    /// max_θ ‖K_n(θ)‖ per order.
    pub grid_max: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ManifoldExpansion {
    pub k: FourierTaylor,
    /// K_n′ for each order.
    pub derivatives: FourierTaylor,
    pub slow_exponent: f64,
    pub period: f64,
    /// Scale b applied to the unit-norm slow eigenvector.
    pub gauge: f64,
    pub diagnostics: ManifoldDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSettings {
    pub order: usize,
    pub small_divisor_tol: f64,
    pub dealias: bool,
}

impl Default for ManifoldSettings {
    fn default() -> Self {
        Self {
            order: 9,
            small_divisor_tol: 1e-8,
            dealias: false,
        }
    }
}

/// Builds K_0..K_L.
pub fn expand_slow_manifold(
    model: &dyn VectorField,
    cycle: &Cycle,
    bundle: &Frame,
    adjoint: &Frame,
    slow_exponent: f64,
    settings: &ManifoldSettings,
) -> Result<ManifoldExpansion> {
    if settings.order < 1 {
        return Err(Error::InvalidInput(
            "manifold order must be at least 1".into(),
        ));
    }
    let t = cycle.period;
    let s = 1;
    if bundle.classes.get(s) != Some(&crate::cycle::FloquetClass::RealPositive) {
        return Err(Error::SlowDirection(
            bundle
                .classes
                .get(s)
                .map(|c| c.as_str())
                .unwrap_or("missing")
                .into(),
        ));
    }
    let k0 = cycle.samples.clone();
    let mut k1 = bundle.complex_columns[s].clone();
    k1.symmetrize_real();
    let jac = jacobian_on_grid(model, &k0);

    let mut residuals = Vec::new();
    let mut min_divisors = vec![None; 2];
    let mut odd_mass = vec![0.0; 2];
    let mut symmetry_drift = vec![0.0; 2];

    // Order 0: (1/T)K_0′ − X(K_0).
    let g = k0.real_samples();
    let x_rows: Vec<Vec<f64>> = {
        let mut rows = vec![vec![0.0; k0.len()]; k0.arity()];
        for m in 0..k0.len() {
            let x: Vec<f64> = g.iter().map(|r| r[m]).collect();
            for (i, v) in eval_field(model, &x).into_iter().enumerate() {
                rows[i][m] = v;
            }
        }
        rows
    };
    let field = FourierSeries::from_real_samples(&x_rows, 1.0)?;
    residuals.push(
        k0.differentiate()
            .scale(Complex64::new(1.0 / t, 0.0))
            .sub(&field)?
            .grid_max_norm(),
    );
    let zero = FourierSeries::zeros(k0.arity(), k0.len(), 1.0)?;
    residuals.push(homological_residual(&jac, &k1, &zero, t, slow_exponent, 1)?);

    let mut k = FourierTaylor::new(vec![k0, k1])?;
    for n in 2..=settings.order {
        let (sol, b) = next_order_kn(
            model,
            &k,
            bundle,
            adjoint,
            slow_exponent,
            n,
            settings.small_divisor_tol,
            settings.dealias,
        )?;
        residuals.push(homological_residual(
            &jac,
            &sol.term,
            &b,
            t,
            slow_exponent,
            n,
        )?);
        min_divisors.push(Some(sol.min_divisor));
        odd_mass.push(sol.odd_mass);
        symmetry_drift.push(sol.symmetry_drift);
        k.push(sol.term)?;
    }
    let k = if settings.order == 1 {
        k.truncated(1)
    } else {
        k
    };
    let derivatives = FourierTaylor::new(k.terms().iter().map(|t| t.differentiate()).collect())?;
    let grid_max = k.terms().iter().map(|t| t.grid_max_norm()).collect();
    Ok(ManifoldExpansion {
        k,
        derivatives,
        slow_exponent,
        period: t,
        gauge: bundle.scales[s],
        diagnostics: ManifoldDiagnostics {
            residuals,
            min_divisors,
            odd_mass,
            symmetry_drift,
            grid_max,
        },
    })
}

impl ManifoldExpansion {
    pub fn order(&self) -> usize {
        self.k.order()
    }

    /// K(θ, σ) by Horner's rule.
    pub fn evaluate(&self, theta: f64, sigma: f64) -> Vec<f64> {
        self.k.eval(theta, sigma)
    }

    /// Grid values of K_n and K_n′ for fast repeated evaluation at grid
    /// phases.
    pub fn grid_tables(&self) -> (OrderTable, OrderTable) {
        (
            self.k.terms().iter().map(|t| t.real_samples()).collect(),
            self.derivatives
                .terms()
                .iter()
                .map(|t| t.real_samples())
                .collect(),
        )
    }
}

/// Per-order grid samples, [order][component][m].
pub type OrderTable = Vec<Vec<Vec<f64>>>;

/// K(θ, σ) at one point.
pub fn evaluate_manifold(expansion: &ManifoldExpansion, theta: f64, sigma: f64) -> Vec<f64> {
    expansion.evaluate(theta, sigma)
}

/// Σ_n values[n][·][m] σⁿ at one grid index.
pub fn horner_at(values: &[Vec<Vec<f64>>], m: usize, sigma: f64) -> Vec<f64> {
    let per_order: Vec<Vec<f64>> = values
        .iter()
        .map(|v| v.iter().map(|r| r[m]).collect())
        .collect();
    horner(&per_order, sigma)
}

/// K_{L+1} for an expansion of order L, as needed by checks that pair the
/// response orders with one manifold order beyond them.
pub fn next_manifold_term(
    model: &dyn VectorField,
    expansion: &ManifoldExpansion,
    bundle: &Frame,
    adjoint: &Frame,
    settings: &ManifoldSettings,
) -> Result<OrderSolution> {
    let n = expansion.order() + 1;
    let (sol, _) = next_order_kn(
        model,
        &expansion.k,
        bundle,
        adjoint,
        expansion.slow_exponent,
        n,
        settings.small_divisor_tol,
        settings.dealias,
    )?;
    Ok(sol)
}
