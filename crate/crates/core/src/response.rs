//! Phase and amplitude response functions on the slow submanifold,
//! ∇Θ(K(θ, σ)) = Σ Z_n(θ)σⁿ and ∇Σ_s(K(θ, σ)) = Σ I_n(θ)σⁿ.
//!
//! With F_n the σ-coefficients of DXᵀ(K(θ, σ)) the orders satisfy
//!
//! (1/T)Z_n′ = −(F_0 + nλ_s)Z_n − G_n,        G_n = Σ_{i<n} F_{n−i} Z_i,
//! (1/T)I_n′ = −(F_0 + (n−1)λ_s)I_n − H_n,    H_n = Σ_{i<n} F_{n−i} I_i,
//!
//! and decouple in the adjoint frame: Z_n = Qv with
//! (1/T)v′ + (Λ̃ᵀ + nλ_s)v = −𝒬ᵀG_n.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Frame, FrameKind};
use crate::manifold::{matvec_on_grid, ManifoldExpansion};
use crate::model::{jet_compose, JetMode, VectorField};
use crate::series::{FourierSeries, FourierTaylor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSettings {
    pub order: usize,
    pub small_divisor_tol: f64,
    /// Bound on the relative size of the free-mode right-hand side at n = 1.
    pub solvability_tol: f64,
    pub dealias: bool,
}

impl Default for ResponseSettings {
    fn default() -> Self {
        Self {
            order: 9,
            small_divisor_tol: 1e-8,
            solvability_tol: 1e-9,
            dealias: false,
        }
    }
}

/// F_0..F_L as row-major d×d matrices at every grid point, [order][m][entry].
#[derive(Clone, Debug)]
pub struct JacobianJets {
    grid: Vec<Vec<Vec<f64>>>,
}

impl JacobianJets {
    pub fn new(model: &dyn VectorField, manifold: &FourierTaylor, dealias: bool) -> Result<Self> {
        let f = jet_compose(model, manifold, JetMode::JacobianTranspose, dealias)?;
        let len = f.len();
        let grid = f
            .terms()
            .iter()
            .map(|t| {
                let s = t.real_samples();
                (0..len).map(|m| s.iter().map(|r| r[m]).collect()).collect()
            })
            .collect();
        Ok(Self { grid })
    }

    pub fn order(&self) -> usize {
        self.grid.len() - 1
    }

    /// F_n on the grid.
    pub fn term(&self, n: usize) -> &[Vec<f64>] {
        &self.grid[n]
    }

    /// Σ_{i<n} F_{n−i} u_i.
    pub fn convolve(&self, lower: &[FourierSeries], n: usize) -> Result<FourierSeries> {
        if n > self.order() || lower.len() < n {
            return Err(Error::InvalidInput(format!(
                "order {n} needs F up to {n} and {n} lower terms"
            )));
        }
        let mut acc = FourierSeries::zeros(lower[0].arity(), lower[0].len(), 1.0)?;
        for (i, u) in lower.iter().enumerate().take(n) {
            acc = acc.add(&matvec_on_grid(&self.grid[n - i], u, false)?)?;
        }
        Ok(acc)
    }
}

/// Grid-max of (1/T)u′ + (F_0 + shift)u + rhs, absolute and relative to
/// the grid-max of the largest of the four terms.
pub fn adjoint_residual(
    jets: &JacobianJets,
    term: &FourierSeries,
    rhs: &FourierSeries,
    period_t: f64,
    shift: f64,
) -> Result<(f64, f64)> {
    let d = term
        .differentiate()
        .scale(Complex64::new(1.0 / period_t, 0.0));
    let f = matvec_on_grid(jets.term(0), term, false)?;
    let s = term.scale(Complex64::new(shift, 0.0));
    let scale = [&d, &f, &s, rhs]
        .iter()
        .map(|x| x.grid_max_norm())
        .fold(0.0, f64::max);
    let r = d.add(&f)?.add(&s)?.add(rhs)?.grid_max_norm();
    Ok((r, r / scale.max(f64::MIN_POSITIVE)))
}

/// Solution of one adjoint order together with the bookkeeping of its solve.
#[derive(Clone, Debug)]
pub struct AdjointOrder {
    pub term: FourierSeries,
    /// G_n or H_n.
    pub forcing: FourierSeries,
    pub min_divisor: f64,
    pub odd_mass: f64,
    pub symmetry_drift: f64,
    /// Right-hand side of the free mode, when one was present.
    pub free_residual: Option<Complex64>,
    /// Grid-max of the reduced right-hand side, the scale for `free_residual`.
    pub rhs_scale: f64,
}

fn solve_adjoint_order(
    bundle: &Frame,
    adjoint: &Frame,
    forcing: FourierSeries,
    shift: f64,
    free: Option<usize>,
    tol: f64,
    order: usize,
) -> Result<AdjointOrder> {
    if bundle.kind != FrameKind::Bundle || adjoint.kind != FrameKind::Adjoint {
        return Err(Error::InvalidInput(
            "expected a bundle frame and its adjoint".into(),
        ));
    }
    let rhs = bundle
        .apply_transpose(&bundle.to_frame_grid(&forcing)?)?
        .scale(Complex64::new(-1.0, 0.0));
    let rhs_scale = rhs.grid_max_abs();
    let (v, free_residual, min_divisor) = adjoint.solve_reduced(&rhs, shift, free, tol, order)?;
    let (mut term, odd_mass) = adjoint.apply(&v)?.folded_to_period_one()?;
    let symmetry_drift = term.symmetrize_real();
    Ok(AdjointOrder {
        term,
        forcing,
        min_divisor,
        odd_mass,
        symmetry_drift,
        free_residual,
        rhs_scale,
    })
}

/// Z_n for n ≥ 1 given Z_0..Z_{n−1}.
pub fn next_order_zn(
    jets: &JacobianJets,
    lower: &[FourierSeries],
    bundle: &Frame,
    adjoint: &Frame,
    slow_exponent: f64,
    n: usize,
    tol: f64,
) -> Result<AdjointOrder> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "Z_0 is the phase response curve".into(),
        ));
    }
    let g = jets.convolve(lower, n)?;
    solve_adjoint_order(bundle, adjoint, g, n as f64 * slow_exponent, None, tol, n)
}

/// I_n for n ≥ 2, or the provisional I_1 with its free mode left at zero.
///
/// At n = 1 the operator has the constant mode of the trivial direction in
/// its kernel; the corresponding right-hand side is returned in
/// `free_residual` for the solvability test.
#[allow(clippy::too_many_arguments)]
pub fn next_order_in(
    jets: &JacobianJets,
    lower: &[FourierSeries],
    bundle: &Frame,
    adjoint: &Frame,
    slow_exponent: f64,
    n: usize,
    tol: f64,
) -> Result<AdjointOrder> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "I_0 is the slow amplitude response curve".into(),
        ));
    }
    let h = jets.convolve(lower, n)?;
    let free = (n == 1).then_some(0);
    solve_adjoint_order(
        bundle,
        adjoint,
        h,
        (n as f64 - 1.0) * slow_exponent,
        free,
        tol,
        n,
    )
}

/// Pointwise ⟨a, b⟩ on the grid (real parts).
pub fn pairing_on_grid(a: &FourierSeries, b: &FourierSeries) -> Vec<f64> {
    let sa = a.real_samples();
    let sb = b.real_samples();
    (0..a.len())
        .map(|m| sa.iter().zip(&sb).map(|(x, y)| x[m] * y[m]).sum())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseDiagnostics {
    /// Grid-max adjoint homological residual per order of Z.
    pub phase_residuals: Vec<f64>,
    /// The same relative to the largest term of the equation.
    pub phase_relative: Vec<f64>,
    pub amplitude_residuals: Vec<f64>,
    pub amplitude_relative: Vec<f64>,
    pub phase_divisors: Vec<Option<f64>>,
    pub amplitude_divisors: Vec<Option<f64>>,
    /// |h| of the free mode at n = 1 relative to the reduced right-hand side.
    pub solvability_residual: f64,
    /// Constant added to the free mode so that ⟨I_0, K_1′⟩ + ⟨I_1, K_0′⟩ = 0.
    pub free_coefficient: f64,
    /// max_θ |⟨I_0, K_1′⟩ + ⟨I_1, K_0′⟩| after normalization.
    pub normalization_residual: f64,
    pub odd_mass: f64,
    pub symmetry_drift: f64,
}

#[derive(Clone, Debug)]
pub struct ResponseExpansion {
    pub z: FourierTaylor,
    pub i: FourierTaylor,
    pub slow_exponent: f64,
    pub period: f64,
    pub diagnostics: ResponseDiagnostics,
}

impl ResponseExpansion {
    pub fn order(&self) -> usize {
        self.z.order()
    }

    /// ∇Θ(K(θ, σ)) truncated.
    pub fn phase_gradient(&self, theta: f64, sigma: f64) -> Vec<f64> {
        self.z.eval(theta, sigma)
    }

    /// ∇Σ_s(K(θ, σ)) truncated.
    pub fn amplitude_gradient(&self, theta: f64, sigma: f64) -> Vec<f64> {
        self.i.eval(theta, sigma)
    }
}

/// Column j of a frame as a period-1 real series.
fn column_on_unit_period(frame: &Frame, j: usize) -> Result<FourierSeries> {
    let (mut c, _) = frame.columns[j].folded_to_period_one()?;
    c.symmetrize_real();
    Ok(c)
}

/// Computes Z_0..Z_L and I_0..I_L.
pub fn expand_response_functions(
    model: &dyn VectorField,
    manifold: &ManifoldExpansion,
    bundle: &Frame,
    adjoint: &Frame,
    settings: &ResponseSettings,
) -> Result<ResponseExpansion> {
    let order = settings.order;
    if manifold.order() < order {
        return Err(Error::InvalidInput(format!(
            "response order {order} needs the manifold to order {order}, have {}",
            manifold.order()
        )));
    }
    let t = manifold.period;
    let ls = manifold.slow_exponent;
    let jets = JacobianJets::new(model, &manifold.k.truncated(order), settings.dealias)?;

    let z0 = column_on_unit_period(adjoint, 0)?;
    let i0 = column_on_unit_period(adjoint, 1)?;
    let zero = FourierSeries::zeros(z0.arity(), z0.len(), 1.0)?;
    let (r, rel) = adjoint_residual(&jets, &z0, &zero, t, 0.0)?;
    let (mut phase_residuals, mut phase_relative) = (vec![r], vec![rel]);
    let (r, rel) = adjoint_residual(&jets, &i0, &zero, t, -ls)?;
    let (mut amplitude_residuals, mut amplitude_relative) = (vec![r], vec![rel]);
    let mut phase_divisors = vec![None];
    let mut amplitude_divisors = vec![None];
    let mut z = vec![z0];
    let mut i = vec![i0];
    let mut odd_mass: f64 = 0.0;
    let mut symmetry_drift: f64 = 0.0;
    let mut solvability_residual = 0.0;
    let mut free_coefficient = 0.0;
    let mut normalization_residual = 0.0;

    for n in 1..=order {
        let zn = next_order_zn(
            &jets,
            &z,
            bundle,
            adjoint,
            ls,
            n,
            settings.small_divisor_tol,
        )?;
        let (r, rel) = adjoint_residual(&jets, &zn.term, &zn.forcing, t, n as f64 * ls)?;
        phase_residuals.push(r);
        phase_relative.push(rel);
        phase_divisors.push(Some(zn.min_divisor));
        odd_mass = odd_mass.max(zn.odd_mass);
        symmetry_drift = symmetry_drift.max(zn.symmetry_drift);
        z.push(zn.term);

        let mut in_ = next_order_in(
            &jets,
            &i,
            bundle,
            adjoint,
            ls,
            n,
            settings.small_divisor_tol,
        )?;
        if n == 1 {
            let h = in_.free_residual.map(|c| c.norm()).unwrap_or(0.0);
            solvability_residual = h / in_.rhs_scale.max(f64::MIN_POSITIVE);
            if solvability_residual > settings.solvability_tol {
                return Err(Error::Solvability {
                    order: 1,
                    residual: solvability_residual,
                });
            }
            // Adding c to the free mode adds c·Z_0 to I_1 and c to ⟨I_1, K_0′⟩.
            let k0p = manifold.derivatives.term(0);
            let k1p = manifold.derivatives.term(1);
            let base: Vec<f64> = pairing_on_grid(&i[0], k1p)
                .iter()
                .zip(pairing_on_grid(&in_.term, k0p))
                .map(|(a, b)| a + b)
                .collect();
            let c = -base.iter().sum::<f64>() / base.len() as f64;
            in_.term = in_.term.add(&z[0].scale(Complex64::new(c, 0.0)))?;
            free_coefficient = c;
            normalization_residual = pairing_on_grid(&i[0], k1p)
                .iter()
                .zip(pairing_on_grid(&in_.term, k0p))
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max);
        }
        let (r, rel) = adjoint_residual(&jets, &in_.term, &in_.forcing, t, (n as f64 - 1.0) * ls)?;
        amplitude_residuals.push(r);
        amplitude_relative.push(rel);
        amplitude_divisors.push(Some(in_.min_divisor));
        odd_mass = odd_mass.max(in_.odd_mass);
        symmetry_drift = symmetry_drift.max(in_.symmetry_drift);
        i.push(in_.term);
    }

    Ok(ResponseExpansion {
        z: FourierTaylor::new(z)?,
        i: FourierTaylor::new(i)?,
        slow_exponent: ls,
        period: t,
        diagnostics: ResponseDiagnostics {
            phase_residuals,
            phase_relative,
            amplitude_residuals,
            amplitude_relative,
            phase_divisors,
            amplitude_divisors,
            solvability_residual,
            free_coefficient,
            normalization_residual,
            odd_mass,
            symmetry_drift,
        },
    })
}
