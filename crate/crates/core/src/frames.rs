//! Tangent/normal bundle frames along the cycle and their adjoint frames.
//!
//! The bundle frame has K_0′ as column 0 and the Floquet bundles K_{e_j} as
//! the remaining columns; it satisfies (1/T)𝒬′ = DX(K_0)𝒬 − 𝒬Λ̃. The adjoint
//! frame Q = 𝒬^{−T} holds the phase response curve in column 0 and the
//! amplitude response curves after it, and satisfies
//! (1/T)Q′ = −DXᵀ(K_0)Q + QΛ̃ᵀ.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cycle::{Cycle, FloquetAnalysis, FloquetClass};
use crate::error::{Error, Result};
use crate::model::{eval_field, eval_jacobian, VectorField};
use crate::ode::{adjoint_transfers, IntegratorSettings};
use crate::periodic::{transport_on_grid, PeriodicProduct};
use crate::series::{block_solve_2x2, grid_points, solve_diagonal, FourierSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Columns K_{e_j} with diagonal Λ̃ = diag(λ_j); all period 1.
    Complex,
    /// Real columns: real parts and imaginary parts for complex pairs, and
    /// 2-periodic columns for negative multipliers.
    Real,
}

impl std::str::FromStr for Representation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(Representation::Complex),
            "real" => Ok(Representation::Real),
            other => Err(Error::Config(format!("unknown representation '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Bundle,
    Adjoint,
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub kind: FrameKind,
    pub representation: Representation,
    pub classes: Vec<FloquetClass>,
    /// Cycle period T.
    pub period_t: f64,
    /// d-vector series, one per column.
    pub columns: Vec<FourierSeries>,
    /// Λ̃ for the bundle frame, Λ̃ᵀ for the adjoint frame.
    pub generator: DMatrix<Complex64>,
    /// Column scale b_j applied to the unit-gauge bundles (1 for column 0).
    pub scales: Vec<f64>,
    /// Scaled complex bundle columns b_j K_{e_j}, period 1, whatever the
    /// representation; kept for conversions and cross-checks.
    pub complex_columns: Vec<FourierSeries>,
    /// Largest pointwise condition number of the frame matrix.
    pub condition: f64,
    /// Largest imaginary part dropped when forming real columns.
    pub imaginary_defect: f64,
    grid: Vec<DMatrix<Complex64>>,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// θ-period of the columns, 1 or 2.
    pub fn period(&self) -> f64 {
        self.columns[0].period()
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Frame matrix at grid point m, columns as built.
    pub fn matrix_at(&self, m: usize) -> &DMatrix<Complex64> {
        &self.grid[m]
    }

    fn pointwise(
        &self,
        u: &FourierSeries,
        f: impl Fn(&DMatrix<Complex64>, &DVector<Complex64>) -> DVector<Complex64>,
    ) -> Result<FourierSeries> {
        let d = self.dim();
        if u.arity() != d || u.len() != self.len() || u.period() != self.period() {
            return Err(Error::InvalidInput(
                "series does not live on the frame grid".into(),
            ));
        }
        let s = u.samples();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.len()]; d];
        for (m, mat) in self.grid.iter().enumerate() {
            let v = DVector::from_iterator(d, s.iter().map(|r| r[m]));
            let w = f(mat, &v);
            for i in 0..d {
                out[i][m] = w[i];
            }
        }
        FourierSeries::from_samples(&out, self.period())
    }

    /// Pointwise M(θ)u(θ).
    pub fn apply(&self, u: &FourierSeries) -> Result<FourierSeries> {
        self.pointwise(u, |m, v| m * v)
    }

    /// Pointwise M(θ)ᵀu(θ).
    pub fn apply_transpose(&self, u: &FourierSeries) -> Result<FourierSeries> {
        self.pointwise(u, |m, v| m.transpose() * v)
    }

    /// Brings a period-1 series onto the frame grid.
    pub fn to_frame_grid(&self, s: &FourierSeries) -> Result<FourierSeries> {
        if s.period() == self.period() {
            return Ok(s.clone());
        }
        s.lifted_to_period_two()
    }

    /// Index pairs (j, j+1) coupled by a real 2×2 block.
    pub fn real_blocks(&self) -> Vec<usize> {
        if self.representation == Representation::Complex {
            return Vec::new();
        }
        (0..self.dim())
            .filter(|&j| self.classes[j] == FloquetClass::ComplexPairLead)
            .collect()
    }

    /// Max over columns with f(θ+1) = −f(θ) expected of the antiperiodicity
    /// defect; None when the frame has period 1.
    pub fn antiperiodicity_defect(&self, j: usize) -> Option<f64> {
        if self.period() != 2.0 {
            return None;
        }
        let s = self.columns[j].samples();
        let n = self.len() / 2;
        let mut worst: f64 = 0.0;
        for row in &s {
            for m in 0..n {
                worst = worst.max((row[m + n] + row[m]).norm());
            }
        }
        Some(worst)
    }

    /// Solves the constant-coefficient system obtained after the change of
    /// frame:
    ///
    /// * bundle frame: (1/T)u′ + shift·u − Λ̃u = rhs;
    /// * adjoint frame: (1/T)u′ + shift·u + Λ̃ᵀu = rhs (the generator is
    ///   already stored transposed there).
    ///
    /// Diagonal entries go through [`solve_diagonal`], real pairs through
    /// [`block_solve_2x2`]. Returns the solution, the free-mode residual and
    /// the smallest divisor.
    pub fn solve_reduced(
        &self,
        rhs: &FourierSeries,
        shift: f64,
        free: Option<usize>,
        tol: f64,
        order: usize,
    ) -> Result<(FourierSeries, Option<Complex64>, f64)> {
        let d = self.dim();
        let sign = match self.kind {
            FrameKind::Bundle => -1.0,
            FrameKind::Adjoint => 1.0,
        };
        let shifts: Vec<Complex64> = (0..d)
            .map(|j| Complex64::new(shift, 0.0) + self.generator[(j, j)] * sign)
            .collect();
        let diag = solve_diagonal(rhs, self.period_t, &shifts, free, tol, order)?;
        let mut solution = diag.solution;
        let mut min_div = diag.min_divisor;
        for j in self.real_blocks() {
            if free == Some(j) || free == Some(j + 1) {
                return Err(Error::InvalidInput("free mode inside a real block".into()));
            }
            let alpha = self.generator[(j, j)].re * sign;
            // Bundle: −Λ̃ has (j+1, j) entry +β; adjoint: Λ̃ᵀ stores +β there.
            let beta = self.generator[(j + 1, j)].re * sign;
            let (ua, ub, m) = block_solve_2x2(
                &rhs.component(j),
                &rhs.component(j + 1),
                alpha,
                beta,
                Complex64::new(shift, 0.0),
                self.period_t,
                tol,
            )
            .map_err(|e| match e {
                Error::SmallDivisor { k, magnitude, .. } => Error::SmallDivisor {
                    k,
                    component: j,
                    order,
                    magnitude,
                },
                e => e,
            })?;
            solution
                .coefficients_mut(j)
                .copy_from_slice(ua.coefficients(0));
            solution
                .coefficients_mut(j + 1)
                .copy_from_slice(ub.coefficients(0));
            min_div = min_div.min(m);
        }
        Ok((solution, diag.free_residual, min_div))
    }
}

fn series_from_vectors(values: &[DVector<Complex64>], period: f64) -> Result<FourierSeries> {
    let d = values[0].len();
    let rows: Vec<Vec<Complex64>> = (0..d)
        .map(|i| values.iter().map(|v| v[i]).collect())
        .collect();
    FourierSeries::from_samples(&rows, period)
}

/// Keeps real parts; returns the series and the largest dropped imaginary part.
fn real_part(s: &FourierSeries) -> Result<(FourierSeries, f64)> {
    let samples = s.samples();
    let mut worst: f64 = 0.0;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| {
                    worst = worst.max(c.im.abs());
                    c.re
                })
                .collect()
        })
        .collect();
    Ok((FourierSeries::from_real_samples(&rows, s.period())?, worst))
}

fn imag_part(s: &FourierSeries) -> Result<FourierSeries> {
    let rows: Vec<Vec<f64>> = s
        .samples()
        .iter()
        .map(|r| r.iter().map(|c| c.im).collect())
        .collect();
    FourierSeries::from_real_samples(&rows, s.period())
}

/// Pointwise multiplication by e^{iπθ·sign} on a period-2 grid.
fn rotate_half_turn(s: &FourierSeries, sign: f64) -> Result<FourierSeries> {
    let theta = grid_points(s.len(), s.period());
    let rows: Vec<Vec<Complex64>> = s
        .samples()
        .iter()
        .map(|r| {
            r.iter()
                .zip(&theta)
                .map(|(c, th)| c * Complex64::from_polar(1.0, sign * PI * th))
                .collect()
        })
        .collect();
    FourierSeries::from_samples(&rows, s.period())
}

fn grid_matrices(columns: &[FourierSeries]) -> Vec<DMatrix<Complex64>> {
    let d = columns.len();
    let len = columns[0].len();
    let samples: Vec<Vec<Vec<Complex64>>> = columns.iter().map(|c| c.samples()).collect();
    (0..len)
        .map(|m| DMatrix::from_fn(d, d, |i, j| samples[j][i][m]))
        .collect()
}

fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    }
}

/// e^z − 1 without cancellation for small |z|.
fn exp_m1(z: Complex64) -> Complex64 {
    let s = (0.5 * z.im).sin();
    Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * s * s,
        z.re.exp() * z.im.sin(),
    )
}

/// K_0′ = T·X(K_0) evaluated pointwise. Equal to the spectral derivative of
/// the cycle up to the cycle residual, but free of the differentiated
/// rounding noise of the samples, which the inverse transpose would
/// otherwise spread into every adjoint column.
pub fn cycle_velocity(model: &dyn VectorField, cycle: &Cycle) -> Result<FourierSeries> {
    let g = cycle.samples.real_samples();
    let n = cycle.samples.len();
    let mut rows = vec![vec![0.0; n]; g.len()];
    for m in 0..n {
        let x: Vec<f64> = g.iter().map(|r| r[m]).collect();
        for (i, v) in eval_field(model, &x).into_iter().enumerate() {
            rows[i][m] = cycle.period * v;
        }
    }
    FourierSeries::from_real_samples(&rows, 1.0)
}

/// Upper bound on the pointwise frame condition number.
pub const MAX_FRAME_CONDITION: f64 = 1e12;

/// Builds 𝒬(θ) from the Floquet analysis.
///
/// `scales` gives b_j for the nontrivial directions 1..d−1; an empty slice,
/// or a non-positive entry, selects the default b_j = 1/max_θ‖K_{e_j}(θ)‖.
/// Complex pairs share the lead's scale.
pub fn build_bundle_frame(
    model: &dyn VectorField,
    cycle: &Cycle,
    analysis: &FloquetAnalysis,
    representation: Representation,
    scales: &[f64],
) -> Result<Frame> {
    let spec = &analysis.spectrum;
    let d = spec.dim();
    if !scales.is_empty() && scales.len() != d - 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} bundle scales, got {}",
            d - 1,
            scales.len()
        )));
    }
    let mut complex_columns = vec![cycle_velocity(model, cycle)?];
    let mut bs = vec![1.0];
    for j in 1..d {
        let raw = series_from_vectors(&analysis.bundle_samples[j], 1.0)?;
        let b = if spec.classes[j] == FloquetClass::ComplexPairConjugate {
            bs[j - 1]
        } else {
            match scales.get(j - 1) {
                Some(&b) if b > 0.0 => b,
                _ => 1.0 / raw.grid_max_norm(),
            }
        };
        complex_columns.push(raw.scale(Complex64::new(b, 0.0)));
        bs.push(b);
    }

    let (columns, generator, imaginary_defect) = match representation {
        Representation::Complex => {
            let g = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    spec.exponents[j]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            (complex_columns.clone(), g, 0.0)
        }
        Representation::Real => {
            let lift = spec.has_real_negative();
            let mut cols = Vec::with_capacity(d);
            let mut g = DMatrix::zeros(d, d);
            let mut defect: f64 = 0.0;
            let on_grid = |s: &FourierSeries| -> Result<FourierSeries> {
                if lift {
                    s.lifted_to_period_two()
                } else {
                    Ok(s.clone())
                }
            };
            let mut j = 0;
            while j < d {
                let lam = spec.exponents[j];
                match spec.classes[j] {
                    FloquetClass::Trivial | FloquetClass::RealPositive => {
                        let (re, im) = real_part(&complex_columns[j])?;
                        defect = defect.max(im);
                        cols.push(on_grid(&re)?);
                        g[(j, j)] = Complex64::new(lam.re, 0.0);
                        j += 1;
                    }
                    FloquetClass::RealNegative => {
                        let lifted = complex_columns[j].lifted_to_period_two()?;
                        let (re, im) = real_part(&rotate_half_turn(&lifted, 1.0)?)?;
                        defect = defect.max(im);
                        cols.push(re);
                        g[(j, j)] = Complex64::new(lam.re, 0.0);
                        j += 1;
                    }
                    FloquetClass::ComplexPairLead => {
                        let c = &complex_columns[j];
                        let (re, _) = real_part(c)?;
                        cols.push(on_grid(&re)?);
                        cols.push(on_grid(&imag_part(c)?)?);
                        let (alpha, beta) = (lam.re, lam.im);
                        g[(j, j)] = Complex64::new(alpha, 0.0);
                        g[(j, j + 1)] = Complex64::new(beta, 0.0);
                        g[(j + 1, j)] = Complex64::new(-beta, 0.0);
                        g[(j + 1, j + 1)] = Complex64::new(alpha, 0.0);
                        j += 2;
                    }
                    FloquetClass::ComplexPairConjugate => {
                        return Err(Error::Eigen(format!(
                            "conjugate direction {j} without its lead"
                        )));
                    }
                }
            }
            (cols, g, defect)
        }
    };

    let grid = grid_matrices(&columns);
    let mut condition: f64 = 0.0;
    for (m, mat) in grid.iter().enumerate() {
        let c = condition_number(mat);
        if !(c <= MAX_FRAME_CONDITION) {
            return Err(Error::SingularFrame {
                index: m,
                condition: c,
            });
        }
        condition = condition.max(c);
    }
    Ok(Frame {
        kind: FrameKind::Bundle,
        representation,
        classes: spec.classes.clone(),
        period_t: spec.period,
        columns,
        generator,
        scales: bs,
        complex_columns,
        condition,
        imaginary_defect,
        grid,
    })
}

/// Q(θ) = 𝒬(θ)^{−T} by pointwise solves.
pub fn build_adjoint_frame(bundle: &Frame) -> Result<Frame> {
    if bundle.kind != FrameKind::Bundle {
        return Err(Error::InvalidInput(
            "adjoint frame needs a bundle frame".into(),
        ));
    }
    let d = bundle.dim();
    let mut grid = Vec::with_capacity(bundle.len());
    for (m, mat) in bundle.grid.iter().enumerate() {
        let inv = mat.clone().lu().try_inverse().ok_or(Error::SingularFrame {
            index: m,
            condition: f64::INFINITY,
        })?;
        grid.push(inv.transpose());
    }
    let period = bundle.period();
    let columns = (0..d)
        .map(|j| {
            let rows: Vec<Vec<Complex64>> = (0..d)
                .map(|i| grid.iter().map(|q| q[(i, j)]).collect())
                .collect();
            FourierSeries::from_samples(&rows, period)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Frame {
        kind: FrameKind::Adjoint,
        representation: bundle.representation,
        classes: bundle.classes.clone(),
        period_t: bundle.period_t,
        columns,
        generator: bundle.generator.transpose(),
        scales: bundle.scales.clone(),
        complex_columns: Vec::new(),
        condition: bundle.condition,
        imaginary_defect: bundle.imaginary_defect,
        grid,
    })
}

/// Grid-max residuals of the frame equation, absolute and relative to the
/// column size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResidual {
    pub absolute: f64,
    /// Per column, the residual over the grid-max of its largest term,
    /// ‖(1/T)q′‖ or ‖DX q‖; maximized over columns.
    pub relative: f64,
    pub per_column: Vec<f64>,
}

/// Checks (1/T)𝒬′ − DX𝒬 + 𝒬Λ̃ = 0 for a bundle frame and
/// (1/T)Q′ + DXᵀQ − QΛ̃ᵀ = 0 for an adjoint frame, spectrally.
pub fn frame_residual(
    model: &dyn VectorField,
    cycle: &Cycle,
    frame: &Frame,
) -> Result<FrameResidual> {
    let d = frame.dim();
    let t = frame.period_t;
    let k0 = frame.to_frame_grid(&cycle.samples)?.real_samples();
    let derivs: Vec<Vec<Vec<Complex64>>> = frame
        .columns
        .iter()
        .map(|c| c.differentiate().samples())
        .collect();
    let mut per_column = vec![0.0_f64; d];
    let mut size = vec![0.0_f64; d];
    for m in 0..frame.len() {
        let x: Vec<f64> = (0..d).map(|i| k0[i][m]).collect();
        let jac = eval_jacobian(model, &x);
        let jm = DMatrix::from_fn(d, d, |i, j| Complex64::new(jac[i * d + j], 0.0));
        let q = &frame.grid[m];
        let dq = DMatrix::from_fn(d, d, |i, j| derivs[j][i][m] / t);
        let jq = match frame.kind {
            FrameKind::Bundle => &jm * q,
            FrameKind::Adjoint => jm.transpose() * q,
        };
        let r = match frame.kind {
            FrameKind::Bundle => &dq - &jq + q * &frame.generator,
            FrameKind::Adjoint => &dq + &jq - q * &frame.generator,
        };
        for j in 0..d {
            per_column[j] = per_column[j].max(r.column(j).norm());
            size[j] = size[j].max(dq.column(j).norm()).max(jq.column(j).norm());
        }
    }
    let absolute = per_column.iter().copied().fold(0.0, f64::max);
    let relative = per_column
        .iter()
        .zip(&size)
        .map(|(r, s)| r / s.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(FrameResidual {
        absolute,
        relative,
        per_column,
    })
}

/// max_θ ‖Q(θ)ᵀ𝒬(θ) − Id‖_max.
pub fn biorthogonality_defect(bundle: &Frame, adjoint: &Frame) -> Result<f64> {
    if bundle.len() != adjoint.len() || bundle.dim() != adjoint.dim() {
        return Err(Error::InvalidInput("frames live on different grids".into()));
    }
    let d = bundle.dim();
    let mut worst: f64 = 0.0;
    for (b, a) in bundle.grid.iter().zip(&adjoint.grid) {
        let p = a.transpose() * b - DMatrix::<Complex64>::identity(d, d);
        worst = worst.max(p.iter().fold(0.0, |m, c| m.max(c.norm())));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointCrossCheck {
    /// Eigenvalues of the adjoint monodromy found near e^{−λ_j T}.
    pub adjoint_multipliers: Vec<Complex64>,
    /// |ρ_j / e^{−λ_j T} − 1| per direction.
    pub eigenvalue_mismatch: Vec<f64>,
    /// Grid-max difference between the reconstructed and the algebraic
    /// adjoint columns, relative to the column's grid-max.
    pub column_discrepancy: Vec<f64>,
    /// Largest relative variation of ⟨ŷ_j(θ), K_j(θ)⟩ over θ before
    /// normalization; zero for an exact adjoint solution.
    pub pairing_spread: f64,
    /// max over θ and i, j of |⟨ŷ_i(θ), K_j(θ)⟩ − δ_ij| with ŷ the
    /// reconstructed adjoint solutions and K the complex bundle columns: the
    /// duality Ψ(t)ᵀΦ(t) = Id in Floquet coordinates, pointwise along the cycle.
    pub frame_duality: f64,
    /// max over segments of ‖Ψ_segᵀ Φ_seg − Id‖ for two-point fundamental
    /// matrices over each of the cyclic segments.
    pub segment_duality: f64,
    /// max over segment boundaries t_i of ‖Ψ(t_i)ᵀΦ(t_i) − Id‖ with both
    /// started at 0. Dominated by rounding once the spectrum is stiff.
    pub cumulative_duality: f64,
}

/// Rebuilds every adjoint column from the adjoint fundamental solution and
/// compares it against the inverse-transpose frame.
pub fn cross_check_adjoint_frame(
    model: &dyn VectorField,
    cycle: &Cycle,
    analysis: &FloquetAnalysis,
    bundle: &Frame,
    adjoint: &Frame,
    segments: usize,
    integ: &IntegratorSettings,
) -> Result<AdjointCrossCheck> {
    let spec = &analysis.spectrum;
    let d = spec.dim();
    let t = spec.period;
    let n = cycle.grid_len();
    let interp = cycle.interpolant()?;
    let psi = adjoint_transfers(model, &interp, n, integ)?;
    let product = PeriodicProduct::new(&psi, segments, t)?;

    let mut adjoint_multipliers = Vec::with_capacity(d);
    let mut eigenvalue_mismatch = Vec::with_capacity(d);
    let mut complex_adjoint: Vec<FourierSeries> = Vec::with_capacity(d);
    let mut pairing_spread: f64 = 0.0;
    for j in 0..d {
        let lam = spec.exponents[j];
        let (rate, values) = if spec.classes[j] == FloquetClass::ComplexPairConjugate {
            let lead = complex_adjoint[j - 1].samples();
            let conj: Vec<Vec<Complex64>> = lead
                .iter()
                .map(|r| r.iter().map(|c| c.conj()).collect())
                .collect();
            let rate: Complex64 = (adjoint_multipliers[j - 1] as Complex64).ln().conj() / t;
            (rate, FourierSeries::from_samples(&conj, 1.0)?)
        } else {
            let pair = product.eigenpair(-lam)?;
            let mismatch = ((pair.rate + lam) * t).norm();
            if mismatch > 1e-3 {
                return Err(Error::Eigen(format!(
                    "no adjoint multiplier near e^(-λ_{j} T) (off by {mismatch:e})"
                )));
            }
            let grid = transport_on_grid(&psi, &pair, t);
            (pair.rate, series_from_vectors(&grid, 1.0)?)
        };
        let rho = (rate * t).exp();
        adjoint_multipliers.push(rho);
        eigenvalue_mismatch.push(exp_m1((rate + lam) * t).norm());

        // Gauge: ⟨ŷ_j, b_j K_{e_j}⟩ = 1, constant in θ for an exact solution.
        let y = values.samples();
        let k = bundle.complex_columns[j].samples();
        let pairing: Vec<Complex64> = (0..n)
            .map(|m| (0..d).map(|i| y[i][m] * k[i][m]).sum())
            .collect();
        let mean: Complex64 = pairing.iter().sum::<Complex64>() / n as f64;
        let spread = pairing
            .iter()
            .map(|p| (p - mean).norm())
            .fold(0.0, f64::max)
            / mean.norm();
        pairing_spread = pairing_spread.max(spread);
        complex_adjoint.push(values.scale(mean.inv()));
    }

    let mut frame_duality: f64 = 0.0;
    let ys: Vec<Vec<Vec<Complex64>>> = complex_adjoint.iter().map(|c| c.samples()).collect();
    let ks: Vec<Vec<Vec<Complex64>>> = bundle.complex_columns.iter().map(|c| c.samples()).collect();
    for (i, y) in ys.iter().enumerate() {
        for (j, k) in ks.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            for m in 0..n {
                let p: Complex64 = (0..d).map(|c| y[c][m] * k[c][m]).sum();
                frame_duality = frame_duality.max((p - target).norm());
            }
        }
    }

    // Express in the frame's representation.
    let expected: Vec<FourierSeries> = match adjoint.representation {
        Representation::Complex => complex_adjoint,
        Representation::Real => {
            let lift = |s: &FourierSeries| -> Result<FourierSeries> { adjoint.to_frame_grid(s) };
            let mut out = Vec::with_capacity(d);
            let mut j = 0;
            while j < d {
                match spec.classes[j] {
                    FloquetClass::Trivial | FloquetClass::RealPositive => {
                        out.push(lift(&real_part(&complex_adjoint[j])?.0)?);
                        j += 1;
                    }
                    FloquetClass::RealNegative => {
                        let l = complex_adjoint[j].lifted_to_period_two()?;
                        out.push(real_part(&rotate_half_turn(&l, -1.0)?)?.0);
                        j += 1;
                    }
                    _ => {
                        let c = &complex_adjoint[j];
                        out.push(lift(&real_part(c)?.0.scale(Complex64::new(2.0, 0.0)))?);
                        out.push(lift(&imag_part(c)?.scale(Complex64::new(-2.0, 0.0)))?);
                        j += 2;
                    }
                }
            }
            out
        }
    };
    let column_discrepancy = expected
        .iter()
        .zip(&adjoint.columns)
        .map(|(e, q)| Ok(e.sub(q)?.grid_max_abs() / q.grid_max_abs()))
        .collect::<Result<Vec<f64>>>()?;

    // Duality of forward and adjoint fundamental matrices.
    let phi = &analysis.transfers.transfers;
    let per = n / segments;
    let ident = DMatrix::<f64>::identity(d, d);
    let mut segment_duality: f64 = 0.0;
    let mut cumulative_duality: f64 = 0.0;
    let mut phi_acc = ident.clone();
    let mut psi_acc = ident.clone();
    for s in 0..segments {
        let mut phi_seg = ident.clone();
        let mut psi_seg = ident.clone();
        for m in s * per..(s + 1) * per {
            phi_seg = &phi[m] * phi_seg;
            psi_seg = &psi[m] * psi_seg;
        }
        let e = psi_seg.transpose() * &phi_seg - &ident;
        segment_duality = segment_duality.max(e.amax());
        phi_acc = phi_seg * phi_acc;
        psi_acc = psi_seg * psi_acc;
        let e = psi_acc.transpose() * &phi_acc - &ident;
        cumulative_duality = cumulative_duality.max(e.amax());
    }

    Ok(AdjointCrossCheck {
        adjoint_multipliers,
        eigenvalue_mismatch,
        column_discrepancy,
        pairing_spread,
        frame_duality,
        segment_duality,
        cumulative_duality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{find_cycle, floquet_spectrum, CycleSettings, FloquetSettings};
    use crate::model::make_oracle_model;

    fn oracle_frames(rep: Representation) -> (Cycle, FloquetAnalysis, Frame, Frame) {
        let m = make_oracle_model();
        let integ = IntegratorSettings::default();
        let c = find_cycle(
            &m,
            &CycleSettings {
                guess: vec![1.0, 0.0],
                relax_time: 0.0,
                grid_n: 64,
                ..Default::default()
            },
            &integ,
        )
        .unwrap();
        let fa = floquet_spectrum(
            &m,
            &c,
            &FloquetSettings {
                segments: 8,
                ..Default::default()
            },
            &integ,
        )
        .unwrap();
        let b = build_bundle_frame(&m, &c, &fa, rep, &[]).unwrap();
        let a = build_adjoint_frame(&b).unwrap();
        (c, fa, b, a)
    }

    #[test]
    fn oracle_phase_response_curve() {
        let (_, _, _, a) = oracle_frames(Representation::Complex);
        let z = a.columns[0].real_samples();
        for (m, th) in grid_points(64, 1.0).iter().enumerate() {
            let w = 2.0 * PI * th;
            assert!((z[0][m] + w.sin() / (2.0 * PI)).abs() < 1e-9);
            assert!((z[1][m] - w.cos() / (2.0 * PI)).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_radial_bundle() {
        let (_, _, b, _) = oracle_frames(Representation::Real);
        let k = b.columns[1].real_samples();
        for (m, th) in grid_points(64, 1.0).iter().enumerate() {
            let w = 2.0 * PI * th;
            assert!((k[0][m] - w.cos()).abs() < 1e-9);
            assert!((k[1][m] - w.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_frame_equations_and_duality() {
        let m = make_oracle_model();
        let (c, fa, b, a) = oracle_frames(Representation::Complex);
        assert!(frame_residual(&m, &c, &b).unwrap().relative < 1e-9);
        assert!(frame_residual(&m, &c, &a).unwrap().relative < 1e-9);
        assert!(biorthogonality_defect(&b, &a).unwrap() < 1e-12);
        let x = cross_check_adjoint_frame(&m, &c, &fa, &b, &a, 8, &IntegratorSettings::default())
            .unwrap();
        assert!(
            x.eigenvalue_mismatch.iter().all(|e| *e < 1e-8),
            "{:?}",
            x.eigenvalue_mismatch
        );
        assert!(
            x.column_discrepancy.iter().all(|e| *e < 1e-8),
            "{:?}",
            x.column_discrepancy
        );
        assert!(x.cumulative_duality < 1e-8);
    }

    #[test]
    fn reduced_solve_inverts_the_operator() {
        let (_, _, b, _) = oracle_frames(Representation::Complex);
        let rhs = FourierSeries::from_real_samples(
            &[
                grid_points(64, 1.0)
                    .iter()
                    .map(|t| (2.0 * PI * t).cos() + 0.3)
                    .collect(),
                grid_points(64, 1.0)
                    .iter()
                    .map(|t| (4.0 * PI * t).sin())
                    .collect(),
            ],
            1.0,
        )
        .unwrap();
        let (u, _, _) = b.solve_reduced(&rhs, -4.0, None, 1e-8, 2).unwrap();
        // (1/T)u' + (−4 − λ_j)u = rhs
        let du = u.differentiate();
        for j in 0..2 {
            let lam = b.generator[(j, j)];
            for k in -5..5 {
                let lhs = du.coefficient(j, k) / b.period_t
                    + u.coefficient(j, k) * (Complex64::new(-4.0, 0.0) - lam);
                assert!((lhs - rhs.coefficient(j, k)).norm() < 1e-12);
            }
        }
    }
}
