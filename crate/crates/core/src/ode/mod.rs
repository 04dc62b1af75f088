//! Adaptive explicit integration of the model, its variational system and
//! the adjoint system along a cycle.
//!
//! The integrator is the Dormand-Prince 8(5,3) embedded pair with a PI step
//! controller and optional 7th-order dense output.

mod tableau;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VectorField;
use crate::series::FourierSeries;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const PI_BETA: f64 = 0.04;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub dense_output: bool,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-13,
            max_steps: 1_000_000,
            dense_output: false,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_steps < 1 {
            return Err(Error::InvalidInput("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_dense_output(&self) -> Self {
        Self {
            dense_output: true,
            ..self.clone()
        }
    }
}

/// A first-order system y' = f(t, y).
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Clone, Debug)]
struct DenseStep {
    t_old: f64,
    h: f64,
    y_old: Vec<f64>,
    f: [Vec<f64>; 7],
}

impl DenseStep {
    fn eval(&self, t: f64) -> Vec<f64> {
        let x = (t - self.t_old) / self.h;
        let n = self.y_old.len();
        let mut y = vec![0.0; n];
        for (i, f) in self.f.iter().rev().enumerate() {
            let w = if i % 2 == 0 { x } else { 1.0 - x };
            for k in 0..n {
                y[k] = (y[k] + f[k]) * w;
            }
        }
        for k in 0..n {
            y[k] += self.y_old[k];
        }
        y
    }
}

/// Continuous extension over an integration run.
#[derive(Clone, Debug, Default)]
pub struct DenseOutput {
    steps: Vec<DenseStep>,
}

impl DenseOutput {
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.steps.first()?;
        let last = self.steps.last()?;
        Some((first.t_old, last.t_old + last.h))
    }

    /// Step boundaries (t_old of each step plus the final time).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.steps.iter().map(|s| s.t_old).collect();
        if let Some(l) = self.steps.last() {
            v.push(l.t_old + l.h);
        }
        v
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (a, b) = self
            .span()
            .ok_or_else(|| Error::InvalidInput("empty dense output".into()))?;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if t < lo - 1e-12 * (1.0 + lo.abs()) || t > hi + 1e-12 * (1.0 + hi.abs()) {
            return Err(Error::OutsideSpan { t, span: hi });
        }
        let forward = b >= a;
        let idx = self
            .steps
            .partition_point(|s| {
                if forward {
                    s.t_old + s.h < t
                } else {
                    s.t_old + s.h > t
                }
            })
            .min(self.steps.len() - 1);
        Ok(self.steps[idx].eval(t))
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub dense: Option<DenseOutput>,
}

fn error_scale(y: &[f64], y_new: &[f64], s: &IntegratorSettings) -> Vec<f64> {
    y.iter()
        .zip(y_new)
        .map(|(a, b)| s.atol + s.rtol * a.abs().max(b.abs()))
        .collect()
}

fn rms(v: &[f64], scale: &[f64]) -> f64 {
    (v.iter()
        .zip(scale)
        .map(|(a, s)| (a / s).powi(2))
        .sum::<f64>()
        / v.len() as f64)
        .sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    s: &IntegratorSettings,
) -> f64 {
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|v| s.atol + s.rtol * v.abs()).collect();
    let d0 = rms(y0, &scale);
    let d1 = rms(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = rms(&diff, &scale) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1)
}

/// Integrates `sys` from (t0, y0) to t1.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    use tableau::{A, B, C, E3, E5};
    settings.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial state has length {} but system dimension is {n}",
            y0.len()
        )));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidInput("non-finite integration bounds".into()));
    }
    let mut dense = settings.dense_output.then(DenseOutput::default);
    if t1 == t0 {
        return Ok(Trajectory {
            t: t0,
            y: y0.to_vec(),
            accepted_steps: 0,
            rejected_steps: 0,
            dense,
        });
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n];
    sys.rhs(t, &y, &mut f);
    let mut h_abs = initial_step(sys, t0, &y, &f, dir, settings);
    let mut err_old: f64 = 1e-4;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 16];
    let mut ytmp = vec![0.0; n];
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let expo = 1.0 / 8.0 - 0.75 * PI_BETA;

    while dir * (t1 - t) > 0.0 {
        if accepted + rejected >= settings.max_steps {
            return Err(Error::StepLimit {
                t,
                max_steps: settings.max_steps,
            });
        }
        let min_step = 10.0 * (t.abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
        if h_abs < min_step {
            return Err(Error::StepUnderflow { t });
        }
        let mut t_new = t + dir * h_abs;
        if dir * (t_new - t1) > 0.0 {
            t_new = t1;
        }
        let h = t_new - t;

        k[0].copy_from_slice(&f);
        for s in 1..12 {
            let (done, rest) = k.split_at_mut(s);
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in done.iter().enumerate() {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            sys.rhs(t + C[s] * h, &ytmp, &mut rest[0]);
        }
        let mut y_new = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(12) {
                acc += B[j] * kj[i];
            }
            y_new[i] = y[i] + h * acc;
        }
        let mut f_new = vec![0.0; n];
        sys.rhs(t_new, &y_new, &mut f_new);
        k[12].copy_from_slice(&f_new);

        if y_new.iter().chain(&f_new).any(|v| !v.is_finite()) {
            // Shrink and retry; a persistent blow-up ends in underflow or the
            // explicit non-finite report below.
            if h_abs <= 1e3 * min_step {
                return Err(Error::NonFinite { t });
            }
            h_abs *= MIN_FACTOR;
            rejected += 1;
            continue;
        }

        let scale = error_scale(&y, &y_new, settings);
        let mut e5 = 0.0;
        let mut e3 = 0.0;
        for i in 0..n {
            let mut a5 = 0.0;
            let mut a3 = 0.0;
            for j in 0..13 {
                a5 += E5[j] * k[j][i];
                a3 += E3[j] * k[j][i];
            }
            e5 += (a5 / scale[i]).powi(2);
            e3 += (a3 / scale[i]).powi(2);
        }
        let err = if e5 == 0.0 && e3 == 0.0 {
            0.0
        } else {
            h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
        };

        if err <= 1.0 {
            if let Some(dense) = dense.as_mut() {
                dense
                    .steps
                    .push(dense_step(sys, t, h, &y, &y_new, &f_new, &mut k)?);
            }
            t = t_new;
            y = y_new;
            f = f_new;
            accepted += 1;
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-expo) * err_old.powf(PI_BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            err_old = err.max(1e-4);
            h_abs *= factor;
        } else {
            rejected += 1;
            h_abs *= (SAFETY * err.powf(-1.0 / 8.0)).max(MIN_FACTOR);
        }
    }
    Ok(Trajectory {
        t,
        y,
        accepted_steps: accepted,
        rejected_steps: rejected,
        dense,
    })
}

fn dense_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    h: f64,
    y_old: &[f64],
    y_new: &[f64],
    f_new: &[f64],
    k: &mut [Vec<f64>],
) -> Result<DenseStep> {
    use tableau::{A, C, D};
    let n = y_old.len();
    let mut ytmp = vec![0.0; n];
    for s in 13..16 {
        let (done, rest) = k.split_at_mut(s);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in done.iter().enumerate() {
                acc += A[s][j] * kj[i];
            }
            ytmp[i] = y_old[i] + h * acc;
        }
        sys.rhs(t + C[s] * h, &ytmp, &mut rest[0]);
    }
    let dy: Vec<f64> = (0..n).map(|i| y_new[i] - y_old[i]).collect();
    let f_old = &k[0];
    let mut f: [Vec<f64>; 7] = Default::default();
    f[0] = dy.clone();
    f[1] = (0..n).map(|i| h * f_old[i] - dy[i]).collect();
    f[2] = (0..n)
        .map(|i| 2.0 * dy[i] - h * (f_new[i] + f_old[i]))
        .collect();
    for r in 0..4 {
        f[3 + r] = (0..n)
            .map(|i| h * (0..16).map(|j| D[r][j] * k[j][i]).sum::<f64>())
            .collect();
    }
    Ok(DenseStep {
        t_old: t,
        h,
        y_old: y_old.to_vec(),
        f,
    })
}

struct FieldSystem<'a>(&'a dyn VectorField);

impl OdeSystem for FieldSystem<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.0.eval(y, dy);
    }
}

/// State, fundamental matrix and ∫ trace DX, packed as d + d² + 1 unknowns.
struct VariationalSystem<'a> {
    model: &'a dyn VectorField,
}

impl OdeSystem for VariationalSystem<'_> {
    fn dim(&self) -> usize {
        let d = self.model.dim();
        d + d * d + 1
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.model.dim();
        let x = &y[..d];
        self.model.eval(x, &mut dy[..d]);
        let mut jac = vec![0.0; d * d];
        self.model.jacobian(x, &mut jac);
        let phi = &y[d..d + d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += jac[i * d + k] * phi[k * d + j];
                }
                dy[d + i * d + j] = acc;
            }
        }
        dy[d + d * d] = (0..d).map(|i| jac[i * d + i]).sum();
    }
}

/// φ_t(x0).
pub fn flow(
    model: &dyn VectorField,
    x0: &[f64],
    t: f64,
    settings: &IntegratorSettings,
) -> Result<Vec<f64>> {
    Ok(integrate(&FieldSystem(model), 0.0, x0, t, settings)?.y)
}

/// φ_t(x0) with a continuous extension.
pub fn flow_dense(
    model: &dyn VectorField,
    x0: &[f64],
    t: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    integrate(
        &FieldSystem(model),
        0.0,
        x0,
        t,
        &settings.with_dense_output(),
    )
}

#[derive(Clone, Debug)]
pub struct VariationalFlow {
    pub state: Vec<f64>,
    pub phi: DMatrix<f64>,
    /// ∫₀ᵗ trace DX(φ_s(x0)) ds.
    pub trace_integral: f64,
}

/// φ_t(x0) together with Φ(t), Φ' = DX(φ_t(x0))Φ, Φ(0) = Id.
pub fn flow_with_variational(
    model: &dyn VectorField,
    x0: &[f64],
    t: f64,
    settings: &IntegratorSettings,
) -> Result<VariationalFlow> {
    let d = model.dim();
    let mut y0 = vec![0.0; d + d * d + 1];
    y0[..d].copy_from_slice(x0);
    for i in 0..d {
        y0[d + i * d + i] = 1.0;
    }
    let out = integrate(&VariationalSystem { model }, 0.0, &y0, t, settings)?;
    Ok(VariationalFlow {
        state: out.y[..d].to_vec(),
        phi: DMatrix::from_row_slice(d, d, &out.y[d..d + d * d]),
        trace_integral: out.y[d + d * d],
    })
}

/// Two-point fundamental matrices over consecutive subintervals of [0, t].
#[derive(Clone, Debug)]
pub struct GridTransfers {
    /// φ at the subinterval endpoints, `intervals + 1` entries.
    pub states: Vec<Vec<f64>>,
    /// Φ(t_{m+1}, t_m).
    pub transfers: Vec<DMatrix<f64>>,
    pub trace_integral: f64,
}

/// Integrates the variational system from grid point to grid point, resetting
/// the matrix part to the identity at each one while the state continues.
pub fn variational_transfers(
    model: &dyn VectorField,
    x0: &[f64],
    t: f64,
    intervals: usize,
    settings: &IntegratorSettings,
) -> Result<GridTransfers> {
    let d = model.dim();
    let sys = VariationalSystem { model };
    let mut states = Vec::with_capacity(intervals + 1);
    let mut transfers = Vec::with_capacity(intervals);
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    let mut trace = 0.0;
    for m in 0..intervals {
        let ta = t * m as f64 / intervals as f64;
        let tb = t * (m + 1) as f64 / intervals as f64;
        let mut y0 = vec![0.0; d + d * d + 1];
        y0[..d].copy_from_slice(&x);
        for i in 0..d {
            y0[d + i * d + i] = 1.0;
        }
        let out = integrate(&sys, ta, &y0, tb, settings)?;
        x = out.y[..d].to_vec();
        trace += out.y[d + d * d];
        transfers.push(DMatrix::from_row_slice(d, d, &out.y[d..d + d * d]));
        states.push(x.clone());
    }
    Ok(GridTransfers {
        states,
        transfers,
        trace_integral: trace,
    })
}

/// Trigonometric interpolant s ↦ γ(s) of cycle samples, s ∈ [0, span].
#[derive(Clone, Debug)]
pub struct CycleInterpolant {
    period: f64,
    span: f64,
    coeffs: Vec<Vec<Complex64>>,
}

impl CycleInterpolant {
    /// `samples` is a period-1 series in θ = s/T.
    pub fn new(samples: &FourierSeries, period: f64) -> Result<Self> {
        if samples.period() != 1.0 || !(period > 0.0) {
            return Err(Error::InvalidInput(
                "cycle interpolant needs a period-1 series and T > 0".into(),
            ));
        }
        let n = samples.len();
        let mut peak: f64 = 0.0;
        for j in 0..samples.arity() {
            for k in 1..(n / 2) as i64 {
                peak = peak.max(samples.coefficient(j, k).norm());
            }
        }
        let mut active = 1;
        for j in 0..samples.arity() {
            for k in 1..(n / 2) as i64 {
                if samples.coefficient(j, k).norm() > 1e-18 * peak.max(1e-300) {
                    active = active.max(k as usize + 1);
                }
            }
        }
        let coeffs = (0..samples.arity())
            .map(|j| {
                (0..active as i64)
                    .map(|k| samples.coefficient(j, k))
                    .collect()
            })
            .collect();
        Ok(Self {
            period,
            span: period,
            coeffs,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// Allows evaluation over `periods` full turns.
    pub fn with_periods(mut self, periods: f64) -> Self {
        self.span = self.period * periods;
        self
    }

    pub fn at(&self, s: f64) -> Result<Vec<f64>> {
        if s < -1e-12 * self.span || s > self.span * (1.0 + 1e-12) {
            return Err(Error::OutsideSpan {
                t: s,
                span: self.span,
            });
        }
        Ok(self.at_unchecked(s))
    }

    fn at_unchecked(&self, s: f64) -> Vec<f64> {
        let phase = 2.0 * PI * s / self.period;
        let step = Complex64::new(phase.cos(), phase.sin());
        self.coeffs
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                let mut z = Complex64::new(1.0, 0.0);
                for (k, ck) in c.iter().enumerate().skip(1) {
                    z *= step;
                    if k % 64 == 0 {
                        let a = phase * k as f64;
                        z = Complex64::new(a.cos(), a.sin());
                    }
                    acc += 2.0 * (ck * z).re;
                }
                c[0].re + acc
            })
            .collect()
    }
}

struct AdjointSystem<'a> {
    model: &'a dyn VectorField,
    cycle: &'a CycleInterpolant,
}

impl OdeSystem for AdjointSystem<'_> {
    fn dim(&self) -> usize {
        let d = self.model.dim();
        d * d
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.model.dim();
        let x = self.cycle.at_unchecked(t);
        let mut jac = vec![0.0; d * d];
        self.model.jacobian(&x, &mut jac);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += jac[k * d + i] * y[k * d + j];
                }
                dy[i * d + j] = -acc;
            }
        }
    }
}

/// Ψ(t1, t0) for y' = -DXᵀ(γ(s)) y with Ψ(t0, t0) = Id.
pub fn adjoint_transfer(
    model: &dyn VectorField,
    cycle: &CycleInterpolant,
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<DMatrix<f64>> {
    for t in [t0, t1] {
        if t < -1e-12 * cycle.span || t > cycle.span * (1.0 + 1e-12) {
            return Err(Error::OutsideSpan {
                t,
                span: cycle.span,
            });
        }
    }
    let d = model.dim();
    let mut y0 = vec![0.0; d * d];
    for i in 0..d {
        y0[i * d + i] = 1.0;
    }
    let out = integrate(&AdjointSystem { model, cycle }, t0, &y0, t1, settings)?;
    Ok(DMatrix::from_row_slice(d, d, &out.y))
}

/// Ψ(t) from 0.
pub fn adjoint_flow(
    model: &dyn VectorField,
    cycle: &CycleInterpolant,
    t: f64,
    settings: &IntegratorSettings,
) -> Result<DMatrix<f64>> {
    adjoint_transfer(model, cycle, 0.0, t, settings)
}

/// Ψ(t_{m+1}, t_m) over `intervals` equal subintervals of one period.
pub fn adjoint_transfers(
    model: &dyn VectorField,
    cycle: &CycleInterpolant,
    intervals: usize,
    settings: &IntegratorSettings,
) -> Result<Vec<DMatrix<f64>>> {
    let t = cycle.period();
    (0..intervals)
        .map(|m| {
            let ta = t * m as f64 / intervals as f64;
            let tb = t * (m + 1) as f64 / intervals as f64;
            adjoint_transfer(model, cycle, ta, tb, settings)
        })
        .collect()
}
