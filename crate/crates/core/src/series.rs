//! Trigonometric polynomials on a periodic grid and their σ-power series.
//!
//! Coefficients are stored in FFT order (k = 0, 1, .., N/2-1, -N/2, .., -1)
//! with the 1/N normalization applied on analysis, so `coefficient(j, k)` is
//! the plain Fourier coefficient of the sampled function.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "grid size {n} is not a power of two >= 2"
        )));
    }
    Ok(())
}

/// Signed frequency of FFT slot `i` on a grid of `n` points.
pub fn frequency(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Frequency seen by d/dθ in slot `i`: zero for the Nyquist slot, matching
/// [`FourierSeries::differentiate`].
fn derivative_frequency(i: usize, n: usize) -> i64 {
    if i == n / 2 {
        0
    } else {
        frequency(i, n)
    }
}

fn slot(k: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if k >= half || k < -half {
        None
    } else if k >= 0 {
        Some(k as usize)
    } else {
        Some((k + n as i64) as usize)
    }
}

/// Vector-valued trigonometric polynomial with period 1 or 2 in θ.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries {
    period: f64,
    len: usize,
    coeffs: Vec<Vec<Complex64>>,
}

impl FourierSeries {
    pub fn zeros(arity: usize, len: usize, period: f64) -> Result<Self> {
        check_len(len)?;
        check_period(period)?;
        Ok(Self {
            period,
            len,
            coeffs: vec![vec![Complex64::new(0.0, 0.0); len]; arity],
        })
    }

    /// Analysis of complex samples taken at θ_m = m·P/N, one row per component.
    pub fn from_samples(samples: &[Vec<Complex64>], period: f64) -> Result<Self> {
        check_period(period)?;
        let len = samples.first().map(|s| s.len()).unwrap_or(0);
        check_len(len)?;
        let fft = plan(len, false);
        let scale = 1.0 / len as f64;
        let mut coeffs = Vec::with_capacity(samples.len());
        for row in samples {
            if row.len() != len {
                return Err(Error::InvalidInput("ragged sample rows".into()));
            }
            let mut buf = row.clone();
            fft.process(&mut buf);
            for c in buf.iter_mut() {
                *c *= scale;
            }
            coeffs.push(buf);
        }
        Ok(Self {
            period,
            len,
            coeffs,
        })
    }

    pub fn from_real_samples(samples: &[Vec<f64>], period: f64) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = samples
            .iter()
            .map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect();
        Self::from_samples(&rows, period)
    }

    pub fn from_coefficients(coeffs: Vec<Vec<Complex64>>, period: f64) -> Result<Self> {
        check_period(period)?;
        let len = coeffs.first().map(|s| s.len()).unwrap_or(0);
        check_len(len)?;
        if coeffs.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidInput("ragged coefficient rows".into()));
        }
        Ok(Self {
            period,
            len,
            coeffs,
        })
    }

    pub fn arity(&self) -> usize {
        self.coeffs.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Grid abscissae θ_m = m·P/N.
    pub fn grid(&self) -> Vec<f64> {
        grid_points(self.len, self.period)
    }

    pub fn coefficients(&self, component: usize) -> &[Complex64] {
        &self.coeffs[component]
    }

    pub fn coefficients_mut(&mut self, component: usize) -> &mut [Complex64] {
        &mut self.coeffs[component]
    }

    pub fn coefficient(&self, component: usize, k: i64) -> Complex64 {
        match slot(k, self.len) {
            Some(i) => self.coeffs[component][i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set_coefficient(&mut self, component: usize, k: i64, value: Complex64) {
        if let Some(i) = slot(k, self.len) {
            self.coeffs[component][i] = value;
        }
    }

    /// Synthesis back onto the grid.
    pub fn samples(&self) -> Vec<Vec<Complex64>> {
        let fft = plan(self.len, true);
        self.coeffs
            .iter()
            .map(|c| {
                let mut buf = c.clone();
                fft.process(&mut buf);
                buf
            })
            .collect()
    }

    /// Real part of the synthesized grid values.
    pub fn real_samples(&self) -> Vec<Vec<f64>> {
        self.samples()
            .into_iter()
            .map(|r| r.into_iter().map(|c| c.re).collect())
            .collect()
    }

    /// Largest |c_{-k} - conj(c_k)| over components and modes.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.len;
        let mut worst: f64 = 0.0;
        for c in &self.coeffs {
            worst = worst.max(c[0].im.abs()).max(c[n / 2].im.abs());
            for i in 1..n / 2 {
                worst = worst.max((c[n - i] - c[i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.conjugate_asymmetry() <= tol
    }

    /// Projects onto real-valued functions and returns the removed asymmetry.
    pub fn symmetrize_real(&mut self) -> f64 {
        let drift = self.conjugate_asymmetry();
        let n = self.len;
        for c in self.coeffs.iter_mut() {
            c[0].im = 0.0;
            c[n / 2].im = 0.0;
            for i in 1..n / 2 {
                let avg = (c[i] + c[n - i].conj()) * 0.5;
                c[i] = avg;
                c[n - i] = avg.conj();
            }
        }
        drift
    }

    /// Spectral derivative d/dθ; the Nyquist slot is zeroed.
    pub fn differentiate(&self) -> Self {
        let n = self.len;
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            for (i, v) in c.iter_mut().enumerate() {
                if i == n / 2 {
                    *v = Complex64::new(0.0, 0.0);
                } else {
                    let w = 2.0 * PI * frequency(i, n) as f64 / self.period;
                    *v *= Complex64::new(0.0, w);
                }
            }
        }
        out
    }

    /// Point evaluation at arbitrary θ. The Nyquist mode contributes as a cosine.
    pub fn eval(&self, theta: f64) -> Vec<Complex64> {
        let n = self.len;
        let half = n / 2;
        let phase = 2.0 * PI * theta / self.period;
        let step = Complex64::new(phase.cos(), phase.sin());
        let nyq = (half as f64 * phase).cos();
        self.coeffs
            .iter()
            .map(|c| {
                let mut acc = c[0] + c[half] * nyq;
                let mut z = Complex64::new(1.0, 0.0);
                for k in 1..half {
                    z *= step;
                    if k % 64 == 0 {
                        let a = phase * k as f64;
                        z = Complex64::new(a.cos(), a.sin());
                    }
                    acc += c[k] * z + c[n - k] * z.conj();
                }
                acc
            })
            .collect()
    }

    pub fn eval_real(&self, theta: f64) -> Vec<f64> {
        self.eval(theta).into_iter().map(|c| c.re).collect()
    }

    /// Copy with the number of modes changed: zero-padding or truncation.
    pub fn resampled(&self, len: usize) -> Result<Self> {
        check_len(len)?;
        let mut out = Self::zeros(self.arity(), len, self.period)?;
        let keep = (self.len.min(len) / 2) as i64;
        for j in 0..self.arity() {
            for k in -keep + 1..keep {
                out.set_coefficient(j, k, self.coefficient(j, k));
            }
        }
        Ok(out)
    }

    /// Re-expresses a period-1 series as a period-2 series on twice the grid.
    pub fn lifted_to_period_two(&self) -> Result<Self> {
        if self.period == 2.0 {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(self.arity(), 2 * self.len, 2.0)?;
        let half = (self.len / 2) as i64;
        for j in 0..self.arity() {
            for k in -half..half {
                out.set_coefficient(j, 2 * k, self.coefficient(j, k));
            }
        }
        Ok(out)
    }

    /// Inverse of [`lifted_to_period_two`]; returns the dropped odd-mode mass.
    pub fn folded_to_period_one(&self) -> Result<(Self, f64)> {
        if self.period == 1.0 {
            return Ok((self.clone(), 0.0));
        }
        let mut out = Self::zeros(self.arity(), self.len / 2, 1.0)?;
        let half = (self.len / 2) as i64;
        let mut odd: f64 = 0.0;
        for j in 0..self.arity() {
            for k in -half..half {
                let c = self.coefficient(j, k);
                if k % 2 == 0 {
                    out.set_coefficient(j, k / 2, c);
                } else {
                    odd = odd.max(c.norm());
                }
            }
        }
        Ok((out, odd))
    }

    pub fn component(&self, j: usize) -> Self {
        Self {
            period: self.period,
            len: self.len,
            coeffs: vec![self.coeffs[j].clone()],
        }
    }

    pub fn stack(parts: &[FourierSeries]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to stack".into()))?;
        let mut coeffs = Vec::new();
        for p in parts {
            if p.len != first.len || p.period != first.period {
                return Err(Error::InvalidInput("mismatched series in stack".into()));
            }
            coeffs.extend(p.coeffs.iter().cloned());
        }
        Ok(Self {
            period: first.period,
            len: first.len,
            coeffs,
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len != other.len || self.period != other.period || self.arity() != other.arity() {
            return Err(Error::InvalidInput(format!(
                "incompatible series: (N={}, P={}, m={}) vs (N={}, P={}, m={})",
                self.len,
                self.period,
                self.arity(),
                other.len,
                other.period,
                other.arity()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    /// Sum of squared coefficient moduli.
    pub fn coefficient_energy(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    /// Max over the grid of |value| over all components.
    pub fn grid_max_abs(&self) -> f64 {
        self.samples()
            .iter()
            .flatten()
            .fold(0.0_f64, |m, c| m.max(c.norm()))
    }

    /// Max over the grid of the Euclidean norm of the value vector.
    pub fn grid_max_norm(&self) -> f64 {
        let s = self.samples();
        (0..self.len)
            .map(|m| s.iter().map(|r| r[m].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest modulus among the top quarter of frequencies, a resolution gauge.
    pub fn tail_magnitude(&self) -> f64 {
        let n = self.len;
        let mut worst: f64 = 0.0;
        for c in &self.coeffs {
            for (i, v) in c.iter().enumerate() {
                if frequency(i, n).unsigned_abs() as usize >= n / 4 {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst
    }
}

fn check_period(p: f64) -> Result<()> {
    if p == 1.0 || p == 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "period must be 1 or 2, got {p}"
        )))
    }
}

pub fn grid_points(len: usize, period: f64) -> Vec<f64> {
    (0..len).map(|m| m as f64 * period / len as f64).collect()
}

/// Outcome of a componentwise diagonal solve.
#[derive(Clone, Debug)]
pub struct DiagonalSolve {
    pub solution: FourierSeries,
    /// Right-hand side coefficient of the free mode, when one was requested.
    pub free_residual: Option<Complex64>,
    /// Smallest divisor modulus among the non-free modes.
    pub min_divisor: f64,
}

/// Solves (1/T)u' + δ_j u_j = rhs_j componentwise in Fourier space, with u'
/// as in [`FourierSeries::differentiate`].
///
/// `free` marks a component whose k = 0 mode is left at zero; its right-hand
/// coefficient is returned for the caller's solvability test. `order` only
/// labels errors.
pub fn solve_diagonal(
    rhs: &FourierSeries,
    period_t: f64,
    shifts: &[Complex64],
    free: Option<usize>,
    tol: f64,
    order: usize,
) -> Result<DiagonalSolve> {
    if shifts.len() != rhs.arity() {
        return Err(Error::InvalidInput(format!(
            "{} shifts for arity {}",
            shifts.len(),
            rhs.arity()
        )));
    }
    let n = rhs.len;
    let mut out = rhs.clone();
    let mut min_div = f64::INFINITY;
    let mut free_residual = None;
    for (j, row) in out.coeffs.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let k = frequency(i, n);
            if free == Some(j) && k == 0 {
                free_residual = Some(*v);
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            if free == Some(j) && i == n / 2 {
                // Also in the kernel of d/dθ; holds rounding only.
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            let w = 2.0 * PI * derivative_frequency(i, n) as f64 / (rhs.period * period_t);
            let div = Complex64::new(0.0, w) + shifts[j];
            let m = div.norm();
            if m < tol {
                return Err(Error::SmallDivisor {
                    k,
                    component: j,
                    order,
                    magnitude: m,
                });
            }
            min_div = min_div.min(m);
            *v /= div;
        }
    }
    Ok(DiagonalSolve {
        solution: out,
        free_residual,
        min_divisor: min_div,
    })
}

/// Solves (1/T)u' + M u = r for a pair of scalar series, where per mode
/// M = [[ξ+α, -β], [β, ξ+α]] and ξ = 2πik/(PT) + shift.
///
/// Returns the pair and the smallest divisor modulus min |ξ + α ± iβ| encountered.
pub fn block_solve_2x2(
    ra: &FourierSeries,
    rb: &FourierSeries,
    alpha: f64,
    beta: f64,
    shift: Complex64,
    period_t: f64,
    tol: f64,
) -> Result<(FourierSeries, FourierSeries, f64)> {
    ra.check_compatible(rb)?;
    if ra.arity() != 1 {
        return Err(Error::InvalidInput(
            "2x2 block solve expects scalar series".into(),
        ));
    }
    let n = ra.len;
    let mut ua = ra.clone();
    let mut ub = rb.clone();
    let mut min_div = f64::INFINITY;
    for i in 0..n {
        let k = frequency(i, n);
        let w = 2.0 * PI * derivative_frequency(i, n) as f64 / (ra.period * period_t);
        let xi = Complex64::new(0.0, w) + shift;
        let d = xi + alpha;
        let det = d * d + beta * beta;
        // det = (d + iβ)(d − iβ); the factors are the divisors of the
        // underlying complex pair.
        let i_beta = Complex64::new(0.0, beta);
        let m = (d + i_beta).norm().min((d - i_beta).norm());
        if m < tol {
            return Err(Error::SmallDivisor {
                k,
                component: 0,
                order: 0,
                magnitude: m,
            });
        }
        min_div = min_div.min(m);
        let a = ra.coeffs[0][i];
        let b = rb.coeffs[0][i];
        ua.coeffs[0][i] = (d * a + beta * b) / det;
        ub.coeffs[0][i] = (d * b - beta * a) / det;
    }
    Ok((ua, ub, min_div))
}

/// Truncated power series in σ whose coefficients are Fourier series.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTaylor {
    terms: Vec<FourierSeries>,
}

impl FourierTaylor {
    pub fn new(terms: Vec<FourierSeries>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidInput("order-0 coefficient absent".into()))?;
        for t in &terms {
            if t.len() != first.len() || t.period() != first.period() || t.arity() != first.arity()
            {
                return Err(Error::InvalidInput(
                    "orders must share grid size, period and arity".into(),
                ));
            }
        }
        Ok(Self { terms })
    }

    /// Highest order L.
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn arity(&self) -> usize {
        self.terms[0].arity()
    }

    pub fn len(&self) -> usize {
        self.terms[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.terms[0].period()
    }

    pub fn term(&self, n: usize) -> &FourierSeries {
        &self.terms[n]
    }

    pub fn terms(&self) -> &[FourierSeries] {
        &self.terms
    }

    pub fn push(&mut self, term: FourierSeries) -> Result<()> {
        let first = &self.terms[0];
        if term.len() != first.len()
            || term.period() != first.period()
            || term.arity() != first.arity()
        {
            return Err(Error::InvalidInput("incompatible order appended".into()));
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn truncated(&self, order: usize) -> Self {
        Self {
            terms: self.terms[..=order.min(self.order())].to_vec(),
        }
    }

    /// Horner evaluation of Σ K_n(θ) σ^n (real parts).
    pub fn eval(&self, theta: f64, sigma: f64) -> Vec<f64> {
        let values: Vec<Vec<f64>> = self.terms.iter().map(|t| t.eval_real(theta)).collect();
        horner(&values, sigma)
    }

    /// K_n(θ) and K_n′(θ) for every order in one pass over the modes,
    /// as [order][component] real parts.
    pub fn values_and_derivatives(&self, theta: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.len();
        let half = n / 2;
        let period = self.period();
        let phase = 2.0 * PI * theta / period;
        let base = 2.0 * PI / period;
        let powers: Vec<Complex64> = (1..half)
            .map(|k| {
                let a = phase * k as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        let nyq = (half as f64 * phase).cos();
        let mut values = Vec::with_capacity(self.terms.len());
        let mut derivs = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut v = Vec::with_capacity(t.arity());
            let mut dv = Vec::with_capacity(t.arity());
            for j in 0..t.arity() {
                let c = t.coefficients(j);
                let mut acc = c[0] + c[half] * nyq;
                let mut dacc = Complex64::new(0.0, 0.0);
                for (k, z) in (1..half).zip(&powers) {
                    let plus = c[k] * z;
                    let minus = c[n - k] * z.conj();
                    acc += plus + minus;
                    dacc += (plus - minus) * Complex64::new(0.0, base * k as f64);
                }
                v.push(acc.re);
                dv.push(dacc.re);
            }
            values.push(v);
            derivs.push(dv);
        }
        (values, derivs)
    }

    /// Horner evaluation of Σ n K_n(θ) σ^(n-1).
    pub fn eval_sigma_derivative(&self, theta: f64, sigma: f64) -> Vec<f64> {
        let d = self.arity();
        let mut acc = vec![0.0; d];
        for n in (1..self.terms.len()).rev() {
            let v = self.terms[n].eval_real(theta);
            for i in 0..d {
                acc[i] = acc[i] * sigma + n as f64 * v[i];
            }
        }
        acc
    }
}

/// Σ values[n] σ^n by Horner's rule.
pub fn horner(values: &[Vec<f64>], sigma: f64) -> Vec<f64> {
    let d = values[0].len();
    let mut acc = vec![0.0; d];
    for v in values.iter().rev() {
        for i in 0..d {
            acc[i] = acc[i] * sigma + v[i];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_grid_has_only_mean() {
        let s = FourierSeries::from_real_samples(&[vec![2.5; 16]], 1.0).unwrap();
        assert_relative_eq!(s.coefficient(0, 0).re, 2.5, epsilon = 1e-15);
        for k in 1..8 {
            assert!(s.coefficient(0, k).norm() < 1e-15);
            assert!(s.coefficient(0, -k).norm() < 1e-15);
        }
    }

    #[test]
    fn cosine_splits_into_two_halves() {
        let g: Vec<f64> = grid_points(32, 1.0)
            .iter()
            .map(|t| (2.0 * PI * t).cos())
            .collect();
        let s = FourierSeries::from_real_samples(&[g], 1.0).unwrap();
        assert_relative_eq!(s.coefficient(0, 1).re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(s.coefficient(0, -1).re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FourierSeries::from_real_samples(&[vec![0.0; 12]], 1.0).is_err());
        assert!(FourierSeries::zeros(1, 16, 3.0).is_err());
    }

    #[test]
    fn derivative_of_sine() {
        let g: Vec<f64> = grid_points(64, 1.0)
            .iter()
            .map(|t| (2.0 * PI * t).sin())
            .collect();
        let d = FourierSeries::from_real_samples(&[g], 1.0)
            .unwrap()
            .differentiate();
        for (t, v) in grid_points(64, 1.0).iter().zip(&d.real_samples()[0]) {
            assert!((v - 2.0 * PI * (2.0 * PI * t).cos()).abs() < 1e-12);
        }
        assert_eq!(d.coefficient(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn derivative_on_period_two() {
        let g: Vec<f64> = grid_points(64, 2.0)
            .iter()
            .map(|t| (PI * t).sin())
            .collect();
        let d = FourierSeries::from_real_samples(&[g], 2.0)
            .unwrap()
            .differentiate();
        for (t, v) in grid_points(64, 2.0).iter().zip(&d.real_samples()[0]) {
            assert!((v - PI * (PI * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_division() {
        let n = 16;
        let g: Vec<Complex64> = grid_points(n, 1.0)
            .iter()
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * t))
            .collect();
        let rhs = FourierSeries::from_samples(&[g], 1.0).unwrap();
        let out = solve_diagonal(&rhs, 1.0, &[c(1.0, 0.0)], None, 1e-8, 1).unwrap();
        let expect = c(1.0, 0.0) / c(1.0, 2.0 * PI);
        assert!((out.solution.coefficient(0, 1) - expect).norm() < 1e-15);
    }

    #[test]
    fn free_mode_reports_residual() {
        let rhs = FourierSeries::from_real_samples(&[vec![0.25; 8]], 1.0).unwrap();
        let out = solve_diagonal(&rhs, 2.0, &[c(0.0, 0.0)], Some(0), 1e-8, 1).unwrap();
        assert_relative_eq!(out.free_residual.unwrap().re, 0.25, epsilon = 1e-15);
        assert_eq!(out.solution.coefficient(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn zero_divisor_is_an_error() {
        let rhs = FourierSeries::from_real_samples(&[vec![1.0; 8]], 1.0).unwrap();
        let err = solve_diagonal(&rhs, 1.0, &[c(0.0, 0.0)], None, 1e-8, 3).unwrap_err();
        match err {
            Error::SmallDivisor {
                k,
                component,
                order,
                ..
            } => {
                assert_eq!((k, component, order), (0, 0, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decoupled_block_matches_diagonal() {
        let n = 32;
        let ga: Vec<f64> = grid_points(n, 1.0)
            .iter()
            .map(|t| (2.0 * PI * t).sin() + 0.3)
            .collect();
        let gb: Vec<f64> = grid_points(n, 1.0)
            .iter()
            .map(|t| (6.0 * PI * t).cos())
            .collect();
        let ra = FourierSeries::from_real_samples(&[ga], 1.0).unwrap();
        let rb = FourierSeries::from_real_samples(&[gb], 1.0).unwrap();
        let (ua, ub, _) = block_solve_2x2(&ra, &rb, 0.7, 0.0, c(0.2, 0.0), 3.0, 1e-12).unwrap();
        let da = solve_diagonal(&ra, 3.0, &[c(0.9, 0.0)], None, 1e-12, 0).unwrap();
        let db = solve_diagonal(&rb, 3.0, &[c(0.9, 0.0)], None, 1e-12, 0).unwrap();
        assert!(ua.sub(&da.solution).unwrap().grid_max_abs() < 1e-13);
        assert!(ub.sub(&db.solution).unwrap().grid_max_abs() < 1e-13);
    }

    #[test]
    fn lift_and_fold_round_trip() {
        let g: Vec<f64> = grid_points(16, 1.0)
            .iter()
            .map(|t| (2.0 * PI * t).cos())
            .collect();
        let s = FourierSeries::from_real_samples(std::slice::from_ref(&g), 1.0).unwrap();
        let lifted = s.lifted_to_period_two().unwrap();
        let vals = lifted.real_samples();
        for m in 0..16 {
            assert!((vals[0][m] - g[m]).abs() < 1e-14);
            assert!((vals[0][m + 16] - g[m]).abs() < 1e-14);
        }
        let (back, odd) = lifted.folded_to_period_one().unwrap();
        assert!(odd < 1e-15);
        assert!(back.sub(&s).unwrap().grid_max_abs() < 1e-15);
    }

    #[test]
    fn pointwise_eval_matches_grid() {
        let g: Vec<f64> = grid_points(32, 1.0)
            .iter()
            .map(|t| (2.0 * PI * t).sin().exp())
            .collect();
        let s = FourierSeries::from_real_samples(&[g], 1.0).unwrap();
        let t = 0.123;
        assert!((s.eval_real(t)[0] - (2.0 * PI * t).sin().exp()).abs() < 1e-10);
    }

    #[test]
    fn horner_of_geometric_series() {
        let s = FourierSeries::from_real_samples(&[vec![1.0; 4]], 1.0).unwrap();
        let ft = FourierTaylor::new(vec![s.clone(), s.clone(), s]).unwrap();
        assert_relative_eq!(ft.eval(0.3, 0.5)[0], 1.75, epsilon = 1e-14);
        assert_relative_eq!(ft.eval_sigma_derivative(0.3, 0.5)[0], 2.0, epsilon = 1e-14);
    }
}
