//! Periodic orbit location, Floquet spectrum and resonance screening.

use std::f64::consts::PI;

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_field, VectorField};
use crate::ode::{
    flow, flow_dense, flow_with_variational, variational_transfers, CycleInterpolant,
    GridTransfers, IntegratorSettings,
};
use crate::periodic::{transport_on_grid, PeriodicProduct};
use crate::series::FourierSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleSettings {
    /// Starting state; empty means the model's default guess.
    pub guess: Vec<f64>,
    pub relax_time: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub grid_n: usize,
    /// How long to wait for the first return to the section.
    pub return_horizon: f64,
}

impl Default for CycleSettings {
    fn default() -> Self {
        Self {
            guess: Vec::new(),
            relax_time: 500.0,
            newton_tol: 1e-12,
            newton_max_iter: 25,
            grid_n: 4096,
            return_horizon: 1000.0,
        }
    }
}

impl CycleSettings {
    pub fn validate(&self) -> Result<()> {
        if !self.grid_n.is_power_of_two() || self.grid_n < 8 {
            return Err(Error::InvalidInput(format!(
                "cycle grid size {} is not a power of two ≥ 8",
                self.grid_n
            )));
        }
        if !(self.relax_time >= 0.0) || !(self.return_horizon > 0.0) {
            return Err(Error::InvalidInput(
                "relax time and return horizon must be ≥ 0".into(),
            ));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidInput(
                "newton tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A state inside the basin of the built-in models' cycles.
pub fn default_guess(model: &dyn VectorField) -> Vec<f64> {
    match model.name() {
        "ei" => vec![0.01, 0.0, 0.0, 0.01, 0.0, 0.0],
        "oracle" => vec![1.3, 0.0],
        _ => vec![0.1; model.dim()],
    }
}

#[derive(Clone, Debug)]
pub struct Cycle {
    /// γ(0), on the section through the relaxed guess.
    pub anchor: Vec<f64>,
    pub period: f64,
    /// γ(θ_m), θ_m = m/N, as a period-1 series.
    pub samples: FourierSeries,
    /// ‖φ_T(x*) − x*‖ after marching the sampling grid once around.
    pub closure_residual: f64,
    pub newton_iterations: usize,
    pub newton_correction: f64,
}

impl Cycle {
    pub fn grid_len(&self) -> usize {
        self.samples.len()
    }

    pub fn interpolant(&self) -> Result<CycleInterpolant> {
        CycleInterpolant::new(&self.samples, self.period)
    }

    /// Grid values [component][m].
    pub fn grid_values(&self) -> Vec<Vec<f64>> {
        self.samples.real_samples()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// First upward return of the trajectory from `x_ref` to the hyperplane
/// through `x_ref` with normal X(x_ref).
fn first_return(
    model: &dyn VectorField,
    x_ref: &[f64],
    horizon: f64,
    integ: &IntegratorSettings,
) -> Result<f64> {
    let normal = eval_field(model, x_ref);
    let speed = dot(&normal, &normal).sqrt();
    let scale = 1.0 + dot(x_ref, x_ref).sqrt();
    if speed < 1e-10 * scale {
        return Err(Error::DegenerateSection { speed });
    }
    let traj = flow_dense(model, x_ref, horizon, integ)?;
    let dense = traj.dense.expect("dense output requested");
    let g = |y: &[f64]| -> f64 {
        y.iter()
            .zip(x_ref)
            .zip(&normal)
            .map(|((a, b), n)| (a - b) * n)
            .sum()
    };
    let breaks = dense.breakpoints();
    let mut excursion: f64 = 0.0;
    let mut t_prev = 0.0;
    let mut g_prev = 0.0;
    for w in breaks.windows(2) {
        for sub in 1..=8 {
            let t = w[0] + (w[1] - w[0]) * sub as f64 / 8.0;
            let y = dense.eval(t)?;
            let gv = g(&y);
            let dist = distance(&y, x_ref);
            if g_prev < 0.0 && gv >= 0.0 && dist < 0.25 * excursion {
                let (mut a, mut b) = (t_prev, t);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if g(&dense.eval(m)?) < 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                    if b - a <= 4.0 * f64::EPSILON * b {
                        break;
                    }
                }
                return Ok(0.5 * (a + b));
            }
            excursion = excursion.max(dist);
            t_prev = t;
            g_prev = gv;
        }
    }
    Err(Error::NoReturn { horizon })
}

fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let mut b = m.clone();
    balance_parlett_reinsch(&mut b);
    let schur = Schur::try_new(b, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn nearest_to_one(mu: &[Complex64]) -> usize {
    let mut best = 0;
    for (i, m) in mu.iter().enumerate() {
        if (m - 1.0).norm() < (mu[best] - 1.0).norm() {
            best = i;
        }
    }
    best
}

/// Locates the attracting cycle through Newton's method on (x, T) with the
/// phase condition ⟨X(x_ref), x − x_ref⟩ = 0, then samples γ on the θ-grid.
pub fn find_cycle(
    model: &dyn VectorField,
    settings: &CycleSettings,
    integ: &IntegratorSettings,
) -> Result<Cycle> {
    settings.validate()?;
    let d = model.dim();
    let guess = if settings.guess.is_empty() {
        default_guess(model)
    } else {
        settings.guess.clone()
    };
    if guess.len() != d {
        return Err(Error::InvalidInput(format!(
            "guess has {} components, model has {d}",
            guess.len()
        )));
    }
    let x_ref = flow(model, &guess, settings.relax_time, integ)?;
    let normal = eval_field(model, &x_ref);
    let mut period = first_return(model, &x_ref, settings.return_horizon, integ)?;

    let mut x = x_ref.clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut correction = f64::INFINITY;
    let mut monodromy = DMatrix::identity(d, d);
    while iterations < settings.newton_max_iter {
        iterations += 1;
        let v = flow_with_variational(model, &x, period, integ)?;
        let fx = eval_field(model, &v.state);
        let mut a = DMatrix::zeros(d + 1, d + 1);
        let mut rhs = DVector::zeros(d + 1);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = v.phi[(i, j)] - if i == j { 1.0 } else { 0.0 };
            }
            a[(i, d)] = fx[i];
            a[(d, i)] = normal[i];
            rhs[i] = x[i] - v.state[i];
        }
        rhs[d] = -x
            .iter()
            .zip(&x_ref)
            .zip(&normal)
            .map(|((a, b), n)| (a - b) * n)
            .sum::<f64>();
        let delta = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Eigen("singular Newton matrix".into()))?;
        for i in 0..d {
            x[i] += delta[i];
        }
        period += delta[d];
        monodromy = v.phi;
        correction = delta.norm();
        let size = (dot(&x, &x) + period * period).sqrt().max(1.0);
        if !correction.is_finite() || !(period > 0.0) {
            break;
        }
        if correction < settings.newton_tol * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NewtonFailed {
            iterations,
            correction,
        });
    }

    let mu = eigenvalues(&monodromy)?;
    let trivial = nearest_to_one(&mu);
    for (i, m) in mu.iter().enumerate() {
        if i != trivial && m.norm() >= 1.0 {
            return Err(Error::NotAttracting {
                index: i,
                modulus: m.norm(),
            });
        }
    }

    let n = settings.grid_n;
    let h = period / n as f64;
    let mut rows = vec![vec![0.0; n]; d];
    let mut y = x.clone();
    for m in 0..n {
        for i in 0..d {
            rows[i][m] = y[i];
        }
        y = flow(model, &y, h, integ)?;
    }
    let closure_residual = distance(&y, &x);
    Ok(Cycle {
        anchor: x,
        period,
        samples: FourierSeries::from_real_samples(&rows, 1.0)?,
        closure_residual,
        newton_iterations: iterations,
        newton_correction: correction,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloquetClass {
    Trivial,
    RealPositive,
    RealNegative,
    ComplexPairLead,
    ComplexPairConjugate,
}

impl FloquetClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            FloquetClass::Trivial => "trivial",
            FloquetClass::RealPositive => "real_positive",
            FloquetClass::RealNegative => "real_negative",
            FloquetClass::ComplexPairLead => "complex_pair_lead",
            FloquetClass::ComplexPairConjugate => "complex_pair_conjugate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetSpectrum {
    pub period: f64,
    pub multipliers: Vec<Complex64>,
    pub exponents: Vec<Complex64>,
    pub lyapunov: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub classes: Vec<FloquetClass>,
    pub slow_index: usize,
    /// |μ_0 − 1| as computed from the monodromy matrix, before μ_0 was set to 1.
    pub trivial_deviation: f64,
    pub eigenvector_condition: f64,
}

impl FloquetSpectrum {
    /// Builds a spectrum directly from exponents, with coordinate axes as
    /// eigenvectors. Index 0 must be the trivial exponent. Meant for
    /// screening hypothetical spectra.
    pub fn from_exponents(period: f64, exponents: Vec<Complex64>) -> Result<Self> {
        let d = exponents.len();
        if d == 0 || exponents[0].norm() > 1e-12 || !(period > 0.0) {
            return Err(Error::InvalidInput(
                "need a positive period and a leading zero exponent".into(),
            ));
        }
        let mut classes = vec![FloquetClass::Trivial];
        for j in 1..d {
            let l = exponents[j];
            let class = if l.im.abs() < 1e-14 {
                FloquetClass::RealPositive
            } else if (l.im - PI / period).abs() < 1e-12 {
                FloquetClass::RealNegative
            } else if l.im > 0.0 {
                FloquetClass::ComplexPairLead
            } else {
                FloquetClass::ComplexPairConjugate
            };
            classes.push(class);
        }
        let eigenvectors = (0..d)
            .map(|j| {
                (0..d)
                    .map(|i| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect();
        Ok(Self {
            period,
            multipliers: exponents.iter().map(|l| (l * period).exp()).collect(),
            lyapunov: exponents.iter().map(|l| l.re).collect(),
            exponents,
            eigenvectors,
            classes,
            slow_index: 1.min(d - 1),
            trivial_deviation: 0.0,
            eigenvector_condition: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// λ_s, required real.
    pub fn slow_exponent(&self) -> Result<f64> {
        let s = self.slow_index;
        match self.classes.get(s) {
            Some(FloquetClass::RealPositive) => Ok(self.exponents[s].re),
            Some(c) => Err(Error::SlowDirection(c.as_str().into())),
            None => Err(Error::SlowDirection("missing".into())),
        }
    }

    /// The other member of a complex pair.
    pub fn partner(&self, j: usize) -> Option<usize> {
        match self.classes[j] {
            FloquetClass::ComplexPairLead => Some(j + 1),
            FloquetClass::ComplexPairConjugate => Some(j - 1),
            _ => None,
        }
    }

    pub fn has_real_negative(&self) -> bool {
        self.classes.contains(&FloquetClass::RealNegative)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetSettings {
    /// Segments of the cyclic eigenproblem; must divide the grid size.
    pub segments: usize,
    pub trivial_tol: f64,
    pub defect_tol: f64,
}

impl Default for FloquetSettings {
    fn default() -> Self {
        Self {
            segments: 64,
            trivial_tol: 1e-6,
            defect_tol: 1e10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FloquetAnalysis {
    pub spectrum: FloquetSpectrum,
    /// Φ_T as the product of the grid transfers.
    pub monodromy: DMatrix<f64>,
    pub transfers: GridTransfers,
    /// For each direction j, e^{−λ_j t_m}Φ(t_m)w_j on the grid; the trivial
    /// direction is X(γ)/‖X(x*)‖.
    pub bundle_samples: Vec<Vec<DVector<Complex64>>>,
    /// |det Φ_T − Π μ_j| / |Π μ_j| with det Φ_T from the per-step determinants.
    pub determinant_residual: f64,
    /// |Σ Re λ_j − (1/T)∫ trace DX|.
    pub liouville_residual: f64,
    /// Largest relative residual of the cyclic eigen solves.
    pub eigen_residual: f64,
}

struct Direction {
    class: FloquetClass,
    rate: Complex64,
    nodes_grid: Vec<DVector<Complex64>>,
    vector: Vec<Complex64>,
}

/// Floquet analysis along a located cycle.
///
/// The classification comes from the eigenvalues of Φ_T; exponents and
/// eigenvectors are then refined on the cyclic segment problem so that
/// multipliers near 1e-10 keep their relative accuracy.
pub fn floquet_spectrum(
    model: &dyn VectorField,
    cycle: &Cycle,
    settings: &FloquetSettings,
    integ: &IntegratorSettings,
) -> Result<FloquetAnalysis> {
    let d = model.dim();
    let n = cycle.grid_len();
    let t = cycle.period;
    if settings.segments == 0 || !n.is_multiple_of(settings.segments) {
        return Err(Error::InvalidInput(format!(
            "{} segments do not divide the grid size {n}",
            settings.segments
        )));
    }
    let transfers = variational_transfers(model, &cycle.anchor, t, n, integ)?;
    let monodromy = transfers
        .transfers
        .iter()
        .fold(DMatrix::identity(d, d), |acc, p| p * acc);
    let raw = eigenvalues(&monodromy)?;
    let trivial = nearest_to_one(&raw);
    let trivial_deviation = (raw[trivial] - 1.0).norm();
    if trivial_deviation > settings.trivial_tol {
        return Err(Error::TrivialMultiplier {
            deviation: trivial_deviation,
        });
    }

    // Classify the remaining multipliers and pick one representative per pair.
    let mut rest: Vec<Complex64> = raw
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != trivial)
        .map(|(_, m)| *m)
        .collect();
    let mut seeds: Vec<(FloquetClass, Complex64)> = Vec::new();
    while let Some(m) = rest.pop() {
        if m.norm() >= 1.0 {
            return Err(Error::NotAttracting {
                index: seeds.len() + 1,
                modulus: m.norm(),
            });
        }
        if m.im.abs() <= 1e-6 * m.norm() {
            let class = if m.re > 0.0 {
                FloquetClass::RealPositive
            } else {
                FloquetClass::RealNegative
            };
            let arg = if m.re > 0.0 { 0.0 } else { PI };
            seeds.push((class, Complex64::new(m.norm().ln(), arg) / t));
        } else {
            let partner = rest
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - m.conj()).norm().total_cmp(&(b.1 - m.conj()).norm()))
                .map(|(i, _)| i)
                .ok_or_else(|| Error::Eigen(format!("complex multiplier {m} has no partner")))?;
            if (rest[partner] - m.conj()).norm() > 1e-6 * m.norm() {
                return Err(Error::Eigen(format!(
                    "complex multiplier {m} has no conjugate"
                )));
            }
            rest.remove(partner);
            let lead = if m.im > 0.0 { m } else { m.conj() };
            seeds.push((FloquetClass::ComplexPairLead, lead.ln() / t));
        }
    }

    let product = PeriodicProduct::new(&transfers.transfers, settings.segments, t)?;
    let mut eigen_residual: f64 = 0.0;
    let mut directions: Vec<Direction> = Vec::new();
    for (class, guess) in seeds {
        let mut pair = product.eigenpair(guess)?;
        let node_scale = pair
            .nodes
            .iter()
            .map(|v| v.norm_squared())
            .sum::<f64>()
            .sqrt();
        eigen_residual = eigen_residual.max(pair.residual / node_scale.max(f64::MIN_POSITIVE));
        if ((pair.rate - guess) * t).norm() > 1e-3 {
            return Err(Error::Eigen(format!(
                "cyclic refinement drifted from {guess} to {}",
                pair.rate
            )));
        }
        pair.rate = match class {
            FloquetClass::RealPositive => Complex64::new(pair.rate.re, 0.0),
            FloquetClass::RealNegative => Complex64::new(pair.rate.re, PI / t),
            _ => pair.rate,
        };
        let grid = transport_on_grid(&transfers.transfers, &pair, t);
        let vector: Vec<Complex64> = pair.nodes[0].iter().copied().collect();
        if class == FloquetClass::ComplexPairLead {
            directions.push(Direction {
                class: FloquetClass::ComplexPairConjugate,
                rate: pair.rate.conj(),
                nodes_grid: grid.iter().map(|v| v.map(|c| c.conj())).collect(),
                vector: vector.iter().map(|c| c.conj()).collect(),
            });
        }
        directions.push(Direction {
            class,
            rate: pair.rate,
            nodes_grid: grid,
            vector,
        });
    }
    // Re λ descending; the lead of a pair (Im λ > 0) before its conjugate.
    directions.sort_by(|a, b| {
        b.rate
            .re
            .total_cmp(&a.rate.re)
            .then(b.rate.im.total_cmp(&a.rate.im))
    });

    let f0 = eval_field(model, &cycle.anchor);
    let f0_norm = dot(&f0, &f0).sqrt();
    let trivial_grid: Vec<DVector<Complex64>> = transfers.states[..n]
        .iter()
        .map(|x| {
            let f = eval_field(model, x);
            DVector::from_iterator(d, f.iter().map(|v| Complex64::new(v / f0_norm, 0.0)))
        })
        .collect();

    let mut classes = vec![FloquetClass::Trivial];
    let mut exponents = vec![Complex64::new(0.0, 0.0)];
    let mut eigenvectors = vec![trivial_grid[0].iter().copied().collect::<Vec<_>>()];
    let mut bundle_samples = vec![trivial_grid];
    for dir in directions {
        classes.push(dir.class);
        exponents.push(dir.rate);
        eigenvectors.push(dir.vector);
        bundle_samples.push(dir.nodes_grid);
    }
    let multipliers: Vec<Complex64> = exponents
        .iter()
        .zip(&classes)
        .map(|(l, c)| match c {
            FloquetClass::Trivial => Complex64::new(1.0, 0.0),
            FloquetClass::RealPositive => Complex64::new((l.re * t).exp(), 0.0),
            FloquetClass::RealNegative => Complex64::new(-(l.re * t).exp(), 0.0),
            _ => (l * t).exp(),
        })
        .collect();
    for (j, m) in multipliers.iter().enumerate().skip(1) {
        if m.norm() >= 1.0 {
            return Err(Error::NotAttracting {
                index: j,
                modulus: m.norm(),
            });
        }
    }

    let w = DMatrix::from_fn(d, d, |i, j| eigenvectors[j][i]);
    let sv = w.svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let eigenvector_condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if eigenvector_condition > settings.defect_tol {
        return Err(Error::Defective {
            condition: eigenvector_condition,
        });
    }

    // det Φ_T through the well-conditioned per-step determinants.
    let mut log_det = 0.0;
    let mut sign = 1.0;
    for p in &transfers.transfers {
        let det = p.clone().lu().determinant();
        log_det += det.abs().ln();
        sign *= det.signum();
    }
    let log_prod: f64 = multipliers.iter().map(|m| m.norm().ln()).sum();
    let sign_prod: f64 = multipliers.iter().map(|m| m.re.signum()).product();
    let determinant_residual = if sign == sign_prod {
        (log_det - log_prod).exp_m1().abs()
    } else {
        f64::INFINITY
    };
    let liouville_residual =
        (exponents.iter().map(|l| l.re).sum::<f64>() - transfers.trace_integral / t).abs();

    let spectrum = FloquetSpectrum {
        period: t,
        lyapunov: exponents.iter().map(|l| l.re).collect(),
        multipliers,
        exponents,
        eigenvectors,
        classes,
        slow_index: 1.min(d - 1),
        trivial_deviation,
        eigenvector_condition,
    };
    Ok(FloquetAnalysis {
        spectrum,
        monodromy,
        transfers,
        bundle_samples,
        determinant_residual,
        liouville_residual,
        eigen_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEntry {
    /// Exponent counts over the nontrivial directions 1..d−1.
    pub multi_index: Vec<usize>,
    /// Target direction k ∈ 1..d−1.
    pub target: usize,
    /// Distance of Σ a_i λ_i − λ_k to the lattice (2πi/T)ℤ.
    pub residual: f64,
    pub flagged: bool,
}

/// Smallest divisor magnitudes met by the recursions at one order n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorMinima {
    pub order: usize,
    /// min |2πik/T + nλ_s − λ_j|, absent at n = 1 where the slow direction
    /// itself is the kernel.
    pub manifold: Option<f64>,
    /// min |2πik/T + λ_j + nλ_s|.
    pub phase_response: f64,
    /// min |2πik/T + λ_j + (n−1)λ_s|, excluding the free mode k = 0, j = 0 at n = 1.
    pub amplitude_response: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub max_order: usize,
    pub tolerance: f64,
    pub entries: Vec<ResonanceEntry>,
    pub divisors: Vec<DivisorMinima>,
}

impl ResonanceReport {
    pub fn flagged(&self) -> impl Iterator<Item = &ResonanceEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }

    pub fn smallest_residual(&self) -> Option<&ResonanceEntry> {
        self.entries
            .iter()
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
    }

    /// Fails on the first flagged resonance.
    pub fn ensure_nonresonant(&self) -> Result<()> {
        match self.flagged().next() {
            Some(e) => Err(Error::Resonance {
                multi_index: e.multi_index.clone(),
                target: e.target,
                residual: e.residual,
            }),
            None => Ok(()),
        }
    }
}

/// min over k ∈ [−N/2, N/2) of |c + 2πik/T|.
fn lattice_distance(c: Complex64, period: f64, fourier_len: usize) -> f64 {
    let step = 2.0 * PI / period;
    let half = (fourier_len / 2) as f64;
    let k = (-c.im / step).round().clamp(-half, half - 1.0);
    let mut best = f64::INFINITY;
    for dk in [-1.0, 0.0, 1.0] {
        let kk = (k + dk).clamp(-half, half - 1.0);
        best = best.min((c + Complex64::new(0.0, step * kk)).norm());
    }
    best
}

fn multi_indices(len: usize, min_total: usize, max_total: usize) -> Vec<Vec<usize>> {
    fn walk(
        pos: usize,
        left: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        min: usize,
        max: usize,
    ) {
        if pos == cur.len() {
            let total = max - left;
            if total >= min {
                out.push(cur.clone());
            }
            return;
        }
        for a in 0..=left {
            cur[pos] = a;
            walk(pos + 1, left - a, cur, out, min, max);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    if len == 0 {
        return out;
    }
    let mut cur = vec![0; len];
    walk(0, max_total, &mut cur, &mut out, min_total, max_total);
    out
}

/// Screens Σ a_i λ_i − λ_k for 2 ≤ |a| ≤ `max_order` and tabulates the
/// divisors of the manifold and response recursions up to `max_order`.
pub fn check_resonances(
    spectrum: &FloquetSpectrum,
    max_order: usize,
    tol: f64,
    fourier_len: usize,
) -> Result<ResonanceReport> {
    if max_order < 2 {
        return Err(Error::InvalidInput(
            "resonance order must be at least 2".into(),
        ));
    }
    let d = spectrum.dim();
    let t = spectrum.period;
    let lam = &spectrum.exponents;
    let mut entries = Vec::new();
    for a in multi_indices(d - 1, 2, max_order) {
        let combo: Complex64 = a
            .iter()
            .enumerate()
            .map(|(i, &ai)| lam[i + 1] * ai as f64)
            .sum();
        for k in 1..d {
            let residual = lattice_distance(combo - lam[k], t, fourier_len);
            entries.push(ResonanceEntry {
                multi_index: a.clone(),
                target: k,
                residual,
                flagged: residual < tol,
            });
        }
    }

    let slow = lam[spectrum.slow_index];
    let mut divisors = Vec::new();
    for order in 1..=max_order {
        let n = order as f64;
        let manifold = (order >= 2).then(|| {
            lam.iter()
                .map(|l| lattice_distance(slow * n - l, t, fourier_len))
                .fold(f64::INFINITY, f64::min)
        });
        let phase_response = lam
            .iter()
            .map(|l| lattice_distance(l + slow * n, t, fourier_len))
            .fold(f64::INFINITY, f64::min);
        let amplitude_response = lam
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let c = l + slow * (n - 1.0);
                if order == 1 && j == 0 {
                    // The free mode sits at k = 0; the nearest other mode is k = ±1.
                    2.0 * PI / t
                } else {
                    lattice_distance(c, t, fourier_len)
                }
            })
            .fold(f64::INFINITY, f64::min);
        divisors.push(DivisorMinima {
            order,
            manifold,
            phase_response,
            amplitude_response,
        });
    }
    Ok(ResonanceReport {
        max_order,
        tolerance: tol,
        entries,
        divisors,
    })
}
