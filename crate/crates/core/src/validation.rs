//! Checks of a computed expansion: the invariance residual and the domain
//! where it stays below a tolerance, the orthogonality relations between
//! response and manifold orders, directional derivatives along the field,
//! and agreement with integrated trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ManifoldExpansion;
use crate::model::{eval_field, VectorField};
use crate::ode::{flow_dense, IntegratorSettings};
use crate::response::{pairing_on_grid, ResponseExpansion};
use crate::series::{horner, FourierSeries};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ‖Σ_n[(1/T)K_n′ + nλ_s K_n]σⁿ − X(Σ_n K_n σⁿ)‖ from per-order values.
fn residual_from_values(
    model: &dyn VectorField,
    values: &[Vec<f64>],
    derivs: &[Vec<f64>],
    period: f64,
    slow_exponent: f64,
    sigma: f64,
) -> f64 {
    let d = values[0].len();
    let mut point = vec![0.0; d];
    let mut lhs = vec![0.0; d];
    for n in (0..values.len()).rev() {
        let shift = n as f64 * slow_exponent;
        for i in 0..d {
            point[i] = point[i] * sigma + values[n][i];
            lhs[i] = lhs[i] * sigma + derivs[n][i] / period + shift * values[n][i];
        }
    }
    let field = eval_field(model, &point);
    let r: Vec<f64> = lhs.iter().zip(&field).map(|(a, b)| a - b).collect();
    norm(&r)
}

/// Invariance error E(θ, σ) at an arbitrary phase.
pub fn invariance_residual(
    manifold: &ManifoldExpansion,
    model: &dyn VectorField,
    theta: f64,
    sigma: f64,
) -> f64 {
    let (v, dv) = manifold.k.values_and_derivatives(theta);
    residual_from_values(
        model,
        &v,
        &dv,
        manifold.period,
        manifold.slow_exponent,
        sigma,
    )
}

/// Per-grid-point values of K_n and K_n′, for repeated evaluation at grid phases.
struct GridTables {
    values: Vec<Vec<Vec<f64>>>,
    derivs: Vec<Vec<Vec<f64>>>,
}

impl GridTables {
    fn new(manifold: &ManifoldExpansion) -> Self {
        let (k, dk) = manifold.grid_tables();
        let len = manifold.k.len();
        let regroup = |t: Vec<Vec<Vec<f64>>>| -> Vec<Vec<Vec<f64>>> {
            (0..len)
                .map(|m| {
                    t.iter()
                        .map(|order| order.iter().map(|c| c[m]).collect())
                        .collect()
                })
                .collect()
        };
        Self {
            values: regroup(k),
            derivs: regroup(dk),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySettings {
    /// Tolerances in descending order.
    pub tolerances: Vec<f64>,
    /// Largest |σ| examined on each side.
    pub window: f64,
    pub scan_points: usize,
    pub bisection_steps: usize,
}

impl Default for AccuracySettings {
    fn default() -> Self {
        Self {
            tolerances: vec![1e-6, 1e-8],
            window: 1.0,
            scan_points: 64,
            bisection_steps: 60,
        }
    }
}

impl AccuracySettings {
    pub fn validate(&self) -> Result<()> {
        if self.tolerances.is_empty() {
            return Err(Error::InvalidInput("tolerance list is empty".into()));
        }
        if self.tolerances.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.tolerances.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "tolerances must be sorted descending".into(),
            ));
        }
        if !(self.window > 0.0) || self.scan_points < 2 {
            return Err(Error::InvalidInput(
                "σ window must be positive with at least 2 scan points".into(),
            ));
        }
        Ok(())
    }
}

/// Per-phase extent of the region where the invariance error is below each
/// tolerance, on both sides of the cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyDomain {
    pub tolerances: Vec<f64>,
    pub window: f64,
    pub theta: Vec<f64>,
    /// σ_max(θ_m) for σ ≥ 0, [tolerance][m].
    pub positive: Vec<Vec<f64>>,
    /// |σ|_max(θ_m) for σ ≤ 0.
    pub negative: Vec<Vec<f64>>,
    /// Sides where the bound reached the window edge, per tolerance.
    pub saturated: Vec<usize>,
    /// Sides where the residual dipped back below the tolerance past the
    /// first crossing; those bounds are approximate.
    pub nonmonotone: Vec<usize>,
}

impl AccuracyDomain {
    /// Smallest extent over all phases and both sides.
    pub fn min_extent(&self, tol_index: usize) -> f64 {
        self.positive[tol_index]
            .iter()
            .chain(&self.negative[tol_index])
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Every phase has a nonempty interval on both sides.
    pub fn is_two_sided(&self, tol_index: usize) -> bool {
        self.min_extent(tol_index) > 0.0
    }

    /// σ_max does not grow as the tolerance shrinks.
    pub fn is_nested(&self) -> bool {
        let nested = |side: &Vec<Vec<f64>>| {
            side.windows(2).all(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .all(|(loose, strict)| strict <= loose)
            })
        };
        nested(&self.positive) && nested(&self.negative)
    }

    /// Conservative bound at an arbitrary phase: the smaller of the two
    /// neighboring grid values.
    pub fn bound(&self, tol_index: usize, theta: f64, positive: bool) -> f64 {
        let side = if positive {
            &self.positive
        } else {
            &self.negative
        }[tol_index]
            .as_slice();
        let n = side.len();
        let x = theta.rem_euclid(1.0) * n as f64;
        let lo = (x.floor() as usize) % n;
        side[lo].min(side[(lo + 1) % n])
    }
}

/// Scan-then-bisect for the largest |σ| with E below each tolerance.
pub fn accuracy_domain(
    manifold: &ManifoldExpansion,
    model: &dyn VectorField,
    settings: &AccuracySettings,
) -> Result<AccuracyDomain> {
    settings.validate()?;
    let tables = GridTables::new(manifold);
    let t = manifold.period;
    let ls = manifold.slow_exponent;
    let len = manifold.k.len();
    let ntol = settings.tolerances.len();
    let scan = settings.scan_points;
    let step = settings.window / scan as f64;

    let mut positive = vec![vec![0.0; len]; ntol];
    let mut negative = vec![vec![0.0; len]; ntol];
    let mut saturated = vec![0; ntol];
    let mut nonmonotone = vec![0; ntol];

    for m in 0..len {
        let (v, dv) = (&tables.values[m], &tables.derivs[m]);
        let residual = |s: f64| residual_from_values(model, v, dv, t, ls, s);
        let at_zero = residual(0.0);
        for (sign, side) in [(1.0, &mut positive), (-1.0, &mut negative)] {
            let samples: Vec<f64> = (1..=scan)
                .map(|k| residual(sign * k as f64 * step))
                .collect();
            for (ti, &tol) in settings.tolerances.iter().enumerate() {
                if at_zero >= tol {
                    side[ti][m] = 0.0;
                    continue;
                }
                let Some(first) = samples.iter().position(|r| *r >= tol) else {
                    side[ti][m] = settings.window;
                    saturated[ti] += 1;
                    continue;
                };
                if samples[first..].iter().any(|r| *r < tol) {
                    nonmonotone[ti] += 1;
                }
                let mut lo = first as f64 * step;
                let mut hi = lo + step;
                for _ in 0..settings.bisection_steps {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if residual(sign * mid) < tol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                side[ti][m] = lo;
            }
        }
    }
    Ok(AccuracyDomain {
        tolerances: settings.tolerances.clone(),
        window: settings.window,
        theta: (0..len).map(|m| m as f64 / len as f64).collect(),
        positive,
        negative,
        saturated,
        nonmonotone,
    })
}

/// Log-log slope of E(θ, σ) against σ over the range where E lies in a band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationScaling {
    pub theta: f64,
    pub sigma: Vec<f64>,
    pub residual: Vec<f64>,
    pub slope: f64,
    pub fitted: usize,
}

/// Samples E at geometrically spaced σ in `sigma_range` and fits the slope
/// over the samples with E inside `band`, where truncation dominates both
/// rounding and divergence of the series.
pub fn truncation_scaling(
    manifold: &ManifoldExpansion,
    model: &dyn VectorField,
    theta: f64,
    sigma_range: (f64, f64),
    band: (f64, f64),
    points: usize,
) -> Result<TruncationScaling> {
    let (a, b) = sigma_range;
    if !(a > 0.0 && b > a) || points < 3 {
        return Err(Error::InvalidInput(
            "σ range must satisfy 0 < a < b with ≥ 3 points".into(),
        ));
    }
    let (v, dv) = manifold.k.values_and_derivatives(theta);
    let ratio = (b / a).powf(1.0 / (points - 1) as f64);
    let sigma: Vec<f64> = (0..points).map(|i| a * ratio.powi(i as i32)).collect();
    let residual: Vec<f64> = sigma
        .iter()
        .map(|&s| residual_from_values(model, &v, &dv, manifold.period, manifold.slow_exponent, s))
        .collect();
    let pts: Vec<(f64, f64)> = sigma
        .iter()
        .zip(&residual)
        .filter(|(_, r)| **r >= band.0 && **r <= band.1)
        .map(|(s, r)| (s.ln(), r.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "only {} samples fall in the fitting band",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(TruncationScaling {
        theta,
        sigma,
        residual,
        slope: sxy / sxx,
        fitted: pts.len(),
    })
}

/// Grid-max deviations of the relations that follow from Θ(K(θ, σ)) = θ and
/// Σ_s(K(θ, σ)) = σ, per order n = 0..L:
///
/// - phase tangent: Σ_i ⟨Z_i, K′_{n−i}⟩ = δ_{n0}
/// - phase transverse: Σ_i ⟨Z_i, (n+1−i)K_{n+1−i}⟩ = 0
/// - amplitude tangent: Σ_i ⟨I_i, K′_{n−i}⟩ = 0
/// - amplitude transverse: Σ_i ⟨I_i, (n+1−i)K_{n+1−i}⟩ = δ_{n0}
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub phase_tangent: Vec<f64>,
    pub phase_transverse: Vec<f64>,
    pub amplitude_tangent: Vec<f64>,
    pub amplitude_transverse: Vec<f64>,
}

impl OrthogonalityReport {
    pub fn max(&self) -> f64 {
        self.phase_tangent
            .iter()
            .chain(&self.phase_transverse)
            .chain(&self.amplitude_tangent)
            .chain(&self.amplitude_transverse)
            .copied()
            .fold(0.0, f64::max)
    }
}

/// `next` is K_{L+1}, needed by the transverse relations at n = L.
pub fn orthogonality_report(
    manifold: &ManifoldExpansion,
    next: &FourierSeries,
    response: &ResponseExpansion,
) -> Result<OrthogonalityReport> {
    let order = response.order();
    if manifold.order() < order {
        return Err(Error::InvalidInput(format!(
            "manifold order {} is below the response order {order}",
            manifold.order()
        )));
    }
    let k: Vec<&FourierSeries> = manifold.k.terms()[..=order].iter().chain([next]).collect();
    let kp: Vec<&FourierSeries> = manifold.derivatives.terms()[..=order].iter().collect();
    let z: Vec<&FourierSeries> = response.z.terms().iter().collect();
    let ir: Vec<&FourierSeries> = response.i.terms().iter().collect();
    let len = manifold.k.len();

    let relation =
        |u: &[&FourierSeries], v: &[&FourierSeries], shift: usize, weighted: bool, target: f64| {
            (0..=order)
                .map(|n| {
                    let mut acc = vec![0.0; len];
                    for i in 0..=n {
                        let j = n + shift - i;
                        let w = if weighted { j as f64 } else { 1.0 };
                        for (a, p) in acc.iter_mut().zip(pairing_on_grid(u[i], v[j])) {
                            *a += w * p;
                        }
                    }
                    let goal = if n == 0 { target } else { 0.0 };
                    acc.iter().map(|a| (a - goal).abs()).fold(0.0, f64::max)
                })
                .collect::<Vec<f64>>()
        };
    Ok(OrthogonalityReport {
        phase_tangent: relation(&z, &kp, 0, false, 1.0),
        phase_transverse: relation(&z, &k, 1, true, 0.0),
        amplitude_tangent: relation(&ir, &kp, 0, false, 0.0),
        amplitude_transverse: relation(&ir, &k, 1, true, 1.0),
    })
}

/// ⟨∇Θ, X⟩ − 1/T and ⟨∇Σ_s, X⟩ − λ_s σ at points of the manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalReport {
    pub samples: usize,
    pub phase_max: f64,
    pub amplitude_max: f64,
}

pub fn directional_derivatives(
    manifold: &ManifoldExpansion,
    response: &ResponseExpansion,
    model: &dyn VectorField,
    points: &[(f64, f64)],
) -> DirectionalReport {
    let mut phase_max: f64 = 0.0;
    let mut amplitude_max: f64 = 0.0;
    for &(theta, sigma) in points {
        let x = manifold.evaluate(theta, sigma);
        let f = eval_field(model, &x);
        let z = response.phase_gradient(theta, sigma);
        let i = response.amplitude_gradient(theta, sigma);
        phase_max = phase_max.max((dot(&z, &f) - 1.0 / manifold.period).abs());
        amplitude_max = amplitude_max.max((dot(&i, &f) - manifold.slow_exponent * sigma).abs());
    }
    DirectionalReport {
        samples: points.len(),
        phase_max,
        amplitude_max,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSettings {
    pub count: usize,
    pub seed: u64,
    /// |σ| is drawn uniformly from this fraction range of the local bound.
    pub fraction: (f64, f64),
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self {
            count: 50,
            seed: 7,
            fraction: (0.1, 0.95),
        }
    }
}

/// Seeded points (θ, σ) inside the domain of one tolerance, both sides.
pub fn sample_domain(
    domain: &AccuracyDomain,
    tol_index: usize,
    settings: &SampleSettings,
) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let (lo, hi) = settings.fraction;
    (0..settings.count)
        .map(|_| {
            let theta: f64 = rng.gen();
            let positive: bool = rng.gen_bool(0.5);
            let u: f64 = rng.gen_range(lo..=hi);
            let bound = domain.bound(tol_index, theta, positive);
            (theta, if positive { u * bound } else { -u * bound })
        })
        .collect()
}

/// (θ, σ) with K(θ, σ) closest to `x`, by Gauss-Newton from `start`.
pub fn invert_manifold(
    manifold: &ManifoldExpansion,
    x: &[f64],
    start: (f64, f64),
) -> Result<(f64, f64)> {
    let (mut theta, mut sigma) = start;
    let mut last = f64::INFINITY;
    for it in 0..30 {
        let (v, dv) = manifold.k.values_and_derivatives(theta);
        let point = horner(&v, sigma);
        let d_theta = horner(&dv, sigma);
        let d = point.len();
        let mut d_sigma = vec![0.0; d];
        for n in (1..v.len()).rev() {
            for i in 0..d {
                d_sigma[i] = d_sigma[i] * sigma + n as f64 * v[n][i];
            }
        }
        let r: Vec<f64> = point.iter().zip(x).map(|(p, q)| p - q).collect();
        let (a, b, c) = (
            dot(&d_theta, &d_theta),
            dot(&d_theta, &d_sigma),
            dot(&d_sigma, &d_sigma),
        );
        let (g0, g1) = (dot(&d_theta, &r), dot(&d_sigma, &r));
        let det = a * c - b * b;
        if !(det.abs() > 0.0) {
            return Err(Error::NewtonFailed {
                iterations: it,
                correction: f64::NAN,
            });
        }
        let dt = -(c * g0 - b * g1) / det;
        let ds = -(a * g1 - b * g0) / det;
        theta += dt;
        sigma += ds;
        let step = dt.abs() + ds.abs();
        if step <= 1e-15 * (1.0 + sigma.abs()) || (it > 3 && step >= last) {
            return Ok((theta, sigma));
        }
        last = step;
    }
    Err(Error::NewtonFailed {
        iterations: 30,
        correction: last,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySettings {
    /// Horizon as a multiple of the period.
    pub periods: f64,
    /// Number of equally spaced check times in (0, periods·T].
    pub checkpoints: usize,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        Self {
            periods: 2.0,
            checkpoints: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub theta: f64,
    pub sigma: f64,
    /// max_t ‖φ_t(K(θ, σ)) − K(θ + t/T, σe^{λ_s t})‖.
    pub conjugacy: f64,
    /// max_t |Θ(φ_t) − θ − t/T| (mod 1) after inversion.
    pub phase_drift: f64,
    /// max_t |Σ(φ_t)/(σe^{λ_s t}) − 1|.
    pub decay_deviation: f64,
    /// max_t |Σ(φ_t) − σe^{λ_s t}| / |σ|; stays meaningful once σe^{λ_s t}
    /// falls to the rounding level of the inversion.
    pub amplitude_error: f64,
    pub inverted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub horizons: Vec<f64>,
    pub samples: Vec<TrajectorySample>,
    pub conjugacy_max: f64,
    pub phase_drift_max: f64,
    pub decay_max: f64,
    pub amplitude_error_max: f64,
    pub inversion_failures: usize,
}

fn wrap_phase(x: f64) -> f64 {
    x - x.round()
}

pub fn trajectory_consistency(
    manifold: &ManifoldExpansion,
    model: &dyn VectorField,
    points: &[(f64, f64)],
    settings: &TrajectorySettings,
    integ: &IntegratorSettings,
) -> Result<TrajectoryReport> {
    if settings.checkpoints == 0 || !(settings.periods > 0.0) {
        return Err(Error::InvalidInput(
            "trajectory horizon must be positive".into(),
        ));
    }
    let t_period = manifold.period;
    let ls = manifold.slow_exponent;
    let span = settings.periods * t_period;
    let horizons: Vec<f64> = (1..=settings.checkpoints)
        .map(|k| span * k as f64 / settings.checkpoints as f64)
        .collect();
    let mut samples = Vec::with_capacity(points.len());
    for &(theta, sigma) in points {
        let x0 = manifold.evaluate(theta, sigma);
        let traj = flow_dense(model, &x0, span, integ)?;
        let dense = traj
            .dense
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("integrator returned no dense output".into()))?;
        let mut s = TrajectorySample {
            theta,
            sigma,
            conjugacy: 0.0,
            phase_drift: 0.0,
            decay_deviation: 0.0,
            amplitude_error: 0.0,
            inverted: true,
        };
        for &t in &horizons {
            let x = dense.eval(t)?;
            let expected = (theta + t / t_period, sigma * (ls * t).exp());
            let pred = manifold.evaluate(expected.0, expected.1);
            let diff: Vec<f64> = x.iter().zip(&pred).map(|(a, b)| a - b).collect();
            s.conjugacy = s.conjugacy.max(norm(&diff));
            match invert_manifold(manifold, &x, expected) {
                Ok((th, sg)) => {
                    s.phase_drift = s.phase_drift.max(wrap_phase(th - expected.0).abs());
                    s.decay_deviation = s.decay_deviation.max((sg / expected.1 - 1.0).abs());
                    s.amplitude_error = s.amplitude_error.max(((sg - expected.1) / sigma).abs());
                }
                Err(_) => s.inverted = false,
            }
        }
        samples.push(s);
    }
    let fold = |f: fn(&TrajectorySample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    Ok(TrajectoryReport {
        conjugacy_max: fold(|s| s.conjugacy),
        phase_drift_max: fold(|s| s.phase_drift),
        decay_max: fold(|s| s.decay_deviation),
        amplitude_error_max: fold(|s| s.amplitude_error),
        inversion_failures: samples.iter().filter(|s| !s.inverted).count(),
        horizons,
        samples,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationSettings {
    pub accuracy: AccuracySettings,
    pub samples: SampleSettings,
    pub trajectory: TrajectorySettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// E(θ_m, 0) grid-max.
    pub cycle_residual: f64,
    pub accuracy: AccuracyDomain,
    pub orthogonality: OrthogonalityReport,
    /// Samples drawn from the domain of the strictest tolerance.
    pub directional: DirectionalReport,
    pub trajectory: TrajectoryReport,
}

/// The full suite. Sample-based checks use the strictest tolerance.
pub fn run_validation(
    model: &dyn VectorField,
    manifold: &ManifoldExpansion,
    next: &FourierSeries,
    response: &ResponseExpansion,
    settings: &ValidationSettings,
    integ: &IntegratorSettings,
) -> Result<ValidationReport> {
    let accuracy = accuracy_domain(manifold, model, &settings.accuracy)?;
    let strictest = accuracy.tolerances.len() - 1;
    let points = sample_domain(&accuracy, strictest, &settings.samples);
    let tables = GridTables::new(manifold);
    let cycle_residual = (0..manifold.k.len())
        .map(|m| {
            residual_from_values(
                model,
                &tables.values[m],
                &tables.derivs[m],
                manifold.period,
                manifold.slow_exponent,
                0.0,
            )
        })
        .fold(0.0, f64::max);
    Ok(ValidationReport {
        cycle_residual,
        orthogonality: orthogonality_report(manifold, next, response)?,
        directional: directional_derivatives(manifold, response, model, &points),
        trajectory: trajectory_consistency(manifold, model, &points, &settings.trajectory, integ)?,
        accuracy,
    })
}
