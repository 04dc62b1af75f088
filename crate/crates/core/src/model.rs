//! Analytic vector fields: evaluation, Jacobian and σ-jet composition.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Arith, Jet};
use crate::series::{FourierSeries, FourierTaylor};

/// An autonomous analytic vector field x' = X(x).
///
/// `field_jet` and `jacobian_jet` must use the same elementary operations as
/// `eval` and `jacobian` so that order-0 jets reproduce pointwise values.
pub trait VectorField: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn name(&self) -> &str;
    fn component_names(&self) -> Vec<String>;
    fn parameters(&self) -> Vec<(String, f64)>;
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// Row-major DX(x), entry (i, j) = ∂X_i/∂x_j.
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
    fn field_jet(&self, x: &[Jet]) -> Vec<Jet>;
    /// Row-major jet of DX entries.
    fn jacobian_jet(&self, x: &[Jet]) -> Vec<Jet>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EiParameters {
    pub tau_e: f64,
    pub tau_i: f64,
    pub tau_se: f64,
    pub tau_si: f64,
    pub delta_e: f64,
    pub delta_i: f64,
    pub eta_e: f64,
    pub eta_i: f64,
    pub j_ei: f64,
    pub j_ie: f64,
    pub i_e_ext: f64,
    pub i_i_ext: f64,
}

impl Default for EiParameters {
    fn default() -> Self {
        Self {
            tau_e: 10.0,
            tau_i: 10.0,
            tau_se: 1.0,
            tau_si: 1.0,
            delta_e: 1.0,
            delta_i: 1.0,
            eta_e: -5.0,
            eta_i: -5.0,
            j_ei: 15.0,
            j_ie: 15.0,
            i_e_ext: 10.0,
            i_i_ext: 0.0,
        }
    }
}

impl EiParameters {
    pub fn names() -> [&'static str; 12] {
        [
            "tau_e", "tau_i", "tau_se", "tau_si", "delta_e", "delta_i", "eta_e", "eta_i", "j_ei",
            "j_ie", "i_e_ext", "i_i_ext",
        ]
    }

    pub fn values(&self) -> [f64; 12] {
        [
            self.tau_e,
            self.tau_i,
            self.tau_se,
            self.tau_si,
            self.delta_e,
            self.delta_i,
            self.eta_e,
            self.eta_i,
            self.j_ei,
            self.j_ie,
            self.i_e_ext,
            self.i_i_ext,
        ]
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "tau_e" => &mut self.tau_e,
            "tau_i" => &mut self.tau_i,
            "tau_se" => &mut self.tau_se,
            "tau_si" => &mut self.tau_si,
            "delta_e" => &mut self.delta_e,
            "delta_i" => &mut self.delta_i,
            "eta_e" => &mut self.eta_e,
            "eta_i" => &mut self.eta_i,
            "j_ei" => &mut self.j_ei,
            "j_ie" => &mut self.j_ie,
            "i_e_ext" => &mut self.i_e_ext,
            "i_i_ext" => &mut self.i_i_ext,
            other => return Err(Error::Config(format!("unknown ei parameter '{other}'"))),
        };
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_e", self.tau_e),
            ("tau_i", self.tau_i),
            ("tau_se", self.tau_se),
            ("tau_si", self.tau_si),
            ("delta_e", self.delta_e),
            ("delta_i", self.delta_i),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite ei parameter".into()));
        }
        Ok(())
    }
}

/// Excitatory-inhibitory mean-field network, state (r_e, V_e, S_ei, r_i, V_i, S_ie).
#[derive(Clone, Debug)]
pub struct EiModel {
    p: EiParameters,
}

pub fn make_ei_model(params: EiParameters) -> Result<EiModel> {
    params.validate()?;
    Ok(EiModel { p: params })
}

impl EiModel {
    pub fn params(&self) -> &EiParameters {
        &self.p
    }

    fn rhs<S: Arith>(&self, x: &[S]) -> Vec<S> {
        let p = &self.p;
        let (re, ve, sei, ri, vi, sie) = (&x[0], &x[1], &x[2], &x[3], &x[4], &x[5]);
        vec![
            re.mul(ve)
                .scale(2.0 / p.tau_e)
                .offset(p.delta_e / (PI * p.tau_e * p.tau_e)),
            ve.square()
                .scale(1.0 / p.tau_e)
                .sub(&re.square().scale(p.tau_e * PI * PI))
                .sub(sei)
                .offset((p.eta_e + p.i_e_ext) / p.tau_e),
            ri.scale(p.j_ei).sub(sei).scale(1.0 / p.tau_si),
            ri.mul(vi)
                .scale(2.0 / p.tau_i)
                .offset(p.delta_i / (PI * p.tau_i * p.tau_i)),
            vi.square()
                .scale(1.0 / p.tau_i)
                .sub(&ri.square().scale(p.tau_i * PI * PI))
                .add(sie)
                .offset((p.eta_i + p.i_i_ext) / p.tau_i),
            re.scale(p.j_ie).sub(sie).scale(1.0 / p.tau_se),
        ]
    }

    fn jac<S: Arith>(&self, x: &[S]) -> Vec<S> {
        let p = &self.p;
        let (re, ve, ri, vi) = (&x[0], &x[1], &x[3], &x[4]);
        let c = |v: f64| x[0].constant_like(v);
        let z = || c(0.0);
        vec![
            // r_e row
            ve.scale(2.0 / p.tau_e),
            re.scale(2.0 / p.tau_e),
            z(),
            z(),
            z(),
            z(),
            // V_e row
            re.scale(-2.0 * p.tau_e * PI * PI),
            ve.scale(2.0 / p.tau_e),
            c(-1.0),
            z(),
            z(),
            z(),
            // S_ei row
            z(),
            z(),
            c(-1.0 / p.tau_si),
            c(p.j_ei / p.tau_si),
            z(),
            z(),
            // r_i row
            z(),
            z(),
            z(),
            vi.scale(2.0 / p.tau_i),
            ri.scale(2.0 / p.tau_i),
            z(),
            // V_i row
            z(),
            z(),
            z(),
            ri.scale(-2.0 * p.tau_i * PI * PI),
            vi.scale(2.0 / p.tau_i),
            c(1.0),
            // S_ie row
            c(p.j_ie / p.tau_se),
            z(),
            z(),
            z(),
            z(),
            c(-1.0 / p.tau_se),
        ]
    }
}

impl VectorField for EiModel {
    fn dim(&self) -> usize {
        6
    }
    fn name(&self) -> &str {
        "ei"
    }
    fn component_names(&self) -> Vec<String> {
        ["r_e", "V_e", "S_ei", "r_i", "V_i", "S_ie"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }
    fn parameters(&self) -> Vec<(String, f64)> {
        EiParameters::names()
            .iter()
            .zip(self.p.values())
            .map(|(n, v)| (n.to_string(), v))
            .collect()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.rhs(x));
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.jac(x));
    }
    fn field_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.rhs(x)
    }
    fn jacobian_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.jac(x)
    }
}

/// Planar oscillator x' = x - y - r²x, y' = x + y - r²y with the unit circle
/// as its cycle.
#[derive(Clone, Debug, Default)]
pub struct OracleModel;

pub fn make_oracle_model() -> OracleModel {
    OracleModel
}

impl OracleModel {
    fn rhs<S: Arith>(&self, v: &[S]) -> Vec<S> {
        let (x, y) = (&v[0], &v[1]);
        let r2 = x.square().add(&y.square());
        vec![x.sub(y).sub(&r2.mul(x)), x.add(y).sub(&r2.mul(y))]
    }

    fn jac<S: Arith>(&self, v: &[S]) -> Vec<S> {
        let (x, y) = (&v[0], &v[1]);
        let xx = x.square();
        let yy = y.square();
        let xy = x.mul(y);
        vec![
            xx.scale(-3.0).sub(&yy).offset(1.0),
            xy.scale(-2.0).offset(-1.0),
            xy.scale(-2.0).offset(1.0),
            yy.scale(-3.0).sub(&xx).offset(1.0),
        ]
    }
}

impl VectorField for OracleModel {
    fn dim(&self) -> usize {
        2
    }
    fn name(&self) -> &str {
        "oracle"
    }
    fn component_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into()]
    }
    fn parameters(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.rhs(x));
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.jac(x));
    }
    fn field_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.rhs(x)
    }
    fn jacobian_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.jac(x)
    }
}

/// Looks up a built-in model and applies parameter overrides.
pub fn model_by_name(name: &str, overrides: &[(String, f64)]) -> Result<Arc<dyn VectorField>> {
    match name {
        "ei" => {
            let mut p = EiParameters::default();
            for (k, v) in overrides {
                p.set(k, *v)?;
            }
            Ok(Arc::new(make_ei_model(p)?))
        }
        "oracle" => {
            if let Some((k, _)) = overrides.first() {
                return Err(Error::Config(format!(
                    "oracle model has no parameter '{k}'"
                )));
            }
            Ok(Arc::new(make_oracle_model()))
        }
        other => Err(Error::Config(format!("unknown model '{other}'"))),
    }
}

/// Convenience wrapper returning X(x) as a new vector.
pub fn eval_field(model: &dyn VectorField, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.dim()];
    model.eval(x, &mut out);
    out
}

/// Convenience wrapper returning DX(x) as a row-major vector.
pub fn eval_jacobian(model: &dyn VectorField, x: &[f64]) -> Vec<f64> {
    let d = model.dim();
    let mut out = vec![0.0; d * d];
    model.jacobian(x, &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetMode {
    /// Order-n coefficients of X(K(θ, σ)).
    Field,
    /// Order-n coefficients of DXᵀ(K(θ, σ)), row-major d×d.
    JacobianTranspose,
}

/// Composes the model with a Fourier-Taylor argument.
///
/// With `dealias` the products are formed on a grid twice as fine and
/// truncated back to the input bandwidth.
pub fn jet_compose(
    model: &dyn VectorField,
    k: &FourierTaylor,
    mode: JetMode,
    dealias: bool,
) -> Result<FourierTaylor> {
    let d = model.dim();
    if k.arity() != d {
        return Err(Error::InvalidInput(format!(
            "model dimension {d} but argument arity {}",
            k.arity()
        )));
    }
    let len = k.len();
    let work_len = if dealias { 2 * len } else { len };
    let mut grids: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k.order() + 1);
    for term in k.terms() {
        let t = if dealias {
            term.resampled(work_len)?
        } else {
            term.clone()
        };
        grids.push(t.real_samples());
    }
    let jets: Vec<Jet> = (0..d)
        .map(|i| Jet::new(grids.iter().map(|g| g[i].clone()).collect()))
        .collect();
    let out: Vec<Jet> = match mode {
        JetMode::Field => model.field_jet(&jets),
        JetMode::JacobianTranspose => {
            let j = model.jacobian_jet(&jets);
            let mut t = Vec::with_capacity(d * d);
            for r in 0..d {
                for c in 0..d {
                    t.push(j[c * d + r].clone());
                }
            }
            t
        }
    };
    let arity = out.len();
    let per_order: Vec<Vec<Vec<f64>>> = out.into_iter().map(|j| j.into_coefficients()).collect();
    let mut terms = Vec::with_capacity(k.order() + 1);
    for n in 0..=k.order() {
        let rows: Vec<Vec<f64>> = (0..arity).map(|i| per_order[i][n].clone()).collect();
        let mut s = FourierSeries::from_real_samples(&rows, k.period())?;
        if dealias {
            s = s.resampled(len)?;
        }
        terms.push(s);
    }
    FourierTaylor::new(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ei_field_at_origin() {
        let m = make_ei_model(EiParameters::default()).unwrap();
        let f = eval_field(&m, &[0.0; 6]);
        assert_relative_eq!(f[0], 1.0 / (100.0 * PI), max_relative = 1e-15);
    }

    #[test]
    fn ei_coupling_entry_is_minus_one() {
        let m = make_ei_model(EiParameters::default()).unwrap();
        let j = eval_jacobian(&m, &[0.0; 6]);
        assert_eq!(j[6 + 2], -1.0);
    }

    #[test]
    fn ei_rejects_bad_time_constant() {
        let p = EiParameters {
            tau_si: 0.0,
            ..Default::default()
        };
        assert!(make_ei_model(p).is_err());
        let p = EiParameters {
            delta_i: -1.0,
            ..Default::default()
        };
        assert!(make_ei_model(p).is_err());
    }

    #[test]
    fn oracle_tangent_speed_on_cycle() {
        let f = eval_field(&OracleModel, &[1.0, 0.0]);
        assert_eq!(f, vec![0.0, 1.0]);
    }

    #[test]
    fn unknown_model_name() {
        assert!(model_by_name("vdp", &[]).is_err());
        assert!(model_by_name("ei", &[("tau_x".into(), 1.0)]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = FourierSeries::zeros(3, 8, 1.0).unwrap();
        let k = FourierTaylor::new(vec![s]).unwrap();
        assert!(jet_compose(&OracleModel, &k, JetMode::Field, false).is_err());
    }
}
