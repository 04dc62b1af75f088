//! Runs the stages in order from a [`RunConfig`], writes their artifacts and
//! a manifest with checksums.
//!
//! Stages: cycle → floquet (with the resonance screen) → frames (with the
//! adjoint cross-check) → manifold → response → validation. A failing stage
//! stops the run; the artifacts of the completed stages and a manifest naming
//! the failed stage are still written.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::cycle::{
    check_resonances, find_cycle, floquet_spectrum, Cycle, FloquetAnalysis, FloquetClass,
    ResonanceEntry, ResonanceReport,
};
use crate::error::{Error, Result};
use crate::export::{
    accuracy_csv, curves_long, frame_csv, json_bytes, series_csv, sha256_hex, surface_long,
    write_file, ExportFormat, ExportSelector, FileEntry,
};
use crate::frames::{
    biorthogonality_defect, build_adjoint_frame, build_bundle_frame, cross_check_adjoint_frame,
    frame_residual, AdjointCrossCheck, Frame, FrameResidual, Representation,
};
use crate::manifold::{
    expand_slow_manifold, next_manifold_term, ManifoldDiagnostics, ManifoldExpansion,
    ManifoldSettings,
};
use crate::model::{model_by_name, VectorField};
use crate::response::{
    expand_response_functions, ResponseDiagnostics, ResponseExpansion, ResponseSettings,
};
use crate::series::FourierSeries;
use crate::validation::{run_validation, DirectionalReport, OrthogonalityReport, ValidationReport};

pub const TOOL_VERSION: &str = concat!("slowfold ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Cycle,
    Floquet,
    Frames,
    Manifold,
    Response,
    Validation,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Cycle,
        Stage::Floquet,
        Stage::Frames,
        Stage::Manifold,
        Stage::Response,
        Stage::Validation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Cycle => "cycle",
            Stage::Floquet => "floquet",
            Stage::Frames => "frames",
            Stage::Manifold => "manifold",
            Stage::Response => "response",
            Stage::Validation => "validation",
        }
    }
}

/// Frame checks recorded by the frames stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameChecks {
    pub condition: f64,
    pub imaginary_defect: f64,
    pub scales: Vec<f64>,
    pub bundle_residual: FrameResidual,
    pub adjoint_residual: FrameResidual,
    pub biorthogonality: f64,
    /// (column, bundle defect, adjoint defect) of f(θ+1) = −f(θ) for the
    /// 2-periodic real columns.
    pub antiperiodicity: Vec<(usize, f64, f64)>,
    pub cross_check: AdjointCrossCheck,
}

/// Everything computed by a run, stage by stage.
pub struct Artifacts {
    pub model: Arc<dyn VectorField>,
    pub cycle: Option<Cycle>,
    /// True when the cycle came from an earlier run's artifact.
    pub cycle_loaded: bool,
    pub analysis: Option<FloquetAnalysis>,
    pub resonance: Option<ResonanceReport>,
    pub bundle: Option<Frame>,
    pub adjoint: Option<Frame>,
    pub frame_checks: Option<FrameChecks>,
    pub manifold: Option<ManifoldExpansion>,
    /// K_{L+1}, used by the orthogonality relations at n = L.
    pub next_term: Option<FourierSeries>,
    pub response: Option<ResponseExpansion>,
    pub validation: Option<ValidationReport>,
}

/// Serialized cycle, reloaded by later subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// SHA-256 of the model, integrator and cycle settings that produced it.
    pub fingerprint: String,
    pub anchor: Vec<f64>,
    pub period: f64,
    pub closure_residual: f64,
    pub newton_iterations: usize,
    pub newton_correction: f64,
    /// Fourier coefficients of γ per component, FFT order; kept instead of
    /// samples so a reload reproduces the cycle bit for bit.
    pub coefficients: Vec<Vec<num_complex::Complex64>>,
}

impl CycleRecord {
    pub fn new(cycle: &Cycle, fingerprint: String) -> Self {
        Self {
            fingerprint,
            anchor: cycle.anchor.clone(),
            period: cycle.period,
            closure_residual: cycle.closure_residual,
            newton_iterations: cycle.newton_iterations,
            newton_correction: cycle.newton_correction,
            coefficients: (0..cycle.samples.arity())
                .map(|i| cycle.samples.coefficients(i).to_vec())
                .collect(),
        }
    }

    pub fn to_cycle(&self) -> Result<Cycle> {
        Ok(Cycle {
            anchor: self.anchor.clone(),
            period: self.period,
            samples: FourierSeries::from_coefficients(self.coefficients.clone(), 1.0)?,
            closure_residual: self.closure_residual,
            newton_iterations: self.newton_iterations,
            newton_correction: self.newton_correction,
        })
    }
}

/// Identifies the inputs of the cycle stage.
pub fn cycle_fingerprint(config: &RunConfig) -> Result<String> {
    let key = (&config.model, &config.integrator, &config.cycle);
    Ok(sha256_hex(&serde_json::to_vec(&key)?))
}

fn load_cycle(config: &RunConfig, dir: &Path) -> Option<Cycle> {
    let text = std::fs::read(dir.join("cycle.json")).ok()?;
    let rec: CycleRecord = serde_json::from_slice(&text).ok()?;
    if rec.fingerprint != cycle_fingerprint(config).ok()? {
        return None;
    }
    rec.to_cycle().ok()
}

/// Runs the stages up to and including `until`. On failure returns the
/// partial artifacts together with the failing stage and its error.
pub fn compute(
    config: &RunConfig,
    until: Stage,
    reuse_from: Option<&Path>,
) -> (Artifacts, Option<(Stage, Error)>) {
    let model = match model_by_name(&config.model.name, &config.parameter_overrides()) {
        Ok(m) => m,
        Err(e) => {
            let placeholder: Arc<dyn VectorField> = Arc::new(crate::model::make_oracle_model());
            return (empty_artifacts(placeholder), Some((Stage::Cycle, e)));
        }
    };
    let mut art = empty_artifacts(model.clone());
    let m = model.as_ref();
    let integ = &config.integrator;
    let ex = &config.expansion;

    for stage in Stage::ALL {
        if stage > until {
            break;
        }
        let result: Result<()> = (|| {
            match stage {
                Stage::Cycle => {
                    if let Some(c) = reuse_from.and_then(|d| load_cycle(config, d)) {
                        art.cycle = Some(c);
                        art.cycle_loaded = true;
                    } else {
                        art.cycle = Some(find_cycle(m, &config.cycle, integ)?);
                    }
                }
                Stage::Floquet => {
                    let cycle = art.cycle.as_ref().expect("cycle stage ran");
                    let fa = floquet_spectrum(m, cycle, &config.floquet, integ)?;
                    let report = check_resonances(
                        &fa.spectrum,
                        ex.resonance_order,
                        ex.resonance_tol,
                        cycle.grid_len(),
                    )?;
                    art.analysis = Some(fa);
                    art.resonance = Some(report);
                    art.resonance
                        .as_ref()
                        .expect("set above")
                        .ensure_nonresonant()?;
                }
                Stage::Frames => {
                    let cycle = art.cycle.as_ref().expect("cycle stage ran");
                    let fa = art.analysis.as_ref().expect("floquet stage ran");
                    let bundle = build_bundle_frame(m, cycle, fa, ex.representation, &ex.scales)?;
                    let adjoint = build_adjoint_frame(&bundle)?;
                    let antiperiodicity = (0..bundle.dim())
                        .filter_map(|j| {
                            Some((
                                j,
                                bundle.antiperiodicity_defect(j)?,
                                adjoint.antiperiodicity_defect(j)?,
                            ))
                        })
                        .collect();
                    let checks = FrameChecks {
                        condition: bundle.condition,
                        imaginary_defect: bundle.imaginary_defect,
                        scales: bundle.scales.clone(),
                        bundle_residual: frame_residual(m, cycle, &bundle)?,
                        adjoint_residual: frame_residual(m, cycle, &adjoint)?,
                        biorthogonality: biorthogonality_defect(&bundle, &adjoint)?,
                        antiperiodicity,
                        cross_check: cross_check_adjoint_frame(
                            m,
                            cycle,
                            fa,
                            &bundle,
                            &adjoint,
                            config.validation.duality_segments,
                            integ,
                        )?,
                    };
                    art.bundle = Some(bundle);
                    art.adjoint = Some(adjoint);
                    art.frame_checks = Some(checks);
                }
                Stage::Manifold => {
                    let settings = ManifoldSettings {
                        order: ex.order,
                        small_divisor_tol: ex.small_divisor_tol,
                        dealias: ex.dealias,
                    };
                    let (bundle, adjoint) =
                        (art.bundle.as_ref().unwrap(), art.adjoint.as_ref().unwrap());
                    let slow = art.analysis.as_ref().unwrap().spectrum.slow_exponent()?;
                    let man = expand_slow_manifold(
                        m,
                        art.cycle.as_ref().unwrap(),
                        bundle,
                        adjoint,
                        slow,
                        &settings,
                    )?;
                    art.next_term =
                        Some(next_manifold_term(m, &man, bundle, adjoint, &settings)?.term);
                    art.manifold = Some(man);
                }
                Stage::Response => {
                    let settings = ResponseSettings {
                        order: ex.order,
                        small_divisor_tol: ex.small_divisor_tol,
                        solvability_tol: ex.solvability_tol,
                        dealias: ex.dealias,
                    };
                    art.response = Some(expand_response_functions(
                        m,
                        art.manifold.as_ref().unwrap(),
                        art.bundle.as_ref().unwrap(),
                        art.adjoint.as_ref().unwrap(),
                        &settings,
                    )?);
                }
                Stage::Validation => {
                    art.validation = Some(run_validation(
                        m,
                        art.manifold.as_ref().unwrap(),
                        art.next_term.as_ref().unwrap(),
                        art.response.as_ref().unwrap(),
                        &config.validation.settings(),
                        integ,
                    )?);
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            return (art, Some((stage, e.in_stage(stage.as_str()))));
        }
    }
    (art, None)
}

fn empty_artifacts(model: Arc<dyn VectorField>) -> Artifacts {
    Artifacts {
        model,
        cycle: None,
        cycle_loaded: false,
        analysis: None,
        resonance: None,
        bundle: None,
        adjoint: None,
        frame_checks: None,
        manifold: None,
        next_term: None,
        response: None,
        validation: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub multipliers: Vec<num_complex::Complex64>,
    pub exponents: Vec<num_complex::Complex64>,
    pub lyapunov: Vec<f64>,
    pub classes: Vec<FloquetClass>,
    pub slow_index: usize,
    pub trivial_deviation: f64,
    pub eigenvector_condition: f64,
    pub determinant_residual: f64,
    pub liouville_residual: f64,
    pub eigen_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSummary {
    pub max_order: usize,
    pub tolerance: f64,
    pub flagged: usize,
    pub smallest: Option<ResonanceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub cycle_residual: f64,
    pub tolerances: Vec<f64>,
    /// Smallest σ extent over θ and both sides, per tolerance.
    pub min_extent: Vec<f64>,
    pub saturated: Vec<usize>,
    pub nonmonotone: Vec<usize>,
    pub nested: bool,
    pub orthogonality: OrthogonalityReport,
    pub directional: DirectionalReport,
    pub conjugacy_max: f64,
    pub phase_drift_max: f64,
    pub decay_max: f64,
    pub amplitude_error_max: f64,
    pub inversion_failures: usize,
    /// Checks that exceeded their configured thresholds.
    pub threshold_failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedStage {
    pub stage: Stage,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: RunConfig,
    pub model: String,
    pub parameters: Vec<(String, f64)>,
    pub completed: Vec<Stage>,
    pub failed: Option<FailedStage>,
    pub cycle_reused: bool,
    pub period: Option<f64>,
    pub cycle_closure: Option<f64>,
    pub spectrum: Option<SpectrumTable>,
    pub resonance: Option<ResonanceSummary>,
    pub frames: Option<FrameChecks>,
    pub manifold: Option<ManifoldDiagnostics>,
    pub response: Option<ResponseDiagnostics>,
    pub validation: Option<ValidationSummary>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    /// Validation checks over threshold; empty when validation did not run.
    pub fn threshold_failures(&self) -> &[String] {
        self.validation
            .as_ref()
            .map(|v| v.threshold_failures.as_slice())
            .unwrap_or(&[])
    }
}

fn threshold_failures(report: &ValidationReport, config: &RunConfig) -> Vec<String> {
    let v = &config.validation;
    let mut out = Vec::new();
    let strictest = report.accuracy.tolerances.len() - 1;
    if !report.accuracy.is_two_sided(strictest) {
        out.push(format!(
            "accuracy domain at {:e} is empty on one side for some θ",
            report.accuracy.tolerances[strictest]
        ));
    }
    if !report.accuracy.is_nested() {
        out.push("accuracy domains are not nested".into());
    }
    let checks = [
        (
            "orthogonality",
            report.orthogonality.max(),
            v.max_orthogonality,
        ),
        (
            "directional phase",
            report.directional.phase_max,
            v.max_directional,
        ),
        (
            "directional amplitude",
            report.directional.amplitude_max,
            v.max_directional,
        ),
        (
            "flow conjugacy",
            report.trajectory.conjugacy_max,
            v.max_conjugacy,
        ),
        (
            "amplitude decay",
            report.trajectory.amplitude_error_max,
            v.max_decay,
        ),
    ];
    for (name, value, limit) in checks {
        if !(value <= limit) {
            out.push(format!("{name}: {value:e} > {limit:e}"));
        }
    }
    if report.trajectory.inversion_failures > 0 {
        out.push(format!(
            "{} manifold inversions failed",
            report.trajectory.inversion_failures
        ));
    }
    out
}

/// Builds the manifest from the artifacts; `files` is filled by the caller.
pub fn manifest_for(
    config: &RunConfig,
    art: &Artifacts,
    failure: Option<&(Stage, Error)>,
) -> RunManifest {
    let completed: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| match s {
            Stage::Cycle => art.cycle.is_some(),
            Stage::Floquet => {
                art.analysis.is_some() && failure.map(|f| f.0) != Some(Stage::Floquet)
            }
            Stage::Frames => art.frame_checks.is_some(),
            Stage::Manifold => art.manifold.is_some(),
            Stage::Response => art.response.is_some(),
            Stage::Validation => art.validation.is_some(),
        })
        .collect();
    RunManifest {
        tool: TOOL_VERSION.into(),
        config: config.clone(),
        model: art.model.name().to_string(),
        parameters: art.model.parameters(),
        completed,
        failed: failure.map(|(s, e)| FailedStage {
            stage: *s,
            error: e.to_string(),
        }),
        cycle_reused: art.cycle_loaded,
        period: art.cycle.as_ref().map(|c| c.period),
        cycle_closure: art.cycle.as_ref().map(|c| c.closure_residual),
        spectrum: art.analysis.as_ref().map(|fa| SpectrumTable {
            multipliers: fa.spectrum.multipliers.clone(),
            exponents: fa.spectrum.exponents.clone(),
            lyapunov: fa.spectrum.lyapunov.clone(),
            classes: fa.spectrum.classes.clone(),
            slow_index: fa.spectrum.slow_index,
            trivial_deviation: fa.spectrum.trivial_deviation,
            eigenvector_condition: fa.spectrum.eigenvector_condition,
            determinant_residual: fa.determinant_residual,
            liouville_residual: fa.liouville_residual,
            eigen_residual: fa.eigen_residual,
        }),
        resonance: art.resonance.as_ref().map(|r| ResonanceSummary {
            max_order: r.max_order,
            tolerance: r.tolerance,
            flagged: r.flagged().count(),
            smallest: r.smallest_residual().cloned(),
        }),
        frames: art.frame_checks.clone(),
        manifold: art.manifold.as_ref().map(|m| m.diagnostics.clone()),
        response: art.response.as_ref().map(|r| r.diagnostics.clone()),
        validation: art.validation.as_ref().map(|v| ValidationSummary {
            cycle_residual: v.cycle_residual,
            tolerances: v.accuracy.tolerances.clone(),
            min_extent: (0..v.accuracy.tolerances.len())
                .map(|i| v.accuracy.min_extent(i))
                .collect(),
            saturated: v.accuracy.saturated.clone(),
            nonmonotone: v.accuracy.nonmonotone.clone(),
            nested: v.accuracy.is_nested(),
            orthogonality: v.orthogonality.clone(),
            directional: v.directional.clone(),
            conjugacy_max: v.trajectory.conjugacy_max,
            phase_drift_max: v.trajectory.phase_drift_max,
            decay_max: v.trajectory.decay_max,
            amplitude_error_max: v.trajectory.amplitude_error_max,
            inversion_failures: v.trajectory.inversion_failures,
            threshold_failures: threshold_failures(v, config),
        }),
        files: Vec::new(),
    }
}

/// Writes the artifacts selected by `what` in one format.
pub fn export_artifacts(
    config: &RunConfig,
    art: &Artifacts,
    what: ExportSelector,
    format: ExportFormat,
    dir: &Path,
) -> Result<Vec<FileEntry>> {
    let names = art.model.component_names();
    let mut files = Vec::new();
    let mut put = |rel: String, data: Vec<u8>| -> Result<()> {
        files.push(write_file(dir, &rel, &data)?);
        Ok(())
    };
    match format {
        ExportFormat::Json => {
            if what.includes(ExportSelector::Cycle) {
                if let Some(c) = &art.cycle {
                    put(
                        "cycle.json".into(),
                        json_bytes(&CycleRecord::new(c, cycle_fingerprint(config)?))?,
                    )?;
                }
            }
            if what.includes(ExportSelector::Spectrum) {
                if let Some(fa) = &art.analysis {
                    put("spectrum.json".into(), json_bytes(&fa.spectrum)?)?;
                }
                if let Some(r) = &art.resonance {
                    put("resonance.json".into(), json_bytes(r)?)?;
                }
            }
            if what.includes(ExportSelector::Frames) {
                if let Some(f) = &art.frame_checks {
                    put("frames.json".into(), json_bytes(f)?)?;
                }
            }
            if what.includes(ExportSelector::Manifold) {
                if let Some(m) = &art.manifold {
                    put("manifold.json".into(), json_bytes(&m.diagnostics)?)?;
                }
            }
            if what.includes(ExportSelector::Response) {
                if let Some(r) = &art.response {
                    put("response.json".into(), json_bytes(&r.diagnostics)?)?;
                }
            }
            if what.includes(ExportSelector::Validation) {
                if let Some(v) = &art.validation {
                    put("validation.json".into(), json_bytes(v)?)?;
                }
            }
        }
        ExportFormat::Csv => {
            if what.includes(ExportSelector::Cycle) {
                if let Some(c) = &art.cycle {
                    put(
                        "cycle.csv".into(),
                        series_csv(&names, &c.samples, true).into_bytes(),
                    )?;
                }
            }
            if what.includes(ExportSelector::Frames) {
                if let (Some(b), Some(a)) = (&art.bundle, &art.adjoint) {
                    put("frames/bundle.csv".into(), frame_csv(b).into_bytes())?;
                    put("frames/adjoint.csv".into(), frame_csv(a).into_bytes())?;
                }
            }
            if what.includes(ExportSelector::Manifold) {
                if let Some(m) = &art.manifold {
                    for (n, t) in m.k.terms().iter().enumerate() {
                        put(
                            format!("manifold/K_{n}.csv"),
                            series_csv(&names, t, true).into_bytes(),
                        )?;
                    }
                }
            }
            if what.includes(ExportSelector::Response) {
                if let Some(r) = &art.response {
                    for (n, t) in r.z.terms().iter().enumerate() {
                        put(
                            format!("response/Z_{n}.csv"),
                            series_csv(&names, t, true).into_bytes(),
                        )?;
                    }
                    for (n, t) in r.i.terms().iter().enumerate() {
                        put(
                            format!("response/I_{n}.csv"),
                            series_csv(&names, t, true).into_bytes(),
                        )?;
                    }
                }
            }
            if what.includes(ExportSelector::Validation) {
                if let Some(v) = &art.validation {
                    put(
                        "accuracy_domain.csv".into(),
                        accuracy_csv(&v.accuracy).into_bytes(),
                    )?;
                }
            }
        }
        ExportFormat::Plotdata => {
            if what.includes(ExportSelector::Frames) {
                if let Some((b, a)) = real_frames(config, art)? {
                    // One file per function: bundle columns, the iPRC and the iARCs.
                    for (j, col) in b.columns.iter().enumerate() {
                        put(
                            format!("plotdata/bundle_{j}.csv"),
                            series_csv(&names, col, true).into_bytes(),
                        )?;
                    }
                    for (j, col) in a.columns.iter().enumerate() {
                        let file = if j == 0 {
                            "iprc".to_string()
                        } else {
                            format!("iarc_{j}")
                        };
                        put(
                            format!("plotdata/{file}.csv"),
                            series_csv(&names, col, true).into_bytes(),
                        )?;
                    }
                }
            }
            if what.includes(ExportSelector::Manifold) {
                if let Some(m) = &art.manifold {
                    let c: Vec<(String, &FourierSeries)> =
                        m.k.terms()
                            .iter()
                            .enumerate()
                            .map(|(n, t)| (format!("K_{n}"), t))
                            .collect();
                    put(
                        "plotdata/manifold_orders.csv".into(),
                        curves_long(&names, &c).into_bytes(),
                    )?;
                }
            }
            if what.includes(ExportSelector::Response) {
                if let Some(r) = &art.response {
                    let c: Vec<(String, &FourierSeries)> =
                        r.z.terms()
                            .iter()
                            .enumerate()
                            .map(|(n, t)| (format!("Z_{n}"), t))
                            .chain(
                                r.i.terms()
                                    .iter()
                                    .enumerate()
                                    .map(|(n, t)| (format!("I_{n}"), t)),
                            )
                            .collect();
                    put(
                        "plotdata/response_orders.csv".into(),
                        curves_long(&names, &c).into_bytes(),
                    )?;
                }
            }
            if what.includes(ExportSelector::Validation) {
                if let (Some(m), Some(r), Some(v)) = (&art.manifold, &art.response, &art.validation)
                {
                    let stride = (m.k.len() / 128).max(1);
                    put(
                        "plotdata/manifold_surface.csv".into(),
                        surface_long(&names, m, r, &v.accuracy, 0, stride, 10).into_bytes(),
                    )?;
                }
            }
        }
    }
    Ok(files)
}

/// Real-representation frames for plotting, rebuilt when the run used the
/// complex one.
fn real_frames(config: &RunConfig, art: &Artifacts) -> Result<Option<(Frame, Frame)>> {
    let (Some(b), Some(a)) = (&art.bundle, &art.adjoint) else {
        return Ok(None);
    };
    if b.representation == Representation::Real {
        return Ok(Some((b.clone(), a.clone())));
    }
    let (cycle, fa) = (art.cycle.as_ref().unwrap(), art.analysis.as_ref().unwrap());
    let bundle = build_bundle_frame(
        art.model.as_ref(),
        cycle,
        fa,
        Representation::Real,
        &config.expansion.scales,
    )?;
    let adjoint = build_adjoint_frame(&bundle)?;
    Ok(Some((bundle, adjoint)))
}

/// Computes through `until`, writes CSV and JSON artifacts of the completed
/// stages (plus plot tables when `plotdata`), and the manifest. Returns the
/// manifest, or the failing stage's error after writing the partial one.
pub fn run_stages(
    config: &RunConfig,
    until: Stage,
    dir: &Path,
    plotdata: bool,
) -> Result<RunManifest> {
    std::fs::create_dir_all(dir)?;
    let (art, failure) = compute(config, until, Some(dir));
    let mut manifest = manifest_for(config, &art, failure.as_ref());
    let mut files = export_artifacts(config, &art, ExportSelector::All, ExportFormat::Json, dir)?;
    files.extend(export_artifacts(
        config,
        &art,
        ExportSelector::All,
        ExportFormat::Csv,
        dir,
    )?);
    if plotdata {
        files.extend(export_artifacts(
            config,
            &art,
            ExportSelector::All,
            ExportFormat::Plotdata,
            dir,
        )?);
    }
    manifest.files = files;
    write_file(dir, "manifest.json", &json_bytes(&manifest)?)?;
    match failure {
        Some((_, e)) => Err(e),
        None => Ok(manifest),
    }
}

/// The full pipeline into `config.output.dir`, plot tables included.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest> {
    run_stages(config, Stage::Validation, &config.output.dir, true)
}
