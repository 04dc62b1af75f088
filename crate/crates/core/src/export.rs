//! Text artifacts: CSV tables of sampled functions, JSON documents and
//! long-format plot tables, each recorded with its SHA-256 checksum.
//!
//! CSV conventions: header row, comma separator, LF line endings, UTF-8,
//! every value printed with 17 significant digits (`{:.16e}`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::manifold::ManifoldExpansion;
use crate::response::ResponseExpansion;
use crate::series::FourierSeries;
use crate::validation::AccuracyDomain;

/// One written file, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Writes `contents` under `dir`, creating parent directories.
pub fn write_file(dir: &Path, rel: &str, contents: &[u8]) -> Result<FileEntry> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, contents)?;
    Ok(FileEntry {
        path: rel.to_string(),
        sha256: sha256_hex(contents),
        bytes: contents.len() as u64,
    })
}

/// Re-reads every entry and compares its checksum; returns the mismatches.
pub fn verify_files(dir: &Path, files: &[FileEntry]) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    for f in files {
        let path: PathBuf = dir.join(&f.path);
        match std::fs::read(&path) {
            Ok(data) if sha256_hex(&data) == f.sha256 => {}
            Ok(_) => bad.push(format!("{}: checksum mismatch", f.path)),
            Err(e) => bad.push(format!("{}: {e}", f.path)),
        }
    }
    Ok(bad)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn push_value(line: &mut String, x: f64) {
    let _ = write!(line, ",{x:.16e}");
}

/// θ, then one column per component. Complex series get `_re` and `_im`
/// columns unless `real_only`.
pub fn series_csv(names: &[String], series: &FourierSeries, real_only: bool) -> String {
    let samples = series.samples();
    let len = series.len();
    let mut out = String::from("theta");
    for n in names {
        if real_only {
            let _ = write!(out, ",{n}");
        } else {
            let _ = write!(out, ",{n}_re,{n}_im");
        }
    }
    out.push('\n');
    for m in 0..len {
        let theta = series.period() * m as f64 / len as f64;
        let mut line = format!("{theta:.16e}");
        for row in &samples {
            push_value(&mut line, row[m].re);
            if !real_only {
                push_value(&mut line, row[m].im);
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// θ, then entries q_i_j of the frame matrix, row-major; real and imaginary
/// parts for the complex representation.
pub fn frame_csv(frame: &Frame) -> String {
    let d = frame.dim();
    let real = frame.representation == crate::frames::Representation::Real;
    let mut out = String::from("theta");
    for i in 0..d {
        for j in 0..d {
            if real {
                let _ = write!(out, ",q_{i}_{j}");
            } else {
                let _ = write!(out, ",q_{i}_{j}_re,q_{i}_{j}_im");
            }
        }
    }
    out.push('\n');
    let samples: Vec<Vec<Vec<num_complex::Complex64>>> =
        frame.columns.iter().map(|c| c.samples()).collect();
    let len = frame.len();
    for m in 0..len {
        let theta = frame.period() * m as f64 / len as f64;
        let mut line = format!("{theta:.16e}");
        for i in 0..d {
            for col in &samples {
                push_value(&mut line, col[i][m].re);
                if !real {
                    push_value(&mut line, col[i][m].im);
                }
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// θ, then σ_max for σ ≥ 0 and |σ|_max for σ ≤ 0 per tolerance.
pub fn accuracy_csv(domain: &AccuracyDomain) -> String {
    let mut out = String::from("theta");
    for t in &domain.tolerances {
        let _ = write!(out, ",sigma_pos_{t:e},sigma_neg_{t:e}");
    }
    out.push('\n');
    for (m, theta) in domain.theta.iter().enumerate() {
        let mut line = format!("{theta:.16e}");
        for ti in 0..domain.tolerances.len() {
            push_value(&mut line, domain.positive[ti][m]);
            push_value(&mut line, domain.negative[ti][m]);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Long format `theta,curve,component,value` for a family of curves.
pub fn curves_long(names: &[String], curves: &[(String, &FourierSeries)]) -> String {
    let mut out = String::from("theta,curve,component,value\n");
    for (label, s) in curves {
        let samples = s.samples();
        let len = s.len();
        for m in 0..len {
            let theta = s.period() * m as f64 / len as f64;
            for (name, row) in names.iter().zip(&samples) {
                let _ = writeln!(out, "{theta:.16e},{label},{name},{:.16e}", row[m].re);
                if row[m].im != 0.0 {
                    let _ = writeln!(out, "{theta:.16e},{label},{name}_im,{:.16e}", row[m].im);
                }
            }
        }
    }
    out
}

/// Long format `theta,sigma,component,value` over the accuracy domain of one
/// tolerance: the manifold point, the phase gradient (`iprf_<name>`) and the
/// slow amplitude gradient (`iarf_<name>`).
pub fn surface_long(
    names: &[String],
    manifold: &ManifoldExpansion,
    response: &ResponseExpansion,
    domain: &AccuracyDomain,
    tol_index: usize,
    theta_stride: usize,
    sigma_points: usize,
) -> String {
    let mut out = String::from("theta,sigma,component,value\n");
    let len = domain.theta.len();
    let stride = theta_stride.max(1);
    let half = sigma_points.max(1);
    for m in (0..len).step_by(stride) {
        let theta = domain.theta[m];
        let lo = -domain.negative[tol_index][m];
        let hi = domain.positive[tol_index][m];
        let sigmas: Vec<f64> = (0..half)
            .map(|k| lo * (1.0 - k as f64 / half as f64))
            .chain((0..=half).map(|k| hi * k as f64 / half as f64))
            .collect();
        for sigma in sigmas {
            let x = manifold.evaluate(theta, sigma);
            let z = response.phase_gradient(theta, sigma);
            let i = response.amplitude_gradient(theta, sigma);
            for (prefix, vals) in [("", &x), ("iprf_", &z), ("iarf_", &i)] {
                for (name, v) in names.iter().zip(vals.iter()) {
                    let _ = writeln!(out, "{theta:.16e},{sigma:.16e},{prefix}{name},{v:.16e}");
                }
            }
        }
    }
    out
}

/// What `export` writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportSelector {
    All,
    Cycle,
    Spectrum,
    Frames,
    Manifold,
    Response,
    Validation,
}

impl FromStr for ExportSelector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Self::All,
            "cycle" => Self::Cycle,
            "spectrum" => Self::Spectrum,
            "frames" => Self::Frames,
            "manifold" => Self::Manifold,
            "response" => Self::Response,
            "validation" => Self::Validation,
            other => return Err(Error::Config(format!("unknown export selector '{other}'"))),
        })
    }
}

impl ExportSelector {
    pub fn includes(self, other: ExportSelector) -> bool {
        self == ExportSelector::All || self == other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
    Plotdata,
}

impl FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "csv" => Self::Csv,
            "json" => Self::Json,
            "plotdata" => Self::Plotdata,
            other => return Err(Error::Config(format!("unknown export format '{other}'"))),
        })
    }
}
