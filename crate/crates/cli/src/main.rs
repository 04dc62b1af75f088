use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slowfold::config::RunConfig;
use slowfold::error::Error;
use slowfold::export::{json_bytes, write_file, ExportFormat, ExportSelector};
use slowfold::pipeline::{compute, export_artifacts, manifest_for, run_stages, RunManifest, Stage};

const EXIT_THRESHOLD: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

/// Slow attracting manifolds and response functions of limit cycles.
#[derive(Parser)]
#[command(name = "slowfold", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline, with plot tables.
    Run(Common),
    /// Periodic orbit only.
    Cycle(Common),
    /// Cycle, Floquet spectrum and resonance screen.
    Floquet(Common),
    /// Through the slow manifold expansion.
    Manifold(Common),
    /// Through the response functions.
    Response(Common),
    /// Through the validation suite.
    Validate(Common),
    /// Writes selected artifacts in one format.
    Export {
        #[command(flatten)]
        common: Common,
        /// all, cycle, spectrum, frames, manifold, response or validation.
        #[arg(long, default_value = "all")]
        what: ExportSelector,
        /// csv, json or plotdata.
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        Error::Config(_) | Error::InvalidInput(_) => EXIT_THRESHOLD,
        _ => EXIT_NUMERICAL,
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

fn report(manifest: &RunManifest) {
    let stages: Vec<&str> = manifest.completed.iter().map(|s| s.as_str()).collect();
    println!("stages: {}", stages.join(", "));
    if let Some(t) = manifest.period {
        println!("period: {t:.15}");
    }
    if let Some(s) = &manifest.spectrum {
        for (j, l) in s.exponents.iter().enumerate() {
            println!("lambda_{j}: {:.10} {:+.10}i", l.re, l.im);
        }
    }
    println!("files: {}", manifest.files.len());
    for f in manifest.threshold_failures() {
        println!("threshold failure: {f}");
    }
}

fn stage_of(what: ExportSelector) -> Stage {
    match what {
        ExportSelector::Cycle => Stage::Cycle,
        ExportSelector::Spectrum => Stage::Floquet,
        ExportSelector::Frames => Stage::Frames,
        ExportSelector::Manifold => Stage::Manifold,
        ExportSelector::Response => Stage::Response,
        ExportSelector::All | ExportSelector::Validation => Stage::Validation,
    }
}

fn execute(cli: Cli) -> Result<u8, Error> {
    let (common, until, plotdata) = match &cli.command {
        Command::Run(c) => (c, Stage::Validation, true),
        Command::Cycle(c) => (c, Stage::Cycle, false),
        Command::Floquet(c) => (c, Stage::Floquet, false),
        Command::Manifold(c) => (c, Stage::Manifold, false),
        Command::Response(c) => (c, Stage::Response, false),
        Command::Validate(c) => (c, Stage::Validation, false),
        Command::Export {
            common,
            what,
            format,
        } => {
            let config = load(common)?;
            let dir = &config.output.dir;
            std::fs::create_dir_all(dir)?;
            let (art, failure) = compute(&config, stage_of(*what), Some(dir));
            if let Some((_, e)) = failure {
                return Err(e);
            }
            let files = export_artifacts(&config, &art, *what, *format, dir)?;
            if *format == ExportFormat::Json && what.includes(ExportSelector::All) {
                let mut manifest = manifest_for(&config, &art, None);
                manifest.files = files.clone();
                write_file(dir, "manifest.json", &json_bytes(&manifest)?)?;
            }
            for f in &files {
                println!("{}  {}", f.sha256, f.path);
            }
            return Ok(0);
        }
    };
    let config = load(common)?;
    let manifest = run_stages(&config, until, &config.output.dir, plotdata)?;
    report(&manifest);
    Ok(if manifest.threshold_failures().is_empty() {
        0
    } else {
        EXIT_THRESHOLD
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
