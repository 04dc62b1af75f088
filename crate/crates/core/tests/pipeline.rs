mod common;

use num_complex::Complex64;

use common::oracle_config;
use slowfold::config::RunConfig;
use slowfold::cycle::{check_resonances, FloquetSpectrum};
use slowfold::error::Error;
use slowfold::export::verify_files;
use slowfold::pipeline::{run_stages, RunManifest, Stage};

fn read_manifest(dir: &std::path::Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn manifest_checksums_verify() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_stages(&oracle_config(5, 256), Stage::Validation, dir.path(), true).unwrap();
    assert_eq!(manifest.completed, Stage::ALL.to_vec());
    assert!(manifest.failed.is_none());
    assert!(verify_files(dir.path(), &manifest.files)
        .unwrap()
        .is_empty());
    assert_eq!(read_manifest(dir.path()), manifest);
    let spectrum = manifest.spectrum.as_ref().unwrap();
    assert!((spectrum.exponents[1].re + 2.0).abs() < 1e-8);
    assert!(
        manifest.threshold_failures().is_empty(),
        "{:?}",
        manifest.threshold_failures()
    );
    // One CSV per manifold order, θ plus one column per component.
    for n in 0..=5 {
        let text = std::fs::read_to_string(dir.path().join(format!("manifold/K_{n}.csv"))).unwrap();
        assert!(text.starts_with("theta,x,y\n"));
        assert_eq!(text.lines().count(), 257);
    }
    for f in [
        "plotdata/iprc.csv",
        "plotdata/iarc_1.csv",
        "plotdata/manifold_surface.csv",
    ] {
        assert!(manifest.files.iter().any(|e| e.path == f), "{f} missing");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let config = oracle_config(5, 256);
    let ma = run_stages(&config, Stage::Validation, a.path(), true).unwrap();
    let mb = run_stages(&config, Stage::Validation, b.path(), true).unwrap();
    assert_eq!(ma.files, mb.files);
    // A rerun into the same directory reloads the stored cycle and still
    // reproduces every file.
    let mc = run_stages(&config, Stage::Validation, a.path(), true).unwrap();
    assert!(mc.cycle_reused && !ma.cycle_reused);
    assert_eq!(ma.files, mc.files);
}

#[test]
fn changed_config_does_not_reuse_the_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = oracle_config(3, 128);
    run_stages(&config, Stage::Cycle, dir.path(), false).unwrap();
    config.integrator.rtol *= 0.5;
    let m = run_stages(&config, Stage::Cycle, dir.path(), false).unwrap();
    assert!(!m.cycle_reused);
}

#[test]
fn flagged_resonance_aborts_and_keeps_the_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = oracle_config(5, 256);
    // |2λ_s − λ_s| = 2 falls under this tolerance.
    config.expansion.resonance_tol = 2.5;
    let err = run_stages(&config, Stage::Validation, dir.path(), false).unwrap_err();
    assert!(matches!(err.root(), Error::Resonance { .. }), "{err}");
    let manifest = read_manifest(dir.path());
    assert_eq!(manifest.failed.as_ref().unwrap().stage, Stage::Floquet);
    assert_eq!(manifest.completed, vec![Stage::Cycle]);
    assert!(manifest.resonance.as_ref().unwrap().flagged > 0);
    assert!(dir.path().join("cycle.csv").exists());
    assert!(verify_files(dir.path(), &manifest.files)
        .unwrap()
        .is_empty());
}

#[test]
fn synthetic_resonant_spectrum_names_the_multi_index() {
    let zero = Complex64::new(0.0, 0.0);
    let l1 = Complex64::new(-0.3, 0.0);
    let l2 = Complex64::new(-0.7, 0.0);
    // λ_3 = λ_1 + 2λ_2 exactly.
    let l3 = l1 + l2 * 2.0;
    let spectrum = FloquetSpectrum::from_exponents(10.0, vec![zero, l1, l2, l3]).unwrap();
    let report = check_resonances(&spectrum, 4, 1e-8, 512).unwrap();
    match report.ensure_nonresonant() {
        Err(Error::Resonance {
            multi_index,
            target,
            residual,
        }) => {
            assert_eq!((multi_index, target), (vec![1, 2, 0], 3));
            assert!(residual < 1e-12);
        }
        other => panic!("expected a resonance, got {other:?}"),
    }
    let clean = FloquetSpectrum::from_exponents(10.0, vec![zero, l1, l2, l3 + 0.01]).unwrap();
    assert!(check_resonances(&clean, 4, 1e-8, 512)
        .unwrap()
        .ensure_nonresonant()
        .is_ok());
}

#[test]
fn small_divisor_surfaces_with_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = oracle_config(4, 64);
    config.expansion.small_divisor_tol = 50.0;
    let err = run_stages(&config, Stage::Validation, dir.path(), false).unwrap_err();
    assert!(matches!(err.root(), Error::SmallDivisor { .. }), "{err}");
    assert!(err.to_string().starts_with("stage manifold"), "{err}");
    assert_eq!(
        read_manifest(dir.path()).failed.unwrap().stage,
        Stage::Manifold
    );
}

#[test]
fn config_file_and_environment() {
    let text =
        "[model]\nname = \"oracle\"\n[cycle]\ngrid_n = 128\nguess = [1.0, 0.0]\nrelax_time = 0.0\n";
    let c = RunConfig::from_toml_str_with_env(
        text,
        [("SLOWFOLD_EXPANSION__ORDER".to_string(), "3".to_string())],
    )
    .unwrap();
    assert_eq!(c.expansion.order, 3);
    assert_eq!(c.cycle.grid_n, 128);
    assert!(
        RunConfig::from_toml_str("[model]\nname = \"oracle\"\n[model.parameters]\nk = 1.0\n")
            .is_ok()
    );
    let dir = tempfile::tempdir().unwrap();
    let mut bad = oracle_config(3, 64);
    bad.model.parameters.insert("k".into(), 1.0);
    let err = run_stages(&bad, Stage::Cycle, dir.path(), false).unwrap_err();
    assert!(matches!(err.root(), Error::Config(_)));
}
