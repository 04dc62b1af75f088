use std::path::Path;
use std::process::Command;

const ORACLE: &str = "[model]\nname = \"oracle\"\n\n[cycle]\ngrid_n = 128\nguess = [1.0, 0.0]\nrelax_time = 0.0\n\n[floquet]\nsegments = 8\n\n[validation]\nduality_segments = 8\n\n[expansion]\norder = 4\n";

fn slowfold(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_slowfold"))
        .args(args)
        .current_dir(dir)
        .env_remove("SLOWFOLD_EXPANSION__ORDER")
        .output()
        .unwrap();
    let text =
        String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn write_config(dir: &Path, extra: &str) {
    std::fs::write(dir.join("run.toml"), format!("{ORACLE}{extra}")).unwrap();
}

#[test]
fn run_succeeds_and_writes_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let (code, text) = slowfold(dir.path(), &["run", "--config", "run.toml", "--out", "o"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("lambda_1: -2.0000000000"), "{text}");
    assert!(dir.path().join("o/manifest.json").exists());
    assert!(dir.path().join("o/plotdata/iprc.csv").exists());
}

#[test]
fn stage_subcommands_stop_where_asked() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    for (cmd, last) in [
        ("cycle", "cycle"),
        ("floquet", "floquet"),
        ("manifold", "manifold"),
        ("response", "response"),
        ("validate", "validation"),
    ] {
        let (code, text) = slowfold(dir.path(), &[cmd, "--config", "run.toml", "--out", cmd]);
        assert_eq!(code, 0, "{cmd}: {text}");
        let stages = text.lines().find(|l| l.starts_with("stages:")).unwrap();
        assert!(stages.ends_with(last), "{cmd}: {stages}");
    }
}

#[test]
fn export_selects_files() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let (code, text) = slowfold(
        dir.path(),
        &[
            "export", "--config", "run.toml", "--out", "e", "--what", "manifold", "--format", "csv",
        ],
    );
    assert_eq!(code, 0, "{text}");
    assert_eq!(text.lines().count(), 5, "{text}");
    assert!(text.lines().all(|l| l.contains("manifold/K_")));
    let (code, _) = slowfold(
        dir.path(),
        &["export", "--config", "run.toml", "--what", "figures"],
    );
    assert_eq!(code, 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = slowfold(dir.path(), &["run", "--config", "missing.toml"]);
    assert_eq!(code, 4);

    write_config(dir.path(), "\n[output]\nsurprise = 1\n");
    let (code, text) = slowfold(dir.path(), &["run", "--config", "run.toml"]);
    assert_eq!(code, 2, "{text}");

    std::fs::write(
        dir.path().join("run.toml"),
        ORACLE.replace("order = 4", "order = 4\nsmall_divisor_tol = 50.0"),
    )
    .unwrap();
    let (code, text) = slowfold(dir.path(), &["run", "--config", "run.toml", "--out", "x"]);
    assert_eq!(code, 3, "{text}");
    assert!(text.contains("small divisor"), "{text}");

    // A threshold no run can meet turns a completed run into a validation failure.
    std::fs::write(
        dir.path().join("run.toml"),
        ORACLE.replace(
            "duality_segments = 8",
            "duality_segments = 8\nmax_conjugacy = 0.0",
        ),
    )
    .unwrap();
    let (code, text) = slowfold(dir.path(), &["run", "--config", "run.toml", "--out", "y"]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("threshold failure: flow conjugacy"), "{text}");
}

#[test]
fn environment_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = Command::new(env!("CARGO_BIN_EXE_slowfold"))
        .args(["manifold", "--config", "run.toml", "--out", "o"])
        .current_dir(dir.path())
        .env("SLOWFOLD_EXPANSION__ORDER", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    for n in 0..=2 {
        assert!(dir.path().join(format!("o/manifold/K_{n}.csv")).exists());
    }
    assert!(!dir.path().join("o/manifold/K_3.csv").exists());
}
