use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eoslab::cli::{read_manifest, sha256_hex, ExperimentConfig, MANIFEST_NAME};

fn eoslab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eoslab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EOSLAB_OUT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_HEATMAP: &str = r#"
kind = "quad-heatmap"
seed = 5
trials = 8

[x]
count = 7

[y]
count = 5
"#;

const SMALL_TRAIN: &str = r#"
kind = "train"
steps = 40
log_every = 10
hidden = [8]

[data]
per_class = 16
test_per_class = 8
"#;

#[test]
fn heatmap_writes_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.toml"), SMALL_HEATMAP).unwrap();
    let o = eoslab(&["run", "h.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");

    let m = read_manifest(&out).unwrap();
    assert_eq!(m.kind, "quad-heatmap");
    assert_eq!(m.seed, 5);
    let names: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    assert_eq!(names, ["config.toml", "heatmap.csv", "theory_curve.csv", "summary.json"]);
    for a in &m.artifacts {
        let bytes = fs::read(out.join(&a.path)).unwrap();
        assert_eq!(a.bytes, bytes.len() as u64);
        assert_eq!(a.sha256, sha256_hex(&bytes));
    }

    let heat = fs::read_to_string(out.join("heatmap.csv")).unwrap();
    let lines: Vec<&str> = heat.lines().collect();
    assert_eq!(lines.len(), 1 + 5);
    for l in &lines {
        assert_eq!(l.split(',').count(), 1 + 7);
    }
    assert!(lines[0].starts_with("lambda\\inverse_variance,"));
    for l in &lines[1..] {
        for cell in l.split(',').skip(1) {
            let p: f64 = cell.parse().unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }
    let theory = fs::read_to_string(out.join("theory_curve.csv")).unwrap();
    assert_eq!(theory.lines().next().unwrap(), "inverse_variance,sigma2,theory_lambda,contour_lambda");
    assert_eq!(theory.lines().count(), 1 + 7);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.toml"), SMALL_HEATMAP).unwrap();
    assert!(eoslab(&["quad-heatmap", "h.toml", "--out", "a", "--threads", "1"], dir.path()).status.success());
    let o = eoslab(&["run", "a/config.toml", "--out", "b", "--threads", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let a = read_manifest(&dir.path().join("a")).unwrap();
    let b = read_manifest(&dir.path().join("b")).unwrap();
    assert_eq!(a.artifacts, b.artifacts);
    assert_eq!(a.config, b.config);
    assert_eq!((a.threads, b.threads), (1, 3));
}

#[test]
fn zero_variance_vgd_matches_gd_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.toml"), SMALL_TRAIN).unwrap();
    let gd = eoslab(&["train", "t.toml", "--out", "gd", "--set", "optimizer=\"gd\""], dir.path());
    assert!(gd.status.success(), "{}", stderr(&gd));
    let vgd = eoslab(
        &["train", "t.toml", "--out", "vgd", "--set", "optimizer=\"vgd\"", "--set", "sigma2=0.0", "--set", "n_samples=3"],
        dir.path(),
    );
    assert!(vgd.status.success(), "{}", stderr(&vgd));
    for f in ["trajectory.jsonl", "trajectory.csv"] {
        let a = fs::read(dir.path().join("gd").join(f)).unwrap();
        let b = fs::read(dir.path().join("vgd").join(f)).unwrap();
        assert!(!a.is_empty());
        assert!(a == b, "{f} differs between GD and zero-variance VGD");
    }
}

#[test]
fn env_var_sets_default_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_eoslab"))
        .args(["escape", "--set", "runs=3", "--set", "steps=20"])
        .current_dir(dir.path())
        .env("EOSLAB_OUT", dir.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("root/escape").join(MANIFEST_NAME).is_file());
    assert!(dir.path().join("root/escape/escape.csv").is_file());
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "kind = \"train\"\nrho = 0.1\nstepz = 4\n").unwrap();
    let o = eoslab(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("bad.toml:3"), "{e}");
    assert!(e.contains("stepz"), "{e}");

    let o = eoslab(&["train", "--set", "rho=-1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rho"));
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = eoslab(&["train", "--set", "data.csv=\"missing.csv\"", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn divergence_is_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.toml"), SMALL_TRAIN).unwrap();
    let o = eoslab(&["train", "t.toml", "--set", "rho=50.0", "--set", "steps=200", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = read_manifest(&dir.path().join("o")).unwrap();
    assert!(m.flags.iter().any(|f| f == "divergent"), "{:?}", m.flags);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["diverged"], serde_json::Value::Bool(true));
}

#[test]
fn validate_prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.toml"), SMALL_TRAIN).unwrap();
    let o = eoslab(&["validate", "t.toml", "--set", "n_samples=0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("violations:\n  - "), "{text}");
    let resolved = text.split_once("resolved config:\n").unwrap().1;
    let c = ExperimentConfig::from_toml_str(resolved).unwrap();
    assert_eq!(c.kind().name(), "train");
    assert!(resolved.contains("eigen_max_iters = 200"));

    let o = eoslab(&["validate", "t.toml"], dir.path());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("violations: none\n"));
}

#[test]
fn shipped_configs_resolve_cleanly() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let req = eoslab::cli::ConfigRequest::default().with_file(&path).unwrap();
            let loaded = eoslab::cli::load(&req).unwrap();
            assert!(loaded.config.violations().is_empty(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
