use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_nonlocal-lab");

const ZERO_DATUM: &str = r#"
name = "zero"
kind = "supercritical"
kernel = { shape = "bump", radius = 1.0, dimension = 1 }
grid = { dimension = 1, half_length = 64.0, points = 512 }
datum = { form = "zero", alpha = 0.5 }
exponent = 6.0
times = { from = 1.0, to = 10.0, per_decade = 4 }
window = 2.0
"#;

const SMALL_LINEAR: &str = r#"
name = "small-linear"
kind = "linear-asymptotics"
kernel = { shape = "bump", radius = 1.0, dimension = 1 }
grid = { dimension = 1, half_length = 200.0, points = 4096 }
datum = { form = "regularized", amplitude = 0.5, alpha = 0.5 }
times = { from = 10.0, to = 100.0, per_decade = 4 }
window = 2.0
audits = []
"#;

const CROSSVAL: &str = r#"
name = "crossval"
kind = "solver-crossval"
kernel = { shape = "bump", radius = 1.0, dimension = 1 }
grid = { dimension = 1, half_length = 32.0, points = 256 }
datum = { form = "regularized", amplitude = 0.25, alpha = 0.5 }
exponent = 6.0
horizon = 0.25
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn lab(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("NONLOCAL_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_datum_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "zero.toml", ZERO_DATUM);
    let out = dir.path().join("out");
    let result = lab(&out, &["run", config.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let r = report(&out.join("zero/report.json"));
    assert_eq!(r["passed"], true);
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    for c in checks {
        assert_eq!(c["passed"], true, "{c}");
        assert_eq!(c["measured"], 0.0);
    }
}

#[test]
fn malformed_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (name, text) in [
        ("missing.toml", "name = \"m\"\nkind = \"supercritical\"\n"),
        ("subcritical.toml", &ZERO_DATUM.replace("exponent = 6.0", "exponent = 3.0")),
        ("unknown-check.toml", &format!("{ZERO_DATUM}\n[[checks]]\nname = \"nonsense\"\n")),
        ("wrong-dimension.toml", &ZERO_DATUM.replace("grid = { dimension = 1", "grid = { dimension = 2")),
        ("log-alpha.toml", &ZERO_DATUM.replace("\"supercritical\"", "\"log-case\"")),
        ("unknown-field.toml", &format!("colour = 1\n{ZERO_DATUM}")),
    ] {
        let config = write(dir.path(), name, text);
        let result = lab(&out, &["run", config.to_str().unwrap()]);
        assert_eq!(result.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&result.stderr).contains("invalid config"), "{name}");
        assert!(!out.exists(), "{name} left output behind");
    }
}

#[test]
fn empty_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(dir.path(), "empty.toml", "name = \"empty\"\nconfigs = []\n");
    let out = dir.path().join("out");
    let result = lab(&out, &["suite", suite.to_str().unwrap()]);
    assert!(result.status.success());
    let r = report(&out.join("empty.json"));
    assert_eq!(r["passed"], true);
    assert!(r["entries"].as_array().unwrap().is_empty());
}

#[test]
fn failing_check_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "zero.toml", ZERO_DATUM);
    let strict = format!("{CROSSVAL}\n[[checks]]\nname = \"picard_gap\"\ntolerance = 0.0\n");
    write(dir.path(), "crossval.toml", &strict);
    let suite = write(dir.path(), "suite.toml", "name = \"mixed\"\nconfigs = [\"zero.toml\", \"crossval.toml\"]\n");
    let out = dir.path().join("out");
    let result = lab(&out, &["suite", suite.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    let r = report(&out.join("mixed.json"));
    assert_eq!(r["passed"], false);
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries[0]["passed"], true);
    assert_eq!(entries[1]["passed"], false);
    let table = String::from_utf8_lossy(&result.stdout);
    assert!(table.contains("picard_gap") && table.contains("FAIL"));
}

#[test]
fn broken_config_in_suite_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(dir.path(), "suite.toml", "configs = [\"absent.toml\"]\n");
    let out = dir.path().join("out");
    let result = lab(&out, &["suite", suite.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    let r = report(&out.join("suite.json"));
    assert!(r["entries"][0]["error"].as_str().unwrap().contains("absent.toml"));
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "linear.toml", SMALL_LINEAR);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(lab(&a, &["--threads", "1", "run", config.to_str().unwrap()]).status.success());
    assert!(lab(&b, &["run", config.to_str().unwrap()]).status.success());
    let csv = "small-linear/linear_error.csv";
    assert_eq!(fs::read(a.join(csv)).unwrap(), fs::read(b.join(csv)).unwrap());
    let (ra, rb) = (report(&a.join("small-linear/report.json")), report(&b.join("small-linear/report.json")));
    assert_eq!(ra["provenance"]["config_sha256"], rb["provenance"]["config_sha256"]);
    assert_eq!(ra["checks"][0]["measured"], rb["checks"][0]["measured"]);
}

#[test]
fn one_record_per_declared_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{CROSSVAL}\n[[checks]]\nname = \"richardson_order\"\n\n[[checks]]\nname = \"contraction\"\n");
    let config = write(dir.path(), "crossval.toml", &text);
    let out = dir.path().join("out");
    let result = lab(&out, &["run", config.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stdout));
    let r = report(&out.join("crossval/report.json"));
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["richardson_order", "contraction"]);
    for c in r["checks"].as_array().unwrap() {
        assert!(c["runtime_seconds"].as_f64().unwrap() >= 0.0);
        assert!(!c["anchor"].as_str().unwrap().is_empty());
    }
}

#[test]
fn rerun_replaces_previous_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "zero.toml", ZERO_DATUM);
    let out = dir.path().join("out");
    fs::create_dir_all(out.join("zero")).unwrap();
    fs::write(out.join("zero/stale.csv"), "old").unwrap();
    assert!(lab(&out, &["run", config.to_str().unwrap()]).status.success());
    assert!(!out.join("zero/stale.csv").exists());
    let leftovers: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".staging"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn profile_command_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let result = Command::new(BIN)
        .args(["profile", "--alpha", "0.5", "--A", "1", "--diffusivity", "1", "--eta-max", "2", "--points", "11"])
        .env_remove("NONLOCAL_LAB_OUT")
        .output()
        .unwrap();
    assert!(result.status.success());
    let text = String::from_utf8(result.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "eta,f");
    assert_eq!(rows.len(), 12);

    let out = dir.path().join("p");
    let result = lab(&out, &["profile", "--alpha", "0.5", "--A", "1", "--diffusivity", "1", "--eta-max", "2"]);
    assert!(result.status.success());
    assert!(out.join("profile.csv").exists());

    let bad = lab(&out, &["profile", "--alpha", "1", "--A", "1", "--diffusivity", "1", "--eta-max", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn output_defaults_to_config_entry() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "zero.toml", &format!("output = \"results/z\"\n{ZERO_DATUM}"));
    let result = Command::new(BIN)
        .args(["run", config.to_str().unwrap()])
        .env_remove("NONLOCAL_LAB_OUT")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(result.status.success());
    assert!(dir.path().join("results/z/report.json").exists());
}
