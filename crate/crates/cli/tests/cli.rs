use std::path::Path;
use std::process::{Command, Output};

const ZERO: &str = r#"
[geometry]
lx = 1.0
ly = 1.0
depth = 1.0
nx = 4
ny = 4
nz = 4

[physics]
nu = 1.0
mu = 0.3

[numerics]
dt = 0.01
t_end = 0.1
"#;

fn fluidplate(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluidplate"))
        .args(args)
        .env("FLUIDPLATE_OUTPUT_DIR", out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_config_gives_eleven_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", ZERO);
    let out = fluidplate(&["simulate", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for r in rows {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols.len(), 15);
        for c in &cols[1..9] {
            assert_eq!(c.parse::<f64>().unwrap(), 0.0);
        }
    }
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["passed"], true);
    assert!(dir.path().join("final.snap").exists());
}

#[test]
fn missing_nu_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &ZERO.replace("nu = 1.0\n", ""));
    let out = fluidplate(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nu"));
}

#[test]
fn invalid_poisson_ratio_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &ZERO.replace("mu = 0.3", "mu = 0.5"));
    let out = fluidplate(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_suite_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", ZERO);
    let out = fluidplate(&["verify", "--config", &cfg, "--suite", "foo"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let value: toml::Value = toml::from_str(ZERO).unwrap();
    let cfg = write(dir.path(), "zero.json", &serde_json::to_string(&value).unwrap());
    let out = fluidplate(&["simulate", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_runs_write_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{ZERO}\n[forcing]\nplate = [0.01, 0.0, 0.0]\n\n[initial]\ndisplacement = [{{ kind = \"bump\", amplitude = 0.01 }}]\n"
    );
    let cfg = write(dir.path(), "run.toml", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = fluidplate(&["simulate", "--config", &cfg, "--output-dir", d.to_str().unwrap()], dir.path());
        assert!(out.status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("diagnostics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(std::fs::read(a.join("final.snap")).unwrap(), std::fs::read(b.join("final.snap")).unwrap());
}

#[test]
fn decay_run_reports_positive_rate_and_restarts_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let text = ZERO.replace("t_end = 0.1", "t_end = 0.5") + "\n[initial]\ndisplacement = [{ kind = \"bump\", amplitude = 0.05 }]\n";
    let cfg = write(dir.path(), "decay.toml", &text);
    let out = fluidplate(&["simulate", "--config", &cfg], dir.path());
    assert!(out.status.success());
    let rate = json(&dir.path().join("summary.json"))["summary"]["energy_decay_rate"].as_f64().unwrap();
    assert!(rate > 0.0);

    let snap = dir.path().join("final.snap");
    let restart = ZERO.to_owned() + &format!("\n[initial]\nsnapshot = {:?}\n", snap.to_str().unwrap());
    let cfg = write(dir.path(), "restart.toml", &restart);
    let next = dir.path().join("next");
    let out = fluidplate(&["simulate", "--config", &cfg, "--output-dir", next.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(next.join("diagnostics.csv")).unwrap();
    let e0: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(e0 > 0.0);
}

#[test]
fn probes_at_zero_load() {
    let dir = tempfile::tempdir().unwrap();
    let text = ZERO.to_owned() + "\n[initial]\ndisplacement = [{ kind = \"bump\", amplitude = 0.01 }]\n\n[probe]\namplitudes = [0.01, 0.1]\n";
    let cfg = write(dir.path(), "probe.toml", &text);
    for kind in ["stationary", "dissipativity", "separation"] {
        let out = fluidplate(&["probe", "--config", &cfg, "--kind", kind], dir.path());
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let st = json(&dir.path().join("probe_stationary.json"));
    assert_eq!(st["report"]["max_abs_w"], 0.0);
    assert!(st["report"]["plate_residual"].as_f64().unwrap() <= 1e-9);
    let dis = json(&dir.path().join("probe_dissipativity.json"));
    assert!(dis["report"]["trajectories"].as_array().unwrap().iter().all(|t| t["entry_time"].is_number()));
    let sep = json(&dir.path().join("probe_separation.json"));
    assert!(sep["report"]["distance"].as_array().unwrap().iter().all(|d| d == 0.0));
}

#[test]
fn plate_suite_passes_and_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", ZERO);
    let out = fluidplate(&["verify", "--config", &cfg, "--suite", "plate", "--seed", "7"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&dir.path().join("verify_plate.json"));
    assert_eq!(r["seed"], 7);
    assert_eq!(r["passed"], true);
}
