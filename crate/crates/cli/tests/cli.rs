use std::path::Path;
use std::process::{Command, Output};

fn horolab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_horolab"))
        .args(args)
        .current_dir(dir)
        .env_remove("HOROLAB_OUT")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "eigenvalues = [0.0, 1.0]\n");
    let out = horolab(&["convexity-scan", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive"));
    let missing = horolab(&["convexity-scan", "--config", "nowhere.toml"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
    let unknown = horolab(&["bogus", "--config", &cfg], tmp.path());
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn convexity_scan_flags_the_nonconvex_range() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "eigenvalues = [1.0, 2.0]\nseed = 3\n");
    let out = horolab(&["convexity-scan", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("o"));
    assert_eq!(r["schema"], 1);
    assert_eq!(r["passed"], true);
    let rows = r["checks"][0]["values"]["rows"].as_array().unwrap();
    for row in rows {
        let negative = row["min"].as_f64().unwrap() < 0.0;
        assert_eq!(negative, row["coefficient"].as_f64().unwrap() < 0.0);
    }
    assert!(rows.iter().any(|row| row["multiple"] == 3.0));
    let files: Vec<&str> = r["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    assert_eq!(files, ["convexity.csv", "report.json"]);
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "eigenvalues = [1.0, 2.0]\nseed = 11\nsamples = 20\n");
    for sub in ["curvature-scan", "convexity-scan", "rho-audit"] {
        for run in ["a", "b"] {
            let out = horolab(&[sub, "--config", &cfg, "--out", run], tmp.path());
            assert_eq!(
                out.status.code(),
                Some(0),
                "{sub}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
    for f in ["curvature.csv", "convexity.csv", "rho.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
    let out = horolab(
        &["curvature-scan", "--config", &cfg, "--out", "c", "--seed", "12"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(tmp.path().join("a/curvature.csv")).unwrap();
    let c = std::fs::read(tmp.path().join("c/curvature.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn growth_run_and_failure_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "eigenvalues = [1.0, 2.0]\nresolution = 0.4\nt_max = 10.0\nr_window = [4.0, 64.0]\n";
    let cfg = config(tmp.path(), body);
    let out = horolab(&["growth-approx", "--config", &cfg, "--out", "ok"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("ok"));
    let k = r["checks"][0]["values"]["exponent"].as_f64().unwrap();
    assert!((k - 3.0).abs() <= 0.4, "{k}");
    let csv = std::fs::read_to_string(tmp.path().join("ok/growth_approx.csv")).unwrap();
    assert!(csv.starts_with("r,volume,log_r,log_volume\n"));

    let strict = config(tmp.path(), &format!("{body}[tolerances]\ngrowth_approx = 0.0\n"));
    let out = horolab(&["growth-approx", "--config", &strict, "--out", "strict"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let r = report(&tmp.path().join("strict"));
    assert_eq!(r["passed"], false);
    assert!(r["checks"][0]["violation"]["exponent"].is_number());
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "eigenvalues = [1.0]\nsamples = 5\n");
    let out = Command::new(env!("CARGO_BIN_EXE_horolab"))
        .args(["curvature-scan", "--config", &cfg])
        .current_dir(tmp.path())
        .env("HOROLAB_OUT", tmp.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("env-out"));
    let names: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["curvature-bounds", "constant-curvature"]);
}
