use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn navsto(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navsto"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NAVSTO_OUT_ROOT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Directory reported on the `artifacts:` line.
fn run_dir(o: &Output) -> PathBuf {
    let stdout = String::from_utf8_lossy(&o.stdout);
    let line = stdout
        .lines()
        .find_map(|l| l.strip_prefix("artifacts: "))
        .unwrap_or_else(|| panic!("no artifacts line in {stdout}"));
    PathBuf::from(line)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_sample_config_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = configs().join("sample.conf");
    let o = navsto(
        tmp.path(),
        &["simulate", "--config", conf.to_str().unwrap(), "--seeds", "0..2", "--stride", "4"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    for p in 0..2 {
        let csv = fs::read_to_string(dir.join(format!("path_{p}.csv"))).unwrap();
        // horizon 0.032 / dt 0.001 / stride 4 + 1 rows, plus the header
        assert_eq!(csv.lines().count(), 32 / 4 + 1 + 1);
        assert!(csv.starts_with("t,h_norm,v_norm_sq,w_norm_sq,E1,E2"));
    }
    let m = manifest(&dir);
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seeds"], serde_json::json!([0, 2]));
    assert_eq!(m["verdict"], "pass");
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 2);
    assert!(m["config"].as_str().unwrap().contains("resolution = 6"));
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with("simulate-"));
}

#[test]
fn artifacts_are_independent_of_workers_and_reruns() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let conf = configs().join("golden.conf");
    let args = |w: &'static str| {
        vec![
            "simulate",
            "--config",
            conf.to_str().unwrap(),
            "--seeds",
            "3..7",
            "--snapshots",
            "--workers",
            w,
        ]
        .into_iter()
        .map(str::to_string)
        .collect::<Vec<_>>()
    };
    let run = |root: &Path, w: &'static str| {
        let args = args(w);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = navsto(root, &refs);
        assert_eq!(code(&o), 0);
        run_dir(&o)
    };
    let d1 = run(a.path(), "1");
    let d2 = run(b.path(), "3");
    assert_eq!(d1.file_name(), d2.file_name(), "same inputs, same address");
    let (m1, m2) = (manifest(&d1), manifest(&d2));
    assert_eq!(m1["hash"], m2["hash"]);
    assert_eq!(m1["artifacts"], m2["artifacts"]);
    for entry in m1["artifacts"].as_array().unwrap() {
        let name = entry["path"].as_str().unwrap();
        assert_eq!(fs::read(d1.join(name)).unwrap(), fs::read(d2.join(name)).unwrap(), "{name}");
    }
    // a rerun into the same root reproduces the bytes in place
    let d3 = run(a.path(), "2");
    assert_eq!(d3, d1);
    assert_eq!(manifest(&d3)["artifacts"], m1["artifacts"]);

    // different seeds, different address
    let o = navsto(a.path(), &["simulate", "--config", conf.to_str().unwrap(), "--seeds", "3..8"]);
    assert_ne!(run_dir(&o), d1);
}

#[test]
fn golden_ensemble_passes_and_corrupted_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let golden = configs().join("golden.conf");
    let corrupted = configs().join("corrupted.conf");
    let o = navsto(
        tmp.path(),
        &["verify-mp2", "--config", golden.to_str().unwrap(), "--seeds", "0..400"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let dir = run_dir(&o);
    let reports: Value = serde_json::from_str(&fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);

    let o = navsto(
        tmp.path(),
        &["verify-mp2", "--config", corrupted.to_str().unwrap(), "--seeds", "0..400"],
    );
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL]") && stdout.contains("var_ratio"), "{stdout}");
}

#[test]
fn unknown_config_key_lists_valid_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_config(tmp.path(), "bad.conf", "resolution = 4\nviscosity = 2\n");
    let o = navsto(tmp.path(), &["simulate", "--config", conf.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("viscosity"), "{err}");
    for key in ["resolution", "nu", "dt", "horizon", "noise_scale"] {
        assert!(err.contains(key), "missing `{key}` in {err}");
    }
}

#[test]
fn usage_errors_do_not_collide_with_verdict_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&navsto(tmp.path(), &["simulate", "--seeds", "5..2"])), 3);
    assert_eq!(code(&navsto(tmp.path(), &["no-such-command"])), 3);
    assert_eq!(code(&navsto(tmp.path(), &["simulate", "--scheme", "rk4"])), 3);
    assert_eq!(code(&navsto(tmp.path(), &["--help"])), 0);
}

#[test]
fn blown_up_ensemble_is_inconclusive_with_census() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_config(
        tmp.path(),
        "wild.conf",
        "resolution = 4\ndt = 0.001\nhorizon = 0.016\nq0 = 1e9\n",
    );
    let o = navsto(
        tmp.path(),
        &["verify-energy", "--config", conf.to_str().unwrap(), "--seeds", "0..20"],
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    let census = fs::read_to_string(run_dir(&o).join("blowups.csv")).unwrap();
    assert!(census.starts_with("path,step\n"));
    assert!(census.lines().count() > 1);
}

#[test]
fn report_merges_dedupes_and_audits() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("runs");
    let conf = configs().join("golden.conf");
    let c = conf.to_str().unwrap();

    // empty list: empty report, exit 0
    let o = navsto(&root, &["report"]);
    assert_eq!(code(&o), 0);
    let empty: Value = serde_json::from_str(&fs::read_to_string(run_dir(&o).join("report.json")).unwrap()).unwrap();
    assert_eq!(empty["entries"].as_array().unwrap().len(), 0);

    let pass = run_dir(&navsto(&root, &["simulate", "--config", c, "--seeds", "0..1"]));
    let fail = {
        let o = navsto(
            &root,
            &["verify-weak-strong", "--config", c, "--seeds", "0..8", "--level", "1e6", "--min-crossings", "0", "--chi-level", "1"],
        );
        // a cut-off below the stopping level breaks the identity
        assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
        run_dir(&o)
    };
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let o = navsto(&root, &["report", &s(&pass), &s(&pass.join("manifest.json"))]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&fs::read_to_string(run_dir(&o).join("report.json")).unwrap()).unwrap();
    assert_eq!(r["entries"].as_array().unwrap().len(), 1);
    assert_eq!(r["duplicates"], 1);

    let o = navsto(&root, &["report", &s(&pass), &s(&fail)]);
    assert_eq!(code(&o), 1, "fail dominates");

    // the same set in another order lands in the same place
    let o2 = navsto(&root, &["report", &s(&fail), &s(&pass)]);
    assert_eq!(run_dir(&o), run_dir(&o2));

    fs::remove_file(pass.join("path_0.csv")).unwrap();
    let o = navsto(&root, &["report", &s(&pass)]);
    assert_eq!(code(&o), 2, "missing artifact is inconclusive");
    assert!(String::from_utf8_lossy(&o.stdout).contains("missing: path_0.csv"));
}

#[test]
fn selection_demo_writes_its_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let o = navsto(
        tmp.path(),
        &["select-demo", "--horizon", "20", "--dt", "0.01", "--branches", "40", "--times", "0,0.01,1,2"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let dir = run_dir(&o);
    for f in ["funnel.csv", "stages.csv", "selected.csv", "semiflow.csv", "reports.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let bad = navsto(tmp.path(), &["select-demo", "--criteria", "1:cosh(x)"]);
    assert_eq!(code(&bad), 3);
}

#[test]
fn env_var_sets_the_artifact_root() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = configs().join("golden.conf");
    let o = Command::new(env!("CARGO_BIN_EXE_navsto"))
        .args(["simulate", "--config", conf.to_str().unwrap()])
        .env("NAVSTO_OUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(run_dir(&o).starts_with(tmp.path()));
}

#[test]
fn remaining_subcommands_run_on_small_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let golden = configs().join("golden.conf");
    let g = golden.to_str().unwrap();
    let reports = |o: &Output| -> Value {
        serde_json::from_str(&fs::read_to_string(run_dir(o).join("reports.json")).unwrap()).unwrap()
    };

    let o = navsto(tmp.path(), &["verify-energy", "--config", g, "--seeds", "0..200"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(reports(&o).as_array().unwrap().len(), 2, "E^1 and E^2");

    let o = navsto(tmp.path(), &["verify-doob", "--config", g, "--seeds", "0..200"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let o = navsto(tmp.path(), &["verify-weak-strong", "--config", g, "--seeds", "0..40", "--min-crossings", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let bel = write_config(tmp.path(), "bel.conf", "resolution = 3\ndt = 0.02\nhorizon = 0.1\n");
    let b = bel.to_str().unwrap();
    let o = navsto(tmp.path(), &["bel-probe", "--config", b, "--seeds", "0..300", "--pilot-paths", "50"]);
    assert!(matches!(code(&o), 0 | 1), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &reports(&o)[0];
    assert!(r["labels"].as_array().unwrap().iter().any(|l| l == "linear_exact_residual"));
    assert!(r["params"]["pilot_projection_p99"].as_f64().unwrap() > 0.0);
    assert_eq!(code(&navsto(tmp.path(), &["bel-probe", "--config", b, "--psi", "cubic"])), 3);

    let ctl = write_config(tmp.path(), "ctl.conf", "resolution = 4\nhorizon = 0.05\nmode = deterministic\n");
    let o = navsto(tmp.path(), &["control-steer", "--config", ctl.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(run_dir(&o).join("deviations.csv").is_file());

    let o = navsto(
        tmp.path(),
        &["sweep-inequalities", "--resolutions", "4,6", "--seeds", "0..4", "--alphas", "0.75,1", "--endpoint-samples", "20", "--endpoint-resolution", "4"],
    );
    assert!(matches!(code(&o), 0 | 1), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    let rows = fs::read_to_string(dir.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 4);
    assert!(dir.join("endpoint.json").is_file());
}
