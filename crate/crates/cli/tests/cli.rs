use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deconfounder"))
}

fn synth(dir: &Path, scenario: &str, n: &str, seed: &str) -> String {
    let out = dir.join(format!("syn-{scenario}-{seed}"));
    let status = bin()
        .args([
            "synth",
            "--scenario",
            scenario,
            "--n-units",
            n,
            "--seed",
            seed,
            "--out-dir",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    out.join("data.csv").display().to_string()
}

fn quick_model_flags() -> [&'static str; 4] {
    ["--replications", "20", "--samples", "20"]
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "confounded", "400", "1");
    let out = dir.path().join("eff");
    let res = bin()
        .args([
            "effects",
            "--input",
            &data,
            "--id",
            "id",
            "--outcome",
            "popularity",
            "--latent-dim",
            "3",
        ])
        .args(quick_model_flags())
        .args(["--seed", "1", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "report.txt",
        "report.json",
        "model.json",
        "manifest.json",
        "mask.json",
        "check.json",
        "causes.csv",
        "confounders.csv",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.contains("Mean      STD  p-value    [0.025   0.975]"));
    assert!(text.contains("* denotes 5% significance and ** 10% significance."));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let manifest = std::fs::read(out.join("manifest.json")).unwrap();
    use sha2::Digest;
    assert_eq!(report["manifest_sha256"], hex::encode(sha2::Sha256::digest(&manifest)));
}

#[test]
fn check_subcommand_reproduces_pipeline_score() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "confounded", "300", "2");
    let eff = dir.path().join("eff");
    let res = bin()
        .args([
            "effects",
            "--input",
            &data,
            "--id",
            "id",
            "--outcome",
            "popularity",
            "--latent-dim",
            "3",
        ])
        .args(quick_model_flags())
        .args(["--seed", "5", "--out-dir"])
        .arg(&eff)
        .output()
        .unwrap();
    assert!(res.status.success());
    let chk = dir.path().join("chk");
    let res = bin()
        .arg("check")
        .arg("--causes")
        .arg(eff.join("causes.csv"))
        .arg("--model")
        .arg(eff.join("model.json"))
        .arg("--mask")
        .arg(eff.join("mask.json"))
        .args(quick_model_flags())
        .args(["--seed", "5", "--out-dir"])
        .arg(&chk)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let a = std::fs::read(eff.join("check.json")).unwrap();
    let b = std::fs::read(chk.join("check.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_cause_fails_at_holdout_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    let rows: String = (0..30)
        .map(|i| format!("{i},{},{}\n", (i as f64 * 0.37).sin(), i % 5))
        .collect();
    std::fs::write(&csv, format!("id,food,rating\n{rows}")).unwrap();
    let res = bin()
        .args([
            "effects",
            "--id",
            "id",
            "--outcome",
            "rating",
            "--latent-dim",
            "1",
            "--seed",
            "1",
            "--input",
        ])
        .arg(&csv)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("[holdout]") && err.contains("hint:"), "{err}");
}

#[test]
fn failed_gate_exits_2_and_force_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "confounded", "400", "3");
    // an unreachable threshold makes the gate fail deterministically
    let run = |force: bool, out: &str| {
        let mut cmd = bin();
        cmd.args([
            "effects",
            "--input",
            &data,
            "--id",
            "id",
            "--outcome",
            "popularity",
            "--latent-dim",
            "3",
        ])
        .args(quick_model_flags())
        .args(["--threshold", "0.99", "--seed", "3", "--out-dir"])
        .arg(dir.path().join(out));
        if force {
            cmd.arg("--force");
        }
        cmd.output().unwrap()
    };
    let res = run(false, "gated");
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("[check]"));
    assert!(dir.path().join("gated/report.txt").exists());
    let res = run(true, "forced");
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stderr).contains("WARNING"));
    let text = std::fs::read_to_string(dir.path().join("forced/report.txt")).unwrap();
    assert!(text.contains("WARNING: predictive check failed"));
}

#[test]
fn collinear_causes_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dup.csv");
    let mut body = String::from("id,a,b,c,y\n");
    for i in 0..60 {
        let a = (i as f64 * 0.7).sin();
        let b = (i as f64 * 1.3).cos();
        body.push_str(&format!("{i},{a},{b},{},{}\n", a + b, (i % 7) as f64));
    }
    std::fs::write(&csv, body).unwrap();
    // the screen is disabled by a threshold close to 1 so the exact
    // dependence reaches the regression
    let res = bin()
        .args([
            "robustness",
            "--mode",
            "noncausal",
            "--id",
            "id",
            "--outcome",
            "y",
            "--corr-threshold",
            "0.999",
        ])
        .args(["--seed", "1", "--input"])
        .arg(&csv)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("[robustness] rank-deficient"));
}

#[test]
fn noncausal_robustness_lists_flips() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "flip", "2000", "0");
    let res = bin()
        .args([
            "robustness",
            "--mode",
            "noncausal",
            "--input",
            &data,
            "--id",
            "id",
            "--outcome",
            "popularity",
        ])
        .args(["--seed", "0", "--out-dir"])
        .arg(dir.path().join("rob"))
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("sign flips:\n  cause_1 at t=2"), "{text}");
}

#[test]
fn mediate_and_compare_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "partial-mediation", "800", "4");
    let res = bin()
        .args(["mediate", "--input", &data, "--id", "id", "--latent-dim", "2"])
        .args(quick_model_flags())
        .args(["--seed", "4", "--out-dir"])
        .arg(dir.path().join("med"))
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("beta_m") && text.contains("Per-cause status"), "{text}");

    let res = bin()
        .args([
            "compare-predictive",
            "--input",
            &data,
            "--id",
            "id",
            "--outcome",
            "popularity",
            "--ignore",
            "rating",
        ])
        .args(["--latent-dim", "2"])
        .args(quick_model_flags())
        .args(["--seed", "4", "--out-dir"])
        .arg(dir.path().join("cmp"))
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("Noncausal"));
}

#[test]
fn impute_and_fit_ppca_run() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn");
    let res = bin()
        .args([
            "synth",
            "--scenario",
            "confounded",
            "--n-units",
            "300",
            "--missing-rate",
            "0.1",
            "--seed",
            "6",
            "--out-dir",
        ])
        .arg(&syn)
        .output()
        .unwrap();
    assert!(res.status.success());
    let data = syn.join("data.csv").display().to_string();
    let res = bin()
        .args([
            "impute",
            "--input",
            &data,
            "--id",
            "id",
            "--outcomes",
            "popularity",
            "--out-dir",
        ])
        .arg(dir.path().join("imp"))
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let imputed = std::fs::read_to_string(dir.path().join("imp/imputed.csv")).unwrap();
    assert!(!imputed.lines().skip(1).any(|l| l.contains(",,") || l.ends_with(',')));

    let res = bin()
        .args([
            "fit-ppca",
            "--input",
            &data,
            "--id",
            "id",
            "--ignore",
            "popularity",
            "--latent-dim",
            "3",
            "--seed",
            "6",
        ])
        .arg("--out-dir")
        .arg(dir.path().join("fit"))
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let model: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("fit/model.json")).unwrap()).unwrap();
    assert_eq!(model["k"], 3);
}

#[test]
fn out_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let res = bin()
        .args(["synth", "--scenario", "flip", "--n-units", "50", "--seed", "1"])
        .env("DECONFOUNDER_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(target.join("data.csv").exists() && target.join("truth.json").exists());
}

#[test]
fn missing_seed_is_a_usage_error() {
    let res = bin()
        .args(["effects", "--input", "x.csv", "--outcome", "y"])
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("--seed"));
}
