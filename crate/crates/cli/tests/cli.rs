use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn njcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_njcr"))
        .args(args)
        .output()
        .expect("spawn njcr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// 40x40x20 scene, small enough for a debug build.
fn write_config(dir: &Path, out_dir: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "synthetic": { "background": { "width": 40, "height": 40, "bands": 20 } },
        "output_dir": out_dir,
        "method": "njcr",
        "segmentation": { "target_count": 30 },
        "dictionary": { "p_anomaly": 20 },
        "solver": { "rho": 10.0 }
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn without_timings(mut summary: Value) -> Value {
    summary.as_object_mut().unwrap().remove("timings");
    summary
}

#[test]
fn help_lists_subcommands() {
    let out = njcr(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["synth", "segment", "dict", "detect", "eval", "run"] {
        assert!(text.contains(sub), "missing {sub} in help");
    }
}

#[test]
fn run_is_reproducible_and_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let cfg = write_config(tmp.path(), &a);
    let cfg = cfg.to_str().unwrap();

    let first = njcr(&["run", "--config", cfg]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let summary_a = read_json(&a.join("summary.json"));
    let scores_a = std::fs::read(a.join("scores.scores")).unwrap();

    // Unchanged inputs: every stage is a cache hit and outputs are untouched.
    let cache_before = std::fs::read(a.join("cache.json")).unwrap();
    let again = njcr(&["run", "--config", cfg]);
    assert_eq!(code(&again), 0);
    assert_eq!(std::fs::read(a.join("cache.json")).unwrap(), cache_before);
    assert_eq!(std::fs::read(a.join("scores.scores")).unwrap(), scores_a);
    assert_eq!(
        without_timings(read_json(&a.join("summary.json"))),
        without_timings(summary_a.clone())
    );

    // A fresh directory recomputes everything to the same bytes.
    let fresh = njcr(&["run", "--config", cfg, "--out-dir", b.to_str().unwrap()]);
    assert_eq!(code(&fresh), 0);
    assert_eq!(std::fs::read(b.join("scores.scores")).unwrap(), scores_a);
    assert_eq!(
        without_timings(read_json(&b.join("summary.json"))),
        without_timings(summary_a.clone())
    );

    let njcr_auc = summary_a["evaluation"]["auc_pd_pf"].as_f64().unwrap();
    let rx_auc = summary_a["rx_baseline"]["auc_pd_pf"].as_f64().unwrap();
    assert!(njcr_auc > rx_auc, "NJCR {njcr_auc} vs RX {rx_auc}");
    assert!(summary_a["convergence"]["converged"].as_bool().unwrap());
    for file in ["superpixels.labels", "superpixels.svg", "dictionary.cube", "scores.csv", "eval/roc.csv"] {
        assert!(a.join(file).exists(), "missing {file}");
    }
}

#[test]
fn staged_rx_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    let s = scene.to_str().unwrap();
    let out = njcr(&["synth", "--out-dir", s, "--width", "40", "--height", "40", "--bands", "20"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let cube = scene.join("scene.cube");
    let mask = scene.join("scene.mask");
    let scores = tmp.path().join("rx.scores");
    let out = njcr(&[
        "detect",
        "--method",
        "rx",
        "--cube",
        cube.to_str().unwrap(),
        "--out",
        scores.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let eval_dir = tmp.path().join("eval");
    let out = njcr(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--mask",
        mask.to_str().unwrap(),
        "--out-dir",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let staged = read_json(&eval_dir.join("roc.json"))["auc_pd_pf"].as_f64().unwrap();

    let run_dir = tmp.path().join("run");
    let out = njcr(&[
        "run",
        "--cube",
        cube.to_str().unwrap(),
        "--mask",
        mask.to_str().unwrap(),
        "--method",
        "rx",
        "--out-dir",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&run_dir.join("summary.json"));
    assert_eq!(summary["evaluation"]["auc_pd_pf"].as_f64().unwrap(), staged);
    assert_eq!(
        std::fs::read(run_dir.join("rx.scores")).unwrap(),
        std::fs::read(&scores).unwrap()
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |p: &str| tmp.path().join(p).to_str().unwrap().to_string();

    // Unknown flag and an invalid parameter are configuration errors.
    assert_eq!(code(&njcr(&["run", "--no-such-flag"])), 2);
    let out = njcr(&["run", "--synthetic", "--lambda", "-1", "--out-dir", &t("bad")]);
    assert_eq!(code(&out), 2);
    std::fs::write(tmp.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(&njcr(&["run", "--config", &t("broken.json")])), 2);

    // Missing and malformed inputs are I/O errors.
    let out = njcr(&["detect", "--method", "rx", "--cube", &t("missing.cube"), "--out", &t("s")]);
    assert_eq!(code(&out), 3);
    std::fs::write(tmp.path().join("junk.cube"), b"not a cube").unwrap();
    let out = njcr(&["detect", "--method", "rx", "--cube", &t("junk.cube"), "--out", &t("s")]);
    assert_eq!(code(&out), 3);

    // A noise-free scene has a rank-deficient covariance, so RX without a
    // ridge cannot factor it.
    let scene = t("flat");
    let out = njcr(&[
        "synth", "--out-dir", &scene, "--width", "20", "--height", "20", "--bands", "20", "--noise", "0",
    ]);
    assert_eq!(code(&out), 0);
    let cube = tmp.path().join("flat/scene.cube");
    let out = njcr(&[
        "detect",
        "--method",
        "rx",
        "--rx-ridge",
        "0",
        "--cube",
        cube.to_str().unwrap(),
        "--out",
        &t("flat.scores"),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));

    // Iteration cap with non-convergence made fatal.
    let cfg = write_config(tmp.path(), &tmp.path().join("capped"));
    let out = njcr(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--max-iter",
        "2",
        "--fail-on-nonconvergence",
    ]);
    assert_eq!(code(&out), 5);
    let failed = read_json(&tmp.path().join("capped/FAILED.json"));
    assert_eq!(failed["stage"], "detect");
}
