//! End-to-end tests that drive the compiled `specdeg` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use specdeg::select::ForestModel;

/// Fresh scratch directory, unique per test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("specdeg-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn specdeg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specdeg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run specdeg")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).expect("file is JSON")
}

fn synth_scene(dir: &Path, name: &str, seed: &str) {
    let out = specdeg(
        dir,
        &["synth", name, "--height", "16", "--width", "16", "--bands", "8", "--seed", seed],
    );
    assert_ok(&out);
}

#[test]
fn degrade_writes_sidecar_with_derived_blur_sigma() {
    let dir = scratch("sidecar");
    synth_scene(&dir, "scene.hsc", "3");
    fs::write(
        dir.join("blur.json"),
        r#"{"kind": "gaussian_blur", "params": {"kernel_size": 9}, "seed": 5}"#,
    )
    .unwrap();

    assert_ok(&specdeg(&dir, &["degrade", "scene.hsc", "blur.json", "out.hsc"]));
    let sidecar = read_json_file(&dir.join("out.hsc.json"));
    assert_eq!(sidecar["derived"]["blur_sigma"], serde_json::json!(1.7));
    assert_eq!(sidecar["recipe"]["kind"], "gaussian_blur");
    assert_eq!(sidecar["recipe"]["seed"], 5);
    assert!(sidecar.get("mask").is_none(), "blur has no mask");
}

#[test]
fn degrade_rerun_is_byte_identical() {
    let dir = scratch("rerun");
    synth_scene(&dir, "scene.hsc", "3");
    fs::write(
        dir.join("inpaint.json"),
        r#"{"kind": "inpaint", "params": {"mask_rate": 0.8}, "seed": 11}"#,
    )
    .unwrap();

    assert_ok(&specdeg(&dir, &["degrade", "scene.hsc", "inpaint.json", "a.hsc"]));
    assert_ok(&specdeg(&dir, &["degrade", "scene.hsc", "inpaint.json", "b.hsc"]));
    assert_eq!(fs::read(dir.join("a.hsc")).unwrap(), fs::read(dir.join("b.hsc")).unwrap());
    assert_eq!(
        fs::read(dir.join("a.hsc.json")).unwrap(),
        fs::read(dir.join("b.hsc.json")).unwrap()
    );

    let sidecar = read_json_file(&dir.join("a.hsc.json"));
    let fraction = sidecar["mask"]["fraction"].as_f64().unwrap();
    assert!((fraction - 0.8).abs() < 0.1, "mask fraction {fraction} far from the rate");
}

#[test]
fn eval_of_identical_cubes_prints_the_sentinel_json() {
    let dir = scratch("eval");
    synth_scene(&dir, "scene.hsc", "7");
    let out = specdeg(&dir, &["eval", "scene.hsc", "scene.hsc"]);
    assert_ok(&out);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        r#"{"psnr_db":"inf","ssim":1.0}"#
    );
}

#[test]
fn metrics_writes_the_registry_table() {
    let dir = scratch("metrics");
    synth_scene(&dir, "a.hsc", "1");
    synth_scene(&dir, "b.hsc", "2");
    assert_ok(&specdeg(&dir, &["metrics", "a.hsc", "b.hsc", "--out", "m.csv", "--label", "demo"]));

    let text = fs::read_to_string(dir.join("m.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("path,label,hfer,stu,scm,scsd,gsd,scc,"));
    assert!(lines[1].starts_with("a.hsc,demo,"));
    assert!(lines[2].starts_with("b.hsc,demo,"));
}

/// Two well-separated classes on the first feature.
const CLASSIFY_CSV: &str = "path,label,m1,m2\n\
    r0,x,0.10,0.5\nr1,x,0.15,0.1\nr2,x,0.20,0.9\nr3,x,0.25,0.3\nr4,x,0.12,0.7\nr5,x,0.18,0.2\n\
    r6,y,0.80,0.6\nr7,y,0.85,0.4\nr8,y,0.90,0.8\nr9,y,0.75,0.05\nr10,y,0.95,0.35\nr11,y,0.70,0.65\n";

#[test]
fn classify_splits_trains_and_writes_model_and_confusion() {
    let dir = scratch("classify");
    fs::write(dir.join("train.csv"), CLASSIFY_CSV).unwrap();
    let out = specdeg(
        &dir,
        &[
            "classify", "train.csv", "--split", "0.5", "--seed", "1", "--model", "model.json",
            "--confusion", "conf.csv",
        ],
    );
    assert_ok(&out);

    let report = stdout_json(&out);
    assert_eq!(report["accuracy"], serde_json::json!(1.0));
    assert_eq!(report["n_train"].as_u64().unwrap() + report["n_test"].as_u64().unwrap(), 12);

    let model = ForestModel::from_json(&fs::read_to_string(dir.join("model.json")).unwrap())
        .expect("model file round-trips");
    assert_eq!(model.classes, ["x", "y"]);
    assert_eq!(model.feature_names, ["m1", "m2"]);

    let conf = fs::read_to_string(dir.join("conf.csv")).unwrap();
    assert!(conf.starts_with("true_class,x,y\n"));
    assert_eq!(conf.lines().count(), 3);
}

#[test]
fn select_drops_an_exact_duplicate_column() {
    let dir = scratch("select");
    // f2 = 2*f1 (correlation exactly 1); f3 is nearly uncorrelated with f1.
    fs::write(
        dir.join("samples.csv"),
        "path,label,f1,f2,f3\n\
         a0,alpha,0.1,0.2,0.9\na1,alpha,0.2,0.4,0.1\na2,alpha,0.3,0.6,0.8\na3,alpha,0.15,0.3,0.2\n\
         b0,beta,0.9,1.8,0.85\nb1,beta,0.8,1.6,0.15\nb2,beta,0.7,1.4,0.75\nb3,beta,0.85,1.7,0.25\n",
    )
    .unwrap();
    let out = specdeg(&dir, &["select", "samples.csv", "--rho-max", "0.8", "--seed", "2"]);
    assert_ok(&out);

    let report = stdout_json(&out);
    assert_eq!(report["kept"], serde_json::json!(["f1", "f3"]));
    assert_eq!(report["dropped"], serde_json::json!(["f2"]));
    assert_eq!(report["rho_max"], serde_json::json!(0.8));
    let importances = report["importances"].as_array().unwrap();
    assert_eq!(importances.len(), 2);
    let total: f64 = importances.iter().map(|p| p[1].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn route_selects_top_k_experts_and_weights_round_trip() {
    let dir = scratch("route");
    synth_scene(&dir, "scene.hsc", "9");
    let out = specdeg(
        &dir,
        &[
            "route", "scene.hsc", "--experts", "4", "--top-k", "2", "--seed", "9",
            "--save-weights", "w.json", "--out", "r1.json",
        ],
    );
    assert_ok(&out);

    let report = read_json_file(&dir.join("r1.json"));
    assert_eq!(report["mode"], "infer");
    assert_eq!(report["selected"].as_array().unwrap().len(), 2);
    assert_eq!(report["logits"].as_array().unwrap().len(), 4);
    let nonzero = report["gates"].as_array().unwrap().iter().filter(|g| g.as_f64() != Some(0.0));
    assert_eq!(nonzero.count(), 2);
    for name in ["hfer", "stu", "scm", "scsd", "gsd", "scc"] {
        assert!(report["prompt"][name].is_f64(), "prompt carries {name}");
    }

    // Routing again with the saved weights reproduces the report exactly.
    assert_ok(&specdeg(&dir, &["route", "scene.hsc", "--weights", "w.json", "--out", "r2.json"]));
    assert_eq!(fs::read(dir.join("r1.json")).unwrap(), fs::read(dir.join("r2.json")).unwrap());
}

const PIPELINE_CONFIG: &str = r#"{
  "scene": {"height": 16, "width": 16, "bands": 8},
  "recipes": [
    {"count": 10, "kind": "gaussian_noise", "params": {"sigma255": 50.0}},
    {"count": 10, "kind": "gaussian_blur", "params": {"kernel_size": 9}},
    {"count": 10, "kind": "super_res", "params": {"scale": 2}},
    {"count": 10, "kind": "inpaint", "params": {"mask_rate": 0.8}},
    {"count": 10, "kind": "band_drop", "params": {"drop_rate": 0.2}}
  ],
  "forest": {"seed": 3},
  "output_dir": "OUTDIR",
  "master_seed": 77
}"#;

#[test]
fn pipeline_runs_end_to_end_and_is_deterministic() {
    let dir = scratch("pipeline");
    for (config, outdir) in [("p1.json", "run1"), ("p2.json", "run2")] {
        fs::write(dir.join(config), PIPELINE_CONFIG.replace("OUTDIR", outdir)).unwrap();
        let out = specdeg(&dir, &["pipeline", config]);
        assert_ok(&out);
        let acc = stdout_json(&out)["accuracy"].as_f64().unwrap();
        assert!(acc >= 0.5, "pipeline accuracy {acc} too low for separable classes");
    }

    for name in ["metrics.csv", "model.json", "confusion.csv", "distributions.csv", "report.json"]
    {
        let a = fs::read(dir.join("run1").join(name)).unwrap();
        let b = fs::read(dir.join("run2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    let metrics = fs::read_to_string(dir.join("run1/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 51);
    assert!(metrics.lines().nth(1).unwrap().starts_with("synthetic/noise/0,noise,"));
    let confusion = fs::read_to_string(dir.join("run1/confusion.csv")).unwrap();
    assert!(confusion.starts_with("true_class,noise,blur,low_res,regions_missing,band_missing\n"));
    let distributions = fs::read_to_string(dir.join("run1/distributions.csv")).unwrap();
    assert!(distributions.starts_with("class,metric,value\n"));
    assert_eq!(distributions.lines().count(), 1 + 50 * 12);
    let report = read_json_file(&dir.join("run1/report.json"));
    assert_eq!(report["n_samples"], 50);
    assert_eq!(report["n_train"].as_u64().unwrap() + report["n_test"].as_u64().unwrap(), 50);
}

#[test]
fn exit_codes_distinguish_usage_data_and_invariant_errors() {
    let dir = scratch("exitcodes");
    synth_scene(&dir, "scene.hsc", "3");
    fs::write(
        dir.join("even.json"),
        r#"{"kind": "gaussian_blur", "params": {"kernel_size": 8}, "seed": 5}"#,
    )
    .unwrap();
    fs::write(dir.join("broken.json"), "{not json").unwrap();
    fs::write(dir.join("broken.csv"), "not,a valid\nheader row here\n").unwrap();

    // 0: help and version.
    assert_ok(&specdeg(&dir, &["--help"]));
    assert_ok(&specdeg(&dir, &["degrade", "--help"]));
    assert_ok(&specdeg(&dir, &["--version"]));

    let code = |args: &[&str]| specdeg(&dir, args).status.code().unwrap();
    // 1: usage errors.
    assert_eq!(code(&["--bogus-flag"]), 1);
    assert_eq!(code(&["degrade", "scene.hsc"]), 1, "missing positional args");
    assert_eq!(code(&["route", "scene.hsc", "--weights", "w.json", "--experts", "8"]), 1);
    // 2: missing or malformed files.
    assert_eq!(code(&["degrade", "missing.hsc", "even.json", "x.hsc"]), 2);
    assert_eq!(code(&["pipeline", "broken.json"]), 2);
    assert_eq!(code(&["classify", "broken.csv"]), 2);
    // 3: invariant violations in well-formed input.
    assert_eq!(code(&["degrade", "scene.hsc", "even.json", "x.hsc"]), 3);
    fs::write(dir.join("ok.csv"), CLASSIFY_CSV).unwrap();
    assert_eq!(code(&["classify", "ok.csv", "--split", "1.5"]), 3);
    let out = specdeg(&dir, &["degrade", "scene.hsc", "even.json", "x.hsc"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("kernel_size"), "diagnostic names the field: {stderr}");
    assert_eq!(stderr.lines().count(), 1, "one-line diagnostic");
}
