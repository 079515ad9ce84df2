use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use kahler_tube::parse_potential;
use kahler_tube::radial::radial_state;

fn run_env(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kahler-tube"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_env(args, None)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn documented_exit_codes() {
    let ok = run(&["radial", "noab", "--potential", "ell-affine(1)", "--dim", "3"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(report(&ok)["witnesses"].as_array().unwrap().is_empty());

    let bad = run(&["radial", "noab", "--potential", "radial-power(4)", "--dim", "3"]);
    assert_eq!(code(&bad), 1);
    let rep = report(&bad);
    let w = rep["witnesses"].as_array().unwrap();
    assert!(!w.is_empty());
    assert!(w.iter().any(|e| e["quantity"] == "A" && e["witness"]["kind"] == "radius"));

    assert_eq!(code(&run(&["verify", "example1", "--c", "1"])), 0);
}

#[test]
fn report_layout() {
    let rep = report(&run(&["verify", "example2", "--c", "3"]));
    assert_eq!(rep["command"], "verify example2");
    assert_eq!(rep["config"]["c"], 3.0);
    assert_eq!(rep["config"]["grid"], 512);
    assert!(rep["verdicts"].as_array().unwrap().iter().all(|v| v["status"] == "Pass"));
    assert_eq!(rep["result"]["completeness"]["verdict"], "LikelyComplete");
    assert!(rep.get("wall_time").is_none());
}

#[test]
fn verify_subcommands() {
    for c in ["0.5", "1", "2"] {
        assert_eq!(code(&run(&["verify", "example1", "--c", c])), 0);
    }
    let ok = run(&["verify", "appendix-a", "--c", "3"]);
    assert_eq!(code(&ok), 0);
    let chain = &report(&ok)["result"]["bound_chain"];
    assert!((chain["a3_chain"].as_f64().unwrap() - 25.239648).abs() <= 1e-6);
    assert_eq!(code(&run(&["verify", "appendix-a", "--c", "1.1"])), 1);
    assert_eq!(code(&run(&["verify", "example2", "--c", "1.1"])), 1);
}

#[test]
fn completeness_mapping() {
    assert_eq!(code(&run(&["radial", "completeness", "--potential", "ell-affine(1)"])), 0);
    assert_eq!(code(&run(&["radial", "completeness", "--potential", "flat@a=1"])), 1);
}

#[test]
fn usage_errors_exit_3() {
    for args in [
        vec!["radial", "bogus"],
        vec!["radial", "noab"],
        vec!["radial", "noab", "--potential", "x0^2 + * x1", "--dim", "2"],
        vec!["radial", "noab", "--potential", "x0^2 + x1^2", "--dim", "2"],
        vec!["curvature", "tensor", "--potential", "flat", "--dim", "2", "--point", "1,2,3"],
        vec!["curvature", "sample-nab", "--potential", "flat", "--mode", "sideways"],
        vec!["--potential", "flat"],
        vec!["radial", "noab", "--potential", "flat", "--dim", "many"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 3, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"potential": "radial-power(4)", "dim": 3, "r-max": 100.0, "grid": 64}"#).unwrap();

    let from_file = run(&["radial", "noab", "--config", path_str(&cfg)]);
    assert_eq!(code(&from_file), 1);
    let rep = report(&from_file);
    assert_eq!(rep["config"]["grid"], 64);
    assert_eq!(rep["config"]["r_max"], 100.0);

    let over = run(&["radial", "noab", "--config", path_str(&cfg), "--potential", "ell-affine(1)", "--grid", "32"]);
    assert_eq!(code(&over), 0);
    let rep = report(&over);
    assert_eq!(rep["config"]["potential"], "ell-affine(1)");
    assert_eq!(rep["config"]["grid"], 32);
    assert_eq!(rep["config"]["dim"], 3);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"potential": "flat", "colour": 1}"#).unwrap();
    assert_eq!(code(&run(&["radial", "noab", "--config", path_str(&bad)])), 3);
    assert_eq!(code(&run(&["radial", "noab", "--config", "/nonexistent/run.json"])), 3);
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    for args in [
        vec!["transport", "synthetic", "--potential", "radial-power(4)", "--pairs", "4", "--seed", "7"],
        vec!["curvature", "sample-nab", "--potential", "ell-loglift(3)", "--seed", "3"],
        vec!["transport", "qqconv", "--potential", "radial-power(4)", "--point", "0.8,0.3,0.1"],
        vec!["radial", "analyze", "--potential", "ell-loglift(3)"],
    ] {
        let one = run_env(&args, Some("1"));
        let four = run_env(&args, Some("4"));
        assert_eq!(one.stdout, four.stdout, "{args:?}");
        assert_eq!(one.status.code(), four.status.code());
        assert_eq!(one.stdout, run_env(&args, Some("4")).stdout);
    }
}

fn replay_lines(report_path: &Path) -> (i32, Vec<Value>) {
    let o = run(&["--replay", path_str(report_path)]);
    let rep = report(&o);
    assert_eq!(rep["command"], "replay");
    (code(&o), rep["entries"].as_array().unwrap().clone())
}

#[test]
fn replay_reproduces_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, Vec<&str>); 5] = [
        ("noab", vec!["radial", "noab", "--potential", "radial-power(4)"]),
        ("nab", vec!["curvature", "sample-nab", "--potential", "radial-power(4)", "--mode", "nab", "--points", "64"]),
        ("ricci", vec!["curvature", "synthetic-ricci", "--potential", "exp(x0^2)", "--dim", "1", "--kappa", "0"]),
        ("qq", vec!["transport", "qqconv", "--potential", "radial-power(4)", "--point", "0.8,0.3,0.1"]),
        ("syn", vec!["transport", "synthetic", "--potential", "radial-power(4)", "--pairs", "4"]),
    ];
    for (name, mut args) in cases {
        let out = dir.path().join(format!("{name}.json"));
        args.extend(["--out", path_str(&out)]);
        assert_eq!(code(&run(&args)), 1, "{name}");
        let saved: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let violated = saved["verdicts"].as_array().unwrap().iter().filter(|v| v["status"] == "Violated").count();
        assert!(violated > 0);
        let (exit, lines) = replay_lines(&out);
        assert_eq!(exit, 1, "{name}: {lines:?}");
        assert!(!lines.is_empty());
        for l in &lines {
            assert_eq!(l["reproduced"], true, "{name}: {l}");
            assert_eq!(l["identical"], true, "{name}: {l}");
        }
        let sources: Vec<&str> = lines.iter().map(|l| l["source"].as_str().unwrap()).collect();
        for v in saved["verdicts"].as_array().unwrap().iter().filter(|v| v["status"] == "Violated") {
            assert!(sources.contains(&v["name"].as_str().unwrap()), "{name}: {} has no witness", v["name"]);
        }
    }
}

#[test]
fn replay_without_witnesses_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok.json");
    assert_eq!(code(&run(&["radial", "noab", "--potential", "ell-affine(1)", "--out", path_str(&out)])), 0);
    let (exit, lines) = replay_lines(&out);
    assert_eq!(exit, 0);
    assert!(lines.is_empty());
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "[1, 2]").unwrap();
    assert_eq!(code(&run(&["--replay", path_str(&junk)])), 3);
}

#[test]
fn replay_notices_a_changed_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("noab.json");
    run(&["radial", "noab", "--potential", "radial-power(4)", "--out", path_str(&out)]);
    let mut saved: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    saved["config"]["potential"] = Value::from("ell-affine(1)");
    std::fs::write(&out, serde_json::to_string(&saved).unwrap()).unwrap();
    let (exit, lines) = replay_lines(&out);
    assert_eq!(exit, 2);
    assert!(lines.iter().all(|l| l["reproduced"] == false));
}

#[test]
fn profile_csv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("profile.csv");
    let o = run(&["radial", "analyze", "--potential", "ell-loglift(3)", "--grid", "40", "--csv", path_str(&csv_path)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["r", "f", "h", "ell", "lambda", "A", "B", "C", "D", "orth_bisectional"]);
    let parsed = parse_potential("ell-loglift(3)", 3).unwrap();
    let rp = parsed.radial().unwrap();
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.unwrap();
        let vals: Vec<f64> = rec.iter().map(|s| s.parse().unwrap()).collect();
        let s = radial_state(rp, vals[0]).unwrap();
        assert_eq!(vals[3], s.ell);
        assert_eq!(vals[8], s.d_ell);
        assert!(vals[8] >= 0.0);
        rows += 1;
    }
    assert_eq!(rows, 40);
}

#[test]
fn geometry_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let path_csv = dir.path().join("path.csv");
    let shoot = run(&["geodesy", "shoot", "--potential", "flat", "--dim", "2", "--point", "0,0", "--u", "1,0", "--length", "2", "--csv", path_str(&path_csv)]);
    assert_eq!(code(&shoot), 0);
    let end = report(&shoot)["result"]["points"].as_array().unwrap().last().unwrap().clone();
    assert!((end[0].as_f64().unwrap() - 2.0).abs() < 1e-12 && end[1].as_f64().unwrap().abs() < 1e-12);
    assert!(std::fs::read_to_string(&path_csv).unwrap().starts_with("s,x0,x1,v0,v1"));

    let seg = run(&["transport", "cseg", "--potential", "flat", "--dim", "2", "--point", "0,0", "--y0", "0,0", "--y1", "1,1", "--samples", "5"]);
    assert_eq!(code(&seg), 0);
    let pts = report(&seg)["result"]["points"].as_array().unwrap().clone();
    assert!((pts[2][0].as_f64().unwrap() - 0.5).abs() < 1e-12);

    for args in [
        vec!["geodesy", "ball", "--potential", "ell-affine(1)", "--dim", "2", "--point", "1,0"],
        vec!["geodesy", "dual-ball", "--potential", "ell-loglift(3)", "--dim", "2", "--eps", "0.01"],
        vec!["geodesy", "scale", "--potential", "flat", "--dim", "2"],
        vec!["transport", "cconvexity", "--potential", "flat", "--dim", "2", "--point", "0.4,0.1"],
        vec!["transport", "mtw", "--potential", "flat", "--dim", "3"],
        vec!["curvature", "tensor", "--potential", "ell-loglift(3)"],
        vec!["curvature", "ricci", "--potential", "ell-affine(1)", "--dim", "2"],
        vec!["radial", "flatness", "--potential", "ell-affine(1)"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let q = report(&run(&["geodesy", "scale", "--potential", "flat", "--dim", "2"]));
    assert_eq!(q["result"]["q"], 1.0);
}

#[test]
fn flat_is_nonnegative_everywhere() {
    for args in [
        vec!["curvature", "sample-nab", "--potential", "flat", "--mode", "nab", "--points", "32"],
        vec!["transport", "synthetic", "--potential", "flat", "--dim", "2", "--pairs", "3"],
        vec!["transport", "qqconv", "--potential", "flat", "--dim", "2", "--point", "0.3,0.2"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 0, "{args:?}");
        for v in report(&o)["verdicts"].as_array().unwrap() {
            // 1 − sup M carries the roundoff of a ratio of G values.
            match (v["name"].as_str(), v["min_value"].as_f64()) {
                (Some("synthetic_nab"), Some(m)) => assert!(m.abs() <= 1e-9, "{args:?}: {v}"),
                (_, Some(m)) => assert_eq!(m, 0.0, "{args:?}: {v}"),
                _ => {}
            }
        }
    }
}
