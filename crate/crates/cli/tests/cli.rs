mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::{random_rational_points, run_cli};

fn triangle_file(dir: &tempfile::TempDir) -> String {
    let path = dir.path().join("tri.txt");
    std::fs::write(&path, "# worked example\n0 0\n1 0\n0 3/4\n").unwrap();
    path.to_str().unwrap().to_string()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut args = args.to_vec();
    args.push("--json");
    let (code, out, err) = run_cli(&args);
    assert!(err.is_empty(), "stderr: {err}");
    (code, serde_json::from_str(&out).unwrap())
}

#[test]
fn example_succeeds() {
    let (code, v) = json(&["example"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["passed"], Value::Bool(true));
    assert_eq!(v["results"]["best"]["indices"], serde_json::json!([2, 3]));
}

#[test]
fn eval_scaled_pair() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scaled.txt");
    std::fs::write(&path, "0 0\n3 0\n0 2.25\n").unwrap();
    let (code, v) = json(&[
        "eval",
        path.to_str().unwrap(),
        "--theta0",
        "1",
        "--subset",
        "2,3",
    ]);
    assert_eq!(code, 0);
    let got = v["results"]["sp_value"].as_f64().unwrap();
    assert!((got - 2.0 / (1.0 + (-3.75f64).exp())).abs() < 1e-11);
    assert!((got - 1.954045).abs() < 1e-6);
    assert_eq!(v["inputs"]["backend"], "floating");
}

#[test]
fn eval_rejects_bad_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let f = triangle_file(&dir);
    for subset in ["1,1", "0,2", "2,4"] {
        let (code, out, err) = run_cli(&["eval", &f, "--theta0", "1", "--subset", subset]);
        assert_eq!(code, 1, "{subset}");
        assert!(out.is_empty());
        assert!(err.starts_with("error:"));
    }
}

#[test]
fn usage_and_input_errors_exit_one() {
    assert_eq!(run_cli(&["select"]).0, 1);
    assert_eq!(
        run_cli(&["eval", "/nonexistent/points.txt", "--theta0", "1"]).0,
        1
    );
    let dir = tempfile::tempdir().unwrap();
    let f = triangle_file(&dir);
    assert_eq!(run_cli(&["eval", &f, "--theta0", "-1"]).0, 1);
    assert_eq!(run_cli(&["select", &f, "--theta0", "1", "--k", "4"]).0, 1);
    let dup = dir.path().join("dup.txt");
    std::fs::write(&dup, "0 0\n1/2 1\n0.5 1\n").unwrap();
    assert_eq!(run_cli(&["margins", dup.to_str().unwrap()]).0, 1);
    let (code, out, _) = run_cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("verify"));
}

#[test]
fn budget_exceeded_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let f = triangle_file(&dir);
    let (code, _, err) = run_cli(&["select", &f, "--theta0", "1", "--k", "2", "--budget", "2"]);
    assert_eq!(code, 2);
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn margins_report_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let f = triangle_file(&dir);
    let (code, v) = json(&["margins", &f]);
    assert_eq!(code, 0);
    let r = &v["results"];
    assert_eq!(r["delta"].as_f64(), Some(0.75));
    assert_eq!(r["eta"].as_f64(), Some(0.25));
    assert_eq!(r["bit_length"], 3);
    assert_eq!(r["delta_squared"], "9/16");
    assert_eq!(r["bit_margin_holds"], true);

    let unit = dir.path().join("unit.txt");
    std::fs::write(&unit, "0 0\n1 0\n").unwrap();
    let (_, v) = json(&["margins", unit.to_str().unwrap(), "--exact"]);
    assert_eq!(v["results"]["epsilon"], "1/4096");
    assert_eq!(v["results"]["eta_is_sentinel"], true);
}

#[test]
fn reduce_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let f = triangle_file(&dir);
    let (code, v) = json(&["reduce", &f, "--theta0", "1", "--k", "2"]);
    assert_eq!(code, 0);
    let plan = &v["results"]["plan"];
    assert_eq!(plan["mode"], "analytic");
    let threshold = plan["threshold"].as_f64().unwrap();
    assert!((threshold - 16f64.ln()).abs() < 1e-9);
    assert!((plan["scale"].as_f64().unwrap() - 1.1 * threshold).abs() < 1e-9);
    assert_eq!(v["results"]["certificate"]["separated"], true);

    let (code, v) = json(&["reduce", &f, "--theta0", "1", "--k", "2", "--mode", "bits"]);
    assert_eq!(code, 0);
    let plan = &v["results"]["plan"];
    assert_eq!(plan["scale"], (3u64 << 36).to_string());
    assert_eq!(plan["bits"]["m"], "8");
    assert_eq!(v["results"]["certificate"]["log_domain"], true);

    let out = dir.path().join("x.txt");
    let (code, _, err) = run_cli(&[
        "reduce",
        &f,
        "--theta0",
        "1",
        "--k",
        "2",
        "--mode",
        "bits",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn verify_passes_and_matches_select_on_the_image() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts = random_rational_points(&mut rng, 8, 128, 64);
    let f = common::write_points(dir.path(), "p.txt", &pts);
    let f = f.to_str().unwrap();
    let (code, v) = json(&["verify", f, "--theta0", "1", "--k", "3"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["passed"], true);

    let image = dir.path().join("image.txt");
    let (code, _) = json(&[
        "reduce",
        f,
        "--theta0",
        "1",
        "--k",
        "3",
        "--output",
        image.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, s) = json(&[
        "select",
        image.to_str().unwrap(),
        "--theta0",
        "1",
        "--k",
        "3",
    ]);
    assert_eq!(code, 0);
    assert_eq!(s["results"]["all_optima"], v["results"]["sp_optima"]);
    let optima = s["results"]["all_optima"].as_array().unwrap();
    assert_eq!(s["results"]["best"], optima[0]);
    assert!(optima.contains(&v["results"]["argmax"]));
}

#[test]
fn verify_reports_vacuous_far_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("far.txt");
    std::fs::write(&path, "0 0\n5 0\n0 5\n").unwrap();
    let (code, v) = json(&[
        "verify",
        path.to_str().unwrap(),
        "--theta0",
        "1",
        "--k",
        "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["certificate"]["bad_class_empty"], true);
    assert_eq!(
        v["results"]["independent_sets"].as_array().unwrap().len(),
        3
    );
}

#[test]
fn table_output_lists_sections() {
    let dir = tempfile::tempdir().unwrap();
    let f = triangle_file(&dir);
    let (code, out, _) = run_cli(&["select", &f, "--theta0", "1", "--k", "2", "--threads", "2"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("command: select\n[inputs]\n"));
    assert!(out.contains("[results]\n"));
    assert_eq!(
        run_cli(&["select", &f, "--theta0", "1", "--k", "2", "--threads", "0"]).0,
        1
    );
}

#[test]
fn greedy_runs() {
    let dir = tempfile::tempdir().unwrap();
    let f = triangle_file(&dir);
    let (code, v) = json(&["select", &f, "--theta0", "1", "--k", "2", "--greedy"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["best"]["indices"], serde_json::json!([2, 3]));
}
