use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wicksell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wicksell")).args(args).env_remove("WICKSELL_SEED").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn value_at_x(o: &Output) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["value_at_x"].as_f64().unwrap()
}

fn sample(dir: &Path, name: &str, seed: &str) -> String {
    let p = dir.join(name).to_str().unwrap().to_string();
    let o = wicksell(&["sample", "--model", "paper-sec5", "--n", "1000", "--seed", seed, "-o", &p]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    p
}

#[test]
fn sample_writes_header_and_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = sample(dir.path(), "a.csv", "7");
    let b = sample(dir.path(), "b.csv", "7");
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next(), Some("z"));
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
}

#[test]
fn environment_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let reference = sample(dir.path(), "ref.csv", "11");
    let p = dir.path().join("env.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_wicksell"))
        .args(["sample", "--n", "1000", "--seed", "3", "-o", p.to_str().unwrap()])
        .env("WICKSELL_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(reference).unwrap(), fs::read_to_string(p).unwrap());
}

#[test]
fn bad_arguments_exit_with_config_code() {
    assert_eq!(code(&wicksell(&["sample", "--n", "-5"])), 2);
    assert_eq!(code(&wicksell(&["sample", "--n", "0"])), 2);
    let o = wicksell(&["sample", "--n", "10", "--model", "no-such-model"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[unknown_preset]"));
}

#[test]
fn profile_and_projected_naive_agree() {
    let dir = tempfile::tempdir().unwrap();
    let z = sample(dir.path(), "z.csv", "5");
    let out = dir.path().join("est.csv");
    let run = |id: &str| wicksell(&["estimate", "-i", &z, "--estimator", id, "-o", out.to_str().unwrap()]);
    let (p, n) = (run("profile"), run("proj-naive"));
    assert_eq!(code(&p), 0);
    assert!((value_at_x(&p) - value_at_x(&n)).abs() < 1e-6);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("knot,value,estimator_id"));

    let o = run("bogus");
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[invalid_argument]"));
    let o = wicksell(&["estimate", "-i", &z, "--flat", "3,2", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[invalid_interval]"));
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let o = wicksell(&["estimate", "-i", "/nonexistent/z.csv"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[io]"));
}

#[test]
fn limits_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let p = dir.path().join(name);
        let o = wicksell(&[
            "limits", "--law", "lx", "--npaths", "600", "--grid-m", "40", "--n-mc", "5000", "--threads", threads, "-o",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(summary["law_id"], "L_x");
        assert_eq!(summary["npaths"], 600);
        fs::read_to_string(p).unwrap()
    };
    let a = run("1", "a.csv");
    assert_eq!(a, run("3", "b.csv"));
    assert_eq!(a.lines().next(), Some("draw"));
    assert_eq!(a.lines().count(), 601);
}

#[test]
fn reproduce_creates_output_dir_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/run");
    let o = wicksell(&[
        "reproduce", "--quick", "--sample-sizes", "50,100", "--replications", "20", "--npaths", "200", "--grid-m", "20",
        "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["table1.csv", "equivalence.csv", "manifest.json", "figures/overlay.csv", "figures/scatter.csv", "figures/kde.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["input_hash"].as_str().unwrap().len(), 40);
    let table = fs::read_to_string(out.join("table1.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("Normal,limit,0.524")));
}

#[test]
fn single_replication_marks_na_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r1");
    let o = wicksell(&[
        "reproduce", "--quick", "--sample-sizes", "30", "--replications", "1", "--npaths", "100", "--grid-m", "10", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning[degenerate_sample]"));
    assert!(fs::read_to_string(out.join("table1.csv")).unwrap().contains("slope,30,NA,NA"));
}

#[test]
fn failed_reproduction_keeps_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    // flat interval beyond the support bound of the model
    let o = wicksell(&["reproduce", "--quick", "--flat", "30,31", "--x", "30.5", "-o", out.to_str().unwrap()]);
    assert_ne!(code(&o), 0);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], false);
    assert!(manifest["error"].as_str().unwrap().starts_with("invalid_interval"));
}
