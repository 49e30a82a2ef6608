use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tdir(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdir"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TDIR_THREADS")
        .output()
        .expect("run tdir")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "# H1\n1,1,3\n1,2,5\n\n0,0,inf\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "1,2,6\n1,4,10\n0,0,inf\n").unwrap();
    std::fs::write(dir.path().join("fin.csv"), "1,1,3\n1,2,5\n").unwrap();
    std::fs::write(dir.path().join("square.csv"), "0,0\n1,0\n1,1\n0,1\n").unwrap();
    dir
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

#[test]
fn bottleneck_self_is_zero() {
    let d = fixture();
    let o = tdir(&["bottleneck", "fin.csv", "fin.csv"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "distance"), "0");
}

#[test]
fn di_dissim_reports_interval() {
    let d = fixture();
    let o = tdir(
        &[
            "di-dissim",
            "a.csv",
            "b.csv",
            "--partitions",
            "100",
            "--cap-essential",
            "max",
        ],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    for key in ["value", "c_star", "c_min", "c_max", "d0", "error_bound"] {
        value(&s, key);
    }
    assert_eq!(value(&s, "value"), "0");
    assert_eq!(value(&s, "c_star"), "2");
}

#[test]
fn report_curve_is_written() {
    let d = fixture();
    let o = tdir(
        &[
            "di-dissim",
            "fin.csv",
            "fin.csv",
            "--partitions",
            "10",
            "--report-curve",
            "curve.csv",
        ],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let curve = std::fs::read_to_string(d.path().join("curve.csv")).unwrap();
    assert!(curve.starts_with("t,theta\n"));
    assert_eq!(curve.lines().count(), 12);
}

#[test]
fn essential_points_need_a_cap() {
    let d = fixture();
    let o = tdir(&["bottleneck", "a.csv", "b.csv"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a.csv"));
    let o = tdir(
        &["bottleneck", "a.csv", "b.csv", "--cap-essential", "20"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn missing_file_is_data_error_naming_it() {
    let d = fixture();
    let o = tdir(&["wasserstein", "fin.csv", "missing.csv"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn malformed_file_is_data_error_naming_it() {
    let d = fixture();
    std::fs::write(d.path().join("bad.csv"), "1,5,2\n").unwrap();
    let o = tdir(&["bottleneck", "fin.csv", "bad.csv"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv"));
}

#[test]
fn usage_errors_exit_one() {
    let d = fixture();
    for args in [
        vec!["bottleneck", "fin.csv"],
        vec!["no-such-command"],
        vec!["di-dissim", "fin.csv", "fin.csv", "--partitions", "0"],
        vec![
            "bottleneck",
            "fin.csv",
            "fin.csv",
            "--cap-essential",
            "soon",
        ],
        vec!["cdf", "--metric", "cosine"],
    ] {
        let o = tdir(&args, d.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
    assert_eq!(tdir(&["--help"], d.path()).status.code(), Some(0));
}

#[test]
fn bad_thread_variable_is_usage_error() {
    let d = fixture();
    let o = Command::new(env!("CARGO_BIN_EXE_tdir"))
        .args(["bottleneck", "fin.csv", "fin.csv"])
        .current_dir(d.path())
        .env("TDIR_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = tdir(
        &["--threads", "2", "bottleneck", "fin.csv", "fin.csv"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn json_is_a_single_object() {
    let d = fixture();
    for args in [
        vec![
            "--json",
            "bottleneck",
            "fin.csv",
            "b.csv",
            "--cap-essential",
            "max",
        ],
        vec!["di-dist", "fin.csv", "fin.csv", "--json"],
        vec!["wasserstein", "fin.csv", "fin.csv", "--json"],
        vec!["ph", "--input", "square.csv", "--json"],
    ] {
        let o = tdir(&args, d.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
        assert!(v.is_object());
    }
}

#[test]
fn ph_of_square() {
    let d = fixture();
    let o = tdir(
        &["ph", "--input", "square.csv", "--out", "dgm.csv"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(value(&s, "h0"), "4");
    assert_eq!(value(&s, "h1"), "1");
    let dgm = std::fs::read_to_string(d.path().join("dgm.csv")).unwrap();
    assert!(dgm.contains("1,1,1.4142135623730951"));
    assert!(dgm.contains("0,0,inf"));
}

#[test]
fn frechet_mean_of_copies() {
    let d = fixture();
    let o = tdir(
        &[
            "frechet-mean",
            "fin.csv",
            "fin.csv",
            "fin.csv",
            "--out",
            "m.csv",
        ],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "functional"), "0");
    let m = std::fs::read_to_string(d.path().join("m.csv")).unwrap();
    let fin = std::fs::read_to_string(d.path().join("fin.csv")).unwrap();
    assert_eq!(m, fin);
}

fn run_twice(args: &[&str], file: &str) -> (String, String) {
    let mut outs = Vec::new();
    for _ in 0..2 {
        let d = tempfile::tempdir().unwrap();
        let o = tdir(args, d.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let path: PathBuf = d.path().join(file);
        outs.push(std::fs::read_to_string(path).unwrap());
    }
    (outs.remove(0), outs.remove(0))
}

#[test]
fn cdf_csv_is_deterministic() {
    let args = [
        "cdf",
        "--metric",
        "poincare",
        "--radius",
        "0.5",
        "--samples",
        "60",
        "--seed",
        "3",
        "--out",
        "cdf.csv",
    ];
    let (a, b) = run_twice(&args, "cdf.csv");
    assert_eq!(a, b);
    assert!(a.starts_with("threshold,empirical,theoretical\n"));
}

#[test]
fn cdf_seed_changes_output() {
    let base = ["cdf", "--samples", "40", "--out", "cdf.csv", "--seed"];
    let (a, _) = run_twice(&[&base[..], &["1"]].concat(), "cdf.csv");
    let (b, _) = run_twice(&[&base[..], &["2"]].concat(), "cdf.csv");
    assert_ne!(a, b);
}

#[test]
fn evaluate_csv_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let root = d.path();
    for (label, pts) in [
        ("square", "0,0\n1,0\n1,1\n0,1\n0.5,0\n1,0.5\n0.5,1\n0,0.5\n"),
        ("line", "0,0\n1,0\n2,0\n3,0\n4,0\n5,0\n6,0\n7,0\n"),
    ] {
        std::fs::create_dir_all(root.join(label)).unwrap();
        std::fs::write(root.join(label).join("pts.csv"), pts).unwrap();
    }
    let dataset = root.display().to_string();
    let args = [
        "evaluate",
        "--dataset",
        &dataset,
        "--proportions",
        "0.5,1",
        "--trials",
        "3",
        "--m",
        "6",
        "--samples",
        "2",
        "--out",
        "table.csv",
    ];
    let (a, b) = run_twice(&args, "table.csv");
    assert_eq!(a, b);
    assert!(a.starts_with("proportion,distance,top1,top2,queries\n"));
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn classify_with_diagram_templates() {
    let d = fixture();
    let tpl = d.path().join("templates");
    std::fs::create_dir_all(&tpl).unwrap();
    std::fs::write(tpl.join("loop.csv"), "1,1,1.5\n").unwrap();
    std::fs::write(tpl.join("flat.csv"), "1,1,5\n").unwrap();
    let o = tdir(
        &[
            "classify",
            "--templates",
            "templates",
            "--query",
            "square.csv",
        ],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(value(&s, "best"), "loop");
    value(&s, "score.flat");
}
