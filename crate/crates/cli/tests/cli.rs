use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

fn uqbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uqbench")).args(args).output().unwrap()
}

fn write_fixture(dir: &Path) -> String {
    let mut csv = String::from("x1,x2,group,label\n");
    for i in 0..240u32 {
        let label = (i * 7 + i / 3) % 2;
        let group = if i % 5 == 0 { "b" } else { "a" };
        let x1 = f64::from(label) * 1.5 + f64::from(i % 11) * 0.13;
        let x2 = f64::from(i % 13) * 0.2 - f64::from(label) + if group == "b" { 2.0 } else { 0.0 };
        let _ = writeln!(csv, "{x1:.3},{x2:.3},{group},{label}");
    }
    std::fs::write(dir.join("toy.csv"), csv).unwrap();
    let config = r#"
seeds = [0, 1]
models = ["logistic"]
output_dir = "out"
[tasks]
n_bootstrap = 20
[[datasets]]
name = "toy"
path = "toy.csv"
label_column = "label"
split = { feature = "group", ood = { values = ["b"] } }
"#;
    let path = dir.join("toy.toml");
    std::fs::write(&path, config).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_reports_and_report_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = uqbench(&["run", "--config", &config, "--seeds", "0", "--export-scores"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    for f in ["report.md", "results.csv", "report.json", "provenance.json"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("| Logistic Regression | Baseline |"));
    assert!(out_dir.join("scores/toy_seed0_knn_distance_test.csv").is_file());
    assert!(out_dir.join("scores/toy_seed0_logistic_conformal_p_value_shifted.csv").is_file());

    let rerender = dir.path().join("again");
    let out = uqbench(&[
        "report",
        "--input",
        out_dir.join("report.json").to_str().unwrap(),
        "--output",
        rerender.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read(out_dir.join("report.md")).unwrap(),
        std::fs::read(rerender.join("report.md")).unwrap()
    );
}

#[test]
fn task_prints_single_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = uqbench(&[
        "task", "--config", &config, "--dataset", "toy", "--seed", "1", "--model", "logistic", "--row", "baseline",
        "--task", "ood_detection",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8_lossy(&out.stdout);
    let value: f64 = line.trim().rsplit(": ").next().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&value));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[[datasets]]\npath = \"nowhere.csv\"\nlabel_column = \"y\"\nsplit = { feature = \"g\", ood = { values = [\"x\"] } }\n").unwrap();
    let out = uqbench(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));

    let out = uqbench(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_cells_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // separable data: the model makes no test errors, so error detection is undefined
    let mut csv = String::from("x,g,label\n");
    for i in 0..80 {
        let _ = writeln!(csv, "{},{},{}", i + if i >= 40 { 200 } else { 0 }, if i % 4 == 0 { "b" } else { "a" }, u8::from(i >= 40));
    }
    std::fs::write(dir.path().join("d.csv"), csv).unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "seeds = [0]\n[[datasets]]\npath = \"d.csv\"\nlabel_column = \"label\"\nsplit = { feature = \"g\", ood = { values = [\"b\"] } }\n",
    )
    .unwrap();
    let out = uqbench(&["run", "--config", dir.path().join("c.toml").to_str().unwrap(), "--formats", "json"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing values"));
}
