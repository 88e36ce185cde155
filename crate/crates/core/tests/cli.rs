use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fission(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fission"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn line_csv_clusters_into_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "line.csv", "x\n0\n1\n10\n11\n");
    let o = fission(
        &["cluster", "--input", "line.csv", "--algorithm", "fc", "--labels-out", "l.txt", "--report-out", "r.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("l.txt")).unwrap(), "0\n0\n1\n1\n");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["k"], 2);
    assert_eq!(report["algorithm"], "fc");
    assert_eq!(report["split_trace"].as_array().unwrap().len(), 1);
    assert!(report.get("timings").is_none());
}

#[test]
fn imbalance_report_carries_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "imb.json", r#"{"kind": "imbalance", "seed": 1}"#);
    let o = fission(&["cluster", "--generate", "imb.json", "--report-out", "r.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["k"], 2);
    assert_eq!(report["evaluation"]["accuracy"], 1.0);
    assert_eq!(report["denoise"]["separated"], true);
    let text = fs::read_to_string(dir.path().join("r.json")).unwrap();
    let at = |key: &str| text.find(&format!("\"{key}\":")).unwrap();
    assert!(at("dataset") < at("n") && at("n") < at("algorithm") && at("k") < at("evaluation"));
}

#[test]
fn missing_input_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = fission(
        &["cluster", "--input", "absent.csv", "--labels-out", "l.txt", "--report-out", "r.json", "--plot-out", "p.svg"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("absent.csv"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn exit_codes_by_category() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "x,y\n1,2\n3,oops\n");
    write(dir.path(), "three.csv", "x,y,z\n0,0,0\n1,1,1\n5,5,5\n");
    write(dir.path(), "tiny.csv", "x\n0\n1\n2\n3\n4\n5\n");

    // Usage: neither source given, then both.
    assert_eq!(fission(&["cluster"], dir.path()).status.code(), Some(2));
    assert_eq!(
        fission(&["cluster", "--input", "a", "--generate", "b"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(fission(&["cluster", "--input", "tiny.csv", "--n0", "x"], dir.path()).status.code(), Some(2));

    let parse = fission(&["cluster", "--input", "bad.csv"], dir.path());
    assert_eq!(parse.status.code(), Some(4));
    assert!(stderr(&parse).contains("row 3, column 2"), "{}", stderr(&parse));

    let plot = fission(&["plot", "--input", "three.csv", "--plot-out", "p.svg"], dir.path());
    assert_eq!(plot.status.code(), Some(4));
    assert!(stderr(&plot).contains("plot requires 2-D data"));
    assert!(!dir.path().join("p.svg").exists());

    // Six points, r = 0.9 leaves one: over-denoised when nothing separates.
    let algo = fission(&["cluster", "--input", "tiny.csv", "--t", "50"], dir.path());
    assert_eq!(algo.status.code(), Some(5), "{}", stderr(&algo));

    let help = fission(&["--help"], dir.path());
    assert!(help.status.success());
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("Exit codes") && text.contains("FC_THREADS"));
}

#[test]
fn plain_fc_warns_about_ignored_parameters() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "line.csv", "x\n0\n1\n10\n11\n");
    let o = fission(&["cluster", "--input", "line.csv", "--algorithm", "fc", "--n0", "3", "--t", "5"], dir.path());
    assert!(o.status.success());
    let err = stderr(&o);
    assert!(err.contains("--n0 is ignored") && err.contains("--t is ignored"), "{err}");
}

#[test]
fn generate_evaluate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(fission(&["generate", "--kind", "imbalance", "--seed", "4", "--output", "d.csv"], p).status.success());
    let o = fission(&["cluster", "--input", "d.csv", "--labels-out", "l.txt", "--plot-out", "p.svg", "--report-out", "r.json"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let e = fission(&["evaluate", "--labels", "l.txt", "--input", "d.csv"], p);
    assert!(e.status.success(), "{}", stderr(&e));
    let eval: serde_json::Value = serde_json::from_slice(&e.stdout).unwrap();
    assert_eq!(eval["accuracy"], 1.0);
    let svg = fs::read_to_string(p.join("p.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 101);
    assert!(fission(&["plot", "--input", "d.csv", "--plot-out", "truth.svg"], p).status.success());
}

#[test]
fn sweep_rejects_degenerate_range() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "g.json", r#"{"kind": "grid_line", "rows": 10, "cols": 10}"#);
    let bad = fission(&["sweep", "--generate", "g.json", "--t-range", "5:2:1"], dir.path());
    assert_eq!(bad.status.code(), Some(4));
    let ok = fission(&["sweep", "--generate", "g.json", "--t-range", "2:4:1", "--n0", "2%"], dir.path());
    assert!(ok.status.success(), "{}", stderr(&ok));
    let table = String::from_utf8_lossy(&ok.stdout);
    assert!(table.contains("2%: 2..4 -> 1 (3 runs)"), "{table}");
}

#[test]
fn bench_single_size_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = fission(&["bench", "--sizes", "10", "--repeats", "1", "--n0", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "bf.json", r#"{"kind": "bridge_families", "seed": 2}"#);
    let mut seen: Vec<Vec<Vec<u8>>> = Vec::new();
    for run in 0..3 {
        let files = [format!("l{run}.txt"), format!("r{run}.json"), format!("p{run}.svg"), format!("d{run}.csv")];
        let o = fission(
            &["cluster", "--generate", "bf.json", "--seed", "7", "--labels-out", &files[0], "--report-out", &files[1], "--plot-out", &files[2]],
            p,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(fission(&["generate", "--generate", "bf.json", "--output", &files[3]], p).status.success());
        seen.push(files.iter().map(|f| fs::read(p.join(f)).unwrap()).collect());
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[1], seen[2]);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "s.json", r#"{"kind": "blobs", "k": 4, "seed": 3}"#);
    let mut reports = Vec::new();
    for threads in ["1", "3", "0"] {
        let o = Command::new(env!("CARGO_BIN_EXE_fission"))
            .args(["cluster", "--generate", "s.json"])
            .env("FC_THREADS", threads)
            .current_dir(p)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        reports.push(o.stdout);
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[1], reports[2]);
    let bad = Command::new(env!("CARGO_BIN_EXE_fission"))
        .args(["cluster", "--generate", "s.json"])
        .env("FC_THREADS", "many")
        .current_dir(p)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(4));
}
