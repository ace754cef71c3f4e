use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hone"))
        .args(args)
        .env_remove("HONE_SEED")
        .output()
        .expect("binary runs")
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('%'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const PETERSEN: &str = "0 1\n1 2\n2 3\n3 4\n4 0\n0 5\n1 6\n2 7\n3 8\n4 9\n5 7\n7 9\n9 6\n6 8\n8 5\n";

#[test]
fn triangle_orbit_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "tri.edges", "1 2\n2 3\n1 3\n");
    let out = hone(&["count-orbits", "--input", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# hone count-orbits"));
    let rows = data_rows(&text);
    assert_eq!(rows[0][2], "O1");
    assert_eq!(rows[0][4], "O3");
    let body = &rows[1..];
    assert_eq!(body.len(), 3);
    assert!(body.iter().all(|r| r[4] == "1" && r[3] == "0"));
}

#[test]
fn help_exits_zero() {
    let out = hone(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["count-orbits", "motif-matrix", "embed", "linkpred", "bench"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn missing_input_names_the_path() {
    let out = hone(&["count-orbits", "--input", "/no/such/graph.edges"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("/no/such/graph.edges"), "{err}");
}

#[test]
fn unknown_flag_fails() {
    let out = hone(&["embed", "--bogus"]);
    assert!(!out.status.success());
}

#[test]
fn motif_matrix_market_export() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "tri.edges", "0 1\n1 2\n0 2\n");
    let mtx = dir.path().join("p.mtx");
    let out = hone(&[
        "motif-matrix",
        "--input",
        &input,
        "--orbit",
        "O3",
        "--kind",
        "p",
        "--out",
        mtx.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&mtx).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('%') || l.starts_with("%%"));
    assert_eq!(lines.next().unwrap(), "%%MatrixMarket matrix coordinate real general");
    assert_eq!(lines.next().unwrap(), "3 3 6");
    for l in lines {
        let v: f64 = l.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert_eq!(v, 0.5);
    }
}

#[test]
fn embed_is_reproducible_from_its_header() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "petersen.edges", PETERSEN);
    let z1 = dir.path().join("z1.tsv");
    let y1 = dir.path().join("y1.tsv");
    let out = hone(&[
        "embed", "--input", &input, "--orbits", "O1,O2,O4", "--k", "2", "--dl", "4", "--d", "6",
        "--seed", "3", "--out", z1.to_str().unwrap(), "--y-out", y1.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&z1).unwrap();
    assert!(text.contains("# seed=3"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.len() == 7));
    assert_eq!(data_rows(&fs::read_to_string(&y1).unwrap())[0].len(), 1 + 3 * 2 * 4);

    // Feed the pipeline keys of the header back as a config file.
    let config: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| l.contains('=') && !["input", "one_indexed", "skip_header", "workers"].iter().any(|k| l.starts_with(k)))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = write(dir.path(), "run.cfg", &config);
    let z2 = dir.path().join("z2.tsv");
    let out = hone(&["embed", "--input", &input, "--config", &cfg, "--out", z2.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&z2).unwrap(), text);
}

#[test]
fn seed_environment_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "petersen.edges", PETERSEN);
    let out = Command::new(env!("CARGO_BIN_EXE_hone"))
        .args(["embed", "--input", &input, "--orbits", "O1", "--k", "1", "--dl", "3", "--d", "2", "--seed", "1"])
        .env("HONE_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("# seed=99"));
}

#[test]
fn linkpred_report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "petersen.edges", PETERSEN);
    let report = dir.path().join("report.tsv");
    let out = hone(&[
        "linkpred", "--input", &input, "--orbits", "O1,O2", "--dl", "3", "--d", "4", "--k", "1",
        "--seeds", "2", "--out", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&fs::read_to_string(&report).unwrap());
    assert_eq!(rows[0], ["seed", "K", "lambda", "AUC"]);
    assert_eq!(rows.len(), 1 + 2 + 2);
    assert_eq!(rows[3][0], "mean");
    let mean: f64 = rows[3][3].parse().unwrap();
    assert!((0.0..=1.0).contains(&mean));
}

#[test]
fn bench_small_sizes() {
    let out = hone(&[
        "bench", "--sizes", "100,200", "--orbits", "O1,O3", "--k", "1", "--dl", "4", "--d", "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    assert!(text.contains("# loglog_slope="));
}
