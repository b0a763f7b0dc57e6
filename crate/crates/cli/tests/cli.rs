use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use comimp::io::{read_csv_path, write_csv, CsvOptions};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_comimp"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn worked_example_merge() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("merged.csv");
    let res = run(&[
        "merge",
        s(&fixture("d1.csv")),
        s(&fixture("d2.csv")),
        "--label",
        "BSL",
        "--imputer",
        "mean",
        "--id-columns",
        "person",
        "-o",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let expected = "person,height,weight,calo/meal,BSL\n\
                    1,120,80,140,80\n2,150,70,140,90\n3,140,80,140,85\n4,135,85,140,95\n\
                    5,136.25,90,100,100\n6,136.25,85,150,95\n7,136.25,92,170,82\n";
    assert_eq!(fs::read_to_string(&out).unwrap(), expected);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("merged.csv.report.json")).unwrap()).unwrap();
    for key in ["union_features", "row_ranges", "cells_created", "cells_imputed", "imputer", "seed"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
    assert_eq!(report["union_features"], serde_json::json!(["height", "weight", "calo/meal"]));
    assert_eq!(report["row_ranges"], serde_json::json!([[0, 4], [4, 7]]));
    assert_eq!(report["cells_created"], 7);
    assert_eq!(report["cells_imputed"], 7);
    assert_eq!(report["imputer"]["method"], "mean");
    assert_eq!(report["seed"], 0);
}

#[test]
fn id_columns_missing_from_a_file_get_the_null_marker() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "id,x,y\nr1,1,0\nr2,2,1\n");
    let b = write(&dir, "b.csv", "x,z,y\n3,5,0\n4,6,1\n");
    let out = dir.path().join("m.csv");
    let res = run(&[
        "merge", s(&a), s(&b), "--label", "y", "--imputer", "mean", "--id-columns", "id", "--na", "NA", "-o", s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "id,x,z,y\nr1,1,5.5,0\nr2,2,5.5,1\nNA,3,5,0\nNA,4,6,1\n"
    );
}

#[test]
fn merging_a_file_with_itself() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("self.csv");
    let d1 = fixture("d1.csv");
    let res = run(&["merge", s(&d1), s(&d1), "--label", "BSL", "-o", s(&out)]);
    assert_eq!(code(&res), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("self.csv.report.json")).unwrap()).unwrap();
    assert_eq!(report["cells_imputed"], 0);
}

#[test]
fn merged_output_is_canonical() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.csv");
    let res = run(&[
        "merge",
        s(&fixture("d1.csv")),
        s(&fixture("d2.csv")),
        "--label",
        "BSL",
        "--id-columns",
        "person",
        "-o",
        s(&out),
    ]);
    assert_eq!(code(&res), 0);
    let mut opts = CsvOptions::new("BSL");
    opts.id_columns = vec!["person".into()];
    let table = read_csv_path(&out, &opts).unwrap();
    let mut bytes = Vec::new();
    write_csv(&mut bytes, &table, "").unwrap();
    assert_eq!(bytes, fs::read(&out).unwrap());
}

#[test]
fn schema_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.csv");
    let headerless = write(&dir, "nohead.csv", "1,120,80,80\n2,150,70,90\n");
    let res = run(&["merge", s(&headerless), s(&fixture("d2.csv")), "--label", "BSL", "-o", s(&out)]);
    assert_eq!(code(&res), 2);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("nohead.csv"), "{err}");

    let ragged = write(&dir, "ragged.csv", "a,BSL\n1,2\n3\n");
    let res = run(&["merge", s(&ragged), s(&fixture("d2.csv")), "--label", "BSL", "-o", s(&out)]);
    assert_eq!(code(&res), 2);

    let empty = write(&dir, "empty.csv", "");
    let res = run(&["merge", s(&empty), s(&fixture("d2.csv")), "--label", "BSL", "-o", s(&out)]);
    assert_eq!(code(&res), 2);
}

#[test]
fn all_missing_column_exits_3() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "x,w,y\n1,NA,0\n2,NA,1\n");
    let b = write(&dir, "b.csv", "x,y\n3,0\n");
    let out = dir.path().join("m.csv");
    let res = run(&["merge", s(&a), s(&b), "--label", "y", "--imputer", "mean", "-o", s(&out)]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains('w'));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&run(&["check-theorem", "--trials", "0"])), 64);
    assert_eq!(code(&run(&["merge", "only-one.csv", "--label", "y", "-o", "x.csv"])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["--help"])), 0);
    let res = run(&[
        "merge",
        s(&fixture("d1.csv")),
        s(&fixture("d2.csv")),
        "--label",
        "BSL",
        "--imputer",
        "knn",
        "--k",
        "0",
        "-o",
        "unused.csv",
    ]);
    assert_eq!(code(&res), 64);
}

fn pair(dir: &TempDir, name: &str, header: &str, rows: &[String]) -> (PathBuf, PathBuf) {
    let half = rows.len() / 2;
    let train = format!("{header}\n{}\n", rows[..half].join("\n"));
    let test = format!("{header}\n{}\n", rows[half..].join("\n"));
    (
        write(dir, &format!("{name}_train.csv"), &train),
        write(dir, &format!("{name}_test.csv"), &test),
    )
}

fn synthetic_rows(n: usize, offset: f64) -> Vec<String> {
    (0..n)
        .map(|i| {
            let t = i as f64 + offset;
            format!(
                "{},{},{},{},{}",
                (t * 0.7).sin(),
                (t * 1.3).cos(),
                (t * 0.4).sin() * 2.0,
                (t * 0.9).cos() + t * 0.01,
                i % 2
            )
        })
        .collect()
}

fn pca_args<'a>(p1: &'a (PathBuf, PathBuf), p2: &'a (PathBuf, PathBuf), prefix: &'a Path) -> Vec<&'a str> {
    vec![
        "pca-merge",
        "--train1",
        s(&p1.0),
        "--test1",
        s(&p1.1),
        "--train2",
        s(&p2.0),
        "--test2",
        s(&p2.1),
        "--label",
        "y",
        "--output-prefix",
        s(prefix),
    ]
}

#[test]
fn pca_merge_block_shapes() {
    // six features in total: s1, s2 shared, a1, a2 only in the first, b1, b2 only in the second
    let dir = TempDir::new().unwrap();
    let p1 = pair(&dir, "d1", "s1,s2,a1,a2,y", &synthetic_rows(20, 0.0));
    let p2 = pair(&dir, "d2", "s1,b1,s2,b2,y", &synthetic_rows(16, 3.0));
    let prefix = dir.path().join("out");
    let mut args = pca_args(&p1, &p2, &prefix);
    args.extend(["--components", "1"]);
    let res = run(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let train = fs::read_to_string(dir.path().join("out_train.csv")).unwrap();
    let header: Vec<&str> = train.lines().next().unwrap().split(',').collect();
    assert_eq!(header, ["s1", "s2", "q1_pc1", "q2_pc1", "y"]);
    assert_eq!(train.lines().count(), 1 + 10 + 8);
    let test = fs::read_to_string(dir.path().join("out_test.csv")).unwrap();
    assert_eq!(test.lines().count(), 1 + 10 + 8);
    for f in ["out_report.json", "out_pca.json"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn pca_merge_full_variance_keeps_block_rank() {
    let dir = TempDir::new().unwrap();
    let p1 = pair(&dir, "d1", "s1,s2,a1,a2,y", &synthetic_rows(20, 0.0));
    let p2 = pair(&dir, "d2", "s1,b1,s2,b2,y", &synthetic_rows(16, 3.0));
    let prefix = dir.path().join("full");
    let mut args = pca_args(&p1, &p2, &prefix);
    args.extend(["--var-explained", "1.0"]);
    assert_eq!(code(&run(&args)), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("full_pca.json")).unwrap()).unwrap();
    let blocks = summary["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 2);
    for b in blocks {
        assert_eq!(b["components"].as_array().unwrap().len(), 2);
        assert_eq!(b["reconstruction"]["passes"], true);
    }
}

#[test]
fn pca_merge_without_exclusive_features_matches_merge() {
    let dir = TempDir::new().unwrap();
    let p1 = pair(&dir, "d1", "s1,s2,a1,a2,y", &synthetic_rows(20, 0.0));
    let p2 = pair(&dir, "d2", "s1,s2,a1,a2,y", &synthetic_rows(16, 3.0));
    let prefix = dir.path().join("same");
    let res = run(&pca_args(&p1, &p2, &prefix));
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let merged = dir.path().join("merged.csv");
    assert_eq!(code(&run(&["merge", s(&p1.0), s(&p2.0), "--label", "y", "-o", s(&merged)])), 0);
    assert_eq!(
        fs::read_to_string(dir.path().join("same_train.csv")).unwrap(),
        fs::read_to_string(&merged).unwrap()
    );
}

#[test]
fn pca_block_with_missing_cells_exits_4() {
    let dir = TempDir::new().unwrap();
    let mut rows = synthetic_rows(20, 0.0);
    rows[1] = "0.1,0.2,NA,0.3,1".into();
    let p1 = pair(&dir, "d1", "s1,s2,a1,a2,y", &rows);
    let p2 = pair(&dir, "d2", "s1,b1,s2,b2,y", &synthetic_rows(16, 3.0));
    let prefix = dir.path().join("bad");
    assert_eq!(code(&run(&pca_args(&p1, &p2, &prefix))), 4);
}

#[test]
fn regression_bench_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = run(&["bench", "regression-sim", "--repeats", "25", "--seed", "42", "--output", s(out)]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    assert!(String::from_utf8(text)
        .unwrap()
        .starts_with("model,partition,metric,mean,variance,repeats,seed\n"));
}

#[test]
fn bench_config_file_and_repeat_failure() {
    let dir = TempDir::new().unwrap();
    // one sample of class 1, so most training partitions hold a single class
    let mut text = String::from("a,b,c,class\n");
    for i in 0..30 {
        text.push_str(&format!("{i},{},{},{}\n", i * 2, i % 5, u8::from(i == 0)));
    }
    let data = write(&dir, "lopsided.csv", &text);
    let cfg = write(
        &dir,
        "study.toml",
        "repeats = 6\nseed = 3\n[imputer]\nmethod = \"mean\"\n[study]\ncomponent_fractions = [0.5, 0.5]\ndeletions = [[0], [2]]\n",
    );
    let res = run(&["bench", "merge-study", "--config", s(&cfg), "--data", s(&data)]);
    assert_eq!(code(&res), 5, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("repeat"));

    let bad = write(&dir, "bad.toml", "repeatz = 3\n");
    assert_eq!(code(&run(&["bench", "regression-sim", "--config", s(&bad)])), 64);
}

#[test]
fn imputation_study_runs_on_bundled_wine() {
    let res = run(&["bench", "imputation-study", "--repeats", "2", "--imputer", "mean", "--rate", "0.4"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let out = String::from_utf8(res.stdout).unwrap();
    assert!(out.contains("f2,test2,accuracy"));
    assert!(out.contains("f,test2,accuracy"));
}

#[test]
fn check_theorem_reports_zero_violations() {
    let res = run(&["check-theorem", "--trials", "500", "--seed", "1"]);
    assert_eq!(code(&res), 0);
    let out = String::from_utf8(res.stdout).unwrap();
    assert!(out.contains("trials: 500\nviolations: 0\n"), "{out}");
}

#[test]
fn single_trial_matches_library() {
    let res = run(&["check-theorem", "--trials", "1", "--seed", "7"]);
    assert_eq!(code(&res), 0);
    let out = String::from_utf8(res.stdout).unwrap();
    let r = comimp::bench::check_theorem(1, (5, 50), (5, 50), 7).unwrap();
    let line = format!(
        "first_trial_sse: d1={} d2={} merged={}",
        r.first.d1, r.first.d2, r.first.merged
    );
    assert!(out.contains(&line), "{out}");
}
