use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gl2census")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn enumerate_height_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["enumerate", "--height-bound", "1", "--store", "s"]);
    let text = fs::read_to_string(dir.path().join("s")).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("#gl2census v1 ell=5 window=200 probe=1000 cexp=960 height=1\n"));

    let again = run(dir.path(), &["enumerate", "--height-bound", "1", "--store", "s"]);
    assert_eq!(again.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(dir.path(), &["enumerate", "--height-bound", "1", "--store", "s", "--force"]);

    let small = run(dir.path(), &["enumerate", "--height-bound", "0.5", "--store", "t"]);
    assert_eq!(small.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&small.stderr).contains("X >= 1"));
}

#[test]
fn classify_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["enumerate", "--height-bound", "1", "--store", "s"]);

    let bare = run(d, &["census", "--store", "s", "--grid", "496"]);
    assert_eq!(bare.status.code(), Some(3));

    let small_ell = run(d, &["classify", "--store", "s", "--ell", "3"]);
    assert_eq!(small_ell.status.code(), Some(2));
    let mismatch = run(d, &["classify", "--store", "s", "--window-bound", "100"]);
    assert_eq!(mismatch.status.code(), Some(3));

    ok(d, &["classify", "--store", "s", "--workers", "2"]);
    let text = fs::read_to_string(d.join("s")).unwrap();
    assert_eq!(text.lines().skip(1).filter(|l| l.split(',').count() == 9).count(), 8);
    ok(d, &["classify", "--store", "s"]);
    assert_eq!(fs::read_to_string(d.join("s")).unwrap(), text);

    let empty = ok(d, &["census", "--store", "s"]);
    assert_eq!(data_lines(&empty), vec!["cutoff_X,M_hat,F_hat,theory_M,theory_F,ratio_M,ratio_F"]);

    let census = ok(d, &["census", "--store", "s", "--grid", "496"]);
    let rows = data_lines(&census);
    assert_eq!(rows.len(), 2);
    let fields: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(fields[0], "496");
    assert!(fields[1].parse::<u64>().unwrap() >= 1);
    assert!(census.contains("# ell=5 window=200 probe=1000 escalation=10000 cexp=960 height=1 seed=0"));

    let under = run(d, &["census", "--store", "s", "--grid", "496,31744"]);
    assert_eq!(under.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&under.stderr).contains("height 2"));

    let unsorted = run(d, &["census", "--store", "s", "--grid", "496,100"]);
    assert_eq!(unsorted.status.code(), Some(2));

    let density = ok(d, &["density", "--store", "s"]);
    assert_eq!(data_lines(&density), vec!["height_X,n_C,n_D,n_E,n_S,d_ratio,s_ratio", "1,8,8,4,4,1.000000,0.500000"]);
}

#[test]
fn sieve_reports_and_rejects_zero_residue() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(dir.path(), &["sieve", "--grid", "50,100", "--t1", "1", "--t2", "2", "--seed", "9"]);
    let rows = data_lines(&csv);
    assert_eq!(rows[0], "X,d,t1,t2,delta_model,statistic,normalized,n_pairs");
    assert!(rows[1].starts_with("50,1,1,2,5/144,"));
    assert!(rows[1].ends_with(",64"));
    assert!(csv.contains("seed=9"));

    let zero = run(dir.path(), &["sieve", "--d", "0"]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn worker_count_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut stores = Vec::new();
    for w in ["1", "4"] {
        let d = dir.path().join(w);
        fs::create_dir(&d).unwrap();
        ok(&d, &["enumerate", "--height-bound", "2", "--store", "s"]);
        ok(&d, &["classify", "--store", "s", "--workers", w]);
        stores.push((fs::read(d.join("s")).unwrap(), ok(&d, &["census", "--store", "s", "--grid", "496,31744"])));
    }
    assert_eq!(stores[0], stores[1]);
}
