use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kronml(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kronml"))
        .arg("--out-dir")
        .arg(out)
        .arg("--quiet")
        .args(args)
        .env_remove("KRONML_SEED")
        .env_remove("KRONML_OUT_DIR")
        .env_remove("KRONML_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let Ok(entries) = fs::read_dir(dir) else { return Vec::new() };
    let mut names: Vec<String> = entries.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

#[test]
fn chartab_of_one_is_the_unit_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["chartab", "--n", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("p(1)=1"), "{s}");
    assert!(s.contains("table=[[1]]"), "{s}");
}

#[test]
fn chartab_twelve_has_77_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["chartab", "--n", "12"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("p(12)=77"));
    let again = kronml(dir.path(), &["chartab", "--n", "12"]);
    assert_eq!(stdout(&o), stdout(&again));
}

#[test]
fn out_of_range_degree_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["chartab", "--n", "25"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(files(dir.path()).is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["gen", "--n", "4", "--encoding", "1", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(files(dir.path()).is_empty());
}

#[test]
fn tampered_cached_table_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kronml(dir.path(), &["chartab", "--n", "6"]).status.code(), Some(0));
    let path = dir.path().join("chartab_6.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let last = lines.len() - 1;
    let mut cells: Vec<String> = lines[last].split(',').map(str::to_owned).collect();
    let cell = cells.last_mut().unwrap();
    *cell = (cell.parse::<i64>().unwrap() + 1).to_string();
    lines[last] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = kronml(dir.path(), &["chartab", "--n", "6"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_prints_counts_and_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = kronml(a.path(), &["gen", "--n", "2", "--encoding", "3"]);
    kronml(b.path(), &["gen", "--n", "2", "--encoding", "3"]);
    assert_eq!(oa.status.code(), Some(0));
    // depths of (2) and (1,1) are 0 and 1; count depth triples obeying the triangle bound
    let depths = [0i32, 1];
    let mut expected = 0;
    for a in depths {
        for b in depths {
            expected += depths.iter().filter(|&&c| (a - b).abs() <= c && c <= a + b).count();
        }
    }
    assert!(stdout(&oa).contains(&format!("rows={expected}\n")));
    let fa = fs::read(a.path().join("dataset_n2_v3.csv")).unwrap();
    let fb = fs::read(b.path().join("dataset_n2_v3.csv")).unwrap();
    assert_eq!(fa, fb);
    let text = String::from_utf8(fa).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with("n=")).collect();
    assert_eq!(data.len(), expected);
    assert!(data.iter().all(|l| l.split(',').count() == 37));
}

#[test]
fn split_manifest_depends_only_on_the_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = kronml(dir.path(), &["--seed", seed, "gen", "--n", "7", "--encoding", "1", "--cap", "100"]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("split_n7.txt")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn mismatched_encoding_is_rejected_without_output() {
    let data = tempfile::tempdir().unwrap();
    assert_eq!(kronml(data.path(), &["gen", "--n", "6", "--encoding", "3"]).status.code(), Some(0));
    let dataset = data.path().join("dataset_n6_v3.csv");
    let out = tempfile::tempdir().unwrap();
    let target = out.path().join("run");
    for cmd in ["train", "eval"] {
        let o = kronml(&target, &[cmd, "--model", "cnn2", "--n", "6", "--dataset", dataset.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&o.stderr).contains("v2"));
    }
    assert!(files(&target).is_empty());
}

#[test]
fn flags_for_another_model_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["train", "--model", "nearn", "--n", "6", "--epochs", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(files(dir.path()).is_empty());
}

#[test]
fn train_writes_model_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["train", "--model", "lgbm", "--n", "7", "--iterations", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names = files(dir.path());
    assert!(names.contains(&"model_lgbm_n7.txt".to_owned()), "{names:?}");
    assert!(names.contains(&"split_lgbm_n7.txt".to_owned()), "{names:?}");
}

#[test]
fn cnn2_at_twelve_reports_its_parameter_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["train", "--model", "cnn2", "--n", "12", "--cap", "50", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("parameters=1122"));
}

#[test]
fn eval_reports_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["eval", "--model", "nearn", "--n", "7", "--repetitions", "2", "--k", "3"];
    for d in [&a, &b] {
        assert_eq!(kronml(d.path(), &args).status.code(), Some(0));
    }
    let names = files(a.path());
    for f in ["report_nearn_n7.json", "report_nearn_n7.txt", "report_nearn_n7.svg", "report_nearn_n7_rep1.json"] {
        assert!(names.contains(&f.to_owned()), "{names:?}");
    }
    let canonical = |d: &tempfile::TempDir| {
        let text = fs::read_to_string(d.path().join("report_nearn_n7.json")).unwrap();
        kronml::eval::EvalReport::from_json(&text).unwrap().to_canonical_json()
    };
    assert_eq!(canonical(&a), canonical(&b));
    let text = |d: &tempfile::TempDir| fs::read_to_string(d.path().join("report_nearn_n7.txt")).unwrap();
    assert_eq!(text(&a), text(&b));
}

#[test]
fn verify_fast_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = kronml(dir.path(), &["verify", "--level", "fast", "--n", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.lines().filter(|l| l.starts_with("PASS")).count() > 40);
    assert!(!s.contains("FAIL"));
}
