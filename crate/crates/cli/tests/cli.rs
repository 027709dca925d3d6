use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_etrbench"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("etrbench-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run(args: &[&str]) -> Output {
    let o = bin().args(args).env_remove("ETRBENCH_API_KEY").output().unwrap();
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

#[test]
fn usage_errors_exit_two_and_runtime_errors_exit_one() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["render", "--problems", "/nonexistent/p.jsonl"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["predict", "{p("]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn predict_prints_the_conclusion_and_trace() {
    let o = run(&[
        "predict",
        "--trace",
        "{vis(moon2()),~vis(moon2())}",
        "{vis(asteroidB()),vis(moon2())}",
    ]);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("update[")), "{out}");
    assert_eq!(out.lines().last(), Some("{vis(moon2())}"));
}

#[test]
fn conformance_passes_core_vectors() {
    let o = run(&["conformance"]);
    let out = stdout(&o);
    assert!(out.contains("PASS card-example"));
    assert!(!out.lines().any(|l| l.starts_with("FAIL")), "{out}");
}

#[test]
fn missing_api_key_is_a_runtime_error() {
    let dir = workdir("nokey");
    let problems = dir.join("p.jsonl");
    run(&["generate", "--n", "2", "--seed", "3", "--out", problems.to_str().unwrap()]);
    let o = bin()
        .args(["eval", "--problems", problems.to_str().unwrap()])
        .args(["--store", dir.join("s.jsonl").to_str().unwrap(), "--model", "vendor/m"])
        .env_remove("ETRBENCH_API_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ETRBENCH_API_KEY"));
}

#[test]
fn generate_render_eval_analyze_round_trip() {
    let dir = workdir("pipeline");
    let problems = dir.join("p.jsonl");
    let store = dir.join("s.jsonl");
    let reports = dir.join("reports");
    let p = problems.to_str().unwrap();
    let s = store.to_str().unwrap();
    run(&["generate", "--n", "8", "--seed", "5", "--out", p]);
    assert!(dir.join("p.jsonl.gen.json").exists());
    let first = std::fs::read_to_string(&problems).unwrap();
    let first: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let id = first["id"].as_str().unwrap();

    let orig = stdout(&run(&["render", "--problems", p, "--id", id]));
    let rev = stdout(&run(&["render", "--problems", p, "--id", id, "--order", "reversed"]));
    assert_ne!(orig, rev);
    assert!(orig.contains("\n- "));

    let o = run(&["eval", "--problems", p, "--store", s, "--stub"]);
    assert!(stdout(&o).contains("completed 16 exchanges"), "{}", stdout(&o));
    let o = run(&["eval", "--problems", p, "--store", s, "--stub"]);
    assert!(stdout(&o).contains("completed 0 exchanges (16 skipped"), "{}", stdout(&o));

    let o = run(&[
        "analyze",
        "--store",
        s,
        "--problems",
        p,
        "--out-dir",
        reports.to_str().unwrap(),
    ]);
    assert!(stdout(&o).contains("fallacy rate 1.000"), "{}", stdout(&o));
    for f in ["summary.csv", "results.json", "exclusions.json"] {
        assert!(reports.join(f).exists(), "{f}");
    }

    let o = run(&["judge", "--problems", p, "--id", id, "--answer", "Answer: Nothing follows."]);
    assert!(stdout(&o).contains("\"logically_correct\": true"));
}
