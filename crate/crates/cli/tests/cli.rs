use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sepdfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepdfa"))
        .args(args)
        .env_remove("SEPDFA_SMT_SOLVER")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn learn_args(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = ["learn", "--l1"].iter().map(|s| s.to_string()).collect();
    v.push(fixture("even_even.dfa").display().to_string());
    v.push("--l2".into());
    v.push(fixture("odd_length.dfa").display().to_string());
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_learn(extra: &[&str]) -> Output {
    let args = learn_args(extra);
    sepdfa(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn learn_exact_prints_automaton_and_record() {
    let out = run_learn(&[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("3nfa 2 2\n"), "{text}");
    let row = text.lines().last().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[2], "2");
    assert_eq!(fields.last(), Some(&"ok"));
}

#[test]
fn learn_writes_out_dot_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("h.dfa");
    let dot = dir.path().join("h.dot");
    let snap = dir.path().join("tree.txt");
    let out = run_learn(&[
        "--out",
        out_path.to_str().unwrap(),
        "--dot",
        dot.to_str().unwrap(),
        "--snapshot",
        snap.to_str().unwrap(),
        "--alphabet",
        "a,b",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&out_path).unwrap().starts_with("3nfa 2 2"));
    assert!(std::fs::read_to_string(&dot).unwrap().contains("digraph"));
    assert!(std::fs::read_to_string(&snap).unwrap().starts_with("# n 2\n"));
    assert!(dir.path().join("tree.txt.stats.jsonl").exists());
    assert_eq!(stdout(&out).lines().count(), 1);
}

#[test]
fn learn_is_reproducible() {
    for extra in [&[][..], &["--validity", "random-wmethod", "--seed", "7"], &["--mode", "incompatibility"]] {
        let a = run_learn(extra);
        let b = run_learn(extra);
        assert_eq!(a.status.code(), Some(0));
        let strip = |o: &Output| {
            // time_ms is the only field allowed to differ
            stdout(o)
                .lines()
                .map(|l| {
                    let mut f: Vec<&str> = l.split(',').collect();
                    if f.len() == 13 {
                        f[8] = "";
                    }
                    f.join(",")
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }
}

#[test]
fn query_budget_exits_with_2() {
    let out = run_learn(&["--max-queries", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).trim_end().ends_with(",budget"));
}

#[test]
fn usage_errors_exit_with_1() {
    let samples = fixture("even_even.dfa");
    let s = samples.to_str().unwrap();
    for args in [
        vec!["learn", "--l1", s, "--l2", s, "--samples", s],
        vec!["learn", "--l1", s],
        vec!["learn"],
        vec!["learn", "--l1", s, "--l2", s, "--backend", "smt"],
        vec!["bogus"],
    ] {
        assert_eq!(sepdfa(&args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(sepdfa(&["--help"]).status.code(), Some(0));
}

#[test]
fn overlapping_languages_are_an_error() {
    let e = fixture("even_even.dfa");
    let out = sepdfa(&["learn", "--l1", e.to_str().unwrap(), "--l2", e.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn learn_from_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    std::fs::write(&path, "4 2\n1 0\n0 1 0\n0 1 1\n1 2 0 1\n").unwrap();
    let out = sepdfa(&["learn", "--samples", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).lines().last().unwrap().starts_with("s,0,2,"));
}

#[test]
fn gen_bench_and_run_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = sepdfa(&["gen-bench", "--out", d, "--min-size", "4", "--max-size", "5", "--automata", "2", "--sets", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(dir.path().join("targets")).unwrap().count(), 4);
    assert_eq!(std::fs::read_dir(dir.path().join("samples")).unwrap().count(), 12);
    let manifest = dir.path().join("manifest.csv");
    let csv = dir.path().join("runs.csv");
    let out = sepdfa(&["run-bench", "--manifest", manifest.to_str().unwrap(), "--csv", csv.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 13);
    assert!(rows.lines().skip(1).all(|l| l.ends_with(",ok")));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size completed total"));
}

#[test]
fn export_dot() {
    let out = sepdfa(&["export-dot", fixture("odd_length.dfa").to_str().unwrap(), "--alphabet", "x,y"]);
    assert_eq!(out.status.code(), Some(0));
    let dot = stdout(&out);
    assert!(dot.contains("digraph") && dot.contains('x'));
}
