use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn lorcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lorcheck")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(x: &Path) -> &str {
    x.to_str().unwrap()
}

#[test]
fn check_writes_verifiable_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expect) in [("stuck0", 0), ("toggle", 1), ("counter2", 1), ("mutex", 0), ("shift3", 0)] {
        for engine in ["lor", "lor-ic"] {
            let w = dir.path().join(format!("{name}-{engine}.w"));
            let f = fixture(&format!("{name}.scirc"));
            let o = lorcheck(&["check", p(&f), "--engine", engine, "--witness", p(&w), "--verify"]);
            assert_eq!(code(&o), expect, "{name} {engine}: {}", stdout(&o));
            assert!(stdout(&o).contains("witness check: verified"));
            let v = lorcheck(&["verify-witness", p(&f), p(&w)]);
            assert_eq!(code(&v), 0, "{}", stdout(&v));
        }
    }
}

#[test]
fn check_default_witness_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("stuck0.scirc");
    fs::copy(fixture("stuck0.scirc"), &f).unwrap();
    assert_eq!(code(&lorcheck(&["check", p(&f)])), 0);
    assert!(dir.path().join("stuck0.inv").exists());
    let t = dir.path().join("toggle.scirc");
    fs::copy(fixture("toggle.scirc"), &t).unwrap();
    assert_eq!(code(&lorcheck(&["check", p(&t)])), 1);
    assert!(dir.path().join("toggle.trace").exists());
}

#[test]
fn syntax_error_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.scirc");
    fs::write(&f, "latch s init 0 next (s AND\n").unwrap();
    let o = lorcheck(&["check", p(&f)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert_eq!(code(&lorcheck(&["check", "/nonexistent.scirc"])), 3);
}

#[test]
fn sec_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w");
    let (dff, inv, bad) = (fixture("dff.scirc"), fixture("dff_inv.scirc"), fixture("dff_bad.scirc"));
    for engine in [None, Some("lor"), Some("lor-ic")] {
        for (k, verdict, c) in [(&dff, "equivalent", 0), (&inv, "equivalent", 0), (&bad, "inequivalent", 1)] {
            let mut args = vec!["sec", p(&dff), p(k), "--witness", p(&w), "--verify"];
            if let Some(e) = engine {
                args.extend(["--engine", e]);
            }
            let o = lorcheck(&args);
            assert_eq!(code(&o), c, "{}", stdout(&o));
            assert!(stdout(&o).contains(&format!("verdict: {verdict}\n")));
            let v = lorcheck(&["verify-witness", p(&dff), p(&w), "--miter-with", p(k)]);
            assert_eq!(code(&v), 0);
        }
    }
}

#[test]
fn sec_arity_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("two.scirc");
    fs::write(&f, "input a\ninput b\nlatch s init 0 next (a AND b)\noutput z = s\n").unwrap();
    assert_eq!(code(&lorcheck(&["sec", p(&fixture("dff.scirc")), p(&f)])), 3);
}

#[test]
fn pqe_command() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t.pqe");
    fs::write(&f, "p pqe 3 1 1\nw 3 0\n1 3 0\n%\n2 -3 0\n").unwrap();
    let o = lorcheck(&["pqe", p(&f)]);
    assert_eq!((code(&o), stdout(&o)), (0, "1 2 0\n".to_string()));
    let o = lorcheck(&["pqe", p(&f), "--verify"]);
    assert!(stdout(&o).contains("verified"));
    fs::write(&f, "p pqe 3 0 1\nw 3 0\n%\n2 -3 0\n").unwrap();
    assert_eq!(stdout(&lorcheck(&["pqe", p(&f)])), "");
    fs::write(&f, "p pqe 3 1 1\n1 x 0\n").unwrap();
    assert_eq!(code(&lorcheck(&["pqe", p(&f)])), 3);
}

#[test]
fn tampered_witnesses_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = fixture("counter2.scirc");
    let w = dir.path().join("c.trace");
    assert_eq!(code(&lorcheck(&["check", p(&c), "--witness", p(&w)])), 1);
    let text = fs::read_to_string(&w).unwrap();
    let tampered = text.replacen("step 1: inputs 1", "step 1: inputs 0", 1);
    assert_ne!(tampered, text);
    fs::write(&w, tampered).unwrap();
    let o = lorcheck(&["verify-witness", p(&c), p(&w)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("step 1"), "{}", stdout(&o));

    let s = fixture("stuck0.scirc");
    let inv = dir.path().join("s.inv");
    fs::write(&inv, "c var 1 s\np cnf 1 0\n").unwrap();
    let o = lorcheck(&["verify-witness", p(&s), p(&inv)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("condition 2"));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w");
    let run = || {
        let o = lorcheck(&["check", p(&fixture("shift3.scirc")), "--seed", "5", "--witness", p(&w)]);
        let out: Vec<String> = stdout(&o).lines().filter(|l| !l.starts_with("time:")).map(String::from).collect();
        (out, fs::read_to_string(&w).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn oracle_check_flag() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w");
    let o = lorcheck(&["check", p(&fixture("mutex.scirc")), "--oracle-check", "--witness", p(&w)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("oracle check: ok"));
}
