use std::path::Path;
use std::process::{Command, Output};

use wnd_core::{read_instance, read_solution, write_solution};

fn wnd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wnd")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path, seed: &str) {
    let o = wnd(&["generate", "--seed", seed, "--sites", "4", "--testpoints", "12", "--side", "500", "--out", "i.json"], dir);
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn solve_pi_writes_wplan_table() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "5");
    let o = wnd(
        &["solve", "--instance", "i.json", "--formulation", "pi", "--schedule", "2,4,6,22", "--out", "s.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let table = std::fs::read_to_string(dir.path().join("s.table.txt")).unwrap();
    let sizes: Vec<&str> = table.lines().skip(2).filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(sizes, ["2", "4", "6", "22", "|L*|"]);
    let sol = read_solution(dir.path().join("s.json")).unwrap();
    assert_eq!(sol.power_set_db.as_ref().unwrap().len(), 22);
    assert_eq!(sol.verified_revenue, Some(sol.nominal_revenue));
}

#[test]
fn verify_reports_false_claims_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "6");
    let o = wnd(&["solve", "--instance", "i.json", "--formulation", "dm", "--levels", "4", "--out", "s.json"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let inst = read_instance(dir.path().join("i.json")).unwrap();
    let mut sol = read_solution(dir.path().join("s.json")).unwrap();
    // Everything off, yet testpoint 0 claimed as served.
    sol.power_mw = vec![0.0; inst.n_transmitters];
    sol.server = vec![-1; inst.n_testpoints];
    sol.server[0] = 0;
    write_solution(&sol, dir.path().join("bad.json")).unwrap();
    let o = wnd(&["verify", "--instance", "i.json", "--solution", "bad.json", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("errors   1 [0]"), "{}", stdout(&o));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "7");
    let cases: [&[&str]; 6] = [
        &["solve", "--instance", "missing.json", "--formulation", "dm"],
        &["solve", "--instance", "i.json", "--formulation", "pi"],
        &["solve", "--instance", "i.json", "--formulation", "pi", "--schedule", "2,,4"],
        &["solve", "--instance", "i.json", "--formulation", "pi", "--schedule", "4,2"],
        &["solve", "--instance", "i.json", "--formulation", "xx"],
        &["solve", "--instance", "i.json", "--formulation", "dm", "--levels", "99"],
    ];
    for args in cases {
        assert_eq!(wnd(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    std::fs::write(dir.path().join("junk.json"), "{").unwrap();
    let o = wnd(&["verify", "--instance", "i.json", "--solution", "junk.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(wnd(&["solve", "--bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn compare_prints_four_columns() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "8");
    let o = wnd(&["compare", "--instance", "i.json", "--time-limit", "5", "--table", "csv", "--out", "c.csv"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(",BM,DM,DM&GCI1,WPLAN"));
    let errors = text.lines().find(|l| l.starts_with("errors,")).unwrap();
    assert_eq!(errors.split(',').nth(4), Some("0"));
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "9");
    for out in ["a.json", "b.json"] {
        let o = wnd(&["solve", "--instance", "i.json", "--formulation", "dm0", "--levels", "6", "--out", out], dir.path());
        assert!(o.status.success());
    }
    let a = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}
