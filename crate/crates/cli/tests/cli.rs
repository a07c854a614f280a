use rvmret_core::rundir::{field_path, load_run, read_summary};
use rvmret_core::table::FieldTable;
use std::path::Path;
use std::process::{Command, Output};

fn rvmret(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvmret")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const ZERO: &str = r#"
[initial]
amplitude = 0.0
[grid]
t_min = -2.0
t_max = 2.0
half_width = 4.0
n_t = 3
n_x = 3
[quadrature]
angular_theta = 4
angular_phi = 4
momentum_nodes = 4
"#;

// Small nonzero run: a few seconds per iterate.
const SMALL: &str = r#"
seed = 5
[initial]
amplitude = 1e-4
[grid]
t_min = -2.0
t_max = 2.0
half_width = 4.0
n_t = 3
n_x = 3
[quadrature]
angular_theta = 4
angular_phi = 4
momentum_nodes = 4
ode_step = 1.0
[iteration]
max_iter = 2
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn simulate(dir: &Path, config: &str, run: &str, extra: &[&str]) -> Output {
    let cfg = write(dir, &format!("{run}.toml"), config);
    let out = dir.join(run);
    let mut args = vec!["simulate", "--config", cfg.as_str(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    rvmret(&args)
}

#[test]
fn zero_amplitude_run_and_diagnose() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), ZERO, "zero", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = tmp.path().join("zero");
    let summary = read_summary(&run).unwrap();
    assert_eq!(summary.iterations, 1);
    let table = FieldTable::load(&field_path(&run, 1)).unwrap();
    assert!(table.values.iter().flatten().all(|v| *v == 0.0));
    for f in ["config.toml", "iterates.jsonl", "iterates.csv", "run.json"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let out = rvmret(&["diagnose", run.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
    assert!(run.join("diagnostics.json").exists() && run.join("checks.csv").exists());

    let out = rvmret(&["report", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("status converged after 1 iterates"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), "[grid]\nn_z = 4\n", "bad", &[]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("unknown field") && err.contains("n_z"), "{err}");
}

#[test]
fn diagnose_without_tables_fails() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "config.toml", ZERO);
    let out = rvmret(&["diagnose", tmp.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no field tables"));
}

#[test]
fn cone_bound_defaults_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rvmret(&["verify-lemma4", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("PASS")).count(), 7);
    let csv = std::fs::read_to_string(tmp.path().join("lemma4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7 * 200);
    assert!(tmp.path().join("lemma4.json").exists());
}

#[test]
fn cone_bound_rejects_divergent_exponent() {
    let out = rvmret(&["verify-lemma4", "--family", "I1", "--q", "2.5"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("q > 3"));
}

#[test]
fn cone_bound_single_sample_is_inconclusive() {
    let out = rvmret(&["verify-lemma4", "--family", "I2", "--q", "19/4", "--samples", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).starts_with("INCONCLUSIVE"));
}

#[test]
fn shell_reduction_passes() {
    let out = rvmret(&["verify-lemma-a"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().count(), 12);
}

#[test]
fn small_run_probe_threads_and_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), SMALL, "one", &["--threads", "1"]);
    assert!(code(&out) == 0, "{}", stderr(&out));
    let run = tmp.path().join("one");
    let art = load_run(&run).unwrap();
    assert_eq!(art.iterations(), 2);
    let last = art.final_field().clone();

    // probe at a node, off-node and outside
    let (t, x) = last.coords(last.index(1, 1, 2, 1));
    let points = write(tmp.path(), "points.csv", &format!("t,x1,x2,x3\n{t},{},{},{}\n0.5,0.1,-0.2,0.3\n", x.x, x.y, x.z));
    let out = rvmret(&["probe", run.to_str().unwrap(), &points]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,x1,x2,x3,E1,E2,E3,B1,B2,B3,dt_E1"));
    let node: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(node.len(), 4 + 6 + 24);
    let stored = last.value(last.index(1, 1, 2, 1)).components();
    for c in 0..6 {
        assert_eq!(node[4 + c].to_bits(), stored[c].to_bits());
    }
    let empty = write(tmp.path(), "empty.csv", "t,x1,x2,x3\n");
    let out = rvmret(&["probe", run.to_str().unwrap(), &empty]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 1);
    let outside = write(tmp.path(), "outside.csv", "t,x1,x2,x3\n0,0,0,0\n3,0,0,0\n");
    let out = rvmret(&["probe", run.to_str().unwrap(), &outside]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("row 1"), "{}", stderr(&out));

    // two threads agree to 1e-12 relative
    let out = simulate(tmp.path(), SMALL, "two", &["--threads", "2"]);
    assert_eq!(code(&out), 0);
    let other = load_run(&tmp.path().join("two")).unwrap();
    for (a, b) in art.fields.iter().zip(&other.fields) {
        let scale = a.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in a.values.iter().flatten().zip(b.values.iter().flatten()) {
            assert!((u - v).abs() <= 1e-12 * scale);
        }
    }

    // the snapshot reproduces the tables byte for byte
    let snap = run.join("config.toml");
    let again = tmp.path().join("again");
    let out = rvmret(&["simulate", "--config", snap.to_str().unwrap(), "--out", again.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 0);
    for n in 1..=2 {
        assert_eq!(std::fs::read(field_path(&run, n)).unwrap(), std::fs::read(field_path(&again, n)).unwrap());
    }
}
