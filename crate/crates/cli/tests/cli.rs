use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hexns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hexns")).args(args).env("HEXNS_THREADS", "1").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL: &str = "[grid]\nn = 256\n[time]\nfinal = 0.004\nsnapshot = 0.001\ndt = { policy = \"fixed\", dt = 0.0005 }\n[init]\nseed = 4\n";

#[test]
fn simulate_then_report_and_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = config(tmp.path(), SMALL);
    let o = hexns(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "series.csv", "final.chk", "timing.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(stdout(&o).contains("PASS [4] energy equality"));

    let again = tmp.path().join("again");
    let o = hexns(&["report", "--dir", out.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("report.json")).unwrap(), fs::read(again.join("report.json")).unwrap());
    assert_eq!(fs::read(out.join("series.csv")).unwrap(), fs::read(again.join("series.csv")).unwrap());

    let o = hexns(&["analyze", "--report", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["snapshots"], 5);

    let o = hexns(&["render", "--checkpoint", out.join("final.chk").to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--size", "32", "--half-width", "3.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read(tmp.path().join("render.pgm")).unwrap().starts_with(b"P5\n32 32\n255\n"));
}

#[test]
fn failing_verdict_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[grid]\nn = 64\n[time]\nfinal = 0.004\nsnapshot = 0.002\n[init]\nseed = 4\n[probe]\nmtheta = 64\n");
    let o = hexns(&["simulate", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL [5] far-field precondition"));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = config(tmp.path(), "[grid]\nn = 100\n[time]\nfinal = 1.0\n");
    let o = hexns(&["simulate", "--config", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.n must be a power of 2"));
    assert_eq!(code(&hexns(&["simulate"])), 2);
    assert_eq!(code(&hexns(&["frobnicate"])), 2);
    assert_eq!(code(&hexns(&["accept", "--suite", "nope"])), 2);
    assert_eq!(code(&hexns(&["render", "--flux", "1,2", "--out", "x"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_hexns")).args(["accept", "--suite", "isotropy"]).env("HEXNS_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn runtime_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let junk = tmp.path().join("junk.chk");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let o = hexns(&["probe", "--checkpoint", junk.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad magic"));
    assert_eq!(code(&hexns(&["report", "--dir", tmp.path().to_str().unwrap()])), 3);
}

#[test]
fn accept_prints_machine_readable_verdicts() {
    let o = hexns(&["accept", "--suite", "isotropy,hexagon", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["criterion"], 1);
    assert_eq!(v[1]["passed"], true);
    let o = hexns(&["accept", "--suite", "kernels"]);
    assert!(stdout(&o).starts_with("PASS [3] kernel identities"));
}

#[test]
fn kernel_table_and_flux_render() {
    let o = hexns(&["kernel-table", "--radii", "1", "--times", "0.5", "--angles", "3"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,t,j,h,k,F,frakF,Psi"));
    assert_eq!(lines.count(), 3 * 8);

    let tmp = tempfile::tempdir().unwrap();
    let o = hexns(&["render", "--flux", "1,-0.3,0.2", "--out", tmp.path().to_str().unwrap(), "--stem", "h", "--size", "16"]);
    assert_eq!(code(&o), 0);
    let side = fs::read_to_string(tmp.path().join("h.txt")).unwrap();
    assert!(side.starts_with("min ") && side.contains("half_width 6"));
}
