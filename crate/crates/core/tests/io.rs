use std::fs;
use std::path::Path;

use hexns::io::report::{simulate_from, ProbeOutcome};
use hexns::io::{decode_checkpoint, emit_report, encode_checkpoint, parse_config, read_checkpoint, simulate, write_checkpoint, CheckpointError, RunReport};
use hexns::solver::run;

const SCHEMA: &str = include_str!("../../../docs/report.schema.json");

fn validate(report: &RunReport) {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())).collect();
    v.sort();
    v
}

const SMALL: &str = "[grid]\nn = 64\n[time]\nfinal = 0.004\nsnapshot = 0.001\ndt = { policy = \"fixed\", dt = 0.0005 }\n[init]\nseed = 4\n";

#[test]
fn resumed_run_matches_an_uninterrupted_one() {
    let cfg = parse_config(SMALL).unwrap();
    let direct = simulate(&cfg).unwrap().trajectory.final_state;

    let mut half = cfg.clone();
    half.time.final_time = 0.002;
    let mid = simulate(&half).unwrap().trajectory.final_state;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.chk");
    write_checkpoint(&mid, &path).unwrap();
    let restored = read_checkpoint(&path).unwrap();
    assert_eq!(restored.omega, mid.omega);
    assert_eq!((restored.flux.a, restored.flux.b, restored.flux.d), (mid.flux.a, mid.flux.b, mid.flux.d));
    assert_eq!(restored.time, mid.time);

    let resumed = run(restored, &cfg.run_options()).unwrap().final_state;
    assert_eq!(resumed.omega, direct.omega);
    assert_eq!((resumed.flux.a, resumed.flux.b, resumed.flux.d), (direct.flux.a, direct.flux.b, direct.flux.d));
    assert_eq!(resumed.dissipation_accum, direct.dissipation_accum);
}

#[test]
fn damaged_checkpoints_fail_distinctly() {
    let state = simulate(&parse_config(SMALL).unwrap()).unwrap().trajectory.final_state;
    let bytes = encode_checkpoint(&state);
    assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(CheckpointError::Truncated { .. })));
    assert!(matches!(decode_checkpoint(&bytes[..20]), Err(CheckpointError::Truncated { .. })));
    let mut v = bytes.clone();
    v[5] = 2;
    assert!(matches!(decode_checkpoint(&v), Err(CheckpointError::Version(2))));
    v[0] = b'X';
    assert!(matches!(decode_checkpoint(&v), Err(CheckpointError::Magic)));
    assert!(matches!(read_checkpoint(Path::new("/nonexistent/x.chk")), Err(CheckpointError::Io { .. })));
}

#[test]
fn report_without_probes_validates() {
    let r = simulate(&parse_config(SMALL).unwrap()).unwrap().report;
    assert!(r.probes.is_empty());
    validate(&r);
}

#[test]
fn probe_records_validate_and_reemit_identically() {
    let text = "[grid]\nn = 512\n[time]\nfinal = 0.0005\nsnapshot = 0.0005\n[init]\nseed = 7\n[probe]\nmtheta = 64\ntimes = [0.0, 0.0005]\n";
    let cfg = parse_config(text).unwrap();
    let r = simulate(&cfg).unwrap().report;
    assert_eq!(r.probes.len(), 2);
    assert!(matches!(r.probes[0], ProbeOutcome::Measured(_)));
    assert!(matches!(r.probes[1], ProbeOutcome::Rejected { .. }));
    assert!(r.verdicts.iter().any(|v| v.name == "far-field precondition" && !v.passed));
    validate(&r);

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&r, a.path()).unwrap();
    let again = RunReport::from_json(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(again.to_json(), r.to_json());
    emit_report(&r, b.path()).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.iter().any(|(n, _)| n == "profile_u2_0.csv"));
    assert!(fa.iter().any(|(n, _)| n.ends_with(".pgm")));
    assert_eq!(fa, fb);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = parse_config(&format!("{SMALL}[probe]\nmtheta = 64\n")).unwrap();
    let emit = |c| {
        let dir = tempfile::tempdir().unwrap();
        let sim = simulate_from(&cfg, hexns::io::report::initial_state(c).unwrap()).unwrap();
        emit_report(&sim.report, dir.path()).unwrap();
        files(dir.path())
    };
    assert_eq!(emit(&cfg), emit(&cfg));
}
