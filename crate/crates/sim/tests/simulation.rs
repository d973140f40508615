use std::path::PathBuf;
use std::process::Command;

use mrdaw_core::{Snapshot, TrackStatus};
use mrdaw_sim::invariants::{CONVERGENCE, SINGLE_RECORDING};
use mrdaw_sim::{check_invariants, load_trace, parse_trace, simulate, LatencyModel, SimConfig};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

const ONE_TAKE: &str = "{\"t_ms\":0,\"user\":1,\"event\":\"record\"}\n{\"t_ms\":1000,\"user\":1,\"event\":\"record\"}\n";

#[test]
fn zero_latency_single_take() {
    let trace = parse_trace(ONE_TAKE).unwrap();
    let report = simulate(&trace, &LatencyModel::local(), &SimConfig::default()).unwrap();
    let view = &report.final_snapshot.view;
    assert_eq!(view.tracks[0].state, TrackStatus::Playing);
    assert_eq!(view.looplen, 48_000);
    for c in &report.clients {
        assert_eq!(c.convergence_ms, Some(0.0));
    }
    assert!(report.violations.is_empty(), "{:?}", report.violations);
}

#[test]
fn fifty_ms_single_take_converges_within_a_round_trip() {
    let trace = parse_trace(ONE_TAKE).unwrap();
    let local = simulate(&trace, &LatencyModel::local(), &SimConfig::default()).unwrap();
    let model = LatencyModel::new(50.0, 0.0, 0.0, 1).unwrap();
    let report = simulate(&trace, &model, &SimConfig::default()).unwrap();
    assert_eq!(report.state_hash, local.state_hash);
    for c in &report.clients {
        assert!(c.convergence_ms.unwrap() <= 100.0, "{:?}", c);
    }
    assert_eq!(report.bound_ms, 150.0);
    assert!(report.violations.is_empty(), "{:?}", report.violations);
}

#[test]
fn seeds_do_not_change_the_outcome_of_a_conflict_free_trace() {
    let trace = load_trace(&fixture("conflict_free.jsonl")).unwrap();
    let reference = simulate(&trace, &LatencyModel::local(), &SimConfig::default()).unwrap();
    for seed in 0..20 {
        let model = LatencyModel::new(15.0, 5.0, 10.0, seed).unwrap();
        let report = simulate(&trace, &model, &SimConfig::default()).unwrap();
        assert_eq!(report.state_hash, reference.state_hash, "seed {seed}");
        assert!(report.violations.is_empty(), "seed {seed}: {:?}", report.violations);
    }
}

#[test]
fn planted_double_recording_is_reported() {
    let trace = parse_trace(ONE_TAKE).unwrap();
    let mut report = simulate(&trace, &LatencyModel::local(), &SimConfig::default()).unwrap();
    assert!(check_invariants(&report).is_empty());
    report.final_snapshot.view.tracks[1].state = TrackStatus::Recording;
    report.final_snapshot.view.tracks[2].state = TrackStatus::Recording;
    let names: Vec<_> = check_invariants(&report).into_iter().map(|v| v.name).collect();
    assert!(names.contains(&SINGLE_RECORDING.to_string()), "{names:?}");
}

#[test]
fn stale_client_view_is_reported() {
    let trace = parse_trace(ONE_TAKE).unwrap();
    let mut report = simulate(&trace, &LatencyModel::local(), &SimConfig::default()).unwrap();
    let first = report.trajectory[0].view.clone();
    report.clients[1].view = Some(Snapshot { seq: 1, view: first });
    report.clients[1].converged = false;
    report.clients[1].convergence_ms = None;
    let names: Vec<_> = check_invariants(&report).into_iter().map(|v| v.name).collect();
    assert_eq!(names, vec![CONVERGENCE.to_string()]);
}

#[test]
fn total_loss_never_converges() {
    let trace = parse_trace(ONE_TAKE).unwrap();
    let model = LatencyModel::new(5.0, 0.0, 100.0, 0).unwrap();
    let report = simulate(&trace, &model, &SimConfig::default()).unwrap();
    assert!(report.violations.iter().any(|v| v.name == CONVERGENCE));
}

#[test]
fn unknown_user_is_an_error() {
    let trace = parse_trace("{\"t_ms\":0,\"user\":3,\"event\":\"play\"}").unwrap();
    assert!(simulate(&trace, &LatencyModel::local(), &SimConfig::default()).is_err());
}

fn sim_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrdaw-sim"))
}

#[test]
fn cli_reports_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let wavs = dir.path().join("wav");
    let out = sim_bin()
        .args(["run", "--trace"])
        .arg(fixture("canonical.jsonl"))
        .args(["--latency", "metro", "--report"])
        .arg(&report)
        .arg("--emit-wav")
        .arg(&wavs)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["final_snapshot"]["looplen"], 48_000);
    assert_eq!(std::fs::read(wavs.join("sim-user1.wav")).unwrap().len(), 44 + 4 * 48_000);

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"t_ms\":0,\"user\":1,\"event\":\"record\"}\n{oops}\n").unwrap();
    let out = sim_bin().args(["run", "--trace"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = sim_bin().args(["run", "--trace"]).arg(fixture("canonical.jsonl")).args(["--loss", "100"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Random traces under random models keep every session invariant. Only
    // convergence to the final state is checked, not the bound, since
    // random traces race.
    #[test]
    fn random_traces_keep_invariants(
        steps in prop::collection::vec((0u32..600, 1u32..=2, 0u8..6, 0usize..8), 1..25),
        one_way in 0.0f64..60.0,
        jitter in 0.0f64..20.0,
        seed in any::<u64>(),
    ) {
        let mut t = 0u32;
        let mut text = String::new();
        for (dt, user, kind, track) in steps {
            t += dt;
            let line = match kind {
                0..=2 => format!("{{\"t_ms\":{t},\"user\":{user},\"event\":\"record\"}}"),
                3 => format!("{{\"t_ms\":{t},\"user\":{user},\"event\":\"play\"}}"),
                4 => format!("{{\"t_ms\":{t},\"user\":{user},\"event\":\"stop\"}}"),
                _ => format!("{{\"t_ms\":{t},\"user\":{user},\"event\":\"toggle\",\"track\":{track}}}"),
            };
            text.push_str(&line);
            text.push('\n');
        }
        let trace = parse_trace(&text).unwrap();
        let model = LatencyModel::new(one_way, jitter, 0.0, seed).unwrap();
        let report = simulate(&trace, &model, &SimConfig::default()).unwrap();
        prop_assert!(report.violations.is_empty(), "{:?}", report.violations);
    }
}
