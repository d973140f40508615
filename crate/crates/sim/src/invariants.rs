//! Named checks over a finished run.

use std::collections::BTreeMap;

use mrdaw_core::{SessionView, TrackStatus};

use crate::report::{Outcome, SimReport, Violation};
use crate::trace::Action;

pub const SINGLE_RECORDING: &str = "single-recording-per-user";
pub const MASTER_LEN_ONCE: &str = "master-len-write-once";
pub const LOOP_LENGTH: &str = "loop-length-equals-master";
pub const OWNERSHIP: &str = "track-ownership";
pub const CURSOR: &str = "cursor-in-allocation";
pub const TRANSPORT_KEEPS_TRACKS: &str = "transport-preserves-tracks";
pub const TOGGLE: &str = "toggle-flips-one-track";
pub const CLAMP: &str = "clamp-safety";
pub const BACKEND: &str = "backend-dispatch";
pub const CONVERGENCE: &str = "client-convergence";
pub const BOUND: &str = "convergence-bound";

fn check_view(label: &str, view: &SessionView, tracks_per_user: usize, out: &mut Vec<Violation>) {
    let mut recording: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, track) in view.tracks.iter().enumerate() {
        if track.index.0 != i || track.owner.0 as usize != i / tracks_per_user + 1 {
            out.push(Violation::new(OWNERSHIP, format!("{label}: track {i} reports index {} owner {}", track.index.0, track.owner)));
        }
        if track.state == TrackStatus::Recording {
            *recording.entry(track.owner.0).or_default() += 1;
        }
    }
    for (user, n) in recording {
        if n > 1 {
            out.push(Violation::new(SINGLE_RECORDING, format!("{label}: u{user} has {n} recording tracks")));
        }
    }
    for (user, cursor) in &view.cursors {
        let start = (user.0 as usize - 1) * tracks_per_user;
        if !(start..start + tracks_per_user).contains(&cursor.0) {
            out.push(Violation::new(CURSOR, format!("{label}: {user} cursor on track {}", cursor.0)));
        }
    }
}

fn statuses(view: &SessionView) -> Vec<TrackStatus> {
    view.tracks.iter().map(|t| t.state).collect()
}

/// Every failure found in the report, named. Empty for a healthy run.
pub fn check_invariants(report: &SimReport) -> Vec<Violation> {
    let mut out = Vec::new();
    let tpu = report.settings.tracks_per_user.max(1);

    let mut prev_view: Option<&SessionView> = None;
    let mut master: usize = 0;
    for (i, step) in report.trajectory.iter().enumerate() {
        let label = format!("step {i}");
        check_view(&label, &step.view, tpu, &mut out);

        if master != 0 && step.view.looplen != master {
            out.push(Violation::new(MASTER_LEN_ONCE, format!("{label}: loop length {master} became {}", step.view.looplen)));
        }
        if master == 0 {
            master = step.view.looplen;
        }
        if let Some(fin) = &step.finalized {
            if fin.len != step.view.looplen {
                out.push(Violation::new(LOOP_LENGTH, format!("{label}: track {} finalized with {} samples, loop length {}", fin.track.0, fin.len, step.view.looplen)));
            }
        }
        for err in &step.backend_errors {
            out.push(Violation::new(BACKEND, format!("{label}: {err}")));
        }

        if let (Some(prev), Outcome::Applied) = (prev_view, &step.outcome) {
            match step.event {
                Action::Play | Action::Stop => {
                    if statuses(prev) != statuses(&step.view) {
                        out.push(Violation::new(TRANSPORT_KEEPS_TRACKS, format!("{label}: {:?} changed track states", step.event)));
                    }
                }
                Action::Toggle => {
                    let target = step.track.unwrap_or(usize::MAX);
                    for (k, (a, b)) in statuses(prev).into_iter().zip(statuses(&step.view)).enumerate() {
                        let ok = match (a, b) {
                            (TrackStatus::Playing, TrackStatus::Muted) | (TrackStatus::Muted, TrackStatus::Playing) => k == target,
                            (x, y) => x == y,
                        };
                        if !ok {
                            out.push(Violation::new(TOGGLE, format!("{label}: track {k} went {a:?} -> {b:?}")));
                        }
                    }
                }
                Action::Record => {}
            }
        }
        prev_view = Some(&step.view);
    }

    check_view("final", &report.final_snapshot.view, tpu, &mut out);
    for client in &report.clients {
        if let Some(snapshot) = &client.view {
            check_view(&format!("{} view", client.user), &snapshot.view, tpu, &mut out);
        }
    }
    let final_len = report.final_snapshot.view.looplen;
    for lp in &report.loops {
        if lp.len != final_len {
            out.push(Violation::new(LOOP_LENGTH, format!("final: track {} holds {} samples, loop length {final_len}", lp.track.0, lp.len)));
        }
    }
    if !report.max_abs_sample.is_finite() || report.max_abs_sample > 1.0 {
        out.push(Violation::new(CLAMP, format!("output peak {}", report.max_abs_sample)));
    }
    for client in &report.clients {
        match client.convergence_ms {
            _ if !client.converged => {
                out.push(Violation::new(CONVERGENCE, format!("{} never reached the final state", client.user)));
            }
            Some(ms) if ms > report.bound_ms + 1e-9 => {
                out.push(Violation::new(BOUND, format!("{} converged after {ms} ms, bound {} ms", client.user, report.bound_ms)));
            }
            _ => {}
        }
    }
    out
}
