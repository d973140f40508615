use mrdaw_core::session::EventError;
use mrdaw_core::{
    apply_event, ControlEvent, EffectCommand, EventKind, SessionConfig, SessionState, TrackIndex, TrackVariant,
    Transport, UserId,
};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Step {
    dt: u64,
    user: u32,
    kind: u8,
    track: usize,
}

fn step() -> impl Strategy<Value = Step> {
    (0u64..3_000, 1u32..=4, 0u8..6, 0usize..10).prop_map(|(dt, user, kind, track)| Step { dt, user, kind, track })
}

fn kind_of(step: &Step) -> EventKind {
    match step.kind {
        0 | 1 | 2 => EventKind::RecordToggle,
        3 => EventKind::PlayAll,
        4 => EventKind::StopAll,
        _ => EventKind::TrackToggle(TrackIndex(step.track)),
    }
}

fn recording_count(state: &SessionState, user: UserId) -> usize {
    state
        .tracks()
        .iter()
        .filter(|t| t.owner() == user && matches!(t.variant(), TrackVariant::Recording { .. }))
        .count()
}

/// Where the cursor must land after `user` finishes a take on `finished`.
fn expected_cursor(state: &SessionState, user: UserId, finished: TrackIndex) -> TrackIndex {
    let config = state.config();
    let alloc = config.allocation(config.user_index(user).unwrap());
    if let Some(i) = alloc.clone().find(|&i| state.tracks()[i].variant() == TrackVariant::Empty) {
        return TrackIndex(i);
    }
    let next = finished.0 + 1;
    TrackIndex(if next == alloc.end { alloc.start } else { next })
}

fn variants(state: &SessionState) -> Vec<TrackVariant> {
    state.tracks().iter().map(|t| t.variant()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn invariants_hold_along_random_traces(
        users in 1usize..=3,
        tpu in 1usize..=4,
        steps in prop::collection::vec(step(), 0..60),
    ) {
        let mut state = SessionState::new(SessionConfig::new(users, tpu)).unwrap();
        let mut t = 0u64;
        let mut len_seen: Option<usize> = None;
        for s in &steps {
            t += s.dt;
            let user = UserId(s.user);
            let kind = kind_of(s);
            let ev = ControlEvent::new(t, user, kind);
            let result = apply_event(&state, &ev);
            if s.user as usize > users {
                prop_assert_eq!(result.unwrap_err(), EventError::UnknownUser(user));
                continue;
            }
            let Ok(tr) = result else { continue };
            let next = tr.state;

            for u in next.config().users() {
                prop_assert!(recording_count(&next, u) <= 1);
                let alloc = next.config().allocation(next.config().user_index(u).unwrap());
                prop_assert!(alloc.contains(&next.cursor(u).unwrap().0));
            }
            for (i, track) in next.tracks().iter().enumerate() {
                prop_assert_eq!(track.owner(), next.config().owner_of(TrackIndex(i)));
                prop_assert_eq!(track.variant().has_content(), track.content().is_some());
            }
            if let Some(len) = len_seen {
                prop_assert_eq!(next.master_len(), Some(len));
            }
            len_seen = next.master_len();

            match kind {
                EventKind::PlayAll | EventKind::StopAll => {
                    prop_assert_eq!(variants(&next), variants(&state));
                    let want = if kind == EventKind::PlayAll { Transport::Playing } else { Transport::Stopped };
                    prop_assert_eq!(next.transport(), want);
                }
                EventKind::TrackToggle(track) => {
                    let again = apply_event(&next, &ControlEvent::new(t, user, kind)).unwrap().state;
                    prop_assert_eq!(variants(&again), variants(&state));
                    if !matches!(state.track(track).unwrap().variant(), TrackVariant::Playing | TrackVariant::Muted) {
                        prop_assert_eq!(&next, &state);
                    }
                }
                EventKind::RecordToggle => {
                    if let Some(finished) = state.recording_track(user) {
                        prop_assert_eq!(next.track(finished).unwrap().variant(), TrackVariant::Playing);
                        prop_assert_eq!(next.cursor(user).unwrap(), expected_cursor(&next, user, finished));
                        let stop = EffectCommand::StopCaptureAndFinalize { user, track: finished };
                        prop_assert!(tr.effects.contains(&stop), "missing finalize effect");
                    } else {
                        let cursor = state.cursor(user).unwrap();
                        let recording = matches!(next.track(cursor).unwrap().variant(), TrackVariant::Recording { .. });
                        prop_assert!(recording, "cursor track is not recording");
                    }
                }
            }
            state = next;
        }
    }

    #[test]
    fn reset_is_idempotent(steps in prop::collection::vec(step(), 0..30)) {
        let mut state = SessionState::new(SessionConfig::default()).unwrap();
        let mut t = 0;
        for s in &steps {
            t += s.dt;
            if let Ok(tr) = apply_event(&state, &ControlEvent::new(t, UserId(1 + s.user % 2), kind_of(s))) {
                state = tr.state;
            }
        }
        let once = state.reset();
        prop_assert_eq!(once.reset(), once.clone());
        prop_assert_eq!(once.master_len(), None);
        prop_assert!(once.tracks().iter().all(|t| t.variant() == TrackVariant::Empty));
    }
}

#[test]
fn first_take_sets_master_len_once() {
    let state = SessionState::new(SessionConfig::default()).unwrap();
    let s = apply_event(&state, &ControlEvent::new(0, UserId(1), EventKind::RecordToggle)).unwrap().state;
    let s = apply_event(&s, &ControlEvent::new(48_000, UserId(1), EventKind::RecordToggle)).unwrap().state;
    let s = apply_event(&s, &ControlEvent::new(50_000, UserId(2), EventKind::RecordToggle)).unwrap().state;
    let s = apply_event(&s, &ControlEvent::new(170_000, UserId(2), EventKind::RecordToggle)).unwrap().state;
    assert_eq!(s.master_len(), Some(48_000));
    assert_eq!(s.track(TrackIndex(4)).unwrap().variant(), TrackVariant::Playing);
}
