use mrdaw_core::engine::{finalize_loop, render_session};
use mrdaw_core::synth::Sawtooth;
use mrdaw_core::{CaptureBuffer, EventKind, SessionConfig, SessionHost, TrackIndex, TrackVariant, Transport, UserId};
use proptest::prelude::*;

/// Plain per-sample reference for one user's output with silent live input.
fn oracle(host: &SessionHost, frames: usize) -> Vec<Vec<f32>> {
    let state = host.state();
    let config = state.config();
    let users = config.num_users;
    let Some(len) = state.master_len() else {
        return vec![vec![0.0; frames]; users];
    };
    let playing = state.transport() == Transport::Playing;
    let mut out = vec![Vec::with_capacity(frames); users];
    for n in 0..frames {
        let mut acc = 0.0f32;
        if playing {
            for (i, track) in state.tracks().iter().enumerate() {
                if track.variant() != TrackVariant::Playing {
                    continue;
                }
                let buf = host.loops().get(track.content().unwrap()).unwrap();
                acc += config.track_gains[i] * buf.samples()[(state.playhead() + n) % len];
            }
        }
        for o in out.iter_mut() {
            o.push(acc.clamp(-1.0, 1.0));
        }
    }
    out
}

fn run(host: &mut SessionHost, frames: usize) {
    let live: Vec<Vec<f32>> = (0..host.state().config().num_users)
        .map(|u| Sawtooth::for_user(u).render(host.now(), frames))
        .collect();
    let refs: Vec<&[f32]> = live.iter().map(Vec::as_slice).collect();
    host.advance(&refs, frames);
}

#[derive(Clone, Debug)]
enum Act {
    Wait(usize),
    Record(u32),
    Toggle(usize),
    Play,
    Stop,
}

fn act() -> impl Strategy<Value = Act> {
    prop_oneof![
        4 => (1usize..700).prop_map(Act::Wait),
        3 => (1u32..=2).prop_map(Act::Record),
        1 => (0usize..8).prop_map(Act::Toggle),
        1 => Just(Act::Play),
        1 => Just(Act::Stop),
    ]
}

fn drive(host: &mut SessionHost, acts: &[Act]) {
    for a in acts {
        match *a {
            Act::Wait(n) => run(host, n),
            Act::Record(u) => {
                let _ = host.submit(UserId(u), EventKind::RecordToggle);
            }
            Act::Toggle(t) => {
                let _ = host.submit(UserId(1 + (t / 4) as u32), EventKind::TrackToggle(TrackIndex(t)));
            }
            Act::Play => {
                let _ = host.submit(UserId(1), EventKind::PlayAll);
            }
            Act::Stop => {
                let _ = host.submit(UserId(2), EventKind::StopAll);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_loop_has_master_length(acts in prop::collection::vec(act(), 1..40)) {
        let mut host = SessionHost::with_mock(SessionConfig::default().with_block_size(64)).unwrap();
        drive(&mut host, &acts);
        let state = host.state();
        for track in state.tracks() {
            if let Some(id) = track.content() {
                prop_assert_eq!(Some(host.loops().get(id).unwrap().len()), state.master_len());
            }
        }
    }

    #[test]
    fn render_matches_oracle_and_live_mix(acts in prop::collection::vec(act(), 1..30)) {
        let mut host = SessionHost::with_mock(SessionConfig::default().with_block_size(64)).unwrap();
        drive(&mut host, &acts);
        let offline = render_session(host.state(), host.loops(), 1_500);
        prop_assert_eq!(&offline, &oracle(&host, 1_500));
        let live = host.advance_silent(1_500);
        prop_assert_eq!(offline, live.outputs);
    }

    #[test]
    fn phase_placement(len in 1usize..40, phase_seed in 0usize..1000, cap_len in 1usize..120) {
        let phase = phase_seed % len;
        let samples: Vec<f32> = (0..cap_len).map(|k| k as f32 + 1.0).collect();
        let (buf, got) = finalize_loop(&CaptureBuffer::from_samples(samples.clone(), phase), Some(len)).unwrap();
        prop_assert_eq!(got, len);
        let mut want = vec![0.0f32; len];
        for (k, s) in samples.iter().enumerate().take(len) {
            want[(phase + k) % len] = *s;
        }
        prop_assert_eq!(buf.samples(), &want[..]);
    }
}

#[test]
fn canonical_two_user_trace() {
    let mut host = SessionHost::with_mock(SessionConfig::default()).unwrap();
    host.submit(UserId(1), EventKind::RecordToggle).unwrap();
    run(&mut host, 48_000);
    host.submit(UserId(1), EventKind::RecordToggle).unwrap();
    run(&mut host, 24_000);
    host.submit(UserId(2), EventKind::RecordToggle).unwrap();
    run(&mut host, 120_000);
    host.submit(UserId(2), EventKind::RecordToggle).unwrap();

    let state = host.state();
    assert_eq!(state.master_len(), Some(48_000));
    let id = state.track(TrackIndex(4)).unwrap().content().unwrap();
    let buf = host.loops().get(id).unwrap();
    assert_eq!(buf.len(), 48_000);
    // Take began at session sample 72_000, half way through the loop, and
    // its first 48_000 samples wrap around from there.
    let performed = Sawtooth::for_user(1).render(72_000, 48_000);
    for (k, s) in performed.iter().enumerate() {
        assert_eq!(buf.samples()[(24_000 + k) % 48_000], *s);
    }
}
