//! One session on one sample clock: state machine, backend and mixer.

use crate::daw::{dispatch, DawBackend, DispatchReport, MockBackend};
use crate::engine::{mix_tick, render_session, LoopStore, MixDiagnostic, MixFrame};
use crate::session::{
    apply_event, ConfigError, ControlEvent, EffectCommand, EventError, EventKind, SampleTime, SessionConfig,
    SessionState, UserId,
};
use crate::snapshot::SessionView;

#[derive(Debug)]
pub struct StepReport {
    pub effects: Vec<EffectCommand>,
    pub dispatch: DispatchReport,
}

impl StepReport {
    /// The view carried by the broadcast effect, if the event changed it.
    pub fn broadcast(&self) -> Option<&SessionView> {
        self.effects.iter().find_map(|e| match e {
            EffectCommand::Broadcast(view) => Some(view),
            _ => None,
        })
    }
}

/// Output of [`SessionHost::advance`]: contiguous samples per user.
#[derive(Debug, Default)]
pub struct Rendered {
    pub outputs: Vec<Vec<f32>>,
    pub diagnostics: Vec<MixDiagnostic>,
}

pub struct SessionHost {
    state: SessionState,
    backend: Box<dyn DawBackend>,
    now: SampleTime,
    no_loops: LoopStore,
}

impl SessionHost {
    pub fn new(config: SessionConfig, backend: Box<dyn DawBackend>) -> Result<Self, ConfigError> {
        Ok(SessionHost { state: SessionState::new(config)?, backend, now: 0, no_loops: LoopStore::new() })
    }

    pub fn with_mock(config: SessionConfig) -> Result<Self, ConfigError> {
        Self::new(config, Box::new(MockBackend::new()))
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn view(&self) -> SessionView {
        self.state.view()
    }

    /// Current position of the session clock.
    pub fn now(&self) -> SampleTime {
        self.now
    }

    pub fn backend(&self) -> &dyn DawBackend {
        self.backend.as_ref()
    }

    pub fn loops(&self) -> &LoopStore {
        self.backend.loops().unwrap_or(&self.no_loops)
    }

    /// Applies an event at the current clock position and dispatches its
    /// effects. A rejected event changes nothing.
    pub fn submit(&mut self, user: UserId, kind: EventKind) -> Result<StepReport, EventError> {
        self.submit_event(ControlEvent::new(self.now, user, kind))
    }

    pub fn submit_with_client_time(
        &mut self,
        user: UserId,
        kind: EventKind,
        client_t: Option<SampleTime>,
    ) -> Result<StepReport, EventError> {
        let mut ev = ControlEvent::new(self.now, user, kind);
        ev.client_t = client_t;
        self.submit_event(ev)
    }

    fn submit_event(&mut self, ev: ControlEvent) -> Result<StepReport, EventError> {
        let transition = apply_event(&self.state, &ev)?;
        self.state = transition.state;
        let dispatch = dispatch(&transition.effects, self.backend.as_mut(), &self.state);
        Ok(StepReport { effects: transition.effects, dispatch })
    }

    /// Runs the audio plane for `frames` samples. `live[u]` must hold at
    /// least `frames` samples for the user in slot `u`; anything shorter is
    /// treated as silence.
    pub fn advance(&mut self, live: &[&[f32]], frames: usize) -> Rendered {
        let users = self.state.config().num_users;
        let block = self.state.config().block_size;
        let mut rendered = Rendered { outputs: vec![Vec::with_capacity(frames); users], diagnostics: Vec::new() };
        let mut offset = 0;
        while offset < frames {
            let n = (frames - offset).min(block);
            let chunk: Vec<Vec<f32>> = (0..users)
                .map(|u| match live.get(u) {
                    Some(input) if input.len() >= offset + n => {
                        input[offset..offset + n].iter().map(|s| if s.is_finite() { *s } else { 0.0 }).collect()
                    }
                    _ => Vec::new(),
                })
                .collect();
            let chunk_refs: Vec<&[f32]> = chunk.iter().map(Vec::as_slice).collect();
            self.backend.record_input(&self.state, &chunk_refs, n);
            let store = self.backend.loops().unwrap_or(&self.no_loops);
            let mix = mix_tick(&self.state, store, &chunk_refs, n).expect("chunk is never empty");
            self.state.set_playhead(mix.playhead);
            let MixFrame { outputs, .. } = mix.frame;
            for (dst, src) in rendered.outputs.iter_mut().zip(outputs) {
                dst.extend_from_slice(&src);
            }
            rendered.diagnostics.extend(mix.diagnostics);
            offset += n;
            self.now += n as SampleTime;
        }
        rendered
    }

    pub fn advance_silent(&mut self, frames: usize) -> Rendered {
        let silence = vec![0.0f32; frames];
        let live = vec![silence.as_slice(); self.state.config().num_users];
        self.advance(&live, frames)
    }

    /// Offline bounce from the current state without moving the clock.
    pub fn render(&self, frames: usize) -> Vec<Vec<f32>> {
        render_session(&self.state, self.loops(), frames)
    }

    /// Clears the session and the backend. The clock keeps running.
    pub fn reset(&mut self) {
        self.state = self.state.reset();
        self.backend.reset();
    }
}
