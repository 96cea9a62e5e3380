//! Step-based simulation engine.
//!
//! A [`Simulation`] is stepped either synchronously through
//! [`Engine::step_n`] or on a dedicated background thread after
//! [`Engine::start`]. The engine's only output channel is a bus
//! [`Publisher`]: lifecycle changes go out on `sim.state`, and the loop
//! emits coalesced `sim.refresh` and `sim.progress` envelopes at step
//! boundaries according to [`TimingParams`]. Timing never feeds back into
//! the simulation, so the state after `n` steps does not depend on it.
//!
//! Control calls (`pause`, `resume`, `cancel`, ...) may come from any
//! thread; they flip a shared state word that the loop checks between
//! steps.

mod clock;

pub use clock::{Clock, RealClock, VirtualClock};

use crate::messaging::{topics, Message, Publisher};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    Idle,
    Running,
    Paused,
    Cancelled,
    Completed,
}

impl State {
    pub fn as_str(self) -> &'static str {
        match self {
            State::Idle => "Idle",
            State::Running => "Running",
            State::Paused => "Paused",
            State::Cancelled => "Cancelled",
            State::Completed => "Completed",
        }
    }

    /// Whether `self → to` is an allowed lifecycle transition. Synchronous
    /// stepping may also complete a simulation from `Idle` or `Paused`.
    pub fn can_transition(self, to: State) -> bool {
        use State::*;
        matches!(
            (self, to),
            (Idle, Running)
                | (Running, Paused)
                | (Paused, Running)
                | (Running, Cancelled)
                | (Paused, Cancelled)
                | (Running, Completed)
                | (Idle, Completed)
                | (Paused, Completed)
                | (Cancelled, Idle)
                | (Completed, Idle)
        )
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Done,
}

/// What the engine drives. `step` must be deterministic given the prior
/// state; any output goes through the supplied publisher.
pub trait Simulation: Send {
    fn step(&mut self, bus: &Publisher) -> StepOutcome;

    /// Restores the initial state.
    fn reset(&mut self);

    /// Simulated time reported in refresh and state payloads.
    fn sim_time_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("cannot {op} while {state}")]
    IllegalState { op: &'static str, state: State },
    #[error("no simulation attached")]
    NoSimulation,
    #[error("step count must be at least 1")]
    InvalidStepCount,
    #[error("invalid timing parameters: {0}")]
    InvalidTiming(&'static str),
}

/// Emission cadence of the background loop, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    pub refresh_interval: f64,
    pub progress_interval: f64,
    /// Minimum spacing between chances to give up the CPU. Not a sleep.
    pub cooperative_yield: f64,
}

impl TimingParams {
    pub fn new(refresh_interval: f64, progress_interval: f64, cooperative_yield: f64) -> Result<Self, EngineError> {
        if !(refresh_interval.is_finite() && refresh_interval > 0.0) {
            return Err(EngineError::InvalidTiming("refresh_interval must be > 0"));
        }
        if !(progress_interval.is_finite() && progress_interval > 0.0) {
            return Err(EngineError::InvalidTiming("progress_interval must be > 0"));
        }
        if !(cooperative_yield.is_finite() && cooperative_yield >= 0.0) {
            return Err(EngineError::InvalidTiming("cooperative_yield must be >= 0"));
        }
        Ok(Self {
            refresh_interval,
            progress_interval,
            cooperative_yield,
        })
    }
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            refresh_interval: 33.0,
            progress_interval: 250.0,
            cooperative_yield: 10.0,
        }
    }
}

struct Control {
    state: State,
    step_count: u64,
    sim_time_ms: f64,
    /// Set while the worker is blocked on the pause condvar.
    parked: bool,
    transitions: Vec<(State, State)>,
}

struct Shared {
    ctrl: Mutex<Control>,
    changed: Condvar,
    sim: Mutex<Option<Box<dyn Simulation>>>,
    publisher: Publisher,
}

fn relock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Shared {
    fn ctrl(&self) -> MutexGuard<'_, Control> {
        relock(&self.ctrl)
    }

    /// Records and announces a transition. Caller holds the control lock.
    fn transition(&self, ctrl: &mut Control, to: State) {
        let from = ctrl.state;
        debug_assert!(from.can_transition(to), "{from} -> {to}");
        ctrl.state = to;
        ctrl.transitions.push((from, to));
        let _ = self.publisher.publish(
            Message::new(topics::SIM_STATE)
                .source("engine")
                .field("state", to.as_str())
                .field("previous", from.as_str())
                .field("step_count", ctrl.step_count)
                .field("sim_time_ms", ctrl.sim_time_ms),
        );
        self.changed.notify_all();
    }

    fn publish_tick(&self, topic: &str, ctrl: &Control, coalesce: bool) {
        let mut msg = Message::new(topic)
            .source("engine")
            .field("state", ctrl.state.as_str())
            .field("step_count", ctrl.step_count)
            .field("sim_time_ms", ctrl.sim_time_ms);
        if coalesce {
            msg = msg.coalesce(topics::REFRESH_KEY);
        }
        let _ = self.publisher.publish(msg);
    }
}

/// Owns one simulation and its background loop.
pub struct Engine {
    shared: Arc<Shared>,
    clock: Arc<dyn Clock>,
    timing: TimingParams,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl Engine {
    pub fn new(publisher: Publisher, clock: Arc<dyn Clock>, timing: TimingParams) -> Self {
        Self {
            shared: Arc::new(Shared {
                ctrl: Mutex::new(Control {
                    state: State::Idle,
                    step_count: 0,
                    sim_time_ms: 0.0,
                    parked: false,
                    transitions: Vec::new(),
                }),
                changed: Condvar::new(),
                sim: Mutex::new(None),
                publisher,
            }),
            clock,
            timing,
            worker: Mutex::new(None),
        }
    }

    pub fn state(&self) -> State {
        self.shared.ctrl().state
    }

    pub fn step_count(&self) -> u64 {
        self.shared.ctrl().step_count
    }

    pub fn sim_time_ms(&self) -> f64 {
        self.shared.ctrl().sim_time_ms
    }

    pub fn timing(&self) -> TimingParams {
        self.timing
    }

    /// Every transition observed so far, oldest first.
    pub fn transitions(&self) -> Vec<(State, State)> {
        self.shared.ctrl().transitions.clone()
    }

    fn join_worker(&self) {
        let handle = relock(&self.worker).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }

    pub fn attach(&self, simulation: Box<dyn Simulation>) -> Result<(), EngineError> {
        {
            let ctrl = self.shared.ctrl();
            if ctrl.state != State::Idle {
                return Err(EngineError::IllegalState {
                    op: "attach",
                    state: ctrl.state,
                });
            }
        }
        self.join_worker();
        *relock(&self.shared.sim) = Some(simulation);
        let mut ctrl = self.shared.ctrl();
        ctrl.step_count = 0;
        ctrl.sim_time_ms = 0.0;
        Ok(())
    }

    pub fn has_simulation(&self) -> bool {
        relock(&self.shared.sim).is_some()
    }

    pub fn start(&self) -> Result<(), EngineError> {
        let idle = || {
            let state = self.state();
            if state == State::Idle {
                Ok(())
            } else {
                Err(EngineError::IllegalState { op: "start", state })
            }
        };
        idle()?;
        if !self.has_simulation() {
            return Err(EngineError::NoSimulation);
        }
        // a worker left over from an earlier run has already exited
        self.join_worker();
        let mut ctrl = self.shared.ctrl();
        if ctrl.state != State::Idle {
            drop(ctrl);
            return idle();
        }
        self.shared.transition(&mut ctrl, State::Running);
        drop(ctrl);
        let shared = Arc::clone(&self.shared);
        let clock = Arc::clone(&self.clock);
        let timing = self.timing;
        let handle = std::thread::Builder::new()
            .name("mdi-engine".into())
            .spawn(move || run_loop(&shared, clock.as_ref(), timing))
            .expect("spawn engine thread");
        *relock(&self.worker) = Some(handle);
        Ok(())
    }

    /// Stops the loop at the next step boundary. Returns once the worker
    /// has parked, so the step count is stable afterwards.
    pub fn pause(&self) -> Result<(), EngineError> {
        let mut ctrl = self.shared.ctrl();
        if ctrl.state != State::Running {
            return Err(EngineError::IllegalState {
                op: "pause",
                state: ctrl.state,
            });
        }
        self.shared.transition(&mut ctrl, State::Paused);
        while ctrl.state == State::Paused && !ctrl.parked && relock(&self.worker).is_some() {
            let (next, timeout) = self
                .shared
                .changed
                .wait_timeout(ctrl, Duration::from_millis(50))
                .unwrap_or_else(|e| e.into_inner());
            ctrl = next;
            if timeout.timed_out() && self.worker_finished() {
                break;
            }
        }
        Ok(())
    }

    fn worker_finished(&self) -> bool {
        relock(&self.worker).as_ref().is_none_or(|h| h.is_finished())
    }

    pub fn resume(&self) -> Result<(), EngineError> {
        let mut ctrl = self.shared.ctrl();
        if ctrl.state != State::Paused {
            return Err(EngineError::IllegalState {
                op: "resume",
                state: ctrl.state,
            });
        }
        self.shared.transition(&mut ctrl, State::Running);
        Ok(())
    }

    /// Requests cancellation. At most the step already in flight completes.
    pub fn cancel(&self) -> Result<(), EngineError> {
        let mut ctrl = self.shared.ctrl();
        if !matches!(ctrl.state, State::Running | State::Paused) {
            return Err(EngineError::IllegalState {
                op: "cancel",
                state: ctrl.state,
            });
        }
        self.shared.transition(&mut ctrl, State::Cancelled);
        Ok(())
    }

    /// Runs `n` steps on the calling thread and leaves one coalesced
    /// `sim.refresh` queued. Returns the number executed, which is smaller
    /// than `n` if the simulation finishes first.
    pub fn step_n(&self, n: u64) -> Result<u64, EngineError> {
        if n < 1 {
            return Err(EngineError::InvalidStepCount);
        }
        {
            let ctrl = self.shared.ctrl();
            if !matches!(ctrl.state, State::Idle | State::Paused) {
                return Err(EngineError::IllegalState {
                    op: "step",
                    state: ctrl.state,
                });
            }
        }
        let mut sim_guard = relock(&self.shared.sim);
        let sim = sim_guard.as_mut().ok_or(EngineError::NoSimulation)?;
        let mut executed = 0;
        let mut finished = false;
        while executed < n {
            let outcome = sim.step(&self.shared.publisher);
            executed += 1;
            let mut ctrl = self.shared.ctrl();
            ctrl.step_count += 1;
            ctrl.sim_time_ms = sim.sim_time_ms();
            if outcome == StepOutcome::Done {
                finished = true;
                break;
            }
        }
        drop(sim_guard);
        let mut ctrl = self.shared.ctrl();
        if finished && matches!(ctrl.state, State::Idle | State::Paused) {
            self.shared.transition(&mut ctrl, State::Completed);
        }
        self.shared.publish_tick(topics::SIM_REFRESH, &ctrl, true);
        Ok(executed)
    }

    /// Calls the simulation's reset hook and returns to `Idle`. Allowed
    /// from `Idle`, `Cancelled` and `Completed`.
    pub fn reset(&self) -> Result<(), EngineError> {
        {
            let ctrl = self.shared.ctrl();
            if matches!(ctrl.state, State::Running | State::Paused) {
                return Err(EngineError::IllegalState {
                    op: "reset",
                    state: ctrl.state,
                });
            }
        }
        self.join_worker();
        if let Some(sim) = relock(&self.shared.sim).as_mut() {
            sim.reset();
        }
        let mut ctrl = self.shared.ctrl();
        ctrl.step_count = 0;
        ctrl.sim_time_ms = 0.0;
        if ctrl.state != State::Idle {
            self.shared.transition(&mut ctrl, State::Idle);
        }
        Ok(())
    }

    /// Blocks until the engine is no longer `Running`, or `timeout`
    /// elapses. Returns the state observed last.
    pub fn wait_while_running(&self, timeout: Duration) -> State {
        let deadline = std::time::Instant::now() + timeout;
        let mut ctrl = self.shared.ctrl();
        while ctrl.state == State::Running {
            let now = std::time::Instant::now();
            if now >= deadline {
                break;
            }
            ctrl = self
                .shared
                .changed
                .wait_timeout(ctrl, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        ctrl.state
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        let _ = self.cancel();
        self.join_worker();
    }
}

fn run_loop(shared: &Shared, clock: &dyn Clock, timing: TimingParams) {
    let start = clock.now_ms();
    let (mut last_refresh, mut last_progress, mut last_yield) = (start, start, start);
    loop {
        {
            let mut ctrl = shared.ctrl();
            while ctrl.state == State::Paused {
                ctrl.parked = true;
                shared.changed.notify_all();
                ctrl = shared.changed.wait(ctrl).unwrap_or_else(|e| e.into_inner());
            }
            ctrl.parked = false;
            if ctrl.state != State::Running {
                return;
            }
        }
        let (outcome, sim_time) = {
            let mut guard = relock(&shared.sim);
            let Some(sim) = guard.as_mut() else { return };
            let outcome = sim.step(&shared.publisher);
            (outcome, sim.sim_time_ms())
        };
        let now = clock.now_ms();
        {
            let mut ctrl = shared.ctrl();
            ctrl.step_count += 1;
            ctrl.sim_time_ms = sim_time;
            if now - last_refresh >= timing.refresh_interval {
                shared.publish_tick(topics::SIM_REFRESH, &ctrl, true);
                last_refresh = now;
            }
            if now - last_progress >= timing.progress_interval {
                shared.publish_tick(topics::SIM_PROGRESS, &ctrl, false);
                last_progress = now;
            }
            if outcome == StepOutcome::Done {
                if ctrl.state.can_transition(State::Completed) {
                    shared.transition(&mut ctrl, State::Completed);
                }
                return;
            }
        }
        if now - last_yield >= timing.cooperative_yield {
            std::thread::yield_now();
            last_yield = now;
        }
    }
}
