//! Batch runs without a shell: drive the engine on a virtual clock and
//! export the entropy series as CSV.

use super::{Demo, GatewayError, ServerConfig};
use crate::engine::{Clock, Engine, Simulation, State, StepOutcome, TimingParams, VirtualClock};
use crate::kinetics::{write_entropy_csv, EntropySample, GasParams, GasSimulation};
use crate::messaging::{topics, Bus, Publisher, ScopeFilter};
use std::cell::RefCell;
use std::io::Write;
use std::path::Path;
use std::rc::Rc;
use std::sync::Arc;
use std::time::Duration;

/// Virtual milliseconds charged per step.
const STEP_COST_MS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadlessReport {
    pub steps: u64,
    pub samples: Vec<EntropySample>,
    /// The exported CSV, byte for byte.
    pub csv: Vec<u8>,
    pub refresh_publishes: u64,
    pub progress_publishes: u64,
    pub final_state: State,
}

/// Advances the virtual clock after every step so the engine's refresh
/// and progress pacing sees a steady step rate.
struct Metered {
    inner: GasSimulation,
    clock: VirtualClock,
}

impl Simulation for Metered {
    fn step(&mut self, bus: &Publisher) -> StepOutcome {
        let outcome = self.inner.step(bus);
        self.clock.advance(STEP_COST_MS);
        outcome
    }

    fn reset(&mut self) {
        self.inner.reset();
    }

    fn sim_time_ms(&self) -> f64 {
        self.inner.sim_time_ms()
    }
}

/// Runs the kinetics demo for `config.steps` steps and, if an export
/// path is set, writes the CSV there atomically (all or nothing).
pub fn run_headless(config: &ServerConfig) -> Result<HeadlessReport, GatewayError> {
    config.validate()?;
    let steps = config
        .steps
        .ok_or_else(|| GatewayError::InvalidConfig("headless runs need a step count".into()))?;
    if config.demo != Demo::Kinetics {
        return Err(GatewayError::Unsupported(
            "headless mode runs the kinetics demo only".into(),
        ));
    }
    if let Some(path) = &config.export_path {
        check_parent(path)?;
    }

    let bus = Bus::new();
    let samples = Rc::new(RefCell::new(Vec::new()));
    let sink = Rc::clone(&samples);
    bus.subscribe(topics::PLOT_DATA, ScopeFilter::Any, move |env| {
        let p = &env.payload;
        if let (Some(t), Some(s)) = (p.get("x").and_then(|v| v.as_f64()), p.get("y").and_then(|v| v.as_f64())) {
            sink.borrow_mut().push(EntropySample { t, s });
        }
    })?;

    let clock = VirtualClock::new();
    let timing = TimingParams::new(config.refresh_ms as f64, 250.0, 10.0)?;
    let engine = Engine::new(bus.publisher(), Arc::new(clock.clone()) as Arc<dyn Clock>, timing);
    let params = GasParams {
        n_particles: config.particles,
        seed: config.seed_or_default(),
        entropy_grid_m: config.grid_m,
        ..GasParams::default()
    };
    let sim = GasSimulation::new(params)?.with_max_steps(steps);
    engine.attach(Box::new(Metered { inner: sim, clock }))?;
    engine.start()?;
    while engine.wait_while_running(Duration::from_millis(20)) == State::Running {
        bus.dispatch_pending()?;
    }
    bus.dispatch_pending()?;
    let final_state = engine.state();
    if final_state != State::Completed {
        return Err(GatewayError::Unsupported(format!("simulation ended in state {final_state}")));
    }

    let samples = samples.take();
    let mut csv = Vec::new();
    write_entropy_csv(&mut csv, &samples)?;
    if let Some(path) = &config.export_path {
        write_atomically(path, &csv)?;
    }
    Ok(HeadlessReport {
        steps: engine.step_count(),
        samples,
        csv,
        refresh_publishes: bus.publish_count(topics::SIM_REFRESH),
        progress_publishes: bus.publish_count(topics::SIM_PROGRESS),
        final_state,
    })
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn check_parent(path: &Path) -> Result<(), GatewayError> {
    let dir = parent_dir(path);
    if !dir.is_dir() {
        return Err(GatewayError::Export(format!("directory {} does not exist", dir.display())));
    }
    Ok(())
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), GatewayError> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| GatewayError::Export(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
