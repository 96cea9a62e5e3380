//! Free expansion of an ideal gas in the unit cube.
//!
//! Particles start uniformly in the corner octant `[0, 0.5)³` with
//! Gaussian velocity components and move ballistically, reflecting
//! specularly off the walls. Entropy is the Shannon entropy of particle
//! occupancy over an `m × m × m` grid (k_B = 1), so it rises from about
//! `ln(m³/8)` to about `ln(m³)`.
//!
//! Random streams: a single ChaCha8 generator seeded with
//! `seed_from_u64(seed)`; stream 0 draws positions (x, y, z per particle
//! in order), stream 1 draws velocity components from a standard normal
//! scaled by the thermal speed. Both streams start at word 0.

use crate::engine::{Simulation, StepOutcome};
use crate::messaging::{topics, Message, Publisher};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::{Arc, Mutex};

pub const ENTROPY_SERIES: &str = "entropy";
const POSITION_STREAM: u64 = 0;
const VELOCITY_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KineticsError {
    #[error("invalid gas parameters: {0}")]
    InvalidParams(&'static str),
    #[error("csv export failed: {0}")]
    Export(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasParams {
    pub n_particles: usize,
    pub dt: f64,
    pub thermal_speed: f64,
    pub seed: u64,
    pub entropy_grid_m: usize,
    pub sample_every: u64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self {
            n_particles: 50_000,
            dt: 0.005,
            thermal_speed: 1.0,
            seed: 0,
            entropy_grid_m: 10,
            sample_every: 10,
        }
    }
}

impl GasParams {
    pub fn validate(&self) -> Result<(), KineticsError> {
        if self.n_particles == 0 {
            return Err(KineticsError::InvalidParams("n_particles must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(KineticsError::InvalidParams("dt must be positive"));
        }
        if !(self.thermal_speed >= 0.0 && self.thermal_speed.is_finite()) {
            return Err(KineticsError::InvalidParams("thermal_speed must be non-negative"));
        }
        if self.entropy_grid_m < 2 {
            return Err(KineticsError::InvalidParams("entropy_grid_m must be at least 2"));
        }
        if self.sample_every == 0 {
            return Err(KineticsError::InvalidParams("sample_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasState {
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    pub step_index: u64,
    pub dt: f64,
}

impl GasState {
    pub fn init(params: &GasParams) -> Result<Self, KineticsError> {
        params.validate()?;
        let mut rng = stream(params.seed, POSITION_STREAM);
        let positions = (0..params.n_particles)
            .map(|_| std::array::from_fn(|_| 0.5 * rng.random::<f64>()))
            .collect();
        let mut rng = stream(params.seed, VELOCITY_STREAM);
        let velocities = (0..params.n_particles)
            .map(|_| std::array::from_fn(|_| params.thermal_speed * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Ok(Self {
            positions,
            velocities,
            step_index: 0,
            dt: params.dt,
        })
    }

    pub fn sim_time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn step(&mut self) {
        step_physics(&mut self.positions, &mut self.velocities, self.dt);
        self.step_index += 1;
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.velocities
            .iter()
            .map(|v| 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
            .sum()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Advances every particle by `dt`, reflecting off the faces of `[0,1]³`
/// as many times as needed.
pub fn step_physics(positions: &mut [[f64; 3]], velocities: &mut [[f64; 3]], dt: f64) {
    for (p, v) in positions.iter_mut().zip(velocities.iter_mut()) {
        for k in 0..3 {
            let mut x = p[k] + v[k] * dt;
            while !(0.0..=1.0).contains(&x) {
                x = if x > 1.0 { 2.0 - x } else { -x };
                v[k] = -v[k];
            }
            p[k] = x;
        }
    }
}

/// `−Σ pᵢ ln pᵢ` over occupied cells of an `m³` grid on the unit cube.
pub fn compute_entropy(positions: &[[f64; 3]], m: usize) -> f64 {
    assert!(m >= 2, "entropy grid needs at least 2 cells per axis");
    if positions.is_empty() {
        return 0.0;
    }
    let cell = |x: f64| ((x * m as f64) as usize).min(m - 1);
    let mut counts = vec![0u32; m * m * m];
    for p in positions {
        counts[(cell(p[2]) * m + cell(p[1])) * m + cell(p[0])] += 1;
    }
    let n = positions.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            q * q.ln()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySample {
    pub t: f64,
    pub s: f64,
}

/// Particle positions captured at a sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudSnapshot {
    pub step_index: u64,
    pub t: f64,
    pub positions: Vec<[f64; 3]>,
    pub speeds: Vec<f64>,
}

/// Latest snapshot, shared between the stepping thread and readers.
pub type SnapshotSlot = Arc<Mutex<Option<Arc<CloudSnapshot>>>>;

/// Engine adapter. Before each step whose index is a multiple of
/// `sample_every` it publishes `plot.data {series:"entropy", x:t, y:s}`
/// and replaces the snapshot.
pub struct GasSimulation {
    params: GasParams,
    state: GasState,
    snapshot: SnapshotSlot,
    max_steps: Option<u64>,
}

impl GasSimulation {
    pub fn new(params: GasParams) -> Result<Self, KineticsError> {
        let state = GasState::init(&params)?;
        Ok(Self {
            params,
            state,
            snapshot: Arc::new(Mutex::new(None)),
            max_steps: None,
        })
    }

    /// Reports `Done` once this many steps have run.
    pub fn with_max_steps(mut self, steps: u64) -> Self {
        self.max_steps = Some(steps);
        self
    }

    pub fn params(&self) -> &GasParams {
        &self.params
    }

    pub fn state(&self) -> &GasState {
        &self.state
    }

    pub fn snapshot_slot(&self) -> SnapshotSlot {
        Arc::clone(&self.snapshot)
    }

    /// Stores the current positions and speeds in the snapshot slot.
    pub fn refresh_snapshot(&self) {
        let snap = CloudSnapshot {
            step_index: self.state.step_index,
            t: self.state.sim_time(),
            positions: self.state.positions.clone(),
            speeds: self
                .state
                .velocities
                .iter()
                .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
                .collect(),
        };
        *self.snapshot.lock().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(snap));
    }

    fn sample(&self, bus: &Publisher) {
        let t = self.state.sim_time();
        let s = compute_entropy(&self.state.positions, self.params.entropy_grid_m);
        let msg = Message::new(topics::PLOT_DATA)
            .field("series", ENTROPY_SERIES)
            .field("x", t)
            .field("y", s)
            .source("kinetics");
        if let Err(e) = bus.publish(msg) {
            log::warn!("entropy sample dropped: {e}");
        }
        self.refresh_snapshot();
    }
}

impl Simulation for GasSimulation {
    fn step(&mut self, bus: &Publisher) -> StepOutcome {
        if self.state.step_index % self.params.sample_every == 0 {
            self.sample(bus);
        }
        self.state.step();
        match self.max_steps {
            Some(max) if self.state.step_index >= max => StepOutcome::Done,
            _ => StepOutcome::Continue,
        }
    }

    fn reset(&mut self) {
        self.state = GasState::init(&self.params).expect("params validated at construction");
        self.refresh_snapshot();
    }

    fn sim_time_ms(&self) -> f64 {
        self.state.sim_time() * 1000.0
    }
}

/// Writes `t,s` rows with shortest round-trip float formatting.
pub fn write_entropy_csv<W: Write>(out: W, samples: &[EntropySample]) -> Result<(), KineticsError> {
    let err = |e: csv::Error| KineticsError::Export(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "s"]).map_err(err)?;
    for s in samples {
        w.write_record([s.t.to_string(), s.s.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| KineticsError::Export(e.to_string()))
}

pub fn read_entropy_csv<R: std::io::Read>(input: R) -> Result<Vec<EntropySample>, KineticsError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| KineticsError::Export(e.to_string()))?;
    if headers != vec!["t", "s"] {
        return Err(KineticsError::Export(format!("unexpected header {headers:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| KineticsError::Export(e.to_string())))
        .collect()
}
