//! Discrete-event co-simulation of the fleet controller and the traffic layer.

mod engine;
pub mod output;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{DemandError, Request};
use crate::eval::KpiReport;
use crate::ids::{NodeId, VehicleId};
use crate::network::{NetworkError, NetworkGraph};
use crate::operator::{OperatorConfig, OperatorError};
use crate::traffic::{TrafficError, TrafficModel};

pub use engine::run;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error("optimization at t={time}s failed: {source}")]
    Operator { time: f64, source: OperatorError },
    #[error("requests still open at t={0}s, long after the horizon")]
    NotDrained(f64),
    #[error("output: {0}")]
    Output(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub start: f64,
    pub end: f64,
    /// Fleet-control interval, seconds.
    pub control_interval: f64,
    /// Estimate-update interval, seconds; a multiple of `control_interval`.
    pub statistics_interval: f64,
    pub warmup: f64,
    pub cooldown: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: 86_400.0,
            control_interval: 60.0,
            statistics_interval: 1800.0,
            warmup: 3600.0,
            cooldown: 3600.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.start.is_finite() && self.end.is_finite() && self.end > self.start) {
            return bad(format!("horizon [{}, {}] is empty", self.start, self.end));
        }
        if !(self.control_interval > 0.0) {
            return bad(format!("control_interval must be positive, got {}", self.control_interval));
        }
        let ratio = self.statistics_interval / self.control_interval;
        if !(ratio >= 1.0 && ratio.fract() == 0.0) {
            return bad(format!(
                "control_interval {} must divide statistics_interval {}",
                self.control_interval, self.statistics_interval
            ));
        }
        if !(self.warmup >= 0.0 && self.cooldown >= 0.0) {
            return bad("warmup and cooldown must be non-negative".into());
        }
        if self.warmup + self.cooldown >= self.end - self.start {
            return bad(format!(
                "warmup {} + cooldown {} must be shorter than the horizon {}",
                self.warmup,
                self.cooldown,
                self.end - self.start
            ));
        }
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.start + self.warmup, self.end - self.cooldown)
    }

    fn ticks_per_statistics(&self) -> u64 {
        (self.statistics_interval / self.control_interval) as u64
    }
}

/// Everything one run needs; built by the scenario layer.
#[derive(Debug, Clone)]
pub struct SimInput {
    pub graph: Arc<NetworkGraph>,
    /// Pending requests; direct trips are (re)frozen by the engine.
    pub requests: Vec<Request>,
    /// Initial vehicle positions.
    pub fleet: Vec<(VehicleId, NodeId)>,
    pub traffic: TrafficModel,
    pub operator: OperatorConfig,
    pub sim: SimConfig,
    /// Lower bound on an estimate as a fraction of free-flow time.
    pub floor_factor: f64,
}

/// Per-vehicle totals; the non-`total_` fields count only activity
/// completed inside the evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub vehicle_id: VehicleId,
    pub distance_m: f64,
    pub busy_s: f64,
    pub passenger_distance_m: f64,
    pub total_distance_m: f64,
    pub max_onboard: u32,
}

impl VehicleRecord {
    pub fn new(vehicle_id: VehicleId) -> Self {
        Self {
            vehicle_id,
            distance_m: 0.0,
            busy_s: 0.0,
            passenger_distance_m: 0.0,
            total_distance_m: 0.0,
            max_onboard: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleActivity {
    Idle,
    Moving,
    Boarding,
}

/// Snapshot of one vehicle at a control tick, after dispatching.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    pub time: f64,
    pub vehicle: VehicleId,
    pub node: NodeId,
    pub onboard: u32,
    pub activity: VehicleActivity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtLogRow {
    pub interval_start: f64,
    pub edge: crate::ids::EdgeId,
    pub estimate: f64,
}

/// Counters reported next to the KPIs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub optimizations: u64,
    pub candidate_schedules: u64,
    /// Combinations skipped by the schedule size cap.
    pub cap_hits: u64,
    pub reassignments: u64,
    /// Chosen schedules that were already infeasible.
    pub damage_control: u64,
    pub wait_violations: u64,
    pub detour_violations: u64,
    pub capacity_violations: u64,
    pub rebalancing_trips: u64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub requests: Vec<Request>,
    pub vehicles: Vec<VehicleRecord>,
    pub fleet_states: Vec<FleetState>,
    pub tt_log: Vec<TtLogRow>,
    pub stats: RunStats,
    pub kpis: KpiReport,
}
