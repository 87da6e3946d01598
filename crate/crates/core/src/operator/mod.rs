//! Fleet control: schedule construction and rating, candidate generation,
//! the assignment program, customer offers and idle-vehicle rebalancing.

mod assignment;
mod candidates;
mod rebalance;
mod schedule;

use thiserror::Error;

use crate::ids::{RequestId, VehicleId};

pub use assignment::{solve_assignment, Assignment};
pub use candidates::{build_candidates, AssignmentProblem};
pub use rebalance::rebalance;
pub use schedule::{
    best_permutation, schedule_cost, simulate_schedule, Infeasibility, OnboardPassenger, RequestBook, Schedule,
    Stop, StopPlan, TripInfo, VehicleState,
};

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("request {request} is not served by the schedule of vehicle {vehicle}")]
    RequestNotInSchedule { request: RequestId, vehicle: VehicleId },
    #[error("assignment program is infeasible: {0}")]
    InfeasibleProgram(String),
    #[error("invalid operator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorConfig {
    /// Maximum waiting time between request and pickup, seconds.
    pub max_wait: f64,
    /// Maximum relative detour over the direct trip.
    pub max_detour: f64,
    /// Dwell per stop, seconds.
    pub boarding_time: f64,
    pub capacity: u32,
    pub reassignment: bool,
    /// Reward per served request in the schedule cost, seconds.
    pub assignment_reward: f64,
    /// Weight of delays beyond the latest pickup/dropoff.
    pub delay_penalty: f64,
    /// Cap on requests (incl. onboard) in one schedule.
    pub max_schedule_requests: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            max_wait: 480.0,
            max_detour: 0.40,
            boarding_time: 30.0,
            capacity: 4,
            reassignment: false,
            assignment_reward: 1_000_000.0,
            delay_penalty: 10.0,
            max_schedule_requests: 6,
        }
    }
}

impl OperatorConfig {
    pub fn hailing() -> Self {
        Self {
            capacity: 1,
            ..Self::default()
        }
    }

    pub fn pooling() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        let positive = [
            ("w_max", self.max_wait),
            ("delta_max", self.max_detour),
            ("boarding_time", self.boarding_time),
            ("p_r", self.assignment_reward),
            ("p_delay", self.delay_penalty),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OperatorError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.capacity < 1 {
            return Err(OperatorError::InvalidConfig("capacity must be at least 1".into()));
        }
        if self.max_schedule_requests < 1 {
            return Err(OperatorError::InvalidConfig(
                "max_schedule_requests must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The detour limit applies to pooling only.
    pub fn detour_limited(&self) -> bool {
        self.capacity > 1
    }

    pub fn latest_pickup(&self, request_time: f64) -> f64 {
        request_time + self.max_wait
    }

    /// Onboard time is capped relative to the frozen direct trip, anchored
    /// at the (planned or actual) pickup.
    pub fn latest_dropoff(&self, pickup: f64, direct_time: f64) -> f64 {
        pickup + (1.0 + self.max_detour) * direct_time
    }
}

/// Expected times communicated to a customer at first assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer {
    pub request: RequestId,
    pub expected_pickup: f64,
    pub expected_dropoff: f64,
}

pub fn make_offer(schedule: &Schedule, request: RequestId) -> Result<Offer, OperatorError> {
    match (schedule.pickups.get(&request), schedule.dropoffs.get(&request)) {
        (Some(&pu), Some(&dropoff)) => Ok(Offer {
            request,
            expected_pickup: pu,
            expected_dropoff: dropoff,
        }),
        _ => Err(OperatorError::RequestNotInSchedule {
            request,
            vehicle: schedule.vehicle,
        }),
    }
}
