//! Customer requests: generation from OD rates and loading from CSV.

use std::collections::HashSet;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NodeId, RequestId, VehicleId};
use crate::network::{check_header, parse_field, NetworkError, NetworkGraph, Router};

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("{file} line {line}: malformed row: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("{file} line {line}: unknown node {node}")]
    UnknownNode { file: String, line: u64, node: NodeId },
    #[error("{file} line {line}: duplicate request id {id}")]
    DuplicateId { file: String, line: u64, id: RequestId },
    #[error("invalid OD entry {index}: {reason}")]
    InvalidRate { index: usize, reason: String },
    #[error("request {id}: illegal status change {from:?} -> {to:?}")]
    IllegalTransition {
        id: RequestId,
        from: RequestStatus,
        to: RequestStatus,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Pending,
    Assigned,
    OnBoard,
    Served,
    Rejected,
}

impl RequestStatus {
    pub fn can_become(self, next: RequestStatus) -> bool {
        use RequestStatus::*;
        matches!(
            (self, next),
            (Pending, Assigned) | (Pending, Rejected) | (Assigned, OnBoard) | (OnBoard, Served)
        )
    }
}

/// A customer trip with its communicated and realized timestamps (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub request_time: f64,
    /// Fastest-path time under the operator table in force at `request_time`.
    pub direct_time: Option<f64>,
    pub direct_distance: Option<f64>,
    pub expected_pickup: Option<f64>,
    pub expected_dropoff: Option<f64>,
    pub actual_pickup: Option<f64>,
    pub actual_dropoff: Option<f64>,
    pub status: RequestStatus,
    pub vehicle: Option<VehicleId>,
    pub reassignments: u32,
}

impl Request {
    pub fn new(id: RequestId, origin: NodeId, destination: NodeId, request_time: f64) -> Self {
        Self {
            id,
            origin,
            destination,
            request_time,
            direct_time: None,
            direct_distance: None,
            expected_pickup: None,
            expected_dropoff: None,
            actual_pickup: None,
            actual_dropoff: None,
            status: RequestStatus::Pending,
            vehicle: None,
            reassignments: 0,
        }
    }

    pub fn set_status(&mut self, next: RequestStatus) -> Result<(), DemandError> {
        if !self.status.can_become(next) {
            return Err(DemandError::IllegalTransition {
                id: self.id,
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }

    /// Freezes the direct trip against the given estimate snapshot.
    pub fn freeze_direct_trip(&mut self, router: &Router) -> Result<(), NetworkError> {
        self.direct_time = Some(router.travel_time(self.origin, self.destination)?);
        self.direct_distance = Some(router.travel_distance(self.origin, self.destination)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdEntry {
    pub origin: NodeId,
    pub destination: NodeId,
    /// Requests per hour.
    pub rate: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdRates {
    entries: Vec<OdEntry>,
}

impl OdRates {
    pub fn new(entries: Vec<OdEntry>) -> Result<Self, DemandError> {
        for (index, e) in entries.iter().enumerate() {
            let bad = |reason: String| Err(DemandError::InvalidRate { index, reason });
            if !(e.rate >= 0.0 && e.rate.is_finite()) {
                return bad(format!("rate must be non-negative, got {}", e.rate));
            }
            if !(e.start <= e.end) || !e.start.is_finite() || !e.end.is_finite() {
                return bad(format!("window [{}, {}) is not well-ordered", e.start, e.end));
            }
            if e.origin == e.destination {
                return bad(format!("origin equals destination ({})", e.origin));
            }
        }
        Ok(Self { entries })
    }

    /// Every ordered pair of distinct graph nodes with equal rate, adding up
    /// to `total_per_hour` over the window.
    pub fn uniform(graph: &NetworkGraph, total_per_hour: f64, start: f64, end: f64) -> Result<Self, DemandError> {
        let nodes = graph.nodes();
        let pairs = nodes.len() * nodes.len().saturating_sub(1);
        let rate = if pairs == 0 { 0.0 } else { total_per_hour / pairs as f64 };
        let mut entries = Vec::with_capacity(pairs);
        for &o in nodes {
            for &d in nodes {
                if o != d {
                    entries.push(OdEntry {
                        origin: o,
                        destination: d,
                        rate,
                        start,
                        end,
                    });
                }
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[OdEntry] {
        &self.entries
    }
}

fn entry_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        .wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Homogeneous Poisson arrivals per OD entry, merged by time (ties by entry
/// order), with sequential ids.
pub fn generate_requests(rates: &OdRates, seed: u64) -> Vec<Request> {
    let mut arrivals: Vec<(f64, usize, NodeId, NodeId)> = Vec::new();
    for (idx, e) in rates.entries.iter().enumerate() {
        if e.rate <= 0.0 || e.end <= e.start {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(entry_seed(seed, idx));
        let gap = Exp::new(e.rate / 3600.0).expect("positive rate");
        let mut t = e.start;
        loop {
            t += gap.sample(&mut rng);
            if t >= e.end {
                break;
            }
            arrivals.push((t, idx, e.origin, e.destination));
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    arrivals
        .into_iter()
        .enumerate()
        .map(|(i, (t, _, o, d))| Request::new(RequestId(i as u32), o, d, t))
        .collect()
}

/// Reads `origin_node,destination_node,rate_per_h,start_s,end_s`.
pub fn load_od_rates(source: impl Read) -> Result<OdRates, DemandError> {
    let file = "od";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(
        &mut rdr,
        file,
        &["origin_node", "destination_node", "rate_per_h", "start_s", "end_s"],
    )
    .map_err(|reason| DemandError::MalformedRow {
        file: file.into(),
        line: 1,
        reason,
    })?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DemandError::MalformedRow {
            file: file.into(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let m = |reason| DemandError::MalformedRow {
            file: file.into(),
            line,
            reason,
        };
        entries.push(OdEntry {
            origin: NodeId(parse_field(&rec, 0, "origin_node").map_err(m)?),
            destination: NodeId(parse_field(&rec, 1, "destination_node").map_err(m)?),
            rate: parse_field(&rec, 2, "rate_per_h").map_err(m)?,
            start: parse_field(&rec, 3, "start_s").map_err(m)?,
            end: parse_field(&rec, 4, "end_s").map_err(m)?,
        });
    }
    OdRates::new(entries)
}

/// Reads `request_id,origin_node,destination_node,request_time_s`, returning
/// the requests sorted by time plus any warnings. Direct trips are frozen
/// against `router` (the initial estimate table).
pub fn load_requests(source: impl Read, router: &Router) -> Result<(Vec<Request>, Vec<String>), DemandError> {
    let file = "requests";
    let graph = router.graph();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(
        &mut rdr,
        file,
        &["request_id", "origin_node", "destination_node", "request_time_s"],
    )
    .map_err(|reason| DemandError::MalformedRow {
        file: file.into(),
        line: 1,
        reason,
    })?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut warnings = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DemandError::MalformedRow {
            file: file.into(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let m = |reason| DemandError::MalformedRow {
            file: file.into(),
            line,
            reason,
        };
        if rec.len() != 4 {
            return Err(m(format!("expected 4 columns, got {}", rec.len())));
        }
        let id = RequestId(parse_field(&rec, 0, "request_id").map_err(m)?);
        let origin = NodeId(parse_field(&rec, 1, "origin_node").map_err(m)?);
        let destination = NodeId(parse_field(&rec, 2, "destination_node").map_err(m)?);
        let t: f64 = parse_field(&rec, 3, "request_time_s").map_err(m)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(m(format!("request_time_s must be non-negative, got {t}")));
        }
        if origin == destination {
            return Err(m(format!("origin equals destination ({origin})")));
        }
        for node in [origin, destination] {
            if !graph.contains_node(node) {
                return Err(DemandError::UnknownNode {
                    file: file.into(),
                    line,
                    node,
                });
            }
        }
        if !seen.insert(id) {
            return Err(DemandError::DuplicateId {
                file: file.into(),
                line,
                id,
            });
        }
        let mut r = Request::new(id, origin, destination, t);
        r.freeze_direct_trip(router)?;
        out.push(r);
    }
    if out.windows(2).any(|w| w[1].request_time < w[0].request_time) {
        warnings.push("requests file is not sorted by request_time_s; re-sorted".to_string());
        out.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));
    }
    Ok((out, warnings))
}
