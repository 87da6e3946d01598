//! CSV exports of a run and readers for re-evaluation.
//!
//! Floats are written in shortest round-trip form and absent values as empty
//! fields, so reading a file back yields bit-identical records.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::demand::{Request, RequestStatus};
use crate::eval::{delta_travel, delta_wait, export_histogram, fmt_opt, write_histogram, write_kpi_csv};
use crate::ids::{NodeId, RequestId, VehicleId};

use super::{RunStats, SimError, SimOutput, TtLogRow, VehicleRecord};

pub const REQUEST_HEADER: [&str; 15] = [
    "request_id",
    "origin_node",
    "destination_node",
    "request_time_s",
    "direct_time_s",
    "direct_distance_m",
    "expected_pickup_s",
    "expected_dropoff_s",
    "actual_pickup_s",
    "actual_dropoff_s",
    "status",
    "vehicle_id",
    "reassignments",
    "dwt_s",
    "dtt_s",
];

/// Histogram bin width for the Δ exports, seconds.
pub const HISTOGRAM_BIN_S: f64 = 30.0;

fn out_err(e: impl std::fmt::Display) -> SimError {
    SimError::Output(e.to_string())
}

fn status_name(s: RequestStatus) -> &'static str {
    match s {
        RequestStatus::Pending => "pending",
        RequestStatus::Assigned => "assigned",
        RequestStatus::OnBoard => "on_board",
        RequestStatus::Served => "served",
        RequestStatus::Rejected => "rejected",
    }
}

fn parse_status(s: &str) -> Option<RequestStatus> {
    Some(match s {
        "pending" => RequestStatus::Pending,
        "assigned" => RequestStatus::Assigned,
        "on_board" => RequestStatus::OnBoard,
        "served" => RequestStatus::Served,
        "rejected" => RequestStatus::Rejected,
        _ => return None,
    })
}

pub fn write_requests(out: impl Write, requests: &[Request]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REQUEST_HEADER)?;
    for r in requests {
        w.write_record([
            r.id.to_string(),
            r.origin.to_string(),
            r.destination.to_string(),
            r.request_time.to_string(),
            fmt_opt(r.direct_time),
            fmt_opt(r.direct_distance),
            fmt_opt(r.expected_pickup),
            fmt_opt(r.expected_dropoff),
            fmt_opt(r.actual_pickup),
            fmt_opt(r.actual_dropoff),
            status_name(r.status).to_string(),
            r.vehicle.map_or_else(String::new, |v| v.to_string()),
            r.reassignments.to_string(),
            fmt_opt(delta_wait(r)),
            fmt_opt(delta_travel(r)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize, line: u64) -> Result<&str, SimError> {
    rec.get(i)
        .ok_or_else(|| SimError::Output(format!("line {line}: missing column {i}")))
}

fn num<T: std::str::FromStr>(s: &str, line: u64, name: &str) -> Result<T, SimError> {
    s.parse()
        .map_err(|_| SimError::Output(format!("line {line}: bad {name} {s:?}")))
}

fn opt(s: &str, line: u64, name: &str) -> Result<Option<f64>, SimError> {
    if s.is_empty() {
        Ok(None)
    } else {
        num(s, line, name).map(Some)
    }
}

pub fn read_requests(source: impl Read) -> Result<Vec<Request>, SimError> {
    let mut rdr = csv::Reader::from_reader(source);
    let header = rdr.headers().map_err(out_err)?.clone();
    if header.iter().ne(REQUEST_HEADER) {
        return Err(SimError::Output(format!("unexpected requests header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(out_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i| field(&rec, i, line);
        let mut r = Request::new(
            RequestId(num(f(0)?, line, "request_id")?),
            NodeId(num(f(1)?, line, "origin_node")?),
            NodeId(num(f(2)?, line, "destination_node")?),
            num(f(3)?, line, "request_time_s")?,
        );
        r.direct_time = opt(f(4)?, line, "direct_time_s")?;
        r.direct_distance = opt(f(5)?, line, "direct_distance_m")?;
        r.expected_pickup = opt(f(6)?, line, "expected_pickup_s")?;
        r.expected_dropoff = opt(f(7)?, line, "expected_dropoff_s")?;
        r.actual_pickup = opt(f(8)?, line, "actual_pickup_s")?;
        r.actual_dropoff = opt(f(9)?, line, "actual_dropoff_s")?;
        r.status = parse_status(f(10)?).ok_or_else(|| SimError::Output(format!("line {line}: bad status")))?;
        let v = f(11)?;
        r.vehicle = if v.is_empty() { None } else { Some(VehicleId(num(v, line, "vehicle_id")?)) };
        r.reassignments = num(f(12)?, line, "reassignments")?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_vehicles(out: impl Write, vehicles: &[VehicleRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for v in vehicles {
        w.serialize(v)?;
    }
    if vehicles.is_empty() {
        w.write_record([
            "vehicle_id",
            "distance_m",
            "busy_s",
            "passenger_distance_m",
            "total_distance_m",
            "max_onboard",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vehicles(source: impl Read) -> Result<Vec<VehicleRecord>, SimError> {
    csv::Reader::from_reader(source)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(out_err)
}

pub fn write_tt_log(out: impl Write, rows: &[TtLogRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["interval_start_s", "edge_id", "estimate_s"])?;
    for r in rows {
        w.write_record([r.interval_start.to_string(), r.edge.to_string(), r.estimate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_run_stats(out: impl Write, stats: &RunStats) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(stats)?;
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, SimError> {
    File::create(dir.join(name))
        .map(BufWriter::new)
        .map_err(|e| SimError::Output(format!("{}: {e}", dir.join(name).display())))
}

/// Writes every per-scenario file into `dir` (created if missing).
pub fn write_outputs(dir: &Path, name: &str, out: &SimOutput) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::Output(format!("{}: {e}", dir.display())))?;
    write_requests(create(dir, "requests.csv")?, &out.requests).map_err(out_err)?;
    write_vehicles(create(dir, "vehicles.csv")?, &out.vehicles).map_err(out_err)?;
    write_tt_log(create(dir, "tt_log.csv")?, &out.tt_log).map_err(out_err)?;
    write_run_stats(create(dir, "run_stats.csv")?, &out.stats).map_err(out_err)?;
    write_kpi_csv(create(dir, "kpi.csv")?, &[(name.to_string(), out.kpis.clone())]).map_err(out_err)?;
    let dwt: Vec<f64> = out.requests.iter().filter_map(delta_wait).collect();
    let dtt: Vec<f64> = out.requests.iter().filter_map(delta_travel).collect();
    write_histogram(create(dir, "dwt_histogram.csv")?, &export_histogram(&dwt, HISTOGRAM_BIN_S)).map_err(out_err)?;
    write_histogram(create(dir, "dtt_histogram.csv")?, &export_histogram(&dtt, HISTOGRAM_BIN_S)).map_err(out_err)?;
    Ok(())
}
