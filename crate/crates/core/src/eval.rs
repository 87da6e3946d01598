//! Operator KPIs and customer reliability statistics over an evaluation window.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::demand::{Request, RequestStatus};
use crate::sim::VehicleRecord;

/// Requests count by request time, vehicle activity by completion time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalWindow {
    pub start: f64,
    pub end: f64,
    pub fleet_size: usize,
}

impl EvalWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// One KPI row. Ratios over an empty base are absent rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub requests: u64,
    pub served: u64,
    pub rejected: u64,
    pub served_pct: Option<f64>,
    pub fleet_km: f64,
    /// Passenger-km per vehicle-km.
    pub avg_occupancy: Option<f64>,
    /// Negative when the fleet drives more than the direct trips would.
    pub saved_distance_pct: Option<f64>,
    pub fleet_utilization_pct: Option<f64>,
    pub avg_waiting_s: Option<f64>,
    pub avg_travel_s: Option<f64>,
    pub dwt_mean_s: Option<f64>,
    pub dwt_std_s: Option<f64>,
    pub dtt_mean_s: Option<f64>,
    pub dtt_std_s: Option<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn mean(values: &[f64]) -> Option<f64> {
    mean_std(values).map(|(m, _)| m)
}

/// Served requests with both timestamps present.
fn served(r: &Request) -> Option<(f64, f64)> {
    match (r.status, r.actual_pickup, r.actual_dropoff) {
        (RequestStatus::Served, Some(pu), Some(d)) => Some((pu, d)),
        _ => None,
    }
}

/// Pickup delay against the first communicated time, for served requests.
pub fn delta_wait(r: &Request) -> Option<f64> {
    served(r).and(r.expected_pickup).map(|exp| r.actual_pickup.unwrap_or(exp) - exp)
}

/// Dropoff delay against the first communicated time, for served requests.
pub fn delta_travel(r: &Request) -> Option<f64> {
    served(r).and(r.expected_dropoff).map(|exp| r.actual_dropoff.unwrap_or(exp) - exp)
}

pub fn compute_kpis(requests: &[Request], vehicles: &[VehicleRecord], window: &EvalWindow) -> KpiReport {
    let in_window: Vec<&Request> = requests.iter().filter(|r| window.contains(r.request_time)).collect();
    let total = in_window.len() as u64;
    let done: Vec<&Request> = in_window.iter().copied().filter(|r| served(r).is_some()).collect();
    let rejected = in_window.iter().filter(|r| r.status == RequestStatus::Rejected).count() as u64;

    // folds from +0.0: an empty f64 sum is -0.0
    let fleet_m: f64 = vehicles.iter().fold(0.0, |a, v| a + v.distance_m);
    let pax_m: f64 = vehicles.iter().fold(0.0, |a, v| a + v.passenger_distance_m);
    let busy: f64 = vehicles.iter().fold(0.0, |a, v| a + v.busy_s);
    let direct_m: f64 = done.iter().fold(0.0, |a, r| a + r.direct_distance.unwrap_or(0.0));

    let waits: Vec<f64> = done.iter().map(|r| r.actual_pickup.unwrap_or(0.0) - r.request_time).collect();
    let rides: Vec<f64> = done
        .iter()
        .map(|r| r.actual_dropoff.unwrap_or(0.0) - r.actual_pickup.unwrap_or(0.0))
        .collect();
    let dwt: Vec<f64> = done.iter().filter_map(|r| delta_wait(r)).collect();
    let dtt: Vec<f64> = done.iter().filter_map(|r| delta_travel(r)).collect();
    let capacity_s = window.fleet_size as f64 * (window.end - window.start);

    KpiReport {
        requests: total,
        served: done.len() as u64,
        rejected,
        served_pct: (total > 0).then(|| done.len() as f64 / total as f64 * 100.0),
        fleet_km: fleet_m / 1000.0,
        avg_occupancy: (fleet_m > 0.0).then(|| pax_m / fleet_m),
        saved_distance_pct: (direct_m > 0.0).then(|| (1.0 - fleet_m / direct_m) * 100.0),
        fleet_utilization_pct: (capacity_s > 0.0).then(|| busy / capacity_s * 100.0),
        avg_waiting_s: mean(&waits),
        avg_travel_s: mean(&rides),
        dwt_mean_s: mean_std(&dwt).map(|s| s.0),
        dwt_std_s: mean_std(&dwt).map(|s| s.1),
        dtt_mean_s: mean_std(&dtt).map(|s| s.0),
        dtt_std_s: mean_std(&dtt).map(|s| s.1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_start_s: f64,
    pub bin_end_s: f64,
    pub count: u64,
}

/// Half-open bins `[k*w, (k+1)*w)` aligned at zero, from the lowest to the
/// highest occupied bin. Non-finite values are skipped.
pub fn export_histogram(values: &[f64], bin_width: f64) -> Vec<HistogramBin> {
    assert!(bin_width > 0.0, "bin width must be positive");
    let keys: Vec<i64> = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| (v / bin_width).floor() as i64)
        .collect();
    let (Some(&lo), Some(&hi)) = (keys.iter().min(), keys.iter().max()) else {
        return Vec::new();
    };
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for k in keys {
        counts[(k - lo) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let k = lo + i as i64;
            HistogramBin {
                bin_start_s: k as f64 * bin_width,
                bin_end_s: (k + 1) as f64 * bin_width,
                count,
            }
        })
        .collect()
}

pub fn write_histogram(out: impl Write, bins: &[HistogramBin]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if bins.is_empty() {
        w.write_record(["bin_start_s", "bin_end_s", "count"])?;
    }
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per scenario; absent values become empty fields.
pub fn write_kpi_csv(out: impl Write, rows: &[(String, KpiReport)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KPI_HEADER)?;
    for (name, k) in rows {
        let mut rec = vec![name.clone(), k.requests.to_string(), k.served.to_string(), k.rejected.to_string()];
        rec.push(fmt_opt(k.served_pct));
        rec.push(k.fleet_km.to_string());
        for v in [
            k.avg_occupancy,
            k.saved_distance_pct,
            k.fleet_utilization_pct,
            k.avg_waiting_s,
            k.avg_travel_s,
            k.dwt_mean_s,
            k.dwt_std_s,
            k.dtt_mean_s,
            k.dtt_std_s,
        ] {
            rec.push(fmt_opt(v));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const KPI_HEADER: [&str; 15] = [
    "scenario",
    "requests",
    "served",
    "rejected",
    "served_pct",
    "fleet_km",
    "avg_occupancy",
    "saved_distance_pct",
    "fleet_utilization_pct",
    "avg_waiting_s",
    "avg_travel_s",
    "dwt_mean_s",
    "dwt_std_s",
    "dtt_mean_s",
    "dtt_std_s",
];

/// Shortest round-trip representation; absent is empty.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
