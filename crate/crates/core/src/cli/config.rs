//! Line-oriented `key = value` scenario files with `[section]` headers.
//!
//! A `[matrix]` section expands the base scenario over service, re-assignment
//! and coupling variants. [`Scenario::to_config`] writes a resolved scenario
//! back in the same format; parsing that text yields an equal scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::operator::OperatorConfig;
use crate::sim::SimConfig;

use super::scenario::{DemandSource, NetworkSource, ProfileSource, Scenario, TrafficConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}:{line}: {message}")]
    Syntax { file: String, line: usize, message: String },
    #[error("{file}:{line}: unknown key `{key}`")]
    UnknownKey { file: String, line: usize, key: String },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("`{key}`: required key is missing")]
    Missing { key: String },
    #[error("`{key}`: file {path} does not exist")]
    MissingFile { key: String, path: PathBuf },
    #[error("duplicate scenario name `{0}`")]
    DuplicateName(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

const KNOWN: &[(&str, &[&str])] = &[
    ("scenario", &["name", "output"]),
    ("network", &["nodes", "edges", "grid", "edge_length_m", "free_flow_s"]),
    ("demand", &["requests", "od", "uniform_rate_per_h"]),
    (
        "traffic",
        &["coupled", "noise_sigma", "profile", "profile_file", "ramp_from", "ramp_to", "ramp_steps", "floor_factor"],
    ),
    (
        "operator",
        &[
            "service",
            "capacity",
            "w_max",
            "delta_max",
            "boarding_time",
            "reassignment",
            "p_r",
            "p_delay",
            "max_schedule_requests",
        ],
    ),
    ("fleet", &["size"]),
    (
        "sim",
        &["start", "end", "control_interval", "statistics_interval", "warmup", "cooldown", "seed"],
    ),
    ("matrix", &["coupled", "service", "reassign", "exclude"]),
];

const POOLING_CAPACITY: u32 = 4;
const DEFAULT_FLEET: usize = 20;

struct Raw {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl Raw {
    fn parse(text: &str, file: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax {
                file: file.to_string(),
                line,
                message,
            };
            if let Some(name) = l.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(format!("unterminated section header {l:?}")))?
                    .trim();
                if !KNOWN.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::UnknownKey {
                        file: file.to_string(),
                        line,
                        key: format!("[{name}]"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, got {l:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| syntax(format!("key `{key}` outside of any section")))?;
            let path = format!("{sec}.{key}");
            let known = KNOWN.iter().any(|(s, keys)| *s == sec && keys.contains(&key));
            if !known {
                return Err(ConfigError::UnknownKey {
                    file: file.to_string(),
                    line,
                    key: path,
                });
            }
            if values.insert(path.clone(), value.to_string()).is_some() {
                return Err(syntax(format!("key `{path}` given twice")));
            }
        }
        Ok(Self {
            values,
            base_dir: base_dir.to_path_buf(),
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing { key: key.into() })
    }

    fn num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                key: key.into(),
                message: format!("cannot parse {v:?} as a number"),
            }),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_bool(v).ok_or_else(|| ConfigError::Invalid {
                key: key.into(),
                message: format!("expected true or false, got {v:?}"),
            }),
        }
    }

    /// Absolute path of an existing file, resolved against the config's directory.
    fn file(&self, key: &str) -> Result<Option<PathBuf>, ConfigError> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let joined = self.base_dir.join(v);
        let path = std::path::absolute(&joined).unwrap_or(joined);
        if !path.is_file() {
            return Err(ConfigError::MissingFile { key: key.into(), path });
        }
        Ok(Some(path))
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

fn base_scenario(raw: &Raw) -> Result<Scenario, ConfigError> {
    let name = raw.require("scenario.name")?.to_string();
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(invalid("scenario.name", "must be a non-empty name without path separators"));
    }
    let output = raw.get("scenario.output").map(|v| {
        let p = raw.base_dir.join(v);
        std::path::absolute(&p).unwrap_or(p)
    });

    let network = match (raw.get("network.grid"), raw.file("network.nodes")?, raw.file("network.edges")?) {
        (Some(g), None, None) => {
            let (r, c) = g
                .split_once(['x', 'X'])
                .ok_or_else(|| invalid("network.grid", format!("expected ROWSxCOLS, got {g:?}")))?;
            let dims = (r.trim().parse::<u32>(), c.trim().parse::<u32>());
            let (Ok(rows), Ok(cols)) = dims else {
                return Err(invalid("network.grid", format!("expected ROWSxCOLS, got {g:?}")));
            };
            if rows == 0 || cols == 0 {
                return Err(invalid("network.grid", "dimensions must be positive"));
            }
            let edge_length = raw.num("network.edge_length_m", 100.0)?;
            let free_flow_time = raw.num("network.free_flow_s", 10.0)?;
            if !(edge_length > 0.0 && free_flow_time > 0.0) {
                return Err(invalid("network.grid", "edge length and free-flow time must be positive"));
            }
            NetworkSource::Grid { rows, cols, edge_length, free_flow_time }
        }
        (None, Some(nodes), Some(edges)) => NetworkSource::Files { nodes, edges },
        (None, None, None) => return Err(ConfigError::Missing { key: "network.grid".into() }),
        _ => return Err(invalid("network", "give either `grid` or both `nodes` and `edges`")),
    };

    let demand = match (
        raw.file("demand.requests")?,
        raw.file("demand.od")?,
        raw.get("demand.uniform_rate_per_h"),
    ) {
        (Some(p), None, None) => DemandSource::Requests(p),
        (None, Some(p), None) => DemandSource::Od(p),
        (None, None, Some(_)) => {
            let rate_per_h: f64 = raw.num("demand.uniform_rate_per_h", 0.0)?;
            if !(rate_per_h >= 0.0 && rate_per_h.is_finite()) {
                return Err(invalid("demand.uniform_rate_per_h", "must be non-negative"));
            }
            DemandSource::Uniform { rate_per_h }
        }
        (None, None, None) => return Err(ConfigError::Missing { key: "demand.requests".into() }),
        _ => return Err(invalid("demand", "give exactly one of `requests`, `od`, `uniform_rate_per_h`")),
    };

    let profile = match raw.get("traffic.profile").unwrap_or("flat") {
        "flat" => ProfileSource::Flat,
        "file" => ProfileSource::File(
            raw.file("traffic.profile_file")?
                .ok_or_else(|| ConfigError::Missing { key: "traffic.profile_file".into() })?,
        ),
        "ramp" => {
            let steps: usize = raw.num("traffic.ramp_steps", 1)?;
            if steps == 0 {
                return Err(invalid("traffic.ramp_steps", "must be at least 1"));
            }
            ProfileSource::Ramp {
                from: raw.num("traffic.ramp_from", 1.0)?,
                to: raw.num("traffic.ramp_to", 1.0)?,
                steps,
            }
        }
        other => return Err(invalid("traffic.profile", format!("expected flat, ramp or file, got {other:?}"))),
    };
    let defaults = TrafficConfig::default();
    let traffic = TrafficConfig {
        coupled: raw.flag("traffic.coupled", defaults.coupled)?,
        noise_sigma: raw.num("traffic.noise_sigma", defaults.noise_sigma)?,
        profile,
        floor_factor: raw.num("traffic.floor_factor", defaults.floor_factor)?,
    };
    if !(traffic.noise_sigma >= 0.0 && traffic.noise_sigma.is_finite()) {
        return Err(invalid("traffic.noise_sigma", "must be non-negative"));
    }
    if !(traffic.floor_factor > 0.0 && traffic.floor_factor <= 1.0) {
        return Err(invalid("traffic.floor_factor", "must lie in (0, 1]"));
    }

    let d = OperatorConfig::default();
    let service_capacity = match raw.get("operator.service") {
        None | Some("pooling") => POOLING_CAPACITY,
        Some("hailing") => 1,
        Some(other) => {
            return Err(invalid("operator.service", format!("expected hailing or pooling, got {other:?}")))
        }
    };
    let operator = OperatorConfig {
        max_wait: raw.num("operator.w_max", d.max_wait)?,
        max_detour: raw.num("operator.delta_max", d.max_detour)?,
        boarding_time: raw.num("operator.boarding_time", d.boarding_time)?,
        capacity: raw.num("operator.capacity", service_capacity)?,
        reassignment: raw.flag("operator.reassignment", d.reassignment)?,
        assignment_reward: raw.num("operator.p_r", d.assignment_reward)?,
        delay_penalty: raw.num("operator.p_delay", d.delay_penalty)?,
        max_schedule_requests: raw.num("operator.max_schedule_requests", d.max_schedule_requests)?,
    };
    operator.validate().map_err(|e| invalid("operator", e.to_string()))?;

    let fleet_size = raw.num("fleet.size", DEFAULT_FLEET)?;
    if fleet_size == 0 {
        return Err(invalid("fleet.size", "must be at least 1"));
    }

    let s = SimConfig::default();
    let sim = SimConfig {
        start: raw.num("sim.start", s.start)?,
        end: raw.num("sim.end", s.end)?,
        control_interval: raw.num("sim.control_interval", s.control_interval)?,
        statistics_interval: raw.num("sim.statistics_interval", s.statistics_interval)?,
        warmup: raw.num("sim.warmup", s.warmup)?,
        cooldown: raw.num("sim.cooldown", s.cooldown)?,
        seed: raw.num("sim.seed", s.seed)?,
    };
    sim.validate().map_err(|e| invalid("sim", e.to_string()))?;

    Ok(Scenario {
        name,
        network,
        demand,
        traffic,
        operator,
        fleet_size,
        sim,
        output,
    })
}

fn matrix_axis(raw: &Raw, key: &str, allowed: &[&str]) -> Result<Option<Vec<String>>, ConfigError> {
    let Some(v) = raw.get(key) else {
        return Ok(None);
    };
    let items = list(v);
    if items.is_empty() {
        return Err(invalid(key, "empty list"));
    }
    for it in &items {
        if !allowed.contains(&it.as_str()) {
            return Err(invalid(key, format!("unknown value {it:?}, expected one of {allowed:?}")));
        }
    }
    Ok(Some(items))
}

fn expand(raw: &Raw, base: Scenario) -> Result<Vec<Scenario>, ConfigError> {
    let service = matrix_axis(raw, "matrix.service", &["H", "P"])?;
    let reassign = matrix_axis(raw, "matrix.reassign", &["nR", "wR"])?;
    let coupled = matrix_axis(raw, "matrix.coupled", &["C", "nC"])?;
    let mut excluded: Vec<BTreeSet<String>> = Vec::new();
    for pat in list(raw.get("matrix.exclude").unwrap_or("")) {
        let tokens: BTreeSet<String> = pat.split(':').map(|t| t.trim().to_string()).collect();
        for t in &tokens {
            if !["H", "P", "nR", "wR", "C", "nC"].contains(&t.as_str()) {
                return Err(invalid("matrix.exclude", format!("unknown value {t:?} in {pat:?}")));
            }
        }
        excluded.push(tokens);
    }
    if service.is_none() && reassign.is_none() && coupled.is_none() {
        if !excluded.is_empty() {
            return Err(invalid("matrix.exclude", "nothing to exclude without a matrix axis"));
        }
        return Ok(vec![base]);
    }
    let pooled_capacity = if base.operator.capacity > 1 { base.operator.capacity } else { POOLING_CAPACITY };
    let axis = |a: Option<Vec<String>>| a.map_or_else(|| vec![None], |v| v.into_iter().map(Some).collect());
    let mut out = Vec::new();
    for s in axis(service) {
        for r in axis(reassign.clone()) {
            for c in axis(coupled.clone()) {
                let tags: Vec<String> = [&s, &r, &c].into_iter().flatten().cloned().collect();
                let tagset: BTreeSet<String> = tags.iter().cloned().collect();
                if excluded.iter().any(|ex| ex.is_subset(&tagset)) {
                    continue;
                }
                let mut sc = base.clone();
                sc.name = std::iter::once(base.name.clone()).chain(tags).collect::<Vec<_>>().join("_");
                match s.as_deref() {
                    Some("H") => sc.operator.capacity = 1,
                    Some(_) => sc.operator.capacity = pooled_capacity,
                    None => {}
                }
                if let Some(r) = &r {
                    sc.operator.reassignment = r == "wR";
                }
                if let Some(c) = &c {
                    sc.traffic.coupled = c == "C";
                }
                out.push(sc);
            }
        }
    }
    Ok(out)
}

/// Parses config text; relative paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, file: &str, base_dir: &Path) -> Result<Vec<Scenario>, ConfigError> {
    let raw = Raw::parse(text, file, base_dir)?;
    let scenarios = expand(&raw, base_scenario(&raw)?)?;
    let mut seen = BTreeSet::new();
    for s in &scenarios {
        if !seen.insert(s.name.clone()) {
            return Err(ConfigError::DuplicateName(s.name.clone()));
        }
    }
    Ok(scenarios)
}

pub fn parse_config(path: &Path) -> Result<Vec<Scenario>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, &path.display().to_string(), dir)
}

impl Scenario {
    /// The resolved scenario as config text, every default written out.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, rows: Vec<(&str, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in rows {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        let mut sc = vec![("name", self.name.clone())];
        if let Some(o) = &self.output {
            sc.push(("output", o.display().to_string()));
        }
        section("scenario", sc);
        section(
            "network",
            match &self.network {
                NetworkSource::Files { nodes, edges } => vec![
                    ("nodes", nodes.display().to_string()),
                    ("edges", edges.display().to_string()),
                ],
                NetworkSource::Grid { rows, cols, edge_length, free_flow_time } => vec![
                    ("grid", format!("{rows}x{cols}")),
                    ("edge_length_m", edge_length.to_string()),
                    ("free_flow_s", free_flow_time.to_string()),
                ],
            },
        );
        section(
            "demand",
            vec![match &self.demand {
                DemandSource::Requests(p) => ("requests", p.display().to_string()),
                DemandSource::Od(p) => ("od", p.display().to_string()),
                DemandSource::Uniform { rate_per_h } => ("uniform_rate_per_h", rate_per_h.to_string()),
            }],
        );
        let t = &self.traffic;
        let mut tr = vec![
            ("coupled", t.coupled.to_string()),
            ("noise_sigma", t.noise_sigma.to_string()),
            ("floor_factor", t.floor_factor.to_string()),
        ];
        match &t.profile {
            ProfileSource::Flat => tr.push(("profile", "flat".into())),
            ProfileSource::File(p) => {
                tr.push(("profile", "file".into()));
                tr.push(("profile_file", p.display().to_string()));
            }
            ProfileSource::Ramp { from, to, steps } => {
                tr.push(("profile", "ramp".into()));
                tr.push(("ramp_from", from.to_string()));
                tr.push(("ramp_to", to.to_string()));
                tr.push(("ramp_steps", steps.to_string()));
            }
        }
        section("traffic", tr);
        let o = &self.operator;
        section(
            "operator",
            vec![
                ("capacity", o.capacity.to_string()),
                ("w_max", o.max_wait.to_string()),
                ("delta_max", o.max_detour.to_string()),
                ("boarding_time", o.boarding_time.to_string()),
                ("reassignment", o.reassignment.to_string()),
                ("p_r", o.assignment_reward.to_string()),
                ("p_delay", o.delay_penalty.to_string()),
                ("max_schedule_requests", o.max_schedule_requests.to_string()),
            ],
        );
        section("fleet", vec![("size", self.fleet_size.to_string())]);
        let m = &self.sim;
        section(
            "sim",
            vec![
                ("start", m.start.to_string()),
                ("end", m.end.to_string()),
                ("control_interval", m.control_interval.to_string()),
                ("statistics_interval", m.statistics_interval.to_string()),
                ("warmup", m.warmup.to_string()),
                ("cooldown", m.cooldown.to_string()),
                ("seed", m.seed.to_string()),
            ],
        );
        out
    }
}
