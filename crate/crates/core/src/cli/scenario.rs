use std::fs::File;
use std::path::PathBuf;
use std::sync::Arc;

use crate::demand::{generate_requests, load_od_rates, load_requests, OdRates};
use crate::ids::{NodeId, VehicleId};
use crate::network::{load_network_files, NetworkGraph, Router, TravelTimeTable};
use crate::operator::OperatorConfig;
use crate::sim::{SimConfig, SimError, SimInput};
use crate::traffic::{load_profile, CouplingMode, SpeedProfile, TrafficModel};

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Files { nodes: PathBuf, edges: PathBuf },
    Grid { rows: u32, cols: u32, edge_length: f64, free_flow_time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandSource {
    /// Explicit request list.
    Requests(PathBuf),
    /// Poisson demand from an OD rate table.
    Od(PathBuf),
    /// Poisson demand spread evenly over all node pairs and the horizon.
    Uniform { rate_per_h: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    Flat,
    File(PathBuf),
    /// Equal steps over the horizon, linearly from `from` to `to`.
    Ramp { from: f64, to: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub coupled: bool,
    pub noise_sigma: f64,
    pub profile: ProfileSource,
    /// Estimates never drop below this fraction of free-flow time.
    pub floor_factor: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            coupled: false,
            noise_sigma: 0.0,
            profile: ProfileSource::Flat,
            floor_factor: 1.0,
        }
    }
}

/// A fully resolved scenario: every default materialized, paths absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkSource,
    pub demand: DemandSource,
    pub traffic: TrafficConfig,
    pub operator: OperatorConfig,
    pub fleet_size: usize,
    pub sim: SimConfig,
    /// Output root overriding the command line default.
    pub output: Option<PathBuf>,
}

fn open(path: &PathBuf) -> Result<File, SimError> {
    File::open(path).map_err(|e| SimError::InvalidConfig(format!("{}: {e}", path.display())))
}

impl Scenario {
    pub fn load_graph(&self) -> Result<NetworkGraph, SimError> {
        Ok(match &self.network {
            NetworkSource::Files { nodes, edges } => load_network_files(nodes, edges)?,
            NetworkSource::Grid { rows, cols, edge_length, free_flow_time } => {
                NetworkGraph::grid(*rows, *cols, *edge_length, *free_flow_time)?
            }
        })
    }

    pub fn traffic_model(&self) -> Result<TrafficModel, SimError> {
        let profile = match &self.traffic.profile {
            ProfileSource::Flat => SpeedProfile::flat(),
            ProfileSource::File(p) => load_profile(open(p)?)?,
            ProfileSource::Ramp { from, to, steps } => {
                SpeedProfile::ramp(self.sim.start, self.sim.end, *steps, *from, *to)?
            }
        };
        Ok(TrafficModel {
            profile,
            noise_sigma: self.traffic.noise_sigma,
            seed: self.sim.seed,
            mode: if self.traffic.coupled { CouplingMode::Coupled } else { CouplingMode::NotCoupled },
        })
    }

    /// Vehicles spread evenly over the node list in id order.
    pub fn fleet(&self, graph: &NetworkGraph) -> Vec<(VehicleId, NodeId)> {
        let nodes = graph.nodes();
        (0..self.fleet_size)
            .map(|i| (VehicleId(i as u32), nodes[i * nodes.len() / self.fleet_size.max(1)]))
            .collect()
    }

    /// Loads files and generates demand. Returns the input plus any demand
    /// warnings.
    pub fn build_input(&self) -> Result<(SimInput, Vec<String>), SimError> {
        let graph = Arc::new(self.load_graph()?);
        let mut warnings = Vec::new();
        let requests = match &self.demand {
            DemandSource::Requests(p) => {
                let table = TravelTimeTable::free_flow(&graph, self.traffic.floor_factor, self.sim.start);
                let router = Router::new(graph.clone(), Arc::new(table));
                let (reqs, w) = load_requests(open(p)?, &router)?;
                warnings = w;
                reqs
            }
            DemandSource::Od(p) => generate_requests(&load_od_rates(open(p)?)?, self.sim.seed),
            DemandSource::Uniform { rate_per_h } => {
                let rates = OdRates::uniform(&graph, *rate_per_h, self.sim.start, self.sim.end)?;
                generate_requests(&rates, self.sim.seed)
            }
        };
        let input = SimInput {
            fleet: self.fleet(&graph),
            graph,
            requests,
            traffic: self.traffic_model()?,
            operator: self.operator.clone(),
            sim: self.sim.clone(),
            floor_factor: self.traffic.floor_factor,
        };
        Ok((input, warnings))
    }
}
