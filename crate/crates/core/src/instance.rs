//! Problem instances: a directed multigraph with edge capacities and
//! costs, plus a list of commodities (source, target, demand value).
//!
//! Demands are measured in relative units: after [`normalize`] every
//! demand value lies in `(0, 1]` and capacities are expressed on the same
//! scale. The safety-margin formula in [`crate::margin`] assumes these
//! units.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current on-disk schema version for instance files.
pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// A directed edge with positive capacity and positive per-unit cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub cost: f64,
}

/// One commodity: demand `value` must travel from `source` to `target`
/// along a single directed path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: usize,
    pub source: usize,
    pub target: usize,
    pub value: f64,
}

/// A problem instance. Immutable after construction; cheap to share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub node_count: usize,
    pub edges: Vec<Edge>,
    pub demands: Vec<Demand>,
}

/// A single invariant violation found by [`Instance::validate`].
/// Violations are data, not errors: validation always succeeds and
/// reports everything it found.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoEdges,
    EdgeIdMismatch { edge: usize, found: usize },
    EdgeEndpointOutOfRange { edge: usize },
    SelfLoop { edge: usize },
    NonPositiveCapacity { edge: usize },
    NonFiniteCapacity { edge: usize },
    NonPositiveCost { edge: usize },
    NonFiniteCost { edge: usize },
    DemandIdMismatch { demand: usize, found: usize },
    DemandEndpointOutOfRange { demand: usize },
    DemandLoop { demand: usize },
    NonPositiveDemand { demand: usize },
    NonFiniteDemand { demand: usize },
    DemandExceedsOne { demand: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoEdges => write!(f, "instance has no edges"),
            Violation::EdgeIdMismatch { edge, found } => {
                write!(f, "edge {edge}: id field is {found}, must equal its position")
            }
            Violation::EdgeEndpointOutOfRange { edge } => {
                write!(f, "edge {edge}: endpoint out of node range")
            }
            Violation::SelfLoop { edge } => write!(f, "edge {edge}: self-loop"),
            Violation::NonPositiveCapacity { edge } => {
                write!(f, "edge {edge}: capacity must be > 0")
            }
            Violation::NonFiniteCapacity { edge } => {
                write!(f, "edge {edge}: capacity must be finite")
            }
            Violation::NonPositiveCost { edge } => write!(f, "edge {edge}: cost must be > 0"),
            Violation::NonFiniteCost { edge } => write!(f, "edge {edge}: cost must be finite"),
            Violation::DemandIdMismatch { demand, found } => {
                write!(f, "demand {demand}: id field is {found}, must equal its position")
            }
            Violation::DemandEndpointOutOfRange { demand } => {
                write!(f, "demand {demand}: terminal out of node range")
            }
            Violation::DemandLoop { demand } => {
                write!(f, "demand {demand}: source equals target")
            }
            Violation::NonPositiveDemand { demand } => {
                write!(f, "demand {demand}: value must be > 0")
            }
            Violation::NonFiniteDemand { demand } => {
                write!(f, "demand {demand}: value must be finite")
            }
            Violation::DemandExceedsOne { demand, value } => {
                write!(f, "demand {demand}: value {value} exceeds 1 (run normalize)")
            }
        }
    }
}

/// Outcome of [`Instance::validate`]: empty means the instance is sound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no connected terminal pair exists in the generated graph")]
    GenerationFailed,
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

impl Instance {
    pub fn new(node_count: usize, edges: Vec<Edge>, demands: Vec<Demand>) -> Self {
        Instance { node_count, edges, demands }
    }

    /// Build an instance from `(from, to, capacity, cost)` and
    /// `(source, target, value)` tuples; ids are assigned by position.
    pub fn from_tuples(
        node_count: usize,
        edges: &[(usize, usize, f64, f64)],
        demands: &[(usize, usize, f64)],
    ) -> Self {
        let edges = edges
            .iter()
            .enumerate()
            .map(|(id, &(from, to, capacity, cost))| Edge { id, from, to, capacity, cost })
            .collect();
        let demands = demands
            .iter()
            .enumerate()
            .map(|(id, &(source, target, value))| Demand { id, source, target, value })
            .collect();
        Instance { node_count, edges, demands }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn demand_count(&self) -> usize {
        self.demands.len()
    }

    /// Check every structural invariant and report all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.edges.is_empty() {
            violations.push(Violation::NoEdges);
        }
        for (pos, edge) in self.edges.iter().enumerate() {
            if edge.id != pos {
                violations.push(Violation::EdgeIdMismatch { edge: pos, found: edge.id });
            }
            if edge.from >= self.node_count || edge.to >= self.node_count {
                violations.push(Violation::EdgeEndpointOutOfRange { edge: pos });
            }
            if edge.from == edge.to {
                // A self-loop can never lie on a simple source->target path.
                violations.push(Violation::SelfLoop { edge: pos });
            }
            if !edge.capacity.is_finite() {
                violations.push(Violation::NonFiniteCapacity { edge: pos });
            } else if edge.capacity <= 0.0 {
                violations.push(Violation::NonPositiveCapacity { edge: pos });
            }
            if !edge.cost.is_finite() {
                violations.push(Violation::NonFiniteCost { edge: pos });
            } else if edge.cost <= 0.0 {
                // Strictly positive costs: cycle canceling relies on a
                // positive-flow cycle strictly lowering the cost.
                violations.push(Violation::NonPositiveCost { edge: pos });
            }
        }
        for (pos, demand) in self.demands.iter().enumerate() {
            if demand.id != pos {
                violations.push(Violation::DemandIdMismatch { demand: pos, found: demand.id });
            }
            if demand.source >= self.node_count || demand.target >= self.node_count {
                violations.push(Violation::DemandEndpointOutOfRange { demand: pos });
            }
            if demand.source == demand.target {
                violations.push(Violation::DemandLoop { demand: pos });
            }
            if !demand.value.is_finite() {
                violations.push(Violation::NonFiniteDemand { demand: pos });
            } else if demand.value <= 0.0 {
                violations.push(Violation::NonPositiveDemand { demand: pos });
            } else if demand.value > 1.0 {
                violations.push(Violation::DemandExceedsOne { demand: pos, value: demand.value });
            }
        }
        ValidationReport { violations }
    }

    /// Rescale so the largest demand value is at most 1.
    ///
    /// Returns the scaled instance and the scale factor. When the largest
    /// demand already fits in `(0, 1]` the instance is returned unchanged
    /// with scale 1; otherwise every demand value *and* every capacity is
    /// divided by the maximum demand. Feasibility of any path system is
    /// invariant under this joint scaling.
    pub fn normalize(&self) -> Result<(Instance, f64), InstanceError> {
        for edge in &self.edges {
            if !(edge.capacity > 0.0) {
                return Err(InstanceError::InvalidInstance(format!(
                    "edge {}: capacity must be > 0",
                    edge.id
                )));
            }
        }
        let mut max_value = 0.0f64;
        for demand in &self.demands {
            if !(demand.value > 0.0) {
                return Err(InstanceError::InvalidInstance(format!(
                    "demand {}: value must be > 0",
                    demand.id
                )));
            }
            max_value = max_value.max(demand.value);
        }
        if max_value <= 1.0 {
            return Ok((self.clone(), 1.0));
        }
        let scale = max_value;
        let mut scaled = self.clone();
        for edge in &mut scaled.edges {
            edge.capacity /= scale;
        }
        for demand in &mut scaled.demands {
            demand.value /= scale;
        }
        Ok((scaled, scale))
    }
}

/// Parameters for [`generate_random`]. Ranges are inclusive.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub nodes: usize,
    pub edge_prob: f64,
    pub capacity_range: (f64, f64),
    pub cost_range: (f64, f64),
    pub commodities: usize,
    pub demand_range: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            nodes: 8,
            edge_prob: 0.5,
            capacity_range: (10.0, 50.0),
            cost_range: (1.0, 10.0),
            commodities: 2,
            demand_range: (0.1, 1.0),
            seed: 0,
        }
    }
}

fn sample_range(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        range.0 + rng.gen::<f64>() * (range.1 - range.0)
    }
}

/// Generate a random directed instance: an Erdős–Rényi-style digraph with
/// uniform capacities, costs and demand values, terminal pairs drawn
/// uniformly among ordered pairs where the source can reach the target.
/// Deterministic for a fixed seed.
pub fn generate_random(config: &GeneratorConfig) -> Result<Instance, GenerationError> {
    if config.nodes < 2 {
        return Err(GenerationError::InvalidConfig("need at least 2 nodes".into()));
    }
    if !(config.edge_prob > 0.0 && config.edge_prob <= 1.0) {
        return Err(GenerationError::InvalidConfig("edge_prob must be in (0, 1]".into()));
    }
    if config.commodities < 1 {
        return Err(GenerationError::InvalidConfig("need at least 1 commodity".into()));
    }
    for (name, range) in [("capacity", config.capacity_range), ("cost", config.cost_range)] {
        if !(range.0 > 0.0 && range.1 >= range.0 && range.1.is_finite()) {
            return Err(GenerationError::InvalidConfig(format!(
                "{name} range must satisfy 0 < lo <= hi"
            )));
        }
    }
    let (dlo, dhi) = config.demand_range;
    if !(dlo > 0.0 && dhi >= dlo && dhi <= 1.0) {
        return Err(GenerationError::InvalidConfig(
            "demand range must be a sub-interval of (0, 1]".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nodes;
    let mut edges = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            if rng.gen::<f64>() < config.edge_prob {
                edges.push(Edge {
                    id: edges.len(),
                    from,
                    to,
                    capacity: sample_range(&mut rng, config.capacity_range),
                    cost: sample_range(&mut rng, config.cost_range),
                });
            }
        }
    }
    if edges.is_empty() {
        return Err(GenerationError::GenerationFailed);
    }

    // Reachability closure so terminal pairs are drawn uniformly among
    // connected ordered pairs.
    let mut adjacency = vec![Vec::new(); n];
    for edge in &edges {
        adjacency[edge.from].push(edge.to);
    }
    let mut connected_pairs = Vec::new();
    let mut seen = vec![false; n];
    for source in 0..n {
        seen.iter_mut().for_each(|s| *s = false);
        seen[source] = true;
        let mut stack = vec![source];
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        for (target, &reached) in seen.iter().enumerate() {
            if target != source && reached {
                connected_pairs.push((source, target));
            }
        }
    }
    if connected_pairs.is_empty() {
        return Err(GenerationError::GenerationFailed);
    }

    let mut demands = Vec::with_capacity(config.commodities);
    for id in 0..config.commodities {
        let (source, target) = connected_pairs[rng.gen_range(0..connected_pairs.len())];
        demands.push(Demand {
            id,
            source,
            target,
            value: sample_range(&mut rng, config.demand_range),
        });
    }
    Ok(Instance { node_count: n, edges, demands })
}

// On-disk schema: ids are implicit array positions, unknown fields are
// ignored on read.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    nodes: usize,
    edges: Vec<EdgeFile>,
    demands: Vec<DemandFile>,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    from: usize,
    to: usize,
    capacity: f64,
    cost: f64,
}

#[derive(Serialize, Deserialize)]
struct DemandFile {
    source: usize,
    target: usize,
    value: f64,
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, ReadError> {
    let text = fs::read_to_string(path)?;
    parse_instance(&text)
}

pub fn parse_instance(text: &str) -> Result<Instance, ReadError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.version != INSTANCE_SCHEMA_VERSION {
        return Err(ReadError::SchemaVersion {
            found: file.version,
            expected: INSTANCE_SCHEMA_VERSION,
        });
    }
    let edges = file
        .edges
        .into_iter()
        .enumerate()
        .map(|(id, e)| Edge { id, from: e.from, to: e.to, capacity: e.capacity, cost: e.cost })
        .collect();
    let demands = file
        .demands
        .into_iter()
        .enumerate()
        .map(|(id, d)| Demand { id, source: d.source, target: d.target, value: d.value })
        .collect();
    Ok(Instance { node_count: file.nodes, edges, demands })
}

pub fn instance_to_string(instance: &Instance) -> String {
    let file = InstanceFile {
        version: INSTANCE_SCHEMA_VERSION,
        nodes: instance.node_count,
        edges: instance
            .edges
            .iter()
            .map(|e| EdgeFile { from: e.from, to: e.to, capacity: e.capacity, cost: e.cost })
            .collect(),
        demands: instance
            .demands
            .iter()
            .map(|d| DemandFile { source: d.source, target: d.target, value: d.value })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), ReadError> {
    let mut file = fs::File::create(path)?;
    file.write_all(instance_to_string(instance).as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}
