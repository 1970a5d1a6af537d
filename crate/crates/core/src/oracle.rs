//! Brute-force ground truth for small instances: exhaustive one-path-per-
//! commodity feasibility, safe-solution existence, and the exact edge-use
//! distribution of the rounding walk. Test support only — the solver
//! pipeline never calls into this module.

use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::margin::SafetyParams;
use crate::mcmf::FlowSolution;
use crate::rounding::{check_feasible, PathSystem};

/// Guard thresholds for the exhaustive search, sized for CI runtime.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub max_nodes: usize,
    pub max_commodities: usize,
    /// Cap on the product of per-commodity path counts.
    pub max_path_product: f64,
    /// Cap on the number of simple paths enumerated per commodity.
    pub path_limit: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_nodes: 10,
            max_commodities: 4,
            max_path_product: 1e7,
            path_limit: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("commodity support contains a directed cycle")]
    CyclicSupport,
}

/// All simple directed source-to-target paths, as edge-id sequences in
/// DFS order (outgoing edges tried in ascending edge-id order).
#[derive(Debug, Clone, PartialEq)]
pub struct SimplePaths {
    pub paths: Vec<Vec<usize>>,
    pub truncated: bool,
}

/// Exhaustive verdict for one instance: whether any path system fits the
/// original capacities and whether one fits the shrunk ones.
#[derive(Debug, Clone, Serialize)]
pub struct OracleVerdict {
    pub feasible_exists: bool,
    pub safe_exists: bool,
    /// A safe witness when one exists, otherwise a feasible one.
    pub witness: Option<PathSystem>,
    /// Simple paths enumerated while searching.
    pub paths_enumerated: usize,
}

pub fn enumerate_simple_paths(
    instance: &Instance,
    source: usize,
    target: usize,
    limit: usize,
) -> SimplePaths {
    assert_ne!(source, target, "terminals must differ");
    let n = instance.node_count;
    let mut out = vec![Vec::new(); n];
    for edge in &instance.edges {
        out[edge.from].push((edge.id, edge.to));
    }

    let mut paths = Vec::new();
    let mut truncated = false;
    let mut visited = vec![false; n];
    let mut edge_stack: Vec<usize> = Vec::new();
    // Explicit DFS stack of (node, next out-edge index) frames.
    let mut stack: Vec<(usize, usize)> = vec![(source, 0)];
    visited[source] = true;
    while let Some(&(node, cursor)) = stack.last() {
        if paths.len() >= limit {
            truncated = true;
            break;
        }
        if cursor < out[node].len() {
            stack.last_mut().unwrap().1 += 1;
            let (edge, head) = out[node][cursor];
            if head == target {
                let mut path = edge_stack.clone();
                path.push(edge);
                paths.push(path);
            } else if !visited[head] {
                visited[head] = true;
                edge_stack.push(edge);
                stack.push((head, 0));
            }
        } else {
            visited[node] = false;
            stack.pop();
            edge_stack.pop();
        }
    }
    SimplePaths { paths, truncated }
}

/// Backtracking search for a one-path-per-commodity assignment within the
/// given residual capacities. `assignment[i]` indexes into `paths[i]`.
fn assign(
    paths: &[Vec<Vec<usize>>],
    values: &[f64],
    residual: &mut [f64],
    assignment: &mut Vec<usize>,
) -> bool {
    let commodity = assignment.len();
    if commodity == paths.len() {
        return true;
    }
    let value = values[commodity];
    'candidates: for (index, path) in paths[commodity].iter().enumerate() {
        for &e in path {
            if residual[e] < value - crate::rounding::TOL_CHECK {
                continue 'candidates;
            }
        }
        for &e in path {
            residual[e] -= value;
        }
        assignment.push(index);
        if assign(paths, values, residual, assignment) {
            return true;
        }
        assignment.pop();
        for &e in path {
            residual[e] += value;
        }
    }
    false
}

fn paths_to_system(
    instance: &Instance,
    per_commodity: &[Vec<Vec<usize>>],
    assignment: &[usize],
) -> PathSystem {
    let path_edges: Vec<Vec<usize>> = assignment
        .iter()
        .enumerate()
        .map(|(i, &index)| per_commodity[i][index].clone())
        .collect();
    let paths = path_edges
        .iter()
        .enumerate()
        .map(|(i, edges)| {
            let mut nodes = vec![instance.demands[i].source];
            for &e in edges {
                nodes.push(instance.edges[e].to);
            }
            nodes
        })
        .collect();
    let mut edge_load = vec![0.0; instance.edge_count()];
    for (i, edges) in path_edges.iter().enumerate() {
        for &e in edges {
            edge_load[e] += instance.demands[i].value;
        }
    }
    let mut system = PathSystem { paths, path_edges, edge_load, feasible: false };
    system.feasible = check_feasible(&system, instance);
    system
}

/// Exhaustively decide feasibility against the original capacities and
/// against the provided shrunk capacities.
pub fn exact_feasibility(
    instance: &Instance,
    shrunk_capacities: &[f64],
    config: &OracleConfig,
) -> Result<OracleVerdict, OracleError> {
    assert_eq!(shrunk_capacities.len(), instance.edge_count());
    if instance.node_count > config.max_nodes {
        return Err(OracleError::TooLarge(format!(
            "{} nodes exceeds the limit of {}",
            instance.node_count, config.max_nodes
        )));
    }
    if instance.demand_count() > config.max_commodities {
        return Err(OracleError::TooLarge(format!(
            "{} commodities exceeds the limit of {}",
            instance.demand_count(),
            config.max_commodities
        )));
    }

    let mut per_commodity = Vec::with_capacity(instance.demand_count());
    let mut paths_enumerated = 0usize;
    let mut product = 1.0f64;
    for demand in &instance.demands {
        let enumerated =
            enumerate_simple_paths(instance, demand.source, demand.target, config.path_limit);
        if enumerated.truncated {
            return Err(OracleError::TooLarge(format!(
                "more than {} simple paths for commodity {}",
                config.path_limit, demand.id
            )));
        }
        paths_enumerated += enumerated.paths.len();
        product *= enumerated.paths.len() as f64;
        per_commodity.push(enumerated.paths);
    }
    if product > config.max_path_product {
        return Err(OracleError::TooLarge(format!(
            "path-count product {product:e} exceeds {:e}",
            config.max_path_product
        )));
    }

    let values: Vec<f64> = instance.demands.iter().map(|d| d.value).collect();
    let original: Vec<f64> = instance.edges.iter().map(|e| e.capacity).collect();

    let mut assignment = Vec::new();
    let safe_witness = {
        let mut residual = shrunk_capacities.to_vec();
        assign(&per_commodity, &values, &mut residual, &mut assignment)
            .then(|| paths_to_system(instance, &per_commodity, &assignment))
    };
    assignment.clear();
    let feasible_witness = if safe_witness.is_some() {
        // A safe witness also fits the original capacities.
        None
    } else {
        let mut residual = original.clone();
        assign(&per_commodity, &values, &mut residual, &mut assignment)
            .then(|| paths_to_system(instance, &per_commodity, &assignment))
    };

    let safe_exists = safe_witness.is_some();
    let feasible_exists = safe_exists || feasible_witness.is_some();
    Ok(OracleVerdict {
        feasible_exists,
        safe_exists,
        witness: safe_witness.or(feasible_witness),
        paths_enumerated,
    })
}

/// Convenience wrapper feeding the shrunk capacities from safety params.
pub fn verdict(
    instance: &Instance,
    safety: &SafetyParams,
    config: &OracleConfig,
) -> Result<OracleVerdict, OracleError> {
    exact_feasibility(instance, &safety.shrunk_capacity, config)
}

/// Exact probability that the rounding walk of `commodity` uses each
/// edge, by dynamic programming over the topological order of the
/// support DAG. Matches the walk's branching exactly, including the
/// absorbing target.
pub fn exact_walk_distribution(
    flow: &FlowSolution,
    instance: &Instance,
    commodity: usize,
) -> Result<Vec<f64>, OracleError> {
    let demand = &instance.demands[commodity];
    let out = flow.support_out_edges(instance, commodity);
    let n = instance.node_count;

    // Kahn's algorithm over the full support; a leftover node means a cycle.
    let mut indegree = vec![0usize; n];
    let mut active = vec![false; n];
    for (node, edges) in out.iter().enumerate() {
        for &(_, head) in edges {
            indegree[head] += 1;
            active[node] = true;
            active[head] = true;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| active[v] && indegree[v] == 0).collect();
    let mut order = Vec::new();
    while let Some(node) = queue.pop() {
        order.push(node);
        for &(_, head) in &out[node] {
            indegree[head] -= 1;
            if indegree[head] == 0 {
                queue.push(head);
            }
        }
    }
    if order.len() != active.iter().filter(|&&a| a).count() {
        return Err(OracleError::CyclicSupport);
    }

    let mut visit = vec![0.0f64; n];
    visit[demand.source] = 1.0;
    let mut edge_prob = vec![0.0f64; instance.edge_count()];
    for &node in &order {
        if node == demand.target || visit[node] == 0.0 {
            continue;
        }
        let total: f64 = out[node].iter().map(|&(e, _)| flow.flow[commodity][e]).sum();
        if total <= 0.0 {
            continue;
        }
        for &(edge, head) in &out[node] {
            let p = visit[node] * flow.flow[commodity][edge] / total;
            edge_prob[edge] += p;
            visit[head] += p;
        }
    }
    Ok(edge_prob)
}
