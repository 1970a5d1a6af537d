//! Continuous minimum-cost multicommodity flow relaxation under the
//! shrunk capacities.
//!
//! The relaxation is an edge-based LP with one nonnegative variable per
//! (commodity, edge) pair: flow conservation holds at every node except a
//! commodity's own terminals, the source emits the demand value, and the
//! aggregate flow on each edge stays within its shrunk capacity. The
//! objective charges each edge's cost per unit of flow. After solving,
//! every commodity's flow is made acyclic by cycle canceling and then
//! rewritten as an exact sum of path flows, so downstream consumers see a
//! clean support graph and demands that are met exactly.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::margin::SafetyParams;
use crate::simplex::{self, Constraint, LinearProgram, Relation, SimplexOptions};

/// Optimality / pivot tolerance for the LP.
pub const TOL_LP: f64 = 1e-7;
/// Constraint residual tolerance for flow solutions.
pub const TOL_FEAS: f64 = 1e-7;
/// Relative flow-support threshold: commodity flow at or below
/// `TOL_ZERO * demand` counts as zero for cycle detection and for the
/// rounding walk.
pub const TOL_ZERO: f64 = 1e-9;

/// A fractional multicommodity flow.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSolution {
    /// `flow[i][j]`: commodity `i` flow on edge `j`.
    pub flow: Vec<Vec<f64>>,
    /// Aggregate flow per edge, `sum_i flow[i][j]`.
    pub aggregate: Vec<f64>,
    pub total_cost: f64,
}

impl FlowSolution {
    /// Wrap per-commodity edge flows, computing aggregates and cost.
    pub fn from_flows(flow: Vec<Vec<f64>>, instance: &Instance) -> Self {
        let mut solution = FlowSolution { flow, aggregate: Vec::new(), total_cost: 0.0 };
        solution.recompute(instance);
        solution
    }

    fn recompute(&mut self, instance: &Instance) {
        let m = instance.edge_count();
        let mut aggregate = vec![0.0; m];
        for row in &self.flow {
            for (j, x) in row.iter().enumerate() {
                aggregate[j] += x;
            }
        }
        self.total_cost = aggregate
            .iter()
            .zip(&instance.edges)
            .map(|(f, e)| f * e.cost)
            .sum();
        self.aggregate = aggregate;
    }

    /// Support threshold for commodity `i`: flows at or below it are
    /// treated as zero.
    pub fn support_threshold(&self, instance: &Instance, commodity: usize) -> f64 {
        TOL_ZERO * instance.demands[commodity].value
    }

    /// Outgoing support edges per node for one commodity, edge ids
    /// ascending.
    pub fn support_out_edges(
        &self,
        instance: &Instance,
        commodity: usize,
    ) -> Vec<Vec<(usize, usize)>> {
        let threshold = self.support_threshold(instance, commodity);
        let mut out = vec![Vec::new(); instance.node_count];
        for edge in &instance.edges {
            if self.flow[commodity][edge.id] > threshold {
                out[edge.from].push((edge.id, edge.to));
            }
        }
        out
    }
}

/// Edge-based LP for the relaxation. Variable `commodity * edges + edge`
/// is that commodity's flow on that edge.
#[derive(Debug, Clone)]
pub struct LpModel {
    pub commodities: usize,
    pub edges: usize,
    pub lp: LinearProgram,
}

impl LpModel {
    pub fn var(&self, commodity: usize, edge: usize) -> usize {
        commodity * self.edges + edge
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McmfError {
    #[error("no flow of the demanded values fits within the shrunk capacities")]
    Infeasible,
    #[error("LP iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelaxError {
    #[error("no safe solution exists")]
    NoSafeSolution,
    #[error("LP iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}

/// Build the relaxation LP for a validated, normalized instance and its
/// safety parameters.
pub fn build_lp(instance: &Instance, safety: &SafetyParams) -> LpModel {
    let k = instance.demand_count();
    let m = instance.edge_count();
    assert_eq!(safety.shrunk_capacity.len(), m, "safety params built for another instance");
    let num_vars = k * m;

    let mut objective = vec![0.0; num_vars];
    for i in 0..k {
        for edge in &instance.edges {
            objective[i * m + edge.id] = edge.cost;
        }
    }

    let mut constraints = Vec::with_capacity(k * instance.node_count.saturating_sub(1) + m);
    for (i, demand) in instance.demands.iter().enumerate() {
        // Balance rows for every node except the target (whose row is
        // implied by the others): net outflow is the demand value at the
        // source and zero elsewhere.
        for node in 0..instance.node_count {
            if node == demand.target {
                continue;
            }
            let mut coeffs = Vec::new();
            for edge in &instance.edges {
                if edge.from == node {
                    coeffs.push((i * m + edge.id, 1.0));
                }
                if edge.to == node {
                    coeffs.push((i * m + edge.id, -1.0));
                }
            }
            let rhs = if node == demand.source { demand.value } else { 0.0 };
            constraints.push(Constraint { coeffs, relation: Relation::Eq, rhs });
        }
    }
    for (j, &shrunk) in safety.shrunk_capacity.iter().enumerate() {
        let coeffs = (0..k).map(|i| (i * m + j, 1.0)).collect();
        constraints.push(Constraint { coeffs, relation: Relation::Le, rhs: shrunk });
    }

    LpModel { commodities: k, edges: m, lp: LinearProgram { num_vars, objective, constraints } }
}

/// Solve the relaxation LP to an optimal basic solution.
pub fn solve_lp(model: &LpModel) -> Result<FlowSolution, McmfError> {
    let opts = SimplexOptions { tol: TOL_LP, ..Default::default() };
    let solution = match simplex::solve(&model.lp, &opts) {
        Ok(solution) => solution,
        Err(simplex::SimplexError::Infeasible) => return Err(McmfError::Infeasible),
        Err(simplex::SimplexError::IterationLimit(n)) => return Err(McmfError::IterationLimit(n)),
        Err(simplex::SimplexError::Unbounded) => {
            unreachable!("capacity rows bound every variable")
        }
    };
    let m = model.edges;
    let flow: Vec<Vec<f64>> = (0..model.commodities)
        .map(|i| solution.values[i * m..(i + 1) * m].to_vec())
        .collect();
    let mut aggregate = vec![0.0; m];
    for row in &flow {
        for (j, x) in row.iter().enumerate() {
            aggregate[j] += x;
        }
    }
    Ok(FlowSolution { flow, aggregate, total_cost: solution.objective })
}

/// Find a directed cycle in the adjacency `out` (edge id, head node per
/// entry), returning its edge ids.
fn find_cycle(node_count: usize, out: &[Vec<(usize, usize)>]) -> Option<Vec<usize>> {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; node_count];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut path_nodes: Vec<usize> = Vec::new();
    let mut path_edges: Vec<usize> = Vec::new();

    for start in 0..node_count {
        if color[start] != WHITE {
            continue;
        }
        color[start] = GRAY;
        stack.push((start, 0));
        path_nodes.push(start);
        while let Some(&(node, cursor)) = stack.last() {
            if cursor < out[node].len() {
                stack.last_mut().unwrap().1 += 1;
                let (edge, head) = out[node][cursor];
                if color[head] == WHITE {
                    color[head] = GRAY;
                    stack.push((head, 0));
                    path_nodes.push(head);
                    path_edges.push(edge);
                } else if color[head] == GRAY {
                    let pos = path_nodes.iter().position(|&v| v == head).unwrap();
                    let mut cycle = path_edges[pos..].to_vec();
                    cycle.push(edge);
                    return Some(cycle);
                }
            } else {
                color[node] = BLACK;
                stack.pop();
                path_nodes.pop();
                path_edges.pop();
            }
        }
    }
    None
}

/// Remove directed cycles from every commodity's flow by subtracting each
/// cycle's minimum flow until the support is acyclic. Conservation,
/// demands and capacities are untouched; the cost cannot increase.
pub fn cancel_cycles(mut flow: FlowSolution, instance: &Instance) -> FlowSolution {
    for commodity in 0..instance.demand_count() {
        loop {
            let out = flow.support_out_edges(instance, commodity);
            let Some(cycle) = find_cycle(instance.node_count, &out) else {
                break;
            };
            let min_flow = cycle
                .iter()
                .map(|&e| flow.flow[commodity][e])
                .fold(f64::INFINITY, f64::min);
            for &e in &cycle {
                flow.flow[commodity][e] -= min_flow;
            }
            // The argmin edge is now exactly zero and leaves the support.
        }
    }
    flow.recompute(instance);
    flow
}

/// Rewrite each commodity's acyclic flow as an exact sum of path flows.
///
/// Sub-threshold noise is zeroed, the flow is decomposed into
/// source-to-target paths, and the smallest path amount is corrected so
/// the amounts sum to the demand value exactly. Rebuilding from the
/// decomposition makes demands exact and conservation residuals
/// ulp-scale, which the rounding walk's distribution checks rely on.
/// Falls back to the merely de-noised flow if decomposition stalls.
pub fn canonicalize(mut flow: FlowSolution, instance: &Instance) -> FlowSolution {
    for (commodity, demand) in instance.demands.iter().enumerate() {
        let threshold = TOL_ZERO * demand.value;
        for x in flow.flow[commodity].iter_mut() {
            if *x <= threshold {
                *x = 0.0;
            }
        }
        if let Some(paths) = decompose_commodity(&flow, instance, commodity) {
            let row = &mut flow.flow[commodity];
            row.iter_mut().for_each(|x| *x = 0.0);
            for (edges, amount) in &paths {
                for &e in edges {
                    row[e] += amount;
                }
            }
        }
    }
    flow.recompute(instance);
    flow
}

/// Decompose one commodity's acyclic flow into `(edge list, amount)`
/// paths whose amounts sum exactly to the demand value. Amounts are
/// sorted descending so the final correction lands on the smallest one.
fn decompose_commodity(
    flow: &FlowSolution,
    instance: &Instance,
    commodity: usize,
) -> Option<Vec<(Vec<usize>, f64)>> {
    let demand = &instance.demands[commodity];
    let threshold = TOL_ZERO * demand.value;
    let mut remaining = flow.flow[commodity].clone();
    let mut out = vec![Vec::new(); instance.node_count];
    for edge in &instance.edges {
        if remaining[edge.id] > 0.0 {
            out[edge.from].push((edge.id, edge.to));
        }
    }

    let mut paths: Vec<(Vec<usize>, f64)> = Vec::new();
    let path_budget = instance.edge_count() + 4;
    loop {
        let outflow: f64 = out[demand.source]
            .iter()
            .map(|&(e, _)| remaining[e])
            .filter(|&r| r > threshold)
            .sum();
        if outflow <= threshold {
            break;
        }
        if paths.len() >= path_budget {
            return None;
        }
        // Greedy walk along the largest remaining edge; acyclicity plus
        // conservation guide it to the target.
        let mut node = demand.source;
        let mut edges = Vec::new();
        let mut amount = f64::INFINITY;
        let mut steps = 0;
        while node != demand.target {
            let best = out[node]
                .iter()
                .filter(|&&(e, _)| remaining[e] > threshold)
                .max_by(|&&(a, _), &&(b, _)| {
                    remaining[a].partial_cmp(&remaining[b]).unwrap().then(b.cmp(&a))
                });
            let Some(&(edge, head)) = best else {
                return None; // conservation corrupted; keep the input flow
            };
            amount = amount.min(remaining[edge]);
            edges.push(edge);
            node = head;
            steps += 1;
            if steps >= instance.node_count {
                return None; // support was not acyclic after all
            }
        }
        for &e in &edges {
            remaining[e] -= amount;
        }
        paths.push((edges, amount));
    }
    if paths.is_empty() {
        return None;
    }

    // Descending by amount; deterministic tie-break on the edge lists.
    paths.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    loop {
        let head_sum: f64 = paths[..paths.len() - 1].iter().map(|p| p.1).sum();
        let correction = demand.value - head_sum;
        if correction > 0.0 {
            paths.last_mut().unwrap().1 = correction;
            break;
        }
        // The residual claims the smallest path carried nothing; drop it.
        paths.pop();
        if paths.is_empty() {
            return None;
        }
    }
    Some(paths)
}

/// Relaxation pipeline: build the LP, solve it, cancel cycles, and
/// canonicalize. LP infeasibility means exactly that no safe solution
/// exists.
pub fn relax(instance: &Instance, safety: &SafetyParams) -> Result<FlowSolution, RelaxError> {
    let model = build_lp(instance, safety);
    let flow = match solve_lp(&model) {
        Ok(flow) => flow,
        Err(McmfError::Infeasible) => return Err(RelaxError::NoSafeSolution),
        Err(McmfError::IterationLimit(n)) => return Err(RelaxError::IterationLimit(n)),
    };
    let flow = canonicalize(cancel_cycles(flow, instance), instance);
    debug_assert!(flow_residuals(&flow, instance, &safety.shrunk_capacity) <= TOL_FEAS);
    Ok(flow)
}

/// Largest violation of conservation, demand satisfaction, or capacity
/// over the whole solution. Zero means exactly feasible.
pub fn flow_residuals(flow: &FlowSolution, instance: &Instance, capacities: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, demand) in instance.demands.iter().enumerate() {
        let mut net = vec![0.0f64; instance.node_count];
        for edge in &instance.edges {
            let x = flow.flow[i][edge.id];
            net[edge.from] += x;
            net[edge.to] -= x;
        }
        for (node, &balance) in net.iter().enumerate() {
            let target = if node == demand.source {
                demand.value
            } else if node == demand.target {
                -demand.value
            } else {
                0.0
            };
            worst = worst.max((balance - target).abs());
        }
    }
    for (j, &cap) in capacities.iter().enumerate() {
        worst = worst.max(flow.aggregate[j] - cap);
    }
    worst
}

/// CSV export of a flow solution: one row per positive commodity flow
/// plus an aggregate row per edge.
pub fn flow_to_csv(flow: &FlowSolution) -> String {
    let mut csv = String::from("#schema=safeflow.flow.v1\n");
    csv.push_str("record,commodity,edge,flow\n");
    for (i, row) in flow.flow.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if x > 0.0 {
                let _ = writeln!(csv, "flow,{i},{j},{x}");
            }
        }
    }
    for (j, &f) in flow.aggregate.iter().enumerate() {
        let _ = writeln!(csv, "aggregate,,{j},{f}");
    }
    csv
}
