//! Shared fixtures and independent oracles for the integration suites.
//! Everything here is deliberately separate from the solver's own code
//! paths: the point is to check the library against implementations it
//! does not share a line with.

#![allow(dead_code)]

use safeflow::instance::{generate_random, GeneratorConfig, Instance};
use safeflow::margin::{self, SafetyParams};
use safeflow::oracle::{self, OracleConfig, OracleVerdict};

/// Minimum-cost single-commodity flow by successive shortest paths on the
/// residual graph, Bellman-Ford distances. Returns the cost of routing
/// `value` units, or `None` when the maximum flow falls short.
pub fn min_cost_flow_ssp(
    node_count: usize,
    edges: &[(usize, usize, f64, f64)],
    source: usize,
    target: usize,
    value: f64,
) -> Option<f64> {
    // Residual arcs: even index = forward, odd = backward twin.
    let mut head = Vec::new();
    let mut tail = Vec::new();
    let mut residual = Vec::new();
    let mut cost = Vec::new();
    for &(from, to, capacity, unit_cost) in edges {
        tail.push(from);
        head.push(to);
        residual.push(capacity);
        cost.push(unit_cost);
        tail.push(to);
        head.push(from);
        residual.push(0.0);
        cost.push(-unit_cost);
    }

    let arc_count = residual.len();
    let mut remaining = value;
    let mut total_cost = 0.0;
    let epsilon = 1e-12 * value.max(1.0);
    let mut rounds = 0;
    while remaining > epsilon {
        rounds += 1;
        assert!(rounds <= 10_000, "ssp oracle failed to terminate");
        // Bellman-Ford from the source over residual arcs. The coarse
        // improvement threshold keeps float noise from fabricating
        // near-zero negative cycles in the parent pointers.
        let mut dist = vec![f64::INFINITY; node_count];
        let mut parent_arc = vec![usize::MAX; node_count];
        dist[source] = 0.0;
        for _ in 0..node_count {
            let mut changed = false;
            for arc in 0..arc_count {
                if residual[arc] > epsilon && dist[tail[arc]].is_finite() {
                    let candidate = dist[tail[arc]] + cost[arc];
                    if candidate < dist[head[arc]] - 1e-12 {
                        dist[head[arc]] = candidate;
                        parent_arc[head[arc]] = arc;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[target].is_finite() {
            return None;
        }
        let mut path_arcs = Vec::new();
        let mut node = target;
        while node != source {
            let arc = parent_arc[node];
            path_arcs.push(arc);
            node = tail[arc];
            assert!(path_arcs.len() <= node_count, "parent pointers form a cycle");
        }
        let mut bottleneck = remaining;
        for &arc in &path_arcs {
            bottleneck = bottleneck.min(residual[arc]);
        }
        for &arc in &path_arcs {
            residual[arc] -= bottleneck;
            residual[arc ^ 1] += bottleneck;
        }
        total_cost += bottleneck * dist[target];
        remaining -= bottleneck;
    }
    Some(total_cost)
}

/// Decompose one commodity's acyclic flow into (edge path, amount) pairs.
/// Independent of the solver's internal decomposition.
pub fn decompose_flow(
    instance: &Instance,
    flow_row: &[f64],
    source: usize,
    target: usize,
    threshold: f64,
) -> Vec<(Vec<usize>, f64)> {
    let mut remaining = flow_row.to_vec();
    let mut paths = Vec::new();
    for _round in 0..instance.edge_count() + 2 {
        let mut node = source;
        let mut edges = Vec::new();
        let mut amount = f64::INFINITY;
        while node != target {
            let next = instance
                .edges
                .iter()
                .filter(|e| e.from == node && remaining[e.id] > threshold)
                .max_by(|a, b| remaining[a.id].partial_cmp(&remaining[b.id]).unwrap());
            let Some(edge) = next else {
                return paths;
            };
            amount = amount.min(remaining[edge.id]);
            edges.push(edge.id);
            node = edge.to;
            assert!(edges.len() <= instance.node_count, "cyclic support in decomposition");
        }
        for &e in &edges {
            remaining[e] -= amount;
        }
        paths.push((edges, amount));
        let outflow: f64 = instance
            .edges
            .iter()
            .filter(|e| e.from == source && remaining[e.id] > threshold)
            .map(|e| remaining[e.id])
            .sum();
        if outflow <= threshold {
            break;
        }
    }
    paths
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Exact lower-tail probability `Pr[X <= x]` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(x: usize, n: usize, p: f64) -> f64 {
    let ln_n = ln_factorial(n);
    let mut total = 0.0;
    for i in 0..=x.min(n) {
        let ln_term = ln_n - ln_factorial(i) - ln_factorial(n - i)
            + (i as f64) * p.ln()
            + ((n - i) as f64) * (1.0 - p).ln();
        total += ln_term.exp();
    }
    total.min(1.0)
}

/// One corpus entry: a generated instance whose margins exist, together
/// with its safety parameters and the exhaustive oracle verdict.
pub struct CorpusItem {
    pub seed: u64,
    pub instance: Instance,
    pub safety: SafetyParams,
    pub verdict: OracleVerdict,
}

fn corpus_config(seed: u64) -> GeneratorConfig {
    // Cycle through sizes so the corpus mixes graph shapes; capacities sit
    // a little above the margin threshold so shrunk capacities range from
    // snug to roomy.
    GeneratorConfig {
        nodes: 5 + (seed % 5) as usize,
        edge_prob: 0.45,
        commodities: 1 + (seed % 4) as usize,
        capacity_range: (16.0, 40.0),
        cost_range: (1.0, 10.0),
        demand_range: (0.3, 1.0),
        seed,
    }
}

/// Deterministically scan seeds and keep instances the oracle certifies
/// as having a safe solution. Panics if the seed budget runs out first.
pub fn safe_corpus(count: usize) -> Vec<CorpusItem> {
    let mut corpus = Vec::with_capacity(count);
    for seed in 0..10_000u64 {
        if corpus.len() == count {
            break;
        }
        let Ok(instance) = generate_random(&corpus_config(seed)) else {
            continue;
        };
        if !instance.validate().is_ok() {
            continue;
        }
        let Ok(safety) = margin::safety_params(&instance, 0.0) else {
            continue;
        };
        let Ok(verdict) = oracle::verdict(&instance, &safety, &OracleConfig::default()) else {
            continue;
        };
        if !verdict.safe_exists {
            continue;
        }
        corpus.push(CorpusItem { seed, instance, safety, verdict });
    }
    assert_eq!(corpus.len(), count, "seed budget exhausted while building the corpus");
    corpus
}

/// Relative agreement check used for cost comparisons.
pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
