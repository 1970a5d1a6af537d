//! Randomized rounding of a fractional flow into one path per commodity,
//! plus the trial driver.
//!
//! Each commodity walks from its source, choosing the next edge among its
//! outgoing support edges with probability proportional to that edge's
//! commodity flow, until the target absorbs it. Because the support is
//! acyclic the walk is a simple path of at most `n - 1` edges, and the
//! expected load it puts on any edge equals the fractional flow there.
//! A trial rounds every commodity independently and checks the loads
//! against the original capacities; the driver repeats up to `r` trials
//! and the probability that all fail is below `2^-r` whenever a safe
//! solution exists.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::instance::{Instance, ValidationReport};
use crate::margin::{self, MarginError, SafetyParams};
use crate::mcmf::{self, FlowSolution, RelaxError};

/// Absolute slack when comparing path loads against capacities. Loads
/// are short sums of input values, so they carry no meaningful error.
pub const TOL_CHECK: f64 = 1e-12;

/// Report schema version emitted in JSON exports.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One rounded path system: a single directed path per commodity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSystem {
    /// Node sequence per commodity, source first, target last.
    pub paths: Vec<Vec<usize>>,
    /// Edge ids per commodity matching `paths` (one fewer entry than
    /// nodes); needed to keep parallel edges apart.
    pub path_edges: Vec<Vec<usize>>,
    /// Load per edge: the sum of demand values over paths crossing it.
    pub edge_load: Vec<f64>,
    /// Whether the loads fit the instance's original capacities.
    pub feasible: bool,
}

/// One walk: the visited nodes and the edges taken.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoundingError {
    #[error("walk dead-ended at node {node}: flow conservation is corrupted")]
    DeadEnd { node: usize },
}

/// Driver parameters. `trials` is the paper's `r`.
#[derive(Debug, Clone)]
pub struct DriverConfig {
    pub trials: u32,
    pub seed: u64,
    pub rho_floor: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig { trials: 20, seed: 0, rho_floor: 0.0 }
    }
}

/// Outcome of the trial driver.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// A feasible path system, found at this 1-based trial index.
    Found { trial: u32, paths: PathSystem },
    /// The relaxation is infeasible under the shrunk capacities.
    NoSafeSolution,
    /// All trials produced an overloaded path system.
    NotFound,
}

/// Per-edge report row. Capacities, flows and loads are in normalized
/// units (original values divided by `scale`).
#[derive(Debug, Clone, Serialize)]
pub struct EdgeRow {
    pub edge: usize,
    pub capacity: f64,
    pub rho: f64,
    pub shrunk_capacity: f64,
    pub flow: Option<f64>,
    pub load: Option<f64>,
}

/// Full audit record of one driver run.
#[derive(Debug, Clone, Serialize)]
pub struct RoundingReport {
    pub schema_version: u32,
    pub seed: u64,
    pub max_trials: u32,
    pub rho_floor: f64,
    /// Demands and capacities were divided by this before solving.
    pub scale: f64,
    pub verdict: Verdict,
    pub trials_run: u32,
    pub per_trial_feasible: Vec<bool>,
    /// Bound `2^-r` on the probability that all `max_trials` trials fail.
    pub theorem_bound: f64,
    /// Per-trial overload bound: the sum over loaded edges of the tail
    /// bound at deviation `C_j / F_j - 1`. Below one half whenever every
    /// edge flow fits its shrunk capacity.
    pub union_bound: Option<f64>,
    pub edges: Vec<EdgeRow>,
    /// The fractional flow the paths were drawn from, for audit.
    pub flow: Option<FlowSolution>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("instance failed validation: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    CapacityTooSmall(#[from] MarginError),
    #[error("LP iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}

/// Independent random substream for one (seed, trial, commodity) triple,
/// so trials are independent and reproducible in any execution order.
pub fn commodity_rng(seed: u64, trial: u32, commodity: u32) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..12].copy_from_slice(&trial.to_le_bytes());
    bytes[12..16].copy_from_slice(&commodity.to_le_bytes());
    bytes[16..24].copy_from_slice(b"safeflow");
    ChaCha8Rng::from_seed(bytes)
}

/// Walk one commodity from source to target, branching among outgoing
/// support edges with flow-proportional probabilities.
pub fn walk_one<R: Rng>(
    flow: &FlowSolution,
    instance: &Instance,
    commodity: usize,
    rng: &mut R,
) -> Result<WalkPath, RoundingError> {
    let demand = &instance.demands[commodity];
    let out = flow.support_out_edges(instance, commodity);
    let mut node = demand.source;
    let mut nodes = vec![node];
    let mut edges = Vec::new();
    while node != demand.target {
        let choices = &out[node];
        let total: f64 = choices.iter().map(|&(e, _)| flow.flow[commodity][e]).sum();
        if !(total > 0.0) {
            return Err(RoundingError::DeadEnd { node });
        }
        let mut draw = rng.gen::<f64>() * total;
        let mut pick = *choices.last().expect("positive total implies a choice");
        for &(edge, head) in choices {
            let weight = flow.flow[commodity][edge];
            if draw < weight {
                pick = (edge, head);
                break;
            }
            draw -= weight;
        }
        edges.push(pick.0);
        node = pick.1;
        nodes.push(node);
        assert!(
            edges.len() < instance.node_count,
            "walk exceeded n - 1 edges; the commodity support must be acyclic"
        );
    }
    Ok(WalkPath { nodes, edges })
}

/// Load per edge implied by the given per-commodity edge lists.
fn loads_from_paths(path_edges: &[Vec<usize>], instance: &Instance) -> Vec<f64> {
    let mut loads = vec![0.0; instance.edge_count()];
    for (i, edges) in path_edges.iter().enumerate() {
        let value = instance.demands[i].value;
        for &e in edges {
            loads[e] += value;
        }
    }
    loads
}

/// Round every commodity independently with substreams derived from
/// `(seed, trial)`, and flag feasibility against the original capacities.
pub fn round_paths(
    flow: &FlowSolution,
    instance: &Instance,
    seed: u64,
    trial: u32,
) -> Result<PathSystem, RoundingError> {
    let k = instance.demand_count();
    let mut paths = Vec::with_capacity(k);
    let mut path_edges = Vec::with_capacity(k);
    for commodity in 0..k {
        let mut rng = commodity_rng(seed, trial, commodity as u32);
        let walk = walk_one(flow, instance, commodity, &mut rng)?;
        paths.push(walk.nodes);
        path_edges.push(walk.edges);
    }
    let edge_load = loads_from_paths(&path_edges, instance);
    let feasible = edge_load
        .iter()
        .zip(&instance.edges)
        .all(|(load, edge)| *load <= edge.capacity + TOL_CHECK);
    Ok(PathSystem { paths, path_edges, edge_load, feasible })
}

/// Whether the path system fits the instance's capacities. Loads are
/// recomputed from the paths rather than trusted from the struct.
pub fn check_feasible(paths: &PathSystem, instance: &Instance) -> bool {
    let loads = loads_from_paths(&paths.path_edges, instance);
    loads
        .iter()
        .zip(&instance.edges)
        .all(|(load, edge)| *load <= edge.capacity + TOL_CHECK)
}

/// Sum over loaded edges of the overload tail bound at deviation
/// `capacity / flow - 1`: an upper bound on the probability that a single
/// trial overloads any edge.
pub fn overload_union_bound(flow: &FlowSolution, instance: &Instance) -> f64 {
    instance
        .edges
        .iter()
        .filter(|edge| flow.aggregate[edge.id] > 0.0)
        .map(|edge| {
            let expected = flow.aggregate[edge.id];
            let delta = (edge.capacity / expected - 1.0).max(0.0);
            margin::chernoff_tail(delta, expected)
        })
        .sum()
}

/// Run up to `trials` independent rounding trials; first feasible wins.
/// A dead-ended trial counts as failed and is never retried in place.
pub(crate) fn run_trials(
    flow: &FlowSolution,
    instance: &Instance,
    trials: u32,
    seed: u64,
) -> (Option<(u32, PathSystem)>, Vec<bool>, Option<PathSystem>) {
    let mut outcomes = Vec::new();
    let mut last = None;
    for trial in 1..=trials {
        match round_paths(flow, instance, seed, trial) {
            Ok(paths) if paths.feasible => {
                outcomes.push(true);
                return (Some((trial, paths)), outcomes, last);
            }
            Ok(paths) => {
                outcomes.push(false);
                last = Some(paths);
            }
            Err(RoundingError::DeadEnd { .. }) => outcomes.push(false),
        }
    }
    (None, outcomes, last)
}

/// Whole pipeline: normalize, compute margins, solve the relaxation once,
/// and repeat the rounding up to `config.trials` times. Deterministic for
/// a fixed `(instance, config)`.
pub fn solve(instance: &Instance, config: &DriverConfig) -> Result<RoundingReport, SolveError> {
    let report = instance.validate();
    if !report.is_ok() {
        return Err(SolveError::InvalidInstance(render_violations(&report)));
    }
    let (normalized, scale) = instance
        .normalize()
        .expect("validated instances normalize");
    let safety = margin::safety_params(&normalized, config.rho_floor)?;

    let flow = match mcmf::relax(&normalized, &safety) {
        Ok(flow) => flow,
        Err(RelaxError::NoSafeSolution) => {
            return Ok(assemble_report(
                config,
                scale,
                &normalized,
                &safety,
                None,
                Verdict::NoSafeSolution,
                Vec::new(),
                None,
            ));
        }
        Err(RelaxError::IterationLimit(n)) => return Err(SolveError::IterationLimit(n)),
    };

    let (found, outcomes, last) = run_trials(&flow, &normalized, config.trials, config.seed);
    let (verdict, loads) = match found {
        Some((trial, paths)) => {
            let loads = paths.edge_load.clone();
            (Verdict::Found { trial, paths }, Some(loads))
        }
        None => (Verdict::NotFound, last.map(|p| p.edge_load)),
    };
    Ok(assemble_report(
        config,
        scale,
        &normalized,
        &safety,
        Some(flow),
        verdict,
        outcomes,
        loads,
    ))
}

fn render_violations(report: &ValidationReport) -> String {
    report
        .violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    config: &DriverConfig,
    scale: f64,
    normalized: &Instance,
    safety: &SafetyParams,
    flow: Option<FlowSolution>,
    verdict: Verdict,
    per_trial_feasible: Vec<bool>,
    loads: Option<Vec<f64>>,
) -> RoundingReport {
    let union_bound = flow.as_ref().map(|f| overload_union_bound(f, normalized));
    let edges = normalized
        .edges
        .iter()
        .map(|edge| EdgeRow {
            edge: edge.id,
            capacity: edge.capacity,
            rho: safety.rho[edge.id],
            shrunk_capacity: safety.shrunk_capacity[edge.id],
            flow: flow.as_ref().map(|f| f.aggregate[edge.id]),
            load: loads.as_ref().map(|l| l[edge.id]),
        })
        .collect();
    RoundingReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: config.seed,
        max_trials: config.trials,
        rho_floor: config.rho_floor,
        scale,
        trials_run: per_trial_feasible.len() as u32,
        per_trial_feasible,
        theorem_bound: margin::failure_bound(config.trials),
        union_bound,
        verdict,
        edges,
        flow,
    }
}

impl RoundingReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Per-edge load statistics over repeated roundings (Welford), used by
/// the stats export and the expected-load checks.
#[derive(Debug, Clone, Serialize)]
pub struct LoadStats {
    pub edge: usize,
    /// Fractional flow on the edge, the expected load.
    pub flow: f64,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

pub fn load_statistics(
    flow: &FlowSolution,
    instance: &Instance,
    roundings: u32,
    seed: u64,
) -> Result<Vec<LoadStats>, RoundingError> {
    assert!(roundings >= 1);
    let m = instance.edge_count();
    let mut mean = vec![0.0f64; m];
    let mut m2 = vec![0.0f64; m];
    let mut max = vec![0.0f64; m];
    for trial in 1..=roundings {
        let paths = round_paths(flow, instance, seed, trial)?;
        for j in 0..m {
            let load = paths.edge_load[j];
            let delta = load - mean[j];
            mean[j] += delta / trial as f64;
            m2[j] += delta * (load - mean[j]);
            max[j] = max[j].max(load);
        }
    }
    Ok((0..m)
        .map(|j| LoadStats {
            edge: j,
            flow: flow.aggregate[j],
            mean: mean[j],
            std: if roundings > 1 { (m2[j] / (roundings as f64 - 1.0)).sqrt() } else { 0.0 },
            max: max[j],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;
    use approx::assert_abs_diff_eq;

    fn flow_from(instance: &Instance, rows: Vec<Vec<f64>>) -> FlowSolution {
        FlowSolution::from_flows(rows, instance)
    }

    fn diamond() -> (Instance, FlowSolution) {
        // 0 -> {1, 2} -> 3 with the unit demand split 0.3 / 0.7.
        let inst = Instance::from_tuples(
            4,
            &[
                (0, 1, 2.0, 1.0),
                (0, 2, 2.0, 1.0),
                (1, 3, 2.0, 1.0),
                (2, 3, 2.0, 1.0),
            ],
            &[(0, 3, 1.0)],
        );
        let flow = flow_from(&inst, vec![vec![0.3, 0.7, 0.3, 0.7]]);
        (inst, flow)
    }

    #[test]
    fn single_support_walk_is_deterministic() {
        let inst = Instance::from_tuples(
            3,
            &[(0, 1, 2.0, 1.0), (1, 2, 2.0, 1.0), (0, 2, 2.0, 1.0)],
            &[(0, 2, 0.5)],
        );
        let flow = flow_from(&inst, vec![vec![0.5, 0.5, 0.0]]);
        for trial in 1..50 {
            let mut rng = commodity_rng(9, trial, 0);
            let walk = walk_one(&flow, &inst, 0, &mut rng).unwrap();
            assert_eq!(walk.nodes, vec![0, 1, 2]);
            assert_eq!(walk.edges, vec![0, 1]);
        }
    }

    #[test]
    fn diamond_walk_matches_the_branch_probability() {
        let (inst, flow) = diamond();
        let total = 100_000u32;
        let mut via_upper = 0u32;
        for trial in 1..=total {
            let mut rng = commodity_rng(31, trial, 0);
            let walk = walk_one(&flow, &inst, 0, &mut rng).unwrap();
            assert!(walk.edges.len() <= inst.node_count - 1);
            let mut seen = walk.nodes.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), walk.nodes.len(), "walk revisited a node");
            if walk.edges[0] == 0 {
                via_upper += 1;
            }
        }
        // Exact branch probability is 0.3/(0.3+0.7); three binomial sigmas.
        let p = 0.3 / (0.3 + 0.7);
        let sigma = (p * (1.0 - p) / total as f64).sqrt();
        let freq = via_upper as f64 / total as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "freq {freq} vs {p} (sigma {sigma})");
    }

    #[test]
    fn dead_end_is_reported() {
        // Flow enters node 1 but nothing leaves it: corrupted on purpose.
        let inst = Instance::from_tuples(
            3,
            &[(0, 1, 2.0, 1.0), (2, 1, 2.0, 1.0)],
            &[(0, 2, 1.0)],
        );
        let flow = flow_from(&inst, vec![vec![1.0, 0.0]]);
        let mut rng = commodity_rng(1, 1, 0);
        let err = walk_one(&flow, &inst, 0, &mut rng).unwrap_err();
        assert_eq!(err, RoundingError::DeadEnd { node: 1 });
    }

    #[test]
    fn single_commodity_rounding_loads_the_path() {
        let inst = Instance::from_tuples(
            3,
            &[(0, 1, 2.0, 1.0), (1, 2, 2.0, 1.0)],
            &[(0, 2, 0.625)],
        );
        let flow = flow_from(&inst, vec![vec![0.625, 0.625]]);
        let paths = round_paths(&flow, &inst, 5, 1).unwrap();
        assert_eq!(paths.paths, vec![vec![0, 1, 2]]);
        assert_eq!(paths.edge_load, vec![0.625, 0.625]);
        assert!(paths.feasible);
        assert!(check_feasible(&paths, &inst));
    }

    #[test]
    fn empirical_mean_load_matches_the_flow() {
        let (inst, flow) = diamond();
        let stats = load_statistics(&flow, &inst, 10_000, 77).unwrap();
        for s in &stats {
            // Four sigmas of the sample mean.
            let tolerance = 4.0 * s.std / (10_000f64).sqrt();
            assert!(
                (s.mean - s.flow).abs() <= tolerance.max(1e-12),
                "edge {}: mean {} vs flow {}",
                s.edge,
                s.mean,
                s.flow
            );
        }
    }

    #[test]
    fn constant_loads_have_exact_mean_and_zero_std() {
        let inst = Instance::from_tuples(
            3,
            &[(0, 1, 2.0, 1.0), (1, 2, 2.0, 1.0)],
            &[(0, 2, 0.3)],
        );
        let flow = flow_from(&inst, vec![vec![0.3, 0.3]]);
        let stats = load_statistics(&flow, &inst, 500, 3).unwrap();
        for s in stats {
            assert_eq!(s.mean, 0.3);
            assert_eq!(s.std, 0.0);
            assert_eq!(s.max, 0.3);
        }
    }

    #[test]
    fn feasibility_is_nonstrict_at_capacity() {
        let inst = Instance::from_tuples(
            2,
            &[(0, 1, 1.0, 1.0)],
            &[(0, 1, 0.25), (0, 1, 0.75)],
        );
        let paths = PathSystem {
            paths: vec![vec![0, 1], vec![0, 1]],
            path_edges: vec![vec![0], vec![0]],
            edge_load: vec![1.0],
            feasible: true,
        };
        // Load 0.25 + 0.75 == capacity exactly: still feasible.
        assert!(check_feasible(&paths, &inst));
    }

    #[test]
    fn overload_fails_the_check() {
        let inst = Instance::from_tuples(
            2,
            &[(0, 1, 1.0, 1.0)],
            &[(0, 1, 1.0), (0, 1, 1.0)],
        );
        let paths = PathSystem {
            paths: vec![vec![0, 1], vec![0, 1]],
            path_edges: vec![vec![0], vec![0]],
            edge_load: vec![2.0],
            feasible: false,
        };
        assert!(!check_feasible(&paths, &inst));
    }

    #[test]
    fn driver_finds_the_obvious_solution_first_try() {
        // Two disjoint wide paths.
        let inst = Instance::from_tuples(
            4,
            &[(0, 1, 60.0, 1.0), (2, 3, 60.0, 1.0)],
            &[(0, 1, 1.0), (2, 3, 1.0)],
        );
        let report = solve(&inst, &DriverConfig::default()).unwrap();
        match &report.verdict {
            Verdict::Found { trial, paths } => {
                assert_eq!(*trial, 1);
                assert_eq!(paths.paths, vec![vec![0, 1], vec![2, 3]]);
            }
            other => panic!("expected Found, got {other:?}"),
        }
        assert_eq!(report.per_trial_feasible, vec![true]);
        assert!(report.union_bound.unwrap() < 0.5);
        assert_eq!(report.theorem_bound, margin::failure_bound(20));
    }

    #[test]
    fn infeasible_relaxation_short_circuits() {
        // A single edge wide enough for a margin (and even for both raw
        // demands) but whose shrunk capacity cannot carry them.
        let inst = Instance::from_tuples(
            2,
            &[(0, 1, 2.2, 1.0)],
            &[(0, 1, 1.0), (0, 1, 1.0)],
        );
        let report = solve(&inst, &DriverConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::NoSafeSolution);
        assert_eq!(report.trials_run, 0);
        assert!(report.flow.is_none());
    }

    #[test]
    fn margin_failure_is_an_error() {
        let inst = Instance::from_tuples(2, &[(0, 1, 1.0, 1.0)], &[(0, 1, 0.5)]);
        let err = solve(&inst, &DriverConfig::default()).unwrap_err();
        assert!(matches!(err, SolveError::CapacityTooSmall(_)));
    }

    #[test]
    fn invalid_instances_are_rejected() {
        let inst = Instance::from_tuples(2, &[(0, 0, 1.0, 1.0)], &[(0, 1, 0.5)]);
        let err = solve(&inst, &DriverConfig::default()).unwrap_err();
        assert!(matches!(err, SolveError::InvalidInstance(_)));
    }

    #[test]
    fn reports_are_byte_identical_for_a_fixed_seed() {
        let inst = crate::instance::generate_random(&crate::instance::GeneratorConfig {
            nodes: 6,
            edge_prob: 0.6,
            commodities: 3,
            capacity_range: (15.0, 40.0),
            seed: 21,
            ..Default::default()
        })
        .unwrap();
        let config = DriverConfig { trials: 8, seed: 99, rho_floor: 0.0 };
        let a = solve(&inst, &config).unwrap().to_json_string();
        let b = solve(&inst, &config).unwrap().to_json_string();
        assert_eq!(a, b);
        // A different seed may or may not change the verdict, but the
        // reported seed field always differs.
        let c = solve(&inst, &DriverConfig { seed: 100, ..config }).unwrap().to_json_string();
        assert_ne!(a, c);
    }

    #[test]
    fn trial_loop_reports_not_found_when_every_trial_overloads() {
        // Two commodities, each split half-and-half over two parallel
        // edges of capacity 1.2: a trial is feasible only if they pick
        // different edges, so single-trial failure probability is 1/2.
        let inst = Instance::from_tuples(
            2,
            &[(0, 1, 1.2, 1.0), (0, 1, 1.2, 1.0)],
            &[(0, 1, 1.0), (0, 1, 1.0)],
        );
        let flow = flow_from(&inst, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let mut saw_not_found = false;
        let mut saw_found = false;
        for seed in 0..500 {
            let (found, outcomes, last) = run_trials(&flow, &inst, 4, seed);
            match found {
                Some((trial, paths)) => {
                    saw_found = true;
                    assert_eq!(outcomes.len() as u32, trial);
                    assert!(paths.feasible);
                    assert!(check_feasible(&paths, &inst));
                }
                None => {
                    saw_not_found = true;
                    assert_eq!(outcomes, vec![false; 4]);
                    let last = last.expect("failed trials still produce paths");
                    assert!(!last.feasible);
                }
            }
            if saw_found && saw_not_found {
                break;
            }
        }
        assert!(saw_found && saw_not_found, "expected both outcomes across seeds");
    }

    #[test]
    fn safety_params_are_echoed_in_the_edge_table() {
        let inst = Instance::from_tuples(2, &[(0, 1, 40.0, 1.0)], &[(0, 1, 1.0)]);
        let report = solve(&inst, &DriverConfig::default()).unwrap();
        let row = &report.edges[0];
        assert_eq!(row.capacity, 40.0);
        assert_abs_diff_eq!(row.shrunk_capacity, row.rho * 40.0, epsilon = 1e-12);
        assert_eq!(row.flow, Some(1.0));
        assert_eq!(row.load, Some(1.0));
    }
}
