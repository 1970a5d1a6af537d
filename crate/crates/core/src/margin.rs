//! Safety margins and tail bounds.
//!
//! The margin for an edge of capacity `C` in a graph of `m` edges is
//!
//! ```text
//! rho = 1 - (e - 1) * sqrt(ln(2m) / C)
//! ```
//!
//! and the rounded load on an edge with expected load `F` obeys the
//! Chernoff-style tail
//!
//! ```text
//! Pr(load > (1 + delta) * F)  <  (e^delta / (1 + delta)^(1 + delta))^F .
//! ```
//!
//! Margins are meaningful only in relative units where the largest demand
//! value is 1 (see [`crate::instance::Instance::normalize`]).

use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;

/// `e - 1`, the constant in the margin and deviation formulas.
pub const E_MINUS_ONE: f64 = std::f64::consts::E - 1.0;

/// Per-edge safety margins and shrunk capacities for one instance.
#[derive(Debug, Clone, Serialize)]
pub struct SafetyParams {
    /// Margin factor per edge, each strictly inside (0, 1).
    pub rho: Vec<f64>,
    /// Shrunk capacity per edge, `rho[j] * capacity[j]`.
    pub shrunk_capacity: Vec<f64>,
    /// Edge count the `ln(2m)` term was computed with.
    pub m: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MarginError {
    #[error(
        "edge {edge}: capacity {capacity} leaves margin {rho} <= floor {floor} \
         (margins require capacity above {min_capacity})"
    )]
    CapacityTooSmall { edge: usize, capacity: f64, rho: f64, floor: f64, min_capacity: f64 },
}

/// Deviation term `(e - 1) * sqrt(ln_term / expected)` shared by the
/// margin and the δ-for-ε formulas.
fn deviation(ln_term: f64, expected: f64) -> f64 {
    E_MINUS_ONE * (ln_term / expected).sqrt()
}

/// Safety margin for an edge of the given capacity in a graph of `m`
/// edges. May be zero or negative for small capacities; the caller
/// decides what to do with that.
pub fn rho(capacity: f64, m: usize) -> f64 {
    debug_assert!(capacity > 0.0 && m >= 1);
    1.0 - deviation(((2 * m) as f64).ln(), capacity)
}

/// Smallest capacity with a positive margin: `(e - 1)^2 * ln(2m)`.
pub fn min_capacity(m: usize) -> f64 {
    E_MINUS_ONE * E_MINUS_ONE * ((2 * m) as f64).ln()
}

/// Compute per-edge margins and shrunk capacities for a validated,
/// normalized instance. Fails if any margin is at or below `rho_floor`
/// (default floor 0): the margin regime does not cover such edges and
/// clamping silently would void the failure-probability guarantee.
pub fn safety_params(instance: &Instance, rho_floor: f64) -> Result<SafetyParams, MarginError> {
    let m = instance.edge_count();
    let mut rhos = Vec::with_capacity(m);
    let mut shrunk = Vec::with_capacity(m);
    for edge in &instance.edges {
        let r = rho(edge.capacity, m);
        if r <= rho_floor {
            return Err(MarginError::CapacityTooSmall {
                edge: edge.id,
                capacity: edge.capacity,
                rho: r,
                floor: rho_floor,
                min_capacity: min_capacity(m),
            });
        }
        rhos.push(r);
        shrunk.push(r * edge.capacity);
    }
    Ok(SafetyParams { rho: rhos, shrunk_capacity: shrunk, m })
}

/// Upper tail bound `(e^delta / (1+delta)^(1+delta))^expected` for the
/// rounded load exceeding `(1 + delta) * expected`.
///
/// Evaluated as `exp(expected * (delta - (1+delta) * ln(1+delta)))` so it
/// stays finite for large `delta` and large `expected`.
pub fn chernoff_tail(delta: f64, expected: f64) -> f64 {
    debug_assert!(delta >= 0.0 && expected > 0.0);
    (expected * (delta - (1.0 + delta) * (1.0 + delta).ln())).exp()
}

/// Deviation `(e - 1) * sqrt(ln(1/epsilon) / expected)` targeted at tail
/// mass `epsilon`. Drives the tail bound below `epsilon` whenever
/// `expected >= ln(1/epsilon)`; the margin formula is this with
/// `epsilon = 1/(2m)` and `expected` at the shrunk capacity.
pub fn delta_for_epsilon(epsilon: f64, expected: f64) -> f64 {
    debug_assert!(epsilon > 0.0 && epsilon < 1.0 && expected > 0.0);
    deviation((1.0 / epsilon).ln(), expected)
}

/// Whether capacity `C` absorbs the deviation-padded flow:
/// `C >= (1 + (e-1) * sqrt(ln(2m) / flow)) * flow`.
pub fn capacity_condition_holds(capacity: f64, flow: f64, m: usize) -> bool {
    debug_assert!(capacity > 0.0 && flow > 0.0 && m >= 1);
    capacity >= (1.0 + deviation(((2 * m) as f64).ln(), flow)) * flow
}

/// Probability bound `2^-r` that `r` independent rounding trials all fail.
pub fn failure_bound(trials: u32) -> f64 {
    debug_assert!(trials >= 1);
    0.5f64.powi(trials as i32)
}
