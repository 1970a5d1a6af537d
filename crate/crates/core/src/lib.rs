//! Solver for the capacitated unsplittable flow problem on directed
//! multigraphs.
//!
//! Each commodity `i` must route its whole demand `V_i` along a single
//! directed path from its source to its target, and the demands crossing
//! any edge `j` may not exceed the edge capacity `C_j`. The solver trades
//! a sliver of the solution space for tractability: it shrinks every
//! capacity by a per-edge safety margin `rho_j`, solves the continuous
//! minimum-cost multicommodity flow relaxation under the shrunk
//! capacities, and converts the fractional flow into one path per
//! commodity by a flow-proportional random walk. A rounding trial fails
//! only if some edge ends up overloaded; trials repeat up to `r` times,
//! and when a "safe" solution exists (one fitting the shrunk capacities)
//! each trial succeeds with probability above one half, so all `r` trials
//! fail with probability below `2^-r`. Any path system the solver returns
//! respects the original capacities exactly.
//!
//! Modules follow the pipeline: [`instance`] holds the problem data,
//! [`margin`] the safety-margin and tail-bound math, [`simplex`] a dense
//! two-phase LP kernel, [`mcmf`] the flow relaxation, [`rounding`] the
//! random walk and the trial driver, and [`oracle`] brute-force ground
//! truth for small instances (test support, never on the solve path).

pub mod instance;
pub mod margin;
pub mod mcmf;
pub mod oracle;
pub mod rounding;
pub mod simplex;

pub use instance::{Demand, Edge, GeneratorConfig, Instance};
pub use margin::SafetyParams;
pub use mcmf::FlowSolution;
pub use rounding::{DriverConfig, PathSystem, RoundingReport, Verdict};
