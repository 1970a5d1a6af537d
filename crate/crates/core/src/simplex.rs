//! Dense two-phase primal simplex for small linear programs.
//!
//! Minimizes `c . x` subject to `x >= 0` and a mix of `<=` and `=` rows.
//! Phase 1 minimizes the sum of artificial variables to find a basic
//! feasible point; phase 2 optimizes the real objective. Pivot selection
//! is Dantzig's rule with lowest-index tie-breaking, switching to Bland's
//! rule after a streak of degenerate pivots so the solver cannot cycle.
//! A dense tableau is fine at the instance sizes this crate targets.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    /// Sparse `(column, coefficient)` pairs; columns may repeat (summed).
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization program over nonnegative variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimplexError {
    #[error("the program is infeasible")]
    Infeasible,
    #[error("the program is unbounded")]
    Unbounded,
    #[error("iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Optimality / feasibility tolerance on reduced costs and residuals.
    pub tol: f64,
    /// Consecutive degenerate pivots tolerated before switching to
    /// Bland's rule.
    pub degenerate_streak_limit: usize,
    /// Hard pivot cap; `None` picks a bound from the problem size.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { tol: 1e-7, degenerate_streak_limit: 64, max_iterations: None }
    }
}

/// Smallest pivot magnitude considered numerically safe.
const PIVOT_TOL: f64 = 1e-9;

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    /// `rows x (cols + 1)` matrix; the last column is the rhs.
    a: Vec<Vec<f64>>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    artificial_start: usize,
    tol: f64,
    pivots_used: usize,
    pivot_budget: usize,
    streak_limit: usize,
}

impl Tableau {
    fn rhs(&self, row: usize) -> f64 {
        self.a[row][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.a[row][col];
        debug_assert!(pivot.abs() > PIVOT_TOL);
        let inv = 1.0 / pivot;
        for value in self.a[row].iter_mut() {
            *value *= inv;
        }
        self.a[row][col] = 1.0;
        for r in 0..self.a.len() {
            if r == row {
                continue;
            }
            let factor = self.a[r][col];
            if factor != 0.0 {
                for c in 0..=self.cols {
                    self.a[r][c] -= factor * self.a[row][c];
                }
                self.a[r][col] = 0.0;
            }
        }
        let factor = self.cost[col];
        if factor != 0.0 {
            for c in 0..=self.cols {
                self.cost[c] -= factor * self.a[row][c];
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Entering column under the active rule, or `None` at optimality.
    fn entering(&self, bland: bool, allow: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for col in 0..self.cols {
            if !allow(col) {
                continue;
            }
            let reduced = self.cost[col];
            if reduced < -self.tol {
                if bland {
                    return Some(col);
                }
                if best.map_or(true, |(_, b)| reduced < b) {
                    best = Some((col, reduced));
                }
            }
        }
        best.map(|(col, _)| col)
    }

    /// Ratio test: smallest `rhs / a` over rows with positive entries,
    /// ties broken by smallest basic variable index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for row in 0..self.a.len() {
            let coeff = self.a[row][col];
            if coeff > PIVOT_TOL {
                let ratio = self.rhs(row).max(0.0) / coeff;
                let better = match best {
                    None => true,
                    Some((brow, bratio)) => {
                        ratio < bratio - 1e-12
                            || (ratio <= bratio + 1e-12 && self.basis[row] < self.basis[brow])
                    }
                };
                if better {
                    best = Some((row, ratio));
                }
            }
        }
        best.map(|(row, _)| row)
    }

    fn run_phase(&mut self, allow: impl Fn(usize) -> bool + Copy) -> PhaseOutcome {
        let mut bland = false;
        let mut degenerate_streak = 0usize;
        loop {
            let Some(col) = self.entering(bland, allow) else {
                return PhaseOutcome::Optimal;
            };
            let Some(row) = self.leaving(col) else {
                return PhaseOutcome::Unbounded;
            };
            if self.pivots_used >= self.pivot_budget {
                return PhaseOutcome::IterationLimit;
            }
            let degenerate = self.rhs(row).max(0.0) / self.a[row][col] <= 1e-12;
            self.pivot(row, col);
            self.pivots_used += 1;
            if degenerate {
                degenerate_streak += 1;
                if degenerate_streak > self.streak_limit {
                    bland = true;
                }
            } else {
                degenerate_streak = 0;
                bland = false;
            }
        }
    }
}

/// Solve the program to a basic optimal solution.
pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, SimplexError> {
    assert_eq!(lp.objective.len(), lp.num_vars, "objective length must match num_vars");
    if lp.constraints.is_empty() || lp.num_vars == 0 {
        // Nothing constrains x (or there is no x): with x = 0 the program
        // is optimal iff no objective coefficient is negative.
        if lp.objective.iter().any(|&c| c < -opts.tol) && lp.num_vars > 0 {
            return Err(SimplexError::Unbounded);
        }
        return Ok(LpSolution { values: vec![0.0; lp.num_vars], objective: 0.0 });
    }

    let rows = lp.constraints.len();
    let num_slack = lp.constraints.iter().filter(|c| c.relation == Relation::Le).count();
    let artificial_start = lp.num_vars + num_slack;
    let cols = artificial_start + rows; // worst case: one artificial per row
    let mut a = vec![vec![0.0; cols + 1]; rows];
    let mut basis = vec![usize::MAX; rows];
    let mut num_artificial = 0usize;
    let mut slack_index = 0usize;
    let mut rhs_scale = 1.0f64;

    for (i, constraint) in lp.constraints.iter().enumerate() {
        // Flip rows to a nonnegative rhs so the initial basis is valid.
        let flip = if constraint.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(col, coeff) in &constraint.coeffs {
            assert!(col < lp.num_vars, "constraint column out of range");
            a[i][col] += flip * coeff;
        }
        a[i][cols] = flip * constraint.rhs;
        rhs_scale = rhs_scale.max(a[i][cols].abs());
        match (constraint.relation, flip >= 0.0) {
            (Relation::Le, true) => {
                // Slack starts basic.
                let col = lp.num_vars + slack_index;
                slack_index += 1;
                a[i][col] = 1.0;
                basis[i] = col;
            }
            (Relation::Le, false) => {
                // Flipped <= becomes >=: surplus plus artificial.
                let col = lp.num_vars + slack_index;
                slack_index += 1;
                a[i][col] = -1.0;
            }
            (Relation::Eq, _) => {}
        }
        if basis[i] == usize::MAX {
            let col = artificial_start + num_artificial;
            num_artificial += 1;
            a[i][col] = 1.0;
            basis[i] = col;
        }
    }

    let mut tableau = Tableau {
        a,
        cost: vec![0.0; cols + 1],
        basis,
        cols,
        artificial_start,
        tol: opts.tol,
        pivots_used: 0,
        pivot_budget: opts
            .max_iterations
            .unwrap_or_else(|| 10_000 + 200 * (rows + cols)),
        streak_limit: opts.degenerate_streak_limit,
    };

    // Phase 1: minimize the sum of artificials. Price out the artificial
    // basics so the cost row starts reduced.
    for col in artificial_start..cols {
        tableau.cost[col] = 1.0;
    }
    for row in 0..rows {
        if tableau.basis[row] >= artificial_start {
            for c in 0..=cols {
                let delta = tableau.a[row][c];
                tableau.cost[c] -= delta;
            }
        }
    }
    match tableau.run_phase(|_| true) {
        PhaseOutcome::Optimal => {}
        // Phase 1 is bounded below by zero, so Unbounded cannot happen.
        PhaseOutcome::Unbounded => unreachable!("phase 1 objective is bounded"),
        PhaseOutcome::IterationLimit => {
            return Err(SimplexError::IterationLimit(tableau.pivots_used))
        }
    }
    let infeasibility = -tableau.cost[cols];
    if infeasibility > opts.tol * rhs_scale.max(1.0) {
        return Err(SimplexError::Infeasible);
    }

    // Drive leftover artificials out of the basis; rows that offer no
    // real pivot are redundant and dropped.
    let mut row = 0;
    while row < tableau.a.len() {
        if tableau.basis[row] >= artificial_start {
            let col = (0..artificial_start).find(|&c| tableau.a[row][c].abs() > PIVOT_TOL);
            match col {
                Some(col) => tableau.pivot(row, col),
                None => {
                    tableau.a.remove(row);
                    tableau.basis.remove(row);
                    continue;
                }
            }
        }
        row += 1;
    }

    // Phase 2: real objective, artificial columns banned.
    for c in 0..=cols {
        tableau.cost[c] = if c < lp.num_vars { lp.objective[c] } else { 0.0 };
    }
    for row in 0..tableau.a.len() {
        let var = tableau.basis[row];
        let basic_cost = if var < lp.num_vars { lp.objective[var] } else { 0.0 };
        if basic_cost != 0.0 {
            for c in 0..=cols {
                let delta = basic_cost * tableau.a[row][c];
                tableau.cost[c] -= delta;
            }
        }
    }
    let artificial_cutoff = tableau.artificial_start;
    match tableau.run_phase(|col| col < artificial_cutoff) {
        PhaseOutcome::Optimal => {}
        PhaseOutcome::Unbounded => return Err(SimplexError::Unbounded),
        PhaseOutcome::IterationLimit => {
            return Err(SimplexError::IterationLimit(tableau.pivots_used))
        }
    }

    let mut values = vec![0.0; lp.num_vars];
    for row in 0..tableau.a.len() {
        let var = tableau.basis[row];
        if var < lp.num_vars {
            values[var] = tableau.rhs(row).max(0.0);
        }
    }
    let objective = values
        .iter()
        .zip(&lp.objective)
        .map(|(x, c)| x * c)
        .sum();
    Ok(LpSolution { values, objective })
}
