//! Linear programming core: a labeled bounded-variable LP model, a deterministic revised simplex
//! that reports row duals, reduced costs and basis status, and an independent KKT checker.
//!
//! Sign conventions for `min cᵀx`: the dual `y` of a `≤` row is non-positive, of a `≥` row
//! non-negative, of an `=` row free. Reduced costs are `z = c - Aᵀy`; a column at its lower bound
//! has `z ≥ 0`, at its upper bound `z ≤ 0`, basic `z = 0`.

mod backend;
mod blocks;
mod error;
mod kkt;
mod lu;
mod problem;
mod simplex;

use serde::{Deserialize, Serialize};

pub use backend::{solver_backend, SolveCapability, SolverBackend};
pub use error::LpError;
pub use kkt::{check_kkt, check_kkt_with_tol, KktReport, DEFAULT_KKT_TOL};
pub use problem::{ColId, LpProblem, Row, RowId, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable sitting at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    /// Largest reduced cost; lowest index on ties. Switches to Bland on degenerate stalls.
    Dantzig,
    /// Lowest-index eligible column (anti-cycling).
    Bland,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Primal feasibility tolerance, relative to `max(1, |bound|)`.
    pub feas_tol: f64,
    /// Reduced-cost tolerance for pricing.
    pub opt_tol: f64,
    /// `None` picks a limit from the problem size.
    pub max_iter: Option<usize>,
    /// Product-form updates kept before refactorizing.
    pub refactor_period: usize,
    pub pivot_rule: PivotRule,
    /// Solve independent row/column blocks separately.
    pub split_blocks: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            max_iter: None,
            refactor_period: 100,
            pivot_rule: PivotRule::Dantzig,
            split_blocks: true,
        }
    }
}

/// Counters describing how the solve went; filled for every status.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub refactorizations: usize,
    pub blocks: usize,
    /// Phase the solver was in when it stopped (1 = feasibility search).
    pub phase: u8,
    /// Sum of bound violations of the basic variables at termination.
    pub primal_infeasibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub row_duals: Vec<f64>,
    /// Reduced cost of every column (zero for basic columns).
    pub bound_duals: Vec<f64>,
    pub col_status: Vec<BasisStatus>,
    pub row_status: Vec<BasisStatus>,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, col: ColId) -> f64 {
        self.primal[col.0]
    }

    pub fn dual(&self, row: RowId) -> f64 {
        self.row_duals[row.0]
    }

    pub fn reduced_cost(&self, col: ColId) -> f64 {
        self.bound_duals[col.0]
    }
}

/// Solves `p` with the bundled simplex.
pub fn solve(p: &LpProblem, opts: &SolveOptions) -> Result<SolveResult, LpError> {
    p.validate()?;
    Ok(blocks::solve_validated(p, opts))
}
