//! Named solver backends behind one solve contract.

use std::fmt;

use crate::{solve, LpError, LpProblem, SolveOptions, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverBackend {
    Bundled,
    ExternalAdapter,
}

impl fmt::Display for SolverBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverBackend::Bundled => "bundled",
            SolverBackend::ExternalAdapter => "external-adapter",
        })
    }
}

/// Something that can solve an [`LpProblem`].
pub trait SolveCapability: Send + Sync {
    fn backend(&self) -> SolverBackend;

    /// Whether `row_duals`, `bound_duals` and the basis status are meaningful.
    fn provides_duals(&self) -> bool;

    fn solve(&self, p: &LpProblem, opts: &SolveOptions) -> Result<SolveResult, LpError>;
}

/// Looks up a backend by name: `bundled` or `external-adapter`.
pub fn solver_backend(name: &str) -> Result<Box<dyn SolveCapability>, LpError> {
    match name {
        "bundled" => Ok(Box::new(Bundled)),
        "external-adapter" => external(),
        other => Err(LpError::UnknownBackend(other.to_string())),
    }
}

struct Bundled;

impl SolveCapability for Bundled {
    fn backend(&self) -> SolverBackend {
        SolverBackend::Bundled
    }

    fn provides_duals(&self) -> bool {
        true
    }

    fn solve(&self, p: &LpProblem, opts: &SolveOptions) -> Result<SolveResult, LpError> {
        solve(p, opts)
    }
}

#[cfg(not(feature = "external-adapter"))]
fn external() -> Result<Box<dyn SolveCapability>, LpError> {
    Err(LpError::BackendUnavailable("external-adapter".into()))
}

#[cfg(feature = "external-adapter")]
fn external() -> Result<Box<dyn SolveCapability>, LpError> {
    Ok(Box::new(adapter::Microlp))
}

#[cfg(feature = "external-adapter")]
mod adapter {
    use super::*;
    use crate::{BasisStatus, Diagnostics, Sense, SolveStatus};

    /// Primal-only adapter: the objective and primal vector are filled, duals are NaN.
    pub(super) struct Microlp;

    impl SolveCapability for Microlp {
        fn backend(&self) -> SolverBackend {
            SolverBackend::ExternalAdapter
        }

        fn provides_duals(&self) -> bool {
            false
        }

        fn solve(&self, p: &LpProblem, _opts: &SolveOptions) -> Result<SolveResult, LpError> {
            p.validate()?;
            let mut model = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
            let vars: Vec<microlp::Variable> = (0..p.n_cols())
                .map(|j| model.add_var(p.objective()[j], (p.lower()[j], p.upper()[j])))
                .collect();
            for row in p.rows() {
                let op = match row.sense {
                    Sense::Le => microlp::ComparisonOp::Le,
                    Sense::Eq => microlp::ComparisonOp::Eq,
                    Sense::Ge => microlp::ComparisonOp::Ge,
                };
                let expr: microlp::LinearExpr = row.coeffs.iter().map(|&(j, v)| (vars[j], v)).collect();
                model.add_constraint(expr, op, row.rhs);
            }
            let (status, primal) = match model.solve() {
                Ok(outcome) => match outcome.solution() {
                    Some(sol) => (SolveStatus::Optimal, vars.iter().map(|&v| sol.var_value(v)).collect()),
                    None => (SolveStatus::IterationLimit, vec![0.0; p.n_cols()]),
                },
                Err(microlp::Error::Infeasible) => (SolveStatus::Infeasible, vec![0.0; p.n_cols()]),
                Err(microlp::Error::Unbounded) => (SolveStatus::Unbounded, vec![0.0; p.n_cols()]),
                Err(e) => return Err(LpError::External(e.to_string())),
            };
            let col_status = primal
                .iter()
                .enumerate()
                .map(|(j, &x): (usize, &f64)| {
                    if x == p.lower()[j] {
                        BasisStatus::AtLower
                    } else if x == p.upper()[j] {
                        BasisStatus::AtUpper
                    } else {
                        BasisStatus::Basic
                    }
                })
                .collect();
            Ok(SolveResult {
                status,
                objective: p.objective_value(&primal),
                primal,
                row_duals: vec![f64::NAN; p.n_rows()],
                bound_duals: vec![f64::NAN; p.n_cols()],
                col_status,
                row_status: vec![BasisStatus::Basic; p.n_rows()],
                diagnostics: Diagnostics::default(),
            })
        }
    }
}
