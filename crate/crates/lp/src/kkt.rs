//! Optimality certificate check that only uses the problem data and the reported vectors.

use serde::{Deserialize, Serialize};

use crate::{LpError, LpProblem, Sense, SolveResult, SolveStatus};

pub const DEFAULT_KKT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest row or bound violation, relative to `max(1, |rhs or bound|)`.
    pub primal_residual: f64,
    /// Largest `|c_j - Σ_i y_i a_ij - z_j|`.
    pub dual_residual: f64,
    /// Largest wrong-signed dual (`y` on inequality rows, `z` on bounds that are infinite).
    pub dual_sign_violation: f64,
    /// Largest product of a multiplier and the slack of its constraint.
    pub complementarity: f64,
    /// `|cᵀx - (bᵀy + Σ z_j·bound_j)| / max(1, |cᵀx|)`.
    pub duality_gap: f64,
    pub tol: f64,
    pub pass: bool,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.primal_residual
            .max(self.dual_residual)
            .max(self.dual_sign_violation)
            .max(self.complementarity)
            .max(self.duality_gap)
    }
}

pub fn check_kkt(p: &LpProblem, r: &SolveResult) -> Result<KktReport, LpError> {
    check_kkt_with_tol(p, r, DEFAULT_KKT_TOL)
}

pub fn check_kkt_with_tol(p: &LpProblem, r: &SolveResult, tol: f64) -> Result<KktReport, LpError> {
    let (n, m) = (p.n_cols(), p.n_rows());
    if r.primal.len() != n || r.bound_duals.len() != n || r.row_duals.len() != m {
        return Err(LpError::DimensionMismatch(format!(
            "problem has {n} columns and {m} rows, result has {} primal, {} bound duals, {} row duals",
            r.primal.len(),
            r.bound_duals.len(),
            r.row_duals.len()
        )));
    }
    if r.status != SolveStatus::Optimal {
        return Err(LpError::NotOptimal(format!("{:?}", r.status)));
    }
    let x = &r.primal;
    let y = &r.row_duals;
    let z = &r.bound_duals;
    let scale = |v: f64| v.abs().max(1.0);

    let mut primal: f64 = 0.0;
    let mut sign: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual_obj = 0.0;
    let activity = p.row_activity(x);
    for (i, row) in p.rows().iter().enumerate() {
        let slack = activity[i] - row.rhs;
        let viol = match row.sense {
            Sense::Eq => slack.abs(),
            Sense::Le => slack.max(0.0),
            Sense::Ge => (-slack).max(0.0),
        };
        primal = primal.max(viol / scale(row.rhs));
        match row.sense {
            Sense::Le => sign = sign.max(y[i]),
            Sense::Ge => sign = sign.max(-y[i]),
            Sense::Eq => {}
        }
        if row.sense != Sense::Eq {
            comp = comp.max(y[i].abs() * slack.abs());
        }
        dual_obj += y[i] * row.rhs;
    }

    let mut reduced: Vec<f64> = p.objective().to_vec();
    for (i, row) in p.rows().iter().enumerate() {
        for &(j, a) in &row.coeffs {
            reduced[j] -= a * y[i];
        }
    }
    let mut dual: f64 = 0.0;
    for j in 0..n {
        let (l, u) = (p.lower()[j], p.upper()[j]);
        dual = dual.max((reduced[j] - z[j]).abs());
        primal = primal.max((l - x[j]).max(0.0) / scale(l));
        primal = primal.max((x[j] - u).max(0.0) / scale(u));
        if z[j] > 0.0 {
            if l.is_finite() {
                comp = comp.max(z[j] * (x[j] - l).abs());
                dual_obj += z[j] * l;
            } else {
                sign = sign.max(z[j]);
            }
        } else if z[j] < 0.0 {
            if u.is_finite() {
                comp = comp.max(-z[j] * (u - x[j]).abs());
                dual_obj += z[j] * u;
            } else {
                sign = sign.max(-z[j]);
            }
        }
    }
    let obj = p.objective_value(x);
    let gap = (obj - dual_obj).abs() / scale(obj);
    let pass = primal < tol && dual < tol && sign < tol && comp < tol && gap < tol;
    Ok(KktReport {
        primal_residual: primal,
        dual_residual: dual,
        dual_sign_violation: sign,
        complementarity: comp,
        duality_gap: gap,
        tol,
        pass,
    })
}
