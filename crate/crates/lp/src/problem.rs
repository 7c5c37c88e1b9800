//! Problem representation: `min cᵀx` subject to sparse rows and column bounds.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::LpError;

/// Row relation between the activity `aᵀx` and the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// Handle of a column (decision variable).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColId(pub usize);

/// Handle of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear program with bounded variables. Every row and column carries a label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    col_labels: Vec<String>,
    rows: Vec<Row>,
    row_labels: Vec<String>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_col(&mut self, label: impl Into<String>, cost: f64, lower: f64, upper: f64) -> ColId {
        self.obj.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.col_labels.push(label.into());
        ColId(self.obj.len() - 1)
    }

    pub fn add_row(
        &mut self,
        label: impl Into<String>,
        coeffs: impl IntoIterator<Item = (ColId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> RowId {
        self.rows.push(Row {
            coeffs: coeffs.into_iter().map(|(c, v)| (c.0, v)).collect(),
            sense,
            rhs,
        });
        self.row_labels.push(label.into());
        RowId(self.rows.len() - 1)
    }

    pub fn n_cols(&self) -> usize {
        self.obj.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.obj
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, id: RowId) -> &Row {
        &self.rows[id.0]
    }

    pub fn col_label(&self, id: ColId) -> &str {
        &self.col_labels[id.0]
    }

    pub fn row_label(&self, id: RowId) -> &str {
        &self.row_labels[id.0]
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn set_cost(&mut self, id: ColId, cost: f64) {
        self.obj[id.0] = cost;
    }

    pub fn set_bounds(&mut self, id: ColId, lower: f64, upper: f64) {
        self.lower[id.0] = lower;
        self.upper[id.0] = upper;
    }

    pub fn set_rhs(&mut self, id: RowId, rhs: f64) {
        self.rows[id.0].rhs = rhs;
    }

    /// Multiplies every coefficient of a row and its right-hand side by `factor`.
    pub fn scale_row(&mut self, id: RowId, factor: f64) {
        let row = &mut self.rows[id.0];
        for (_, v) in &mut row.coeffs {
            *v *= factor;
        }
        row.rhs *= factor;
        if factor < 0.0 {
            row.sense = match row.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    /// Checks the structural invariants and rejects non-finite data.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_cols();
        for j in 0..n {
            let (c, l, u) = (self.obj[j], self.lower[j], self.upper[j]);
            if !c.is_finite() {
                return Err(LpError::NonFinite(format!("objective of {}", self.col_labels[j])));
            }
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::NonFinite(format!("bounds of {}", self.col_labels[j])));
            }
            if l > u {
                return Err(LpError::InvalidBounds {
                    label: self.col_labels[j].clone(),
                    lower: l,
                    upper: u,
                });
            }
        }
        let mut seen = vec![usize::MAX; n];
        for (i, row) in self.rows.iter().enumerate() {
            let label = &self.row_labels[i];
            if row.coeffs.is_empty() {
                return Err(LpError::EmptyRow(label.clone()));
            }
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of {label}")));
            }
            for &(j, v) in &row.coeffs {
                if j >= n {
                    return Err(LpError::ColumnOutOfRange { row: label.clone(), col: j });
                }
                if !v.is_finite() {
                    return Err(LpError::NonFinite(format!("coefficient in {label}")));
                }
                if seen[j] == i {
                    return Err(LpError::DuplicateEntry { row: label.clone(), col: self.col_labels[j].clone() });
                }
                seen[j] = i;
            }
        }
        let mut labels = HashSet::with_capacity(n + self.n_rows());
        for l in self.col_labels.iter().chain(&self.row_labels) {
            if !labels.insert(l.as_str()) {
                return Err(LpError::DuplicateLabel(l.clone()));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Column-major copy of the constraint matrix.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_cols()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                cols[j].push((i, v));
            }
        }
        cols
    }

    /// Writes a free-format, MPS-like dump. Meant for eyeballing, not for other solvers.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "NAME basis-lp")?;
        writeln!(w, "ROWS")?;
        writeln!(w, " N  obj")?;
        for (row, label) in self.rows.iter().zip(&self.row_labels) {
            let tag = match row.sense {
                Sense::Le => "L",
                Sense::Eq => "E",
                Sense::Ge => "G",
            };
            writeln!(w, " {tag}  {label}")?;
        }
        writeln!(w, "COLUMNS")?;
        for (j, col) in self.columns().iter().enumerate() {
            let label = &self.col_labels[j];
            if self.obj[j] != 0.0 {
                writeln!(w, "    {label}  obj  {}", self.obj[j])?;
            }
            for &(i, v) in col {
                writeln!(w, "    {label}  {}  {v}", self.row_labels[i])?;
            }
        }
        writeln!(w, "RHS")?;
        for (row, label) in self.rows.iter().zip(&self.row_labels) {
            if row.rhs != 0.0 {
                writeln!(w, "    rhs  {label}  {}", row.rhs)?;
            }
        }
        writeln!(w, "BOUNDS")?;
        for j in 0..self.n_cols() {
            let (l, u, label) = (self.lower[j], self.upper[j], &self.col_labels[j]);
            if l == u {
                writeln!(w, " FX bnd  {label}  {l}")?;
                continue;
            }
            if l == f64::NEG_INFINITY {
                writeln!(w, " MI bnd  {label}")?;
            } else if l != 0.0 {
                writeln!(w, " LO bnd  {label}  {l}")?;
            }
            if u.is_finite() {
                writeln!(w, " UP bnd  {label}  {u}")?;
            }
        }
        writeln!(w, "ENDATA")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_bad_bounds() {
        let mut p = LpProblem::new();
        let x = p.add_col("x", f64::NAN, 0.0, 1.0);
        p.add_row("r", [(x, 1.0)], Sense::Le, 1.0);
        assert!(matches!(p.validate(), Err(LpError::NonFinite(_))));

        let mut p = LpProblem::new();
        p.add_col("x", 1.0, 2.0, 1.0);
        assert!(matches!(p.validate(), Err(LpError::InvalidBounds { .. })));

        let mut p = LpProblem::new();
        let x = p.add_col("x", 1.0, 0.0, f64::INFINITY);
        p.add_row("r", [(x, f64::INFINITY)], Sense::Le, 1.0);
        assert!(matches!(p.validate(), Err(LpError::NonFinite(_))));
    }

    #[test]
    fn rejects_empty_rows_and_duplicate_labels() {
        let mut p = LpProblem::new();
        p.add_col("x", 1.0, 0.0, 1.0);
        p.add_row("r", [], Sense::Le, 1.0);
        assert!(matches!(p.validate(), Err(LpError::EmptyRow(_))));

        let mut p = LpProblem::new();
        let x = p.add_col("x", 1.0, 0.0, 1.0);
        p.add_row("x", [(x, 1.0)], Sense::Le, 1.0);
        assert!(matches!(p.validate(), Err(LpError::DuplicateLabel(_))));
    }

    #[test]
    fn dump_lists_every_label() {
        let mut p = LpProblem::new();
        let x = p.add_col("p[g=T,k=1]", 24.0, 0.0, 1000.0);
        let y = p.add_col("p[g=W,k=1]", 3.0, 0.0, 40.0);
        p.add_row("balance[i=B1,k=1]", [(x, 1.0), (y, 1.0)], Sense::Eq, 170.2);
        let mut out = Vec::new();
        p.write_dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        for needle in ["p[g=T,k=1]", "p[g=W,k=1]", "balance[i=B1,k=1]", "170.2"] {
            assert!(text.contains(needle), "{needle} missing from dump");
        }
    }
}
