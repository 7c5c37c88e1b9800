//! Sparse LU factorization of a simplex basis, plus the eta file of product-form updates.
//!
//! The factorization is right-looking Gaussian elimination. Pivots are picked from the column
//! with the fewest active entries (singletons first), taking the row with the fewest active
//! entries among those passing a threshold test. Bases coming from per-hour dispatch blocks
//! chained by ramping rows are close to triangular, so fill-in stays small.

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

/// Basis positions that could not be pivoted, and the rows left without a pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

/// Lazily-cleaned buckets of indices keyed by their current count.
struct Buckets {
    lists: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(max: usize) -> Self {
        Self { lists: vec![Vec::new(); max + 2] }
    }

    fn push(&mut self, count: usize, idx: usize) {
        if count >= self.lists.len() {
            self.lists.resize(count + 1, Vec::new());
        }
        self.lists[count].push(idx);
    }

    /// Peeks the live entry with count `c`, discarding stale ones.
    fn peek(&mut self, c: usize, counts: &[usize], done: &[bool]) -> Option<usize> {
        let list = self.lists.get_mut(c)?;
        while let Some(&j) = list.last() {
            if !done[j] && counts[j] == c {
                return Some(j);
            }
            list.pop();
        }
        None
    }
}

impl LuFactors {
    /// Factorizes the square matrix whose columns are `columns` (entries are `(row, value)`).
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut colv: Vec<Vec<(usize, f64)>> = columns
            .iter()
            .map(|c| c.iter().copied().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut rowp: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in colv.iter().enumerate() {
            for &(i, _) in col {
                rowp[i].push(j);
            }
        }
        let mut col_count: Vec<usize> = colv.iter().map(Vec::len).collect();
        let mut row_count: Vec<usize> = rowp.iter().map(Vec::len).collect();
        let mut col_done = vec![false; m];
        let mut row_done = vec![false; m];
        let mut col_buckets = Buckets::new(m);
        let mut row_buckets = Buckets::new(m);
        for j in (0..m).rev() {
            col_buckets.push(col_count[j], j);
            row_buckets.push(row_count[j], j);
        }

        let mut lu = LuFactors {
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        let mut scatter = vec![usize::MAX; m];
        let mut stamp = vec![usize::MAX; m];
        let mut mult: Vec<(usize, f64)> = Vec::new();
        let mut urow: Vec<(usize, f64)> = Vec::new();
        let mut singular_cols = Vec::new();

        for step in 0..m {
            // Pivot choice: column singleton, then row singleton, then sparsest column.
            let mut choice: Option<(usize, usize)> = None;
            if let Some(j) = col_buckets.peek(1, &col_count, &col_done) {
                let (i, v) = colv[j][0];
                if v.abs() > SINGULAR_TOL {
                    choice = Some((i, j));
                }
            }
            if choice.is_none() {
                while let Some(i) = row_buckets.peek(1, &row_count, &row_done) {
                    let j = rowp[i].iter().copied().find(|&j| {
                        !col_done[j] && colv[j].iter().any(|&(r, _)| r == i)
                    });
                    let Some(j) = j else {
                        row_buckets.lists[1].pop();
                        continue;
                    };
                    let cmax = colv[j].iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
                    let v = colv[j].iter().find(|&&(r, _)| r == i).map(|&(_, v)| v).unwrap();
                    if v.abs() >= PIVOT_THRESHOLD * cmax && v.abs() > SINGULAR_TOL {
                        choice = Some((i, j));
                    }
                    break;
                }
            }
            if choice.is_none() {
                let mut c = 1;
                while c < col_buckets.lists.len() {
                    if let Some(j) = col_buckets.peek(c, &col_count, &col_done) {
                        let cmax = colv[j].iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
                        if cmax <= SINGULAR_TOL {
                            col_done[j] = true;
                            singular_cols.push(j);
                            for &(i, _) in &colv[j] {
                                row_count[i] -= 1;
                                row_buckets.push(row_count[i], i);
                            }
                            colv[j].clear();
                            continue;
                        }
                        let (i, _) = colv[j]
                            .iter()
                            .filter(|&&(_, v)| v.abs() >= PIVOT_THRESHOLD * cmax)
                            .min_by_key(|&&(i, _)| (row_count[i], i))
                            .copied()
                            .unwrap();
                        choice = Some((i, j));
                        break;
                    }
                    c += 1;
                }
            }
            let Some((r, c)) = choice else {
                // Remaining columns are empty.
                for j in 0..m {
                    if !col_done[j] {
                        col_done[j] = true;
                        singular_cols.push(j);
                    }
                }
                break;
            };

            let pivot = colv[c].iter().find(|&&(i, _)| i == r).map(|&(_, v)| v).unwrap();
            mult.clear();
            mult.extend(colv[c].iter().filter(|&&(i, _)| i != r).map(|&(i, v)| (i, v / pivot)));

            // Row r entries across the other active columns become the U row.
            urow.clear();
            for &j in &rowp[r] {
                if j == c || col_done[j] || stamp[j] == step {
                    continue;
                }
                stamp[j] = step;
                if let Some(k) = colv[j].iter().position(|&(i, _)| i == r) {
                    let (_, v) = colv[j].swap_remove(k);
                    urow.push((j, v));
                }
            }
            for &(j, arj) in &urow {
                let col = &mut colv[j];
                for (k, &(i, _)) in col.iter().enumerate() {
                    scatter[i] = k;
                }
                for &(i, l) in &mult {
                    let delta = -l * arj;
                    let k = scatter[i];
                    if k < col.len() && col[k].0 == i {
                        col[k].1 += delta;
                    } else {
                        col.push((i, delta));
                        scatter[i] = col.len() - 1;
                        rowp[i].push(j);
                        row_count[i] += 1;
                        row_buckets.push(row_count[i], i);
                    }
                }
                let before = col.len();
                col.retain(|&(i, v)| {
                    let keep = v.abs() > DROP_TOL;
                    if !keep {
                        row_count[i] -= 1;
                    }
                    keep
                });
                for &(i, _) in col.iter() {
                    scatter[i] = usize::MAX;
                }
                if col.len() != before {
                    for &(i, _) in col.iter() {
                        row_buckets.push(row_count[i], i);
                    }
                }
                col_count[j] = col.len();
                col_buckets.push(col_count[j], j);
            }
            // Dropped entries may have emptied rows; re-bucket the touched rows cheaply.
            for &(i, _) in &mult {
                row_count[i] -= 1;
                row_buckets.push(row_count[i], i);
            }
            row_done[r] = true;
            col_done[c] = true;
            colv[c].clear();
            col_count[c] = 0;

            lu.piv_row.push(r);
            lu.piv_col.push(c);
            lu.l_idx.extend(mult.iter().map(|&(i, _)| i));
            lu.l_val.extend(mult.iter().map(|&(_, l)| l));
            lu.l_start.push(lu.l_idx.len());
            lu.u_diag.push(pivot);
            lu.u_idx.extend(urow.iter().map(|&(j, _)| j));
            lu.u_val.extend(urow.iter().map(|&(_, v)| v));
            lu.u_start.push(lu.u_idx.len());
        }

        if !singular_cols.is_empty() || lu.piv_row.len() < m {
            singular_cols.sort_unstable();
            let rows = (0..m).filter(|&i| !row_done[i]).collect();
            return Err(Singular { positions: singular_cols, rows });
        }
        Ok(lu)
    }

    /// Solves `B x = b`. `b` is indexed by row and is consumed; `x` is indexed by basis position.
    pub fn ftran(&self, b: &mut [f64], x: &mut [f64]) {
        for k in 0..self.piv_row.len() {
            let br = b[self.piv_row[k]];
            if br != 0.0 {
                for p in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[p]] -= self.l_val[p] * br;
                }
            }
        }
        for k in (0..self.piv_row.len()).rev() {
            let mut s = b[self.piv_row[k]];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * x[self.u_idx[p]];
            }
            x[self.piv_col[k]] = s / self.u_diag[k];
        }
    }

    /// Solves `Bᵀ y = c`. `c` is indexed by basis position and is consumed; `y` by row.
    pub fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for k in 0..self.piv_row.len() {
            let z = c[self.piv_col[k]] / self.u_diag[k];
            y[self.piv_row[k]] = z;
            if z != 0.0 {
                for p in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[p]] -= self.u_val[p] * z;
                }
            }
        }
        for k in (0..self.piv_row.len()).rev() {
            let r = self.piv_row[k];
            let mut s = y[r];
            for p in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[p] * y[self.l_idx[p]];
            }
            y[r] = s;
        }
    }
}

/// One product-form update: basis position `pos` was replaced by a column whose
/// representation in the previous basis is `w`.
#[derive(Debug, Clone)]
pub(crate) struct Eta {
    pub pos: usize,
    pub pivot: f64,
    pub entries: Vec<(usize, f64)>,
}

impl Eta {
    pub fn new(pos: usize, w: &[f64]) -> Self {
        let entries = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        Eta { pos, pivot: w[pos], entries }
    }

    pub fn apply(&self, x: &mut [f64]) {
        let xr = x[self.pos] / self.pivot;
        x[self.pos] = xr;
        if xr != 0.0 {
            for &(i, w) in &self.entries {
                x[i] -= w * xr;
            }
        }
    }

    pub fn apply_transposed(&self, c: &mut [f64]) {
        let mut s = c[self.pos];
        for &(i, w) in &self.entries {
            s -= w * c[i];
        }
        c[self.pos] = s / self.pivot;
    }
}
