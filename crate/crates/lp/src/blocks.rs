//! Splitting an LP into independent blocks (connected components of the row/column graph).
//!
//! Hourly dispatch models without ramping are a direct sum of one small LP per hour; solving the
//! pieces separately and stitching the results is exact and far cheaper than one big simplex.

use rayon::prelude::*;

use crate::simplex::{solve_standard, RawSolution, StandardForm};
use crate::{BasisStatus, Diagnostics, LpProblem, Sense, SolveOptions, SolveResult, SolveStatus};

struct Block {
    cols: Vec<usize>,
    rows: Vec<usize>,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Components in order of their smallest column index; rows and columns keep their order.
fn components(p: &LpProblem) -> Vec<Block> {
    let n = p.n_cols();
    let mut parent: Vec<usize> = (0..n).collect();
    for row in p.rows() {
        let first = row.coeffs[0].0;
        for &(j, _) in &row.coeffs[1..] {
            let (a, b) = (find(&mut parent, first), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut block_of = vec![usize::MAX; n];
    let mut blocks: Vec<Block> = Vec::new();
    for j in 0..n {
        let root = find(&mut parent, j);
        if block_of[root] == usize::MAX {
            block_of[root] = blocks.len();
            blocks.push(Block { cols: Vec::new(), rows: Vec::new() });
        }
        let b = block_of[root];
        block_of[j] = b;
        blocks[b].cols.push(j);
    }
    for (i, row) in p.rows().iter().enumerate() {
        blocks[block_of[row.coeffs[0].0]].rows.push(i);
    }
    blocks
}

fn row_bounds(sense: Sense, rhs: f64) -> (f64, f64) {
    match sense {
        Sense::Le => (f64::NEG_INFINITY, rhs),
        Sense::Ge => (rhs, f64::INFINITY),
        Sense::Eq => (rhs, rhs),
    }
}

fn standard_form(p: &LpProblem, block: &Block, local_col: &[usize]) -> StandardForm {
    let mut sf = StandardForm {
        m: block.rows.len(),
        cols: vec![Vec::new(); block.cols.len()],
        ..Default::default()
    };
    for &j in &block.cols {
        sf.cost.push(p.objective()[j]);
        sf.lower.push(p.lower()[j]);
        sf.upper.push(p.upper()[j]);
    }
    for (li, &i) in block.rows.iter().enumerate() {
        let row = &p.rows()[i];
        for &(j, v) in &row.coeffs {
            sf.cols[local_col[j]].push((li, v));
        }
        let (lo, hi) = row_bounds(row.sense, row.rhs);
        sf.row_lower.push(lo);
        sf.row_upper.push(hi);
    }
    sf
}

fn whole(p: &LpProblem) -> StandardForm {
    let mut sf = StandardForm {
        m: p.n_rows(),
        cols: p.columns(),
        cost: p.objective().to_vec(),
        lower: p.lower().to_vec(),
        upper: p.upper().to_vec(),
        ..Default::default()
    };
    for row in p.rows() {
        let (lo, hi) = row_bounds(row.sense, row.rhs);
        sf.row_lower.push(lo);
        sf.row_upper.push(hi);
    }
    sf
}

fn combine_status(a: SolveStatus, b: SolveStatus) -> SolveStatus {
    use SolveStatus::*;
    let rank = |s| match s {
        Optimal => 0,
        IterationLimit => 1,
        Unbounded => 2,
        Infeasible => 3,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

pub(crate) fn solve_validated(p: &LpProblem, opts: &SolveOptions) -> SolveResult {
    let (n, m) = (p.n_cols(), p.n_rows());
    let mut result = SolveResult {
        status: SolveStatus::Optimal,
        objective: 0.0,
        primal: vec![0.0; n],
        row_duals: vec![0.0; m],
        bound_duals: vec![0.0; n],
        col_status: vec![BasisStatus::AtLower; n],
        row_status: vec![BasisStatus::Basic; m],
        diagnostics: Diagnostics::default(),
    };

    let blocks = if opts.split_blocks {
        components(p)
    } else {
        vec![Block { cols: (0..n).collect(), rows: (0..m).collect() }]
    };
    let mut local_col = vec![0usize; n];
    for b in &blocks {
        for (lj, &j) in b.cols.iter().enumerate() {
            local_col[j] = lj;
        }
    }
    let solutions: Vec<RawSolution> = if blocks.len() == 1 && blocks[0].cols.len() == n && blocks[0].rows.len() == m {
        vec![solve_standard(&whole(p), opts)]
    } else {
        blocks
            .par_iter()
            .map(|b| solve_standard(&standard_form(p, b, &local_col), opts))
            .collect()
    };

    let mut phase = 2;
    for (b, s) in blocks.iter().zip(&solutions) {
        result.status = combine_status(result.status, s.status);
        for (lj, &j) in b.cols.iter().enumerate() {
            result.primal[j] = s.x[lj];
            result.bound_duals[j] = s.d[lj];
            result.col_status[j] = s.col_status[lj];
        }
        for (li, &i) in b.rows.iter().enumerate() {
            result.row_duals[i] = s.y[li];
            result.row_status[i] = s.row_status[li];
        }
        result.diagnostics.iterations += s.iterations;
        result.diagnostics.refactorizations += s.refactorizations;
        result.diagnostics.primal_infeasibility += s.infeasibility;
        phase = phase.min(s.phase);
    }
    result.diagnostics.blocks = blocks.len();
    result.diagnostics.phase = phase;
    result.objective = p.objective_value(&result.primal);
    result
}
