//! Bounded-variable primal revised simplex.
//!
//! Every row `i` gets a logical variable `r_i = aᵢᵀx` whose bounds encode the sense
//! (`≤ b`: `(-∞, b]`, `≥ b`: `[b, ∞)`, `= b`: `[b, b]`), so the system is `[A  -I] (x, r) = 0`
//! and the starting basis is all logicals. Phase 1 minimizes the sum of bound violations of the
//! basic variables; phase 2 minimizes `cᵀx`. Pricing is Dantzig (largest reduced cost, lowest
//! index on ties) or Bland (lowest eligible index). Dantzig falls back to Bland after a run of
//! degenerate pivots and returns once the objective moves again. The ratio test is Harris'
//! two-pass rule with ties broken towards the lowest variable index.

use crate::lu::{Eta, LuFactors};
use crate::{BasisStatus, PivotRule, SolveOptions, SolveStatus};

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

/// Column-major problem data handed to the simplex.
#[derive(Debug, Clone, Default)]
pub(crate) struct StandardForm {
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: Vec<f64>,
    pub col_status: Vec<BasisStatus>,
    pub row_status: Vec<BasisStatus>,
    pub iterations: usize,
    pub refactorizations: usize,
    pub phase: u8,
    pub infeasibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NonBasic {
    Lower,
    Upper,
    Free,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    opts: &'a SolveOptions,
    m: usize,
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<usize>,
    state: Vec<NonBasic>,
    lu: LuFactors,
    etas: Vec<Eta>,
    iterations: usize,
    refactorizations: usize,
    // scratch
    work_m: Vec<f64>,
    work_m2: Vec<f64>,
}

fn scaled_tol(tol: f64, bound: f64) -> f64 {
    if bound.is_finite() {
        tol * bound.abs().max(1.0)
    } else {
        tol
    }
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm, opts: &'a SolveOptions) -> Self {
        let m = sf.m;
        let n = sf.cols.len();
        let mut lo = sf.lower.clone();
        lo.extend_from_slice(&sf.row_lower);
        let mut hi = sf.upper.clone();
        hi.extend_from_slice(&sf.row_upper);
        let mut x = vec![0.0; n + m];
        let mut state = vec![NonBasic::Lower; n + m];
        for j in 0..n {
            (x[j], state[j]) = if lo[j].is_finite() {
                (lo[j], NonBasic::Lower)
            } else if hi[j].is_finite() {
                (hi[j], NonBasic::Upper)
            } else {
                (0.0, NonBasic::Free)
            };
        }
        let head: Vec<usize> = (n..n + m).collect();
        let mut pos = vec![NONE; n + m];
        for (p, &v) in head.iter().enumerate() {
            pos[v] = p;
        }
        Simplex {
            sf,
            opts,
            m,
            n,
            lo,
            hi,
            x,
            head,
            pos,
            state,
            lu: LuFactors::default(),
            etas: Vec::new(),
            iterations: 0,
            refactorizations: 0,
            work_m: vec![0.0; m],
            work_m2: vec![0.0; m],
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.sf.cols[j].clone()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.sf.cost[j]
        } else {
            0.0
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            NonBasic::Lower => self.lo[j],
            NonBasic::Upper => self.hi[j],
            NonBasic::Free => 0.0,
        }
    }

    /// Refactorizes the basis, swapping in logicals for any columns that turn out singular.
    fn refactor(&mut self) {
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.column(j)).collect();
            self.refactorizations += 1;
            match LuFactors::factorize(self.m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    break;
                }
                Err(s) => {
                    for (&p, &row) in s.positions.iter().zip(&s.rows) {
                        let out = self.head[p];
                        self.pos[out] = NONE;
                        self.state[out] = if self.lo[out].is_finite() {
                            NonBasic::Lower
                        } else if self.hi[out].is_finite() {
                            NonBasic::Upper
                        } else {
                            NonBasic::Free
                        };
                        self.x[out] = self.nonbasic_value(out);
                        let logical = self.n + row;
                        self.head[p] = logical;
                        self.pos[logical] = p;
                    }
                }
            }
        }
        self.etas.clear();
        self.recompute_basic_values();
    }

    fn recompute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.pos[j] != NONE {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                if j < self.n {
                    for &(i, a) in &self.sf.cols[j] {
                        rhs[i] -= a * v;
                    }
                } else {
                    rhs[j - self.n] += v;
                }
            }
        }
        let mut xb = vec![0.0; self.m];
        self.ftran(&mut rhs, &mut xb);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn ftran(&self, b: &mut [f64], out: &mut [f64]) {
        self.lu.ftran(b, out);
        for eta in &self.etas {
            eta.apply(out);
        }
    }

    fn btran(&self, c: &mut [f64], out: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            eta.apply_transposed(c);
        }
        self.lu.btran(c, out);
    }

    fn feas_tol(&self, j: usize, bound: f64) -> f64 {
        let _ = j;
        scaled_tol(self.opts.feas_tol, bound)
    }

    /// Phase-1 cost of basic variable `j`: -1 below its lower bound, +1 above its upper bound.
    fn infeasibility_cost(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - self.feas_tol(j, self.lo[j]) {
            -1.0
        } else if v > self.hi[j] + self.feas_tol(j, self.hi[j]) {
            1.0
        } else {
            0.0
        }
    }

    fn total_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| {
                let v = self.x[j];
                if v < self.lo[j] - self.feas_tol(j, self.lo[j]) {
                    self.lo[j] - v
                } else if v > self.hi[j] + self.feas_tol(j, self.hi[j]) {
                    v - self.hi[j]
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn duals(&mut self, phase1: bool) -> Vec<f64> {
        let mut cb = vec![0.0; self.m];
        for (p, &j) in self.head.iter().enumerate() {
            cb[p] = if phase1 { self.infeasibility_cost(j) } else { self.cost(j) };
        }
        let mut y = vec![0.0; self.m];
        self.btran(&mut cb, &mut y);
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost(j) };
        if j < self.n {
            c - self.sf.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
        } else {
            c + y[j - self.n]
        }
    }

    /// Picks the entering variable and its direction (+1 increase, -1 decrease).
    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            if self.pos[j] != NONE || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j, y, phase1);
            let dir = match self.state[j] {
                NonBasic::Lower if d < -tol => 1.0,
                NonBasic::Upper if d > tol => -1.0,
                NonBasic::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, b)| d.abs() > b) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Harris two-pass ratio test. Returns `(position, step, leaves_at_upper)`.
    fn ratio_test(&self, w: &[f64], dir: f64, phase1: bool) -> Option<(usize, f64, bool)> {
        // Per basic position: distance to the relevant breakpoint and the rate of approach.
        let breakpoint = |p: usize| -> Option<(f64, f64, bool, f64)> {
            let wp = w[p];
            if wp.abs() <= PIVOT_TOL {
                return None;
            }
            let j = self.head[p];
            let delta = -dir * wp;
            let v = self.x[j];
            let (lo, hi) = (self.lo[j], self.hi[j]);
            let (tl, th) = (self.feas_tol(j, lo), self.feas_tol(j, hi));
            if delta < 0.0 {
                if phase1 && v > hi + th {
                    Some((v - hi, -delta, true, th))
                } else if v < lo - tl || lo == f64::NEG_INFINITY {
                    None
                } else {
                    Some(((v - lo).max(0.0), -delta, false, tl))
                }
            } else if phase1 && v < lo - tl {
                Some((lo - v, delta, false, tl))
            } else if v > hi + th || hi == f64::INFINITY {
                None
            } else {
                Some(((hi - v).max(0.0), delta, true, th))
            }
        };
        let mut bound = f64::INFINITY;
        for p in 0..self.m {
            if let Some((dist, rate, _, tol)) = breakpoint(p) {
                bound = bound.min((dist + tol) / rate);
            }
        }
        if bound == f64::INFINITY {
            return None;
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for p in 0..self.m {
            if let Some((dist, rate, at_upper, _)) = breakpoint(p) {
                let ratio = dist / rate;
                if ratio <= bound {
                    let better = match best {
                        None => true,
                        Some((bp, _, _, brate)) => {
                            rate > brate || (rate == brate && self.head[p] < self.head[bp])
                        }
                    };
                    if better {
                        best = Some((p, ratio, at_upper, rate));
                    }
                }
            }
        }
        best.map(|(p, ratio, at_upper, _)| (p, ratio, at_upper))
    }

    fn run(&mut self) -> RawSolution {
        self.refactor();
        let max_iter = self.opts.max_iter.unwrap_or(20_000 + 50 * (self.n + self.m));
        let mut degenerate_run = 0usize;
        let status;
        let mut phase1;
        let mut verified = false;
        loop {
            if self.etas.len() >= self.opts.refactor_period {
                self.refactor();
            }
            phase1 = self.total_infeasibility() > 0.0;
            if self.iterations >= max_iter {
                status = SolveStatus::IterationLimit;
                break;
            }
            let bland = self.opts.pivot_rule == PivotRule::Bland || degenerate_run >= DEGENERATE_RUN;
            let y = self.duals(phase1);
            let Some((q, dir)) = self.price(&y, phase1, bland) else {
                // Confirm on a fresh factorization before declaring the outcome.
                if !verified && !self.etas.is_empty() {
                    self.refactor();
                    verified = true;
                    continue;
                }
                status = if phase1 { SolveStatus::Infeasible } else { SolveStatus::Optimal };
                break;
            };
            verified = false;
            self.iterations += 1;

            let mut b = std::mem::take(&mut self.work_m);
            let mut w = std::mem::take(&mut self.work_m2);
            b.iter_mut().for_each(|v| *v = 0.0);
            if q < self.n {
                for &(i, a) in &self.sf.cols[q] {
                    b[i] = a;
                }
            } else {
                b[q - self.n] = -1.0;
            }
            self.ftran(&mut b, &mut w);

            let flip = self.hi[q] - self.lo[q];
            let leave = self.ratio_test(&w, dir, phase1);
            let step = match leave {
                Some((_, t, _)) if t < flip => t,
                _ if flip.is_finite() => flip,
                Some((_, t, _)) => t,
                None => {
                    self.work_m = b;
                    self.work_m2 = w;
                    if phase1 {
                        // Numerical trouble: a phase-1 ray always meets a breakpoint.
                        self.refactor();
                        degenerate_run = DEGENERATE_RUN;
                        continue;
                    }
                    status = SolveStatus::Unbounded;
                    break;
                }
            };
            if step > 0.0 {
                for p in 0..self.m {
                    if w[p] != 0.0 {
                        self.x[self.head[p]] -= dir * step * w[p];
                    }
                }
                self.x[q] += dir * step;
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }

            match leave {
                Some((p, t, at_upper)) if t < flip => {
                    let out = self.head[p];
                    self.x[out] = if at_upper { self.hi[out] } else { self.lo[out] };
                    self.state[out] = if at_upper { NonBasic::Upper } else { NonBasic::Lower };
                    self.pos[out] = NONE;
                    self.head[p] = q;
                    self.pos[q] = p;
                    self.etas.push(Eta::new(p, &w));
                }
                _ => {
                    // Bound flip of the entering variable.
                    self.state[q] = if dir > 0.0 { NonBasic::Upper } else { NonBasic::Lower };
                    self.x[q] = self.nonbasic_value(q);
                }
            }
            self.work_m = b;
            self.work_m2 = w;
        }

        if status == SolveStatus::Optimal && self.etas.is_empty() {
            self.recompute_basic_values();
        } else if status == SolveStatus::Optimal {
            self.refactor();
        }
        let infeasibility = self.total_infeasibility();
        let y = self.duals(false);
        let total = self.n + self.m;
        let mut d = vec![0.0; total];
        for j in 0..total {
            if self.pos[j] == NONE {
                d[j] = self.reduced_cost(j, &y, false);
            }
        }
        let status_of = |j: usize| -> BasisStatus {
            if self.pos[j] != NONE {
                return BasisStatus::Basic;
            }
            if self.lo[j] == self.hi[j] {
                return if d[j] >= 0.0 { BasisStatus::AtLower } else { BasisStatus::AtUpper };
            }
            match self.state[j] {
                NonBasic::Lower => BasisStatus::AtLower,
                NonBasic::Upper => BasisStatus::AtUpper,
                NonBasic::Free => BasisStatus::Free,
            }
        };
        RawSolution {
            status,
            x: self.x[..self.n].to_vec(),
            y,
            d: d[..self.n].to_vec(),
            col_status: (0..self.n).map(status_of).collect(),
            row_status: (self.n..total).map(status_of).collect(),
            iterations: self.iterations,
            refactorizations: self.refactorizations,
            phase: if phase1 { 1 } else { 2 },
            infeasibility,
        }
    }
}

pub(crate) fn solve_standard(sf: &StandardForm, opts: &SolveOptions) -> RawSolution {
    if sf.m == 0 {
        return solve_unconstrained(sf);
    }
    Simplex::new(sf, opts).run()
}

/// Each column independently at its cheaper bound.
fn solve_unconstrained(sf: &StandardForm) -> RawSolution {
    let n = sf.cols.len();
    let mut status = SolveStatus::Optimal;
    let mut x = vec![0.0; n];
    let mut col_status = vec![BasisStatus::AtLower; n];
    for j in 0..n {
        let (c, l, u) = (sf.cost[j], sf.lower[j], sf.upper[j]);
        (x[j], col_status[j]) = if c > 0.0 || (c == 0.0 && l.is_finite()) {
            (l, BasisStatus::AtLower)
        } else if c < 0.0 || u.is_finite() {
            (u, BasisStatus::AtUpper)
        } else {
            (0.0, BasisStatus::Free)
        };
        if !x[j].is_finite() {
            status = SolveStatus::Unbounded;
            x[j] = 0.0;
        }
        if l == u {
            col_status[j] = if c >= 0.0 { BasisStatus::AtLower } else { BasisStatus::AtUpper };
        }
    }
    RawSolution {
        status,
        x,
        y: Vec::new(),
        d: sf.cost.clone(),
        col_status,
        row_status: Vec::new(),
        iterations: 0,
        refactorizations: 0,
        phase: 2,
        infeasibility: 0.0,
    }
}
