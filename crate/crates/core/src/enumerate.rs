//! Set partitions of a small horizon and the zero-error census over all of them.

use std::fmt;

use basis_lp::SolveOptions;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{hourly_signatures, SignatureMode, DEFAULT_DUAL_STEP};
use crate::error::CoreError;
use crate::psom::{build_aggregated, build_full, solve_optimal, ModelOptions, ModelVariant, RepresentativePeriod, RepresentativePeriods};
use crate::system::{GeneratorKind, ValidatedCase};

pub const MAX_STIRLING_N: usize = 20;
pub const MAX_ENUMERATION_N: usize = 15;

/// `S(n, k)`, the number of partitions of `n` items into `k` nonempty blocks.
pub fn stirling(n: usize, k: usize) -> Result<u128, CoreError> {
    if n > MAX_STIRLING_N || k > n {
        return Err(CoreError::OutOfRange(format!("stirling({n}, {k}) needs 0 <= k <= n <= {MAX_STIRLING_N}")));
    }
    Ok(stirling_row(n)[k])
}

fn stirling_row(n: usize) -> Vec<u128> {
    let mut row = vec![1u128];
    for m in 1..=n {
        let mut next = vec![0u128; m + 1];
        for k in 1..=m {
            let stay = if k < m { k as u128 * row[k] } else { 0 };
            next[k] = stay + row[k - 1];
        }
        row = next;
    }
    row
}

/// `B(n) = Σ_k S(n, k)`.
pub fn bell(n: usize) -> Result<u128, CoreError> {
    if n > MAX_STIRLING_N {
        return Err(CoreError::OutOfRange(format!("bell({n}) needs n <= {MAX_STIRLING_N}")));
    }
    Ok(stirling_row(n).iter().sum())
}

/// Restricted-growth string: `rgs[0] = 0` and `rgs[i] <= 1 + max(rgs[..i])`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SetPartition {
    rgs: Vec<u8>,
    n_blocks: usize,
}

impl SetPartition {
    pub fn from_rgs(rgs: Vec<u8>) -> Result<Self, CoreError> {
        let mut blocks = 0usize;
        for (i, &b) in rgs.iter().enumerate() {
            if b as usize > blocks {
                return Err(CoreError::InvalidInput(format!("position {} opens block {} before block {}", i + 1, b, blocks)));
            }
            blocks = blocks.max(b as usize + 1);
        }
        Ok(SetPartition { rgs, n_blocks: blocks })
    }

    /// Canonical partition assigning each item the block of its label, blocks ordered by first item.
    /// At most 256 distinct labels.
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Self {
        let mut seen: Vec<&T> = Vec::new();
        let rgs = labels
            .iter()
            .map(|l| match seen.iter().position(|s| *s == l) {
                Some(i) => i as u8,
                None => {
                    seen.push(l);
                    (seen.len() - 1) as u8
                }
            })
            .collect();
        SetPartition { rgs, n_blocks: seen.len() }
    }

    pub fn rgs(&self) -> &[u8] {
        &self.rgs
    }

    pub fn n(&self) -> usize {
        self.rgs.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks];
        for (i, &b) in self.rgs.iter().enumerate() {
            out[b as usize].push(i);
        }
        out
    }
}

/// Blocks with 1-indexed items, e.g. `{1,2}{3}`.
impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.blocks() {
            let items: Vec<String> = block.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, "{{{}}}", items.join(","))?;
        }
        Ok(())
    }
}

/// Whether every block of `p` lies inside a block of `q`.
pub fn is_refinement(p: &SetPartition, q: &SetPartition) -> bool {
    refines(&p.rgs, p.n_blocks, &q.rgs)
}

fn refines(p: &[u8], p_blocks: usize, q: &[u8]) -> bool {
    if p.len() != q.len() {
        return false;
    }
    let mut owner = vec![u8::MAX; p_blocks];
    p.iter().zip(q).all(|(&a, &b)| {
        let o = &mut owner[a as usize];
        if *o == u8::MAX {
            *o = b;
        }
        *o == b
    })
}

/// Lexicographic stream of restricted-growth strings extending a fixed prefix.
#[derive(Debug, Clone)]
pub struct PartitionIter {
    rgs: Vec<u8>,
    /// `max(rgs[..=i]) + 1` for each `i`.
    blocks: Vec<u8>,
    fixed: usize,
    k: Option<usize>,
    started: bool,
    done: bool,
}

impl PartitionIter {
    fn with_prefix(prefix: &[u8], n: usize, k: Option<usize>) -> Self {
        let mut rgs = prefix.to_vec();
        rgs.resize(n, 0);
        let mut blocks = Vec::with_capacity(n);
        let mut m = 0u8;
        for &b in &rgs {
            m = m.max(b + 1);
            blocks.push(m);
        }
        PartitionIter { rgs, blocks, fixed: prefix.len().max(1), k, started: false, done: false }
    }

    fn advance(&mut self) -> bool {
        let n = self.rgs.len();
        let mut i = n;
        while i > self.fixed {
            i -= 1;
            if self.rgs[i] < self.blocks[i - 1] {
                self.rgs[i] += 1;
                self.blocks[i] = self.blocks[i - 1].max(self.rgs[i] + 1);
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.blocks[j] = self.blocks[i];
                }
                return true;
            }
        }
        false
    }

    fn current_blocks(&self) -> usize {
        self.blocks.last().copied().unwrap_or(0) as usize
    }
}

impl Iterator for PartitionIter {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        loop {
            if self.done {
                return None;
            }
            if self.started {
                if !self.advance() {
                    self.done = true;
                    return None;
                }
            } else {
                self.started = true;
            }
            let blocks = self.current_blocks();
            if self.k.is_none_or(|k| k == blocks) {
                return Some(SetPartition { rgs: self.rgs.clone(), n_blocks: blocks });
            }
        }
    }
}

/// All partitions of `n` items (into exactly `k` blocks when given), in lexicographic order.
pub fn enumerate_partitions(n: usize, k: Option<usize>) -> Result<PartitionIter, CoreError> {
    if n > MAX_ENUMERATION_N {
        let count = match k {
            Some(k) => stirling(n.min(MAX_STIRLING_N), k.min(n)).unwrap_or(u128::MAX),
            None => bell(n.min(MAX_STIRLING_N)).unwrap_or(u128::MAX),
        };
        return Err(CoreError::EnumerationGuard { n, count, limit: MAX_ENUMERATION_N });
    }
    Ok(PartitionIter::with_prefix(&[], n, k))
}

/// Per-hour data of a copper-plate dispatch that can be costed without a solver.
#[derive(Debug, Clone)]
struct MeritOrder {
    /// Units sorted by cost: `(cost, p_min, p_max, wind unit index)`.
    units: Vec<(f64, f64, f64, Option<usize>)>,
    nsp_cost: f64,
    demand: Vec<f64>,
    /// `[hour][wind unit]`.
    cf: Vec<Vec<f64>>,
}

impl MeritOrder {
    fn new(case: &ValidatedCase) -> Self {
        let spec = case.spec();
        let mut wind = 0;
        let mut units: Vec<(f64, f64, f64, Option<usize>)> = spec
            .generators
            .iter()
            .map(|g| {
                let w = (g.kind == GeneratorKind::Wind).then(|| {
                    wind += 1;
                    wind - 1
                });
                (g.variable_cost, g.p_min, g.p_max, w)
            })
            .collect();
        units.sort_by(|a, b| a.0.total_cmp(&b.0));
        let k = case.horizon();
        MeritOrder {
            units,
            nsp_cost: spec.nsp_cost,
            demand: (0..k).map(|h| case.demand_at(h).iter().sum()).collect(),
            cf: (0..k).map(|h| case.cf_at(h).to_vec()).collect(),
        }
    }

    /// Optimal cost of one hour with the given demand and capacity factors; `None` if infeasible.
    fn cost(&self, demand: f64, cf: &[f64]) -> Option<f64> {
        let mut left = demand;
        let mut cost = 0.0;
        for &(c, lo, _, _) in &self.units {
            left -= lo;
            cost += c * lo;
        }
        if left < -1e-9 {
            return None;
        }
        for &(c, lo, hi, w) in &self.units {
            let hi = w.map_or(hi, |w| hi * cf[w]);
            if hi < lo {
                return None;
            }
            let take = (hi - lo).min(left).max(0.0);
            left -= take;
            cost += c * take;
        }
        Some(cost + self.nsp_cost * left.max(0.0))
    }

    fn full_cost(&self) -> Option<f64> {
        (0..self.demand.len()).map(|h| self.cost(self.demand[h], &self.cf[h])).sum()
    }

    /// Weighted centroid cost of a partition given as an RGS.
    fn partition_cost(&self, rgs: &[u8], n_blocks: usize, scratch: &mut Scratch) -> Option<f64> {
        scratch.reset(n_blocks, self.cf.first().map_or(0, Vec::len));
        for (h, &b) in rgs.iter().enumerate() {
            let b = b as usize;
            scratch.count[b] += 1;
            scratch.demand[b] += self.demand[h];
            for (s, c) in scratch.cf[b].iter_mut().zip(&self.cf[h]) {
                *s += c;
            }
        }
        let mut total = 0.0;
        for b in 0..n_blocks {
            let w = scratch.count[b] as f64;
            for s in scratch.cf[b].iter_mut() {
                *s /= w;
            }
            total += w * self.cost(scratch.demand[b] / w, &scratch.cf[b])?;
        }
        Some(total)
    }
}

#[derive(Default)]
struct Scratch {
    count: Vec<usize>,
    demand: Vec<f64>,
    cf: Vec<Vec<f64>>,
}

impl Scratch {
    fn reset(&mut self, blocks: usize, winds: usize) {
        self.count.clear();
        self.count.resize(blocks, 0);
        self.demand.clear();
        self.demand.resize(blocks, 0.0);
        self.cf.resize_with(blocks, Vec::new);
        for c in &mut self.cf[..blocks] {
            c.clear();
            c.resize(winds, 0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusOptions {
    /// Relative objective tolerance for calling a clustering error-free.
    pub tol: f64,
    /// Every `sample_every`-th partition of each work unit is also solved with the simplex.
    pub sample_every: u64,
    /// Zero-error exemplars kept per cluster count.
    pub exemplars: usize,
    pub q: f64,
    pub mode: SignatureMode,
    pub solve: SolveOptions,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions {
            tol: 1e-9,
            sample_every: 10_000,
            exemplars: 5,
            q: DEFAULT_DUAL_STEP,
            mode: SignatureMode::Duals,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub k: usize,
    pub n_partitions: u64,
    pub n_zero_error: u64,
    /// Lexicographically smallest zero-error partitions, at most `CensusOptions::exemplars`.
    pub exemplars: Vec<SetPartition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub n: usize,
    pub rows: Vec<CensusRow>,
    pub full_objective: f64,
    /// Hours grouped by the basis of the full solve.
    pub basis_partition: SetPartition,
    pub basis_partition_zero_error: bool,
    pub min_zero_error_k: Option<usize>,
    /// Exactly one zero-error partition has `min_zero_error_k` blocks.
    pub unique_at_min: bool,
    /// Exactly one zero-error partition has as many blocks as the basis partition.
    pub unique_at_basis_k: bool,
    pub n_zero_error: u64,
    /// Zero-error partitions that refine the basis partition.
    pub n_zero_error_refining: u64,
    pub infeasible_partitions: u64,
    pub simplex_checks: u64,
    /// Sampled partitions where the closed-form and simplex objectives differ by more than `tol`.
    pub simplex_mismatches: u64,
}

impl Census {
    pub fn all_zero_error_refine_basis(&self) -> bool {
        self.n_zero_error == self.n_zero_error_refining
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    per_k: Vec<(u64, u64, Vec<SetPartition>)>,
    refining: u64,
    infeasible: u64,
    checks: u64,
    mismatches: u64,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally { per_k: vec![(0, 0, Vec::new()); n + 1], ..Default::default() }
    }

    fn merge(mut self, other: Tally, keep: usize) -> Tally {
        for (a, b) in self.per_k.iter_mut().zip(other.per_k) {
            a.0 += b.0;
            a.1 += b.1;
            a.2.extend(b.2);
            a.2.sort();
            a.2.truncate(keep);
        }
        self.refining += other.refining;
        self.infeasible += other.infeasible;
        self.checks += other.checks;
        self.mismatches += other.mismatches;
        self
    }
}

fn periods_of(case: &ValidatedCase, p: &SetPartition) -> RepresentativePeriods {
    RepresentativePeriods { periods: p.blocks().iter().map(|b| RepresentativePeriod::centroid(case, b, 1)).collect() }
}

/// Solves the aggregated copper-plate model of every partition of the horizon and tallies the
/// error-free ones by cluster count.
pub fn zero_error_census(case: &ValidatedCase, opts: &CensusOptions) -> Result<Census, CoreError> {
    let n = case.horizon();
    if n > MAX_ENUMERATION_N {
        return Err(CoreError::EnumerationGuard { n, count: bell(n.min(MAX_STIRLING_N)).unwrap_or(u128::MAX), limit: MAX_ENUMERATION_N });
    }
    let model = ModelOptions::default();
    let (fp, fim) = build_full(case, ModelVariant::Ed, &model)?;
    let fr = solve_optimal(&fp, &opts.solve, "census full model")?;
    let basis_partition = SetPartition::from_labels(&hourly_signatures(&fp, &fr, &fim, opts.mode, opts.q));

    let merit = MeritOrder::new(case);
    let full = merit.full_cost().ok_or_else(|| CoreError::InvalidInput("census case has an infeasible hour".into()))?;
    if (full - fr.objective).abs() > opts.tol * fr.objective.abs().max(1.0) {
        return Err(CoreError::InvalidInput(format!(
            "closed-form objective {full} disagrees with the simplex objective {}",
            fr.objective
        )));
    }
    let denom = full.abs().max(1.0);
    let sample = opts.sample_every.max(1);

    let prefixes: Vec<Vec<u8>> = {
        let depth = n.min(6);
        PartitionIter::with_prefix(&[], depth, None).map(|p| p.rgs).collect()
    };
    let tally = prefixes
        .par_iter()
        .map(|prefix| -> Result<Tally, CoreError> {
            let mut t = Tally::new(n);
            let mut scratch = Scratch::default();
            for (i, part) in PartitionIter::with_prefix(prefix, n, None).enumerate() {
                let k = part.n_blocks;
                t.per_k[k].0 += 1;
                let Some(agg) = merit.partition_cost(&part.rgs, k, &mut scratch) else {
                    t.infeasible += 1;
                    continue;
                };
                if i as u64 % sample == 0 {
                    let (ap, _) = build_aggregated(case, &periods_of(case, &part), ModelVariant::Ed, &model)?;
                    let ar = solve_optimal(&ap, &opts.solve, "census sample")?;
                    t.checks += 1;
                    if (ar.objective - agg).abs() > opts.tol * denom {
                        t.mismatches += 1;
                    }
                }
                if (agg - full).abs() <= opts.tol * denom {
                    t.per_k[k].1 += 1;
                    if t.per_k[k].2.len() < opts.exemplars {
                        t.per_k[k].2.push(part.clone());
                    }
                    if refines(&part.rgs, k, &basis_partition.rgs) {
                        t.refining += 1;
                    }
                }
            }
            Ok(t)
        })
        .try_reduce(|| Tally::new(n), |a, b| Ok(a.merge(b, opts.exemplars)))?;

    let rows: Vec<CensusRow> = tally
        .per_k
        .into_iter()
        .enumerate()
        .skip(if n == 0 { 0 } else { 1 })
        .map(|(k, (count, zero, exemplars))| CensusRow { k, n_partitions: count, n_zero_error: zero, exemplars })
        .collect();
    let zero_at = |k: usize| rows.iter().find(|r| r.k == k).map_or(0, |r| r.n_zero_error);
    let min_zero_error_k = rows.iter().find(|r| r.n_zero_error > 0).map(|r| r.k);
    let basis_cost = merit.partition_cost(&basis_partition.rgs, basis_partition.n_blocks, &mut Scratch::default());
    Ok(Census {
        n,
        full_objective: full,
        basis_partition_zero_error: basis_cost.is_some_and(|c| (c - full).abs() <= opts.tol * denom),
        unique_at_min: min_zero_error_k.is_some_and(|k| zero_at(k) == 1),
        unique_at_basis_k: zero_at(basis_partition.n_blocks) == 1,
        n_zero_error: rows.iter().map(|r| r.n_zero_error).sum(),
        n_zero_error_refining: tally.refining,
        infeasible_partitions: tally.infeasible,
        simplex_checks: tally.checks,
        simplex_mismatches: tally.mismatches,
        min_zero_error_k,
        basis_partition,
        rows,
    })
}

/// Neutral note on the `k = 3` count for twelve items.
pub const K3_NOTE: &str = "S(12,3) = 86526 by the recurrence, the only value consistent with Bell(12) = 4213597; 8526 is a dropped digit";

/// CSV with one row per cluster count: `clusters,possible_clusterings,clusterings_with_no_error`.
pub fn write_census_csv(census: &Census, path: &std::path::Path) -> Result<(), CoreError> {
    let io = |e: csv::Error| CoreError::Csv { path: path.to_path_buf(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["clusters", "possible_clusterings", "clusterings_with_no_error"]).map_err(io)?;
    for r in &census.rows {
        w.write_record([r.k.to_string(), r.n_partitions.to_string(), r.n_zero_error.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CoreError::Io { path: path.to_path_buf(), source: e })
}
