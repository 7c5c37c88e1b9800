//! Dual-based partitioning of a ramp-linked horizon into inseparable chunks, and grouping of
//! chunks into multi-hour bases.
//!
//! A chunk partition of an optimal solution is exact (solving every chunk on its own and
//! summing reproduces the full objective) if and only if every ramp row that crosses a chunk
//! boundary has a zero dual. The scan below marks hours from marginal costs and ramp duals;
//! the closure pass then merges any two neighbouring chunks whose boundary still carries a
//! nonzero ramp dual, so the returned partition is always exact for the solution it came from.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use basis_lp::{LpProblem, SolveOptions, SolveResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{span_signature, BasisSignature, SignatureMode, DEFAULT_DUAL_STEP};
use crate::error::CoreError;
use crate::psom::{build_window, solve_optimal, IndexMap, ModelOptions, ModelVariant, RepresentativePeriod, RepresentativePeriods};
use crate::system::{GeneratorKind, ValidatedCase};

pub const DEFAULT_DECOMPOSITION_BOUND: i64 = 60;

/// `mc ≈ a·vc_nsp + b·vc_t + c·vc_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McDecomposition {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub residual: f64,
    /// Whether `a + b + c = 1` (one extra MWh delivered in total).
    pub energy_balanced: bool,
}

/// Integer decomposition of a marginal cost.
///
/// Triples with `a + b + c = 1` are tried first; among those within `tol` the one with the
/// smallest `|a| + |b| + |c|` wins, ties going to smaller `|a|`, then smaller `|b|`. When no
/// such triple exists the same rule is applied to all `|b| ≤ bound` with `c` chosen as the
/// nearest integer. `a` ranges over `{-1, 0, 1}`; `a = -1` covers negative prices, where one
/// more MWh avoids a unit of shortage elsewhere.
pub fn decompose_mc(mc: f64, vc_nsp: f64, vc_t: f64, vc_w: f64, tol: f64) -> Result<McDecomposition, CoreError> {
    decompose_mc_bounded(mc, vc_nsp, vc_t, vc_w, tol, DEFAULT_DECOMPOSITION_BOUND)
}

pub fn decompose_mc_bounded(
    mc: f64,
    vc_nsp: f64,
    vc_t: f64,
    vc_w: f64,
    tol: f64,
    bound: i64,
) -> Result<McDecomposition, CoreError> {
    if !(vc_nsp > vc_t && vc_t > vc_w && vc_w >= 0.0) {
        return Err(CoreError::OutOfRange(format!("costs must satisfy nsp > thermal > wind >= 0, got {vc_nsp}, {vc_t}, {vc_w}")));
    }
    if !mc.is_finite() {
        return Err(CoreError::NoDecomposition { mc });
    }
    let eval = |a: i64, b: i64, c: i64| mc - (a as f64 * vc_nsp + b as f64 * vc_t + c as f64 * vc_w);
    let key = |d: &McDecomposition| (d.a.abs() + d.b.abs() + d.c.abs(), d.a.abs(), d.b.abs());
    let mut best: Option<McDecomposition> = None;
    let offer = |best: &mut Option<McDecomposition>, d: McDecomposition| {
        if d.residual.abs() <= tol && best.as_ref().is_none_or(|b| key(&d) < key(b)) {
            *best = Some(d);
        }
    };
    for a in -1..=1i64 {
        let b = ((mc - vc_w - a as f64 * (vc_nsp - vc_w)) / (vc_t - vc_w)).round();
        if b.abs() <= bound as f64 {
            let b = b as i64;
            let c = 1 - a - b;
            offer(&mut best, McDecomposition { a, b, c, residual: eval(a, b, c), energy_balanced: true });
        }
    }
    if let Some(d) = best {
        return Ok(d);
    }
    for a in -1..=1i64 {
        for b in -bound..=bound {
            let rest = mc - a as f64 * vc_nsp - b as f64 * vc_t;
            let c = if vc_w > 0.0 { (rest / vc_w).round() as i64 } else { 0 };
            offer(&mut best, McDecomposition { a, b, c, residual: eval(a, b, c), energy_balanced: a + b + c == 1 });
        }
    }
    best.ok_or(CoreError::NoDecomposition { mc })
}

/// Nearest multiple of `vc_t` to `mc`, at least 1.
pub fn ramp_length(mc: f64, vc_t: f64) -> usize {
    let l = (mc / vc_t).round();
    if l.is_finite() && l >= 1.0 {
        l as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthRule {
    /// `round(mc / vc_t)`.
    NearestMultiple,
    /// The `b` coefficient of [`decompose_mc`].
    DecompositionB,
}

impl fmt::Display for LengthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LengthRule::NearestMultiple => "nearest_multiple",
            LengthRule::DecompositionB => "decomposition_b",
        })
    }
}

impl FromStr for LengthRule {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest_multiple" => Ok(LengthRule::NearestMultiple),
            "decomposition_b" => Ok(LengthRule::DecompositionB),
            _ => Err(CoreError::InvalidInput(format!("unknown length rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    /// Step for comparing marginal costs and testing duals against zero.
    pub q: f64,
    pub decomposition_tol: f64,
    pub length_rule: LengthRule,
    /// Merge neighbouring chunks whose shared ramp rows have a nonzero dual.
    pub closure: bool,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            q: DEFAULT_DUAL_STEP,
            decomposition_tol: 1e-6,
            length_rule: LengthRule::NearestMultiple,
            closure: true,
        }
    }
}

/// The cost levels the scan compares marginal costs against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostLevels {
    pub nsp: f64,
    pub thermal: f64,
    pub wind: f64,
}

impl CostLevels {
    /// First ramp-limited thermal unit and cheapest wind unit of the case.
    pub fn from_case(case: &ValidatedCase) -> Result<Self, CoreError> {
        let spec = case.spec();
        let thermal = spec
            .generators
            .iter()
            .find(|g| g.kind == GeneratorKind::Thermal && g.is_ramp_limited())
            .ok_or_else(|| CoreError::InvalidInput("partitioning needs a ramp-limited thermal unit".into()))?;
        let wind = spec
            .wind_units()
            .map(|(_, g)| g.variable_cost)
            .reduce(f64::min)
            .ok_or_else(|| CoreError::InvalidInput("partitioning needs a wind unit".into()))?;
        Ok(CostLevels { nsp: spec.nsp_cost, thermal: thermal.variable_cost, wind })
    }
}

/// Per-hour dual information the scan reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSeries {
    /// Balance duals, `[hour][node]`.
    pub mc: Vec<Vec<f64>>,
    /// Largest `|dual|` over ramp-up rows linking `hour - 1` to `hour`; 0 at hour 0.
    pub ramp_up: Vec<f64>,
    pub ramp_down: Vec<f64>,
    /// Largest wind availability dual (negated reduced cost at the upper bound), `>= 0`.
    pub wind: Vec<f64>,
}

impl DualSeries {
    pub fn from_solution(case: &ValidatedCase, r: &SolveResult, im: &IndexMap) -> Self {
        let wind_cols: Vec<usize> =
            case.spec().generators.iter().enumerate().filter(|(_, g)| g.kind == GeneratorKind::Wind).map(|(i, _)| i).collect();
        let largest = |rows: &[Option<basis_lp::RowId>]| rows.iter().flatten().map(|id| r.row_duals[id.0].abs()).fold(0.0, f64::max);
        let mut s = DualSeries { mc: vec![], ramp_up: vec![], ramp_down: vec![], wind: vec![] };
        for at in &im.positions {
            s.mc.push(at.balance.iter().map(|id| r.row_duals[id.0]).collect());
            s.ramp_up.push(largest(&at.ramp_up));
            s.ramp_down.push(largest(&at.ramp_down));
            s.wind.push(wind_cols.iter().map(|&g| (-r.bound_duals[at.gen[g].0]).max(0.0)).fold(0.0, f64::max));
        }
        s
    }

    pub fn horizon(&self) -> usize {
        self.mc.len()
    }
}

/// Contiguous run of source hours.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub length: usize,
    /// A search inside the scan hit the first or last hour and was clamped there.
    pub boundary_truncated: bool,
    /// Contains an hour whose marginal cost had no integer decomposition.
    pub undecomposable: bool,
    /// Produced or enlarged by the closure pass.
    pub merged_by_closure: bool,
}

impl Chunk {
    pub fn end(&self) -> usize {
        self.start + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionOutcome {
    pub chunks: Vec<Chunk>,
    pub boundary_truncations: usize,
    pub undecomposable_hours: usize,
    /// Non-separable hours for which neither ramp branch applied.
    pub unlinked_hours: usize,
    /// Hours where the two length rules give different lengths.
    pub length_rule_disagreements: usize,
    pub closure_merges: usize,
}

/// Runs the scan on the dual series of a ramping model.
pub fn partition_duals(s: &DualSeries, costs: CostLevels, opts: &PartitionOptions) -> PartitionOutcome {
    let k = s.horizon();
    let q = opts.q;
    let near = |x: f64, y: f64| (x - y).abs() <= q;
    let separable = |t: usize| s.mc[t].iter().all(|&m| near(m, costs.thermal) || near(m, costs.wind));
    let is_nsp = |t: usize| s.mc[t].iter().any(|&m| near(m, costs.nsp));

    let mut marked = vec![false; k];
    let mut truncated = vec![false; k];
    let mut undecomposable = vec![false; k];
    let mut out = PartitionOutcome {
        chunks: vec![],
        boundary_truncations: 0,
        undecomposable_hours: 0,
        unlinked_hours: 0,
        length_rule_disagreements: 0,
        closure_merges: 0,
    };
    let mark = |lo: usize, hi: usize, flag: bool, marked: &mut Vec<bool>, truncated: &mut Vec<bool>| {
        for h in lo..=hi {
            marked[h] = true;
            truncated[h] |= flag;
        }
    };

    let mut t = 0;
    while t < k {
        if separable(t) {
            t += 1;
            continue;
        }
        let m = s.mc[t].iter().copied().find(|&m| !(near(m, costs.thermal) || near(m, costs.wind))).unwrap_or(s.mc[t][0]);
        if m < -q {
            let found = (t + 1..k).find(|&u| is_nsp(u));
            let hi = found.unwrap_or(k - 1);
            out.boundary_truncations += found.is_none() as usize;
            mark(t, hi, found.is_none(), &mut marked, &mut truncated);
            t = hi + 1;
        } else if near(m, costs.nsp) {
            let found = (t + 1..k).find(|&u| separable(u));
            let hi = found.unwrap_or(k - 1);
            out.boundary_truncations += found.is_none() as usize;
            mark(t, hi, found.is_none(), &mut marked, &mut truncated);
            t += 1;
        } else {
            let nearest = ramp_length(m, costs.thermal);
            let dec = decompose_mc(m, costs.nsp, costs.thermal, costs.wind, opts.decomposition_tol);
            let by_b = dec.as_ref().ok().map(|d| d.b.max(1) as usize);
            if by_b.is_some_and(|b| b != nearest) {
                out.length_rule_disagreements += 1;
            }
            let l = match (opts.length_rule, by_b) {
                (LengthRule::NearestMultiple, _) => Some(nearest),
                (LengthRule::DecompositionB, b) => b,
            };
            let Some(l) = l.filter(|_| dec.is_ok()) else {
                // No integer structure to read a length from: join the nearest separable hours.
                out.undecomposable_hours += 1;
                undecomposable[t] = true;
                let lo = (0..t).rev().find(|&u| separable(u)).unwrap_or(0);
                let hi = (t + 1..k).find(|&u| separable(u)).unwrap_or(k - 1);
                mark(lo, hi, false, &mut marked, &mut truncated);
                t += 1;
                continue;
            };
            if t >= 1 && s.ramp_up[t] > q {
                let target = (t + 1).saturating_sub(l);
                let found = (0..=target).rev().find(|&u| s.wind[u] > q);
                let lo = found.unwrap_or(0);
                out.boundary_truncations += found.is_none() as usize;
                mark(lo, t, found.is_none(), &mut marked, &mut truncated);
                t += 1;
            } else if t >= 1 && s.ramp_down[t] > q {
                let target = (t + l - 1).min(k - 1);
                let found = (target..k).find(|&u| s.wind[u] > q);
                let hi = found.unwrap_or(k - 1);
                out.boundary_truncations += found.is_none() as usize;
                mark(t, hi, found.is_none(), &mut marked, &mut truncated);
                t = hi.max(t) + 1;
            } else {
                out.unlinked_hours += 1;
                t += 1;
            }
        }
    }

    let mut h = 0;
    while h < k {
        let mut end = h + 1;
        if marked[h] {
            while end < k && marked[end] {
                end += 1;
            }
        }
        out.chunks.push(Chunk {
            start: h,
            length: end - h,
            boundary_truncated: truncated[h..end].iter().any(|&x| x),
            undecomposable: undecomposable[h..end].iter().any(|&x| x),
            merged_by_closure: false,
        });
        h = end;
    }

    if opts.closure {
        let mut merged: Vec<Chunk> = Vec::with_capacity(out.chunks.len());
        for c in out.chunks.drain(..) {
            match merged.last_mut() {
                Some(prev) if s.ramp_up[c.start] > q || s.ramp_down[c.start] > q => {
                    prev.length += c.length;
                    prev.boundary_truncated |= c.boundary_truncated;
                    prev.undecomposable |= c.undecomposable;
                    prev.merged_by_closure = true;
                    out.closure_merges += 1;
                }
                _ => merged.push(c),
            }
        }
        out.chunks = merged;
    }
    out
}

/// Partitions the horizon of a solved ramping model.
pub fn partition_horizon(
    case: &ValidatedCase,
    r: &SolveResult,
    im: &IndexMap,
    opts: &PartitionOptions,
) -> Result<PartitionOutcome, CoreError> {
    if !im.variant.has_ramping() {
        return Err(CoreError::VariantRequirement {
            variant: im.variant.to_string(),
            reason: "partitioning reads ramp duals".into(),
        });
    }
    if im.periods.len() != 1 {
        return Err(CoreError::InvalidInput("partitioning expects the full hourly model".into()));
    }
    let costs = CostLevels::from_case(case)?;
    Ok(partition_duals(&DualSeries::from_solution(case, r, im), costs, opts))
}

/// Result of solving one chunk as a model of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkCheck {
    pub start: usize,
    pub length: usize,
    pub chunk_objective: f64,
    /// Cost of the full solution over the same hours.
    pub full_span_cost: f64,
    pub pass: bool,
    /// Largest KKT residual of the chunk solve.
    pub kkt_residual: f64,
}

/// Solves every chunk on its own and compares with the full solution's cost on the same hours.
/// Since the full solution restricted to a chunk is feasible for it, the chunk optimum can only
/// be lower; the check fails when it is lower by more than `tol` (relative).
#[allow(clippy::too_many_arguments)]
pub fn check_chunks(
    case: &ValidatedCase,
    variant: ModelVariant,
    model_opts: &ModelOptions,
    solve_opts: &SolveOptions,
    full: (&LpProblem, &SolveResult, &IndexMap),
    chunks: &[Chunk],
    tol: f64,
) -> Result<Vec<ChunkCheck>, CoreError> {
    let (p, r, im) = full;
    chunks
        .par_iter()
        .map(|c| {
            let (cp, _) = build_window(case, c.start, c.length, variant, model_opts)?;
            let cr = solve_optimal(&cp, solve_opts, &format!("chunk at hour {}", c.start + 1))?;
            let kkt = basis_lp::check_kkt(&cp, &cr).map_err(CoreError::lp("chunk KKT check"))?;
            let span = im.span_cost(p, &r.primal, c.start..c.end());
            let pass = (cr.objective - span).abs() <= tol * span.abs().max(1.0);
            Ok(ChunkCheck { start: c.start, length: c.length, chunk_objective: cr.objective, full_span_cost: span, pass, kkt_residual: kkt.max_residual() })
        })
        .collect()
}

/// Chunks of equal length and equal dual signature, with their positional centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkBasis {
    pub length: usize,
    pub signature: BasisSignature,
    /// Start hours of the member chunks.
    pub members: Vec<usize>,
    pub centroid: RepresentativePeriod,
}

impl ChunkBasis {
    pub fn weight(&self) -> usize {
        self.members.len()
    }
}

/// Groups chunks by `(length, signature)`; bases are ordered by their first member. The rows
/// linking a chunk to its predecessor are not part of the signature.
pub fn group_chunks(
    case: &ValidatedCase,
    chunks: &[Chunk],
    full: (&LpProblem, &SolveResult, &IndexMap),
    mode: SignatureMode,
    q: f64,
) -> Vec<ChunkBasis> {
    let (p, r, im) = full;
    let sigs: Vec<BasisSignature> =
        chunks.par_iter().map(|c| span_signature(p, r, im, c.start..c.end(), mode, q, true)).collect();
    let mut index: HashMap<(usize, &BasisSignature), usize> = HashMap::new();
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, (c, s)) in chunks.iter().zip(&sigs).enumerate() {
        let next = groups.len();
        let g = *index.entry((c.length, s)).or_insert(next);
        if g == next {
            groups.push((i, Vec::new()));
        }
        groups[g].1.push(c.start);
    }
    groups
        .into_iter()
        .map(|(first, members)| {
            let length = chunks[first].length;
            ChunkBasis {
                length,
                signature: sigs[first].clone(),
                centroid: RepresentativePeriod::centroid(case, &members, length),
                members,
            }
        })
        .collect()
}

pub fn to_representative_periods(bases: &[ChunkBasis], horizon: usize) -> Result<RepresentativePeriods, CoreError> {
    let periods = RepresentativePeriods { periods: bases.iter().map(|b| b.centroid.clone()).collect() };
    let covered = periods.covered_hours();
    if covered != horizon {
        return Err(CoreError::Coverage { expected: horizon, got: covered });
    }
    Ok(periods)
}
