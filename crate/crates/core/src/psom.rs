//! Full hourly and aggregated dispatch models as labeled LPs.
//!
//! Column and row counts per model position (an hour of the full model, or an in-period
//! position of the aggregated model), with `G` generators, `N` balance nodes of which `N_d`
//! carry demand, `L` lines and `R` ramp rows per thermal edge:
//!
//! | variant              | columns           | rows                                  |
//! |----------------------|-------------------|---------------------------------------|
//! | `ed`                 | `G + 1`           | `1`                                   |
//! | `ed_network`         | `G + N_d + 2L`    | `N` (`+ 2·N_l` with per-bus limits)   |
//! | `ed_ramping`         | `G + 1`           | `1 + R` (`R` = 0 at a period's start) |
//! | `ed_network_ramping` | `G + N_d + 2L`    | network rows `+ R`                    |
//!
//! Non-network variants collapse all buses onto one balance node with the summed demand.
//! `N_l` is the number of buses with at least one incident line.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use basis_lp::{ColId, LpProblem, RowId, Sense, SolveOptions, SolveResult};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::system::{GeneratorKind, ValidatedCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Ed,
    EdNetwork,
    EdRamping,
    EdNetworkRamping,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] =
        [ModelVariant::Ed, ModelVariant::EdNetwork, ModelVariant::EdRamping, ModelVariant::EdNetworkRamping];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Ed => "ed",
            ModelVariant::EdNetwork => "ed_network",
            ModelVariant::EdRamping => "ed_ramping",
            ModelVariant::EdNetworkRamping => "ed_network_ramping",
        }
    }

    pub fn has_network(self) -> bool {
        matches!(self, ModelVariant::EdNetwork | ModelVariant::EdNetworkRamping)
    }

    pub fn has_ramping(self) -> bool {
        matches!(self, ModelVariant::EdRamping | ModelVariant::EdNetworkRamping)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| CoreError::InvalidInput(format!("unknown model variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowLimitMode {
    /// Each directed flow column is bounded by its line's limit.
    PerLine,
    /// Per-line bounds plus, per bus, one export-sum and one import-sum row whose
    /// right-hand side is the smallest limit among the bus's incident lines.
    PerBus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Weight only the non-supplied power term by the period weight (otherwise the whole
    /// per-period cost is weighted).
    pub strict_paper_objective: bool,
    pub flow_limits: FlowLimitMode,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { strict_paper_objective: false, flow_limits: FlowLimitMode::PerLine }
    }
}

/// A contiguous block of model positions with its input data and occurrence weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativePeriod {
    pub length: usize,
    pub weight: usize,
    /// Source start hour of every member chunk.
    pub members: Vec<usize>,
    /// `[position][bus]`, spec bus order.
    pub demand: Vec<Vec<f64>>,
    /// `[position][wind unit]`, declaration order.
    pub cf: Vec<Vec<f64>>,
}

impl RepresentativePeriod {
    /// Positional mean of the chunks of length `length` starting at `starts`.
    pub fn centroid(case: &ValidatedCase, starts: &[usize], length: usize) -> RepresentativePeriod {
        let n = starts.len() as f64;
        fn mean<'a>(starts: &[usize], n: f64, get: impl Fn(usize) -> &'a [f64], p: usize) -> Vec<f64> {
            let width = get(starts[0] + p).len();
            (0..width).map(|j| starts.iter().map(|&s| get(s + p)[j]).sum::<f64>() / n).collect()
        }
        RepresentativePeriod {
            length,
            weight: starts.len(),
            members: starts.to_vec(),
            demand: (0..length).map(|p| mean(starts, n, |h| case.demand_at(h), p)).collect(),
            cf: (0..length).map(|p| mean(starts, n, |h| case.cf_at(h), p)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativePeriods {
    pub periods: Vec<RepresentativePeriod>,
}

impl RepresentativePeriods {
    /// The whole horizon as one period of weight 1.
    pub fn identity(case: &ValidatedCase) -> Self {
        RepresentativePeriods { periods: vec![RepresentativePeriod::centroid(case, &[0], case.horizon())] }
    }

    /// Σ length: hours the aggregated model actually carries.
    pub fn represented_hours(&self) -> usize {
        self.periods.iter().map(|p| p.length).sum()
    }

    /// Σ length·weight: hours of the source horizon the periods stand for.
    pub fn covered_hours(&self) -> usize {
        self.periods.iter().map(|p| p.length * p.weight).sum()
    }
}

/// Handles of one model position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub period: usize,
    pub offset: usize,
    pub cols: Range<usize>,
    pub rows: Range<usize>,
    /// Per generator, spec order.
    pub gen: Vec<ColId>,
    /// Per balance node; `None` for nodes without demand.
    pub nsp: Vec<Option<ColId>>,
    /// Per line: `[from -> to, to -> from]`.
    pub flow: Vec<[ColId; 2]>,
    /// Per balance node.
    pub balance: Vec<RowId>,
    /// Per bus with incident lines, only under [`FlowLimitMode::PerBus`].
    pub flow_out: Vec<RowId>,
    pub flow_in: Vec<RowId>,
    /// Per generator; rows linking the previous position to this one.
    pub ramp_up: Vec<Option<RowId>>,
    pub ramp_down: Vec<Option<RowId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMap {
    pub variant: ModelVariant,
    /// Balance node names: the bus list, or `["system"]` without a network.
    pub nodes: Vec<String>,
    pub positions: Vec<Position>,
    /// Position range of every period.
    pub periods: Vec<Range<usize>>,
    pub weights: Vec<usize>,
}

impl IndexMap {
    pub fn n_positions(&self) -> usize {
        self.positions.len()
    }

    /// Cost of `x` restricted to the columns of positions `range`, unweighted.
    pub fn span_cost(&self, p: &LpProblem, x: &[f64], range: Range<usize>) -> f64 {
        let c = p.objective();
        range.flat_map(|q| self.positions[q].cols.clone()).map(|j| c[j] * x[j]).sum()
    }
}

struct Block<'a> {
    demand: &'a [Vec<f64>],
    cf: &'a [Vec<f64>],
    weight: f64,
    hour_offset: usize,
}

/// Full hourly model over the case horizon.
pub fn build_full(case: &ValidatedCase, variant: ModelVariant, opts: &ModelOptions) -> Result<(LpProblem, IndexMap), CoreError> {
    let k = case.horizon();
    let demand: Vec<Vec<f64>> = (0..k).map(|h| case.demand_at(h).to_vec()).collect();
    let cf: Vec<Vec<f64>> = (0..k).map(|h| case.cf_at(h).to_vec()).collect();
    build(case, variant, opts, &[Block { demand: &demand, cf: &cf, weight: 1.0, hour_offset: 0 }], false)
}

/// Aggregated model: one block per representative period, weighted, with no rows across periods.
pub fn build_aggregated(
    case: &ValidatedCase,
    periods: &RepresentativePeriods,
    variant: ModelVariant,
    opts: &ModelOptions,
) -> Result<(LpProblem, IndexMap), CoreError> {
    let covered = periods.covered_hours();
    if covered != case.horizon() {
        return Err(CoreError::Coverage { expected: case.horizon(), got: covered });
    }
    let mut blocks = Vec::with_capacity(periods.periods.len());
    for (i, r) in periods.periods.iter().enumerate() {
        if r.length == 0 || r.weight == 0 || r.demand.len() != r.length || r.cf.len() != r.length {
            return Err(CoreError::InvalidInput(format!("representative period {} is malformed", i + 1)));
        }
        blocks.push(Block { demand: &r.demand, cf: &r.cf, weight: r.weight as f64, hour_offset: 0 });
    }
    build(case, variant, opts, &blocks, true)
}

/// Full model of the hours `start..start + len`, labeled with source hours.
pub fn build_window(
    case: &ValidatedCase,
    start: usize,
    len: usize,
    variant: ModelVariant,
    opts: &ModelOptions,
) -> Result<(LpProblem, IndexMap), CoreError> {
    let demand: Vec<Vec<f64>> = (start..start + len).map(|h| case.demand_at(h).to_vec()).collect();
    let cf: Vec<Vec<f64>> = (start..start + len).map(|h| case.cf_at(h).to_vec()).collect();
    build(case, variant, opts, &[Block { demand: &demand, cf: &cf, weight: 1.0, hour_offset: start }], false)
}

fn label(family: &str, dims: &[(&str, &str)], r: Option<usize>, k: usize) -> String {
    let mut s = String::with_capacity(32);
    s.push_str(family);
    s.push('[');
    for (name, v) in dims {
        s.push_str(name);
        s.push('=');
        s.push_str(v);
        s.push(',');
    }
    if let Some(r) = r {
        s.push_str(&format!("r={},", r + 1));
    }
    s.push_str(&format!("k={}]", k + 1));
    s
}

fn build(
    case: &ValidatedCase,
    variant: ModelVariant,
    opts: &ModelOptions,
    blocks: &[Block],
    aggregated: bool,
) -> Result<(LpProblem, IndexMap), CoreError> {
    let spec = case.spec();
    if variant.has_ramping() && !spec.generators.iter().any(|g| g.is_ramp_limited()) {
        return Err(CoreError::VariantRequirement {
            variant: variant.to_string(),
            reason: "no generator has ramp limits".into(),
        });
    }
    let network = variant.has_network();
    let nodes: Vec<String> = if network { spec.buses.clone() } else { vec!["system".into()] };
    let load_bus = case.load_buses();
    let node_has_load: Vec<bool> = if network { load_bus.clone() } else { vec![load_bus.iter().any(|&b| b)] };
    let gen_node: Vec<usize> =
        spec.generators.iter().map(|g| if network { spec.bus_index(&g.bus).expect("validated") } else { 0 }).collect();
    let line_ends: Vec<(usize, usize)> = if network {
        spec.lines
            .iter()
            .map(|l| (spec.bus_index(&l.from_bus).expect("validated"), spec.bus_index(&l.to_bus).expect("validated")))
            .collect()
    } else {
        vec![]
    };
    let per_bus_limit: Vec<Option<f64>> = (0..nodes.len())
        .map(|b| {
            line_ends
                .iter()
                .zip(&spec.lines)
                .filter(|((a, c), _)| *a == b || *c == b)
                .map(|(_, l)| l.flow_limit)
                .reduce(f64::min)
        })
        .collect();
    let wind_slot: Vec<Option<usize>> = {
        let mut next = 0;
        spec.generators
            .iter()
            .map(|g| {
                (g.kind == GeneratorKind::Wind).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };

    let mut p = LpProblem::new();
    let mut positions = Vec::new();
    let mut periods = Vec::new();
    let mut weights = Vec::new();
    for (bi, b) in blocks.iter().enumerate() {
        let r = aggregated.then_some(bi);
        let (w_all, w_nsp) = if opts.strict_paper_objective { (1.0, b.weight) } else { (b.weight, b.weight) };
        let first = positions.len();
        let mut prev_gen: Option<Vec<ColId>> = None;
        for (off, (d, cf)) in b.demand.iter().zip(b.cf).enumerate() {
            let k = b.hour_offset + off;
            let col0 = p.n_cols();
            let row0 = p.n_rows();
            let gen: Vec<ColId> = spec
                .generators
                .iter()
                .enumerate()
                .map(|(g, gen)| {
                    let upper = match wind_slot[g] {
                        Some(s) => cf[s] * gen.p_max,
                        None => gen.p_max,
                    };
                    p.add_col(label("p", &[("g", &gen.id)], r, k), w_all * gen.variable_cost, gen.p_min, upper)
                })
                .collect();
            let nsp: Vec<Option<ColId>> = nodes
                .iter()
                .enumerate()
                .map(|(n, name)| {
                    node_has_load[n].then(|| {
                        let dims: &[(&str, &str)] = if network { &[("i", name)] } else { &[] };
                        p.add_col(label("nsp", dims, r, k), w_nsp * spec.nsp_cost, 0.0, f64::INFINITY)
                    })
                })
                .collect();
            let flow: Vec<[ColId; 2]> = spec
                .lines
                .iter()
                .take(line_ends.len())
                .map(|l| {
                    let cost = w_all * l.transmission_cost;
                    let fwd = p.add_col(label("f", &[("i", &l.from_bus), ("j", &l.to_bus)], r, k), cost, 0.0, l.flow_limit);
                    let bwd = p.add_col(label("f", &[("i", &l.to_bus), ("j", &l.from_bus)], r, k), cost, 0.0, l.flow_limit);
                    [fwd, bwd]
                })
                .collect();

            let balance: Vec<RowId> = nodes
                .iter()
                .enumerate()
                .map(|(n, name)| {
                    let mut coeffs: Vec<(ColId, f64)> = Vec::new();
                    for (g, &c) in gen.iter().enumerate() {
                        if gen_node[g] == n {
                            coeffs.push((c, 1.0));
                        }
                    }
                    if let Some(c) = nsp[n] {
                        coeffs.push((c, 1.0));
                    }
                    for (l, &(a, z)) in line_ends.iter().enumerate() {
                        if a == n {
                            coeffs.push((flow[l][0], -1.0));
                            coeffs.push((flow[l][1], 1.0));
                        } else if z == n {
                            coeffs.push((flow[l][0], 1.0));
                            coeffs.push((flow[l][1], -1.0));
                        }
                    }
                    let rhs = if network { d[n] } else { d.iter().sum() };
                    let dims: &[(&str, &str)] = if network { &[("i", name)] } else { &[] };
                    if coeffs.is_empty() {
                        // A bus with nothing attached still needs a row; it pins zero demand.
                        coeffs.push((gen[0], 0.0));
                    }
                    p.add_row(label("balance", dims, r, k), coeffs, Sense::Eq, rhs)
                })
                .collect();

            let mut flow_out = Vec::new();
            let mut flow_in = Vec::new();
            if network && opts.flow_limits == FlowLimitMode::PerBus {
                for (n, name) in nodes.iter().enumerate() {
                    let Some(limit) = per_bus_limit[n] else { continue };
                    let mut out = Vec::new();
                    let mut inn = Vec::new();
                    for (l, &(a, z)) in line_ends.iter().enumerate() {
                        if a == n {
                            out.push((flow[l][0], 1.0));
                            inn.push((flow[l][1], 1.0));
                        } else if z == n {
                            out.push((flow[l][1], 1.0));
                            inn.push((flow[l][0], 1.0));
                        }
                    }
                    flow_out.push(p.add_row(label("flowout", &[("i", name)], r, k), out, Sense::Le, limit));
                    flow_in.push(p.add_row(label("flowin", &[("i", name)], r, k), inn, Sense::Le, limit));
                }
            }

            let mut ramp_up = vec![None; gen.len()];
            let mut ramp_down = vec![None; gen.len()];
            if variant.has_ramping() {
                if let Some(prev) = &prev_gen {
                    for (g, unit) in spec.generators.iter().enumerate() {
                        let dims = [("t", unit.id.as_str())];
                        if let Some(ru) = unit.ramp_up {
                            ramp_up[g] = Some(p.add_row(label("rampup", &dims, r, k), [(gen[g], 1.0), (prev[g], -1.0)], Sense::Le, ru));
                        }
                        if let Some(rd) = unit.ramp_down {
                            ramp_down[g] =
                                Some(p.add_row(label("rampdown", &dims, r, k), [(prev[g], 1.0), (gen[g], -1.0)], Sense::Le, rd));
                        }
                    }
                }
            }
            prev_gen = Some(gen.clone());
            positions.push(Position {
                period: bi,
                offset: off,
                cols: col0..p.n_cols(),
                rows: row0..p.n_rows(),
                gen,
                nsp,
                flow,
                balance,
                flow_out,
                flow_in,
                ramp_up,
                ramp_down,
            });
        }
        periods.push(first..positions.len());
        weights.push(b.weight as usize);
    }
    Ok((p, IndexMap { variant, nodes, positions, periods, weights }))
}

/// Solves and insists on an optimal status.
pub fn solve_optimal(p: &LpProblem, opts: &SolveOptions, stage: &str) -> Result<SolveResult, CoreError> {
    let r = basis_lp::solve(p, opts).map_err(CoreError::lp(stage))?;
    if !r.is_optimal() {
        return Err(CoreError::Solver { stage: stage.to_string(), status: r.status });
    }
    Ok(r)
}

/// Strips the period and hour dimensions from a label: `p[g=T,r=2,k=5]` becomes `p[g=T]`.
pub fn relative_label(label: &str) -> String {
    let Some(open) = label.find('[') else { return label.to_string() };
    let inner = &label[open + 1..label.len() - 1];
    let kept: Vec<&str> = inner.split(',').filter(|d| !d.starts_with("k=") && !d.starts_with("r=")).collect();
    format!("{}[{}]", &label[..open], kept.join(","))
}
