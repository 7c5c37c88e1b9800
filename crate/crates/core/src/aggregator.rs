//! End-to-end pipeline: full solve, basis identification, aggregated solve, comparison report.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use basis_lp::{check_kkt_with_tol, LpProblem, SolveOptions, SolveResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{cluster_hours, hourly_signatures, BasisSignature, SignatureMode, DEFAULT_DUAL_STEP};
use crate::error::CoreError;
use crate::partition::{check_chunks, group_chunks, partition_horizon, Chunk, ChunkCheck, PartitionOptions};
use crate::psom::{
    build_aggregated, build_full, solve_optimal, IndexMap, ModelOptions, ModelVariant, RepresentativePeriod, RepresentativePeriods,
};
use crate::system::ValidatedCase;

pub const KKT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One cluster per distinct hourly signature.
    HourlyBasis,
    /// Chunks from the dual scan, grouped by length and signature.
    DualPartition,
    /// The whole horizon as one period of weight 1.
    Identity,
    /// Fixed-k Euclidean clustering of hourly (demand, available wind). Baseline only.
    NaiveKmeansStub,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::HourlyBasis, Method::DualPartition, Method::Identity, Method::NaiveKmeansStub];

    pub fn name(self) -> &'static str {
        match self {
            Method::HourlyBasis => "hourly_basis",
            Method::DualPartition => "dual_partition",
            Method::Identity => "identity",
            Method::NaiveKmeansStub => "naive_kmeans_stub",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| CoreError::InvalidInput(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Allow `hourly_basis` on a ramping variant.
    pub force: bool,
    /// Relative error at or below which an aggregation counts as exact.
    pub exact_tol: f64,
    pub q: f64,
    pub mode: SignatureMode,
    pub partition: PartitionOptions,
    pub model: ModelOptions,
    pub solve: SolveOptions,
    pub kmeans_k: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            force: false,
            exact_tol: 1e-8,
            q: DEFAULT_DUAL_STEP,
            mode: SignatureMode::Duals,
            partition: PartitionOptions::default(),
            model: ModelOptions::default(),
            solve: SolveOptions::default(),
            kmeans_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub n_vars_full: usize,
    pub n_vars_agg: usize,
    pub n_rows_full: usize,
    pub n_rows_agg: usize,
    /// `100·(1 − agg/full)`; negative when the aggregated model is larger.
    pub var_reduction_pct: f64,
    pub row_reduction_pct: f64,
}

pub fn size_stats(full: &LpProblem, agg: &LpProblem) -> SizeStats {
    size_stats_from_counts(full.n_cols(), agg.n_cols(), full.n_rows(), agg.n_rows())
}

pub fn size_stats_from_counts(n_vars_full: usize, n_vars_agg: usize, n_rows_full: usize, n_rows_agg: usize) -> SizeStats {
    let pct = |full: usize, agg: usize| if full == 0 { 0.0 } else { 100.0 * (1.0 - agg as f64 / full as f64) };
    SizeStats {
        n_vars_full,
        n_vars_agg,
        n_rows_full,
        n_rows_agg,
        var_reduction_pct: pct(n_vars_full, n_vars_agg),
        row_reduction_pct: pct(n_rows_full, n_rows_agg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub length: usize,
    pub n_subsets: usize,
    pub n_bases: usize,
    /// Mean cost of the full solution over the subsets of this length.
    pub obj_fun_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationSummary {
    pub horizon: usize,
    pub n_bases: usize,
    pub represented_hours: usize,
    pub max_subset_length: usize,
    /// `horizon / represented_hours`.
    pub hours_reduction_factor: f64,
    pub obj_full: f64,
    pub obj_agg: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub size: SizeStats,
    pub by_length: Vec<LengthRow>,
    pub summary: AggregationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktSummary {
    pub full: f64,
    pub aggregated: f64,
    /// Largest residual over the independent chunk solves, if any ran.
    pub chunks: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub mode: SignatureMode,
    pub n_bases: usize,
    pub other_mode: SignatureMode,
    pub other_n_bases: usize,
    /// Both modes group the hours identically.
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDiagnostics {
    pub n_chunks: usize,
    pub boundary_truncations: usize,
    pub undecomposable_hours: usize,
    pub unlinked_hours: usize,
    pub length_rule_disagreements: usize,
    pub closure_merges: usize,
    pub chunk_checks_passed: usize,
    /// Every chunk that failed the independence check.
    pub chunk_failures: Vec<ChunkCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub config: PipelineOptions,
    /// SHA-256 of the canonical JSON of the validated case.
    pub input_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub variant: ModelVariant,
    pub method: Method,
    pub obj_full: f64,
    pub obj_agg: f64,
    pub rel_error: f64,
    pub exact_tol: f64,
    pub exact: bool,
    pub n_bases: usize,
    pub max_chunk_length: usize,
    pub represented_hours: usize,
    pub n_vars_full: usize,
    pub n_vars_agg: usize,
    pub n_rows_full: usize,
    pub n_rows_agg: usize,
    pub size_reduction_pct: f64,
    pub tables: ReportTables,
    pub kkt: KktSummary,
    pub signature_modes: Option<ModeComparison>,
    pub partition: Option<PartitionDiagnostics>,
    pub warnings: Vec<String>,
    pub meta: ReportMeta,
}

/// One representative period with the source spans it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisGroup {
    pub length: usize,
    /// Start hours (0-indexed) of the member spans.
    pub members: Vec<usize>,
    pub signature: Option<BasisSignature>,
    pub centroid: RepresentativePeriod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub report: AggregationReport,
    /// Spans of the source horizon, in hour order.
    pub chunks: Vec<Chunk>,
    pub groups: Vec<BasisGroup>,
    /// Group index of every hour.
    pub assignment: Vec<usize>,
}

pub fn rel_error(obj_agg: f64, obj_full: f64) -> f64 {
    (obj_agg - obj_full).abs() / obj_full.abs().max(1.0)
}

/// Hex SHA-256 of the case as canonical JSON.
pub fn input_hash(case: &ValidatedCase) -> String {
    let bytes = serde_json::to_vec(case).expect("case serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn unit_chunks(k: usize) -> Vec<Chunk> {
    (0..k)
        .map(|h| Chunk { start: h, length: 1, boundary_truncated: false, undecomposable: false, merged_by_closure: false })
        .collect()
}

/// Whether two labelings induce the same grouping.
fn same_grouping(a: &[usize], b: &[usize]) -> bool {
    let mut ab = BTreeMap::new();
    let mut ba = BTreeMap::new();
    a.iter().zip(b).all(|(x, y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

fn hourly_groups(case: &ValidatedCase, p: &LpProblem, r: &SolveResult, im: &IndexMap, mode: SignatureMode, q: f64) -> Vec<BasisGroup> {
    cluster_hours(case, &hourly_signatures(p, r, im, mode, q))
        .into_iter()
        .map(|c| BasisGroup { length: 1, members: c.members, signature: Some(c.signature), centroid: c.centroid })
        .collect()
}

fn assignment_of(groups: &[BasisGroup], k: usize) -> Vec<usize> {
    let mut a = vec![usize::MAX; k];
    for (g, group) in groups.iter().enumerate() {
        for &s in &group.members {
            a[s..s + group.length].fill(g);
        }
    }
    a
}

/// Per-hour (demand, available wind) features.
fn hour_features(case: &ValidatedCase) -> Vec<[f64; 2]> {
    let caps: Vec<f64> = case.spec().wind_units().map(|(_, g)| g.p_max).collect();
    (0..case.horizon())
        .map(|h| [case.demand_at(h).iter().sum(), case.cf_at(h).iter().zip(&caps).map(|(c, p)| c * p).sum()])
        .collect()
}

/// Lloyd iterations from evenly spaced seed hours; empty clusters are dropped.
fn kmeans_groups(case: &ValidatedCase, k: usize) -> Vec<BasisGroup> {
    let x = hour_features(case);
    let n = x.len();
    let k = k.clamp(1, n);
    let mut centers: Vec<[f64; 2]> = (0..k).map(|i| x[i * n / k]).collect();
    let mut label = vec![0usize; n];
    for _ in 0..100 {
        let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let next: Vec<usize> = x
            .iter()
            .map(|&p| (0..k).min_by(|&i, &j| dist(p, centers[i]).total_cmp(&dist(p, centers[j]))).unwrap_or(0))
            .collect();
        let moved = next != label;
        label = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let pts: Vec<&[f64; 2]> = x.iter().zip(&label).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if !pts.is_empty() {
                let m = pts.len() as f64;
                *center = [pts.iter().map(|p| p[0]).sum::<f64>() / m, pts.iter().map(|p| p[1]).sum::<f64>() / m];
            }
        }
        if !moved {
            break;
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (h, &l) in label.iter().enumerate() {
        if !members.contains_key(&l) {
            order.push(l);
        }
        members.entry(l).or_default().push(h);
    }
    order
        .into_iter()
        .map(|l| {
            let m = members.remove(&l).unwrap_or_default();
            BasisGroup { length: 1, centroid: RepresentativePeriod::centroid(case, &m, 1), members: m, signature: None }
        })
        .collect()
}

fn kkt_residual(p: &LpProblem, r: &SolveResult, stage: &str) -> Result<f64, CoreError> {
    Ok(check_kkt_with_tol(p, r, KKT_TOL).map_err(CoreError::lp(stage))?.max_residual())
}

/// Runs `method` on `case` under `variant` and compares the aggregated with the full objective.
pub fn run_pipeline(case: &ValidatedCase, variant: ModelVariant, method: Method, opts: &PipelineOptions) -> Result<PipelineOutput, CoreError> {
    let k = case.horizon();
    let mut warnings = Vec::new();
    if method == Method::HourlyBasis && variant.has_ramping() {
        if !opts.force {
            return Err(CoreError::VariantRequirement {
                variant: variant.to_string(),
                reason: "hourly_basis ignores ramp linking between hours; pass force to run it anyway".into(),
            });
        }
        warnings.push("hourly_basis forced on a ramping variant; hours linked by ramp rows are aggregated independently".into());
    }
    if method == Method::DualPartition && !variant.has_ramping() {
        return Err(CoreError::VariantRequirement {
            variant: variant.to_string(),
            reason: "dual_partition reads ramp duals; use hourly_basis".into(),
        });
    }

    let (fp, fim) = build_full(case, variant, &opts.model)?;
    let fr = solve_optimal(&fp, &opts.solve, "full model")?;
    let kkt_full = kkt_residual(&fp, &fr, "full model KKT check")?;

    let mut chunks = unit_chunks(k);
    let mut signature_modes = None;
    let mut partition = None;
    let mut kkt_chunks = None;
    let groups = match method {
        Method::Identity => vec![BasisGroup {
            length: k,
            members: vec![0],
            signature: None,
            centroid: RepresentativePeriod::centroid(case, &[0], k),
        }],
        Method::NaiveKmeansStub => kmeans_groups(case, opts.kmeans_k),
        Method::HourlyBasis => {
            let groups = hourly_groups(case, &fp, &fr, &fim, opts.mode, opts.q);
            let other_mode = match opts.mode {
                SignatureMode::Duals => SignatureMode::ActiveSet,
                SignatureMode::ActiveSet => SignatureMode::Duals,
            };
            let other = hourly_groups(case, &fp, &fr, &fim, other_mode, opts.q);
            let agree = same_grouping(&assignment_of(&groups, k), &assignment_of(&other, k));
            if !agree {
                warnings.push(format!("signature modes disagree: {} bases by {}, {} by {}", groups.len(), opts.mode, other.len(), other_mode));
            }
            signature_modes =
                Some(ModeComparison { mode: opts.mode, n_bases: groups.len(), other_mode, other_n_bases: other.len(), agree });
            groups
        }
        Method::DualPartition => {
            let outcome = partition_horizon(case, &fr, &fim, &opts.partition)?;
            let checks = check_chunks(case, variant, &opts.model, &opts.solve, (&fp, &fr, &fim), &outcome.chunks, opts.exact_tol)?;
            kkt_chunks = Some(checks.iter().map(|c| c.kkt_residual).fold(0.0, f64::max));
            let failures: Vec<ChunkCheck> = checks.iter().filter(|c| !c.pass).cloned().collect();
            if !failures.is_empty() {
                warnings.push(format!("{} chunk(s) failed the independence check", failures.len()));
            }
            partition = Some(PartitionDiagnostics {
                n_chunks: outcome.chunks.len(),
                boundary_truncations: outcome.boundary_truncations,
                undecomposable_hours: outcome.undecomposable_hours,
                unlinked_hours: outcome.unlinked_hours,
                length_rule_disagreements: outcome.length_rule_disagreements,
                closure_merges: outcome.closure_merges,
                chunk_checks_passed: checks.len() - failures.len(),
                chunk_failures: failures,
            });
            let bases = group_chunks(case, &outcome.chunks, (&fp, &fr, &fim), opts.mode, opts.q);
            chunks = outcome.chunks;
            bases
                .into_iter()
                .map(|b| BasisGroup { length: b.length, members: b.members, signature: Some(b.signature), centroid: b.centroid })
                .collect()
        }
    };
    if method == Method::Identity {
        chunks = vec![Chunk { start: 0, length: k, boundary_truncated: false, undecomposable: false, merged_by_closure: false }];
    }
    let periods = RepresentativePeriods { periods: groups.iter().map(|g| g.centroid.clone()).collect() };

    let (ap, _) = build_aggregated(case, &periods, variant, &opts.model)?;
    let ar = solve_optimal(&ap, &opts.solve, "aggregated model")?;
    let kkt_agg = kkt_residual(&ap, &ar, "aggregated model KKT check")?;

    let err = rel_error(ar.objective, fr.objective);
    let size = size_stats(&fp, &ap);
    let assignment = assignment_of(&groups, k);
    let mut by_length: BTreeMap<usize, (usize, usize, f64)> = BTreeMap::new();
    for c in &chunks {
        let e = by_length.entry(c.length).or_default();
        e.0 += 1;
        e.2 += fim.span_cost(&fp, &fr.primal, c.start..c.end());
    }
    for g in &groups {
        by_length.entry(g.length).or_default().1 += 1;
    }
    let by_length = by_length
        .into_iter()
        .map(|(length, (n_subsets, n_bases, total))| LengthRow {
            length,
            n_subsets,
            n_bases,
            obj_fun_avg: if n_subsets > 0 { total / n_subsets as f64 } else { 0.0 },
        })
        .collect();
    let represented_hours = periods.represented_hours();
    let max_chunk_length = groups.iter().map(|g| g.length).max().unwrap_or(0);
    let kkt_worst = kkt_full.max(kkt_agg).max(kkt_chunks.unwrap_or(0.0));
    let report = AggregationReport {
        variant,
        method,
        obj_full: fr.objective,
        obj_agg: ar.objective,
        rel_error: err,
        exact_tol: opts.exact_tol,
        exact: err <= opts.exact_tol,
        n_bases: groups.len(),
        max_chunk_length,
        represented_hours,
        n_vars_full: size.n_vars_full,
        n_vars_agg: size.n_vars_agg,
        n_rows_full: size.n_rows_full,
        n_rows_agg: size.n_rows_agg,
        size_reduction_pct: size.var_reduction_pct,
        tables: ReportTables {
            summary: AggregationSummary {
                horizon: k,
                n_bases: groups.len(),
                represented_hours,
                max_subset_length: chunks.iter().map(|c| c.length).max().unwrap_or(0),
                hours_reduction_factor: k as f64 / represented_hours.max(1) as f64,
                obj_full: fr.objective,
                obj_agg: ar.objective,
                rel_error: err,
            },
            size,
            by_length,
        },
        kkt: KktSummary { full: kkt_full, aggregated: kkt_agg, chunks: kkt_chunks, tol: KKT_TOL, pass: kkt_worst < KKT_TOL },
        signature_modes,
        partition,
        warnings,
        meta: ReportMeta {
            tool: "basis-tsa".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: opts.clone(),
            input_sha256: input_hash(case),
        },
    };
    Ok(PipelineOutput { report, chunks, groups, assignment })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CoreError + '_ {
    move |source| CoreError::Io { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> CoreError + '_ {
    move |source| CoreError::Json { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CoreError + '_ {
    move |source| CoreError::Csv { path: path.to_path_buf(), source }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CoreError> {
    let mut s = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    s.push('\n');
    fs::write(path, s).map_err(io_err(path))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CoreError> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(header).map_err(&err)?;
    for r in rows {
        w.write_record(&r).map_err(&err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `table_size.csv`, `table_lengths.csv` and `table_summary.csv` into `dir`.
pub fn write_tables(report: &AggregationReport, dir: &Path) -> Result<(), CoreError> {
    let s = &report.tables.size;
    write_csv(
        &dir.join("table_size.csv"),
        &["quantity", "full", "aggregated", "reduction_pct"],
        [
            vec!["variables".into(), s.n_vars_full.to_string(), s.n_vars_agg.to_string(), s.var_reduction_pct.to_string()],
            vec!["constraints".into(), s.n_rows_full.to_string(), s.n_rows_agg.to_string(), s.row_reduction_pct.to_string()],
        ],
    )?;
    write_csv(
        &dir.join("table_lengths.csv"),
        &["length", "n_subsets", "n_bases", "obj_fun_avg"],
        report
            .tables
            .by_length
            .iter()
            .map(|r| vec![r.length.to_string(), r.n_subsets.to_string(), r.n_bases.to_string(), r.obj_fun_avg.to_string()]),
    )?;
    let m = &report.tables.summary;
    write_csv(
        &dir.join("table_summary.csv"),
        &["metric", "value"],
        [
            ("horizon", m.horizon.to_string()),
            ("n_bases", m.n_bases.to_string()),
            ("represented_hours", m.represented_hours.to_string()),
            ("max_subset_length", m.max_subset_length.to_string()),
            ("hours_reduction_factor", m.hours_reduction_factor.to_string()),
            ("obj_full", m.obj_full.to_string()),
            ("obj_agg", m.obj_agg.to_string()),
            ("rel_error", m.rel_error.to_string()),
        ]
        .into_iter()
        .map(|(a, b)| vec![a.to_string(), b]),
    )
}

/// `hour,demand,available_wind,basis_id`, hours and ids 1-indexed.
pub fn write_scatter(case: &ValidatedCase, out: &PipelineOutput, path: &Path) -> Result<(), CoreError> {
    let x = hour_features(case);
    write_csv(
        path,
        &["hour", "demand", "available_wind", "basis_id"],
        x.iter().enumerate().map(|(h, f)| vec![(h + 1).to_string(), f[0].to_string(), f[1].to_string(), (out.assignment[h] + 1).to_string()]),
    )
}

/// `cluster_id,hour`, both 1-indexed, one row per hour.
pub fn write_cluster_csv(out: &PipelineOutput, path: &Path) -> Result<(), CoreError> {
    write_csv(
        path,
        &["cluster_id", "hour"],
        out.assignment.iter().enumerate().map(|(h, g)| vec![(g + 1).to_string(), (h + 1).to_string()]),
    )
}

/// `chunk_id,start_hour,length`, 1-indexed.
pub fn write_partition_csv(chunks: &[Chunk], path: &Path) -> Result<(), CoreError> {
    write_csv(
        path,
        &["chunk_id", "start_hour", "length"],
        chunks.iter().enumerate().map(|(i, c)| vec![(i + 1).to_string(), (c.start + 1).to_string(), c.length.to_string()]),
    )
}

/// Groups with 1-indexed ids and member start hours.
pub fn write_groups_json(groups: &[BasisGroup], path: &Path) -> Result<(), CoreError> {
    #[derive(Serialize)]
    struct Entry<'a> {
        id: usize,
        length: usize,
        weight: usize,
        member_start_hours: Vec<usize>,
        signature: &'a Option<BasisSignature>,
        centroid_demand: &'a [Vec<f64>],
        centroid_cf: &'a [Vec<f64>],
    }
    let entries: Vec<Entry> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| Entry {
            id: i + 1,
            length: g.length,
            weight: g.members.len(),
            member_start_hours: g.members.iter().map(|s| s + 1).collect(),
            signature: &g.signature,
            centroid_demand: &g.centroid.demand,
            centroid_cf: &g.centroid.cf,
        })
        .collect();
    write_json(&entries, path)
}

/// Total available wind per hour of `case`.
pub fn available_wind(case: &ValidatedCase) -> Vec<f64> {
    hour_features(case).iter().map(|f| f[1]).collect()
}

