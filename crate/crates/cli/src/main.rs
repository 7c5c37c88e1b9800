//! `basis-tsa` command-line driver.
//!
//! Every flag can also be set through an environment variable named `BTSA_<FLAG>`, with the
//! flag upper-cased and dashes replaced by underscores. Command-line values take precedence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use basis_lp::{check_kkt, SolveOptions};
use basis_tsa::aggregator::{
    input_hash, run_pipeline, write_cluster_csv, write_groups_json, write_json, write_partition_csv, write_scatter, write_tables, Method,
    PipelineOptions,
};
use basis_tsa::basis::{SignatureMode, DEFAULT_DUAL_STEP};
use basis_tsa::enumerate::{write_census_csv, zero_error_census, Census, CensusOptions, K3_NOTE};
use basis_tsa::partition::{partition_horizon, LengthRule, PartitionOptions, PartitionOutcome};
use basis_tsa::psom::{build_full, solve_optimal, FlowLimitMode, ModelOptions, ModelVariant};
use basis_tsa::synth::{synth_case, three_regime_case, SynthProfile};
use basis_tsa::system::{load_case, validate_system, write_series, write_spec, ValidatedCase};
use basis_tsa::CoreError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_INEXACT: u8 = 4;

#[derive(Parser)]
#[command(name = "basis-tsa", version, about = "Basis-oriented time series aggregation for dispatch LPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic system spec and its demand and capacity-factor CSVs.
    Gen(GenArgs),
    /// Aggregate a case, solve full and aggregated models and write the report.
    Run(RunArgs),
    /// Evaluate every clustering of a short horizon and count the exact ones.
    Census(CensusArgs),
    /// Write the chunk partition of a ramping model without aggregating.
    Partition(PartitionArgs),
    /// Solve the full model and write every hour's duals.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, env = "BTSA_PROFILE", default_value = "single_node")]
    profile: SynthProfile,
    #[arg(long, env = "BTSA_HORIZON", default_value_t = 8736)]
    horizon: usize,
    #[arg(long, env = "BTSA_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct InputArgs {
    /// System spec JSON. Without it the case is synthesized from the profile flags.
    #[arg(long, env = "BTSA_SYSTEM", requires_all = ["demand", "cf"])]
    system: Option<PathBuf>,
    /// Demand CSV `hour,bus,demand_mw`.
    #[arg(long, env = "BTSA_DEMAND", requires = "system")]
    demand: Option<PathBuf>,
    /// Capacity-factor CSV `hour,unit,cf`.
    #[arg(long, env = "BTSA_CF", requires = "system")]
    cf: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowLimits {
    PerLine,
    PerBus,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, env = "BTSA_VARIANT", default_value = "ed")]
    variant: ModelVariant,
    /// Weight only the non-supplied power cost by the period weight.
    #[arg(long, env = "BTSA_STRICT_PAPER_OBJECTIVE")]
    strict_paper_objective: bool,
    #[arg(long, env = "BTSA_FLOW_LIMITS", value_enum, default_value_t = FlowLimits::PerLine)]
    flow_limits: FlowLimits,
    /// Primal feasibility tolerance of the simplex.
    #[arg(long, env = "BTSA_FEAS_TOL", default_value_t = 1e-9)]
    feas_tol: f64,
}

#[derive(Args)]
struct PartitionArgsCommon {
    /// Dual quantization step.
    #[arg(long, env = "BTSA_Q", default_value_t = DEFAULT_DUAL_STEP)]
    q: f64,
    #[arg(long, env = "BTSA_DECOMPOSITION_TOL", default_value_t = 1e-6)]
    decomposition_tol: f64,
    #[arg(long, env = "BTSA_LENGTH_RULE", default_value = "nearest_multiple")]
    length_rule: LengthRule,
    /// Skip merging chunks joined by a binding ramp row.
    #[arg(long, env = "BTSA_NO_CLOSURE")]
    no_closure: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, env = "BTSA_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    partition: PartitionArgsCommon,
    #[arg(long, env = "BTSA_METHOD", default_value = "hourly_basis")]
    method: Method,
    #[arg(long, env = "BTSA_SIGNATURE_MODE", default_value = "duals")]
    signature_mode: SignatureMode,
    /// Relative error at or below which the aggregation counts as exact.
    #[arg(long, env = "BTSA_EXACT_TOL", default_value_t = 1e-8)]
    exact_tol: f64,
    #[arg(long, env = "BTSA_KMEANS_K", default_value_t = 5)]
    kmeans_k: usize,
    /// Run hourly_basis on a ramping variant.
    #[arg(long, env = "BTSA_FORCE")]
    force: bool,
    /// Exit with status 4 when the aggregation is not exact.
    #[arg(long, env = "BTSA_REQUIRE_EXACT")]
    require_exact: bool,
    #[arg(long, env = "BTSA_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct CensusArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Use the engineered three-regime fixture with these regime sizes instead of the input.
    #[arg(long, env = "BTSA_REGIMES", value_delimiter = ',')]
    regimes: Option<Vec<usize>>,
    /// Allow horizons other than 12, up to the enumeration guard.
    #[arg(long, env = "BTSA_ANY_HORIZON")]
    any_horizon: bool,
    #[arg(long, env = "BTSA_Q", default_value_t = DEFAULT_DUAL_STEP)]
    q: f64,
    /// Relative objective tolerance for calling a clustering exact.
    #[arg(long, env = "BTSA_CENSUS_TOL", default_value_t = 1e-9)]
    census_tol: f64,
    #[arg(long, env = "BTSA_SIGNATURE_MODE", default_value = "duals")]
    signature_mode: SignatureMode,
    #[arg(long, env = "BTSA_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    partition: PartitionArgsCommon,
    #[arg(long, env = "BTSA_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, env = "BTSA_OUT")]
    out: PathBuf,
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    CoreError::InvalidInput(msg.into()).into()
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("--{name} must be positive, got {v}")))
    }
}

fn out_dir(path: &Path) -> Result<&Path> {
    fs::create_dir_all(path).map_err(|source| CoreError::Io { path: path.to_path_buf(), source })?;
    Ok(path)
}

impl InputArgs {
    fn load(&self) -> Result<ValidatedCase> {
        match (&self.system, &self.demand, &self.cf) {
            (Some(s), Some(d), Some(c)) => Ok(load_case(s, d, c).context("loading case")?),
            _ => {
                let (spec, series) = synth_case(self.synth.seed, self.synth.horizon, self.synth.profile).context("synthesizing case")?;
                Ok(validate_system(spec, series).map_err(CoreError::Validation).context("synthesized case")?)
            }
        }
    }
}

impl ModelArgs {
    fn model(&self) -> ModelOptions {
        let flow_limits = match self.flow_limits {
            FlowLimits::PerLine => FlowLimitMode::PerLine,
            FlowLimits::PerBus => FlowLimitMode::PerBus,
        };
        ModelOptions { strict_paper_objective: self.strict_paper_objective, flow_limits }
    }

    fn solve(&self) -> Result<SolveOptions> {
        Ok(SolveOptions { feas_tol: positive("feas-tol", self.feas_tol)?, ..SolveOptions::default() })
    }
}

impl PartitionArgsCommon {
    fn options(&self) -> Result<PartitionOptions> {
        Ok(PartitionOptions {
            q: positive("q", self.q)?,
            decomposition_tol: positive("decomposition-tol", self.decomposition_tol)?,
            length_rule: self.length_rule,
            closure: !self.no_closure,
        })
    }
}

fn cmd_gen(a: &GenArgs) -> Result<u8> {
    let (spec, series) = synth_case(a.synth.seed, a.synth.horizon, a.synth.profile)?;
    let dir = out_dir(&a.out)?;
    write_spec(&spec, &dir.join("system.json"))?;
    write_series(&series, &dir.join("demand.csv"), &dir.join("cf.csv"))?;
    println!("wrote system.json, demand.csv, cf.csv ({} hours, profile {}) to {}", series.horizon, a.synth.profile, dir.display());
    Ok(0)
}

fn cmd_run(a: &RunArgs) -> Result<u8> {
    let case = a.input.load()?;
    let opts = PipelineOptions {
        force: a.force,
        exact_tol: positive("exact-tol", a.exact_tol)?,
        q: positive("q", a.partition.q)?,
        mode: a.signature_mode,
        partition: a.partition.options()?,
        model: a.model.model(),
        solve: a.model.solve()?,
        kmeans_k: a.kmeans_k.max(1),
    };
    let out = run_pipeline(&case, a.model.variant, a.method, &opts).with_context(|| format!("{} on {}", a.method, a.model.variant))?;
    let dir = out_dir(&a.out)?;
    write_json(&out.report, &dir.join("report.json"))?;
    write_tables(&out.report, dir)?;
    write_scatter(&case, &out, &dir.join("scatter.csv"))?;
    write_cluster_csv(&out, &dir.join("clusters.csv"))?;
    write_partition_csv(&out.chunks, &dir.join("partition.csv"))?;
    write_groups_json(&out.groups, &dir.join("groups.json"))?;
    let r = &out.report;
    println!(
        "{} {}: n_bases={} obj_full={} obj_agg={} rel_error={:e} exact={} size_reduction={:.2}%",
        r.method, r.variant, r.n_bases, r.obj_full, r.obj_agg, r.rel_error, r.exact, r.size_reduction_pct
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if a.require_exact && !r.exact {
        eprintln!("error: rel_error {:e} exceeds exact tolerance {:e}", r.rel_error, r.exact_tol);
        return Ok(EXIT_INEXACT);
    }
    Ok(0)
}

#[derive(Serialize)]
struct CensusSummary<'a> {
    n: usize,
    min_zero_error_k: Option<usize>,
    unique_at_min: bool,
    basis_partition: String,
    all_zero_error_refine_basis: bool,
    note: Option<&'static str>,
    census: &'a Census,
    config: &'a CensusOptions,
    input_sha256: String,
}

fn cmd_census(a: &CensusArgs) -> Result<u8> {
    let case = match &a.regimes {
        Some(sizes) => {
            let sizes: [usize; 3] = sizes.as_slice().try_into().map_err(|_| invalid("--regimes takes three sizes"))?;
            let (spec, series) = three_regime_case(a.input.synth.seed, sizes);
            validate_system(spec, series).map_err(CoreError::Validation)?
        }
        None => a.input.load()?,
    };
    if case.horizon() != 12 && !a.any_horizon {
        return Err(invalid(format!("census expects a 12-hour case, got {}; pass --any-horizon to override", case.horizon())));
    }
    let opts = CensusOptions {
        tol: positive("census-tol", a.census_tol)?,
        q: positive("q", a.q)?,
        mode: a.signature_mode,
        ..CensusOptions::default()
    };
    let census = zero_error_census(&case, &opts).context("census")?;
    let dir = out_dir(&a.out)?;
    write_census_csv(&census, &dir.join("census.csv"))?;
    let summary = CensusSummary {
        n: census.n,
        min_zero_error_k: census.min_zero_error_k,
        unique_at_min: census.unique_at_min,
        basis_partition: census.basis_partition.to_string(),
        all_zero_error_refine_basis: census.all_zero_error_refine_basis(),
        note: (census.n == 12).then_some(K3_NOTE),
        census: &census,
        config: &opts,
        input_sha256: input_hash(&case),
    };
    write_json(&summary, &dir.join("census_summary.json"))?;
    println!("clusters,possible_clusterings,clusterings_with_no_error");
    for r in &census.rows {
        println!("{},{},{}", r.k, r.n_partitions, r.n_zero_error);
    }
    let min = census.min_zero_error_k.map_or("none".to_string(), |k| k.to_string());
    println!("minimal zero-error cardinality: {min}");
    println!("unique at minimum: {}", census.unique_at_min);
    println!("zero-error clusterings refining the basis partition: {}/{}", census.n_zero_error_refining, census.n_zero_error);
    if let Some(note) = summary.note {
        println!("note: {note}");
    }
    Ok(0)
}

#[derive(Serialize)]
struct PartitionReport<'a> {
    variant: ModelVariant,
    horizon: usize,
    outcome: &'a PartitionOutcome,
    config: &'a PartitionOptions,
    input_sha256: String,
}

fn cmd_partition(a: &PartitionArgs) -> Result<u8> {
    let case = a.input.load()?;
    let opts = a.partition.options()?;
    let (p, im) = build_full(&case, a.model.variant, &a.model.model())?;
    let r = solve_optimal(&p, &a.model.solve()?, "full model")?;
    let outcome = partition_horizon(&case, &r, &im, &opts)?;
    let dir = out_dir(&a.out)?;
    write_partition_csv(&outcome.chunks, &dir.join("partition.csv"))?;
    let report = PartitionReport { variant: a.model.variant, horizon: case.horizon(), outcome: &outcome, config: &opts, input_sha256: input_hash(&case) };
    write_json(&report, &dir.join("partition.json"))?;
    println!(
        "{} chunks, longest {}, {} boundary truncation(s), {} undecomposable hour(s), {} closure merge(s)",
        outcome.chunks.len(),
        outcome.chunks.iter().map(|c| c.length).max().unwrap_or(0),
        outcome.boundary_truncations,
        outcome.undecomposable_hours,
        outcome.closure_merges
    );
    Ok(0)
}

#[derive(Serialize)]
struct SolveReport {
    variant: ModelVariant,
    horizon: usize,
    objective: f64,
    n_vars: usize,
    n_rows: usize,
    kkt_residual: f64,
    input_sha256: String,
}

/// One-indexed hour from the trailing `k=` index of a label.
fn label_hour(label: &str) -> Option<usize> {
    let at = label.rfind("k=")?;
    label[at + 2..].trim_end_matches(']').parse().ok()
}

fn cmd_solve(a: &SolveArgs) -> Result<u8> {
    let case = a.input.load()?;
    let (p, _) = build_full(&case, a.model.variant, &a.model.model())?;
    let r = solve_optimal(&p, &a.model.solve()?, "full model")?;
    let kkt = check_kkt(&p, &r).map_err(|source| CoreError::Lp { stage: "full model KKT check".into(), source })?;
    let dir = out_dir(&a.out)?;
    let path = dir.join("duals.csv");
    let csv_err = |source| CoreError::Csv { path: path.clone(), source };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["hour", "kind", "label", "value"]).map_err(csv_err)?;
    let rows = p.row_labels().iter().zip(&r.row_duals).map(|(l, v)| ("row_dual", l, v));
    let cols = p.col_labels().iter().zip(&r.bound_duals).map(|(l, v)| ("reduced_cost", l, v));
    let mut records: Vec<(usize, &str, &String, &f64)> =
        rows.chain(cols).map(|(kind, l, v)| (label_hour(l).unwrap_or(0), kind, l, v)).collect();
    records.sort_by_key(|r| r.0);
    for (h, kind, l, v) in records {
        w.write_record([h.to_string(), kind.to_string(), l.clone(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CoreError::Io { path: path.clone(), source })?;
    let report = SolveReport {
        variant: a.model.variant,
        horizon: case.horizon(),
        objective: r.objective,
        n_vars: p.n_cols(),
        n_rows: p.n_rows(),
        kkt_residual: kkt.max_residual(),
        input_sha256: input_hash(&case),
    };
    write_json(&report, &dir.join("solve.json"))?;
    println!("{} over {} hours: objective {} (KKT residual {:e})", a.model.variant, case.horizon(), r.objective, kkt.max_residual());
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<CoreError>());
    match core {
        Some(CoreError::Solver { .. } | CoreError::Lp { .. }) => EXIT_SOLVER,
        Some(CoreError::NoDecomposition { .. } | CoreError::HourOutOfRange { .. } | CoreError::Coverage { .. }) => EXIT_FAILURE,
        Some(_) => EXIT_INVALID,
        None => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Census(a) => cmd_census(a),
        Command::Partition(a) => cmd_partition(a),
        Command::Solve(a) => cmd_solve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
