mod common;

use basis_tsa::aggregator::{
    input_hash, rel_error, run_pipeline, size_stats_from_counts, write_cluster_csv, write_groups_json, write_json, write_partition_csv,
    write_scatter, write_tables, Method, PipelineOptions,
};
use basis_tsa::psom::ModelVariant;
use basis_tsa::synth::SynthProfile;
use basis_tsa::CoreError;
use common::*;

fn run(case: &basis_tsa::system::ValidatedCase, v: ModelVariant, m: Method) -> basis_tsa::aggregator::PipelineOutput {
    run_pipeline(case, v, m, &PipelineOptions::default()).unwrap()
}

#[test]
fn size_reduction_percentages() {
    let s = size_stats_from_counts(78_624, 45, 26_208, 15);
    assert_eq!(format!("{:.2}", s.var_reduction_pct), "99.94");
    assert_eq!(size_stats_from_counts(10, 10, 4, 4).var_reduction_pct, 0.0);
    assert!(size_stats_from_counts(10, 12, 4, 4).var_reduction_pct < 0.0);
    assert_eq!(size_stats_from_counts(0, 0, 0, 0).var_reduction_pct, 0.0);
}

#[test]
fn relative_error_uses_a_unit_floor() {
    assert_eq!(rel_error(110.0, 100.0), 0.1);
    assert_eq!(rel_error(0.5, 0.0), 0.5);
}

#[test]
fn identity_is_exact_for_every_variant() {
    for (profile, variants) in [
        (SynthProfile::SingleNodeRampstress, [ModelVariant::Ed, ModelVariant::EdRamping]),
        (SynthProfile::ThreeBusRampstress, [ModelVariant::EdNetwork, ModelVariant::EdNetworkRamping]),
    ] {
        let case = synth(3, 72, profile);
        for v in variants {
            let rep = run(&case, v, Method::Identity).report;
            assert_eq!(rep.rel_error, 0.0, "{v}");
            assert_eq!((rep.n_bases, rep.max_chunk_length, rep.represented_hours), (1, 72, 72));
            assert_eq!(rep.size_reduction_pct, 0.0);
        }
    }
}

#[test]
fn hourly_network_model_has_nine_columns_per_basis() {
    let case = synth(2, 500, SynthProfile::ThreeBus);
    let rep = run(&case, ModelVariant::EdNetwork, Method::HourlyBasis).report;
    assert!(rep.exact, "{}", rep.rel_error);
    assert_eq!(rep.n_vars_agg, 9 * rep.n_bases);
    assert_eq!(rep.n_vars_full, 9 * 500);
    assert!(rep.kkt.pass);
    assert!(rep.signature_modes.is_some());
}

#[test]
fn ramping_requires_the_partition_method() {
    let case = synth(1, 200, SynthProfile::SingleNodeRampstress);
    let err = run_pipeline(&case, ModelVariant::EdRamping, Method::HourlyBasis, &PipelineOptions::default()).unwrap_err();
    assert!(matches!(err, CoreError::VariantRequirement { .. }));
    let forced = run_pipeline(&case, ModelVariant::EdRamping, Method::HourlyBasis, &PipelineOptions { force: true, ..PipelineOptions::default() })
        .unwrap()
        .report;
    assert!(forced.rel_error > 1e-3, "{}", forced.rel_error);
    assert!(!forced.warnings.is_empty());
    assert!(matches!(run_pipeline(&case, ModelVariant::Ed, Method::DualPartition, &PipelineOptions::default()), Err(CoreError::VariantRequirement { .. })));
}

#[test]
fn dual_partition_is_exact_on_ramp_stress() {
    let case = synth(5, 300, SynthProfile::SingleNodeRampstress);
    let out = run(&case, ModelVariant::EdRamping, Method::DualPartition);
    let rep = &out.report;
    let diag = rep.partition.as_ref().unwrap();
    assert!(diag.chunk_failures.is_empty());
    assert!(rep.rel_error < 1e-8, "{}", rep.rel_error);
    assert_eq!(out.chunks.iter().map(|c| c.length).sum::<usize>(), 300);
    assert_eq!(out.groups.iter().map(|g| g.length * g.members.len()).sum::<usize>(), 300);
    assert!(out.assignment.iter().all(|&g| g < out.groups.len()));
    let rows: usize = rep.tables.by_length.iter().map(|r| r.n_subsets).sum();
    assert_eq!(rows, diag.n_chunks);
}

#[test]
fn kmeans_stub_covers_every_hour() {
    let case = synth(1, 200, SynthProfile::SingleNode);
    let out = run(&case, ModelVariant::Ed, Method::NaiveKmeansStub);
    assert!(out.groups.len() <= 5 && !out.groups.is_empty());
    assert_eq!(out.groups.iter().map(|g| g.members.len()).sum::<usize>(), 200);
    assert!(out.report.rel_error.is_finite());
}

#[test]
fn reports_are_byte_deterministic_and_hash_the_input() {
    let case = synth(4, 300, SynthProfile::SingleNode);
    let a = serde_json::to_vec(&run(&case, ModelVariant::Ed, Method::HourlyBasis).report).unwrap();
    let b = serde_json::to_vec(&run(&case, ModelVariant::Ed, Method::HourlyBasis).report).unwrap();
    assert_eq!(a, b);
    let h = input_hash(&case);
    assert_eq!(h.len(), 64);
    assert_ne!(h, input_hash(&synth(5, 300, SynthProfile::SingleNode)));
}

#[test]
fn writers_produce_the_documented_headers() {
    let case = synth(5, 120, SynthProfile::SingleNodeRampstress);
    let out = run(&case, ModelVariant::EdRamping, Method::DualPartition);
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_json(&out.report, &d.join("report.json")).unwrap();
    write_tables(&out.report, d).unwrap();
    write_scatter(&case, &out, &d.join("scatter.csv")).unwrap();
    write_cluster_csv(&out, &d.join("clusters.csv")).unwrap();
    write_partition_csv(&out.chunks, &d.join("partition.csv")).unwrap();
    write_groups_json(&out.groups, &d.join("groups.json")).unwrap();
    let head = |f: &str| std::fs::read_to_string(d.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head("scatter.csv"), "hour,demand,available_wind,basis_id");
    assert_eq!(head("clusters.csv"), "cluster_id,hour");
    assert_eq!(head("partition.csv"), "chunk_id,start_hour,length");
    for f in ["table_size.csv", "table_lengths.csv", "table_summary.csv"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let scatter = std::fs::read_to_string(d.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 121);
    assert!(scatter.lines().nth(1).unwrap().starts_with("1,"));
    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(parsed["method"], "dual_partition");
}
