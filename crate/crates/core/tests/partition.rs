mod common;

use basis_lp::{LpProblem, SolveOptions, SolveResult};
use basis_tsa::basis::{SignatureMode, DEFAULT_DUAL_STEP};
use basis_tsa::partition::{
    check_chunks, decompose_mc, group_chunks, partition_duals, partition_horizon, ramp_length, to_representative_periods, Chunk, CostLevels,
    DualSeries, LengthRule, McDecomposition, PartitionOptions,
};
use basis_tsa::psom::{build_aggregated, build_full, solve_optimal, IndexMap, ModelOptions, ModelVariant};
use basis_tsa::synth::SynthProfile;
use basis_tsa::system::ValidatedCase;
use basis_tsa::CoreError;
use common::*;
use proptest::prelude::*;

const COSTS: CostLevels = CostLevels { nsp: 5000.0, thermal: 24.0, wind: 3.0 };

fn solved(case: &ValidatedCase, v: ModelVariant) -> (LpProblem, IndexMap, SolveResult) {
    let (p, im) = build_full(case, v, &ModelOptions::default()).unwrap();
    let r = solve_optimal(&p, &SolveOptions::default(), "test").unwrap();
    (p, im, r)
}

fn spans(chunks: &[Chunk]) -> Vec<(usize, usize)> {
    chunks.iter().map(|c| (c.start, c.length)).collect()
}

/// Exhaustive search over a box of integer triples, energy-balanced triples preferred.
fn oracle_decomposition(mc: f64) -> (i64, i64, i64) {
    let mut hits = Vec::new();
    for a in -1..=1i64 {
        for b in -60..=60i64 {
            for c in -400..=400i64 {
                if (mc - (a as f64 * 5000.0 + b as f64 * 24.0 + c as f64 * 3.0)).abs() <= 1e-6 {
                    hits.push((a + b + c != 1, a.abs() + b.abs() + c.abs(), a.abs(), b.abs(), (a, b, c)));
                }
            }
        }
    }
    hits.into_iter().min().expect("decomposable").4
}

fn series(mc: &[f64], up: &[f64], down: &[f64], wind: &[f64]) -> DualSeries {
    DualSeries { mc: mc.iter().map(|&m| vec![m]).collect(), ramp_up: up.to_vec(), ramp_down: down.to_vec(), wind: wind.to_vec() }
}

#[test]
fn decompositions_of_reference_marginal_costs() {
    let rows = [
        (3.0, (0, 0, 1)),
        (24.0, (0, 1, 0)),
        (45.0, (0, 2, -1)),
        (66.0, (0, 3, -2)),
        (87.0, (0, 4, -3)),
        (108.0, (0, 5, -4)),
        (129.0, (0, 6, -5)),
        (5000.0, (1, 0, 0)),
    ];
    for (mc, want) in rows {
        let d = decompose_mc(mc, 5000.0, 24.0, 3.0, 1e-6).unwrap();
        assert_eq!((d.a, d.b, d.c), want, "mc {mc}");
        assert!(d.energy_balanced && d.residual.abs() <= 1e-6);
    }
}

#[test]
fn decomposition_matches_exhaustive_search() {
    for mc in [0.0, 6.0, 21.0, 48.0, 90.0, 150.0, 4997.0, 5021.0, 4976.0, -21.0, -3.0, 27.0, -4910.0, -4976.0] {
        let d = decompose_mc(mc, 5000.0, 24.0, 3.0, 1e-6).unwrap();
        assert_eq!((d.a, d.b, d.c), oracle_decomposition(mc), "mc {mc}");
    }
}

#[test]
fn decomposition_errors() {
    assert!(matches!(decompose_mc(1.5, 5000.0, 24.0, 3.0, 1e-6), Err(CoreError::NoDecomposition { .. })));
    assert!(matches!(decompose_mc(24.0, 20.0, 24.0, 3.0, 1e-6), Err(CoreError::OutOfRange(_))));
    assert!(decompose_mc(f64::NAN, 5000.0, 24.0, 3.0, 1e-6).is_err());
}

#[test]
fn ramp_lengths() {
    assert_eq!(ramp_length(66.0, 24.0), 3);
    assert_eq!(ramp_length(24.0, 24.0), 1);
    assert_eq!(ramp_length(129.0, 24.0), 5);
    assert_eq!(ramp_length(3.0, 24.0), 1);
    assert_eq!(ramp_length(-40.0, 24.0), 1);
}

#[test]
fn four_hour_fixture_splits_after_the_first_hour() {
    let case = table_case();
    let (p, im, r) = solved(&case, ModelVariant::EdRamping);
    let out = partition_horizon(&case, &r, &im, &PartitionOptions::default()).unwrap();
    assert_eq!(spans(&out.chunks), vec![(0, 1), (1, 3)]);
    // Oracle: each chunk solved on its own, summed, gives the full optimum.
    let checks = check_chunks(&case, ModelVariant::EdRamping, &ModelOptions::default(), &SolveOptions::default(), (&p, &r, &im), &out.chunks, 1e-8)
        .unwrap();
    assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    let sum: f64 = checks.iter().map(|c| c.chunk_objective).sum();
    assert!((sum - r.objective).abs() <= 1e-8 * r.objective);

    let bases = group_chunks(&case, &out.chunks, (&p, &r, &im), SignatureMode::Duals, DEFAULT_DUAL_STEP);
    let periods = to_representative_periods(&bases, 4).unwrap();
    assert_eq!(periods.periods.len(), 2);
    assert_eq!(periods.represented_hours(), 4);
}

#[test]
fn a_split_across_a_binding_ramp_is_not_exact() {
    let case = table_case();
    let (p, im, r) = solved(&case, ModelVariant::EdRamping);
    let unit = |s| Chunk { start: s, length: 1, boundary_truncated: false, undecomposable: false, merged_by_closure: false };
    let checks =
        check_chunks(&case, ModelVariant::EdRamping, &ModelOptions::default(), &SolveOptions::default(), (&p, &r, &im), &(0..4).map(unit).collect::<Vec<_>>(), 1e-8)
            .unwrap();
    assert!(checks.iter().any(|c| !c.pass));
}

#[test]
fn partitioning_needs_a_ramping_solve() {
    let case = table_case();
    let (_, im, r) = solved(&case, ModelVariant::Ed);
    assert!(matches!(partition_horizon(&case, &r, &im, &PartitionOptions::default()), Err(CoreError::VariantRequirement { .. })));
}

#[test]
fn without_binding_ramps_every_chunk_has_length_one() {
    // Hour-to-hour thermal changes stay below 70 MW, well inside the 100 MW limits.
    let demand: Vec<f64> = (0..24).map(|h| 400.0 + 25.0 * ((h % 3) as f64)).collect();
    let wind: Vec<f64> = (0..24).map(|h| 100.0 + 20.0 * ((h % 2) as f64)).collect();
    let case = single_node_case(&demand, &wind);
    let (_, im, r) = solved(&case, ModelVariant::EdRamping);
    let out = partition_horizon(&case, &r, &im, &PartitionOptions::default()).unwrap();
    assert!(out.chunks.iter().all(|c| c.length == 1));
    assert_eq!(out.chunks.len(), 24);
}

#[test]
fn ramp_stressed_horizon_is_covered_by_exact_chunks() {
    for (seed, profile, v) in [
        (1, SynthProfile::SingleNodeRampstress, ModelVariant::EdRamping),
        (2, SynthProfile::SingleNodeRampstress, ModelVariant::EdRamping),
        (3, SynthProfile::ThreeBusRampstress, ModelVariant::EdNetworkRamping),
    ] {
        let case = synth(seed, 400, profile);
        let (p, im, r) = solved(&case, v);
        let out = partition_horizon(&case, &r, &im, &PartitionOptions::default()).unwrap();
        assert_eq!(out.chunks.iter().map(|c| c.length).sum::<usize>(), 400);
        assert!(out.chunks.windows(2).all(|w| w[0].end() == w[1].start));
        assert!(out.chunks.iter().any(|c| c.length > 1), "seed {seed}");
        let checks = check_chunks(&case, v, &ModelOptions::default(), &SolveOptions::default(), (&p, &r, &im), &out.chunks, 1e-8).unwrap();
        let failing: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(failing.is_empty(), "{failing:?}");

        let bases = group_chunks(&case, &out.chunks, (&p, &r, &im), SignatureMode::Duals, DEFAULT_DUAL_STEP);
        assert_eq!(bases.iter().map(|b| b.length * b.weight()).sum::<usize>(), 400);
        assert!(bases.iter().all(|b| b.members.iter().all(|&s| out.chunks.iter().any(|c| c.start == s && c.length == b.length))));
        let periods = to_representative_periods(&bases, 400).unwrap();
        let (ap, _) = build_aggregated(&case, &periods, v, &ModelOptions::default()).unwrap();
        let agg = solve_optimal(&ap, &SolveOptions::default(), "agg").unwrap().objective;
        assert!((agg - r.objective).abs() / r.objective < 1e-8, "seed {seed}: {agg} vs {}", r.objective);
    }
}

#[test]
fn every_marginal_cost_of_a_solved_fixture_decomposes() {
    let case = synth(5, 400, SynthProfile::SingleNodeRampstress);
    let (_, im, r) = solved(&case, ModelVariant::EdRamping);
    for s in DualSeries::from_solution(&case, &r, &im).mc {
        let d: McDecomposition = decompose_mc(s[0], 5000.0, 24.0, 3.0, 1e-6).unwrap();
        assert!(d.residual.abs() <= 1e-6);
    }
}

#[test]
fn single_chunk_forms_one_basis() {
    let case = table_case();
    let (p, im, r) = solved(&case, ModelVariant::EdRamping);
    let whole = [Chunk { start: 0, length: 4, boundary_truncated: false, undecomposable: false, merged_by_closure: false }];
    let bases = group_chunks(&case, &whole, (&p, &r, &im), SignatureMode::Duals, DEFAULT_DUAL_STEP);
    assert_eq!(bases.len(), 1);
    assert_eq!(bases[0].weight(), 1);
    assert!(matches!(to_representative_periods(&bases, 5), Err(CoreError::Coverage { expected: 5, got: 4 })));
}

#[test]
fn negative_price_extends_to_the_next_shortage_hour() {
    let s = series(&[24.0, -5.0, 24.0, 5000.0, 24.0, 24.0], &[0.0; 6], &[0.0; 6], &[0.0; 6]);
    let out = partition_duals(&s, COSTS, &PartitionOptions::default());
    assert_eq!(spans(&out.chunks), vec![(0, 1), (1, 3), (4, 1), (5, 1)]);
}

#[test]
fn shortage_hour_extends_to_the_next_separable_hour() {
    let s = series(&[24.0, 5000.0, 5000.0, 24.0, 3.0], &[0.0; 5], &[0.0; 5], &[0.0; 5]);
    let out = partition_duals(&s, COSTS, &PartitionOptions { closure: false, ..Default::default() });
    assert_eq!(spans(&out.chunks), vec![(0, 1), (1, 3), (4, 1)]);
}

#[test]
fn ramp_up_dual_reaches_back_to_a_wind_bound_hour() {
    // MC 66 at hour 5 with a binding ramp-up edge; wind is at its bound at hour 2.
    let s = series(&[24.0, 24.0, 3.0, 24.0, 24.0, 66.0, 24.0], &[0.0, 0.0, 0.0, 0.0, 0.0, 42.0, 0.0], &[0.0; 7], &[0.0, 0.0, 21.0, 0.0, 0.0, 0.0, 0.0]);
    let out = partition_duals(&s, COSTS, &PartitionOptions { closure: false, ..Default::default() });
    assert_eq!(spans(&out.chunks), vec![(0, 1), (1, 1), (2, 4), (6, 1)]);
    assert!(!out.chunks[2].boundary_truncated);
}

#[test]
fn ramp_down_dual_reaches_forward() {
    let s = series(&[24.0, 45.0, 24.0, 24.0, 24.0], &[0.0; 5], &[0.0, 21.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 21.0, 0.0]);
    let out = partition_duals(&s, COSTS, &PartitionOptions { closure: false, ..Default::default() });
    assert_eq!(spans(&out.chunks), vec![(0, 1), (1, 3), (4, 1)]);
}

#[test]
fn search_past_the_horizon_is_clamped_and_flagged() {
    let s = series(&[45.0, 66.0, 24.0], &[0.0, 42.0, 0.0], &[0.0; 3], &[0.0; 3]);
    let out = partition_duals(&s, COSTS, &PartitionOptions { closure: false, ..Default::default() });
    assert_eq!(spans(&out.chunks), vec![(0, 2), (2, 1)]);
    assert!(out.chunks[0].boundary_truncated);
    assert!(out.boundary_truncations >= 1);
}

#[test]
fn undecomposable_price_joins_the_neighbouring_separable_hours() {
    let s = series(&[24.0, 24.0, 1.5, 24.0, 24.0], &[0.0; 5], &[0.0; 5], &[0.0; 5]);
    let out = partition_duals(&s, COSTS, &PartitionOptions::default());
    assert_eq!(spans(&out.chunks), vec![(0, 1), (1, 3), (4, 1)]);
    assert!(out.chunks[1].undecomposable);
    assert_eq!(out.undecomposable_hours, 1);
}

#[test]
fn closure_merges_chunks_across_nonzero_ramp_duals() {
    let s = series(&[24.0, 24.0, 24.0, 24.0], &[0.0, 0.0, 5.0, 0.0], &[0.0, 0.0, 0.0, 2.0], &[0.0; 4]);
    let open = partition_duals(&s, COSTS, &PartitionOptions { closure: false, ..Default::default() });
    assert_eq!(open.chunks.len(), 4);
    let closed = partition_duals(&s, COSTS, &PartitionOptions::default());
    assert_eq!(spans(&closed.chunks), vec![(0, 1), (1, 3)]);
    assert_eq!(closed.closure_merges, 2);
    assert!(closed.chunks[1].merged_by_closure);
}

#[test]
fn length_rules_disagree_on_129() {
    let s = series(&[24.0, 24.0, 24.0, 24.0, 24.0, 129.0], &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], &[0.0; 6], &[21.0, 0.0, 21.0, 0.0, 0.0, 0.0]);
    let nearest = partition_duals(&s, COSTS, &PartitionOptions { closure: false, ..Default::default() });
    let by_b = partition_duals(&s, COSTS, &PartitionOptions { closure: false, length_rule: LengthRule::DecompositionB, ..Default::default() });
    assert_eq!(nearest.length_rule_disagreements, 1);
    assert_eq!(spans(&nearest.chunks).last(), Some(&(0, 6)));
    assert_eq!(spans(&by_b.chunks).last(), Some(&(0, 6)));
    assert_eq!("decomposition_b".parse::<LengthRule>().unwrap(), LengthRule::DecompositionB);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn closed_partitions_are_always_exact(
        demand in proptest::collection::vec(0.0f64..1400.0, 3..10),
        wind_seed in proptest::collection::vec(0.0f64..500.0, 10),
    ) {
        let wind = &wind_seed[..demand.len()];
        let case = single_node_case(&demand, wind);
        let (p, im, r) = solved(&case, ModelVariant::EdRamping);
        let out = partition_horizon(&case, &r, &im, &PartitionOptions::default()).unwrap();
        prop_assert_eq!(out.chunks.iter().map(|c| c.length).sum::<usize>(), demand.len());
        let checks = check_chunks(&case, ModelVariant::EdRamping, &ModelOptions::default(), &SolveOptions::default(), (&p, &r, &im), &out.chunks, 1e-8).unwrap();
        prop_assert!(checks.iter().all(|c| c.pass), "{:?}", checks);
    }
}
