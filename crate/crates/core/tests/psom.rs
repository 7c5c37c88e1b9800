mod common;

use basis_lp::{check_kkt, SolveOptions};
use basis_tsa::psom::{
    build_aggregated, build_full, build_window, relative_label, solve_optimal, FlowLimitMode, ModelOptions, ModelVariant, RepresentativePeriod,
    RepresentativePeriods,
};
use basis_tsa::synth::{single_node_spec, three_bus_spec, SynthProfile};
use basis_tsa::CoreError;
use common::*;
use proptest::prelude::*;

fn solve(case: &basis_tsa::system::ValidatedCase, v: ModelVariant) -> (basis_lp::LpProblem, basis_tsa::psom::IndexMap, basis_lp::SolveResult) {
    let (p, im) = build_full(case, v, &ModelOptions::default()).unwrap();
    let r = solve_optimal(&p, &SolveOptions::default(), "test").unwrap();
    assert!(check_kkt(&p, &r).unwrap().pass);
    (p, im, r)
}

/// Merit-order dispatch of one hour without ramping: wind first, thermal next.
fn merit_thermal(demand: f64, wind: f64) -> f64 {
    (demand - wind.min(demand)).min(1000.0)
}

#[test]
fn four_hour_counts() {
    let case = table_case();
    let (p, _) = build_full(&case, ModelVariant::Ed, &ModelOptions::default()).unwrap();
    assert_eq!((p.n_cols(), p.n_rows()), (12, 4));
    let (p, _) = build_full(&case, ModelVariant::EdRamping, &ModelOptions::default()).unwrap();
    assert_eq!((p.n_cols(), p.n_rows()), (12, 4 + 2 * 3));
}

#[test]
fn four_hour_dispatch_without_ramping() {
    let (_, im, r) = solve(&table_case(), ModelVariant::Ed);
    for h in 0..4 {
        let thermal = r.primal[im.positions[h].gen[0].0];
        assert!(close(thermal, merit_thermal(TABLE_DEMAND[h], TABLE_WIND[h]), 1e-6), "hour {h}: {thermal}");
        assert!(close(r.row_duals[im.positions[h].balance[0].0], 24.0, 1e-6));
    }
    let thermal: Vec<f64> = (0..4).map(|h| r.primal[im.positions[h].gen[0].0]).collect();
    for (a, b) in thermal.iter().zip([130.2, 171.0, 266.0, 371.0]) {
        assert!(close(*a, b, 1e-6), "{thermal:?}");
    }
}

#[test]
fn four_hour_dispatch_with_ramping() {
    let (_, im, r) = solve(&table_case(), ModelVariant::EdRamping);
    let thermal: Vec<f64> = (0..4).map(|h| r.primal[im.positions[h].gen[0].0]).collect();
    for (a, b) in thermal.iter().zip([130.2, 171.0, 271.0, 371.0]) {
        assert!(close(*a, b, 1e-6), "{thermal:?}");
    }
    let mc: Vec<f64> = (0..4).map(|h| r.row_duals[im.positions[h].balance[0].0]).collect();
    assert!(close(mc[0], 24.0, 1e-6) && close(mc[2], 3.0, 1e-6), "{mc:?}");
    assert!(close(mc[1] + mc[3], 69.0, 1e-6), "{mc:?}");
}

#[test]
fn ramping_requires_a_ramp_limited_unit() {
    let mut spec = single_node_spec();
    spec.generators[0].ramp_up = None;
    spec.generators[0].ramp_down = None;
    let case = case_from(spec, &TABLE_DEMAND, &TABLE_WIND);
    assert!(matches!(build_full(&case, ModelVariant::EdRamping, &ModelOptions::default()), Err(CoreError::VariantRequirement { .. })));
}

#[test]
fn labels_follow_the_family_grammar() {
    let case = table_case();
    let (p, im) = build_full(&case, ModelVariant::EdRamping, &ModelOptions::default()).unwrap();
    assert_eq!(p.row_label(im.positions[2].balance[0]), "balance[k=3]");
    assert_eq!(p.row_label(im.positions[2].ramp_up[0].unwrap()), "rampup[t=T,k=3]");
    assert_eq!(p.col_label(im.positions[0].gen[1]), "p[g=W,k=1]");
    assert!(im.positions[0].ramp_up[0].is_none());
    assert_eq!(relative_label("p[g=T,r=2,k=5]"), "p[g=T]");
}

#[test]
fn network_counts_match_closed_form() {
    let case = synth(3, 6, SynthProfile::ThreeBus);
    let (g, nd, l, n) = (2, 1, 3, 3);
    let per_line = ModelOptions::default();
    let per_bus = ModelOptions { flow_limits: FlowLimitMode::PerBus, ..ModelOptions::default() };
    let (p, _) = build_full(&case, ModelVariant::EdNetwork, &per_line).unwrap();
    assert_eq!((p.n_cols(), p.n_rows()), (6 * (g + nd + 2 * l), 6 * n));
    let (p, _) = build_full(&case, ModelVariant::EdNetwork, &per_bus).unwrap();
    assert_eq!(p.n_rows(), 6 * (n + 2 * n));
    let (p, _) = build_full(&case, ModelVariant::EdNetworkRamping, &per_line).unwrap();
    assert_eq!(p.n_rows(), 6 * n + 2 * 5);
}

#[test]
fn three_length_one_periods_give_nine_columns() {
    let case = synth(1, 10, SynthProfile::SingleNode);
    let periods = RepresentativePeriods {
        periods: vec![
            RepresentativePeriod::centroid(&case, &[0, 1, 2], 1),
            RepresentativePeriod::centroid(&case, &[3, 4, 5, 6], 1),
            RepresentativePeriod::centroid(&case, &[7, 8, 9], 1),
        ],
    };
    let (p, im) = build_aggregated(&case, &periods, ModelVariant::Ed, &ModelOptions::default()).unwrap();
    assert_eq!((p.n_cols(), p.n_rows()), (9, 3));
    assert_eq!(im.weights, vec![3, 4, 3]);
}

#[test]
fn coverage_mismatch_is_an_error() {
    let case = synth(1, 10, SynthProfile::SingleNode);
    let periods = RepresentativePeriods { periods: vec![RepresentativePeriod::centroid(&case, &[0, 1], 1)] };
    assert!(matches!(
        build_aggregated(&case, &periods, ModelVariant::Ed, &ModelOptions::default()),
        Err(CoreError::Coverage { expected: 10, got: 2 })
    ));
}

#[test]
fn identity_aggregation_equals_full_for_every_variant() {
    for (profile, variants) in [
        (SynthProfile::SingleNodeRampstress, [ModelVariant::Ed, ModelVariant::EdRamping]),
        (SynthProfile::ThreeBusRampstress, [ModelVariant::EdNetwork, ModelVariant::EdNetworkRamping]),
    ] {
        let case = synth(9, 48, profile);
        for v in variants {
            let (fp, _, fr) = solve(&case, v);
            let id = RepresentativePeriods::identity(&case);
            let (ap, _) = build_aggregated(&case, &id, v, &ModelOptions::default()).unwrap();
            assert_eq!((ap.n_cols(), ap.n_rows()), (fp.n_cols(), fp.n_rows()));
            let ar = solve_optimal(&ap, &SolveOptions::default(), "identity").unwrap();
            assert_eq!(ar.objective, fr.objective, "{v}");
        }
    }
}

#[test]
fn strict_objective_weights_only_non_supplied_power() {
    let case = synth(1, 8, SynthProfile::SingleNode);
    let periods = RepresentativePeriods { periods: vec![RepresentativePeriod::centroid(&case, &[0, 1, 2, 3, 4, 5, 6, 7], 1)] };
    let strict = ModelOptions { strict_paper_objective: true, ..ModelOptions::default() };
    let (full, im) = build_aggregated(&case, &periods, ModelVariant::Ed, &ModelOptions::default()).unwrap();
    let (lit, _) = build_aggregated(&case, &periods, ModelVariant::Ed, &strict).unwrap();
    let at = &im.positions[0];
    assert_eq!(full.objective()[at.gen[0].0], 8.0 * 24.0);
    assert_eq!(lit.objective()[at.gen[0].0], 24.0);
    assert_eq!(lit.objective()[at.nsp[0].unwrap().0], 8.0 * 5000.0);
}

#[test]
fn windows_of_a_flat_case_sum_to_the_full_objective() {
    // Constant demand never binds a ramp row, so every split point is free.
    let demand = vec![400.0; 12];
    let wind: Vec<f64> = (0..12).map(|h| 50.0 + 10.0 * h as f64).collect();
    for spec in [single_node_spec(), three_bus_spec()] {
        let network = spec.buses.len() > 1;
        let case = if network {
            let mut series = synth(1, 12, SynthProfile::ThreeBus).series().clone();
            series.demand.insert("B3".into(), demand.clone());
            series.capacity_factor.insert("W".into(), wind.iter().map(|w| w / 500.0).collect());
            basis_tsa::system::validate_system(spec, series).unwrap()
        } else {
            case_from(spec, &demand, &wind)
        };
        for v in ModelVariant::ALL.into_iter().filter(|v| v.has_network() == network) {
            let (_, _, fr) = solve(&case, v);
            for l in [1, 3, 4, 6] {
                let sum: f64 = (0..12 / l)
                    .map(|c| {
                        let (p, _) = build_window(&case, c * l, l, v, &ModelOptions::default()).unwrap();
                        solve_optimal(&p, &SolveOptions::default(), "window").unwrap().objective
                    })
                    .sum();
                assert!((sum - fr.objective).abs() <= 1e-9 * fr.objective.abs(), "{v} L={l}: {sum} vs {}", fr.objective);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn doubling_a_weight_equals_listing_twice(
        demand in proptest::collection::vec(0.0f64..1500.0, 4),
        wind in proptest::collection::vec(0.0f64..500.0, 4),
        ramping in any::<bool>(),
    ) {
        let case = single_node_case(&demand, &wind);
        let v = if ramping { ModelVariant::EdRamping } else { ModelVariant::Ed };
        let rest = RepresentativePeriod::centroid(&case, &[2, 3], 1);
        let mut pair = RepresentativePeriod::centroid(&case, &[0], 1);
        pair.weight = 2;
        let mut single = pair.clone();
        single.weight = 1;
        let twice = RepresentativePeriods { periods: vec![pair, rest.clone()] };
        let listed = RepresentativePeriods { periods: vec![single.clone(), single, rest] };
        let o = ModelOptions::default();
        let a = solve_optimal(&build_aggregated(&case, &twice, v, &o).unwrap().0, &SolveOptions::default(), "a").unwrap();
        let b = solve_optimal(&build_aggregated(&case, &listed, v, &o).unwrap().0, &SolveOptions::default(), "b").unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-9 * a.objective.abs().max(1.0));
    }
}
