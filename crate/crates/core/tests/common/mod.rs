#![allow(dead_code)]

use std::collections::BTreeMap;

use basis_tsa::synth::{single_node_spec, synth_case, SynthProfile, WIND_CAPACITY};
use basis_tsa::system::{validate_system, SystemSpec, TimeSeriesSet, ValidatedCase};

pub const TABLE_DEMAND: [f64; 4] = [170.2, 176.0, 281.7, 391.0];
pub const TABLE_WIND: [f64; 4] = [40.0, 5.0, 15.7, 20.0];

pub fn single_node_case(demand: &[f64], wind_mw: &[f64]) -> ValidatedCase {
    case_from(single_node_spec(), demand, wind_mw)
}

pub fn case_from(spec: SystemSpec, demand: &[f64], wind_mw: &[f64]) -> ValidatedCase {
    let bus = spec.buses[0].clone();
    let series = TimeSeriesSet {
        horizon: demand.len(),
        demand: BTreeMap::from([(bus, demand.to_vec())]),
        capacity_factor: BTreeMap::from([("W".to_string(), wind_mw.iter().map(|w| w / WIND_CAPACITY).collect())]),
    };
    validate_system(spec, series).expect("fixture is valid")
}

/// The four-hour dispatch fixture.
pub fn table_case() -> ValidatedCase {
    single_node_case(&TABLE_DEMAND, &TABLE_WIND)
}

pub fn synth(seed: u64, horizon: usize, profile: SynthProfile) -> ValidatedCase {
    let (s, t) = synth_case(seed, horizon, profile).expect("synth");
    validate_system(s, t).expect("synth output is valid")
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
