//! Seeded synthetic cases standing in for measured demand and wind data.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::system::{Generator, GeneratorKind, Line, SystemSpec, TimeSeriesSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthProfile {
    SingleNode,
    SingleNodeRampstress,
    ThreeBus,
    ThreeBusRampstress,
}

impl SynthProfile {
    pub const ALL: [SynthProfile; 4] =
        [SynthProfile::SingleNode, SynthProfile::SingleNodeRampstress, SynthProfile::ThreeBus, SynthProfile::ThreeBusRampstress];

    pub fn name(self) -> &'static str {
        match self {
            SynthProfile::SingleNode => "single_node",
            SynthProfile::SingleNodeRampstress => "single_node_rampstress",
            SynthProfile::ThreeBus => "three_bus",
            SynthProfile::ThreeBusRampstress => "three_bus_rampstress",
        }
    }

    fn is_network(self) -> bool {
        matches!(self, SynthProfile::ThreeBus | SynthProfile::ThreeBusRampstress)
    }

    fn is_rampstress(self) -> bool {
        matches!(self, SynthProfile::SingleNodeRampstress | SynthProfile::ThreeBusRampstress)
    }
}

impl fmt::Display for SynthProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthProfile {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SynthProfile::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| CoreError::UnknownProfile(s.to_string()))
    }
}

pub const THERMAL_COST: f64 = 24.0;
pub const WIND_COST: f64 = 3.0;
pub const NSP_COST: f64 = 5000.0;
pub const THERMAL_CAPACITY: f64 = 1000.0;
pub const WIND_CAPACITY: f64 = 500.0;
pub const RAMP_LIMIT: f64 = 100.0;

fn thermal(bus: &str) -> Generator {
    Generator {
        id: "T".into(),
        kind: GeneratorKind::Thermal,
        bus: bus.into(),
        p_min: 0.0,
        p_max: THERMAL_CAPACITY,
        variable_cost: THERMAL_COST,
        ramp_up: Some(RAMP_LIMIT),
        ramp_down: Some(RAMP_LIMIT),
    }
}

fn wind(bus: &str) -> Generator {
    Generator {
        id: "W".into(),
        kind: GeneratorKind::Wind,
        bus: bus.into(),
        p_min: 0.0,
        p_max: WIND_CAPACITY,
        variable_cost: WIND_COST,
        ramp_up: None,
        ramp_down: None,
    }
}

/// One bus carrying a 1000 MW thermal unit and a 500 MW wind unit.
pub fn single_node_spec() -> SystemSpec {
    SystemSpec { buses: vec!["B1".into()], lines: vec![], generators: vec![thermal("B1"), wind("B1")], nsp_cost: NSP_COST }
}

/// Triangle: wind at B1, thermal at B2, all load at B3. The wind unit reaches the load over
/// L1 directly or over L2 and L3 through the thermal bus.
pub fn three_bus_spec() -> SystemSpec {
    let line = |id: &str, a: &str, b: &str, limit: f64| Line {
        id: id.into(),
        from_bus: a.into(),
        to_bus: b.into(),
        flow_limit: limit,
        transmission_cost: 0.0,
    };
    SystemSpec {
        buses: vec!["B1".into(), "B2".into(), "B3".into()],
        lines: vec![line("L1", "B1", "B3", 220.0), line("L2", "B1", "B2", 120.0), line("L3", "B2", "B3", 1000.0)],
        generators: vec![thermal("B2"), wind("B1")],
        nsp_cost: NSP_COST,
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Deterministic case for `seed`. Demand lies in `[0, Σ p_max]`, capacity factors in `(0, 1)`.
pub fn synth_case(seed: u64, horizon: usize, profile: SynthProfile) -> Result<(SystemSpec, TimeSeriesSet), CoreError> {
    if horizon == 0 {
        return Err(CoreError::OutOfRange("horizon must be at least one hour".into()));
    }
    let spec = if profile.is_network() { three_bus_spec() } else { single_node_spec() };
    let cap: f64 = spec.generators.iter().map(|g| g.p_max).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((profile as u64) << 32));
    let stress = profile.is_rampstress();

    let (wind_noise, wind_persist, wind_offset) = if stress { (0.9, 0.75, 0.0) } else { (0.25, 0.95, -0.3) };
    let noise = Normal::new(0.0, wind_noise).expect("positive std");
    let mut z = 0.0;
    let cf: Vec<f64> = (0..horizon)
        .map(|_| {
            z = wind_persist * z + noise.sample(&mut rng);
            round_to(logistic(2.0 * z + wind_offset), 1e-4).clamp(1e-4, 1.0 - 1e-4)
        })
        .collect();

    let peak = if profile.is_network() { 1000.0 } else { cap };
    let demand_noise = Normal::new(0.0, if stress { 45.0 } else { 35.0 }).expect("positive std");
    let phase: f64 = rng.gen_range(0.0..TAU);
    let mut demand: Vec<f64> = (0..horizon)
        .map(|h| {
            let h = h as f64;
            let daily = (TAU * h / 24.0 + phase).sin();
            let season = (TAU * h / 8736.0).cos();
            let mut d = if stress {
                // Sharp intra-day swings that outpace the thermal ramp limit.
                520.0 + 260.0 * daily + 140.0 * (TAU * h / 6.0 + phase).sin() + 60.0 * season
            } else {
                520.0 + 200.0 * daily + 100.0 * season
            };
            d += demand_noise.sample(&mut rng);
            if !profile.is_network() && rng.gen_bool(0.006) {
                d += rng.gen_range(500.0..900.0);
            }
            round_to(d.clamp(0.0, peak), 0.01)
        })
        .collect();
    if stress && horizon >= 2 && !has_ramp_stress(&demand, RAMP_LIMIT) {
        demand[1] = round_to((demand[0] + 1.5 * RAMP_LIMIT).min(peak), 0.01);
        if demand[1] - demand[0] <= RAMP_LIMIT {
            demand[0] = round_to((demand[1] - 1.5 * RAMP_LIMIT).max(0.0), 0.01);
        }
    }

    let mut d = BTreeMap::new();
    if profile.is_network() {
        d.insert("B1".to_string(), vec![0.0; horizon]);
        d.insert("B2".to_string(), vec![0.0; horizon]);
        d.insert("B3".to_string(), demand);
    } else {
        d.insert("B1".to_string(), demand);
    }
    let mut c = BTreeMap::new();
    c.insert("W".to_string(), cf);
    Ok((spec, TimeSeriesSet { horizon, demand: d, capacity_factor: c }))
}

/// Whether some consecutive pair of hours has a demand increase larger than `ramp_up`.
pub fn has_ramp_stress(demand: &[f64], ramp_up: f64) -> bool {
    demand.windows(2).any(|w| w[1] - w[0] > ramp_up)
}

/// Single-node case whose hours fall into three dispatch regimes of the given sizes:
/// thermal marginal, wind marginal (curtailment), and non-supplied power. Hours are shuffled.
pub fn three_regime_case(seed: u64, sizes: [usize; 3]) -> (SystemSpec, TimeSeriesSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut regimes: Vec<usize> = (0..3).flat_map(|r| std::iter::repeat(r).take(sizes[r])).collect();
    regimes.shuffle(&mut rng);
    let mut demand = Vec::new();
    let mut cf = Vec::new();
    for r in regimes {
        let (w, d) = match r {
            0 => {
                let w: f64 = rng.gen_range(40.0..400.0);
                (w, rng.gen_range(w + 40.0..THERMAL_CAPACITY + w - 40.0))
            }
            1 => {
                let w: f64 = rng.gen_range(250.0..490.0);
                (w, rng.gen_range(30.0..w - 30.0))
            }
            _ => {
                let w: f64 = rng.gen_range(20.0..120.0);
                (w, rng.gen_range(THERMAL_CAPACITY + w + 30.0..THERMAL_CAPACITY + WIND_CAPACITY))
            }
        };
        cf.push(round_to(w / WIND_CAPACITY, 1e-4));
        demand.push(round_to(d, 0.01));
    }
    let horizon = demand.len();
    let series = TimeSeriesSet {
        horizon,
        demand: BTreeMap::from([("B1".to_string(), demand)]),
        capacity_factor: BTreeMap::from([("W".to_string(), cf)]),
    };
    (single_node_spec(), series)
}
