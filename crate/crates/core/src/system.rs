//! Static grid description, exogenous hourly series, and validation.
//!
//! Hours are 0-indexed in memory and 1-indexed in files and in violation messages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Thermal,
    Wind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub kind: GeneratorKind,
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    pub variable_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_down: Option<f64>,
}

impl Generator {
    pub fn is_ramp_limited(&self) -> bool {
        self.ramp_up.is_some() || self.ramp_down.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub flow_limit: f64,
    pub transmission_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub buses: Vec<String>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub nsp_cost: f64,
}

impl SystemSpec {
    pub fn bus_index(&self, bus: &str) -> Option<usize> {
        self.buses.iter().position(|b| b == bus)
    }

    /// Wind units in declaration order; capacity factor rows follow this order.
    pub fn wind_units(&self) -> impl Iterator<Item = (usize, &Generator)> {
        self.generators.iter().enumerate().filter(|(_, g)| g.kind == GeneratorKind::Wind)
    }
}

/// Hourly demand per bus and capacity factor per wind unit. `NaN` marks a missing entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSet {
    pub horizon: usize,
    pub demand: BTreeMap<String, Vec<f64>>,
    pub capacity_factor: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl Violation {
    fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// A spec and series that passed [`validate_system`]. Immutable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedCase {
    spec: SystemSpec,
    series: TimeSeriesSet,
    /// Demand per hour, indexed `[hour][bus]` in spec bus order.
    #[serde(skip)]
    demand: Vec<Vec<f64>>,
    /// Capacity factor per hour, indexed `[hour][wind unit]` in declaration order.
    #[serde(skip)]
    cf: Vec<Vec<f64>>,
}

impl ValidatedCase {
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn series(&self) -> &TimeSeriesSet {
        &self.series
    }

    pub fn horizon(&self) -> usize {
        self.series.horizon
    }

    pub fn demand_at(&self, hour: usize) -> &[f64] {
        &self.demand[hour]
    }

    pub fn cf_at(&self, hour: usize) -> &[f64] {
        &self.cf[hour]
    }

    /// Buses with positive demand in at least one hour.
    pub fn load_buses(&self) -> Vec<bool> {
        (0..self.spec.buses.len()).map(|b| self.demand.iter().any(|d| d[b] > 0.0)).collect()
    }

    /// Copy of this case restricted to hours `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> ValidatedCase {
        let cut = |m: &BTreeMap<String, Vec<f64>>| {
            m.iter().map(|(k, v)| (k.clone(), v[start..start + len].to_vec())).collect()
        };
        ValidatedCase {
            spec: self.spec.clone(),
            series: TimeSeriesSet {
                horizon: len,
                demand: cut(&self.series.demand),
                capacity_factor: cut(&self.series.capacity_factor),
            },
            demand: self.demand[start..start + len].to_vec(),
            cf: self.cf[start..start + len].to_vec(),
        }
    }
}

/// Checks every invariant of the spec and the series. Never panics; reports all violations.
pub fn validate_system(spec: SystemSpec, series: TimeSeriesSet) -> Result<ValidatedCase, Vec<Violation>> {
    let mut v = Vec::new();
    check_spec(&spec, &mut v);
    check_series(&spec, &series, &mut v);
    if !v.is_empty() {
        return Err(v);
    }
    let k = series.horizon;
    let demand = (0..k).map(|h| spec.buses.iter().map(|b| series.demand[b][h]).collect()).collect();
    let cf = (0..k)
        .map(|h| spec.wind_units().map(|(_, g)| series.capacity_factor[&g.id][h]).collect())
        .collect();
    Ok(ValidatedCase { spec, series, demand, cf })
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn check_spec(spec: &SystemSpec, v: &mut Vec<Violation>) {
    let mut buses = BTreeSet::new();
    if spec.buses.is_empty() {
        v.push(Violation::new("buses", "at least one bus is required"));
    }
    for b in &spec.buses {
        if !buses.insert(b.as_str()) {
            v.push(Violation::new(format!("bus {b}"), "duplicate bus identifier"));
        }
    }
    if spec.generators.is_empty() {
        v.push(Violation::new("generators", "at least one generator is required"));
    }
    let mut ids = BTreeSet::new();
    for g in &spec.generators {
        let loc = format!("generator {}", g.id);
        if !ids.insert(g.id.as_str()) {
            v.push(Violation::new(&loc, "duplicate generator identifier"));
        }
        if !buses.contains(g.bus.as_str()) {
            v.push(Violation::new(&loc, format!("references undeclared bus {}", g.bus)));
        }
        if !finite_nonneg(g.p_min) || !g.p_max.is_finite() || g.p_min > g.p_max {
            v.push(Violation::new(&loc, format!("requires 0 <= p_min <= p_max, got {} and {}", g.p_min, g.p_max)));
        }
        if !finite_nonneg(g.variable_cost) {
            v.push(Violation::new(&loc, format!("variable_cost must be finite and >= 0, got {}", g.variable_cost)));
        }
        for (name, r) in [("ramp_up", g.ramp_up), ("ramp_down", g.ramp_down)] {
            if let Some(r) = r {
                if !(r.is_finite() && r > 0.0) {
                    v.push(Violation::new(&loc, format!("{name} must be > 0, got {r}")));
                }
                if g.kind != GeneratorKind::Thermal {
                    v.push(Violation::new(&loc, format!("{name} is only allowed on thermal units")));
                }
            }
        }
    }
    let max_vc = spec.generators.iter().map(|g| g.variable_cost).fold(f64::NEG_INFINITY, f64::max);
    if !spec.nsp_cost.is_finite() || spec.nsp_cost <= max_vc {
        v.push(Violation::new("nsp_cost", format!("nsp_cost must exceed all variable costs, got {}", spec.nsp_cost)));
    }
    let mut line_ids = BTreeSet::new();
    for l in &spec.lines {
        let loc = format!("line {}", l.id);
        if !line_ids.insert(l.id.as_str()) {
            v.push(Violation::new(&loc, "duplicate line identifier"));
        }
        for b in [&l.from_bus, &l.to_bus] {
            if !buses.contains(b.as_str()) {
                v.push(Violation::new(&loc, format!("references undeclared bus {b}")));
            }
        }
        if l.from_bus == l.to_bus {
            v.push(Violation::new(&loc, "from_bus and to_bus must differ"));
        }
        if !(l.flow_limit.is_finite() && l.flow_limit > 0.0) {
            v.push(Violation::new(&loc, format!("flow_limit must be > 0, got {}", l.flow_limit)));
        }
        if !finite_nonneg(l.transmission_cost) {
            v.push(Violation::new(&loc, format!("transmission_cost must be >= 0, got {}", l.transmission_cost)));
        }
    }
}

fn check_series(spec: &SystemSpec, s: &TimeSeriesSet, v: &mut Vec<Violation>) {
    if s.horizon == 0 {
        v.push(Violation::new("series", "horizon must be at least one hour"));
    }
    let check = |v: &mut Vec<Violation>, kind: &str, key: &str, values: Option<&Vec<f64>>, lo: f64, hi: f64| {
        let Some(values) = values else {
            v.push(Violation::new(format!("{kind} {key}"), "no series given"));
            return;
        };
        for h in 0..s.horizon {
            match values.get(h) {
                Some(x) if x.is_nan() => {
                    v.push(Violation::new(format!("{kind} {key}"), format!("missing hour {}", h + 1)))
                }
                None => v.push(Violation::new(format!("{kind} {key}"), format!("missing hour {}", h + 1))),
                Some(&x) if !(lo..=hi).contains(&x) => v.push(Violation::new(
                    format!("{kind} {key}"),
                    format!("value {x} at hour {} is outside [{lo}, {hi}]", h + 1),
                )),
                _ => {}
            }
        }
        if values.len() > s.horizon {
            v.push(Violation::new(format!("{kind} {key}"), format!("has {} entries for a horizon of {}", values.len(), s.horizon)));
        }
    };
    for b in &spec.buses {
        check(v, "demand for bus", b, s.demand.get(b), 0.0, f64::MAX);
    }
    for b in s.demand.keys() {
        if !spec.buses.contains(b) {
            v.push(Violation::new(format!("demand for bus {b}"), "bus is not declared"));
        }
    }
    for (_, g) in spec.wind_units() {
        let cf = s.capacity_factor.get(&g.id);
        check(v, "capacity factor for unit", &g.id, cf, 0.0, 1.0);
        if let Some(cf) = cf {
            for (h, &c) in cf.iter().enumerate().take(s.horizon) {
                if (0.0..=1.0).contains(&c) && g.p_min > c * g.p_max {
                    v.push(Violation::new(
                        format!("capacity factor for unit {}", g.id),
                        format!("availability {} at hour {} is below p_min {}", c * g.p_max, h + 1, g.p_min),
                    ));
                }
            }
        }
    }
    for u in s.capacity_factor.keys() {
        if !spec.wind_units().any(|(_, g)| &g.id == u) {
            v.push(Violation::new(format!("capacity factor for unit {u}"), "unit is not a declared wind unit"));
        }
    }
}

pub fn read_spec(path: &Path) -> Result<SystemSpec, CoreError> {
    let f = File::open(path).map_err(|source| CoreError::Io { path: path.into(), source })?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|source| CoreError::Json { path: path.into(), source })
}

pub fn write_spec(spec: &SystemSpec, path: &Path) -> Result<(), CoreError> {
    let f = File::create(path).map_err(|source| CoreError::Io { path: path.into(), source })?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, spec).map_err(|source| CoreError::Json { path: path.into(), source })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|source| CoreError::Io { path: path.into(), source })
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandRecord {
    hour: usize,
    bus: String,
    demand_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CfRecord {
    hour: usize,
    unit: String,
    cf: f64,
}

fn place(map: &mut BTreeMap<String, Vec<f64>>, key: String, hour: usize, value: f64) {
    let col = map.entry(key).or_default();
    if col.len() < hour {
        col.resize(hour, f64::NAN);
    }
    col[hour - 1] = value;
}

/// Reads the two series files. Missing hours come back as `NaN` so validation can name them.
pub fn read_series(demand: &Path, cf: &Path) -> Result<TimeSeriesSet, CoreError> {
    let mut horizon = 0;
    let mut d = BTreeMap::new();
    let mut rd = csv::Reader::from_path(demand).map_err(|source| CoreError::Csv { path: demand.into(), source })?;
    for rec in rd.deserialize::<DemandRecord>() {
        let rec = rec.map_err(|source| CoreError::Csv { path: demand.into(), source })?;
        if rec.hour == 0 {
            return Err(CoreError::InvalidInput(format!("{}: hours are 1-indexed", demand.display())));
        }
        horizon = horizon.max(rec.hour);
        place(&mut d, rec.bus, rec.hour, rec.demand_mw);
    }
    let mut c = BTreeMap::new();
    let mut rc = csv::Reader::from_path(cf).map_err(|source| CoreError::Csv { path: cf.into(), source })?;
    for rec in rc.deserialize::<CfRecord>() {
        let rec = rec.map_err(|source| CoreError::Csv { path: cf.into(), source })?;
        if rec.hour == 0 {
            return Err(CoreError::InvalidInput(format!("{}: hours are 1-indexed", cf.display())));
        }
        horizon = horizon.max(rec.hour);
        place(&mut c, rec.unit, rec.hour, rec.cf);
    }
    for col in d.values_mut().chain(c.values_mut()) {
        col.resize(horizon, f64::NAN);
    }
    Ok(TimeSeriesSet { horizon, demand: d, capacity_factor: c })
}

/// Writes the series in hour-major order (all buses of hour 1, then hour 2, ...).
pub fn write_series(series: &TimeSeriesSet, demand: &Path, cf: &Path) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_path(demand).map_err(|source| CoreError::Csv { path: demand.into(), source })?;
    for h in 0..series.horizon {
        for (bus, v) in &series.demand {
            w.serialize(DemandRecord { hour: h + 1, bus: bus.clone(), demand_mw: v[h] })
                .map_err(|source| CoreError::Csv { path: demand.into(), source })?;
        }
    }
    w.flush().map_err(|source| CoreError::Io { path: demand.into(), source })?;
    let mut w = csv::Writer::from_path(cf).map_err(|source| CoreError::Csv { path: cf.into(), source })?;
    for h in 0..series.horizon {
        for (unit, v) in &series.capacity_factor {
            w.serialize(CfRecord { hour: h + 1, unit: unit.clone(), cf: v[h] })
                .map_err(|source| CoreError::Csv { path: cf.into(), source })?;
        }
    }
    w.flush().map_err(|source| CoreError::Io { path: cf.into(), source })
}

/// Reads and validates a case from its three files.
pub fn load_case(spec: &Path, demand: &Path, cf: &Path) -> Result<ValidatedCase, CoreError> {
    let spec = read_spec(spec)?;
    let series = read_series(demand, cf)?;
    validate_system(spec, series).map_err(CoreError::Validation)
}
