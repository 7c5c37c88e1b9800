//! Basis signatures of hours and chunks, and clustering of hours by signature.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use basis_lp::{BasisStatus, LpProblem, SolveResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::psom::{relative_label, IndexMap, RepresentativePeriod, RepresentativePeriods};
use crate::system::ValidatedCase;

pub const DEFAULT_DUAL_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureMode {
    /// Row duals and reduced costs, quantized to a grid of step `q`.
    Duals,
    /// Basis status of every column and row.
    ActiveSet,
}

impl fmt::Display for SignatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignatureMode::Duals => "duals",
            SignatureMode::ActiveSet => "active_set",
        })
    }
}

impl FromStr for SignatureMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "duals" => Ok(SignatureMode::Duals),
            "active_set" => Ok(SignatureMode::ActiveSet),
            _ => Err(CoreError::InvalidInput(format!("unknown signature mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigValue {
    /// Dual divided by the quantization step, rounded.
    Dual(i64),
    Status(BasisStatus),
}

/// Canonical, position-independent encoding of the optimal dual information over a span of
/// model positions. Equal encodings mean equal signatures.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisSignature {
    pub entries: Vec<(String, SigValue)>,
}

impl BasisSignature {
    /// Dequantized value of the entry labeled `label`, in duals mode.
    pub fn dual(&self, label: &str, q: f64) -> Option<f64> {
        self.entries.iter().find(|(l, _)| l == label).and_then(|(_, v)| match v {
            SigValue::Dual(i) => Some(*i as f64 * q),
            SigValue::Status(_) => None,
        })
    }
}

pub fn quantize(v: f64, q: f64) -> i64 {
    if v.is_nan() {
        i64::MIN
    } else {
        (v / q).round() as i64
    }
}

/// Signature of positions `span`. Labels are made relative (`@offset:label` without hour or
/// period). With `skip_leading_links`, rows tying the first position to its predecessor are
/// left out.
pub fn span_signature(
    p: &LpProblem,
    r: &SolveResult,
    im: &IndexMap,
    span: Range<usize>,
    mode: SignatureMode,
    q: f64,
    skip_leading_links: bool,
) -> BasisSignature {
    let mut entries = Vec::new();
    let first = span.start;
    let multi = span.len() > 1;
    for pos in span {
        let at = &im.positions[pos];
        let tag = |label: &str| {
            if multi {
                format!("@{}:{}", pos - first, relative_label(label))
            } else {
                relative_label(label)
            }
        };
        for j in at.cols.clone() {
            let v = match mode {
                SignatureMode::Duals => SigValue::Dual(quantize(r.bound_duals[j], q)),
                SignatureMode::ActiveSet => SigValue::Status(r.col_status[j]),
            };
            entries.push((tag(p.col_label(basis_lp::ColId(j))), v));
        }
        let links: Vec<usize> = at.ramp_up.iter().chain(&at.ramp_down).flatten().map(|r| r.0).collect();
        for i in at.rows.clone() {
            if skip_leading_links && pos == first && links.contains(&i) {
                continue;
            }
            let v = match mode {
                SignatureMode::Duals => SigValue::Dual(quantize(r.row_duals[i], q)),
                SignatureMode::ActiveSet => SigValue::Status(r.row_status[i]),
            };
            entries.push((tag(p.row_label(basis_lp::RowId(i))), v));
        }
    }
    BasisSignature { entries }
}

/// Signature of a single model position (an hour of the full model).
pub fn hour_signature(
    p: &LpProblem,
    r: &SolveResult,
    im: &IndexMap,
    hour: usize,
    mode: SignatureMode,
    q: f64,
) -> Result<BasisSignature, CoreError> {
    if hour >= im.n_positions() {
        return Err(CoreError::HourOutOfRange { hour, horizon: im.n_positions() });
    }
    Ok(span_signature(p, r, im, hour..hour + 1, mode, q, false))
}

/// Signatures of every hour, in hour order.
pub fn hourly_signatures(p: &LpProblem, r: &SolveResult, im: &IndexMap, mode: SignatureMode, q: f64) -> Vec<BasisSignature> {
    (0..im.n_positions()).into_par_iter().map(|h| span_signature(p, r, im, h..h + 1, mode, q, false)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourCluster {
    pub signature: BasisSignature,
    pub members: Vec<usize>,
    /// Mean demand and capacity factor over the members; weight = member count.
    pub centroid: RepresentativePeriod,
}

impl HourCluster {
    pub fn weight(&self) -> usize {
        self.members.len()
    }
}

/// Groups hours with equal signatures. Clusters are ordered by their first member.
pub fn cluster_hours(case: &ValidatedCase, signatures: &[BasisSignature]) -> Vec<HourCluster> {
    let mut index: HashMap<&BasisSignature, usize> = HashMap::new();
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (h, s) in signatures.iter().enumerate() {
        let next = groups.len();
        let g = *index.entry(s).or_insert(next);
        if g == next {
            groups.push((h, Vec::new()));
        }
        groups[g].1.push(h);
    }
    groups
        .into_iter()
        .map(|(first, members)| HourCluster {
            signature: signatures[first].clone(),
            centroid: RepresentativePeriod::centroid(case, &members, 1),
            members,
        })
        .collect()
}

pub fn clusters_to_periods(clusters: &[HourCluster]) -> RepresentativePeriods {
    RepresentativePeriods { periods: clusters.iter().map(|c| c.centroid.clone()).collect() }
}
