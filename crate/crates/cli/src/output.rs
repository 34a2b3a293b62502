//! CSV trajectory logs and JSON run reports.

use coordfeas::sim::{RunStatus, Scenario, TrajectoryLog};
use coordfeas::{EdgeConstraint, Side};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::{self, Write};

/// Column label of each constraint, e.g. `distband_1_2`. Repeated labels
/// get a `_2`, `_3`, ... suffix in declaration order.
pub fn constraint_labels(s: &Scenario) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    s.constraints
        .iter()
        .map(|c| {
            let short = match c {
                EdgeConstraint::DistanceEq { .. } => "disteq",
                EdgeConstraint::DistanceBand { .. } => "distband",
                EdgeConstraint::HeadingEq { .. } => "headeq",
                EdgeConstraint::HeadingBand { .. } => "headband",
                EdgeConstraint::Visibility { .. } => "vis",
                EdgeConstraint::SpeedTrack { .. } => "speed",
                EdgeConstraint::RatePin { .. } => "pin",
            };
            let ids: Vec<String> = c.vehicles().iter().map(|v| (v + 1).to_string()).collect();
            let base = format!("{short}_{}", ids.join("_"));
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}_{n}")
            }
        })
        .collect()
}

fn inequality_sides(s: &Scenario) -> Vec<(usize, Side)> {
    s.constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_equality())
        .flat_map(|(id, c)| c.sides().into_iter().map(move |side| (id, side)))
        .collect()
}

fn weight_columns(s: &Scenario) -> usize {
    s.kinds.iter().map(|k| k.control_count()).sum()
}

pub fn csv_header(s: &Scenario) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for (v, k) in s.kinds.iter().enumerate() {
        let n = v + 1;
        h.extend([format!("x_{n}"), format!("y_{n}"), format!("theta_{n}")]);
        if k.state_dim() == 4 {
            h.push(format!("phi_{n}"));
        }
    }
    for (v, k) in s.kinds.iter().enumerate() {
        h.extend((1..=k.control_count()).map(|c| format!("u_{}_{c}", v + 1)));
    }
    let labels = constraint_labels(s);
    for (c, label) in s.constraints.iter().zip(&labels) {
        h.extend(c.sides().into_iter().map(|side| format!("g_{label}_{side}")));
    }
    for (id, side) in inequality_sides(s) {
        h.push(format!("active_{}_{side}", labels[id]));
    }
    h.extend((1..=weight_columns(s)).map(|k| format!("w_{k}")));
    h
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write + ?Sized>(out: &mut W, s: &Scenario, log: &TrajectoryLog) -> io::Result<()> {
    let header = csv_header(s);
    writeln!(out, "{}", header.join(","))?;
    let sides = inequality_sides(s);
    let controls: usize = s.kinds.iter().map(|k| k.control_count()).sum();
    let n_weights = weight_columns(s);
    for r in &log.records {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(num(r.t));
        row.extend(r.state.iter().map(|x| num(*x)));
        if r.controls.is_empty() {
            row.extend(std::iter::repeat_n(String::new(), controls));
        } else {
            row.extend(r.controls.iter().flatten().map(|x| num(*x)));
        }
        for values in &r.values {
            row.extend(values.iter().map(|(_, g)| num(*g)));
        }
        for key in &sides {
            row.push(if r.active.contains(key) { "1" } else { "0" }.to_string());
        }
        let has_velocity = r.pdot.is_some();
        for k in 0..n_weights {
            row.push(match r.weights.get(k) {
                Some(w) if has_velocity => num(*w),
                _ => String::new(),
            });
        }
        debug_assert_eq!(row.len(), header.len());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SideRange {
    pub side: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstraintSummary {
    pub label: String,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub sides: Vec<SideRange>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairMetric {
    pub label: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    /// Inter-vehicle distance for every distance constraint.
    pub distance: Vec<PairMetric>,
    /// `⟨a_ij, b_j⟩ / |a_ij|` for every visibility constraint.
    pub visibility_cosine: Vec<PairMetric>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<RunStatus>,
    pub records: usize,
    pub final_time: f64,
    pub events: usize,
    pub activations: usize,
    pub constraints: Vec<ConstraintSummary>,
    pub metrics: Metrics,
    pub wall_time_s: f64,
    pub version: &'static str,
    pub scenario_digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn run_report(s: &Scenario, log: &TrajectoryLog, file_bytes: &[u8], wall_time_s: f64) -> RunReport {
    let labels = constraint_labels(s);
    let constraints = s
        .constraints
        .iter()
        .enumerate()
        .map(|(id, c)| ConstraintSummary {
            label: labels[id].clone(),
            kind: c.kind_name(),
            sides: c
                .sides()
                .into_iter()
                .enumerate()
                .map(|(k, side)| {
                    let (min, max) = range_of(log.records.iter().map(|r| r.values[id][k].1));
                    SideRange {
                        side: side.to_string(),
                        min,
                        max,
                    }
                })
                .collect(),
        })
        .collect();

    let geometry = |r: &coordfeas::sim::Record, i: usize, j: usize| {
        let offsets = coordfeas::vehicles::offsets_for(&s.kinds);
        let (pi, pj) = (&r.state[offsets[i]..], &r.state[offsets[j]..]);
        let a = [pi[0] - pj[0], pi[1] - pj[1]];
        (a, pj[2])
    };
    let mut distance = Vec::new();
    let mut visibility_cosine = Vec::new();
    for (id, c) in s.constraints.iter().enumerate() {
        match *c {
            EdgeConstraint::DistanceEq { i, j, .. } | EdgeConstraint::DistanceBand { i, j, .. } => {
                let (min, max) = range_of(log.records.iter().map(|r| {
                    let (a, _) = geometry(r, i, j);
                    a[0].hypot(a[1])
                }));
                distance.push(PairMetric {
                    label: labels[id].clone(),
                    min,
                    max,
                });
            }
            EdgeConstraint::Visibility { i, j, .. } => {
                let (min, max) = range_of(log.records.iter().map(|r| {
                    let (a, th) = geometry(r, i, j);
                    (a[0] * th.cos() + a[1] * th.sin()) / a[0].hypot(a[1])
                }));
                visibility_cosine.push(PairMetric {
                    label: labels[id].clone(),
                    min,
                    max,
                });
            }
            _ => {}
        }
    }

    let (status, failure) = match &log.status {
        RunStatus::Completed => ("completed", None),
        failed => ("failed", Some(failed.clone())),
    };
    RunReport {
        status,
        failure,
        records: log.records.len(),
        final_time: log.records.last().map_or(0.0, |r| r.t),
        events: log.events.len(),
        activations: log.activations(),
        constraints,
        metrics: Metrics {
            distance,
            visibility_cosine,
        },
        wall_time_s,
        version: env!("CARGO_PKG_VERSION"),
        scenario_digest: digest(file_bytes),
    }
}
