//! JSON scenario files.
//!
//! Vehicles are numbered from 1 in files and from 0 inside the library.
//! Reference signals are declared once under `references` and used by name.

use coordfeas::feasibility::LeaderTree;
use coordfeas::sim::{IdlePolicy, Integrator, Mode, Scenario, Settings};
use coordfeas::{EdgeConstraint, TimeFunction, VehicleKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub references: BTreeMap<String, TimeFunction>,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Unicycle,
    ConstantSpeed,
    CarLike,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub kind: KindName,
    #[serde(default)]
    pub params: VehicleParams,
    pub initial: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintType {
    DistanceEq,
    DistanceBand,
    HeadingEq,
    HeadingBand,
    Visibility,
    SpeedTrack,
    RatePin,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_theta: Option<f64>,
    /// Reference names, one per control channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refs: Option<Vec<String>>,
    /// State coordinate name: x, y, theta or phi.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    #[serde(rename = "type")]
    pub kind: ConstraintType,
    pub i: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default)]
    pub params: ConstraintParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    Graph,
    /// Follower → parent, 1-based. The root has no entry.
    Tree { parent: BTreeMap<usize, usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub duration: f64,
    pub step: f64,
    pub integrator: Integrator,
    pub projection: bool,
    pub projection_tol: f64,
    pub eps_act: f64,
    pub margin: f64,
    pub bound: f64,
    pub cruise: Vec<f64>,
    pub idle: IdlePolicy,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self::from(&Settings::default())
    }
}

impl From<&Settings> for SimSpec {
    fn from(s: &Settings) -> Self {
        Self {
            duration: s.duration,
            step: s.step,
            integrator: s.integrator,
            projection: s.projection,
            projection_tol: s.projection_tol,
            eps_act: s.eps_act,
            margin: s.margin,
            bound: s.bound,
            cruise: s.cruise.clone(),
            idle: s.idle,
        }
    }
}

impl From<&SimSpec> for Settings {
    fn from(s: &SimSpec) -> Self {
        Self {
            duration: s.duration,
            step: s.step,
            integrator: s.integrator,
            projection: s.projection,
            projection_tol: s.projection_tol,
            eps_act: s.eps_act,
            margin: s.margin,
            bound: s.bound,
            cruise: s.cruise.clone(),
            idle: s.idle,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

/// Parse JSON text; errors name the offending field and position.
pub fn parse(text: &str) -> Result<ScenarioFile, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            inner.to_string()
        } else {
            format!("{path}: {inner}")
        }
    })
}

pub fn load(path: &Path) -> Result<(ScenarioFile, Vec<u8>), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    let file = parse(text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((file, bytes))
}

const COORD_NAMES: [&str; 4] = ["x", "y", "theta", "phi"];

fn need<T: Copy>(v: Option<T>, at: &str, name: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("{at}.params.{name}: missing field"))
}

fn vehicle_index(v: usize, count: usize, at: &str, field: &str) -> Result<usize, String> {
    if v == 0 || v > count {
        return Err(format!("{at}.{field}: vehicle {v} out of range 1..={count}"));
    }
    Ok(v - 1)
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario, String> {
        let mut kinds = Vec::new();
        let mut initial = Vec::new();
        for (k, v) in self.vehicles.iter().enumerate() {
            let at = format!("vehicles[{k}]");
            kinds.push(match v.kind {
                KindName::Unicycle => VehicleKind::Unicycle,
                KindName::ConstantSpeed => VehicleKind::ConstantSpeed {
                    v: need(v.params.v, &at, "v")?,
                },
                KindName::CarLike => VehicleKind::CarLike {
                    l: need(v.params.l, &at, "l")?,
                },
            });
            initial.push(v.initial.clone());
        }
        let n = kinds.len();
        let reference = |name: &str, at: &str| -> Result<TimeFunction, String> {
            self.references
                .get(name)
                .cloned()
                .ok_or_else(|| format!("{at}: unknown reference '{name}'"))
        };

        let mut constraints = Vec::new();
        for (k, c) in self.constraints.iter().enumerate() {
            let at = format!("constraints[{k}]");
            let i = vehicle_index(c.i, n, &at, "i")?;
            let pair = || -> Result<usize, String> {
                let j = c.j.ok_or_else(|| format!("{at}.j: missing field"))?;
                vehicle_index(j, n, &at, "j")
            };
            let p = &c.params;
            constraints.push(match c.kind {
                ConstraintType::DistanceEq => EdgeConstraint::DistanceEq {
                    i,
                    j: pair()?,
                    d: need(p.d, &at, "d")?,
                },
                ConstraintType::DistanceBand => EdgeConstraint::DistanceBand {
                    i,
                    j: pair()?,
                    d_minus: need(p.d_minus, &at, "d_minus")?,
                    d_plus: need(p.d_plus, &at, "d_plus")?,
                },
                ConstraintType::HeadingEq => EdgeConstraint::HeadingEq {
                    i,
                    j: pair()?,
                    delta: need(p.delta, &at, "delta")?,
                },
                ConstraintType::HeadingBand => EdgeConstraint::HeadingBand {
                    i,
                    j: pair()?,
                    delta_minus: need(p.delta_minus, &at, "delta_minus")?,
                    delta_plus: need(p.delta_plus, &at, "delta_plus")?,
                },
                ConstraintType::Visibility => EdgeConstraint::Visibility {
                    i,
                    j: pair()?,
                    delta_theta: need(p.delta_theta, &at, "delta_theta")?,
                },
                ConstraintType::SpeedTrack => {
                    let names = p.refs.as_ref().ok_or_else(|| format!("{at}.params.refs: missing field"))?;
                    EdgeConstraint::SpeedTrack {
                        i,
                        refs: names
                            .iter()
                            .enumerate()
                            .map(|(r, name)| reference(name, &format!("{at}.params.refs[{r}]")))
                            .collect::<Result<_, _>>()?,
                    }
                }
                ConstraintType::RatePin => {
                    let name = p.coord.as_deref().ok_or_else(|| format!("{at}.params.coord: missing field"))?;
                    let coord = COORD_NAMES
                        .iter()
                        .position(|c| *c == name)
                        .ok_or_else(|| format!("{at}.params.coord: unknown coordinate '{name}'"))?;
                    let r = p
                        .reference
                        .as_deref()
                        .ok_or_else(|| format!("{at}.params.reference: missing field"))?;
                    EdgeConstraint::RatePin {
                        i,
                        coord,
                        reference: reference(r, &format!("{at}.params.reference"))?,
                    }
                }
            });
            if c.j.is_some() && matches!(c.kind, ConstraintType::SpeedTrack | ConstraintType::RatePin) {
                return Err(format!("{at}.j: single-vehicle constraint takes no second vehicle"));
            }
        }

        let mode = match &self.mode {
            ModeSpec::Graph => Mode::Graph,
            ModeSpec::Tree { parent } => {
                let mut map = vec![None; n];
                for (&child, &par) in parent {
                    let c = vehicle_index(child, n, "mode.tree.parent", "key")?;
                    map[c] = Some(vehicle_index(par, n, &format!("mode.tree.parent.{child}"), "value")?);
                }
                Mode::Tree(LeaderTree { parent: map })
            }
        };
        Ok(Scenario {
            kinds,
            initial,
            constraints,
            mode,
            settings: Settings::from(&self.sim),
        })
    }

    /// File form of a scenario. Reference signals are named `ref_<k>` in
    /// order of first use.
    pub fn from_scenario(s: &Scenario) -> Self {
        let vehicles = s
            .kinds
            .iter()
            .zip(&s.initial)
            .map(|(k, x)| {
                let (kind, params) = match *k {
                    VehicleKind::Unicycle => (KindName::Unicycle, VehicleParams::default()),
                    VehicleKind::ConstantSpeed { v } => (KindName::ConstantSpeed, VehicleParams { v: Some(v), l: None }),
                    VehicleKind::CarLike { l } => (KindName::CarLike, VehicleParams { v: None, l: Some(l) }),
                };
                VehicleSpec {
                    kind,
                    params,
                    initial: x.clone(),
                }
            })
            .collect();

        let mut references = BTreeMap::new();
        let mut name_of = |f: &TimeFunction| -> String {
            let name = format!("ref_{}", references.len() + 1);
            references.insert(name.clone(), f.clone());
            name
        };
        let constraints = s
            .constraints
            .iter()
            .map(|c| {
                let mut p = ConstraintParams::default();
                let (kind, i, j) = match c {
                    EdgeConstraint::DistanceEq { i, j, d } => {
                        p.d = Some(*d);
                        (ConstraintType::DistanceEq, *i, Some(*j))
                    }
                    EdgeConstraint::DistanceBand { i, j, d_minus, d_plus } => {
                        p.d_minus = Some(*d_minus);
                        p.d_plus = Some(*d_plus);
                        (ConstraintType::DistanceBand, *i, Some(*j))
                    }
                    EdgeConstraint::HeadingEq { i, j, delta } => {
                        p.delta = Some(*delta);
                        (ConstraintType::HeadingEq, *i, Some(*j))
                    }
                    EdgeConstraint::HeadingBand {
                        i,
                        j,
                        delta_minus,
                        delta_plus,
                    } => {
                        p.delta_minus = Some(*delta_minus);
                        p.delta_plus = Some(*delta_plus);
                        (ConstraintType::HeadingBand, *i, Some(*j))
                    }
                    EdgeConstraint::Visibility { i, j, delta_theta } => {
                        p.delta_theta = Some(*delta_theta);
                        (ConstraintType::Visibility, *i, Some(*j))
                    }
                    EdgeConstraint::SpeedTrack { i, refs } => {
                        p.refs = Some(refs.iter().map(&mut name_of).collect());
                        (ConstraintType::SpeedTrack, *i, None)
                    }
                    EdgeConstraint::RatePin { i, coord, reference } => {
                        p.coord = Some(COORD_NAMES[*coord].to_string());
                        p.reference = Some(name_of(reference));
                        (ConstraintType::RatePin, *i, None)
                    }
                };
                ConstraintSpec {
                    kind,
                    i: i + 1,
                    j: j.map(|j| j + 1),
                    params: p,
                }
            })
            .collect();

        let mode = match &s.mode {
            Mode::Graph => ModeSpec::Graph,
            Mode::Tree(tree) => ModeSpec::Tree {
                parent: tree
                    .parent
                    .iter()
                    .enumerate()
                    .filter_map(|(c, p)| p.map(|p| (c + 1, p + 1)))
                    .collect(),
            },
        };
        ScenarioFile {
            vehicles,
            constraints,
            references,
            mode,
            sim: SimSpec::from(&s.settings),
            outputs: OutputSpec::default(),
        }
    }
}
