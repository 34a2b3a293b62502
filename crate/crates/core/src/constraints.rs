//! Coordination constraints between vehicle pairs.
//!
//! Every constraint is written as a residual `g(P, t)`: equalities hold when
//! `g = 0`, inequalities when `g ≤ 0`. Two-sided bands contribute an upper
//! and a lower residual. Rows are gradients of `g` with respect to the
//! composite state, so an equality contributes `∇g · Ṗ = -∂g/∂t` and an
//! active inequality side contributes `∇g · Ṗ ≤ 0`.
//!
//! Velocity-level equalities (`SpeedTrack`, `RatePin`) have no positional
//! residual; they only contribute rows and a time-varying right-hand side.

use crate::error::{Error, Result};
use crate::matlite::{self, Mat};
use crate::vehicles::{self, CompositeState, VehicleKind};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;

/// Default activation tolerance on `g`.
pub const DEFAULT_EPS_ACT: f64 = 1e-6;
/// Relative positions shorter than this make the visibility residual singular.
pub const EPS_GEO: f64 = 1e-9;

/// Reference signal with a closed vocabulary so scenario files stay
/// reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFunction {
    /// `amplitude * sin(frequency * t + phase)`
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Constant { value: f64 },
    /// Linear interpolation through `(t, value)` knots, held constant
    /// outside the covered interval.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl TimeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            TimeFunction::Constant { value } => *value,
            TimeFunction::PiecewiseLinear { points } => {
                let (first, last) = match (points.first(), points.last()) {
                    (Some(f), Some(l)) => (f, l),
                    _ => return 0.0,
                };
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = points.partition_point(|p| p.0 <= t);
                let (t0, v0) = points[k - 1];
                let (t1, v1) = points[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimeFunction::Sinusoid {
                amplitude,
                frequency,
                phase,
            } if amplitude.is_finite() && frequency.is_finite() && phase.is_finite() => Ok(()),
            TimeFunction::Constant { value } if value.is_finite() => Ok(()),
            TimeFunction::PiecewiseLinear { points }
                if !points.is_empty()
                    && points.iter().all(|p| p.0.is_finite() && p.1.is_finite())
                    && points.windows(2).all(|w| w[0].0 < w[1].0) =>
            {
                Ok(())
            }
            other => Err(Error::InvalidScenario(format!(
                "invalid reference function {other:?}: values must be finite and knots strictly increasing"
            ))),
        }
    }
}

/// One coordination constraint. Vehicle indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EdgeConstraint {
    /// `½|a_ij|² - ½d² = 0` with `a_ij = (x_i - x_j, y_i - y_j)`.
    DistanceEq { i: usize, j: usize, d: f64 },
    /// `½d₋² ≤ ½|a_ij|² ≤ ½d₊²`.
    DistanceBand {
        i: usize,
        j: usize,
        d_minus: f64,
        d_plus: f64,
    },
    /// `θ_i - θ_j = δ`, compared modulo 2π.
    HeadingEq { i: usize, j: usize, delta: f64 },
    /// `δ₋ ≤ θ_i - θ_j ≤ δ₊`, heading difference reduced into (-π, π].
    HeadingBand {
        i: usize,
        j: usize,
        delta_minus: f64,
        delta_plus: f64,
    },
    /// Vehicle `j` keeps vehicle `i` inside a cone of half-angle
    /// `delta_theta` around its heading: `cos(Δθ)|a_ij| ≤ ⟨a_ij, b_j⟩`.
    Visibility { i: usize, j: usize, delta_theta: f64 },
    /// Each control channel of vehicle `i` follows a reference signal.
    SpeedTrack { i: usize, refs: Vec<TimeFunction> },
    /// Rate of a single state coordinate of vehicle `i` follows a reference.
    RatePin {
        i: usize,
        coord: usize,
        reference: TimeFunction,
    },
}

/// Which residual of a constraint a row or value belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
    Single,
    /// Control channel of a velocity-level equality (0-based).
    Channel(usize),
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Upper => f.write_str("upper"),
            Side::Lower => f.write_str("lower"),
            Side::Single => f.write_str("single"),
            Side::Channel(k) => write!(f, "ch{}", k + 1),
        }
    }
}

/// Reduces an angle into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Relative position `a_ij` and heading frame `b_j`, `c_j` of vehicle `j`.
struct PairGeometry {
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
}

fn pair_geometry(p: &CompositeState, i: usize, j: usize) -> PairGeometry {
    let (si, sj) = (p.slice(i), p.slice(j));
    let (cj, sn) = (sj[2].cos(), sj[2].sin());
    PairGeometry {
        a: [si[0] - sj[0], si[1] - sj[1]],
        b: [cj, sn],
        c: [-sn, cj],
    }
}

fn dot2(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

impl EdgeConstraint {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EdgeConstraint::DistanceEq { .. } => "distance_eq",
            EdgeConstraint::DistanceBand { .. } => "distance_band",
            EdgeConstraint::HeadingEq { .. } => "heading_eq",
            EdgeConstraint::HeadingBand { .. } => "heading_band",
            EdgeConstraint::Visibility { .. } => "visibility",
            EdgeConstraint::SpeedTrack { .. } => "speed_track",
            EdgeConstraint::RatePin { .. } => "rate_pin",
        }
    }

    pub fn is_equality(&self) -> bool {
        matches!(
            self,
            EdgeConstraint::DistanceEq { .. }
                | EdgeConstraint::HeadingEq { .. }
                | EdgeConstraint::SpeedTrack { .. }
                | EdgeConstraint::RatePin { .. }
        )
    }

    /// Equalities with a positional residual, the ones a state can drift off.
    pub fn is_position_level(&self) -> bool {
        matches!(
            self,
            EdgeConstraint::DistanceEq { .. } | EdgeConstraint::HeadingEq { .. }
        )
    }

    /// Vehicles the constraint touches, in `(i, j)` order.
    pub fn vehicles(&self) -> Vec<usize> {
        match *self {
            EdgeConstraint::DistanceEq { i, j, .. }
            | EdgeConstraint::DistanceBand { i, j, .. }
            | EdgeConstraint::HeadingEq { i, j, .. }
            | EdgeConstraint::HeadingBand { i, j, .. }
            | EdgeConstraint::Visibility { i, j, .. } => vec![i, j],
            EdgeConstraint::SpeedTrack { i, .. } | EdgeConstraint::RatePin { i, .. } => vec![i],
        }
    }

    /// Residual sides in reporting order (upper before lower).
    pub fn sides(&self) -> Vec<Side> {
        match self {
            EdgeConstraint::DistanceBand { .. } | EdgeConstraint::HeadingBand { .. } => {
                vec![Side::Upper, Side::Lower]
            }
            EdgeConstraint::SpeedTrack { refs, .. } => (0..refs.len()).map(Side::Channel).collect(),
            EdgeConstraint::RatePin { .. } => vec![Side::Channel(0)],
            _ => vec![Side::Single],
        }
    }

    /// Checks parameter invariants against the fleet.
    pub fn validate(&self, kinds: &[VehicleKind]) -> Result<()> {
        let n = kinds.len();
        let bad = |msg: String| Err(Error::InvalidScenario(format!("{}: {msg}", self.kind_name())));
        let vs = self.vehicles();
        if let Some(v) = vs.iter().find(|&&v| v >= n) {
            return bad(format!("vehicle index {v} out of range (fleet has {n})"));
        }
        if vs.len() == 2 && vs[0] == vs[1] {
            return bad("a pairwise constraint needs two distinct vehicles".into());
        }
        match self {
            EdgeConstraint::DistanceEq { d, .. } if !(*d > 0.0 && d.is_finite()) => {
                bad(format!("distance must be positive, got {d}"))
            }
            EdgeConstraint::DistanceBand { d_minus, d_plus, .. }
                if !(*d_minus > 0.0 && d_minus < d_plus && d_plus.is_finite()) =>
            {
                bad(format!("need 0 < d_minus < d_plus, got [{d_minus}, {d_plus}]"))
            }
            EdgeConstraint::HeadingEq { delta, .. } if !delta.is_finite() => bad("delta must be finite".into()),
            EdgeConstraint::HeadingBand {
                delta_minus,
                delta_plus,
                ..
            } if !(delta_minus < delta_plus && *delta_minus > -PI && *delta_plus <= PI) => bad(format!(
                "need -π < delta_minus < delta_plus ≤ π, got [{delta_minus}, {delta_plus}]"
            )),
            EdgeConstraint::Visibility { delta_theta, .. }
                if !(*delta_theta > 0.0 && *delta_theta < std::f64::consts::FRAC_PI_2) =>
            {
                bad(format!("delta_theta must lie in (0, π/2), got {delta_theta}"))
            }
            EdgeConstraint::SpeedTrack { i, refs } => {
                let expected = kinds[*i].control_count();
                if refs.len() != expected {
                    return bad(format!(
                        "vehicle {i} ({}) has {expected} control channels, got {} references",
                        kinds[*i].name(),
                        refs.len()
                    ));
                }
                refs.iter().try_for_each(|r| r.validate())
            }
            EdgeConstraint::RatePin { i, coord, reference } => {
                if *coord >= kinds[*i].state_dim() {
                    return bad(format!("coordinate {coord} out of range for vehicle {i}"));
                }
                reference.validate()
            }
            _ => Ok(()),
        }
    }

    /// Residuals per side. Inequalities are in `g ≤ 0` form, equalities in
    /// `g = 0` form. Velocity-level equalities report zero.
    pub fn residuals(&self, p: &CompositeState, _t: f64) -> Result<Vec<(Side, f64)>> {
        Ok(match *self {
            EdgeConstraint::DistanceEq { i, j, d } => {
                let g = pair_geometry(p, i, j);
                vec![(Side::Single, 0.5 * dot2(g.a, g.a) - 0.5 * d * d)]
            }
            EdgeConstraint::DistanceBand {
                i,
                j,
                d_minus,
                d_plus,
            } => {
                let g = pair_geometry(p, i, j);
                let half_sq = 0.5 * dot2(g.a, g.a);
                vec![
                    (Side::Upper, half_sq - 0.5 * d_plus * d_plus),
                    (Side::Lower, 0.5 * d_minus * d_minus - half_sq),
                ]
            }
            EdgeConstraint::HeadingEq { i, j, delta } => {
                let diff = p.slice(i)[2] - p.slice(j)[2] - delta;
                vec![(Side::Single, wrap_angle(diff))]
            }
            EdgeConstraint::HeadingBand {
                i,
                j,
                delta_minus,
                delta_plus,
            } => {
                let diff = wrap_angle(p.slice(i)[2] - p.slice(j)[2]);
                vec![(Side::Upper, diff - delta_plus), (Side::Lower, delta_minus - diff)]
            }
            EdgeConstraint::Visibility { i, j, delta_theta } => {
                let g = pair_geometry(p, i, j);
                let dist = dot2(g.a, g.a).sqrt();
                if dist <= EPS_GEO {
                    return Err(Error::DegenerateGeometry { i, j });
                }
                vec![(Side::Single, delta_theta.cos() * dist - dot2(g.a, g.b))]
            }
            EdgeConstraint::SpeedTrack { ref refs, .. } => {
                (0..refs.len()).map(|k| (Side::Channel(k), 0.0)).collect()
            }
            EdgeConstraint::RatePin { .. } => vec![(Side::Channel(0), 0.0)],
        })
    }

    /// Composite-coordinate gradient of each residual side. For
    /// velocity-level equalities these are the rows that read the
    /// constrained channel off `Ṗ`.
    pub fn gradients(&self, kinds: &[VehicleKind], p: &CompositeState) -> Result<Vec<(Side, Vec<f64>)>> {
        let n = p.dim();
        let mut row = vec![0.0; n];
        Ok(match *self {
            EdgeConstraint::DistanceEq { i, j, .. } | EdgeConstraint::DistanceBand { i, j, .. } => {
                let g = pair_geometry(p, i, j);
                let (oi, oj) = (p.offset(i), p.offset(j));
                row[oi] = g.a[0];
                row[oi + 1] = g.a[1];
                row[oj] = -g.a[0];
                row[oj + 1] = -g.a[1];
                if matches!(self, EdgeConstraint::DistanceEq { .. }) {
                    vec![(Side::Single, row)]
                } else {
                    let lower = row.iter().map(|v| -v).collect();
                    vec![(Side::Upper, row), (Side::Lower, lower)]
                }
            }
            EdgeConstraint::HeadingEq { i, j, .. } | EdgeConstraint::HeadingBand { i, j, .. } => {
                row[p.offset(i) + 2] = 1.0;
                row[p.offset(j) + 2] = -1.0;
                if matches!(self, EdgeConstraint::HeadingEq { .. }) {
                    vec![(Side::Single, row)]
                } else {
                    let lower = row.iter().map(|v| -v).collect();
                    vec![(Side::Upper, row), (Side::Lower, lower)]
                }
            }
            EdgeConstraint::Visibility { i, j, delta_theta } => {
                let g = pair_geometry(p, i, j);
                let dist = dot2(g.a, g.a).sqrt();
                if dist <= EPS_GEO {
                    return Err(Error::DegenerateGeometry { i, j });
                }
                // g = cosΔθ |a| - ⟨a, b_j⟩
                let k = delta_theta.cos() / dist;
                let dx = k * g.a[0] - g.b[0];
                let dy = k * g.a[1] - g.b[1];
                let (oi, oj) = (p.offset(i), p.offset(j));
                row[oi] = dx;
                row[oi + 1] = dy;
                row[oj] = -dx;
                row[oj + 1] = -dy;
                row[oj + 2] = -dot2(g.a, g.c);
                vec![(Side::Single, row)]
            }
            EdgeConstraint::SpeedTrack { i, .. } => {
                let o = p.offset(i);
                vehicles::channel_covectors(kinds[i], p.slice(i))
                    .into_iter()
                    .enumerate()
                    .map(|(k, local)| {
                        let mut r = vec![0.0; n];
                        r[o..o + local.len()].copy_from_slice(&local);
                        (Side::Channel(k), r)
                    })
                    .collect()
            }
            EdgeConstraint::RatePin { i, coord, .. } => {
                row[p.offset(i) + coord] = 1.0;
                vec![(Side::Channel(0), row)]
            }
        })
    }

    /// `∂g/∂t` negated, per equality row: the right-hand side of `∇g·Ṗ = rhs`.
    fn equality_rhs(&self, t: f64) -> Vec<f64> {
        match self {
            EdgeConstraint::SpeedTrack { refs, .. } => refs.iter().map(|r| r.eval(t)).collect(),
            EdgeConstraint::RatePin { reference, .. } => vec![reference.eval(t)],
            _ => vec![0.0],
        }
    }

    /// Equality rows and right-hand side, `rows · Ṗ = rhs`.
    pub fn equality_rows(&self, kinds: &[VehicleKind], p: &CompositeState, t: f64) -> Result<(Mat, Vec<f64>)> {
        if !self.is_equality() {
            return Err(Error::WrongVariant {
                kind: self.kind_name(),
                expected: "an equality constraint",
            });
        }
        let rows: Vec<Vec<f64>> = self.gradients(kinds, p)?.into_iter().map(|(_, r)| r).collect();
        Ok((Mat::from_rows(&rows, p.dim()), self.equality_rhs(t)))
    }

    /// Active inequality sides: those with `g ≥ -eps_act`. A violated side
    /// (`g > eps_act`) stays active so that the selected motion pushes back.
    pub fn active_rows(
        &self,
        id: usize,
        kinds: &[VehicleKind],
        p: &CompositeState,
        t: f64,
        eps_act: f64,
    ) -> Result<Vec<ActiveRow>> {
        if self.is_equality() {
            return Err(Error::WrongVariant {
                kind: self.kind_name(),
                expected: "an inequality constraint",
            });
        }
        let residuals = self.residuals(p, t)?;
        if residuals.iter().all(|(_, g)| *g < -eps_act) {
            return Ok(Vec::new());
        }
        let grads = self.gradients(kinds, p)?;
        Ok(residuals
            .into_iter()
            .zip(grads)
            .filter(|((_, g), _)| *g >= -eps_act)
            .map(|((side, g), (_, row))| ActiveRow {
                edge: id,
                side,
                row,
                residual: g,
                rhs: 0.0,
            })
            .collect())
    }

    /// Gradient row of one inequality side, regardless of activity.
    pub fn side_row(&self, id: usize, side: Side, kinds: &[VehicleKind], p: &CompositeState, t: f64) -> Result<ActiveRow> {
        let residual = self
            .residuals(p, t)?
            .into_iter()
            .find(|(s, _)| *s == side)
            .map(|(_, g)| g)
            .ok_or(Error::WrongVariant {
                kind: self.kind_name(),
                expected: "a constraint with that side",
            })?;
        let row = self
            .gradients(kinds, p)?
            .into_iter()
            .find(|(s, _)| *s == side)
            .map(|(_, r)| r)
            .expect("gradients and residuals share sides");
        Ok(ActiveRow {
            edge: id,
            side,
            row,
            residual,
            rhs: 0.0,
        })
    }

    /// Per-side values for logging: positional residuals, or for
    /// velocity-level equalities the channel mismatch `row·Ṗ - ref(t)`.
    pub fn logged_values(&self, kinds: &[VehicleKind], p: &CompositeState, t: f64, pdot: &[f64]) -> Result<Vec<(Side, f64)>> {
        match self {
            EdgeConstraint::SpeedTrack { .. } | EdgeConstraint::RatePin { .. } => {
                let rhs = self.equality_rhs(t);
                Ok(self
                    .gradients(kinds, p)?
                    .into_iter()
                    .zip(rhs)
                    .map(|((side, row), r)| (side, matlite::dot(&row, pdot) - r))
                    .collect())
            }
            _ => self.residuals(p, t),
        }
    }
}

/// Bearing-angle form of the visibility constraint using `arctan` of the
/// slope, `arctan((y_i - y_j)/(x_i - x_j)) - θ_j`. Diagnostic only: the
/// arctangent range folds bearings behind vehicle `j` onto the front half
/// plane, which is why the cone form is used for motion generation.
pub fn arctan_bearing_offset(p: &CompositeState, i: usize, j: usize) -> Result<f64> {
    let g = pair_geometry(p, i, j);
    if dot2(g.a, g.a).sqrt() <= EPS_GEO {
        return Err(Error::DegenerateGeometry { i, j });
    }
    Ok((g.a[1] / g.a[0]).atan() - p.slice(j)[2])
}

/// One active inequality side as a linear condition `row · Ṗ ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveRow {
    /// Index of the constraint in declaration order.
    pub edge: usize,
    pub side: Side,
    pub row: Vec<f64>,
    pub residual: f64,
    /// Zero for the joint system; the leader-follower reduction moves the
    /// parent's contribution here.
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub rows: Vec<ActiveRow>,
    pub time: f64,
}

impl ActiveSet {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn keys(&self) -> Vec<(usize, Side)> {
        self.rows.iter().map(|r| (r.edge, r.side)).collect()
    }
}

/// Stacks every equality row and every active inequality side, in
/// declaration order and then side order.
pub fn collect(
    constraints: &[EdgeConstraint],
    kinds: &[VehicleKind],
    p: &CompositeState,
    t: f64,
    eps_act: f64,
) -> Result<(Mat, Vec<f64>, ActiveSet)> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut active = ActiveSet {
        rows: Vec::new(),
        time: t,
    };
    for (id, c) in constraints.iter().enumerate() {
        if c.is_equality() {
            let (m, r) = c.equality_rows(kinds, p, t)?;
            rows.extend(m.row_vectors());
            rhs.extend(r);
        } else {
            active.rows.extend(c.active_rows(id, kinds, p, t, eps_act)?);
        }
    }
    Ok((Mat::from_rows(&rows, p.dim()), rhs, active))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicles::VehicleKind::Unicycle;

    fn two_unicycles(s1: [f64; 3], s2: [f64; 3]) -> (Vec<VehicleKind>, CompositeState) {
        let kinds = vec![Unicycle, Unicycle];
        let p = CompositeState::new(&kinds, &[s1.to_vec(), s2.to_vec()]).unwrap();
        (kinds, p)
    }

    #[test]
    fn residual_examples() {
        let (_, p) = two_unicycles([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let c = EdgeConstraint::DistanceEq { i: 0, j: 1, d: 1.0 };
        assert_eq!(c.residuals(&p, 0.0).unwrap(), vec![(Side::Single, 0.0)]);

        // a = (1, 0), b_j = (1, 0): g = cos(0.4) * 1 - 1
        let c = EdgeConstraint::Visibility { i: 0, j: 1, delta_theta: 0.4 };
        let g = c.residuals(&p, 0.0).unwrap()[0].1;
        assert!((g - (-0.078_939_005_997_114_9)).abs() < 1e-15, "g = {g}");

        let (_, p) = two_unicycles([2.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let c = EdgeConstraint::DistanceBand {
            i: 0,
            j: 1,
            d_minus: 1.0,
            d_plus: 2.0,
        };
        assert_eq!(
            c.residuals(&p, 0.0).unwrap(),
            vec![(Side::Upper, 0.0), (Side::Lower, -1.5)]
        );
    }

    #[test]
    fn visibility_degenerate_when_coincident() {
        let (kinds, p) = two_unicycles([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        let c = EdgeConstraint::Visibility { i: 0, j: 1, delta_theta: 0.4 };
        assert!(matches!(c.residuals(&p, 0.0), Err(Error::DegenerateGeometry { .. })));
        assert!(matches!(
            c.active_rows(0, &kinds, &p, 0.0, 1e-6),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn equality_row_examples() {
        let (kinds, p) = two_unicycles([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let (m, r) = EdgeConstraint::DistanceEq { i: 0, j: 1, d: 1.0 }
            .equality_rows(&kinds, &p, 0.0)
            .unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
        assert_eq!(r, vec![0.0]);

        let (m, r) = EdgeConstraint::HeadingEq { i: 0, j: 1, delta: 0.3 }
            .equality_rows(&kinds, &p, 0.0)
            .unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0]);
        assert_eq!(r, vec![0.0]);

        let track = EdgeConstraint::SpeedTrack {
            i: 0,
            refs: vec![
                TimeFunction::Sinusoid {
                    amplitude: 2.0,
                    frequency: 1.0,
                    phase: 0.0,
                },
                TimeFunction::Sinusoid {
                    amplitude: 2.0,
                    frequency: 2.0,
                    phase: std::f64::consts::FRAC_PI_2,
                },
            ],
        };
        let (m, r) = track.equality_rows(&kinds, &p, 0.0).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r, vec![0.0, 2.0]);

        let band = EdgeConstraint::DistanceBand {
            i: 0,
            j: 1,
            d_minus: 1.0,
            d_plus: 2.0,
        };
        assert!(matches!(band.equality_rows(&kinds, &p, 0.0), Err(Error::WrongVariant { .. })));
        assert!(matches!(
            track.active_rows(0, &kinds, &p, 0.0, 1e-6),
            Err(Error::WrongVariant { .. })
        ));
    }

    #[test]
    fn band_upper_row_matches_distance_gradient() {
        let (kinds, p) = two_unicycles([2.0, 0.0, 0.3], [0.0, 0.0, -0.2]);
        let band = EdgeConstraint::DistanceBand {
            i: 0,
            j: 1,
            d_minus: 1.0,
            d_plus: 2.0,
        };
        let active = band.active_rows(0, &kinds, &p, 0.0, 1e-6).unwrap();
        assert_eq!(active.len(), 1);
        assert_eq!(active[0].side, Side::Upper);
        let (eq, _) = EdgeConstraint::DistanceEq { i: 0, j: 1, d: 2.0 }
            .equality_rows(&kinds, &p, 0.0)
            .unwrap();
        assert_eq!(active[0].row, eq.row(0));
    }

    #[test]
    fn lower_band_side_negates() {
        let (kinds, p) = two_unicycles([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let band = EdgeConstraint::DistanceBand {
            i: 0,
            j: 1,
            d_minus: 1.0,
            d_plus: 2.0,
        };
        let active = band.active_rows(0, &kinds, &p, 0.0, 1e-6).unwrap();
        assert_eq!(active.len(), 1);
        assert_eq!(active[0].side, Side::Lower);
        assert_eq!(active[0].row, vec![-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn visibility_boresight_row() {
        // a = (1, 0), θ_j = 0, so ⟨a, c_j⟩ = 0 and the θ_j entry vanishes
        let (kinds, p) = two_unicycles([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let vis = EdgeConstraint::Visibility {
            i: 0,
            j: 1,
            delta_theta: 1e-9,
        };
        let rows = vis.active_rows(0, &kinds, &p, 0.0, 1e-6).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].row[5], 0.0);
        assert!(matlite::norm_inf(&rows[0].row) < 1e-12);
    }

    #[test]
    fn heading_wraps() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(0.5 + TAU) - 0.5).abs() < 1e-12);
        let (_, p) = two_unicycles([0.0, 0.0, 0.1 + TAU], [5.0, 0.0, 0.0]);
        let c = EdgeConstraint::HeadingEq { i: 0, j: 1, delta: 0.1 };
        assert!(c.residuals(&p, 0.0).unwrap()[0].1.abs() < 1e-12);
    }

    #[test]
    fn collect_empty_and_ordering() {
        let (kinds, p) = two_unicycles([2.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let (m, r, a) = collect(&[], &kinds, &p, 0.0, 1e-6).unwrap();
        assert_eq!((m.rows(), r.len(), a.len()), (0, 0, 0));

        let cs = vec![
            EdgeConstraint::DistanceBand {
                i: 0,
                j: 1,
                d_minus: 1.0,
                d_plus: 2.0,
            },
            EdgeConstraint::HeadingEq { i: 0, j: 1, delta: 0.0 },
            EdgeConstraint::HeadingBand {
                i: 0,
                j: 1,
                delta_minus: -0.5,
                delta_plus: 0.0,
            },
        ];
        let (m, _, a) = collect(&cs, &kinds, &p, 0.0, 1e-6).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!(a.keys(), vec![(0, Side::Upper), (2, Side::Upper)]);
    }

    #[test]
    fn piecewise_linear_reference() {
        let f = TimeFunction::PiecewiseLinear {
            points: vec![(0.0, 0.0), (1.0, 2.0), (3.0, -2.0)],
        };
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(2.0), 0.0);
        assert_eq!(f.eval(10.0), -2.0);
        assert!(TimeFunction::PiecewiseLinear {
            points: vec![(1.0, 0.0), (1.0, 1.0)]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn arctan_form_folds_rear_bearings() {
        // leader straight behind the follower: true bearing offset is π,
        // the slope form reports 0
        let (_, p) = two_unicycles([-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        assert_eq!(arctan_bearing_offset(&p, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn validation() {
        let kinds = [Unicycle, VehicleKind::ConstantSpeed { v: 1.0 }];
        assert!(EdgeConstraint::DistanceEq { i: 0, j: 0, d: 1.0 }.validate(&kinds).is_err());
        assert!(EdgeConstraint::DistanceEq { i: 0, j: 2, d: 1.0 }.validate(&kinds).is_err());
        assert!(EdgeConstraint::Visibility { i: 0, j: 1, delta_theta: 2.0 }.validate(&kinds).is_err());
        let track = EdgeConstraint::SpeedTrack {
            i: 1,
            refs: vec![TimeFunction::Constant { value: 0.0 }; 2],
        };
        assert!(track.validate(&kinds).is_err());
        assert!(EdgeConstraint::DistanceBand {
            i: 0,
            j: 1,
            d_minus: 2.0,
            d_plus: 1.0
        }
        .validate(&kinds)
        .is_err());
    }
}
