//! Fixed-step trajectory generation.
//!
//! Virtual-input weights are held across a step while the motion family is
//! re-solved at every integrator stage. Each stage basis is rotated onto the
//! basis of the step start, so held weights mean the same directions
//! throughout the step. When an inactive inequality side would end a step
//! past `eps_act`, the step is shortened by bisection so the crossing is
//! committed with `|g| ≤ eps_act`. Weights are re-selected whenever the
//! active set changes and after every step while it is non-empty.

use crate::constraints::{EdgeConstraint, Side, EPS_GEO};
use crate::error::{Error, Result};
use crate::feasibility::{self, Activity, LeaderTree, MotionFamily, NoFeasibleDirection, SelectionPolicy, Strategy};
use crate::matlite::{self, Mat};
use crate::vehicles::{self, CompositeState, VehicleKind};
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

pub const DEFAULT_PROJECTION_TOL: f64 = 1e-12;
pub const DEFAULT_PROJECTION_ITERS: usize = 20;
pub const BISECTION_ITERS: usize = 40;
/// Initial equality residual accepted by `validate`.
pub const INITIAL_EQUALITY_TOL: f64 = 1e-9;
/// Largest distribution residual accepted when recovering controls.
const CONTROL_FIT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

/// Weights used by a block whose active set is empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdlePolicy {
    /// The configured cruise weights.
    #[default]
    Cruise,
    /// Keep the weights selected last; cruise weights only at the start.
    Hold,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    Graph,
    Tree(LeaderTree),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
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

impl Default for Settings {
    fn default() -> Self {
        Self {
            duration: 1.0,
            step: 1e-3,
            integrator: Integrator::Rk4,
            projection: false,
            projection_tol: DEFAULT_PROJECTION_TOL,
            eps_act: crate::constraints::DEFAULT_EPS_ACT,
            margin: 0.0,
            bound: feasibility::DEFAULT_BOUND,
            cruise: Vec::new(),
            idle: IdlePolicy::Cruise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kinds: Vec<VehicleKind>,
    pub initial: Vec<Vec<f64>>,
    pub constraints: Vec<EdgeConstraint>,
    pub mode: Mode,
    pub settings: Settings,
}

impl Scenario {
    pub fn initial_state(&self) -> Result<CompositeState> {
        CompositeState::new(&self.kinds, &self.initial)
    }

    /// Solve blocks in processing order: one block with every vehicle in
    /// graph mode, one block per vehicle in tree mode.
    fn blocks(&self) -> Result<Vec<Block>> {
        match &self.mode {
            Mode::Graph => Ok(vec![Block {
                vehicles: (0..self.kinds.len()).collect(),
                constraints: (0..self.constraints.len()).collect(),
            }]),
            Mode::Tree(tree) => {
                let owned = tree.responsibilities(&self.constraints)?;
                Ok(tree
                    .topological_order()?
                    .into_iter()
                    .map(|v| Block {
                        vehicles: vec![v],
                        constraints: owned[v].clone(),
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Block {
    vehicles: Vec<usize>,
    constraints: Vec<usize>,
}

/// Every problem with the scenario, empty when it can be run.
pub fn validate(s: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    let st = &s.settings;
    if !(st.step > 0.0 && st.step.is_finite()) {
        out.push(format!("step must be positive, got {}", st.step));
    }
    if !(st.duration >= 0.0 && st.duration.is_finite()) {
        out.push(format!("duration must be non-negative, got {}", st.duration));
    }
    if !(st.eps_act > 0.0 && st.eps_act.is_finite()) {
        out.push(format!("eps_act must be positive, got {}", st.eps_act));
    }
    if !(st.margin >= 0.0 && st.margin.is_finite()) {
        out.push(format!("margin must be non-negative, got {}", st.margin));
    }
    if !(st.bound > 0.0 && st.bound.is_finite()) {
        out.push(format!("bound must be positive, got {}", st.bound));
    }
    if !(st.projection_tol > 0.0 && st.projection_tol.is_finite()) {
        out.push(format!("projection_tol must be positive, got {}", st.projection_tol));
    }
    if st.cruise.iter().any(|w| !w.is_finite()) {
        out.push("cruise weights must be finite".into());
    }
    if s.kinds.is_empty() {
        out.push("scenario has no vehicles".into());
    }
    if s.initial.len() != s.kinds.len() {
        out.push(format!(
            "{} vehicles but {} initial states",
            s.kinds.len(),
            s.initial.len()
        ));
        return out;
    }
    for (v, (k, x)) in s.kinds.iter().zip(&s.initial).enumerate() {
        if let Err(e) = k.validate().and_then(|_| vehicles::validate_state(*k, x)) {
            out.push(format!("vehicle {}: {e}", v + 1));
        }
    }
    let mut constraints_ok = true;
    for (id, c) in s.constraints.iter().enumerate() {
        if let Err(e) = c.validate(&s.kinds) {
            out.push(format!("constraint {} ({}): {e}", id + 1, c.kind_name()));
            constraints_ok = false;
        }
        match *c {
            EdgeConstraint::DistanceBand { d_minus, d_plus, .. } if (d_plus * d_plus - d_minus * d_minus) / 4.0 <= st.eps_act => {
                out.push(format!("constraint {} (distance_band): band too narrow for eps_act", id + 1));
            }
            EdgeConstraint::HeadingBand {
                delta_minus, delta_plus, ..
            } if (delta_plus - delta_minus) / 4.0 <= st.eps_act => {
                out.push(format!("constraint {} (heading_band): band too narrow for eps_act", id + 1));
            }
            _ => {}
        }
    }
    if let Mode::Tree(tree) = &s.mode {
        if tree.parent.len() != s.kinds.len() {
            out.push("leader tree size differs from the fleet".into());
        } else if let Err(e) = tree.topological_order().and_then(|_| tree.responsibilities(&s.constraints)) {
            out.push(e.to_string());
        }
    }
    if !out.is_empty() || !constraints_ok {
        return out;
    }
    let p = match s.initial_state() {
        Ok(p) => p,
        Err(e) => {
            out.push(e.to_string());
            return out;
        }
    };
    for (id, c) in s.constraints.iter().enumerate() {
        for (a, b) in c.vehicles().iter().zip(c.vehicles().iter().skip(1)) {
            let (pa, pb) = (p.slice(*a), p.slice(*b));
            if (pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= EPS_GEO {
                out.push(format!("constraint {}: vehicles {} and {} coincide at t=0", id + 1, a + 1, b + 1));
            }
        }
        let Ok(residuals) = c.residuals(&p, 0.0) else {
            continue;
        };
        if c.is_equality() {
            if c.is_position_level() && residuals.iter().any(|(_, g)| g.abs() > INITIAL_EQUALITY_TOL) {
                out.push(format!("constraint {} ({}): equality not met at t=0", id + 1, c.kind_name()));
            }
        } else if let Some((side, g)) = residuals.iter().find(|(_, g)| *g > st.eps_act) {
            out.push(format!(
                "constraint {} ({}): {side} side violated at t=0 (g = {g:e})",
                id + 1,
                c.kind_name()
            ));
        }
    }
    out
}

/// Minimum-norm Newton correction onto the position-level equalities.
pub fn project_equalities(
    kinds: &[VehicleKind],
    constraints: &[EdgeConstraint],
    p: &CompositeState,
    tol: f64,
    max_iters: usize,
) -> Result<CompositeState> {
    let eqs: Vec<&EdgeConstraint> = constraints.iter().filter(|c| c.is_equality() && c.is_position_level()).collect();
    let mut q = p.clone();
    for iter in 0..=max_iters {
        let mut r = Vec::new();
        let mut rows = Vec::new();
        for c in &eqs {
            r.extend(c.residuals(&q, 0.0)?.into_iter().map(|(_, g)| g));
            rows.extend(c.gradients(kinds, &q)?.into_iter().map(|(_, g)| g));
        }
        let err = matlite::norm_inf(&r);
        if err <= tol {
            return Ok(q);
        }
        if iter == max_iters || !err.is_finite() {
            return Err(Error::ProjectionDiverged {
                iterations: iter,
                residual: err,
            });
        }
        let j = Mat::from_rows(&rows, q.dim());
        let dx = matlite::least_squares(&j, &r, matlite::DEFAULT_TOL);
        q = q.with_vector(matlite::axpy(&q.p, -1.0, &dx));
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Activated,
    Deactivated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub constraint: usize,
    pub side: Side,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    EqualityInconsistent,
    NoFeasibleDirection,
    ProjectionDiverged,
    Numerical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { time: f64, kind: FailureKind, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub state: Vec<f64>,
    /// Velocity applied from this sample on; `None` after a failure.
    pub pdot: Option<Vec<f64>>,
    /// Recovered control inputs per vehicle, empty when `pdot` is `None`.
    pub controls: Vec<Vec<f64>>,
    /// Logged value of every side of every constraint.
    pub values: Vec<Vec<(Side, f64)>>,
    pub active: Vec<(usize, Side)>,
    /// Held weights, block after block.
    pub weights: Vec<f64>,
    pub strategies: Vec<Strategy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub records: Vec<Record>,
    pub events: Vec<Event>,
    pub status: RunStatus,
}

impl TrajectoryLog {
    pub fn activations(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Activated).count()
    }
}

#[derive(Debug)]
struct Failure {
    kind: FailureKind,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::ProjectionDiverged { .. } => FailureKind::ProjectionDiverged,
            _ => FailureKind::Numerical,
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<NoFeasibleDirection> for Failure {
    fn from(e: NoFeasibleDirection) -> Self {
        Failure {
            kind: FailureKind::NoFeasibleDirection,
            message: e.to_string(),
        }
    }
}

/// Weights and basis frame held for one block.
#[derive(Clone, Debug, Default)]
struct Held {
    weights: Vec<f64>,
    frame: Vec<Vec<f64>>,
    strategy: Option<Strategy>,
}

struct Runner<'a> {
    s: &'a Scenario,
    blocks: Vec<Block>,
    policy_cruise: &'a [f64],
    active: Vec<(usize, Side)>,
    held: Vec<Held>,
}

impl<'a> Runner<'a> {
    fn family(&self, b: usize, p: &CompositeState, t: f64, known: &[f64], active: &[(usize, Side)]) -> Result<(MotionFamily, feasibility::LocalSystem), Failure> {
        let block = &self.blocks[b];
        let sys = feasibility::local_system(
            &self.s.kinds,
            &self.s.constraints,
            &block.constraints,
            &block.vehicles,
            p,
            t,
            known,
            Activity::Listed(active),
        )?;
        let fam = feasibility::motion_family(&sys.omega, &sys.rhs, matlite::DEFAULT_TOL).map_err(|e| Failure {
            kind: FailureKind::EqualityInconsistent,
            message: format!("{e}"),
        })?;
        Ok((fam.aligned_to(&self.held[b].frame), sys))
    }

    /// Composite velocity at `(p, t)` under the held weights.
    fn velocity(&self, p: &CompositeState, t: f64) -> Result<Vec<f64>, Failure> {
        let mut known = vec![0.0; p.dim()];
        for b in 0..self.blocks.len() {
            let (fam, sys) = self.family(b, p, t, &known, &[])?;
            let mut w = self.held[b].weights.clone();
            w.resize(fam.kappa, 0.0);
            for (c, x) in sys.columns.iter().zip(fam.velocity(&w)) {
                known[*c] = x;
            }
        }
        Ok(known)
    }

    /// Re-select weights for every block at `(p, t)` and refresh frames.
    fn select(&mut self, p: &CompositeState, t: f64) -> Result<Vec<f64>, Failure> {
        let mut known = vec![0.0; p.dim()];
        let mut cruise_offset = 0;
        let active = self.active.clone();
        for b in 0..self.blocks.len() {
            let (fam, sys) = self.family(b, p, t, &known, &active)?;
            let st = &self.s.settings;
            let held = &self.held[b];
            let cruise = if st.idle == IdlePolicy::Hold && held.weights.len() == fam.kappa {
                held.weights.clone()
            } else {
                self.policy_cruise.iter().skip(cruise_offset).take(fam.kappa).copied().collect()
            };
            cruise_offset += fam.kappa;
            let policy = SelectionPolicy { cruise };
            let sel = feasibility::select_weights(&fam, &sys.active, &policy, st.margin, st.bound)?;
            for (c, x) in sys.columns.iter().zip(&sel.pdot) {
                known[*c] = *x;
            }
            self.held[b] = Held {
                weights: sel.weights,
                frame: fam.basis,
                strategy: Some(sel.strategy),
            };
        }
        Ok(known)
    }

    /// Rotate the held frames onto the bases at `(p, t)` without changing
    /// the weights.
    fn refresh_frames(&mut self, p: &CompositeState, t: f64) -> Result<Vec<f64>, Failure> {
        let mut known = vec![0.0; p.dim()];
        for b in 0..self.blocks.len() {
            let (fam, sys) = self.family(b, p, t, &known, &[])?;
            let held = &mut self.held[b];
            held.weights.resize(fam.kappa, 0.0);
            for (c, x) in sys.columns.iter().zip(fam.velocity(&held.weights)) {
                known[*c] = x;
            }
            held.frame = fam.basis;
        }
        Ok(known)
    }

    fn integrate(&self, p: &CompositeState, t: f64, dt: f64) -> Result<CompositeState, Failure> {
        let x = &p.p;
        let next = match self.s.settings.integrator {
            Integrator::Euler => matlite::axpy(x, dt, &self.velocity(p, t)?),
            Integrator::Rk4 => {
                let k1 = self.velocity(p, t)?;
                let k2 = self.velocity(&p.with_vector(matlite::axpy(x, dt / 2.0, &k1)), t + dt / 2.0)?;
                let k3 = self.velocity(&p.with_vector(matlite::axpy(x, dt / 2.0, &k2)), t + dt / 2.0)?;
                let k4 = self.velocity(&p.with_vector(matlite::axpy(x, dt, &k3)), t + dt)?;
                (0..x.len())
                    .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect()
            }
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Failure {
                kind: FailureKind::Numerical,
                message: format!("non-finite state after step at t = {t}"),
            });
        }
        Ok(p.with_vector(next))
    }

    /// Largest residual over the inactive inequality sides.
    fn worst_inactive(&self, p: &CompositeState, t: f64) -> Result<f64, Failure> {
        let mut worst = f64::NEG_INFINITY;
        for (id, c) in self.s.constraints.iter().enumerate() {
            if c.is_equality() {
                continue;
            }
            for (side, g) in c.residuals(p, t)? {
                if !self.active.contains(&(id, side)) {
                    worst = worst.max(g);
                }
            }
        }
        Ok(worst)
    }

    /// Advance by at most `dt`; returns the new state and the fraction of
    /// `dt` actually taken.
    fn advance(&self, p: &CompositeState, t: f64, dt: f64) -> Result<(CompositeState, f64), Failure> {
        let eps = self.s.settings.eps_act;
        let full = self.integrate(p, t, dt)?;
        if self.worst_inactive(&full, t + dt)? <= eps {
            return Ok((full, 1.0));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut hi_state = full;
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            let q = self.integrate(p, t, mid * dt)?;
            let g = self.worst_inactive(&q, t + mid * dt)?;
            if g > eps {
                hi = mid;
                hi_state = q;
            } else if g >= -eps {
                return Ok((q, mid));
            } else {
                lo = mid;
            }
        }
        debug!("bisection did not bracket the crossing at t = {t}; committing the overshooting end");
        Ok((hi_state, hi))
    }

    /// Apply activation and hysteresis deactivation at `(p, t)`.
    fn update_active(&mut self, p: &CompositeState, t: f64, events: &mut Vec<Event>) -> Result<bool, Failure> {
        let eps = self.s.settings.eps_act;
        let mut next = Vec::new();
        let mut changed = false;
        for (id, c) in self.s.constraints.iter().enumerate() {
            if c.is_equality() {
                continue;
            }
            for (side, g) in c.residuals(p, t)? {
                let was = self.active.contains(&(id, side));
                let now = if was { g >= -2.0 * eps } else { g >= -eps };
                if now != was {
                    changed = true;
                    events.push(Event {
                        time: t,
                        kind: if now { EventKind::Activated } else { EventKind::Deactivated },
                        constraint: id,
                        side,
                        residual: g,
                    });
                }
                if now {
                    next.push((id, side));
                }
            }
        }
        self.active = next;
        Ok(changed)
    }

    fn record(&self, p: &CompositeState, t: f64, pdot: Option<Vec<f64>>) -> Result<Record, Failure> {
        let mut controls = Vec::new();
        if let Some(v) = &pdot {
            for (k, kind) in self.s.kinds.iter().enumerate() {
                let cols = p.columns(k);
                controls.push(vehicles::controls_from_velocity(*kind, p.slice(k), &v[cols], CONTROL_FIT_TOL)?);
            }
        }
        let zero = vec![0.0; p.dim()];
        let values = self
            .s
            .constraints
            .iter()
            .map(|c| c.logged_values(&self.s.kinds, p, t, pdot.as_deref().unwrap_or(&zero)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Record {
            t,
            state: p.p.clone(),
            pdot,
            controls,
            values,
            active: self.active.clone(),
            weights: self.held.iter().flat_map(|h| h.weights.iter().copied()).collect(),
            strategies: self.held.iter().filter_map(|h| h.strategy).collect(),
        })
    }
}

/// Integrate the scenario. Invalid scenarios are rejected up front; any
/// failure after the start is reported in the log status with the records
/// produced so far.
pub fn run(s: &Scenario) -> Result<TrajectoryLog> {
    let violations = validate(s);
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations.join("; ")));
    }
    let blocks = s.blocks()?;
    let mut runner = Runner {
        s,
        held: vec![Held::default(); blocks.len()],
        blocks,
        policy_cruise: &s.settings.cruise,
        active: Vec::new(),
    };
    let mut log = TrajectoryLog {
        records: Vec::new(),
        events: Vec::new(),
        status: RunStatus::Completed,
    };
    let fail = |log: &mut TrajectoryLog, t: f64, f: Failure| {
        warn!("run stopped at t = {t}: {}", f.message);
        log.status = RunStatus::Failed {
            time: t,
            kind: f.kind,
            message: f.message,
        };
    };

    let st = &s.settings;
    let mut p = s.initial_state()?;
    if st.projection {
        p = match project_equalities(&s.kinds, &s.constraints, &p, st.projection_tol, DEFAULT_PROJECTION_ITERS) {
            Ok(q) => q,
            Err(e) => {
                fail(&mut log, 0.0, e.into());
                return Ok(log);
            }
        };
    }
    let mut t = 0.0;
    let start = runner
        .update_active(&p, t, &mut log.events)
        .and_then(|_| runner.select(&p, t))
        .and_then(|v| runner.record(&p, t, Some(v)));
    match start {
        Ok(r) => log.records.push(r),
        Err(f) => {
            if let Ok(r) = runner.record(&p, t, None) {
                log.records.push(r);
            }
            fail(&mut log, t, f);
            return Ok(log);
        }
    }

    let mut k: u64 = 0;
    while t < st.duration {
        let target = ((k + 1) as f64 * st.step).min(st.duration);
        let dt = target - t;
        let outcome = (|| -> Result<(CompositeState, f64, bool), Failure> {
            let (mut q, frac) = runner.advance(&p, t, dt)?;
            let t_new = if frac >= 1.0 { target } else { t + frac * dt };
            if st.projection {
                q = project_equalities(&s.kinds, &s.constraints, &q, st.projection_tol, DEFAULT_PROJECTION_ITERS)?;
            }
            let changed = runner.update_active(&q, t_new, &mut log.events)?;
            Ok((q, t_new, changed))
        })();
        let (q, t_new, changed) = match outcome {
            Ok(x) => x,
            Err(f) => {
                fail(&mut log, t, f);
                return Ok(log);
            }
        };
        if t_new >= target {
            k += 1;
        }
        let velocity = if changed || !runner.active.is_empty() {
            runner.select(&q, t_new)
        } else {
            runner.refresh_frames(&q, t_new)
        };
        p = q;
        t = t_new;
        match velocity.and_then(|v| runner.record(&p, t, Some(v))) {
            Ok(r) => log.records.push(r),
            Err(f) => {
                if let Ok(r) = runner.record(&p, t, None) {
                    log.records.push(r);
                }
                fail(&mut log, t, f);
                return Ok(log);
            }
        }
    }
    info!(
        "run completed: {} records, {} events",
        log.records.len(),
        log.events.len()
    );
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::TimeFunction;
    use VehicleKind::Unicycle;

    fn scenario(kinds: Vec<VehicleKind>, initial: Vec<Vec<f64>>, constraints: Vec<EdgeConstraint>, settings: Settings) -> Scenario {
        Scenario {
            kinds,
            initial,
            constraints,
            mode: Mode::Graph,
            settings,
        }
    }

    #[test]
    fn euler_cruise_moves_forward() {
        // one unicycle, no constraints: the family is the control span
        let s = scenario(
            vec![Unicycle],
            vec![vec![0.0, 0.0, 0.0]],
            vec![],
            Settings {
                duration: 0.1,
                step: 0.1,
                integrator: Integrator::Euler,
                cruise: vec![1.0, 0.0],
                ..Settings::default()
            },
        );
        let log = run(&s).unwrap();
        assert_eq!(log.records.len(), 2);
        let first = &log.records[0];
        let pdot = first.pdot.as_ref().unwrap();
        let end = &log.records[1].state;
        for i in 0..3 {
            assert!((end[i] - 0.1 * pdot[i]).abs() < 1e-15);
        }
        // the first basis vector is a unit vector in the control span
        let speed = (pdot[0].powi(2) + pdot[1].powi(2) + pdot[2].powi(2)).sqrt();
        assert!((speed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_duration_single_record() {
        let s = scenario(vec![Unicycle], vec![vec![0.0; 3]], vec![], Settings {
            duration: 0.0,
            ..Settings::default()
        });
        let log = run(&s).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.status, RunStatus::Completed);
    }

    #[test]
    fn validation_catches_problems() {
        let s = scenario(
            vec![Unicycle, Unicycle],
            vec![vec![3.0, 0.0, 0.0], vec![0.0; 3]],
            vec![EdgeConstraint::DistanceEq { i: 0, j: 1, d: 1.0 }],
            Settings {
                step: 0.0,
                ..Settings::default()
            },
        );
        let v = validate(&s);
        assert!(v.iter().any(|m| m.contains("step")));
        let s = Scenario {
            settings: Settings::default(),
            ..s
        };
        let v = validate(&s);
        assert!(v.iter().any(|m| m.contains("equality not met at t=0")), "{v:?}");
    }

    #[test]
    fn projection_fixes_small_distance_error() {
        let kinds = [Unicycle, Unicycle];
        let p = CompositeState::new(&kinds, &[vec![1.0 + 1e-6, 0.0, 0.3], vec![0.0, 0.0, 1.0]]).unwrap();
        let c = [EdgeConstraint::DistanceEq { i: 0, j: 1, d: 1.0 }];
        let q = project_equalities(&kinds, &c, &p, 1e-12, 20).unwrap();
        let d = (q.p[0] - q.p[3]).hypot(q.p[1] - q.p[4]);
        assert!((d - 1.0).abs() <= 1e-12);
        let moved = matlite::norm2(&q.p.iter().zip(&p.p).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(moved <= 2e-6);
        // headings untouched
        assert_eq!((q.p[2], q.p[5]), (0.3, 1.0));
        let same = project_equalities(&kinds, &c, &q, 1e-12, 20).unwrap();
        assert_eq!(same, q);
    }

    #[test]
    fn contradictory_projection_diverges() {
        let kinds = [Unicycle, Unicycle];
        let p = CompositeState::new(&kinds, &[vec![1.5, 0.0, 0.0], vec![0.0; 3]]).unwrap();
        let c = [
            EdgeConstraint::DistanceEq { i: 0, j: 1, d: 1.0 },
            EdgeConstraint::DistanceEq { i: 0, j: 1, d: 2.0 },
        ];
        assert!(matches!(
            project_equalities(&kinds, &c, &p, 1e-12, 20),
            Err(Error::ProjectionDiverged { .. })
        ));
    }

    #[test]
    fn band_activation_is_detected_and_respected() {
        // leader drives straight away from a follower at rest
        let two = TimeFunction::Constant { value: 2.0 };
        let zero = TimeFunction::Constant { value: 0.0 };
        let s = scenario(
            vec![Unicycle, Unicycle],
            vec![vec![1.5, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
            vec![
                EdgeConstraint::SpeedTrack {
                    i: 0,
                    refs: vec![two, zero],
                },
                EdgeConstraint::DistanceBand {
                    i: 0,
                    j: 1,
                    d_minus: 1.0,
                    d_plus: 2.0,
                },
            ],
            Settings {
                duration: 1.0,
                step: 1e-2,
                margin: 0.05,
                ..Settings::default()
            },
        );
        let log = run(&s).unwrap();
        assert_eq!(log.status, RunStatus::Completed);
        assert!(log.activations() >= 1);
        for r in &log.records {
            let d = (r.state[0] - r.state[3]).hypot(r.state[1] - r.state[4]);
            assert!(d <= 2.0 + 1e-5, "d = {d} at t = {}", r.t);
            let u = &r.controls[0];
            assert!((u[0] - 2.0).abs() < 1e-9 && u[1].abs() < 1e-9);
        }
        assert!((log.records.last().unwrap().t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pinned_constant_speed_fails_at_start() {
        let zero = TimeFunction::Constant { value: 0.0 };
        let s = scenario(
            vec![VehicleKind::ConstantSpeed { v: 1.0 }],
            vec![vec![0.0; 3]],
            vec![
                EdgeConstraint::RatePin {
                    i: 0,
                    coord: 0,
                    reference: zero.clone(),
                },
                EdgeConstraint::RatePin {
                    i: 0,
                    coord: 1,
                    reference: zero,
                },
            ],
            Settings::default(),
        );
        let log = run(&s).unwrap();
        assert!(matches!(
            log.status,
            RunStatus::Failed {
                kind: FailureKind::EqualityInconsistent,
                ..
            }
        ));
        assert_eq!(log.records.len(), 1);
    }
}
