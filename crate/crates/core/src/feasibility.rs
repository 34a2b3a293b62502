//! Feasibility decisions and motion selection.
//!
//! The kinematic rows `Ω_K Ṗ = T_K` and equality rows `Ω_E Ṗ = T_E` are
//! stacked and solved for a minimum-norm particular velocity `k_bar` plus an
//! orthonormal null-space basis. Every composite velocity of the form
//! `k_bar + Σ K_l w_l` respects the kinematics and the equalities; the
//! weights `w` are then chosen so that each active inequality row satisfies
//! `row · Ṗ ≤ rhs - margin`.
//!
//! Weight selection first scans single basis vectors in index order and
//! only then falls back to a minimum-norm program over all weights.

use crate::constraints::{ActiveRow, ActiveSet, EdgeConstraint, Side};
use crate::error::{Error, Result};
use crate::matlite::{self, Inconsistent, Mat};
use crate::qp;
use crate::vehicles::{self, CompositeState, VehicleKind};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const DEFAULT_BOUND: f64 = 10.0;

/// Tolerance used when a scalar row coefficient counts as zero in the scan.
const SCAN_ZERO: f64 = 1e-12;
/// Relative slack accepted when certifying a combined program solution.
const CERTIFY_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    /// Relative rank tolerance.
    pub tol: f64,
    pub eps_act: f64,
    pub margin: f64,
    pub bound: f64,
    pub policy: SelectionPolicy,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tol: matlite::DEFAULT_TOL,
            eps_act: crate::constraints::DEFAULT_EPS_ACT,
            margin: 0.0,
            bound: DEFAULT_BOUND,
            policy: SelectionPolicy::default(),
        }
    }
}

/// Weights used when no inequality is active. Missing entries are zero,
/// extra entries are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub cruise: Vec<f64>,
}

impl SelectionPolicy {
    fn weights(&self, kappa: usize) -> Vec<f64> {
        (0..kappa).map(|l| self.cruise.get(l).copied().unwrap_or(0.0)).collect()
    }
}

/// Affine family `k_bar + Σ basis_l w_l` of admissible velocities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionFamily {
    pub k_bar: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub kappa: usize,
    pub rank: usize,
}

impl MotionFamily {
    pub fn velocity(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.kappa, "weight count must equal kappa");
        let mut v = self.k_bar.clone();
        for (k, w) in self.basis.iter().zip(weights) {
            if *w != 0.0 {
                for (vi, ki) in v.iter_mut().zip(k) {
                    *vi += w * ki;
                }
            }
        }
        v
    }

    /// Same family with the basis rotated to best match `reference`.
    pub fn aligned_to(mut self, reference: &[Vec<f64>]) -> Self {
        if reference.len() == self.kappa && self.kappa > 0 {
            self.basis = matlite::align_basis(&self.basis, reference);
        }
        self
    }
}

/// Particular solution plus null basis of `omega · Ṗ = t`.
pub fn motion_family(omega: &Mat, t: &[f64], tol: f64) -> std::result::Result<MotionFamily, Inconsistent> {
    let n = omega.cols();
    if omega.rows() == 0 {
        return Ok(MotionFamily {
            k_bar: vec![0.0; n],
            basis: (0..n).map(|k| matlite::unit(n, k)).collect(),
            kappa: n,
            rank: 0,
        });
    }
    let svd = matlite::Svd::new(omega);
    let rank = svd.rank(tol);
    let augmented = matlite::rank_of(&omega.with_column(t), tol);
    if augmented > rank {
        return Err(Inconsistent {
            rank,
            augmented_rank: augmented,
        });
    }
    let basis = svd.kernel(rank);
    Ok(MotionFamily {
        k_bar: svd.pseudo_solve(t, rank),
        kappa: basis.len(),
        basis,
        rank,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Strategy {
    /// No active inequality: policy weights.
    Unconstrained,
    /// A single basis vector (1-based index) carries the whole correction.
    SingleVector(usize),
    /// Minimum-norm combination of all basis vectors.
    ComboProgram,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Unconstrained => f.write_str("unconstrained"),
            Strategy::SingleVector(l) => write!(f, "single_vector({l})"),
            Strategy::ComboProgram => f.write_str("combo_program"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSelection {
    pub weights: Vec<f64>,
    pub pdot: Vec<f64>,
    pub strategy: Strategy,
}

/// No choice of weights within the bound satisfies the active rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoFeasibleDirection;

impl fmt::Display for NoFeasibleDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no feasible direction for the active inequality constraints")
    }
}

impl std::error::Error for NoFeasibleDirection {}

/// Interval of scalar weights `w ∈ [-bound, bound]` such that
/// `row · (k_bar + k w) ≤ rhs - margin` for every active row.
fn admissible_interval(family: &MotionFamily, l: usize, rows: &[ActiveRow], margin: f64, bound: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (-bound, bound);
    for r in rows {
        let a = matlite::dot(&r.row, &family.basis[l]);
        let c = r.rhs - margin - matlite::dot(&r.row, &family.k_bar);
        let scale = 1.0 + matlite::norm_inf(&r.row);
        if a.abs() <= SCAN_ZERO * scale {
            if c < -SCAN_ZERO * scale {
                return None;
            }
        } else if a > 0.0 {
            hi = hi.min(c / a);
        } else {
            lo = lo.max(c / a);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

pub fn select_weights(
    family: &MotionFamily,
    active: &ActiveSet,
    policy: &SelectionPolicy,
    margin: f64,
    bound: f64,
) -> std::result::Result<MotionSelection, NoFeasibleDirection> {
    let kappa = family.kappa;
    if active.is_empty() {
        let weights = policy.weights(kappa);
        return Ok(MotionSelection {
            pdot: family.velocity(&weights),
            weights,
            strategy: Strategy::Unconstrained,
        });
    }

    for l in 0..kappa {
        if let Some((lo, hi)) = admissible_interval(family, l, &active.rows, margin, bound) {
            let w = 0.0_f64.clamp(lo, hi);
            let mut weights = vec![0.0; kappa];
            weights[l] = w;
            return Ok(MotionSelection {
                pdot: family.velocity(&weights),
                weights,
                strategy: Strategy::SingleVector(l + 1),
            });
        }
    }

    // All weights at once: min |w|² s.t. (row·K) w ≤ rhs - margin - row·k_bar.
    let a = Mat::from_rows(
        &active
            .rows
            .iter()
            .map(|r| family.basis.iter().map(|k| matlite::dot(&r.row, k)).collect())
            .collect::<Vec<_>>(),
        kappa,
    );
    let c: Vec<f64> = active
        .rows
        .iter()
        .map(|r| r.rhs - margin - matlite::dot(&r.row, &family.k_bar))
        .collect();
    if kappa == 0 {
        return if c.iter().all(|&ci| ci >= -SCAN_ZERO) {
            Ok(MotionSelection {
                pdot: family.k_bar.clone(),
                weights: Vec::new(),
                strategy: Strategy::ComboProgram,
            })
        } else {
            Err(NoFeasibleDirection)
        };
    }
    let weights = qp::min_norm_feasible(&a, &c, bound, CERTIFY_TOL).ok_or(NoFeasibleDirection)?;
    Ok(MotionSelection {
        pdot: family.velocity(&weights),
        weights,
        strategy: Strategy::ComboProgram,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    EqualityInconsistent,
    NoFeasibleDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Composite coordinates solved for, in order.
    pub columns: Vec<usize>,
    pub kinematic_rows: usize,
    pub equality_rows: usize,
    pub stack_rank: usize,
    pub augmented_rank: usize,
    pub kappa: Option<usize>,
    /// The stacked rows are linearly dependent (fewer independent rows
    /// than rows), the symptom of a singular closed-form solution.
    pub rank_deficient: bool,
    pub active: ActiveSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub status: Status,
    pub family: Option<MotionFamily>,
    pub selection: Option<MotionSelection>,
    pub diagnostics: Diagnostics,
}

/// How inequality sides are declared active.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Activity<'a> {
    /// `g ≥ -eps_act`.
    Threshold(f64),
    /// Exactly the listed `(constraint, side)` pairs.
    Listed(&'a [(usize, Side)]),
}

/// Linear system for the velocities of a subset of vehicles, with the
/// contribution of all other vehicles (whose velocities are known) moved to
/// the right-hand side.
#[derive(Clone, Debug)]
pub(crate) struct LocalSystem {
    pub columns: Vec<usize>,
    pub omega: Mat,
    pub rhs: Vec<f64>,
    pub kinematic_rows: usize,
    pub active: ActiveSet,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn local_system(
    kinds: &[VehicleKind],
    constraints: &[EdgeConstraint],
    relevant: &[usize],
    block: &[usize],
    p: &CompositeState,
    t: f64,
    known: &[f64],
    activity: Activity<'_>,
) -> Result<LocalSystem> {
    let columns: Vec<usize> = block.iter().flat_map(|&v| p.columns(v)).collect();
    let in_block = {
        let mut mask = vec![false; p.dim()];
        columns.iter().for_each(|&c| mask[c] = true);
        mask
    };
    // Contribution of known velocities outside the block.
    let outside = |row: &[f64]| -> f64 {
        row.iter()
            .zip(known)
            .zip(&in_block)
            .filter(|(_, inside)| !**inside)
            .map(|((r, k), _)| r * k)
            .sum()
    };
    let restrict = |row: &[f64]| -> Vec<f64> { columns.iter().map(|&c| row[c]).collect() };

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for &v in block {
        let kb = vehicles::kinematic_block(kinds[v], p.slice(v));
        let o = p.offset(v);
        for r in 0..kb.omega.rows() {
            let mut full = vec![0.0; p.dim()];
            full[o..o + kb.omega.cols()].copy_from_slice(kb.omega.row(r));
            rows.push(restrict(&full));
            rhs.push(kb.t[r]);
        }
    }
    let kinematic_rows = rows.len();

    let mut active = ActiveSet {
        rows: Vec::new(),
        time: t,
    };
    for &id in relevant {
        let c = &constraints[id];
        if c.is_equality() {
            let (m, r) = c.equality_rows(kinds, p, t)?;
            for (k, rv) in r.iter().enumerate() {
                rows.push(restrict(m.row(k)));
                rhs.push(rv - outside(m.row(k)));
            }
        } else {
            let found = match activity {
                Activity::Threshold(eps) => c.active_rows(id, kinds, p, t, eps)?,
                Activity::Listed(keys) => keys
                    .iter()
                    .filter(|(e, _)| *e == id)
                    .map(|(_, side)| c.side_row(id, *side, kinds, p, t))
                    .collect::<Result<Vec<_>>>()?,
            };
            for mut r in found {
                r.rhs -= outside(&r.row);
                r.row = restrict(&r.row);
                active.rows.push(r);
            }
        }
    }
    Ok(LocalSystem {
        omega: Mat::from_rows(&rows, columns.len()),
        columns,
        rhs,
        kinematic_rows,
        active,
    })
}

pub(crate) fn solve_local(sys: LocalSystem, opts: &Options) -> FeasibilityReport {
    let stack_rank = matlite::rank_of(&sys.omega, opts.tol);
    let mut diagnostics = Diagnostics {
        columns: sys.columns.clone(),
        kinematic_rows: sys.kinematic_rows,
        equality_rows: sys.omega.rows() - sys.kinematic_rows,
        stack_rank,
        augmented_rank: stack_rank,
        kappa: None,
        rank_deficient: stack_rank < sys.omega.rows(),
        active: sys.active.clone(),
    };
    let family = match motion_family(&sys.omega, &sys.rhs, opts.tol) {
        Ok(f) => f,
        Err(e) => {
            diagnostics.augmented_rank = e.augmented_rank;
            return FeasibilityReport {
                status: Status::EqualityInconsistent,
                family: None,
                selection: None,
                diagnostics,
            };
        }
    };
    diagnostics.kappa = Some(family.kappa);
    match select_weights(&family, &sys.active, &opts.policy, opts.margin, opts.bound) {
        Ok(sel) => FeasibilityReport {
            status: Status::Feasible,
            family: Some(family),
            selection: Some(sel),
            diagnostics,
        },
        Err(NoFeasibleDirection) => FeasibilityReport {
            status: Status::NoFeasibleDirection,
            family: Some(family),
            selection: None,
            diagnostics,
        },
    }
}

/// Joint feasibility of all vehicles under all constraints at `(P, t)`.
pub fn check(
    kinds: &[VehicleKind],
    constraints: &[EdgeConstraint],
    p: &CompositeState,
    t: f64,
    opts: &Options,
) -> Result<FeasibilityReport> {
    let block: Vec<usize> = (0..kinds.len()).collect();
    let relevant: Vec<usize> = (0..constraints.len()).collect();
    let known = vec![0.0; p.dim()];
    let sys = local_system(
        kinds,
        constraints,
        &relevant,
        &block,
        p,
        t,
        &known,
        Activity::Threshold(opts.eps_act),
    )?;
    Ok(solve_local(sys, opts))
}

/// Parent of every vehicle in a leader-follower tree; `None` marks the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderTree {
    pub parent: Vec<Option<usize>>,
}

impl LeaderTree {
    /// Root first, then every follower after its parent. Fails unless the
    /// map is a single rooted tree.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.parent.len();
        let roots: Vec<usize> = (0..n).filter(|&v| self.parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidScenario(format!(
                "leader tree needs exactly one root, found {}",
                roots.len()
            )));
        }
        if let Some(v) = (0..n).find(|&v| self.parent[v].is_some_and(|p| p >= n || p == v)) {
            return Err(Error::InvalidScenario(format!("vehicle {v} has an invalid parent")));
        }
        let mut order = vec![roots[0]];
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            order.extend((0..n).filter(|&c| self.parent[c] == Some(v)));
            head += 1;
        }
        if order.len() != n {
            return Err(Error::InvalidScenario("leader tree contains a cycle".into()));
        }
        Ok(order)
    }

    /// Constraints each vehicle is responsible for: those on the edge to
    /// its parent plus single-vehicle constraints on itself.
    pub fn responsibilities(&self, constraints: &[EdgeConstraint]) -> Result<Vec<Vec<usize>>> {
        let mut owned = vec![Vec::new(); self.parent.len()];
        for (id, c) in constraints.iter().enumerate() {
            let vs = c.vehicles();
            let owner = match vs.as_slice() {
                [v] => Some(*v),
                [a, b] if self.parent.get(*b).copied().flatten() == Some(*a) => Some(*b),
                [a, b] if self.parent.get(*a).copied().flatten() == Some(*b) => Some(*a),
                _ => None,
            };
            match owner {
                Some(v) if v < owned.len() => owned[v].push(id),
                _ => {
                    return Err(Error::InvalidScenario(format!(
                        "constraint {id} ({}) is not on a leader-follower edge",
                        c.kind_name()
                    )))
                }
            }
        }
        Ok(owned)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleReport {
    pub vehicle: usize,
    pub parent: Option<usize>,
    /// `None` when the parent's velocity was unavailable.
    pub report: Option<FeasibilityReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderFollowerReport {
    pub order: Vec<usize>,
    pub vehicles: Vec<VehicleReport>,
    /// First vehicle, in processing order, that is not feasible.
    pub first_failure: Option<usize>,
    /// Composite velocity assembled from the per-vehicle selections.
    pub pdot: Option<Vec<f64>>,
}

impl LeaderFollowerReport {
    pub fn status(&self) -> Status {
        match self.first_failure {
            None => Status::Feasible,
            Some(v) => self
                .vehicles
                .iter()
                .find(|r| r.vehicle == v)
                .and_then(|r| r.report.as_ref())
                .map_or(Status::EqualityInconsistent, |r| r.status),
        }
    }
}

/// Decentralized check over a leader-follower tree. Each vehicle solves
/// only its own kinematics and the constraints on the edge to its parent,
/// with the parent's velocity already fixed. A vehicle whose own check
/// finds no feasible direction still passes its policy velocity down so
/// that its followers can be evaluated; an inconsistent vehicle does not.
pub fn check_leader_follower(
    tree: &LeaderTree,
    kinds: &[VehicleKind],
    constraints: &[EdgeConstraint],
    p: &CompositeState,
    t: f64,
    opts: &Options,
) -> Result<LeaderFollowerReport> {
    if tree.parent.len() != kinds.len() {
        return Err(Error::InvalidScenario("leader tree size differs from the fleet".into()));
    }
    let order = tree.topological_order()?;
    let owned = tree.responsibilities(constraints)?;
    let mut known = vec![0.0; p.dim()];
    let mut available = vec![false; kinds.len()];
    let mut reports = Vec::with_capacity(order.len());
    let mut first_failure = None;

    for &v in &order {
        let parent = tree.parent[v];
        if parent.is_some_and(|q| !available[q]) {
            first_failure.get_or_insert(v);
            reports.push(VehicleReport {
                vehicle: v,
                parent,
                report: None,
            });
            continue;
        }
        let sys = local_system(
            kinds,
            constraints,
            &owned[v],
            &[v],
            p,
            t,
            &known,
            Activity::Threshold(opts.eps_act),
        )?;
        let cols = sys.columns.clone();
        let report = solve_local(sys, opts);
        let velocity = match (&report.selection, &report.family) {
            (Some(sel), _) => Some(sel.pdot.clone()),
            (None, Some(fam)) => Some(fam.velocity(&opts.policy.weights(fam.kappa))),
            _ => None,
        };
        if let Some(vel) = velocity {
            for (c, x) in cols.iter().zip(vel) {
                known[*c] = x;
            }
            available[v] = true;
        }
        if report.status != Status::Feasible {
            first_failure.get_or_insert(v);
        }
        reports.push(VehicleReport {
            vehicle: v,
            parent,
            report: Some(report),
        });
    }
    Ok(LeaderFollowerReport {
        pdot: first_failure.is_none().then_some(known),
        order,
        vehicles: reports,
        first_failure,
    })
}
