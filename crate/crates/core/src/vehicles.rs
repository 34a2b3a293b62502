//! Vehicle kinematic models and their affine codistribution blocks.
//!
//! Each model is control-affine, `ṗ = f0(p) + Σ f_j(p) u_j`. The same
//! admissible velocity set is described row-wise by a block
//! `Ω_K(p) ṗ = T_K(p)` whose rows annihilate every control field and map
//! the drift onto `T_K`.
//!
//! Angles are stored unwrapped on the real line.

use crate::error::{Error, Result};
use crate::matlite::{self, Mat};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Steering angles at or beyond `π/2 - STEERING_GUARD` are rejected.
pub const STEERING_GUARD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VehicleKind {
    /// `[x, y, θ]`, inputs forward speed and turn rate.
    Unicycle,
    /// Unicycle moving at fixed speed `v`; the only input is the turn rate.
    ConstantSpeed { v: f64 },
    /// Rear-wheel car `[x, y, θ, φ]` with wheelbase `l`; inputs drive speed
    /// and steering rate.
    CarLike { l: f64 },
}

impl VehicleKind {
    pub fn state_dim(&self) -> usize {
        state_dim(*self)
    }

    pub fn control_count(&self) -> usize {
        match self {
            VehicleKind::Unicycle => 2,
            VehicleKind::ConstantSpeed { .. } => 1,
            VehicleKind::CarLike { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VehicleKind::Unicycle => "unicycle",
            VehicleKind::ConstantSpeed { .. } => "constant_speed",
            VehicleKind::CarLike { .. } => "car_like",
        }
    }

    /// Checks the parameter invariants (`v ≠ 0`, `l > 0`, finite).
    pub fn validate(&self) -> Result<()> {
        match *self {
            VehicleKind::Unicycle => Ok(()),
            VehicleKind::ConstantSpeed { v } if v != 0.0 && v.is_finite() => Ok(()),
            VehicleKind::ConstantSpeed { v } => Err(Error::InvalidScenario(format!(
                "constant-speed vehicle needs a finite nonzero speed, got {v}"
            ))),
            VehicleKind::CarLike { l } if l > 0.0 && l.is_finite() => Ok(()),
            VehicleKind::CarLike { l } => Err(Error::InvalidScenario(format!(
                "car-like vehicle needs a positive wheelbase, got {l}"
            ))),
        }
    }
}

pub fn state_dim(kind: VehicleKind) -> usize {
    match kind {
        VehicleKind::Unicycle | VehicleKind::ConstantSpeed { .. } => 3,
        VehicleKind::CarLike { .. } => 4,
    }
}

fn check_len(kind: VehicleKind, s: &[f64]) -> Result<()> {
    let expected = state_dim(kind);
    if s.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: s.len(),
        });
    }
    Ok(())
}

fn check_steering(phi: f64) -> Result<()> {
    if phi.abs() >= FRAC_PI_2 - STEERING_GUARD || !phi.is_finite() {
        return Err(Error::SingularSteering { phi });
    }
    Ok(())
}

/// Validates a single vehicle state: length, finiteness, steering guard.
pub fn validate_state(kind: VehicleKind, s: &[f64]) -> Result<()> {
    check_len(kind, s)?;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidScenario("state contains non-finite values".into()));
    }
    if let VehicleKind::CarLike { .. } = kind {
        check_steering(s[3])?;
    }
    Ok(())
}

/// Drift and control vector fields of the control-affine model.
#[derive(Clone, Debug, PartialEq)]
pub struct Fields {
    pub drift: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
}

pub fn fields(kind: VehicleKind, s: &[f64]) -> Result<Fields> {
    check_len(kind, s)?;
    let (c, sn) = (s[2].cos(), s[2].sin());
    Ok(match kind {
        VehicleKind::Unicycle => Fields {
            drift: vec![0.0; 3],
            controls: vec![vec![c, sn, 0.0], vec![0.0, 0.0, 1.0]],
        },
        VehicleKind::ConstantSpeed { v } => Fields {
            drift: vec![v * c, v * sn, 0.0],
            controls: vec![vec![0.0, 0.0, 1.0]],
        },
        VehicleKind::CarLike { l } => {
            check_steering(s[3])?;
            Fields {
                drift: vec![0.0; 4],
                controls: vec![vec![c, sn, s[3].tan() / l, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
            }
        }
    })
}

/// Affine codistribution block `omega · ṗ = t` of one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicBlock {
    pub omega: Mat,
    pub t: Vec<f64>,
}

pub fn kinematic_block(kind: VehicleKind, s: &[f64]) -> KinematicBlock {
    let (c, sn) = (s[2].cos(), s[2].sin());
    match kind {
        VehicleKind::Unicycle => KinematicBlock {
            omega: Mat::from_row_major(1, 3, vec![sn, -c, 0.0]),
            t: vec![0.0],
        },
        VehicleKind::ConstantSpeed { v } => KinematicBlock {
            omega: Mat::from_row_major(2, 3, vec![sn, -c, 0.0, c, sn, 0.0]),
            t: vec![0.0, v],
        },
        VehicleKind::CarLike { l } => {
            let phi = s[3];
            let (cs, ss) = ((s[2] + phi).cos(), (s[2] + phi).sin());
            KinematicBlock {
                omega: Mat::from_row_major(
                    2,
                    4,
                    vec![ss, -cs, -l * phi.cos(), 0.0, sn, -c, 0.0, 0.0],
                ),
                t: vec![0.0, 0.0],
            }
        }
    }
}

/// Covectors reading each physical control channel off a velocity in the
/// admissible set: `σ_k · (f0 + Σ f_j u_j) = u_k`.
///
/// Unicycle: forward speed `cosθ dx + sinθ dy` and turn rate `dθ`.
/// Constant speed: turn rate `dθ`. Car: drive speed `cosθ dx + sinθ dy`
/// and steering rate `dφ`.
pub fn channel_covectors(kind: VehicleKind, s: &[f64]) -> Vec<Vec<f64>> {
    let (c, sn) = (s[2].cos(), s[2].sin());
    match kind {
        VehicleKind::Unicycle => vec![vec![c, sn, 0.0], vec![0.0, 0.0, 1.0]],
        VehicleKind::ConstantSpeed { .. } => vec![vec![0.0, 0.0, 1.0]],
        VehicleKind::CarLike { .. } => vec![vec![c, sn, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
    }
}

/// Least-squares control inputs reproducing `pdot`; fails when the best
/// fit still misses `pdot` by more than `tol` (infinity norm).
pub fn controls_from_velocity(kind: VehicleKind, s: &[f64], pdot: &[f64], tol: f64) -> Result<Vec<f64>> {
    let f = fields(kind, s)?;
    if pdot.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: pdot.len(),
        });
    }
    let target: Vec<f64> = pdot.iter().zip(&f.drift).map(|(p, d)| p - d).collect();
    let basis = Mat::from_columns(&f.controls, s.len());
    let u = matlite::least_squares(&basis, &target, matlite::DEFAULT_TOL);
    let fit = basis.mul_vec(&u);
    let residual = matlite::norm_inf(
        &fit.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>(),
    );
    if residual > tol {
        return Err(Error::NotInDistribution { residual });
    }
    Ok(u)
}

/// Stacked vehicle states `P` with per-vehicle offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    offsets: Vec<usize>,
    pub p: Vec<f64>,
}

impl CompositeState {
    pub fn new(kinds: &[VehicleKind], states: &[Vec<f64>]) -> Result<Self> {
        assert_eq!(kinds.len(), states.len(), "kinds and states must align");
        let offsets = offsets_for(kinds);
        let mut p = Vec::with_capacity(composite_dim(kinds));
        for (k, s) in kinds.iter().zip(states) {
            check_len(*k, s)?;
            p.extend_from_slice(s);
        }
        Ok(Self { offsets, p })
    }

    pub fn from_vector(kinds: &[VehicleKind], p: Vec<f64>) -> Result<Self> {
        let dim = composite_dim(kinds);
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Ok(Self {
            offsets: offsets_for(kinds),
            p,
        })
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn offset(&self, vehicle: usize) -> usize {
        self.offsets[vehicle]
    }

    pub fn vehicle_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn slice(&self, vehicle: usize) -> &[f64] {
        let start = self.offsets[vehicle];
        let end = self.offsets.get(vehicle + 1).copied().unwrap_or(self.p.len());
        &self.p[start..end]
    }

    /// Composite coordinate indices owned by `vehicle`.
    pub fn columns(&self, vehicle: usize) -> std::ops::Range<usize> {
        let start = self.offsets[vehicle];
        let end = self.offsets.get(vehicle + 1).copied().unwrap_or(self.p.len());
        start..end
    }

    pub fn with_vector(&self, p: Vec<f64>) -> Self {
        assert_eq!(p.len(), self.p.len());
        Self {
            offsets: self.offsets.clone(),
            p,
        }
    }
}

pub fn offsets_for(kinds: &[VehicleKind]) -> Vec<usize> {
    kinds
        .iter()
        .scan(0, |acc, k| {
            let start = *acc;
            *acc += k.state_dim();
            Some(start)
        })
        .collect()
}

pub fn composite_dim(kinds: &[VehicleKind]) -> usize {
    kinds.iter().map(|k| k.state_dim()).sum()
}

/// Block-diagonal kinematic stack `Ω_K Ṗ = T_K` in composite coordinates.
pub fn stack_kinematics(kinds: &[VehicleKind], state: &CompositeState) -> (Mat, Vec<f64>) {
    let blocks: Vec<KinematicBlock> = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| kinematic_block(*k, state.slice(i)))
        .collect();
    let rows: usize = blocks.iter().map(|b| b.omega.rows()).sum();
    let mut omega = Mat::zeros(rows, state.dim());
    let mut t = Vec::with_capacity(rows);
    let mut r0 = 0;
    for (i, b) in blocks.iter().enumerate() {
        let c0 = state.offset(i);
        for r in 0..b.omega.rows() {
            for c in 0..b.omega.cols() {
                omega[(r0 + r, c0 + c)] = b.omega[(r, c)];
            }
        }
        t.extend_from_slice(&b.t);
        r0 += b.omega.rows();
    }
    (omega, t)
}
