//! Closed-form motion families for two-vehicle groups keeping a fixed
//! distance, used as oracles for the numerical engine.
//!
//! Vectors are returned unnormalized. Comparison against the engine is by
//! span (rank of the joined basis), never by entrywise equality.

use crate::constraints::EdgeConstraint;
use crate::error::{Error, Result};
use crate::feasibility::{self, Options};
use crate::matlite::{self, Mat};
use crate::vehicles::{self, CompositeState, VehicleKind};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Smallest |⟨a, b₂⟩| accepted before the constant-speed solution blows up.
pub const SINGULAR_EPS: f64 = 1e-9;
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AnalyticCase {
    TwoUnicycles,
    /// Vehicle 1 moves at constant speed `v1`, vehicle 2 is a unicycle.
    UnicycleConstantSpeed { v1: f64 },
    /// Vehicle 1 is a unicycle, vehicle 2 a car with wheelbase `l2`.
    UnicycleCar { l2: f64 },
}

impl fmt::Display for AnalyticCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticCase::TwoUnicycles => f.write_str("two_unicycles"),
            AnalyticCase::UnicycleConstantSpeed { v1 } => write!(f, "constant_speed_unicycle(v1={v1})"),
            AnalyticCase::UnicycleCar { l2 } => write!(f, "unicycle_car(l2={l2})"),
        }
    }
}

impl AnalyticCase {
    pub fn kinds(&self) -> [VehicleKind; 2] {
        match *self {
            AnalyticCase::TwoUnicycles => [VehicleKind::Unicycle, VehicleKind::Unicycle],
            AnalyticCase::UnicycleConstantSpeed { v1 } => [VehicleKind::ConstantSpeed { v: v1 }, VehicleKind::Unicycle],
            AnalyticCase::UnicycleCar { l2 } => [VehicleKind::Unicycle, VehicleKind::CarLike { l: l2 }],
        }
    }

    pub fn dim(&self) -> usize {
        vehicles::composite_dim(&self.kinds())
    }

    pub fn expected_kappa(&self) -> usize {
        match self {
            AnalyticCase::UnicycleConstantSpeed { .. } => 2,
            _ => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kinds().iter().try_for_each(|k| k.validate())
    }

    /// Distance constraint satisfied by `p`.
    pub fn constraint_at(&self, p: &CompositeState) -> EdgeConstraint {
        let (a, _, _) = geometry(p);
        EdgeConstraint::DistanceEq {
            i: 0,
            j: 1,
            d: matlite::norm2(&a),
        }
    }
}

/// Particular solution (zero when the system is homogeneous) and basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSolution {
    pub k_bar: Option<Vec<f64>>,
    pub basis: Vec<Vec<f64>>,
}

/// `a = p₁ − p₂`, `b₁`, `b₂`.
fn geometry(p: &CompositeState) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let (s1, s2) = (p.slice(0), p.slice(1));
    (
        [s1[0] - s2[0], s1[1] - s2[1]],
        [s1[2].cos(), s1[2].sin()],
        [s2[2].cos(), s2[2].sin()],
    )
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn basis_at(case: AnalyticCase, p: &CompositeState) -> Result<AnalyticSolution> {
    if p.dim() != case.dim() || p.vehicle_count() != 2 {
        return Err(Error::DimensionMismatch {
            expected: case.dim(),
            got: p.dim(),
        });
    }
    let (a, b1, b2) = geometry(p);
    let (ab1, ab2) = (dot2(a, b1), dot2(a, b2));
    let sol = match case {
        AnalyticCase::TwoUnicycles => AnalyticSolution {
            k_bar: None,
            basis: vec![
                matlite::unit(6, 2),
                matlite::unit(6, 5),
                vec![b1[0] * ab2, b1[1] * ab2, 0.0, b2[0] * ab1, b2[1] * ab1, 0.0],
            ],
        },
        AnalyticCase::UnicycleConstantSpeed { v1 } => {
            if ab2.abs() <= SINGULAR_EPS {
                return Err(Error::SingularDirection { denominator: ab2 });
            }
            let ratio = v1 * ab1 / ab2;
            AnalyticSolution {
                k_bar: Some(vec![v1 * b1[0], v1 * b1[1], 0.0, b2[0] * ratio, b2[1] * ratio, 0.0]),
                basis: vec![matlite::unit(6, 2), matlite::unit(6, 5)],
            }
        }
        AnalyticCase::UnicycleCar { l2 } => {
            let phi = p.slice(1)[3];
            AnalyticSolution {
                k_bar: None,
                basis: vec![
                    matlite::unit(7, 2),
                    matlite::unit(7, 6),
                    vec![
                        b1[0] * ab2,
                        b1[1] * ab2,
                        0.0,
                        b2[0] * ab1,
                        b2[1] * ab1,
                        phi.tan() / l2 * ab1,
                        0.0,
                    ],
                ],
            }
        }
    };
    Ok(sol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanReport {
    pub engine_kappa: usize,
    pub expected_kappa: usize,
    pub analytic_rank: usize,
    pub joint_rank: usize,
    /// Largest |Ω K_l| over the basis and |Ω k_bar − T| for the particular
    /// solution.
    pub max_residual: f64,
    /// Largest rate of change of the squared distance along any vector.
    pub distance_rate: f64,
    pub span_match: bool,
    pub passed: bool,
}

/// Compare `solution` with the engine's family at `p` under tolerance
/// `tol` on the residuals.
pub fn verify_solution(case: AnalyticCase, p: &CompositeState, solution: &AnalyticSolution, tol: f64) -> Result<SpanReport> {
    let kinds = case.kinds();
    let constraint = case.constraint_at(p);
    let (mut omega, mut t) = vehicles::stack_kinematics(&kinds, p);
    let (eq, eq_rhs) = constraint.equality_rows(&kinds, p, 0.0)?;
    omega = omega.vstack(&eq);
    t.extend(eq_rhs);

    let report = feasibility::check(&kinds, std::slice::from_ref(&constraint), p, 0.0, &Options::default())?;
    let family = report.family.ok_or_else(|| Error::InvalidScenario("engine found the system inconsistent".into()))?;

    let mut max_residual: f64 = 0.0;
    for k in &solution.basis {
        max_residual = max_residual.max(matlite::norm_inf(&omega.mul_vec(k)));
    }
    let mut family_members = Vec::new();
    if let Some(kb) = &solution.k_bar {
        let r: Vec<f64> = omega.mul_vec(kb).iter().zip(&t).map(|(x, y)| x - y).collect();
        max_residual = max_residual.max(matlite::norm_inf(&r));
        // The two particular solutions must differ by a member of the span.
        family_members.push(kb.iter().zip(&family.k_bar).map(|(x, y)| x - y).collect::<Vec<_>>());
    }

    let grad = &eq.row_vectors()[0];
    let distance_rate = solution
        .basis
        .iter()
        .chain(solution.k_bar.iter())
        .map(|k| matlite::dot(grad, k).abs())
        .fold(0.0, f64::max);

    let n = case.dim();
    let analytic_rank = matlite::rank_of(&Mat::from_columns(&solution.basis, n), RANK_TOL);
    let mut joint: Vec<Vec<f64>> = family.basis.clone();
    joint.extend(solution.basis.iter().cloned());
    let joint_rank = matlite::rank_of(&Mat::from_columns(&joint, n), RANK_TOL);
    let mut members_in_span = true;
    for m in family_members {
        let mut with = joint.clone();
        with.push(m);
        members_in_span &= matlite::rank_of(&Mat::from_columns(&with, n), RANK_TOL) == joint_rank;
    }

    let expected = case.expected_kappa();
    let span_match = family.kappa == expected && analytic_rank == expected && joint_rank == expected && members_in_span;
    Ok(SpanReport {
        engine_kappa: family.kappa,
        expected_kappa: expected,
        analytic_rank,
        joint_rank,
        max_residual,
        distance_rate,
        span_match,
        passed: span_match && max_residual <= tol,
    })
}

pub fn verify_against_engine(case: AnalyticCase, p: &CompositeState, tol: f64) -> Result<SpanReport> {
    let sol = basis_at(case, p)?;
    verify_solution(case, p, &sol, tol)
}

/// Random state with the two vehicles 0.5 to 3 apart, rejecting headings
/// nearly perpendicular to the line of sight.
pub fn sample_state<R: Rng>(case: AnalyticCase, rng: &mut R) -> CompositeState {
    let kinds = case.kinds();
    loop {
        let x1 = rng.random_range(-5.0..5.0);
        let y1 = rng.random_range(-5.0..5.0);
        let th1 = rng.random_range(-PI..PI);
        let th2 = rng.random_range(-PI..PI);
        let d = rng.random_range(0.5..3.0);
        let bearing: f64 = rng.random_range(-PI..PI);
        let (x2, y2) = (x1 - d * bearing.cos(), y1 - d * bearing.sin());
        let ah = [bearing.cos(), bearing.sin()];
        if dot2(ah, [th1.cos(), th1.sin()]).abs() < 0.1 || dot2(ah, [th2.cos(), th2.sin()]).abs() < 0.1 {
            continue;
        }
        let mut second = vec![x2, y2, th2];
        if let AnalyticCase::UnicycleCar { .. } = case {
            second.push(rng.random_range(-1.0..1.0));
        }
        return CompositeState::new(&kinds, &[vec![x1, y1, th1], second]).expect("sampled state has the case dimension");
    }
}

/// Default cases checked by the benchmark.
pub fn benchmark_cases() -> [AnalyticCase; 3] {
    [
        AnalyticCase::TwoUnicycles,
        AnalyticCase::UnicycleConstantSpeed { v1: 1.0 },
        AnalyticCase::UnicycleCar { l2: 0.5 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: AnalyticCase,
    pub samples: usize,
    pub failures: usize,
    pub kappa: usize,
    pub max_residual: f64,
    pub max_distance_rate: f64,
}

/// Span and residual checks over `samples` seeded random states per case.
/// With `corrupt` set, the last analytic vector is perturbed before the
/// comparison, which must make every sample fail.
pub fn bench(seed: u64, samples: usize, corrupt: bool) -> Vec<BenchRow> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    benchmark_cases()
        .into_iter()
        .map(|case| {
            let mut row = BenchRow {
                case,
                samples,
                failures: 0,
                kappa: case.expected_kappa(),
                max_residual: 0.0,
                max_distance_rate: 0.0,
            };
            for _ in 0..samples {
                let p = sample_state(case, &mut rng);
                let outcome = basis_at(case, &p).and_then(|mut sol| {
                    if corrupt {
                        let last = sol.basis.last_mut().expect("nonempty basis");
                        last[0] += 0.5;
                        last[1] -= 0.25;
                    }
                    verify_solution(case, &p, &sol, 1e-10)
                });
                match outcome {
                    Ok(r) => {
                        row.max_residual = row.max_residual.max(r.max_residual);
                        row.max_distance_rate = row.max_distance_rate.max(r.distance_rate);
                        row.failures += usize::from(!r.passed);
                    }
                    Err(_) => row.failures += 1,
                }
            }
            row
        })
        .collect()
}
