//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints one `[PASS]` or `[FAIL]` line.

use coordfeas::analytic::{self, AnalyticCase};
use coordfeas::feasibility::{self, Options};
use coordfeas::matlite;
use coordfeas::sim::{self, RunStatus, Scenario, TrajectoryLog};
use coordfeas::vehicles::{self, CompositeState};
use coordfeas::{EdgeConstraint, VehicleKind};
use coordfeas_cli::commands::{self, RunArgs};
use coordfeas_cli::scenario_file;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    let (file, _) = scenario_file::load(&scenario_path(name)).unwrap();
    file.to_scenario().unwrap()
}

fn report(n: u32, ok: bool, detail: String) -> bool {
    println!("[{}] criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn random_state(kind: VehicleKind, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut s = vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-PI..PI)];
    if kind.state_dim() == 4 {
        s.push(rng.random_range(-1.5..1.5));
    }
    s
}

fn criterion_1_annihilation() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for kind in [
        VehicleKind::Unicycle,
        VehicleKind::ConstantSpeed { v: 1.7 },
        VehicleKind::CarLike { l: 0.5 },
    ] {
        for _ in 0..1000 {
            let s = random_state(kind, &mut rng);
            let f = vehicles::fields(kind, &s).unwrap();
            let block = vehicles::kinematic_block(kind, &s);
            for c in &f.controls {
                worst = worst.max(matlite::norm_inf(&block.omega.mul_vec(c)));
            }
            let drift: Vec<f64> = block.omega.mul_vec(&f.drift).iter().zip(&block.t).map(|(a, b)| a - b).collect();
            worst = worst.max(matlite::norm_inf(&drift));
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max annihilation residual {worst:.3e}, {elapsed:.2?}"),
    )
}

/// Pair state with vehicles 0.5 to 5 apart and heading difference away
/// from ±π, where the wrapped difference jumps.
fn pair_state(rng: &mut ChaCha8Rng) -> (Vec<VehicleKind>, CompositeState) {
    let kinds = vec![VehicleKind::CarLike { l: 0.7 }, VehicleKind::Unicycle];
    loop {
        let s0 = random_state(kinds[0], rng);
        let d = rng.random_range(0.5..5.0);
        let bearing: f64 = rng.random_range(-PI..PI);
        let th = rng.random_range(-PI..PI);
        let s1 = vec![s0[0] - d * bearing.cos(), s0[1] - d * bearing.sin(), th];
        let diff = (s0[2] - th).rem_euclid(2.0 * PI);
        if (diff - PI).abs() > 0.1 {
            return (kinds.clone(), CompositeState::new(&kinds, &[s0, s1]).unwrap());
        }
    }
}

fn criterion_2_gradients() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let variants = [
        EdgeConstraint::DistanceEq { i: 0, j: 1, d: 1.0 },
        EdgeConstraint::DistanceBand {
            i: 0,
            j: 1,
            d_minus: 1.0,
            d_plus: 2.0,
        },
        EdgeConstraint::HeadingEq { i: 0, j: 1, delta: 0.3 },
        EdgeConstraint::HeadingBand {
            i: 0,
            j: 1,
            delta_minus: -0.4,
            delta_plus: 0.4,
        },
        EdgeConstraint::Visibility {
            i: 0,
            j: 1,
            delta_theta: 0.4,
        },
    ];
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for c in &variants {
        for _ in 0..500 {
            let (kinds, p) = pair_state(&mut rng);
            let grads = c.gradients(&kinds, &p).unwrap();
            for (k, (_, g)) in grads.iter().enumerate() {
                let fd: Vec<f64> = (0..p.dim())
                    .map(|m| {
                        let mut up = p.p.clone();
                        let mut down = p.p.clone();
                        up[m] += h;
                        down[m] -= h;
                        let gu = c.residuals(&p.with_vector(up), 0.0).unwrap()[k].1;
                        let gd = c.residuals(&p.with_vector(down), 0.0).unwrap()[k].1;
                        (gu - gd) / (2.0 * h)
                    })
                    .collect();
                let err: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                worst = worst.max(matlite::norm_inf(&err) / matlite::norm_inf(g));
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        worst <= 1e-5 && elapsed < Duration::from_secs(5),
        format!("max relative gradient error {worst:.3e} over 5 variants x 500 states, {elapsed:.2?}"),
    )
}

fn criterion_3_span_equivalence() -> bool {
    let start = Instant::now();
    let rows = analytic::bench(commands::DEFAULT_BENCH_SEED, 100, false);
    let elapsed = start.elapsed();
    let kappas: Vec<usize> = rows.iter().map(|r| r.kappa).collect();
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    let resid = rows.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    report(
        3,
        failures == 0 && kappas == [3, 2, 3] && resid <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("kappa {kappas:?}, {failures} failures, max residual {resid:.3e}, {elapsed:.2?}"),
    )
}

fn run_timed(s: &Scenario) -> (TrajectoryLog, Duration) {
    let start = Instant::now();
    let log = sim::run(s).unwrap();
    (log, start.elapsed())
}

fn pair_geometry(s: &Scenario, state: &[f64], i: usize, j: usize) -> ([f64; 2], f64) {
    let off = vehicles::offsets_for(&s.kinds);
    let (pi, pj) = (&state[off[i]..], &state[off[j]..]);
    ([pi[0] - pj[0], pi[1] - pj[1]], pj[2])
}

fn criterion_4_three_unicycles() -> bool {
    let s = load("three_unicycles.json");
    let (log, elapsed) = run_timed(&s);
    let (mut dmin, mut dmax, mut gmax, mut uerr) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0_f64);
    for r in &log.records {
        for j in [1, 2] {
            let (a, _) = pair_geometry(&s, &r.state, 0, j);
            let d = a[0].hypot(a[1]);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        // visibility constraints are declared second and third
        gmax = gmax.max(r.values[1][0].1).max(r.values[2][0].1);
        let u = &r.controls[0];
        uerr = uerr
            .max((u[0] - 2.0 * r.t.sin()).abs())
            .max((u[1] - 2.0 * (2.0 * r.t).cos()).abs());
    }
    let completed = log.status == RunStatus::Completed && (log.records.last().unwrap().t - 20.0).abs() < 1e-12;
    let ok = completed
        && dmin >= 1.0 - 1e-3
        && dmax <= 2.0 + 1e-3
        && gmax <= 1e-3
        && uerr <= 1e-9
        && log.activations() >= 1
        && elapsed < Duration::from_secs(60);
    report(
        4,
        ok,
        format!(
            "status {:?}, distance [{dmin:.6}, {dmax:.6}], max visibility g {gmax:.3e}, leader control error {uerr:.3e}, {} activations, {elapsed:.2?}",
            log.status,
            log.activations()
        ),
    )
}

fn criterion_5_car_and_unicycle() -> bool {
    let s = load("car_unicycle.json");
    let (log, elapsed) = run_timed(&s);
    let (mut dmin, mut dmax, mut cmin) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for r in &log.records {
        let (a, th) = pair_geometry(&s, &r.state, 0, 1);
        let d = a[0].hypot(a[1]);
        dmin = dmin.min(d);
        dmax = dmax.max(d);
        cmin = cmin.min((a[0] * th.cos() + a[1] * th.sin()) / d);
    }
    let completed = log.status == RunStatus::Completed && (log.records.last().unwrap().t - 20.0).abs() < 1e-12;
    let ok = completed
        && dmin >= 1.0 - 1e-3
        && dmax <= 1.1 + 1e-3
        && cmin >= 0.998 - 1e-3
        && log.events.len() > 10
        && elapsed < Duration::from_secs(60);
    report(
        5,
        ok,
        format!(
            "status {:?}, distance [{dmin:.6}, {dmax:.6}], min cosine ratio {cmin:.6}, {} events, {elapsed:.2?}",
            log.status,
            log.events.len()
        ),
    )
}

fn criterion_6_infeasibility_detection() -> bool {
    let path = scenario_path("pinned_constant_speed.json");
    let start = Instant::now();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = commands::check(&path, 0.0, &mut out, &mut err);
    let elapsed = start.elapsed();
    let json: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let status = json["status"].as_str().unwrap_or_default().to_string();
    report(
        6,
        code == 2 && status == "equality_inconsistent" && elapsed < Duration::from_millis(100),
        format!("exit {code}, status {status}, {elapsed:.2?}"),
    )
}

fn criterion_7_distance_invariance() -> bool {
    let case = AnalyticCase::TwoUnicycles;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = analytic::sample_state(case, &mut rng);
        let c = case.constraint_at(&p);
        let kinds = case.kinds();
        let grad = c.gradients(&kinds, &p).unwrap().remove(0).1;
        let family = feasibility::check(&kinds, std::slice::from_ref(&c), &p, 0.0, &Options::default())
            .unwrap()
            .family
            .unwrap();
        let closed = analytic::basis_at(case, &p).unwrap();
        for _ in 0..100 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let engine = family.velocity(&w);
            let mut printed = vec![0.0; 6];
            for (k, wl) in closed.basis.iter().zip(&w) {
                printed = matlite::axpy(&printed, *wl, k);
            }
            worst = worst
                .max(matlite::dot(&grad, &engine).abs())
                .max(matlite::dot(&grad, &printed).abs());
        }
    }
    report(
        7,
        worst <= 1e-10,
        format!("max |d/dt of squared-distance residual| {worst:.3e} over 100 states x 100 weights"),
    )
}

fn criterion_8_determinism() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_path("three_unicycles.json");
    let mut csvs = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("run{k}.csv"));
        let rep = dir.path().join(format!("run{k}.json"));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = commands::run(
            RunArgs {
                path: &path,
                csv: Some(&csv),
                report: Some(&rep),
            },
            &mut out,
            &mut err,
        );
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        csvs.push(std::fs::read(&csv).unwrap());
    }
    let rows = csvs[0].iter().filter(|b| **b == b'\n').count();
    report(
        8,
        csvs[0] == csvs[1] && rows > 20_000,
        format!("two runs, {} bytes and {rows} lines each, identical: {}", csvs[0].len(), csvs[0] == csvs[1]),
    )
}

fn main() {
    let criteria: [(u32, fn() -> bool); 8] = [
        (1, criterion_1_annihilation),
        (2, criterion_2_gradients),
        (3, criterion_3_span_equivalence),
        (4, criterion_4_three_unicycles),
        (5, criterion_5_car_and_unicycle),
        (6, criterion_6_infeasibility_detection),
        (7, criterion_7_distance_invariance),
        (8, criterion_8_determinism),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(true) => {}
            Ok(false) => failed += 1,
            Err(_) => {
                println!("[FAIL] criterion {n}: aborted");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
