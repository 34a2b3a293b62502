//! Subcommand implementations. Each returns the process exit code.

use crate::output;
use crate::scenario_file::{self, ScenarioFile};
use coordfeas::analytic;
use coordfeas::feasibility::{self, Options, SelectionPolicy, Status};
use coordfeas::sim::{self, FailureKind, Mode, RunStatus, Scenario};
use log::info;
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_NO_DIRECTION: i32 = 3;
pub const EXIT_RUN_FAILED: i32 = 4;
pub const EXIT_BENCH_MISMATCH: i32 = 5;

pub const DEFAULT_BENCH_SEED: u64 = 20_190_101;
pub const BENCH_SAMPLES: usize = 100;

fn load(path: &Path) -> Result<(ScenarioFile, Scenario, Vec<u8>), String> {
    let (file, bytes) = scenario_file::load(path)?;
    let scenario = file.to_scenario().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((file, scenario, bytes))
}

/// Paths in a scenario file are relative to the file itself.
fn resolve(scenario_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        scenario_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn status_code(status: Status) -> i32 {
    match status {
        Status::Feasible => EXIT_OK,
        Status::EqualityInconsistent => EXIT_INCONSISTENT,
        Status::NoFeasibleDirection => EXIT_NO_DIRECTION,
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum CheckOutput {
    Graph(feasibility::FeasibilityReport),
    Tree(feasibility::LeaderFollowerReport),
}

pub fn check(path: &Path, at: f64, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let (_, s, _) = match load(path) {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let violations = sim::validate(&s);
    if !violations.is_empty() {
        for v in &violations {
            let _ = writeln!(stderr, "error: {v}");
        }
        return EXIT_INPUT;
    }
    let opts = Options {
        eps_act: s.settings.eps_act,
        margin: s.settings.margin,
        bound: s.settings.bound,
        policy: SelectionPolicy {
            cruise: s.settings.cruise.clone(),
        },
        ..Options::default()
    };
    let result = s.initial_state().and_then(|p| match &s.mode {
        Mode::Graph => feasibility::check(&s.kinds, &s.constraints, &p, at, &opts).map(CheckOutput::Graph),
        Mode::Tree(tree) => {
            feasibility::check_leader_follower(tree, &s.kinds, &s.constraints, &p, at, &opts).map(CheckOutput::Tree)
        }
    });
    let (out, status) = match result {
        Ok(CheckOutput::Graph(r)) => {
            let st = r.status;
            (CheckOutput::Graph(r), st)
        }
        Ok(CheckOutput::Tree(r)) => {
            let st = r.status();
            (CheckOutput::Tree(r), st)
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let text = serde_json::to_string_pretty(&out).expect("reports serialize");
    if writeln!(stdout, "{text}").is_err() {
        return EXIT_INPUT;
    }
    info!("check status: {status:?}");
    status_code(status)
}

pub struct RunArgs<'a> {
    pub path: &'a Path,
    pub csv: Option<&'a Path>,
    pub report: Option<&'a Path>,
}

fn run_failure_code(status: &RunStatus) -> i32 {
    match status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::Failed {
            kind: FailureKind::EqualityInconsistent,
            ..
        } => EXIT_INCONSISTENT,
        RunStatus::Failed { .. } => EXIT_RUN_FAILED,
    }
}

pub fn run(args: RunArgs<'_>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let (file, s, bytes) = match load(args.path) {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let started = Instant::now();
    let log = match sim::run(&s) {
        Ok(log) => log,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let wall = started.elapsed().as_secs_f64();

    let csv_path = args
        .csv
        .map(Path::to_path_buf)
        .or_else(|| file.outputs.csv.as_deref().map(|p| resolve(args.path, p)));
    let report_path = args
        .report
        .map(Path::to_path_buf)
        .or_else(|| file.outputs.report.as_deref().map(|p| resolve(args.path, p)));

    let written = match &csv_path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            output::write_csv(&mut w, &s, &log)?;
            w.flush()
        }),
        None => output::write_csv(stdout, &s, &log),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: writing CSV: {e}");
        return EXIT_INPUT;
    }

    let report = output::run_report(&s, &log, &bytes, wall);
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    let written = match (&report_path, &csv_path) {
        (Some(p), _) => std::fs::write(p, format!("{text}\n")),
        (None, Some(_)) => writeln!(stdout, "{text}"),
        (None, None) => writeln!(stderr, "{text}"),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: writing report: {e}");
        return EXIT_INPUT;
    }
    if let RunStatus::Failed { time, message, .. } = &log.status {
        let _ = writeln!(stderr, "error: run stopped at t = {time}: {message}");
    }
    run_failure_code(&log.status)
}

pub fn bench(seed: u64, corrupt: bool, stdout: &mut dyn Write) -> i32 {
    let rows = analytic::bench(seed, BENCH_SAMPLES, corrupt);
    let mut text = format!(
        "{:<34} {:>7} {:>5} {:>8} {:>12} {:>12}\n",
        "case", "samples", "kappa", "failures", "max_resid", "max_rate"
    );
    for r in &rows {
        text += &format!(
            "{:<34} {:>7} {:>5} {:>8} {:>12.3e} {:>12.3e}\n",
            r.case.to_string(),
            r.samples,
            r.kappa,
            r.failures,
            r.max_residual,
            r.max_distance_rate
        );
    }
    let failed = rows.iter().any(|r| r.failures > 0);
    text += if failed { "result: mismatch\n" } else { "result: pass\n" };
    if stdout.write_all(text.as_bytes()).is_err() {
        return EXIT_INPUT;
    }
    if failed {
        EXIT_BENCH_MISMATCH
    } else {
        EXIT_OK
    }
}

/// Run `f` against buffered standard output and standard error.
pub fn with_stdio(f: impl FnOnce(&mut dyn Write, &mut dyn Write) -> i32) -> i32 {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let code = f(&mut out, &mut io::stderr());
    if out.flush().is_err() {
        return EXIT_INPUT;
    }
    code
}
