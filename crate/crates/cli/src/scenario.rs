//! Scenario orchestration and all file output.

use crate::config::{RunConfig, ScenarioKind, SweepAxis};
use cns1d::diagnostics::fmt_num;
use cns1d::{
    audit_trajectory, builtin_case, convergence_study, j_lower_bound_reference, reference_norms,
    run, to_euler, validate_hypotheses, AuditReport, AxisReport, Data, Error, Errors, Failure,
    Grid, Hypotheses, Orders, Output, Record, State,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Success = 0,
    AuditFailed = 1,
    Aborted = 2,
    ConfigError = 3,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("initial data: {0}")]
    Data(#[from] Error),
    #[error("{path}: {message}")]
    Field { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunnerError {
    pub fn status(&self) -> ExitStatus {
        match self {
            Self::Io { .. } => ExitStatus::Aborted,
            _ => ExitStatus::ConfigError,
        }
    }
}

type Result<T> = std::result::Result<T, RunnerError>;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads one number per line; blank lines and `#` comments are skipped.
pub fn read_field(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| RunnerError::Field {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let s = line.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let x = s
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| RunnerError::Field {
                path: path.to_path_buf(),
                message: format!("line {}: expected a finite number, got `{s}`", k + 1),
            })?;
        out.push(x);
    }
    Ok(out)
}

/// Initial data of a RUN, VALIDATE or SWEEP configuration.
pub fn build_data(cfg: &RunConfig) -> Result<Data> {
    let fam = cfg
        .family
        .as_ref()
        .expect("family is required for this scenario kind");
    // a raw pi0 replaces the isentropic pressure, so s0 only seeds it
    let s0 = fam.s0.unwrap_or(0.0);
    let mut d = Data::power_law(cfg.grid(), cfg.gas, fam.k_rho, fam.ell_rho, s0, fam.bump)?;
    if let Some(p) = &cfg.raw.v0 {
        d = d.with_velocity(read_field(p)?.into())?;
    }
    if let Some(p) = &cfg.raw.pi0 {
        d = d.with_pressure(read_field(p)?.into())?;
    }
    Ok(d)
}

pub fn render_hypotheses(rep: &Hypotheses) -> String {
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let mut out = format!("delta = {}\n", fmt_num(rep.delta));
    out.push_str(&format!(
        "H1 {}  rho0 in [{}, {}]  pi0_min = {}  J0 in [{}, {}]\n",
        verdict(rep.h1_ok),
        fmt_num(rep.rho0_min),
        fmt_num(rep.rho0_max),
        fmt_num(rep.pi0_min),
        fmt_num(rep.j0_min),
        fmt_num(rep.j0_max)
    ));
    out.push_str(&format!(
        "H2 {}  ||sqrt(rho0) v0||_2 = {}  ||v0'||_2 = {}  ||pi0||_2 = {}  ||pi0'/sqrt(rho0)||_2 = {}\n",
        verdict(rep.h2_ok),
        fmt_num(rep.sqrt_rho_v0_l2),
        fmt_num(rep.dv0_l2),
        fmt_num(rep.pi0_l2),
        fmt_num(rep.dpi0_weighted_l2)
    ));
    out.push_str(&format!(
        "H3 {}  K0 = {}  K0_discrete = {}  ||rho0^(-delta/2) G0||_2 = {}\n",
        verdict(rep.h3_ok),
        fmt_num(rep.k0()),
        fmt_num(rep.k0_discrete),
        fmt_num(rep.g0_weighted_l2)
    ));
    out.push_str(&format!(
        "H4 {}  ||rho0||_1 = {}  ||pi0||_1 = {}  A0_discrete = {}\n",
        verdict(rep.h4_ok),
        fmt_num(rep.rho0_l1),
        fmt_num(rep.pi0_l1),
        fmt_num(rep.a0_discrete)
    ));
    if let Some(a) = &rep.analytic {
        out.push_str(&format!(
            "whole line: K0 = {}  A0 = {}  ||rho0||_1 = {}\n",
            fmt_num(a.k0),
            fmt_num(a.a0),
            fmt_num(a.rho0_l1)
        ));
        out.push_str(&format!(
            "margins: pi0_l2 = {}  g0_weighted = {}  rho0_l1 = {}  pi0_l1 = {}\n",
            fmt_num(a.pi0_l2_margin),
            fmt_num(a.g0_weighted_margin),
            fmt_num(a.rho0_l1_margin),
            fmt_num(a.pi0_l1_margin)
        ));
    }
    if let Some(t) = rep.tags() {
        out.push_str(&format!(
            "tags: LOCAL_delta1 = {}  LOCAL_delta_gamma = {}  GLOBAL_delta1 = {}  GLOBAL_delta_gamma = {}\n",
            t.local_delta1, t.local_delta_gamma, t.global_delta1, t.global_delta_gamma
        ));
    }
    out.push_str(&format!("overall {}\n", verdict(rep.all_ok())));
    out
}

fn timeseries_csv(series: &[Record]) -> String {
    let mut out = Record::csv_header();
    out.push('\n');
    for r in series {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// One row per node: `y, v`, then the cell to its right, `y_cell, J, pi`
/// (empty on the last node).
fn final_state_csv(s: &State, g: &Grid) -> String {
    let mut out = format!(
        "# t={} cells={} anchor={}\ny,v,y_cell,J,pi\n",
        fmt_num(s.t),
        g.cells(),
        fmt_num(s.anchor)
    );
    for i in 0..g.nodes() {
        out.push_str(&format!("{},{}", fmt_num(g.node(i)), fmt_num(s.v[i])));
        if i < g.cells() {
            out.push_str(&format!(
                ",{},{},{}\n",
                fmt_num(g.cell(i)),
                fmt_num(s.j[i]),
                fmt_num(s.pi[i])
            ));
        } else {
            out.push_str(",,,\n");
        }
    }
    out
}

/// Summary of one completed or aborted run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: ExitStatus,
    pub grid: Grid,
    pub state: State,
    pub steps: usize,
    pub energy_drift: f64,
    pub min_j: f64,
    pub momentum_drift: f64,
    pub audit: AuditReport,
    pub error: Option<String>,
}

/// Runs one configuration and writes the RUN artifacts into `dir`.
pub fn execute_run(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    create_dir(dir)?;
    let d = build_data(cfg)?;
    let hyp = validate_hypotheses(&d, cfg.delta);
    let (e0, rho_l1) = reference_norms(&d);
    let c0 = j_lower_bound_reference(&d);
    let c0_text = match &c0 {
        Ok(c) => fmt_num(*c),
        Err(e) => format!("undefined ({e})"),
    };
    let meta = format!(
        "# configuration\n{}\n# reference constants\nc0 = {c0_text}\nE0 = {}\nrho0_l1 = {}\n\n# hypotheses\n{}",
        cfg.echo(),
        fmt_num(e0),
        fmt_num(rho_l1),
        render_hypotheses(&hyp)
    );
    write(&dir.join("run_meta.txt"), &meta)?;

    let opts = cns1d::Options::new(cfg.t_final, cfg.sample_every, cfg.delta);
    log::info!(
        "running to T = {} with dt = {} on {} cells",
        cfg.t_final,
        cfg.stepper.dt,
        cfg.cells
    );
    let (out, error): (Output, Option<Error>) = match run(&d, &cfg.stepper, &opts) {
        Ok(o) => (o, None),
        Err(Failure { error, partial }) => {
            log::error!("run aborted: {error}");
            (partial, Some(error))
        }
    };
    write(&dir.join("timeseries.csv"), &timeseries_csv(&out.series))?;
    write(
        &dir.join("final_state.csv"),
        &final_state_csv(&out.state, &d.grid),
    )?;
    write(
        &dir.join("euler_final.csv"),
        &to_euler(&out.state, &d).to_csv(),
    )?;

    let audit = audit_trajectory(&out.series, &d, &cfg.audit);
    let mut audit_text = format!("c0 = {c0_text}\nsteps = {}\n", out.steps);
    if let Some(e) = &error {
        audit_text.push_str(&format!("aborted: {e}\n"));
    }
    audit_text.push_str(&audit.render());
    write(&dir.join("audit.txt"), &audit_text)?;

    let status = if error.is_some() {
        ExitStatus::Aborted
    } else if audit.all_passed() {
        ExitStatus::Success
    } else {
        ExitStatus::AuditFailed
    };
    let first = out.series.first().expect("series starts with t = 0");
    let last = out.series.last().expect("series is non-empty");
    Ok(RunSummary {
        status,
        grid: d.grid,
        steps: out.steps,
        energy_drift: ((last.energy - first.energy) / first.energy).abs(),
        min_j: last.min_j_hist,
        momentum_drift: (last.momentum - first.momentum).abs(),
        state: out.state,
        audit,
        error: error.map(|e| e.to_string()),
    })
}

/// Writes the hypothesis report; fails when any hypothesis fails.
pub fn execute_validate(cfg: &RunConfig, dir: &Path) -> Result<ExitStatus> {
    create_dir(dir)?;
    let d = build_data(cfg)?;
    let rep = validate_hypotheses(&d, cfg.delta);
    let text = render_hypotheses(&rep);
    print!("{text}");
    write(&dir.join("hypotheses.txt"), &text)?;
    Ok(if rep.all_ok() {
        ExitStatus::Success
    } else {
        ExitStatus::AuditFailed
    })
}

fn point_config(cfg: &RunConfig, axis: SweepAxis, value: f64) -> RunConfig {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Epsilon => {
            c.stepper.epsilon = value;
            c.audit.epsilon = value;
        }
        SweepAxis::Dt => {
            c.stepper.dt_min = cfg.stepper.dt_min * value / cfg.stepper.dt;
            c.stepper.dt = value;
        }
        SweepAxis::Cells => c.cells = value as usize,
        SweepAxis::HalfWidth => c.half_width = value,
    }
    c
}

/// Linear interpolation of node values `v` on `g` at `y`.
fn interpolate(v: &[f64], g: &Grid, y: f64) -> f64 {
    let s = (y + g.half_width()) / g.h();
    let k = (s.floor().max(0.0) as usize).min(g.cells() - 1);
    let w = s - k as f64;
    (1.0 - w) * v[k] + w * v[k + 1]
}

/// `sup |v_a - v_b|` over the nodes of `a` with `|y| <= window`.
pub fn velocity_delta(a: &State, ga: &Grid, b: &State, gb: &Grid, window: f64) -> f64 {
    (0..ga.nodes())
        .filter(|&i| ga.node(i).abs() <= window)
        .map(|i| (a.v[i] - interpolate(&b.v, gb, ga.node(i))).abs())
        .fold(0.0, f64::max)
}

/// Worker count: the configured cap, further capped by `CNS_WORKERS`.
pub fn worker_cap(configured: usize, points: usize) -> usize {
    let env = std::env::var("CNS_WORKERS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let cap = env.map_or(configured, |n| n.min(configured));
    cap.clamp(1, points.max(1))
}

pub fn execute_sweep(cfg: &RunConfig, dir: &Path) -> Result<ExitStatus> {
    let sweep = cfg.sweep.as_ref().expect("sweep section parsed");
    create_dir(dir)?;
    let points: Vec<(PathBuf, RunConfig)> = sweep
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let name = format!("point_{k:02}_{}_{v}", sweep.axis.name());
            (dir.join(name), point_config(cfg, sweep.axis, v))
        })
        .collect();
    let workers = worker_cap(sweep.workers, points.len());
    log::info!(
        "sweeping {} over {} points with {workers} workers",
        sweep.axis.name(),
        points.len()
    );

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunSummary>>>> =
        Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|sc| {
        for _ in 0..workers {
            sc.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((path, pc)) = points.get(k) else {
                    break;
                };
                let r = execute_run(pc, path);
                results.lock().expect("no worker panicked")[k] = Some(r);
            });
        }
    });
    let results: Vec<RunSummary> = results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect::<Result<_>>()?;

    let window = points
        .iter()
        .map(|(_, c)| c.half_width)
        .fold(f64::INFINITY, f64::min)
        / 2.0;
    let mut csv = String::from(
        "point,axis,value,status,steps,energy_drift,min_J,momentum_drift,audit,dv_prev\n",
    );
    let mut worst = ExitStatus::Success;
    for (k, r) in results.iter().enumerate() {
        worst = worst.max(r.status);
        let dv = match k {
            0 => String::new(),
            _ if r.error.is_some() || results[k - 1].error.is_some() => String::new(),
            _ => fmt_num(velocity_delta(
                &r.state,
                &r.grid,
                &results[k - 1].state,
                &results[k - 1].grid,
                window,
            )),
        };
        csv.push_str(&format!(
            "{k},{},{},{},{},{},{},{},{},{dv}\n",
            sweep.axis.name(),
            fmt_num(sweep.values[k]),
            r.status.code(),
            r.steps,
            fmt_num(r.energy_drift),
            fmt_num(r.min_j),
            fmt_num(r.momentum_drift),
            if r.audit.all_passed() { "PASS" } else { "FAIL" },
        ));
    }
    write(&dir.join("summary.csv"), &csv)?;
    Ok(worst)
}

fn render_orders(rep: &Orders) -> String {
    let mut out = format!("case = {:?}\n", rep.case);
    let axis = |name: &str, a: &AxisReport<f64>, lo: f64, hi: f64| {
        let n = a.levels.len();
        let field = |f: fn(&Errors) -> f64| {
            let (e0, e1) = (f(&a.levels[n - 2]), f(&a.levels[n - 1]));
            let (s0, s1) = if name == "space" {
                (a.levels[n - 2].h, a.levels[n - 1].h)
            } else {
                (a.levels[n - 2].dt, a.levels[n - 1].dt)
            };
            (e0 / e1).ln() / (s0 / s1).ln()
        };
        format!(
            "{name}: finest order = {:.4}  slope = {:.4}  J = {:.4}  v = {:.4}  pi = {:.4}  monotone = {}  at_floor = {}  window [{lo}, {hi}] {}\n",
            a.finest_order(),
            a.slope,
            field(|e| e.j_l2),
            field(|e| e.v_l2),
            field(|e| e.pi_l2),
            a.monotone,
            a.at_floor,
            if a.meets(lo, hi) { "PASS" } else { "FAIL" }
        )
    };
    out.push_str(&axis("space", &rep.spatial, 1.8, 2.2));
    out.push_str(&axis("time", &rep.temporal, 0.8, 1.2));
    out
}

pub fn execute_mms(cfg: &RunConfig, dir: &Path) -> Result<ExitStatus> {
    let m = cfg.mms.as_ref().expect("mms section parsed");
    create_dir(dir)?;
    let case = builtin_case(m.case, cfg.gas);
    match convergence_study(&case, &m.plan, &cfg.stepper) {
        Ok(rep) => {
            write(&dir.join("orders.csv"), &rep.to_csv())?;
            let text = render_orders(&rep);
            print!("{text}");
            write(&dir.join("orders.txt"), &text)?;
            let ok = rep.spatial.meets(1.8, 2.2) && rep.temporal.meets(0.8, 1.2);
            Ok(if ok {
                ExitStatus::Success
            } else {
                ExitStatus::AuditFailed
            })
        }
        Err(e) => {
            log::error!("convergence study aborted: {e}");
            write(&dir.join("orders.txt"), &format!("aborted: {e}\n"))?;
            Ok(ExitStatus::Aborted)
        }
    }
}

/// Runs the scenario into `cfg.out_dir`.
pub fn run_scenario(cfg: &RunConfig) -> Result<ExitStatus> {
    let dir = &cfg.out_dir;
    match cfg.kind {
        ScenarioKind::Run => {
            let s = execute_run(cfg, dir)?;
            print!("{}", s.audit.render());
            Ok(s.status)
        }
        ScenarioKind::Validate => execute_validate(cfg, dir),
        ScenarioKind::Sweep => execute_sweep(cfg, dir),
        ScenarioKind::Mms => execute_mms(cfg, dir),
    }
}
