//! Flat `key = value` configuration with `[section]` headers.
//!
//! Every key is `section.key`; keys outside the table below are rejected with
//! their line number. `#` starts a comment.

use cns1d::{AuditTolerances, BcMode, Bump, CaseId, Config, Gas, Grid, StudyPlan};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Accepted keys, by section.
pub const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("scenario", &["kind"]),
    ("grid", &["L", "N"]),
    ("gas", &["gamma", "mu", "R", "A"]),
    (
        "family",
        &[
            "K_rho",
            "ell_rho",
            "s0",
            "bump_amplitude",
            "bump_center",
            "bump_width",
        ],
    ),
    ("raw", &["v0", "pi0"]),
    (
        "stepper",
        &[
            "dt",
            "epsilon",
            "picard_tol",
            "picard_max",
            "dt_shrink",
            "dt_min",
            "bc_mode",
        ],
    ),
    ("run", &["T", "sample_every", "delta"]),
    (
        "audit",
        &[
            "energy_rel_tol",
            "momentum_factor",
            "j_allowance",
            "mass_rel_tol",
        ],
    ),
    ("sweep", &["axis", "values", "workers"]),
    (
        "mms",
        &[
            "case",
            "L",
            "T",
            "spatial_N",
            "spatial_dt",
            "temporal_dt",
            "temporal_N",
        ],
    ),
    ("output", &["dir"]),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Run,
    Validate,
    Sweep,
    Mms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Epsilon,
    Dt,
    Cells,
    HalfWidth,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Epsilon => "epsilon",
            Self::Dt => "dt",
            Self::Cells => "N",
            Self::HalfWidth => "L",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyConfig {
    pub k_rho: f64,
    pub ell_rho: f64,
    pub s0: Option<f64>,
    pub bump: Option<Bump<f64>>,
}

/// Raw initial fields, one value per line, overriding the family.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawFields {
    /// `N + 1` node values.
    pub v0: Option<PathBuf>,
    /// `N` cell values.
    pub pi0: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsConfig {
    pub case: CaseId,
    pub plan: StudyPlan<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ScenarioKind,
    pub half_width: f64,
    pub cells: usize,
    pub gas: Gas,
    pub family: Option<FamilyConfig>,
    pub raw: RawFields,
    pub stepper: Config,
    pub t_final: f64,
    pub sample_every: usize,
    pub delta: f64,
    pub audit: AuditTolerances<f64>,
    pub sweep: Option<SweepConfig>,
    pub mms: Option<MmsConfig>,
    pub out_dir: PathBuf,
    /// Directory that relative raw-field paths are resolved against.
    pub base_dir: PathBuf,
}

struct Entry {
    value: String,
    line: usize,
}

struct Table {
    entries: BTreeMap<String, Entry>,
}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Table, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(Some(line), content, "malformed section header"))?
                .trim();
            if !KNOWN_KEYS.iter().any(|(s, _)| *s == name) {
                return Err(err(Some(line), name, "unknown section"));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(Some(line), content, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| err(Some(line), key, "key appears before any [section]"))?;
        let full = format!("{sec}.{key}");
        let known = KNOWN_KEYS
            .iter()
            .any(|(s, keys)| *s == sec && keys.contains(&key));
        if !known {
            return Err(err(Some(line), &full, "unknown key"));
        }
        if value.is_empty() {
            return Err(err(Some(line), &full, "missing value"));
        }
        if let Some(prev) = entries.get(&full) {
            let prev: &Entry = prev;
            return Err(err(
                Some(line),
                &full,
                format!("duplicate key, first set on line {}", prev.line),
            ));
        }
        entries.insert(
            full,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(Table { entries })
}

impl Table {
    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn has_section(&self, sec: &str) -> bool {
        let prefix = format!("{sec}.");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| {
                    err(
                        Some(e.line),
                        key,
                        format!("expected a finite number, got `{}`", e.value),
                    )
                }),
        }
    }

    fn req_num(&self, key: &str) -> Result<f64, ConfigError> {
        self.num(key)?
            .ok_or_else(|| err(None, key, "missing required key"))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<usize>().map(Some).map_err(|_| {
                err(
                    Some(e.line),
                    key,
                    format!("expected a non-negative integer, got `{}`", e.value),
                )
            }),
        }
    }

    fn list<V: std::str::FromStr>(
        &self,
        key: &str,
        what: &str,
    ) -> Result<Option<Vec<V>>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| s.trim().parse::<V>())
            .collect::<Result<Vec<V>, _>>()
            .map(Some)
            .map_err(|_| {
                err(
                    Some(e.line),
                    key,
                    format!(
                        "expected a comma-separated list of {what}, got `{}`",
                        e.value
                    ),
                )
            })
    }

    /// Fails with the key's line when `ok` is false.
    fn ensure(&self, ok: bool, key: &str, message: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(err(self.line(key), key, message))
        }
    }
}

/// Parses and validates a configuration. Relative raw-field paths resolve
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let t = tokenize(text)?;

    let kind = match t.str("scenario.kind") {
        None => return Err(err(None, "scenario.kind", "missing required key")),
        Some(k) => match k.to_ascii_lowercase().as_str() {
            "run" => ScenarioKind::Run,
            "validate" => ScenarioKind::Validate,
            "sweep" => ScenarioKind::Sweep,
            "mms" => ScenarioKind::Mms,
            _ => {
                return Err(err(
                    t.line("scenario.kind"),
                    "scenario.kind",
                    format!("expected run, validate, sweep or mms, got `{k}`"),
                ))
            }
        },
    };
    let needs_data = kind != ScenarioKind::Mms;
    let needs_stepping = matches!(kind, ScenarioKind::Run | ScenarioKind::Sweep);

    let gamma = t.req_num("gas.gamma")?;
    t.ensure(gamma > 1.0, "gas.gamma", "γ must exceed 1")?;
    let mu = t.req_num("gas.mu")?;
    t.ensure(mu > 0.0, "gas.mu", "μ must be positive")?;
    let r = t.num("gas.R")?.unwrap_or(1.0);
    t.ensure(r > 0.0, "gas.R", "R must be positive")?;
    let a = t.num("gas.A")?.unwrap_or(1.0);
    t.ensure(a > 0.0, "gas.A", "A must be positive")?;
    let gas = Gas::new(gamma, mu, r, a).map_err(|e| err(None, "gas", e.to_string()))?;

    let (half_width, cells) = if needs_data {
        let l = t.req_num("grid.L")?;
        t.ensure(l > 0.0, "grid.L", "L must be positive")?;
        let n = t
            .count("grid.N")?
            .ok_or_else(|| err(None, "grid.N", "missing required key"))?;
        t.ensure(n >= 4, "grid.N", "N must be at least 4")?;
        (l, n)
    } else {
        (
            t.num("grid.L")?.unwrap_or(1.0),
            t.count("grid.N")?.unwrap_or(4),
        )
    };

    let raw = RawFields {
        v0: t.str("raw.v0").map(|p| base_dir.join(p)),
        pi0: t.str("raw.pi0").map(|p| base_dir.join(p)),
    };

    let family = if needs_data {
        let k_rho = t.req_num("family.K_rho")?;
        t.ensure(k_rho > 0.0, "family.K_rho", "K_ρ must be positive")?;
        let ell_rho = t.req_num("family.ell_rho")?;
        t.ensure(ell_rho >= 0.0, "family.ell_rho", "ℓ_ρ must be non-negative")?;
        let s0 = t.num("family.s0")?;
        if s0.is_none() && raw.pi0.is_none() {
            return Err(err(
                None,
                "family.s0",
                "missing required key (or give raw.pi0)",
            ));
        }
        let bump = parse_bump(&t, half_width)?;
        Some(FamilyConfig {
            k_rho,
            ell_rho,
            s0,
            bump,
        })
    } else {
        None
    };

    let dt = if needs_stepping {
        t.req_num("stepper.dt")?
    } else {
        t.num("stepper.dt")?.unwrap_or(1e-3)
    };
    t.ensure(dt > 0.0, "stepper.dt", "dt must be positive")?;
    let mut stepper = Config::new(dt);
    if let Some(e) = t.num("stepper.epsilon")? {
        t.ensure(e >= 0.0, "stepper.epsilon", "ε must be non-negative")?;
        stepper.epsilon = e;
    }
    if let Some(x) = t.num("stepper.picard_tol")? {
        t.ensure(x > 0.0, "stepper.picard_tol", "picard_tol must be positive")?;
        stepper.picard_tol = x;
    }
    if let Some(x) = t.count("stepper.picard_max")? {
        t.ensure(
            x >= 1,
            "stepper.picard_max",
            "picard_max must be at least 1",
        )?;
        stepper.picard_max = x;
    }
    if let Some(x) = t.num("stepper.dt_shrink")? {
        t.ensure(
            x > 0.0 && x < 1.0,
            "stepper.dt_shrink",
            "dt_shrink must lie in (0, 1)",
        )?;
        stepper.dt_shrink = x;
    }
    if let Some(x) = t.num("stepper.dt_min")? {
        t.ensure(
            x > 0.0 && x <= dt,
            "stepper.dt_min",
            "dt_min must lie in (0, dt]",
        )?;
        stepper.dt_min = x;
    }
    if let Some(m) = t.str("stepper.bc_mode") {
        stepper.bc_mode = match m.to_ascii_lowercase().as_str() {
            "zero_stress" => BcMode::ZeroStress,
            "dirichlet_v" => BcMode::DirichletV,
            _ => {
                return Err(err(
                    t.line("stepper.bc_mode"),
                    "stepper.bc_mode",
                    format!("expected zero_stress or dirichlet_v, got `{m}`"),
                ))
            }
        };
    }
    stepper
        .validate()
        .map_err(|e| err(None, "stepper", e.to_string()))?;

    let t_final = if needs_stepping {
        t.req_num("run.T")?
    } else {
        t.num("run.T")?.unwrap_or(1.0)
    };
    t.ensure(t_final > 0.0, "run.T", "T must be positive")?;
    let sample_every = t.count("run.sample_every")?.unwrap_or(100);
    t.ensure(
        sample_every >= 1,
        "run.sample_every",
        "sample_every must be at least 1",
    )?;
    let delta = t.num("run.delta")?.unwrap_or(gamma);
    t.ensure(delta >= 0.0, "run.delta", "δ must be non-negative")?;

    let mut audit = AuditTolerances::for_config(&stepper);
    for (key, slot) in [
        ("audit.energy_rel_tol", &mut audit.energy_rel_tol),
        ("audit.momentum_factor", &mut audit.momentum_factor),
        ("audit.j_allowance", &mut audit.j_allowance),
        ("audit.mass_rel_tol", &mut audit.mass_rel_tol),
    ] {
        if let Some(x) = t.num(key)? {
            t.ensure(x > 0.0, key, "audit tolerances must be positive")?;
            *slot = x;
        }
    }

    let sweep = if kind == ScenarioKind::Sweep {
        Some(parse_sweep(&t, &family)?)
    } else {
        if t.has_section("sweep") {
            log::warn!("[sweep] is ignored for this scenario kind");
        }
        None
    };

    let mms = if kind == ScenarioKind::Mms {
        Some(parse_mms(&t)?)
    } else {
        None
    };

    let out_dir = PathBuf::from(t.str("output.dir").unwrap_or("cns1d_out"));

    Ok(RunConfig {
        kind,
        half_width,
        cells,
        gas,
        family,
        raw,
        stepper,
        t_final,
        sample_every,
        delta,
        audit,
        sweep,
        mms,
        out_dir,
        base_dir: base_dir.to_path_buf(),
    })
}

fn parse_bump(t: &Table, half_width: f64) -> Result<Option<Bump<f64>>, ConfigError> {
    let Some(amplitude) = t.num("family.bump_amplitude")? else {
        for k in ["family.bump_center", "family.bump_width"] {
            if t.has(k) {
                return Err(err(t.line(k), k, "requires family.bump_amplitude"));
            }
        }
        return Ok(None);
    };
    let center = t.num("family.bump_center")?.unwrap_or(0.0);
    let width = t.req_num("family.bump_width")?;
    t.ensure(
        width > 0.0,
        "family.bump_width",
        "bump width must be positive",
    )?;
    check_support(t, center, width, half_width)?;
    Ok(Some(Bump {
        amplitude,
        center,
        width,
    }))
}

fn check_support(t: &Table, center: f64, width: f64, half_width: f64) -> Result<(), ConfigError> {
    t.ensure(
        center - width > -half_width && center + width < half_width,
        "family.bump_width",
        &format!(
            "bump support [{}, {}] must lie inside (-L, L) with L = {half_width}",
            center - width,
            center + width
        ),
    )
}

fn parse_sweep(t: &Table, family: &Option<FamilyConfig>) -> Result<SweepConfig, ConfigError> {
    let axis_name = t
        .str("sweep.axis")
        .ok_or_else(|| err(None, "sweep.axis", "missing required key"))?;
    let axis = match axis_name {
        "epsilon" => SweepAxis::Epsilon,
        "dt" => SweepAxis::Dt,
        "N" => SweepAxis::Cells,
        "L" => SweepAxis::HalfWidth,
        _ => {
            return Err(err(
                t.line("sweep.axis"),
                "sweep.axis",
                format!("expected epsilon, dt, N or L, got `{axis_name}`"),
            ))
        }
    };
    let values: Vec<f64> = t
        .list("sweep.values", "numbers")?
        .ok_or_else(|| err(None, "sweep.values", "missing required key"))?;
    let key = "sweep.values";
    t.ensure(values.len() >= 2, key, "a sweep needs at least two values")?;
    for &v in &values {
        let ok = match axis {
            SweepAxis::Epsilon => v >= 0.0,
            SweepAxis::Dt | SweepAxis::HalfWidth => v > 0.0,
            SweepAxis::Cells => v >= 4.0 && v.fract() == 0.0,
        };
        t.ensure(
            ok,
            key,
            &format!("value {v} is not admissible for axis {axis_name}"),
        )?;
        if axis == SweepAxis::HalfWidth {
            if let Some(b) = family.as_ref().and_then(|f| f.bump) {
                check_support(t, b.center, b.width, v)?;
            }
        }
    }
    let workers = t.count("sweep.workers")?.unwrap_or(1);
    t.ensure(workers >= 1, "sweep.workers", "workers must be at least 1")?;
    Ok(SweepConfig {
        axis,
        values,
        workers,
    })
}

fn parse_mms(t: &Table) -> Result<MmsConfig, ConfigError> {
    let case = match t.str("mms.case") {
        None => CaseId::GaussPulse,
        Some(c) => c.parse().map_err(|_| {
            err(
                t.line("mms.case"),
                "mms.case",
                format!("expected stationary or gauss_pulse, got `{c}`"),
            )
        })?,
    };
    let mut plan = StudyPlan::<f64>::standard();
    if let Some(l) = t.num("mms.L")? {
        t.ensure(l > 0.0, "mms.L", "L must be positive")?;
        plan.half_width = l;
    }
    if let Some(x) = t.num("mms.T")? {
        t.ensure(x > 0.0, "mms.T", "T must be positive")?;
        plan.t_final = x;
    }
    if let Some(ns) = t.list::<usize>("mms.spatial_N", "integers")? {
        t.ensure(
            ns.len() >= 3,
            "mms.spatial_N",
            "at least three levels are required",
        )?;
        t.ensure(
            ns.iter().all(|&n| n >= 4),
            "mms.spatial_N",
            "every level needs at least 4 cells",
        )?;
        plan.spatial_cells = ns;
    }
    if let Some(x) = t.num("mms.spatial_dt")? {
        t.ensure(x > 0.0, "mms.spatial_dt", "dt must be positive")?;
        plan.spatial_dt = x;
    }
    if let Some(dts) = t.list::<f64>("mms.temporal_dt", "numbers")? {
        t.ensure(
            dts.len() >= 3,
            "mms.temporal_dt",
            "at least three levels are required",
        )?;
        t.ensure(
            dts.iter().all(|&x| x > 0.0),
            "mms.temporal_dt",
            "every dt must be positive",
        )?;
        plan.temporal_dts = dts;
    }
    if let Some(n) = t.count("mms.temporal_N")? {
        t.ensure(n >= 4, "mms.temporal_N", "at least 4 cells are required")?;
        plan.temporal_cells = n;
    }
    Ok(MmsConfig { case, plan })
}

impl RunConfig {
    pub fn grid(&self) -> Grid {
        Grid::new(self.half_width, self.cells).expect("validated at parse time")
    }

    /// Resolved configuration as `key = value` lines, in a stable order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("scenario.kind", format!("{:?}", self.kind).to_lowercase());
        kv("grid.L", self.half_width.to_string());
        kv("grid.N", self.cells.to_string());
        kv("gas.gamma", self.gas.gamma.to_string());
        kv("gas.mu", self.gas.mu.to_string());
        kv("gas.R", self.gas.r.to_string());
        kv("gas.A", self.gas.a.to_string());
        if let Some(f) = &self.family {
            kv("family.K_rho", f.k_rho.to_string());
            kv("family.ell_rho", f.ell_rho.to_string());
            if let Some(s0) = f.s0 {
                kv("family.s0", s0.to_string());
            }
            if let Some(b) = f.bump {
                kv("family.bump_amplitude", b.amplitude.to_string());
                kv("family.bump_center", b.center.to_string());
                kv("family.bump_width", b.width.to_string());
            }
        }
        if let Some(p) = &self.raw.v0 {
            kv("raw.v0", p.display().to_string());
        }
        if let Some(p) = &self.raw.pi0 {
            kv("raw.pi0", p.display().to_string());
        }
        let s = &self.stepper;
        kv("stepper.dt", s.dt.to_string());
        kv("stepper.epsilon", s.epsilon.to_string());
        kv("stepper.picard_tol", s.picard_tol.to_string());
        kv("stepper.picard_max", s.picard_max.to_string());
        kv("stepper.dt_shrink", s.dt_shrink.to_string());
        kv("stepper.dt_min", s.dt_min.to_string());
        let bc = match s.bc_mode {
            BcMode::ZeroStress => "zero_stress",
            BcMode::DirichletV => "dirichlet_v",
        };
        kv("stepper.bc_mode", bc.to_string());
        kv("run.T", self.t_final.to_string());
        kv("run.sample_every", self.sample_every.to_string());
        kv("run.delta", self.delta.to_string());
        let a = &self.audit;
        kv("audit.energy_rel_tol", a.energy_rel_tol.to_string());
        kv("audit.momentum_factor", a.momentum_factor.to_string());
        kv("audit.j_allowance", a.j_allowance.to_string());
        kv("audit.mass_rel_tol", a.mass_rel_tol.to_string());
        if let Some(sw) = &self.sweep {
            kv("sweep.axis", sw.axis.name().to_string());
            let vals: Vec<String> = sw.values.iter().map(|v| v.to_string()).collect();
            kv("sweep.values", vals.join(", "));
            kv("sweep.workers", sw.workers.to_string());
        }
        if let Some(m) = &self.mms {
            kv("mms.case", format!("{:?}", m.case).to_lowercase());
            kv("mms.L", m.plan.half_width.to_string());
            kv("mms.T", m.plan.t_final.to_string());
        }
        out
    }
}
