//! Semi-implicit time stepping of the Lagrangian system
//!
//! ```text
//! J_t = v_y
//! rho0 v_t - mu (v_y / J)_y + pi_y = 0
//! pi_t + gamma (v_y / J) pi = (gamma - 1) mu (v_y / J)^2
//! ```
//!
//! Each step is a fixed-point iteration on the velocity. With the strain
//! rate `b = v_y / J` frozen from the previous iterate, `J` and `pi` are
//! advanced by the exact solutions of their linear ODEs, and the velocity
//! is then obtained from a backward-Euler viscous solve with the new `J` and
//! `pi`. The loop stops once two successive velocity iterates agree in the
//! sup norm. Steps that fail to converge are retried with a smaller `dt`.

// A failed run returns its partial trajectory by value.
#![allow(clippy::result_large_err)]

use crate::diagnostics::{DiagnosticsRecord, Tracker};
use crate::error::{Error, Result};
use crate::grid::{cell_derivative, sup_norm, CellField, NodeField};
use crate::init::{GasConstants, InitialData};
use crate::scalar::Scalar;
use crate::tridiag;

/// Closure of the velocity system at `y = -L` and `y = L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BcMode {
    /// Ghost flux with zero effective viscous flux, `mu v_y / J = pi`.
    #[default]
    ZeroStress,
    /// Velocity pinned to its initial boundary values (or to a source's
    /// boundary trace).
    DirichletV,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig<T> {
    pub dt: T,
    /// Density regularization: the momentum equation uses `rho0 + epsilon`.
    pub epsilon: T,
    /// Sup-norm tolerance on successive velocity iterates.
    pub picard_tol: T,
    pub picard_max: usize,
    pub dt_shrink: T,
    pub dt_min: T,
    pub bc_mode: BcMode,
}

impl<T: Scalar> StepperConfig<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            epsilon: T::zero(),
            picard_tol: T::lit(1e-12),
            picard_max: 50,
            dt_shrink: T::lit(0.5),
            dt_min: dt * T::lit(1e-6),
            bc_mode: BcMode::ZeroStress,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return bad("dt", "must be positive");
        }
        if !(self.epsilon >= T::zero()) {
            return bad("epsilon", "must be nonnegative");
        }
        if !(self.picard_tol > T::zero()) {
            return bad("picard_tol", "must be positive");
        }
        if self.picard_max == 0 {
            return bad("picard_max", "must be at least 1");
        }
        if !(self.dt_shrink > T::zero() && self.dt_shrink < T::one()) {
            return bad("dt_shrink", "must lie in (0, 1)");
        }
        if !(self.dt_min > T::zero()) {
            return bad("dt_min", "must be positive");
        }
        Ok(())
    }
}

/// Solution snapshot `(J, v, pi)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagState<T> {
    pub t: T,
    pub j: CellField<T>,
    pub v: NodeField<T>,
    pub pi: CellField<T>,
    /// Euler position of the leftmost particle, `eta(-L, t)`.
    pub anchor: T,
}

impl<T: Scalar> LagState<T> {
    pub fn initial(d: &InitialData<T>) -> Self {
        Self {
            t: T::zero(),
            j: d.j0.clone(),
            v: d.v0.clone(),
            pi: d.pi0.clone(),
            anchor: d.grid.node(0),
        }
    }
}

/// Instrumentation of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats<T> {
    pub iterations: usize,
    pub residual: T,
    /// Ratio of the second to the first Picard residual; `None` when the
    /// iteration converged after a single update.
    pub contraction: Option<T>,
    pub dt_used: T,
    /// Number of `dt` values tried, 1 when no shrink was needed.
    pub attempts: usize,
    pub residuals: Vec<T>,
    /// Cells whose pressure needed a last-ulp upward correction so that the
    /// rounded `J^gamma pi` does not fall below its previous value.
    pub rounding_guards: usize,
}

/// Additive sources for manufactured-solution runs.
pub trait Source<T>: Sync {
    fn velocity_forcing(&self, y: T, t: T) -> T;
    fn pressure_forcing(&self, y: T, t: T) -> T;
    /// Dirichlet value of the velocity at `y = +-L`, if the source prescribes
    /// one.
    fn boundary_velocity(&self, _y: T, _t: T) -> Option<T> {
        None
    }
}

fn strain_rate<T: Scalar>(v: &[T], j: &[T], d: &InitialData<T>) -> CellField<T> {
    let dv = cell_derivative(v, &d.grid).expect("state matches grid");
    dv.iter().zip(j).map(|(&a, &b)| a / b).collect()
}

/// Effective viscous flux `G = mu v_y / J - pi`.
pub fn compute_g<T: Scalar>(state: &LagState<T>, d: &InitialData<T>) -> CellField<T> {
    let b = strain_rate(&state.v, &state.j, d);
    b.iter()
        .zip(state.pi.iter())
        .map(|(&b, &p)| d.gas.mu * b - p)
        .collect()
}

/// `J exp(b dt)`: exact solution of `J_t = b J` with frozen `b`.
pub fn update_j<T: Scalar>(j: &[T], b: &[T], dt: T) -> CellField<T> {
    j.iter().zip(b).map(|(&j, &b)| j * (b * dt).exp()).collect()
}

/// Exact solution of `pi_t + gamma b pi = (gamma - 1) mu b^2` with frozen `b`:
/// `e^{-gamma b dt} pi + (gamma - 1) mu b (1 - e^{-gamma b dt}) / gamma`.
pub fn update_pi<T: Scalar>(pi: &[T], b: &[T], dt: T, gas: &GasConstants<T>) -> CellField<T> {
    let g = gas.gamma;
    let heat = (g - T::one()) * gas.mu / g;
    let series_below = T::lit(1e-12);
    pi.iter()
        .zip(b)
        .map(|(&p, &b)| {
            let x = g * b * dt;
            let one_minus = if x.abs() < series_below {
                x - x * x / T::lit(2.0)
            } else {
                -(-x).exp_m1()
            };
            (-x).exp() * p + heat * b * one_minus
        })
        .collect()
}

/// Boundary data and sources entering one velocity solve.
struct VelocityInputs<'a, T> {
    dt: T,
    forcing: Option<&'a [T]>,
    dirichlet: (T, T),
}

fn solve_velocity_inner<T: Scalar>(
    vn: &[T],
    j: &[T],
    pi: &[T],
    d: &InitialData<T>,
    cfg: &StepperConfig<T>,
    inp: &VelocityInputs<'_, T>,
) -> Result<NodeField<T>> {
    let g = &d.grid;
    let n = g.cells();
    let h = g.h();
    let dt = inp.dt;
    let coef: Vec<T> = j.iter().map(|&jj| d.gas.mu * dt / (h * h * jj)).collect();
    let rho = |i: usize| d.rho0_node[i] + cfg.epsilon;
    let force = |i: usize| inp.forcing.map_or(T::zero(), |f| dt * f[i]);
    let p = |k: isize| {
        if k < 0 || k as usize >= n {
            T::zero()
        } else {
            pi[k as usize]
        }
    };
    let row_rhs =
        |i: usize| rho(i) * vn[i] - dt * (p(i as isize) - p(i as isize - 1)) / h + force(i);

    match cfg.bc_mode {
        BcMode::ZeroStress => {
            let m = n + 1;
            let mut lower = vec![T::zero(); m];
            let mut diag = vec![T::zero(); m];
            let mut upper = vec![T::zero(); m];
            let mut rhs = vec![T::zero(); m];
            for i in 0..m {
                let left = if i > 0 { coef[i - 1] } else { T::zero() };
                let right = if i < n { coef[i] } else { T::zero() };
                lower[i] = -left;
                upper[i] = -right;
                diag[i] = rho(i) + left + right;
                rhs[i] = row_rhs(i);
            }
            Ok(NodeField(tridiag::solve(&lower, &diag, &upper, &rhs)?))
        }
        BcMode::DirichletV => {
            let m = n - 1;
            let mut lower = vec![T::zero(); m];
            let mut diag = vec![T::zero(); m];
            let mut upper = vec![T::zero(); m];
            let mut rhs = vec![T::zero(); m];
            for k in 0..m {
                let i = k + 1;
                lower[k] = -coef[i - 1];
                upper[k] = -coef[i];
                diag[k] = rho(i) + coef[i - 1] + coef[i];
                rhs[k] = row_rhs(i);
            }
            rhs[0] = rhs[0] + coef[0] * inp.dirichlet.0;
            rhs[m - 1] = rhs[m - 1] + coef[n - 1] * inp.dirichlet.1;
            let inner = tridiag::solve(&lower, &diag, &upper, &rhs)?;
            let mut v = Vec::with_capacity(n + 1);
            v.push(inp.dirichlet.0);
            v.extend(inner);
            v.push(inp.dirichlet.1);
            Ok(NodeField(v))
        }
    }
}

/// Backward-Euler velocity update with `J` and `pi` given at the new time
/// level, using step `dt`. Dirichlet values come from `d.v0`.
pub fn solve_velocity<T: Scalar>(
    vn: &[T],
    j_new: &[T],
    pi_new: &[T],
    d: &InitialData<T>,
    cfg: &StepperConfig<T>,
    dt: T,
) -> Result<NodeField<T>> {
    d.grid.check_nodes(vn)?;
    d.grid.check_cells(j_new)?;
    d.grid.check_cells(pi_new)?;
    let n = d.grid.cells();
    let inp = VelocityInputs {
        dt,
        forcing: None,
        dirichlet: (d.v0[0], d.v0[n]),
    };
    solve_velocity_inner(vn, j_new, pi_new, d, cfg, &inp)
}

enum Attempt<T> {
    Converged(LagState<T>, StepStats<T>),
    Failed(Vec<T>),
}

fn attempt<T: Scalar>(
    state: &LagState<T>,
    d: &InitialData<T>,
    cfg: &StepperConfig<T>,
    dt: T,
    source: Option<&dyn Source<T>>,
) -> Attempt<T> {
    let g = &d.grid;
    let n = g.cells();
    let t_new = state.t + dt;
    let (forcing_v, forcing_pi) = match source {
        Some(s) => (
            Some(g.node_field(|y| s.velocity_forcing(y, t_new)).0),
            Some(g.cell_field(|y| s.pressure_forcing(y, t_new)).0),
        ),
        None => (None, None),
    };
    let default_bc = (d.v0[0], d.v0[n]);
    let dirichlet = source
        .and_then(|s| {
            let l = g.half_width();
            Some((
                s.boundary_velocity(-l, t_new)?,
                s.boundary_velocity(l, t_new)?,
            ))
        })
        .unwrap_or(default_bc);
    let inputs = VelocityInputs {
        dt,
        forcing: forcing_v.as_deref(),
        dirichlet,
    };

    let mut v_k = state.v.clone();
    let mut j_k = state.j.clone();
    let mut residuals = Vec::new();
    for _ in 0..cfg.picard_max {
        let b = strain_rate(&v_k, &j_k, d);
        let j_next = update_j(&state.j, &b, dt);
        let pi_hom = update_pi(&state.pi, &b, dt, &d.gas);
        let pi_next = add_source(&pi_hom, forcing_pi.as_deref(), dt);
        let v_next = match solve_velocity_inner(&state.v, &j_next, &pi_next, d, cfg, &inputs) {
            Ok(v) => v,
            Err(_) => return Attempt::Failed(residuals),
        };
        let res = sup_norm(
            &v_next
                .iter()
                .zip(v_k.iter())
                .map(|(&a, &b)| a - b)
                .collect::<Vec<_>>(),
        );
        residuals.push(res);
        if !res.is_finite() {
            return Attempt::Failed(residuals);
        }
        v_k = v_next;
        j_k = j_next;
        if res <= cfg.picard_tol {
            let (pi_hom, guards) = entropy_guard(&state.j, &state.pi, &j_k, pi_hom, d.gas.gamma);
            let pi = add_source(&pi_hom, forcing_pi.as_deref(), dt);
            let contraction = (residuals.len() >= 2 && residuals[0] > T::zero())
                .then(|| residuals[1] / residuals[0]);
            let anchor = state.anchor + dt * v_k[0];
            let next = LagState {
                t: t_new,
                j: j_k,
                v: v_k,
                pi,
                anchor,
            };
            let stats = StepStats {
                iterations: residuals.len(),
                residual: res,
                contraction,
                dt_used: dt,
                attempts: 1,
                residuals,
                rounding_guards: guards,
            };
            return Attempt::Converged(next, stats);
        }
    }
    Attempt::Failed(residuals)
}

fn add_source<T: Scalar>(pi: &CellField<T>, src: Option<&[T]>, dt: T) -> CellField<T> {
    match src {
        Some(f) => pi.iter().zip(f).map(|(&p, &s)| p + dt * s).collect(),
        None => pi.clone(),
    }
}

/// In exact arithmetic the frozen-coefficient updates give
/// `J_new^gamma pi_new - J^gamma pi = J^gamma (gamma-1) mu b (e^{gamma b dt} - 1) / gamma >= 0`.
/// Rounding can undershoot by an ulp where the increment is below machine
/// precision; nudge `pi_new` up until the rounded product is monotone.
fn entropy_guard<T: Scalar>(
    j_old: &[T],
    pi_old: &[T],
    j_new: &[T],
    mut pi_new: CellField<T>,
    gamma: T,
) -> (CellField<T>, usize) {
    let mut guards = 0;
    let bump = T::one() + T::epsilon();
    for k in 0..pi_new.len() {
        let before = j_old[k].powf(gamma) * pi_old[k];
        let jg = j_new[k].powf(gamma);
        if jg * pi_new[k] < before {
            guards += 1;
            for _ in 0..16 {
                pi_new[k] = pi_new[k] * bump;
                if jg * pi_new[k] >= before {
                    break;
                }
            }
        }
    }
    (pi_new, guards)
}

/// One outer step with the configured `dt`.
pub fn picard_step<T: Scalar>(
    state: &LagState<T>,
    d: &InitialData<T>,
    cfg: &StepperConfig<T>,
) -> Result<(LagState<T>, StepStats<T>)> {
    advance(state, d, cfg, cfg.dt, None)
}

/// One outer step starting from `dt`, shrinking on non-convergence.
///
/// Without a source, positivity of `J` and `pi` is enforced as an error; with
/// a source (manufactured forcing) violations are only logged.
pub fn advance<T: Scalar>(
    state: &LagState<T>,
    d: &InitialData<T>,
    cfg: &StepperConfig<T>,
    dt: T,
    source: Option<&dyn Source<T>>,
) -> Result<(LagState<T>, StepStats<T>)> {
    let mut dt_try = dt;
    let mut attempts = 0;
    loop {
        attempts += 1;
        match attempt(state, d, cfg, dt_try, source) {
            Attempt::Converged(next, mut stats) => {
                stats.attempts = attempts;
                let min_j = next.j.min();
                let min_pi = next.pi.min();
                if !(min_j > T::zero() && min_pi >= T::zero()) {
                    if source.is_none() {
                        return Err(Error::PositivityViolation {
                            t: next.t.as_f64(),
                            min_j: min_j.as_f64(),
                            min_pi: min_pi.as_f64(),
                        });
                    }
                    log::warn!(
                        "forced run left the admissible set at t = {}: min J = {min_j:e}, min pi = {min_pi:e}",
                        next.t
                    );
                }
                return Ok((next, stats));
            }
            Attempt::Failed(residuals) => {
                log::debug!(
                    "Picard iteration failed at t = {} with dt = {dt_try:e}; shrinking",
                    state.t
                );
                dt_try = dt_try * cfg.dt_shrink;
                if dt_try < cfg.dt_min {
                    return Err(Error::DtUnderflow {
                        t: state.t.as_f64(),
                        dt_min: cfg.dt_min.as_f64(),
                        residuals: residuals.iter().map(|r| r.as_f64()).collect(),
                    });
                }
            }
        }
    }
}

/// Options for a full run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions<T> {
    pub t_final: T,
    /// Record diagnostics every this many accepted steps (and at the end).
    pub sample_every: usize,
    /// Weight exponent of the effective-flux norms.
    pub delta: T,
    /// Entropy extrema are taken over cells with `rho0` above this value.
    pub entropy_density_floor: T,
}

impl<T: Scalar> RunOptions<T> {
    pub fn new(t_final: T, sample_every: usize, delta: T) -> Self {
        Self {
            t_final,
            sample_every,
            delta,
            entropy_density_floor: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub state: LagState<T>,
    pub series: Vec<DiagnosticsRecord<T>>,
    pub steps: usize,
}

/// A run that stopped early, with everything computed up to that point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure<T> {
    pub error: Error,
    pub partial: RunOutput<T>,
}

impl<T: Scalar> std::fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run aborted after {} steps at t = {}: {}",
            self.partial.steps, self.partial.state.t, self.error
        )
    }
}

impl<T: Scalar> std::error::Error for RunFailure<T> {}

/// Advances from the initial data to `t_final`, sampling diagnostics.
pub fn run<T: Scalar>(
    d: &InitialData<T>,
    cfg: &StepperConfig<T>,
    opts: &RunOptions<T>,
) -> std::result::Result<RunOutput<T>, RunFailure<T>> {
    run_observed(d, cfg, opts, None, |_, _| {})
}

/// Like [`run`], with optional sources and a callback on every accepted step.
pub fn run_observed<T: Scalar>(
    d: &InitialData<T>,
    cfg: &StepperConfig<T>,
    opts: &RunOptions<T>,
    source: Option<&dyn Source<T>>,
    mut observer: impl FnMut(&LagState<T>, &StepStats<T>),
) -> std::result::Result<RunOutput<T>, RunFailure<T>> {
    let mut state = LagState::initial(d);
    let mut tracker = Tracker::new(d, cfg, opts);
    let mut out = RunOutput {
        state: state.clone(),
        series: Vec::new(),
        steps: 0,
    };
    let fail = |error, out: RunOutput<T>| {
        Err(RunFailure {
            error,
            partial: out,
        })
    };

    if let Err(e) = d.check().and_then(|_| cfg.validate()) {
        return fail(e, out);
    }
    if !(opts.t_final > T::zero()) {
        let e = Error::InvalidParameter {
            name: "T",
            reason: "final time must be positive".into(),
        };
        return fail(e, out);
    }
    let sample_every = opts.sample_every.max(1);
    out.series.push(tracker.record(&state, None));

    // time slack: 1e-12 relative, or the precision floor of `T`
    let slack = |r: f64| T::lit(r).max(T::epsilon() * T::lit(1e3));
    let tiny = opts.t_final * slack(1e-12);
    loop {
        let remaining = opts.t_final - state.t;
        if remaining <= tiny {
            break;
        }
        let last = remaining <= cfg.dt * (T::one() + slack(1e-9));
        let dt = if last { remaining } else { cfg.dt };
        match advance(&state, d, cfg, dt, source) {
            Ok((mut next, stats)) => {
                let finished = last && stats.dt_used == dt;
                if finished {
                    next.t = opts.t_final;
                }
                tracker.observe(&next, &stats);
                observer(&next, &stats);
                state = next;
                out.steps += 1;
                if out.steps % sample_every == 0 || finished {
                    out.series.push(tracker.record(&state, Some(&stats)));
                }
                if finished {
                    break;
                }
            }
            Err(e) => {
                out.state = state;
                return fail(e, out);
            }
        }
    }
    out.state = state;
    Ok(out)
}
