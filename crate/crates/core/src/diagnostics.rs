//! Conserved quantities, bounds and weighted effective-flux norms, sampled
//! along a trajectory and audited afterwards.

use crate::error::{Error, Result};
use crate::euler;
use crate::grid::{cell_derivative, l2, node_divergence, sup_norm, weighted_l2, CellField, Grid1D};
use crate::init::{analytic_kinetic_energy, analytic_pi0_l1, analytic_rho0_l1, InitialData};
use crate::scalar::Scalar;
use crate::stepper::{compute_g, BcMode, LagState, RunOptions, StepStats, StepperConfig};

/// Total energy `int rho0 v^2 / 2 + J pi / (gamma - 1)`.
pub fn energy<T: Scalar>(state: &LagState<T>, d: &InitialData<T>) -> T {
    let h = d.grid.h();
    let half = T::lit(0.5);
    let kinetic: T = state
        .v
        .iter()
        .zip(d.rho0_node.iter())
        .map(|(&v, &r)| half * r * v * v)
        .sum();
    let internal: T = state
        .j
        .iter()
        .zip(state.pi.iter())
        .map(|(&j, &p)| j * p)
        .sum();
    h * kinetic + h * internal / (d.gas.gamma - T::one())
}

/// Momentum `h sum (rho0 + epsilon) v` over nodes.
pub fn momentum<T: Scalar>(state: &LagState<T>, d: &InitialData<T>, epsilon: T) -> T {
    let s: T = state
        .v
        .iter()
        .zip(d.rho0_node.iter())
        .map(|(&v, &r)| (r + epsilon) * v)
        .sum();
    s * d.grid.h()
}

/// Initial energy and `||rho0||_1`, whole-line closed forms when the family
/// metadata allows it, grid quadrature otherwise.
pub fn reference_norms<T: Scalar>(d: &InitialData<T>) -> (T, T) {
    let g = &d.grid;
    let quad_energy = energy(&crate::stepper::LagState::initial(d), d);
    let quad_rho = crate::grid::integral(&d.rho0_cell, g);
    match d.family.as_ref() {
        Some(meta) => {
            let rho_l1 = analytic_rho0_l1(meta);
            let e0 = match (analytic_kinetic_energy(meta), analytic_pi0_l1(meta, &d.gas)) {
                (Some(k), Some(p)) => k + p / (d.gas.gamma - T::one()),
                (None, Some(p)) if d.v0.iter().all(|&v| v == T::zero()) => {
                    p / (d.gas.gamma - T::one())
                }
                _ => quad_energy,
            };
            (e0, rho_l1)
        }
        None => (quad_energy, quad_rho),
    }
}

/// `c0 = exp(-(2 sqrt 2 / mu) sqrt(E0) ||rho0||_1)`.
pub fn j_lower_bound_reference<T: Scalar>(d: &InitialData<T>) -> Result<T> {
    let (e0, rho_l1) = reference_norms(d);
    if !rho_l1.is_finite() {
        return Err(Error::H4NotSatisfied("||rho0||_1 is infinite".into()));
    }
    if !e0.is_finite() {
        return Err(Error::H4NotSatisfied("initial energy is infinite".into()));
    }
    Ok(c0_formula(e0, rho_l1, d.gas.mu))
}

pub fn c0_formula<T: Scalar>(e0: T, rho_l1: T, mu: T) -> T {
    let k = T::lit(2.0 * std::f64::consts::SQRT_2) / mu;
    (-(k * e0.sqrt() * rho_l1)).exp()
}

/// Entropy `c_v log(pi J^gamma / (A rho0^gamma))`; `-inf` where `pi <= 0`.
pub fn entropy_field<T: Scalar>(state: &LagState<T>, d: &InitialData<T>) -> CellField<T> {
    let gas = &d.gas;
    state
        .pi
        .iter()
        .zip(state.j.iter())
        .zip(d.rho0_cell.iter())
        .map(|((&p, &j), &r)| {
            if p > T::zero() {
                gas.cv * (p * j.powf(gas.gamma) / (gas.a * r.powf(gas.gamma))).ln()
            } else {
                T::neg_infinity()
            }
        })
        .collect()
}

/// Temperature `pi J / (R rho0)`.
pub fn temperature_field<T: Scalar>(state: &LagState<T>, d: &InitialData<T>) -> CellField<T> {
    state
        .pi
        .iter()
        .zip(state.j.iter())
        .zip(d.rho0_cell.iter())
        .map(|((&p, &j), &r)| p * j / (d.gas.r * r))
        .collect()
}

/// `(||G / rho0^{delta/2}||_2, ||G_y / rho0^{(delta+1)/2}||_2)`.
///
/// `G_y` is the node divergence of `G`, averaged back to cells; the two
/// boundary cells take their single interior neighbour.
pub fn weighted_flux_norms<T: Scalar>(state: &LagState<T>, d: &InitialData<T>, delta: T) -> (T, T) {
    let g = &d.grid;
    let flux = compute_g(state, d);
    let w0: Vec<T> = d.rho0_cell.iter().map(|&r| r.powf(-delta)).collect();
    let w1: Vec<T> = d
        .rho0_cell
        .iter()
        .map(|&r| r.powf(-(delta + T::one())))
        .collect();
    let gy = flux_gradient_cells(&flux, g);
    (
        weighted_l2(&flux, &w0, g).expect("nonnegative weights"),
        weighted_l2(&gy, &w1, g).expect("nonnegative weights"),
    )
}

fn flux_gradient_cells<T: Scalar>(flux: &[T], g: &Grid1D<T>) -> CellField<T> {
    let n = g.cells();
    let nodes = node_divergence(flux, g).expect("layout");
    let half = T::lit(0.5);
    (0..n)
        .map(|i| match i {
            0 => nodes[1],
            _ if i == n - 1 => nodes[n - 1],
            _ => half * (nodes[i] + nodes[i + 1]),
        })
        .collect()
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub energy: T,
    pub momentum: T,
    pub min_j: T,
    pub c0_ref: T,
    pub s_min: T,
    pub s_max: T,
    pub g_weighted_l2: T,
    /// `int_0^t ||G_y / rho0^{(delta+1)/2}||_2^2 dtau`, right-endpoint rule.
    pub gy_weighted_l2_cum: T,
    pub g_l2: T,
    pub g_sup: T,
    pub vy_l2: T,
    pub pi_min: T,
    pub pi_max: T,
    pub euler_mass: T,
    /// Running minimum of `J` over every accepted step so far.
    pub min_j_hist: T,
    /// Running minimum of `pi` over every accepted step so far.
    pub pi_min_hist: T,
    /// Cell-steps where `J^gamma pi < J0^gamma pi0`, accumulated.
    pub floor_violations: usize,
    pub steps: usize,
    pub picard_iters: usize,
    pub picard_res: T,
    pub dt_used: T,
}

/// Column names of the time-series CSV, in order.
pub const CSV_COLUMNS: [&str; 15] = [
    "t",
    "E",
    "m",
    "minJ",
    "c0_ref",
    "s_min",
    "s_max",
    "G_w_l2",
    "Gy_w_l2_cum",
    "G_l2",
    "G_sup",
    "vy_l2",
    "picard_iters",
    "picard_res",
    "dt_used",
];

/// 17 significant digits.
pub fn fmt_num<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

impl<T: Scalar> DiagnosticsRecord<T> {
    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        [
            fmt_num(self.t),
            fmt_num(self.energy),
            fmt_num(self.momentum),
            fmt_num(self.min_j),
            fmt_num(self.c0_ref),
            fmt_num(self.s_min),
            fmt_num(self.s_max),
            fmt_num(self.g_weighted_l2),
            fmt_num(self.gy_weighted_l2_cum),
            fmt_num(self.g_l2),
            fmt_num(self.g_sup),
            fmt_num(self.vy_l2),
            self.picard_iters.to_string(),
            fmt_num(self.picard_res),
            fmt_num(self.dt_used),
        ]
        .join(",")
    }
}

/// Accumulates the per-step quantities of a run and produces records.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    d: InitialData<T>,
    epsilon: T,
    delta: T,
    density_floor: T,
    c0: T,
    floor0: Vec<T>,
    gy_cum: T,
    min_j_hist: T,
    pi_min_hist: T,
    violations: usize,
    steps: usize,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(d: &InitialData<T>, cfg: &StepperConfig<T>, opts: &RunOptions<T>) -> Self {
        let gamma = d.gas.gamma;
        Self {
            d: d.clone(),
            epsilon: cfg.epsilon,
            delta: opts.delta,
            density_floor: opts.entropy_density_floor,
            c0: j_lower_bound_reference(d).unwrap_or(T::nan()),
            floor0: d
                .j0
                .iter()
                .zip(d.pi0.iter())
                .map(|(&j, &p)| j.powf(gamma) * p)
                .collect(),
            gy_cum: T::zero(),
            min_j_hist: d.j0.min(),
            pi_min_hist: d.pi0.min(),
            violations: 0,
            steps: 0,
        }
    }

    fn floor_deficits(&self, state: &LagState<T>) -> usize {
        let gamma = self.d.gas.gamma;
        state
            .j
            .iter()
            .zip(state.pi.iter())
            .zip(&self.floor0)
            .filter(|((&j, &p), &f)| !(j.powf(gamma) * p >= f))
            .count()
    }

    /// Accounts for one accepted step.
    pub fn observe(&mut self, state: &LagState<T>, stats: &StepStats<T>) {
        self.steps += 1;
        self.min_j_hist = self.min_j_hist.min(state.j.min());
        self.pi_min_hist = self.pi_min_hist.min(state.pi.min());
        self.violations += self.floor_deficits(state);
        let (_, gy) = weighted_flux_norms(state, &self.d, self.delta);
        self.gy_cum = self.gy_cum + stats.dt_used * gy * gy;
    }

    pub fn record(
        &self,
        state: &LagState<T>,
        stats: Option<&StepStats<T>>,
    ) -> DiagnosticsRecord<T> {
        let d = &self.d;
        let g = &d.grid;
        let flux = compute_g(state, d);
        let (gw, _) = weighted_flux_norms(state, d, self.delta);
        let s = entropy_field(state, d);
        let (mut s_min, mut s_max) = (T::infinity(), T::neg_infinity());
        for (&sv, &r) in s.iter().zip(d.rho0_cell.iter()) {
            if r > self.density_floor {
                s_min = s_min.min(sv);
                s_max = s_max.max(sv);
            }
        }
        let vy = cell_derivative(&state.v, g).expect("layout");
        let snap = euler::to_euler(state, d);
        DiagnosticsRecord {
            t: state.t,
            energy: energy(state, d),
            momentum: momentum(state, d, self.epsilon),
            min_j: state.j.min(),
            c0_ref: self.c0,
            s_min,
            s_max,
            g_weighted_l2: gw,
            gy_weighted_l2_cum: self.gy_cum,
            g_l2: l2(&flux, g),
            g_sup: sup_norm(&flux),
            vy_l2: l2(&vy, g),
            pi_min: state.pi.min(),
            pi_max: state.pi.max(),
            euler_mass: euler::euler_mass(&snap),
            min_j_hist: self.min_j_hist.min(state.j.min()),
            pi_min_hist: self.pi_min_hist.min(state.pi.min()),
            floor_violations: self.violations.max(self.floor_deficits(state)),
            steps: self.steps,
            picard_iters: stats.map_or(0, |s| s.iterations),
            picard_res: stats.map_or(T::zero(), |s| s.residual),
            dt_used: stats.map_or(T::zero(), |s| s.dt_used),
        }
    }
}

/// Tolerances of the trajectory audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditTolerances<T> {
    /// Bound on `max_t |E(t) - E(0)| / E(0)`.
    pub energy_rel_tol: T,
    /// Momentum drift is checked against
    /// `momentum_factor * steps * picard_tol * h * sum(rho0 + epsilon)`
    /// under zero-stress closure; Dirichlet runs only report the drift.
    pub momentum_factor: T,
    pub picard_tol: T,
    pub epsilon: T,
    pub bc_mode: BcMode,
    /// `min J >= j_allowance * c0`.
    pub j_allowance: T,
    /// Relative bound on the variation of the cross-frame mass.
    pub mass_rel_tol: T,
}

impl<T: Scalar> AuditTolerances<T> {
    pub fn for_config(cfg: &StepperConfig<T>) -> Self {
        Self {
            energy_rel_tol: T::lit(1e-3),
            momentum_factor: T::lit(10.0),
            picard_tol: cfg.picard_tol,
            epsilon: cfg.epsilon,
            bc_mode: cfg.bc_mode,
            j_allowance: T::lit(0.99),
            mass_rel_tol: T::lit(1e-12),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the audited quantity.
    pub worst: f64,
    /// Threshold it was compared against.
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<16} {}  worst={:.6e}  limit={:.6e}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.worst,
                c.limit,
                c.detail
            ));
        }
        out.push_str(&format!(
            "overall          {}\n",
            if self.all_passed() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

/// Pass/fail roll-up of a diagnostics series.
///
/// # Panics
/// If `series` is empty.
pub fn audit_trajectory<T: Scalar>(
    series: &[DiagnosticsRecord<T>],
    d: &InitialData<T>,
    tol: &AuditTolerances<T>,
) -> AuditReport {
    assert!(!series.is_empty(), "audit needs at least one record");
    let first = &series[0];
    let f = |x: T| x.as_f64();
    let mut checks = Vec::new();

    let e0 = first.energy;
    let drift = series
        .iter()
        .map(|r| ((r.energy - e0) / e0).abs())
        .fold(T::zero(), T::max);
    checks.push(AuditCheck {
        name: "energy",
        passed: drift <= tol.energy_rel_tol,
        worst: f(drift),
        limit: f(tol.energy_rel_tol),
        detail: "max relative energy drift".into(),
    });

    let m0 = first.momentum;
    let mass_eps: T = d.rho0_node.iter().map(|&r| r + tol.epsilon).sum::<T>() * d.grid.h();
    let (mut worst, mut ratio) = (T::zero(), T::zero());
    let mut limit = T::zero();
    for r in series {
        let dm = (r.momentum - m0).abs();
        let bound = tol.momentum_factor * T::from_count(r.steps.max(1)) * tol.picard_tol * mass_eps;
        worst = worst.max(dm);
        if dm / bound >= ratio {
            ratio = dm / bound;
            limit = bound;
        }
    }
    let conserved = tol.bc_mode == BcMode::ZeroStress;
    checks.push(AuditCheck {
        name: "momentum",
        passed: !conserved || ratio <= T::one(),
        worst: f(worst),
        limit: f(limit),
        detail: if conserved {
            "max |m(t) - m0| vs accumulated Picard bound".into()
        } else {
            "Dirichlet closure: boundary flux changes momentum, drift reported only".into()
        },
    });

    let c0 = first.c0_ref;
    let min_j = series
        .iter()
        .map(|r| r.min_j_hist.min(r.min_j))
        .fold(T::infinity(), T::min);
    let j_ok = min_j > T::zero() && (c0.is_nan() || min_j >= tol.j_allowance * c0);
    checks.push(AuditCheck {
        name: "jacobian_floor",
        passed: j_ok,
        worst: f(min_j),
        limit: f(tol.j_allowance * c0),
        detail: if c0.is_nan() {
            "c0 unavailable (H4 fails); positivity only".into()
        } else {
            format!(
                "min J over run vs {} c0, c0 = {:.6e}",
                f(tol.j_allowance),
                f(c0)
            )
        },
    });

    let s0 = entropy_field(&LagState::initial(d), d).min();
    let violations = series.iter().map(|r| r.floor_violations).max().unwrap_or(0);
    let s_low = series.iter().map(|r| r.s_min).fold(T::infinity(), T::min);
    checks.push(AuditCheck {
        name: "entropy_floor",
        passed: violations == 0 && s_low >= s0,
        worst: f(s_low),
        limit: f(s0),
        detail: format!("{violations} cell-steps with J^gamma pi below its initial value"),
    });

    let pi_low = series
        .iter()
        .map(|r| r.pi_min_hist.min(r.pi_min))
        .fold(T::infinity(), T::min);
    checks.push(AuditCheck {
        name: "positivity",
        passed: pi_low >= T::zero() && min_j > T::zero(),
        worst: f(pi_low),
        limit: 0.0,
        detail: "min pi over run".into(),
    });

    let bounded = series.iter().all(|r| {
        r.g_weighted_l2.is_finite() && r.gy_weighted_l2_cum.is_finite() && r.s_max.is_finite()
    });
    let sup_gw = series
        .iter()
        .map(|r| r.g_weighted_l2)
        .fold(T::zero(), T::max);
    checks.push(AuditCheck {
        name: "weighted_norms",
        passed: bounded,
        worst: f(sup_gw),
        limit: f64::INFINITY,
        detail: "sup_t ||G / rho0^(delta/2)||_2 and entropy ceiling finite".into(),
    });

    let mass0 = first.euler_mass;
    let mass_drift = series
        .iter()
        .map(|r| ((r.euler_mass - mass0) / mass0).abs())
        .fold(T::zero(), T::max);
    checks.push(AuditCheck {
        name: "euler_mass",
        passed: mass_drift <= tol.mass_rel_tol,
        worst: f(mass_drift),
        limit: f(tol.mass_rel_tol),
        detail: "relative drift of the Euler-frame mass".into(),
    });

    AuditReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NodeField;
    use crate::init::{Bump, GasConstants};
    use crate::stepper::run;
    use approx::assert_relative_eq;

    fn gas() -> GasConstants<f64> {
        GasConstants::new(1.4, 1.0, 1.0, 1.0).unwrap()
    }

    fn uniform(n: usize) -> InitialData<f64> {
        let g = Grid1D::new(1.0, n).unwrap();
        InitialData::from_fields(
            g,
            gas(),
            CellField::constant(n, 1.0),
            NodeField::constant(n + 1, 1.0),
            NodeField::constant(n + 1, 0.0),
            CellField::constant(n, 1.0),
            CellField::constant(n, 1.0),
        )
        .unwrap()
    }

    fn bump(n: usize, l: f64) -> InitialData<f64> {
        let g = Grid1D::new(l, n).unwrap();
        let b = Bump {
            amplitude: 0.5,
            center: 0.0,
            width: 2.0,
        };
        InitialData::power_law(g, gas(), 1.0, 1.5, 1.0, Some(b)).unwrap()
    }

    #[test]
    fn energy_of_rest_state() {
        let d = uniform(8);
        assert_relative_eq!(energy(&LagState::initial(&d), &d), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn odd_velocity_has_zero_momentum() {
        let d = uniform(8);
        let v = d.grid.node_field(|y| y * (1.0 - y * y));
        let d = d.with_velocity(v).unwrap();
        assert!(momentum(&LagState::initial(&d), &d, 0.0).abs() < 1e-15);
        let out = run(
            &d,
            &StepperConfig::new(1e-3),
            &RunOptions::new(0.05, 10, 1.4),
        )
        .unwrap();
        for r in &out.series {
            assert!(r.momentum.abs() < 1e-14, "{}", r.momentum);
        }
    }

    #[test]
    fn c0_examples() {
        let d = bump(200, 10.0);
        let still = InitialData::from_fields(
            d.grid,
            d.gas,
            d.rho0_cell.clone(),
            d.rho0_node.clone(),
            NodeField::constant(201, 0.0),
            CellField::constant(200, 0.0),
            d.j0.clone(),
        )
        .unwrap();
        assert_eq!(j_lower_bound_reference(&still).unwrap(), 1.0);
        assert!(c0_formula(2.0, 1.0, 1.0) < c0_formula(1.0, 1.0, 1.0));
        assert!(c0_formula(1.0, 2.0, 1.0) < c0_formula(1.0, 1.0, 1.0));
        let c0 = j_lower_bound_reference(&d).unwrap();
        assert!(c0 > 0.0 && c0 < 1.0);
        // slow decay: rho0 not integrable on the line
        let g = Grid1D::new(10.0, 200).unwrap();
        let slow = InitialData::power_law(g, gas(), 1.0, 0.8, 1.0, None).unwrap();
        assert!(matches!(
            j_lower_bound_reference(&slow),
            Err(Error::H4NotSatisfied(_))
        ));
    }

    #[test]
    fn analytic_reference_exceeds_truncated_quadrature() {
        let d = bump(2000, 50.0);
        let (e0, rho_l1) = reference_norms(&d);
        let quad_rho = crate::grid::integral(&d.rho0_cell, &d.grid);
        assert!(rho_l1 > quad_rho);
        // the grid misses the two tails beyond |y| = 50, 2 * int_50^inf y^-1.5
        assert_relative_eq!(rho_l1 - quad_rho, 4.0 / 50f64.sqrt(), max_relative = 1e-2);
        assert!(e0 > energy(&LagState::initial(&d), &d));
    }

    #[test]
    fn entropy_and_temperature_of_initial_data() {
        let d = bump(200, 10.0);
        let s = entropy_field(&LagState::initial(&d), &d);
        for x in s.iter() {
            assert_relative_eq!(*x, 1.0, epsilon = 4.0 * f64::EPSILON);
        }
        let u = uniform(4);
        let th = temperature_field(&LagState::initial(&u), &u);
        assert!(th.iter().all(|&x| x == 1.0));
        let mut st = LagState::initial(&u);
        st.pi[1] = 0.0;
        st.pi[2] = -1.0;
        let s = entropy_field(&st, &u);
        assert_eq!(s[1], f64::NEG_INFINITY);
        assert_eq!(s[2], f64::NEG_INFINITY);
    }

    #[test]
    fn entropy_forms_agree() {
        let d = bump(200, 10.0);
        let mut st = LagState::initial(&d);
        for (k, j) in st.j.iter_mut().enumerate() {
            *j = 1.0 + 0.3 * (k as f64 * 0.1).sin();
        }
        let s = entropy_field(&st, &d);
        for k in 0..200 {
            let rho = d.rho0_cell[k] / st.j[k];
            let other = d.gas.cv * (st.pi[k] / (d.gas.a * rho.powf(d.gas.gamma))).ln();
            assert_relative_eq!(s[k], other, epsilon = 1e-13);
        }
    }

    #[test]
    fn weighted_norms_of_constant_state() {
        let d = uniform(8);
        let st = LagState::initial(&d);
        let (a, b) = weighted_flux_norms(&st, &d, 1.4);
        assert_relative_eq!(a, 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(b, 0.0);
        let d = bump(200, 10.0);
        let st = LagState::initial(&d);
        let flux = compute_g(&st, &d);
        let (a0, b0) = weighted_flux_norms(&st, &d, 0.0);
        assert_relative_eq!(a0, l2(&flux, &d.grid), epsilon = 1e-14);
        assert!(b0 > 0.0);
    }

    #[test]
    fn stationary_run_is_constant_and_audits_clean() {
        let d = uniform(16);
        let cfg = StepperConfig {
            bc_mode: BcMode::DirichletV,
            ..StepperConfig::new(0.01)
        };
        let out = run(&d, &cfg, &RunOptions::new(1.0, 10, 1.4)).unwrap();
        let r0 = &out.series[0];
        for r in &out.series {
            assert!((r.energy - r0.energy).abs() <= 1e-12);
            assert!((r.momentum - r0.momentum).abs() <= 1e-12);
            assert!((r.min_j - r0.min_j).abs() <= 1e-12);
            assert!((r.s_min - r0.s_min).abs() <= 1e-12);
            assert!((r.g_l2 - r0.g_l2).abs() <= 1e-12);
        }
        assert_eq!(out.state.t, 1.0);
        let report = audit_trajectory(&out.series, &d, &AuditTolerances::for_config(&cfg));
        assert!(report.all_passed(), "{}", report.render());
        assert_eq!(report.get("energy").unwrap().worst, 0.0);
    }

    #[test]
    fn corrupted_series_fails_only_entropy_and_positivity() {
        let d = bump(400, 10.0);
        let cfg = StepperConfig::new(5e-3);
        let opts = RunOptions::new(0.1, 5, 1.4);
        let out = run(&d, &cfg, &opts).unwrap();
        let tol = AuditTolerances::for_config(&cfg);
        assert!(audit_trajectory(&out.series, &d, &tol).all_passed());

        let mut bad = out.state.clone();
        bad.pi[3] = -1e-14;
        let tracker = Tracker::new(&d, &cfg, &opts);
        let mut series = out.series.clone();
        let mut rec = tracker.record(&bad, None);
        rec.steps = out.steps;
        series.push(rec);
        let rep = audit_trajectory(&series, &d, &tol);
        assert!(!rep.get("entropy_floor").unwrap().passed);
        assert!(!rep.get("positivity").unwrap().passed);
        for name in [
            "energy",
            "momentum",
            "jacobian_floor",
            "weighted_norms",
            "euler_mass",
        ] {
            assert!(rep.get(name).unwrap().passed, "{name}\n{}", rep.render());
        }
    }

    #[test]
    fn energy_drift_halves_with_dt() {
        let d = bump(400, 10.0);
        let drift = |dt: f64| {
            let out = run(
                &d,
                &StepperConfig::new(dt),
                &RunOptions::new(0.5, 1000, 1.4),
            )
            .unwrap();
            let rep = audit_trajectory(
                &out.series,
                &d,
                &AuditTolerances::for_config(&StepperConfig::new(dt)),
            );
            rep.get("energy").unwrap().worst
        };
        let ratio = drift(1e-2) / drift(5e-3);
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn csv_row_has_seventeen_digits() {
        let d = uniform(8);
        let tracker = Tracker::new(&d, &StepperConfig::new(0.1), &RunOptions::new(1.0, 1, 1.0));
        let rec = tracker.record(&LagState::initial(&d), None);
        let row = rec.csv_row();
        assert_eq!(row.split(',').count(), CSV_COLUMNS.len());
        assert!(row.starts_with("0.0000000000000000e0,"));
        assert_eq!(fmt_num(0.1f64), "1.0000000000000001e-1");
    }
}
