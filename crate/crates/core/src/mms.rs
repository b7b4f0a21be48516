//! Manufactured solutions: analytic `(J*, v*, pi*)` with forcing chosen so
//! they solve the forced system exactly, and convergence-order studies of
//! the stepper against them.

use crate::diagnostics::fmt_num;
use crate::error::{Error, Result};
use crate::grid::{l2, sup_norm, CellField, Grid1D, NodeField};
use crate::init::{GasConstants, InitialData};
use crate::scalar::Scalar;
use crate::stepper::{run_observed, BcMode, RunOptions, Source, StepperConfig};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    /// `v* = 0`, `J* = 1`, `pi* = 1`.
    Stationary,
    /// `v* = a e^{-y^2} sin t`, `J* = 1 - 2 a y e^{-y^2} (1 - cos t)`,
    /// `pi* = 1 + 0.1 e^{-y^2/2} sin t`, `a = 0.1`, `rho0 = 1`.
    GaussPulse,
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stationary" => Ok(Self::Stationary),
            "gauss_pulse" => Ok(Self::GaussPulse),
            other => Err(Error::InvalidParameter {
                name: "case",
                reason: format!("unknown manufactured case `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase<T> {
    pub id: CaseId,
    pub gas: GasConstants<T>,
    pub velocity_amplitude: T,
    pub pressure_amplitude: T,
}

pub fn builtin_case<T: Scalar>(id: CaseId, gas: GasConstants<T>) -> ManufacturedCase<T> {
    ManufacturedCase {
        id,
        gas,
        velocity_amplitude: T::lit(0.1),
        pressure_amplitude: T::lit(0.1),
    }
}

/// Pointwise values and first derivatives needed by the forcing.
struct Jet<T> {
    v_t: T,
    v_y: T,
    v_yy: T,
    j: T,
    j_y: T,
    pi: T,
    pi_t: T,
    pi_y: T,
}

impl<T: Scalar> ManufacturedCase<T> {
    pub fn rho0(&self, _y: T) -> T {
        T::one()
    }

    pub fn velocity(&self, y: T, t: T) -> T {
        match self.id {
            CaseId::Stationary => T::zero(),
            CaseId::GaussPulse => self.velocity_amplitude * (-y * y).exp() * t.sin(),
        }
    }

    pub fn jacobian(&self, y: T, t: T) -> T {
        match self.id {
            CaseId::Stationary => T::one(),
            CaseId::GaussPulse => {
                let a = self.velocity_amplitude;
                let two = T::lit(2.0);
                T::one() - a * two * y * (-y * y).exp() * (T::one() - t.cos())
            }
        }
    }

    pub fn pressure(&self, y: T, t: T) -> T {
        match self.id {
            CaseId::Stationary => T::one(),
            CaseId::GaussPulse => {
                T::one() + self.pressure_amplitude * (-y * y / T::lit(2.0)).exp() * t.sin()
            }
        }
    }

    fn jet(&self, y: T, t: T) -> Jet<T> {
        match self.id {
            CaseId::Stationary => Jet {
                v_t: T::zero(),
                v_y: T::zero(),
                v_yy: T::zero(),
                j: T::one(),
                j_y: T::zero(),
                pi: T::one(),
                pi_t: T::zero(),
                pi_y: T::zero(),
            },
            CaseId::GaussPulse => {
                let a = self.velocity_amplitude;
                let b = self.pressure_amplitude;
                let two = T::lit(2.0);
                let gau = (-y * y).exp();
                let g1 = -two * y * gau;
                let g2 = (T::lit(4.0) * y * y - two) * gau;
                let (s, c) = (t.sin(), t.cos());
                let e2 = (-y * y / two).exp();
                Jet {
                    v_t: a * gau * c,
                    v_y: a * g1 * s,
                    v_yy: a * g2 * s,
                    j: T::one() + a * g1 * (T::one() - c),
                    j_y: a * g2 * (T::one() - c),
                    pi: T::one() + b * e2 * s,
                    pi_t: b * e2 * c,
                    pi_y: -b * y * e2 * s,
                }
            }
        }
    }

    /// `f_v = rho0 v*_t - mu (v*_y / J*)_y + pi*_y`.
    pub fn forcing_v(&self, y: T, t: T) -> T {
        let q = self.jet(y, t);
        let strain_y = (q.v_yy * q.j - q.v_y * q.j_y) / (q.j * q.j);
        self.rho0(y) * q.v_t - self.gas.mu * strain_y + q.pi_y
    }

    /// `f_pi = pi*_t + gamma (v*_y / J*) pi* - (gamma - 1) mu (v*_y / J*)^2`.
    pub fn forcing_pi(&self, y: T, t: T) -> T {
        let q = self.jet(y, t);
        let b = q.v_y / q.j;
        let g = self.gas.gamma;
        q.pi_t + g * b * q.pi - (g - T::one()) * self.gas.mu * b * b
    }

    /// Data at `t = 0` sampled on `grid`.
    pub fn initial_data(&self, grid: Grid1D<T>) -> Result<InitialData<T>> {
        let z = T::zero();
        InitialData::from_fields(
            grid,
            self.gas,
            grid.cell_field(|y| self.rho0(y)),
            grid.node_field(|y| self.rho0(y)),
            grid.node_field(|y| self.velocity(y, z)),
            grid.cell_field(|y| self.pressure(y, z)),
            grid.cell_field(|y| self.jacobian(y, z)),
        )
    }
}

impl<T: Scalar> Source<T> for ManufacturedCase<T> {
    fn velocity_forcing(&self, y: T, t: T) -> T {
        self.forcing_v(y, t)
    }

    fn pressure_forcing(&self, y: T, t: T) -> T {
        self.forcing_pi(y, t)
    }

    fn boundary_velocity(&self, y: T, t: T) -> Option<T> {
        Some(self.velocity(y, t))
    }
}

/// Errors of `(J, v, pi)` against the manufactured solution at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTable<T> {
    pub cells: usize,
    pub h: T,
    pub dt: T,
    pub j_l2: T,
    pub v_l2: T,
    pub pi_l2: T,
    pub j_sup: T,
    pub v_sup: T,
    pub pi_sup: T,
}

impl<T: Scalar> ErrorTable<T> {
    /// `sqrt(e_J^2 + e_v^2 + e_pi^2)` in L2.
    pub fn combined(&self) -> T {
        (self.j_l2 * self.j_l2 + self.v_l2 * self.v_l2 + self.pi_l2 * self.pi_l2).sqrt()
    }
}

/// Runs the forced stepper on `grid` to `t_final` and measures the errors.
pub fn run_forced<T: Scalar>(
    case: &ManufacturedCase<T>,
    grid: Grid1D<T>,
    cfg: &StepperConfig<T>,
    t_final: T,
) -> Result<ErrorTable<T>> {
    if cfg.bc_mode != BcMode::DirichletV {
        return Err(Error::InvalidParameter {
            name: "bc_mode",
            reason: "manufactured runs use the Dirichlet velocity closure".into(),
        });
    }
    let d = case.initial_data(grid)?;
    let opts = RunOptions::new(t_final, usize::MAX, T::one());
    let out = run_observed(&d, cfg, &opts, Some(case), |_, _| {}).map_err(|f| f.error)?;
    let s = out.state;
    let t = s.t;
    let ej: CellField<T> = grid.cell_field(|y| case.jacobian(y, t));
    let ev: NodeField<T> = grid.node_field(|y| case.velocity(y, t));
    let ep: CellField<T> = grid.cell_field(|y| case.pressure(y, t));
    let diff = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x - y).collect::<Vec<T>>();
    let dj = diff(&s.j, &ej);
    let dv = diff(&s.v, &ev);
    let dp = diff(&s.pi, &ep);
    Ok(ErrorTable {
        cells: grid.cells(),
        h: grid.h(),
        dt: cfg.dt,
        j_l2: l2(&dj, &grid),
        v_l2: l2(&dv, &grid),
        pi_l2: l2(&dp, &grid),
        j_sup: sup_norm(&dj),
        v_sup: sup_norm(&dv),
        pi_sup: sup_norm(&dp),
    })
}

/// Refinement levels of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPlan<T> {
    pub half_width: T,
    pub t_final: T,
    /// Cell counts of the spatial study, run at `spatial_dt`.
    pub spatial_cells: Vec<usize>,
    pub spatial_dt: T,
    /// Time steps of the temporal study, run on `temporal_cells` cells.
    pub temporal_dts: Vec<T>,
    pub temporal_cells: usize,
}

impl<T: Scalar> StudyPlan<T> {
    /// Dyadic levels `N in {128, 256, 512}` at `dt = 1e-4` and
    /// `dt in {4e-3, 2e-3, 1e-3}` at `N = 1024`, on `[-12, 12]` to `T = 1`.
    /// The box keeps `h` coarse enough that the spatial error of `J` stays
    /// above its time error at `dt = 1e-4`.
    pub fn standard() -> Self {
        Self {
            half_width: T::lit(12.0),
            t_final: T::lit(1.0),
            spatial_cells: vec![128, 256, 512],
            spatial_dt: T::lit(1e-4),
            temporal_dts: vec![T::lit(4e-3), T::lit(2e-3), T::lit(1e-3)],
            temporal_cells: 1024,
        }
    }
}

/// Errors below this are treated as exact.
pub const ERROR_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct AxisReport<T> {
    pub levels: Vec<ErrorTable<T>>,
    /// `log(e_k / e_{k+1}) / log(s_k / s_{k+1})` for consecutive levels, where
    /// `s` is `h` or `dt`; on the combined L2 error.
    pub pair_orders: Vec<f64>,
    /// Least-squares slope of `log e` against `log s`.
    pub slope: f64,
    pub at_floor: bool,
    pub monotone: bool,
}

impl<T: Scalar> AxisReport<T> {
    fn build(levels: Vec<ErrorTable<T>>, scale: impl Fn(&ErrorTable<T>) -> T) -> Self {
        let e: Vec<f64> = levels.iter().map(|l| l.combined().as_f64()).collect();
        let s: Vec<f64> = levels.iter().map(|l| scale(l).as_f64()).collect();
        let at_floor = e.iter().all(|&x| x < ERROR_FLOOR);
        let monotone = e.windows(2).all(|w| w[1] < w[0]);
        let (pair_orders, slope) = if at_floor {
            (vec![f64::NAN; e.len().saturating_sub(1)], f64::NAN)
        } else {
            let pairs = (0..e.len() - 1)
                .map(|k| (e[k] / e[k + 1]).ln() / (s[k] / s[k + 1]).ln())
                .collect();
            (pairs, ls_slope(&s, &e))
        };
        Self {
            levels,
            pair_orders,
            slope,
            at_floor,
            monotone,
        }
    }

    /// Order of the finest pair.
    pub fn finest_order(&self) -> f64 {
        self.pair_orders.last().copied().unwrap_or(f64::NAN)
    }

    /// At the error floor, or the finest pair inside `[lo, hi]`.
    pub fn meets(&self, lo: f64, hi: f64) -> bool {
        self.at_floor || (lo..=hi).contains(&self.finest_order())
    }
}

fn ls_slope(s: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport<T> {
    pub case: CaseId,
    pub spatial: AxisReport<T>,
    pub temporal: AxisReport<T>,
}

impl<T: Scalar> OrderReport<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,level,h,dt,eJ,ev,epi,order\n");
        for (name, axis) in [("space", &self.spatial), ("time", &self.temporal)] {
            for (k, l) in axis.levels.iter().enumerate() {
                let order = if k == 0 {
                    String::new()
                } else {
                    format!("{:.16e}", axis.pair_orders[k - 1])
                };
                out.push_str(&format!(
                    "{name},{k},{},{},{},{},{},{order}\n",
                    fmt_num(l.h),
                    fmt_num(l.dt),
                    fmt_num(l.j_l2),
                    fmt_num(l.v_l2),
                    fmt_num(l.pi_l2)
                ));
            }
        }
        out
    }
}

/// Runs both refinement axes; levels execute in parallel.
pub fn convergence_study<T: Scalar>(
    case: &ManufacturedCase<T>,
    plan: &StudyPlan<T>,
    cfg: &StepperConfig<T>,
) -> Result<OrderReport<T>> {
    if plan.spatial_cells.len() < 3 || plan.temporal_dts.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "levels",
            reason: "a convergence study needs at least three levels per axis".into(),
        });
    }
    let mut jobs: Vec<(usize, T)> = plan
        .spatial_cells
        .iter()
        .map(|&n| (n, plan.spatial_dt))
        .collect();
    jobs.extend(
        plan.temporal_dts
            .iter()
            .map(|&dt| (plan.temporal_cells, dt)),
    );

    let results: Vec<Result<ErrorTable<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(n, dt)| {
                scope.spawn(move || {
                    let grid = Grid1D::new(plan.half_width, n)?;
                    let level_cfg = StepperConfig {
                        dt,
                        dt_min: dt * T::lit(1e-6),
                        bc_mode: BcMode::DirichletV,
                        ..*cfg
                    };
                    run_forced(case, grid, &level_cfg, plan.t_final)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("study level panicked"))
            .collect()
    });
    let mut tables = results.into_iter().collect::<Result<Vec<_>>>()?;
    let temporal = tables.split_off(plan.spatial_cells.len());
    Ok(OrderReport {
        case: case.id,
        spatial: AxisReport::build(tables, |l| l.h),
        temporal: AxisReport::build(temporal, |l| l.dt),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepper::{advance, LagState};
    use approx::assert_relative_eq;

    fn gas() -> GasConstants<f64> {
        GasConstants::new(1.4, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn case_names() {
        assert_eq!("gauss_pulse".parse::<CaseId>().unwrap(), CaseId::GaussPulse);
        assert_eq!("STATIONARY".parse::<CaseId>().unwrap(), CaseId::Stationary);
        assert!("vortex".parse::<CaseId>().is_err());
    }

    #[test]
    fn stationary_case_has_no_forcing() {
        let c = builtin_case(CaseId::Stationary, gas());
        for &(y, t) in &[(0.0, 0.0), (1.3, 0.7), (-2.0, 1.5)] {
            assert_eq!(c.forcing_v(y, t), 0.0);
            assert_eq!(c.forcing_pi(y, t), 0.0);
            assert_eq!(c.jacobian(y, t), 1.0);
        }
    }

    #[test]
    fn gauss_pulse_at_symmetry_point() {
        let c = builtin_case(CaseId::GaussPulse, gas());
        let t = std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(c.velocity(0.0, t), 0.1, epsilon = 1e-15);
        assert_eq!(c.jacobian(0.0, t), 1.0);
    }

    #[test]
    fn gauss_pulse_stays_admissible_on_box() {
        let c = builtin_case(CaseId::GaussPulse, gas());
        for i in 0..=200 {
            for k in 0..=20 {
                let y = -8.0 + 0.08 * i as f64;
                let t = std::f64::consts::FRAC_PI_2 * k as f64 / 20.0;
                assert!(c.jacobian(y, t) > 0.0);
                assert!(c.pressure(y, t) > 0.0);
            }
        }
    }

    /// Forcing rebuilt from central differences of the closed-form fields.
    fn fd_forcing(c: &ManufacturedCase<f64>, y: f64, t: f64) -> (f64, f64) {
        let (hy, ht, hin) = (1e-3, 1e-3, 1e-4);
        // fourth-order central stencil
        let d4 = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| {
            (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
        };
        let dy = d4;
        let strain = |y: f64| dy(&|z| c.velocity(z, t), y, hin) / c.jacobian(y, t);
        let v_t = d4(&|s| c.velocity(y, s), t, ht);
        let pi_t = d4(&|s| c.pressure(y, s), t, ht);
        let strain_y = dy(&strain, y, hy);
        let pi_y = dy(&|z| c.pressure(z, t), y, hin);
        let b = strain(y);
        let (g, mu) = (c.gas.gamma, c.gas.mu);
        (
            v_t - mu * strain_y + pi_y,
            pi_t + g * b * c.pressure(y, t) - (g - 1.0) * mu * b * b,
        )
    }

    #[test]
    fn forcing_matches_finite_differences() {
        let c = builtin_case(CaseId::GaussPulse, gas());
        // deterministic scatter of 100 points in [-3, 3] x [0.05, 1.5]
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let y = -3.0 + 6.0 * next();
            let t = 0.05 + 1.45 * next();
            let (fv, fp) = fd_forcing(&c, y, t);
            let (av, ap) = (c.forcing_v(y, t), c.forcing_pi(y, t));
            assert!(
                (fv - av).abs() <= 1e-6 * av.abs().max(1e-2),
                "f_v at ({y}, {t}): {fv} vs {av}"
            );
            assert!(
                (fp - ap).abs() <= 1e-6 * ap.abs().max(1e-2),
                "f_pi at ({y}, {t}): {fp} vs {ap}"
            );
        }
    }

    struct Zero;
    impl Source<f64> for Zero {
        fn velocity_forcing(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn pressure_forcing(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn zero_forcing_reproduces_unforced_stepper() {
        let g = Grid1D::new(10.0, 200).unwrap();
        let b = crate::init::Bump {
            amplitude: 0.5,
            center: 0.0,
            width: 2.0,
        };
        let d = InitialData::power_law(g, gas(), 1.0, 1.5, 1.0, Some(b)).unwrap();
        let cfg = StepperConfig::new(5e-3);
        let mut a = LagState::initial(&d);
        let mut z = a.clone();
        for _ in 0..20 {
            a = advance(&a, &d, &cfg, cfg.dt, None).unwrap().0;
            z = advance(&z, &d, &cfg, cfg.dt, Some(&Zero)).unwrap().0;
        }
        assert_eq!(a, z);
    }

    #[test]
    fn stationary_errors_at_floor() {
        let c = builtin_case(CaseId::Stationary, gas());
        let cfg = StepperConfig {
            bc_mode: BcMode::DirichletV,
            ..StepperConfig::new(1e-2)
        };
        let e = run_forced(&c, Grid1D::new(4.0, 64).unwrap(), &cfg, 0.2).unwrap();
        assert!(e.combined() < 1e-14);
        let plan = StudyPlan {
            half_width: 4.0,
            t_final: 0.1,
            spatial_cells: vec![16, 32, 64],
            spatial_dt: 1e-2,
            temporal_dts: vec![4e-2, 2e-2, 1e-2],
            temporal_cells: 32,
        };
        let rep = convergence_study(&c, &plan, &cfg).unwrap();
        assert!(rep.spatial.at_floor && rep.temporal.at_floor);
        assert!(rep.spatial.slope.is_nan());
        assert!(rep.spatial.meets(1.8, 2.2));
    }

    #[test]
    fn forced_runs_require_dirichlet_closure() {
        let c = builtin_case(CaseId::GaussPulse, gas());
        let r = run_forced(
            &c,
            Grid1D::new(4.0, 64).unwrap(),
            &StepperConfig::new(1e-2),
            0.1,
        );
        assert!(r.is_err());
        let short = StudyPlan {
            spatial_cells: vec![16, 32],
            ..StudyPlan::standard()
        };
        assert!(convergence_study(&c, &short, &StepperConfig::new(1e-2)).is_err());
    }

    #[test]
    fn coarse_study_shows_expected_orders() {
        let c = builtin_case(CaseId::GaussPulse, gas());
        let plan = StudyPlan {
            half_width: 8.0,
            t_final: 0.2,
            spatial_cells: vec![64, 128, 256],
            spatial_dt: 1e-4,
            temporal_dts: vec![8e-3, 4e-3, 2e-3],
            temporal_cells: 1024,
        };
        let rep = convergence_study(&c, &plan, &StepperConfig::new(1e-3)).unwrap();
        assert!(rep.spatial.monotone && rep.temporal.monotone);
        assert!(rep.spatial.slope > 1.5, "{:?}", rep.spatial.pair_orders);
        assert!(rep.temporal.slope > 0.7, "{:?}", rep.temporal.pair_orders);
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 7);
    }
}
