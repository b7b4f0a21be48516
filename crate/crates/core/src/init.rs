//! Initial-data families, the data hypotheses (H1)-(H4) and regime
//! classification.
//!
//! The power-law family is `rho0(y) = K / <y>^l` with `<y> = sqrt(1 + y^2)`,
//! isentropic pressure `pi0 = A exp(s0 / c_v) rho0^gamma` and a smooth
//! compactly supported velocity bump. Integral hypotheses are evaluated both
//! on the truncated grid and, when family metadata is present, on the whole
//! line through closed forms.

use crate::error::{Error, Result};
use crate::grid::{cell_derivative, integral, l2, weighted_l2, CellField, Grid1D, NodeField};
use crate::scalar::Scalar;

/// Ideal polytropic gas constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasConstants<T> {
    pub gamma: T,
    pub mu: T,
    /// Stored as `c_v * (gamma - 1)` so the state relation holds exactly.
    pub r: T,
    pub cv: T,
    /// Constant in `p = A exp(s / c_v) rho^gamma`.
    pub a: T,
}

impl<T: Scalar> GasConstants<T> {
    pub fn new(gamma: T, mu: T, r: T, a: T) -> Result<Self> {
        if !(gamma > T::one()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must exceed 1, got {gamma}"),
            });
        }
        positive("mu", mu)?;
        positive("R", r)?;
        positive("A", a)?;
        let cv = r / (gamma - T::one());
        Ok(Self {
            gamma,
            mu,
            r: cv * (gamma - T::one()),
            cv,
            a,
        })
    }
}

fn positive<T: Scalar>(name: &'static str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {x}"),
        })
    }
}

/// Standard mollifier bump `a exp(1 - 1 / (1 - r^2))`, `r = (y - c) / w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump<T> {
    pub amplitude: T,
    pub center: T,
    pub width: T,
}

impl<T: Scalar> Bump<T> {
    pub fn eval(&self, y: T) -> T {
        let r = (y - self.center) / self.width;
        let q = T::one() - r * r;
        if q <= T::zero() {
            T::zero()
        } else {
            self.amplitude * (T::one() - q.recip()).exp()
        }
    }
}

/// Closed-form description of data generated from the power-law family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMeta<T> {
    pub k_rho: T,
    pub ell_rho: T,
    /// Uniform initial entropy; `None` when pi0 was supplied as a raw field.
    pub s0: Option<T>,
    /// Velocity bump; `None` when v0 was supplied as a raw field.
    pub bump: Option<Bump<T>>,
}

impl<T: Scalar> FamilyMeta<T> {
    pub fn rho0(&self, y: T) -> T {
        self.k_rho / (T::one() + y * y).powf(self.ell_rho / T::lit(2.0))
    }
}

/// Initial data `(rho0, v0, pi0, J0)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData<T> {
    pub grid: Grid1D<T>,
    pub rho0_cell: CellField<T>,
    pub rho0_node: NodeField<T>,
    pub v0: NodeField<T>,
    pub pi0: CellField<T>,
    pub j0: CellField<T>,
    pub gas: GasConstants<T>,
    pub family: Option<FamilyMeta<T>>,
}

impl<T: Scalar> InitialData<T> {
    /// Power-law density, isentropic pressure with entropy `s0`, `J0 = 1`,
    /// and either a bump velocity or `v0 = 0`.
    pub fn power_law(
        grid: Grid1D<T>,
        gas: GasConstants<T>,
        k_rho: T,
        ell_rho: T,
        s0: T,
        bump: Option<Bump<T>>,
    ) -> Result<Self> {
        let (rho0_cell, rho0_node) = power_law_density(k_rho, ell_rho, &grid)?;
        let pi0 = isentropic_pressure(&rho0_cell, s0, &gas)?;
        let v0 = match bump {
            Some(b) => bump_velocity(b.amplitude, b.center, b.width, &grid)?,
            None => NodeField::constant(grid.nodes(), T::zero()),
        };
        Ok(Self {
            j0: CellField::constant(grid.cells(), T::one()),
            grid,
            rho0_cell,
            rho0_node,
            v0,
            pi0,
            gas,
            family: Some(FamilyMeta {
                k_rho,
                ell_rho,
                s0: Some(s0),
                bump,
            }),
        })
    }

    /// Raw fields with no family metadata.
    pub fn from_fields(
        grid: Grid1D<T>,
        gas: GasConstants<T>,
        rho0_cell: CellField<T>,
        rho0_node: NodeField<T>,
        v0: NodeField<T>,
        pi0: CellField<T>,
        j0: CellField<T>,
    ) -> Result<Self> {
        let d = Self {
            grid,
            rho0_cell,
            rho0_node,
            v0,
            pi0,
            j0,
            gas,
            family: None,
        };
        d.check()?;
        Ok(d)
    }

    /// Validates layout and the pointwise invariants (rho0 > 0, pi0 >= 0,
    /// J0 bounded away from zero).
    pub fn check(&self) -> Result<()> {
        let g = &self.grid;
        g.check_cells(&self.rho0_cell)?;
        g.check_nodes(&self.rho0_node)?;
        g.check_nodes(&self.v0)?;
        g.check_cells(&self.pi0)?;
        g.check_cells(&self.j0)?;
        if !(self.rho0_cell.min() > T::zero() && self.rho0_node.min() > T::zero()) {
            return Err(invalid("rho0", "must be strictly positive on the grid"));
        }
        if !(self.pi0.min() >= T::zero()) {
            return Err(invalid("pi0", "must be nonnegative"));
        }
        if !(self.j0.min() > T::zero()) || !self.j0.max().is_finite() {
            return Err(invalid("J0", "must have positive finite bounds"));
        }
        if self.v0.iter().any(|x| !x.is_finite()) {
            return Err(invalid("v0", "must be finite"));
        }
        Ok(())
    }

    /// Replaces the velocity, dropping bump metadata.
    pub fn with_velocity(mut self, v0: NodeField<T>) -> Result<Self> {
        self.grid.check_nodes(&v0)?;
        self.v0 = v0;
        if let Some(f) = self.family.as_mut() {
            f.bump = None;
        }
        Ok(self)
    }

    /// Replaces the pressure, dropping the entropy metadata.
    pub fn with_pressure(mut self, pi0: CellField<T>) -> Result<Self> {
        self.grid.check_cells(&pi0)?;
        self.pi0 = pi0;
        if let Some(f) = self.family.as_mut() {
            f.s0 = None;
        }
        self.check()?;
        Ok(self)
    }

    /// Initial effective viscous flux `G0 = mu v0' / J0 - pi0`.
    pub fn g0(&self) -> CellField<T> {
        let dv = cell_derivative(&self.v0, &self.grid).expect("checked layout");
        dv.iter()
            .zip(self.j0.iter())
            .zip(self.pi0.iter())
            .map(|((&d, &j), &p)| self.gas.mu * d / j - p)
            .collect()
    }
}

fn invalid(name: &'static str, reason: &str) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.to_string(),
    }
}

/// Samples `K / <y>^l` at cells and nodes.
pub fn power_law_density<T: Scalar>(
    k_rho: T,
    ell_rho: T,
    g: &Grid1D<T>,
) -> Result<(CellField<T>, NodeField<T>)> {
    positive("K_rho", k_rho)?;
    if !(ell_rho >= T::zero()) || !ell_rho.is_finite() {
        return Err(invalid("ell_rho", "must be nonnegative and finite"));
    }
    let half = ell_rho / T::lit(2.0);
    let f = |y: T| k_rho / (T::one() + y * y).powf(half);
    Ok((g.cell_field(f), g.node_field(f)))
}

/// `A exp(s0 / c_v) rho0^gamma` pointwise.
pub fn isentropic_pressure<T: Scalar>(
    rho0: &[T],
    s0: T,
    gas: &GasConstants<T>,
) -> Result<CellField<T>> {
    if let Some(k) = rho0.iter().position(|&r| !(r > T::zero())) {
        return Err(Error::InvalidParameter {
            name: "rho0",
            reason: format!("must be positive, entry {k} is {}", rho0[k]),
        });
    }
    let scale = gas.a * (s0 / gas.cv).exp();
    Ok(rho0.iter().map(|&r| scale * r.powf(gas.gamma)).collect())
}

pub fn bump_velocity<T: Scalar>(
    amplitude: T,
    center: T,
    width: T,
    g: &Grid1D<T>,
) -> Result<NodeField<T>> {
    positive("bump_width", width)?;
    let (lo, hi) = (center - width, center + width);
    let l = g.half_width();
    if !(lo > -l && hi < l) {
        return Err(Error::SupportOutsideDomain {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            half_width: l.as_f64(),
        });
    }
    let b = Bump {
        amplitude,
        center,
        width,
    };
    Ok(g.node_field(|y| b.eval(y)))
}

/// Whole-line decay constant `K0 = 2 sup |(1/sqrt(rho0))'|` for the power-law
/// family; `+inf` when `l > 2`.
pub fn k0_power_law<T: Scalar>(k_rho: T, ell_rho: T) -> T {
    let two = T::lit(2.0);
    if ell_rho > two {
        return T::infinity();
    }
    if ell_rho == T::zero() {
        return T::zero();
    }
    // (1/sqrt rho0)' = (l/2) y <y>^{l/2-2} / sqrt(K); the profile
    // y (1+y^2)^{l/4-1} peaks at y^2 = 1/(1-l/2), or at infinity when l = 2.
    let sup = if ell_rho == two {
        T::one()
    } else {
        let ys2 = (T::one() - ell_rho / two).recip();
        ys2.sqrt() * (T::one() + ys2).powf(ell_rho / T::lit(4.0) - T::one())
    };
    ell_rho * sup / k_rho.sqrt()
}

/// Discrete `K0`: twice the largest difference quotient of `1/sqrt(rho0)`
/// between adjacent cells.
pub fn k0_discrete<T: Scalar>(rho0_cell: &[T], g: &Grid1D<T>) -> T {
    let two = T::lit(2.0);
    rho0_cell
        .windows(2)
        .map(|w| (w[1].sqrt().recip() - w[0].sqrt().recip()).abs() / g.h())
        .fold(T::zero(), T::max)
        * two
}

/// `int_R <y>^{-p} dy`, infinite when `p <= 1`.
pub fn power_law_integral<T: Scalar>(p: T) -> T {
    if !(p > T::one()) {
        return T::infinity();
    }
    let p = p.as_f64();
    let ln = statrs::function::gamma::ln_gamma((p - 1.0) / 2.0)
        - statrs::function::gamma::ln_gamma(p / 2.0);
    T::lit(std::f64::consts::PI.sqrt() * ln.exp())
}

/// Whole-line `||rho0||_1`.
pub fn analytic_rho0_l1<T: Scalar>(meta: &FamilyMeta<T>) -> T {
    meta.k_rho * power_law_integral(meta.ell_rho)
}

/// Whole-line `||pi0||_1` for isentropic data.
pub fn analytic_pi0_l1<T: Scalar>(meta: &FamilyMeta<T>, gas: &GasConstants<T>) -> Option<T> {
    let s0 = meta.s0?;
    let scale = gas.a * (s0 / gas.cv).exp() * meta.k_rho.powf(gas.gamma);
    Some(scale * power_law_integral(meta.ell_rho * gas.gamma))
}

/// `int rho0 v0^2 / 2` over the bump support by composite Simpson.
pub fn analytic_kinetic_energy<T: Scalar>(meta: &FamilyMeta<T>) -> Option<T> {
    let b = meta.bump?;
    let panels = 4096usize;
    let lo = b.center - b.width;
    let step = (b.width + b.width) / T::from_count(panels);
    let f = |y: T| {
        let v = b.eval(y);
        T::lit(0.5) * meta.rho0(y) * v * v
    };
    let mut acc = f(lo) + f(lo + step * T::from_count(panels));
    for i in 1..panels {
        let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        acc = acc + w * f(lo + step * T::from_count(i));
    }
    Some(acc * step / T::lit(3.0))
}

/// Regime tags for power-law isentropic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeTags {
    pub local_delta1: bool,
    pub local_delta_gamma: bool,
    pub global_delta1: bool,
    pub global_delta_gamma: bool,
}

/// Whole-line hypothesis analysis for power-law metadata. Integrability of
/// each power-law tail is stored as an exponent margin: the integral is
/// finite iff the margin is strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticHypotheses<T> {
    pub k0: T,
    /// `inf rho0 (1 + |y|)^2`; zero when `l > 2`.
    pub a0: T,
    pub rho_bar: T,
    pub rho0_l1: T,
    pub pi0_l1: Option<T>,
    /// `2 l gamma - 1`: pi0 in L2.
    pub pi0_l2_margin: T,
    /// `l (2 gamma - delta) - 1`: rho0^{-delta/2} G0 in L2.
    pub g0_weighted_margin: T,
    /// `l - 1`: rho0 in L1.
    pub rho0_l1_margin: T,
    /// `l gamma - 1`: pi0 in L1.
    pub pi0_l1_margin: T,
    pub tags: Option<RegimeTags>,
}

/// Hypothesis report: booleans and the margins they are derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport<T> {
    pub delta: T,
    pub h1_ok: bool,
    pub h2_ok: bool,
    pub h3_ok: bool,
    pub h4_ok: bool,
    pub rho0_max: T,
    pub rho0_min: T,
    pub pi0_min: T,
    pub j0_min: T,
    pub j0_max: T,
    pub sqrt_rho_v0_l2: T,
    pub dv0_l2: T,
    pub pi0_l2: T,
    pub dpi0_weighted_l2: T,
    /// Discrete `K0` on the grid.
    pub k0_discrete: T,
    /// Discrete `||rho0^{-delta/2} G0||_2`.
    pub g0_weighted_l2: T,
    pub rho0_l1: T,
    pub pi0_l1: T,
    /// Discrete `min rho0 (1 + |y|)^2`.
    pub a0_discrete: T,
    pub analytic: Option<AnalyticHypotheses<T>>,
}

impl<T: Scalar> HypothesisReport<T> {
    pub fn all_ok(&self) -> bool {
        self.h1_ok && self.h2_ok && self.h3_ok && self.h4_ok
    }

    /// `K0` reported for H3: analytic when available.
    pub fn k0(&self) -> T {
        self.analytic.map_or(self.k0_discrete, |a| a.k0)
    }

    pub fn tags(&self) -> Option<RegimeTags> {
        self.analytic.and_then(|a| a.tags)
    }
}

fn analytic_hypotheses<T: Scalar>(
    meta: &FamilyMeta<T>,
    gas: &GasConstants<T>,
    delta: T,
) -> AnalyticHypotheses<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let l = meta.ell_rho;
    let g = gas.gamma;
    let k0 = k0_power_law(meta.k_rho, l);
    let a0 = if l <= two { meta.k_rho } else { T::zero() };
    let pi0_l2_margin = two * l * g - one;
    let g0_margin = |d: T| l * (two * g - d) - one;
    let rho0_l1_margin = l - one;
    let pi0_l1_margin = l * g - one;

    let h1 = true;
    let h2 = pi0_l2_margin > T::zero();
    let h3 = |d: T| k0.is_finite() && g0_margin(d) > T::zero();
    let h4 = rho0_l1_margin > T::zero() && pi0_l1_margin > T::zero() && a0 > T::zero();
    let tags = meta.s0.map(|_| RegimeTags {
        local_delta1: h1 && h2 && h3(one),
        local_delta_gamma: h1 && h2 && h3(g),
        global_delta1: h1 && h2 && h3(one) && h4,
        global_delta_gamma: h1 && h2 && h3(g) && h4,
    });
    AnalyticHypotheses {
        k0,
        a0,
        rho_bar: meta.k_rho,
        rho0_l1: analytic_rho0_l1(meta),
        pi0_l1: analytic_pi0_l1(meta, gas),
        pi0_l2_margin,
        g0_weighted_margin: g0_margin(delta),
        rho0_l1_margin,
        pi0_l1_margin,
        tags,
    }
}

/// Checks (H1)-(H4) for weight exponent `delta`. Failures are report entries.
pub fn validate_hypotheses<T: Scalar>(d: &InitialData<T>, delta: T) -> HypothesisReport<T> {
    let g = &d.grid;
    let rho_v2: Vec<T> =
        d.v0.iter()
            .zip(d.rho0_node.iter())
            .map(|(&v, &r)| r * v * v)
            .collect();
    let sqrt_rho_v0_l2 = integral(&rho_v2, g).sqrt();
    let dv0 = cell_derivative(&d.v0, g).expect("checked layout");
    let dv0_l2 = l2(&dv0, g);
    let pi0_l2 = l2(&d.pi0, g);
    // pi0' / sqrt(rho0) at interior nodes.
    let dpi0: Vec<T> = d
        .pi0
        .windows(2)
        .enumerate()
        .map(|(i, w)| (w[1] - w[0]) / g.h() / d.rho0_node[i + 1].sqrt())
        .collect();
    let dpi0_weighted_l2 = l2(&dpi0, g);
    let k0_disc = k0_discrete(&d.rho0_cell, g);
    let weights: Vec<T> = d.rho0_cell.iter().map(|&r| r.powf(-delta)).collect();
    let g0 = d.g0();
    let g0_weighted_l2 = weighted_l2(&g0, &weights, g).unwrap_or(T::infinity());
    let rho0_l1 = integral(&d.rho0_cell, g);
    let pi0_l1 = integral(&d.pi0, g);
    let a0_discrete = d
        .rho0_cell
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let s = T::one() + g.cell(i).abs();
            r * s * s
        })
        .fold(T::infinity(), T::min);

    let rho0_max = d.rho0_cell.max().max(d.rho0_node.max());
    let rho0_min = d.rho0_cell.min().min(d.rho0_node.min());
    let pi0_min = d.pi0.min();
    let analytic = d
        .family
        .as_ref()
        .map(|m| analytic_hypotheses(m, &d.gas, delta));

    let finite = |x: T| x.is_finite();
    let disc_h1 = rho0_min > T::zero() && finite(rho0_max);
    let disc_h2 = pi0_min >= T::zero()
        && finite(sqrt_rho_v0_l2)
        && finite(dv0_l2)
        && finite(pi0_l2)
        && finite(dpi0_weighted_l2);
    let disc_h3 = finite(k0_disc) && finite(g0_weighted_l2);
    let disc_h4 = finite(rho0_l1) && finite(pi0_l1) && a0_discrete > T::zero();

    let (h1_ok, h2_ok, h3_ok, h4_ok) = match analytic {
        Some(a) => (
            disc_h1,
            disc_h2 && a.pi0_l2_margin > T::zero(),
            disc_h3 && a.k0.is_finite() && a.g0_weighted_margin > T::zero(),
            disc_h4
                && a.rho0_l1_margin > T::zero()
                && a.pi0_l1_margin > T::zero()
                && a.a0 > T::zero(),
        ),
        None => (disc_h1, disc_h2, disc_h3, disc_h4),
    };

    HypothesisReport {
        delta,
        h1_ok,
        h2_ok,
        h3_ok,
        h4_ok,
        rho0_max,
        rho0_min,
        pi0_min,
        j0_min: d.j0.min(),
        j0_max: d.j0.max(),
        sqrt_rho_v0_l2,
        dv0_l2,
        pi0_l2,
        dpi0_weighted_l2,
        k0_discrete: k0_disc,
        g0_weighted_l2,
        rho0_l1,
        pi0_l1,
        a0_discrete,
        analytic,
    }
}
