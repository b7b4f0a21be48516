//! Reconstruction of the Euler-frame fields `(rho, u, p)(x, t)` from a
//! Lagrangian snapshot through the flow map `x = eta(y, t)`, `eta_y = J`.

use crate::diagnostics::fmt_num;
use crate::grid::{CellField, Grid1D, NodeField};
use crate::init::InitialData;
use crate::scalar::Scalar;
use crate::stepper::LagState;

/// Particle positions with the fields they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerSnapshot<T> {
    pub t: T,
    /// Node positions `eta(y_i, t)`.
    pub x: NodeField<T>,
    /// Positions of the moved cell centres.
    pub x_cell: CellField<T>,
    /// Cell widths in the Euler frame, `h J`.
    pub dx: CellField<T>,
    pub rho: CellField<T>,
    pub u: NodeField<T>,
    pub p: CellField<T>,
}

/// `eta(y_0) = anchor`, `eta(y_{i+1}) = eta(y_i) + h J_{i+1/2}`.
///
/// # Panics
/// If the result is not strictly increasing, which requires `J <= 0`.
pub fn flow_map<T: Scalar>(state: &LagState<T>, g: &Grid1D<T>) -> NodeField<T> {
    let mut eta = Vec::with_capacity(g.nodes());
    let mut x = state.anchor;
    eta.push(x);
    for &j in state.j.iter() {
        let next = x + g.h() * j;
        assert!(next > x, "flow map lost monotonicity (J = {j})");
        eta.push(next);
        x = next;
    }
    NodeField(eta)
}

pub fn to_euler<T: Scalar>(state: &LagState<T>, d: &InitialData<T>) -> EulerSnapshot<T> {
    let g = &d.grid;
    let x = flow_map(state, g);
    let half = T::lit(0.5);
    EulerSnapshot {
        t: state.t,
        x_cell: x.windows(2).map(|w| half * (w[0] + w[1])).collect(),
        dx: state.j.iter().map(|&j| g.h() * j).collect(),
        rho: d
            .rho0_cell
            .iter()
            .zip(state.j.iter())
            .map(|(&r, &j)| r / j)
            .collect(),
        u: state.v.clone(),
        p: state.pi.clone(),
        x,
    }
}

/// `sum rho dx` over cells, equal to `h sum rho0` up to rounding.
pub fn euler_mass<T: Scalar>(snap: &EulerSnapshot<T>) -> T {
    snap.rho
        .iter()
        .zip(snap.dx.iter())
        .map(|(&r, &dx)| r * dx)
        .sum()
}

impl<T: Scalar> EulerSnapshot<T> {
    /// Cell-centred CSV: one metadata comment line, a header `x,rho,u,p`,
    /// then one row per cell at its moved centre. `u` is the mean of the two
    /// bounding node velocities.
    pub fn to_csv(&self) -> String {
        let n = self.rho.len();
        let mut out = format!(
            "# t={} cells={} x_left={} x_right={}\nx,rho,u,p\n",
            fmt_num(self.t),
            n,
            fmt_num(self.x[0]),
            fmt_num(self.x[n])
        );
        let half = T::lit(0.5);
        for k in 0..n {
            let u = half * (self.u[k] + self.u[k + 1]);
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_num(self.x_cell[k]),
                fmt_num(self.rho[k]),
                fmt_num(u),
                fmt_num(self.p[k])
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{Bump, GasConstants};
    use crate::stepper::{picard_step, StepperConfig};
    use approx::assert_relative_eq;

    fn data(l: f64, n: usize) -> InitialData<f64> {
        let g = Grid1D::new(l, n).unwrap();
        let gas = GasConstants::new(1.4, 1.0, 1.0, 1.0).unwrap();
        let b = Bump {
            amplitude: 0.5,
            center: 0.0,
            width: (l / 2.0).min(2.0),
        };
        InitialData::power_law(g, gas, 1.0, 1.5, 1.0, Some(b)).unwrap()
    }

    #[test]
    fn identity_map_at_rest() {
        let d = data(4.0, 16);
        let s = LagState::initial(&d);
        let eta = flow_map(&s, &d.grid);
        for (a, b) in eta.iter().zip(d.grid.node_coords().iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_accumulation() {
        let d = data(1.0, 4);
        let mut s = LagState::initial(&d);
        s.j = CellField::constant(4, 2.0);
        let eta = flow_map(&s, &d.grid);
        assert_eq!(eta[0], -1.0);
        assert_eq!(eta[4], 3.0);
        for k in 0..4 {
            assert_eq!((eta[k + 1] - eta[k]) / d.grid.h(), 2.0);
        }
    }

    #[test]
    #[should_panic(expected = "monotonicity")]
    fn non_positive_jacobian_is_rejected() {
        let d = data(1.0, 4);
        let mut s = LagState::initial(&d);
        s.j[2] = 0.0;
        flow_map(&s, &d.grid);
    }

    #[test]
    fn snapshot_of_initial_data() {
        let d = data(4.0, 16);
        let snap = to_euler(&LagState::initial(&d), &d);
        assert_eq!(snap.rho, d.rho0_cell);
        assert_eq!(snap.u, d.v0);
        assert_eq!(snap.p, d.pi0);
        for (a, b) in snap.x_cell.iter().zip(d.grid.cell_coords().iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-14);
        }
        let mass: f64 = d.rho0_cell.iter().sum::<f64>() * d.grid.h();
        assert_relative_eq!(euler_mass(&snap), mass, epsilon = 1e-14);
    }

    #[test]
    fn unit_density_mass() {
        let g = Grid1D::new(1.0, 8).unwrap();
        let gas = GasConstants::new(1.4, 1.0, 1.0, 1.0).unwrap();
        let d = InitialData::power_law(g, gas, 1.0, 0.0, 1.0, None).unwrap();
        assert_relative_eq!(
            euler_mass(&to_euler(&LagState::initial(&d), &d)),
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn stepping_keeps_mass_and_order() {
        let d = data(10.0, 200);
        let cfg = StepperConfig::new(1e-2);
        let mut s = LagState::initial(&d);
        let m0 = euler_mass(&to_euler(&s, &d));
        for _ in 0..100 {
            s = picard_step(&s, &d, &cfg).unwrap().0;
        }
        let snap = to_euler(&s, &d);
        assert!(snap.x.windows(2).all(|w| w[1] > w[0]));
        assert!(snap.rho.min() > 0.0);
        assert!(((euler_mass(&snap) - m0) / m0).abs() < 1e-13);
        assert_eq!(snap.u, s.v);
    }

    #[test]
    fn csv_layout() {
        let d = data(1.0, 4);
        let csv = to_euler(&LagState::initial(&d), &d).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# t="));
        assert_eq!(lines[1], "x,rho,u,p");
        assert_eq!(lines.len(), 6);
        assert!(lines[2..].iter().all(|l| l.split(',').count() == 4));
    }
}
