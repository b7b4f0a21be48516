//! Staggered uniform grid on a truncated line `[-L, L]` and the discrete
//! calculus shared by the stepper and the diagnostics.
//!
//! Velocities live on the `N + 1` nodes `y_i = -L + i h`, thermodynamic
//! quantities on the `N` cell centres `y_{i+1/2} = -L + (i + 1/2) h`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::ops::{Deref, DerefMut};

/// Smallest admissible cell count.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    half_width: T,
    cells: usize,
    h: T,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(half_width: T, cells: usize) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "cell count {cells} is below the minimum of {MIN_CELLS}"
            )));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive and finite, got {half_width}"
            )));
        }
        let h = (half_width + half_width) / T::from_count(cells);
        Ok(Self {
            half_width,
            cells,
            h,
        })
    }

    #[inline]
    pub fn half_width(&self) -> T {
        self.half_width
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    /// Node coordinate `y_i`; the last node is pinned to `+L`.
    #[inline]
    pub fn node(&self, i: usize) -> T {
        if i == self.cells {
            self.half_width
        } else {
            -self.half_width + T::from_count(i) * self.h
        }
    }

    /// Cell-centre coordinate `y_{i+1/2}`.
    #[inline]
    pub fn cell(&self, i: usize) -> T {
        -self.half_width + (T::from_count(i) + T::lit(0.5)) * self.h
    }

    pub fn node_coords(&self) -> NodeField<T> {
        NodeField((0..self.nodes()).map(|i| self.node(i)).collect())
    }

    pub fn cell_coords(&self) -> CellField<T> {
        CellField((0..self.cells).map(|i| self.cell(i)).collect())
    }

    pub fn node_field(&self, f: impl Fn(T) -> T) -> NodeField<T> {
        NodeField((0..self.nodes()).map(|i| f(self.node(i))).collect())
    }

    pub fn cell_field(&self, f: impl Fn(T) -> T) -> CellField<T> {
        CellField((0..self.cells).map(|i| f(self.cell(i))).collect())
    }

    pub fn check_nodes(&self, f: &[T]) -> Result<()> {
        check_len(self.nodes(), f.len())
    }

    pub fn check_cells(&self, f: &[T]) -> Result<()> {
        check_len(self.cells, f.len())
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

macro_rules! field_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name<T>(pub Vec<T>);

        impl<T> Deref for $name<T> {
            type Target = [T];
            fn deref(&self) -> &[T] {
                &self.0
            }
        }

        impl<T> DerefMut for $name<T> {
            fn deref_mut(&mut self) -> &mut [T] {
                &mut self.0
            }
        }

        impl<T> From<Vec<T>> for $name<T> {
            fn from(v: Vec<T>) -> Self {
                Self(v)
            }
        }

        impl<T> FromIterator<T> for $name<T> {
            fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
                Self(iter.into_iter().collect())
            }
        }

        impl<T: Scalar> $name<T> {
            pub fn constant(len: usize, value: T) -> Self {
                Self(vec![value; len])
            }

            pub fn map(&self, f: impl Fn(T) -> T) -> Self {
                self.0.iter().map(|&x| f(x)).collect()
            }

            pub fn min(&self) -> T {
                self.0.iter().copied().fold(T::infinity(), T::min)
            }

            pub fn max(&self) -> T {
                self.0.iter().copied().fold(T::neg_infinity(), T::max)
            }
        }
    };
}

field_newtype!(
    /// Values at the `N + 1` grid nodes (velocity, nodal density, flow map).
    NodeField
);
field_newtype!(
    /// Values at the `N` cell centres (J, pi, density, G, temperature, entropy).
    CellField
);

/// `(v_{i+1} - v_i) / h` on every cell.
pub fn cell_derivative<T: Scalar>(v: &[T], g: &Grid1D<T>) -> Result<CellField<T>> {
    g.check_nodes(v)?;
    let h = g.h();
    Ok(v.windows(2).map(|w| (w[1] - w[0]) / h).collect())
}

/// `(F_{i+1/2} - F_{i-1/2}) / h` on interior nodes `1..N-1`.
///
/// The returned field has `N + 1` entries; the two boundary entries are zero
/// and belong to whatever boundary closure the caller applies.
pub fn node_divergence<T: Scalar>(f: &[T], g: &Grid1D<T>) -> Result<NodeField<T>> {
    g.check_cells(f)?;
    let h = g.h();
    let mut out = vec![T::zero(); g.nodes()];
    for (i, w) in f.windows(2).enumerate() {
        out[i + 1] = (w[1] - w[0]) / h;
    }
    Ok(NodeField(out))
}

/// `sqrt(sum f_k^2 w_k h)`.
pub fn weighted_l2<T: Scalar>(f: &[T], w: &[T], g: &Grid1D<T>) -> Result<T> {
    check_len(f.len(), w.len())?;
    if let Some(k) = w.iter().position(|&x| x < T::zero()) {
        return Err(Error::NegativeWeight(k));
    }
    let sum: T = f.iter().zip(w).map(|(&a, &b)| a * a * b).sum();
    Ok((sum * g.h()).sqrt())
}

/// Unweighted discrete L2 norm `sqrt(h sum f_k^2)`.
pub fn l2<T: Scalar>(f: &[T], g: &Grid1D<T>) -> T {
    let sum: T = f.iter().map(|&a| a * a).sum();
    (sum * g.h()).sqrt()
}

pub fn sup_norm<T: Scalar>(f: &[T]) -> T {
    f.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Discrete L1 integral `h sum f_k`.
pub fn integral<T: Scalar>(f: &[T], g: &Grid1D<T>) -> T {
    f.iter().copied().sum::<T>() * g.h()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn small_grid_coordinates() {
        let g = Grid1D::new(1.0, 4).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.node_coords().0, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.cell_coords().0, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.nodes(), 5);
    }

    #[test]
    fn spacing_for_flagship_grid() {
        let g = Grid1D::new(50.0, 2000).unwrap();
        assert_eq!(g.h(), 0.05);
        assert_eq!(g.node(0), -50.0);
        assert_eq!(g.node(2000), 50.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(Grid1D::new(1.0, 3), Err(Error::InvalidGrid(_))));
        assert!(Grid1D::new(0.0, 8).is_err());
        assert!(Grid1D::new(-1.0, 8).is_err());
        assert!(Grid1D::<f64>::new(f64::NAN, 8).is_err());
    }

    #[test]
    fn derivative_of_constant_and_affine() {
        let g = Grid1D::new(1.0, 4).unwrap();
        let c = cell_derivative(&[3.0; 5], &g).unwrap();
        assert!(c.iter().all(|&x| x == 0.0));
        let d = cell_derivative(&g.node_coords(), &g).unwrap();
        for x in d.iter() {
            assert_relative_eq!(*x, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivative_of_quadratic_is_midpoint_exact() {
        let g = Grid1D::new(1.0, 4).unwrap();
        let v = g.node_field(|y| y * y);
        let d = cell_derivative(&v, &g).unwrap();
        for (i, x) in d.iter().enumerate() {
            assert_relative_eq!(*x, 2.0 * g.cell(i), epsilon = 1e-15);
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let g = Grid1D::new(1.0, 4).unwrap();
        assert_eq!(
            cell_derivative(&[0.0; 4], &g),
            Err(Error::SizeMismatch {
                expected: 5,
                got: 4
            })
        );
        assert!(node_divergence(&[0.0; 5], &g).is_err());
    }

    #[test]
    fn divergence_of_constant_and_affine() {
        let g = Grid1D::new(1.0, 4).unwrap();
        let z = node_divergence(&[2.0; 4], &g).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
        let one = node_divergence(&g.cell_coords(), &g).unwrap();
        for x in &one[1..4] {
            assert_relative_eq!(*x, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let g = Grid1D::new(1.0, 4).unwrap();
        assert_eq!(weighted_l2(&[0.0; 4], &[1.0; 4], &g).unwrap(), 0.0);
        assert_relative_eq!(
            weighted_l2(&[1.0; 4], &[1.0; 4], &g).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        let rho = [0.5, 1.0, 2.0, 0.25];
        assert_relative_eq!(
            weighted_l2(&[1.0; 4], &rho, &g).unwrap(),
            integral(&rho, &g).sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(
            weighted_l2(&[1.0; 4], &[1.0, -1.0, 1.0, 1.0], &g),
            Err(Error::NegativeWeight(1))
        );
        assert_eq!(sup_norm(&[1.0, -3.0, 2.0]), 3.0);
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid1D::<f32>::new(1.0, 4).unwrap();
        let d = cell_derivative(&g.node_coords(), &g).unwrap();
        assert!(d.iter().all(|&x| (x - 1.0).abs() < 1e-6));
    }

    proptest! {
        #[test]
        fn affine_fields_are_differentiated_exactly(
            a in -10.0f64..10.0, b in -10.0f64..10.0, n in 4usize..200, l in 0.1f64..100.0
        ) {
            let g = Grid1D::new(l, n).unwrap();
            let v = g.node_field(|y| a * y + b);
            let d = cell_derivative(&v, &g).unwrap();
            let tol = 1e-12 * (1.0 + a.abs() + b.abs() / g.h());
            prop_assert!(d.iter().all(|&x| (x - a).abs() <= tol));
            let f = g.cell_field(|y| a * y + b);
            let div = node_divergence(&f, &g).unwrap();
            prop_assert!(div[1..n].iter().all(|&x| (x - a).abs() <= tol));
        }

        #[test]
        fn divergence_telescopes(vals in proptest::collection::vec(-5.0f64..5.0, 4..64)) {
            let n = vals.len();
            let g = Grid1D::new(1.0, n).unwrap();
            let div = node_divergence(&vals, &g).unwrap();
            let sum: f64 = div[1..n].iter().sum::<f64>() * g.h();
            prop_assert!((sum - (vals[n - 1] - vals[0])).abs() <= 1e-12 * (1.0 + n as f64));
        }

        #[test]
        fn weighted_norm_is_monotone(
            f in proptest::collection::vec(-5.0f64..5.0, 8),
            scale in 1.0f64..3.0,
        ) {
            let g = Grid1D::new(1.0, 8).unwrap();
            let ones = [1.0; 8];
            let big: Vec<f64> = f.iter().map(|x| x * scale).collect();
            let a = weighted_l2(&f, &ones, &g).unwrap();
            prop_assert!((a - l2(&f, &g)).abs() <= 1e-14 * (1.0 + a));
            prop_assert!(weighted_l2(&big, &ones, &g).unwrap() >= a);
        }
    }
}
