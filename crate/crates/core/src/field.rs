//! Sampled planar velocity fields on uniform grids.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{npow, pow, sqrt};
use crate::params::{FluidParams, MicroRotation};
use crate::subdiff::{classify_plug, FlowRegime};
use crate::tensor::MatD;

/// Uniform node layout. A 1D profile in `y` is a grid with `nx = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub periodic: bool,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, periodic: bool) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidConfig("grid needs at least one node per axis"));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidConfig("grid spacing must be positive"));
        }
        if !periodic && ny > 1 && ny < 3 || !periodic && nx > 1 && nx < 3 {
            return Err(Error::InvalidConfig("bounded axes need at least three nodes"));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            periodic,
        })
    }

    /// Periodic square grid of `m×m` nodes covering `[0, 2π)²`.
    pub fn torus(m: usize) -> Result<Self> {
        let h = 2.0 * core::f64::consts::PI / m as f64;
        Self::new(m, m, h, h, true)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Quadrature weight of node `(i, j)`: rectangle rule when periodic,
    /// trapezoid rule otherwise. A single-node axis contributes weight 1.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        axis_weight(i, self.nx, self.dx, self.periodic) * axis_weight(j, self.ny, self.dy, self.periodic)
    }
}

fn axis_weight(i: usize, n: usize, h: f64, periodic: bool) -> f64 {
    if n == 1 {
        1.0
    } else if !periodic && (i == 0 || i == n - 1) {
        0.5 * h
    } else {
        h
    }
}

/// Derivative along one axis at index `i` of the samples `f(k)`.
fn axis_derivative(i: usize, n: usize, h: f64, periodic: bool, f: impl Fn(usize) -> f64) -> f64 {
    if n == 1 {
        0.0
    } else if periodic {
        (f((i + 1) % n) - f((i + n - 1) % n)) / (2.0 * h)
    } else if i == 0 {
        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h)
    } else {
        (f(i + 1) - f(i - 1)) / (2.0 * h)
    }
}

/// Velocity samples `(v_x, v_y)` stored row by row (`index = j·nx + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldD {
    grid: Grid,
    values: Vec<[f64; 2]>,
}

impl FieldD {
    pub fn new(grid: Grid, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig("field length does not match the grid"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at `x = i·dx`, `y = j·dy`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(i as f64 * grid.dx, j as f64 * grid.dy));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    /// `∇v` at every node, with `(∇v)_{ab} = ∂v_a/∂x_b`.
    pub fn gradients(&self) -> Vec<MatD> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut m = [[0.0; 2]; 2];
                for (a, row) in m.iter_mut().enumerate() {
                    row[0] = axis_derivative(i, g.nx, g.dx, g.periodic, |k| {
                        self.values[g.index(k, j)][a]
                    });
                    row[1] = axis_derivative(j, g.ny, g.dy, g.periodic, |k| {
                        self.values[g.index(i, k)][a]
                    });
                }
                out.push(MatD::from_rows2(m));
            }
        }
        out
    }

    fn weighted_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                acc += g.weight(i, j) * f(g.index(i, j));
            }
        }
        acc
    }

    /// `‖v‖_{L²}`
    pub fn l2_norm(&self) -> f64 {
        sqrt(self.weighted_sum(|k| {
            let [a, b] = self.values[k];
            a * a + b * b
        }))
    }

    /// `‖∇v‖_{L^p}` and `‖(∇v)_s‖_{L^p}` in one pass over the gradients.
    pub fn gradient_lp_norms(&self, p: f64) -> (f64, f64) {
        let grads = self.gradients();
        let full = self.weighted_sum(|k| npow(grads[k].norm(), p));
        let sym = self.weighted_sum(|k| npow(grads[k].sym().norm(), p));
        (pow(full, 1.0 / p), pow(sym, 1.0 / p))
    }
}

/// Fraction of the domain (by quadrature weight) classified as plug.
pub fn plug_fraction(field: &FieldD, omega: &MicroRotation, prm: &FluidParams, tol: f64) -> Result<f64> {
    let g = field.grid;
    let grads = field.gradients();
    if let Some(n) = omega.len() {
        if n != grads.len() {
            return Err(Error::InvalidConfig("micro-rotation samples do not match the grid"));
        }
    }
    let (mut plug, mut total) = (0.0, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            let w = g.weight(i, j);
            total += w;
            if classify_plug(&grads[k], omega.at(k), prm, tol)? == FlowRegime::Plug {
                plug += w;
            }
        }
    }
    Ok(if total > 0.0 { plug / total } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn linear_shear_gradient_is_exact() {
        let g = Grid::new(1, 11, 1.0, 0.1, false).unwrap();
        let f = FieldD::from_fn(g, |_, y| [3.0 * y, 0.0]);
        for m in f.gradients() {
            assert!((m - MatD::from_rows2([[0.0, 3.0], [0.0, 0.0]])).norm() < 1e-12);
        }
    }

    #[test]
    fn quadratic_profile_edges_are_second_order() {
        let g = Grid::new(1, 21, 1.0, 0.05, false).unwrap();
        let f = FieldD::from_fn(g, |_, y| [y * y, 0.0]);
        let grads = f.gradients();
        assert!((grads[0].get(0, 1)).abs() < 1e-12);
        assert!((grads[20].get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_norms() {
        let g = Grid::torus(64).unwrap();
        let f = FieldD::from_fn(g, |x, _| [x.sin(), 0.0]);
        assert!((f.l2_norm() - (2.0 * PI * PI).sqrt()).abs() < 1e-10);
        let (full, sym) = f.gradient_lp_norms(2.0);
        assert!((full - (2.0 * PI * PI).sqrt()).abs() < 2e-2);
        assert!((full - sym).abs() < 1e-12);
    }

    #[test]
    fn plug_fraction_of_rigid_rotation() {
        let g = Grid::torus(16).unwrap();
        let f = FieldD::from_fn(g, |x, y| [-y, x]);
        let prm = FluidParams::bingham(1.0, 1.0).unwrap();
        let z = MicroRotation::zero(2).unwrap();
        let frac = plug_fraction(&f, &z, &prm, 1e-8).unwrap();
        assert!(frac > 0.0 && frac < 1.0);
        let zero = FieldD::from_fn(g, |_, _| [0.0, 0.0]);
        assert_eq!(plug_fraction(&zero, &z, &prm, 1e-8).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 3, 1.0, 1.0, false).is_err());
        assert!(Grid::new(1, 2, 1.0, 1.0, false).is_err());
        assert!(Grid::new(1, 3, 0.0, 1.0, false).is_err());
        let g = Grid::new(1, 3, 1.0, 1.0, false).unwrap();
        assert!(FieldD::new(g, alloc::vec![[0.0; 2]; 2]).is_err());
    }
}
