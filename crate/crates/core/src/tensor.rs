//! Small dense `d×d` matrices (`d ∈ {2, 3}`) with the symmetric/antisymmetric
//! split and the Frobenius inner product used by every stress law.
//!
//! Storage is a fixed 3×3 row-major block; for `d = 2` the third row and
//! column stay zero, so sums and inner products never need to branch on the
//! dimension.

use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::math;

const STRIDE: usize = 3;

/// A real `d×d` matrix with `d` fixed at construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatD {
    dim: usize,
    e: [f64; 9],
}

impl MatD {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim, e: [0.0; 9] })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.e[i * STRIDE + i] = 1.0;
        }
        Ok(m)
    }

    /// Builds a matrix from `dim*dim` row-major entries.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::EntryCount {
                dim,
                got: entries.len(),
            });
        }
        let mut m = Self { dim, e: [0.0; 9] };
        for i in 0..dim {
            for j in 0..dim {
                m.e[i * STRIDE + j] = entries[i * dim + j];
            }
        }
        Ok(m)
    }

    pub const fn from_rows2(rows: [[f64; 2]; 2]) -> Self {
        Self {
            dim: 2,
            e: [
                rows[0][0], rows[0][1], 0.0, //
                rows[1][0], rows[1][1], 0.0, //
                0.0, 0.0, 0.0,
            ],
        }
    }

    pub const fn from_rows3(rows: [[f64; 3]; 3]) -> Self {
        Self {
            dim: 3,
            e: [
                rows[0][0], rows[0][1], rows[0][2], //
                rows[1][0], rows[1][1], rows[1][2], //
                rows[2][0], rows[2][1], rows[2][2],
            ],
        }
    }

    /// The 2D antisymmetric matrix `[[0, w], [-w, 0]]`.
    pub const fn skew2(w: f64) -> Self {
        Self::from_rows2([[0.0, w], [-w, 0.0]])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim, "index ({i}, {j}) out of range");
        self.e[i * STRIDE + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.dim && j < self.dim, "index ({i}, {j}) out of range");
        self.e[i * STRIDE + j] = v;
    }

    /// Row-major entries, `dim*dim` of them.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        let d = self.dim;
        (0..d * d).map(move |k| self.e[(k / d) * STRIDE + k % d])
    }

    pub fn transpose(&self) -> Self {
        let mut t = *self;
        for i in 0..STRIDE {
            for j in 0..STRIDE {
                t.e[i * STRIDE + j] = self.e[j * STRIDE + i];
            }
        }
        t
    }

    /// `½(X + Xᵀ)`
    pub fn sym(&self) -> Self {
        let mut s = *self;
        for i in 0..STRIDE {
            for j in 0..STRIDE {
                s.e[i * STRIDE + j] = 0.5 * (self.e[i * STRIDE + j] + self.e[j * STRIDE + i]);
            }
        }
        s
    }

    /// `½(X − Xᵀ)`
    pub fn skew(&self) -> Self {
        let mut a = *self;
        for i in 0..STRIDE {
            for j in 0..STRIDE {
                a.e[i * STRIDE + j] = 0.5 * (self.e[i * STRIDE + j] - self.e[j * STRIDE + i]);
            }
        }
        a
    }

    /// Returns `(X_s, X_a)` with `X_s + X_a = X`.
    pub fn decompose(&self) -> (Self, Self) {
        (self.sym(), self.skew())
    }

    /// Frobenius inner product `X : Y = Σ X_ij Y_ij`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self.dot(other))
    }

    /// Frobenius inner product without the dimension check.
    #[inline]
    pub(crate) fn dot(&self, other: &Self) -> f64 {
        self.e.iter().zip(other.e.iter()).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        self.sym().norm() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(|v| v.is_finite())
    }

    /// `self + k·other`
    #[inline]
    pub fn add_scaled(&self, k: f64, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut r = *self;
        for (a, b) in r.e.iter_mut().zip(other.e.iter()) {
            *a += k * b;
        }
        r
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidDimension(dim))
    }
}

pub(crate) fn same_dim(a: &MatD, b: &MatD) -> Result<()> {
    if a.dim == b.dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        })
    }
}

impl Add for MatD {
    type Output = MatD;
    fn add(mut self, rhs: MatD) -> MatD {
        self += rhs;
        self
    }
}

impl AddAssign for MatD {
    fn add_assign(&mut self, rhs: MatD) {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        for (a, b) in self.e.iter_mut().zip(rhs.e.iter()) {
            *a += b;
        }
    }
}

impl Sub for MatD {
    type Output = MatD;
    fn sub(mut self, rhs: MatD) -> MatD {
        self -= rhs;
        self
    }
}

impl SubAssign for MatD {
    fn sub_assign(&mut self, rhs: MatD) {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        for (a, b) in self.e.iter_mut().zip(rhs.e.iter()) {
            *a -= b;
        }
    }
}

impl Neg for MatD {
    type Output = MatD;
    fn neg(mut self) -> MatD {
        for a in self.e.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul<f64> for MatD {
    type Output = MatD;
    fn mul(mut self, k: f64) -> MatD {
        for a in self.e.iter_mut() {
            *a *= k;
        }
        self
    }
}

impl Mul<MatD> for f64 {
    type Output = MatD;
    fn mul(self, m: MatD) -> MatD {
        m * self
    }
}
