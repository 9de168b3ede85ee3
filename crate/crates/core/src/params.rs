use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::MatD;
use crate::tol;

/// Material constants of the stress law.
///
/// Fields are private so the cached scaled yield stress always matches
/// `tau_star` and `nu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    mu1: f64,
    mu2: f64,
    nu: f64,
    tau_star: f64,
    p: f64,
    q: f64,
    a1: f64,
    a2: f64,
    tau_hat: f64,
}

fn require(name: &'static str, value: f64, ok: bool, requirement: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            requirement,
        })
    }
}

impl FluidParams {
    pub fn new(mu1: f64, mu2: f64, nu: f64, tau_star: f64, p: f64, q: f64) -> Result<Self> {
        require("mu1", mu1, mu1 > 0.0, "> 0")?;
        require("mu2", mu2, mu2 >= 0.0, ">= 0")?;
        require("nu", nu, nu >= 0.0, ">= 0")?;
        require("tau_star", tau_star, tau_star >= 0.0, ">= 0")?;
        require("p", p, p >= 2.0, ">= 2")?;
        require("q", q, q >= 2.0, ">= 2")?;
        let tau_hat = tau_star / math::npow(nu, 1.0 / q).max(1.0);
        Ok(Self {
            mu1,
            mu2,
            nu,
            tau_star,
            p,
            q,
            a1: 0.0,
            a2: 0.0,
            tau_hat,
        })
    }

    /// Classical Bingham fluid: `p = q = 2`, `ν = μ₂ = 0`.
    pub fn bingham(mu1: f64, tau_star: f64) -> Result<Self> {
        Self::new(mu1, 0.0, 0.0, tau_star, 2.0, 2.0)
    }

    /// Symmetric Herschel–Bulkley fluid with power index `p`.
    pub fn herschel_bulkley(mu1: f64, tau_star: f64, p: f64) -> Result<Self> {
        Self::new(mu1, 0.0, 0.0, tau_star, p, 2.0)
    }

    /// Offsets used only by the implicit Cosserat–Bingham law.
    pub fn with_offsets(mut self, a1: f64, a2: f64) -> Result<Self> {
        require("a1", a1, a1 >= 0.0, ">= 0")?;
        require("a2", a2, a2 >= 0.0, ">= 0")?;
        self.a1 = a1;
        self.a2 = a2;
        Ok(self)
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn tau_star(&self) -> f64 {
        self.tau_star
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a2(&self) -> f64 {
        self.a2
    }

    /// Yield stress scaled by `max(1, ν^{1/q})`.
    pub fn tau_hat(&self) -> f64 {
        self.tau_hat
    }

    /// Conjugate exponent `q/(q−1)`.
    pub fn q_conj(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    /// Whether the stress law derives from a convex potential.
    pub fn potential_admissible(&self) -> bool {
        self.nu > 0.0 || self.mu2 == 0.0
    }

    pub fn require_potential(&self) -> Result<()> {
        if self.potential_admissible() {
            Ok(())
        } else {
            Err(Error::PotentialUnavailable)
        }
    }
}

/// Check that `omega` is antisymmetric within [`tol::ANTISYMMETRY`].
pub fn check_antisymmetric(omega: &MatD) -> Result<()> {
    let defect = omega.sym().norm();
    if defect <= tol::ANTISYMMETRY && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::NotAntisymmetric { defect })
    }
}

/// The prescribed micro-rotation tensor, constant in space or sampled per
/// grid node. Samples are validated on construction and held fixed in time.
#[derive(Clone, Debug, PartialEq)]
pub enum MicroRotation {
    Constant(MatD),
    Sampled(Vec<MatD>),
}

impl MicroRotation {
    pub fn zero(dim: usize) -> Result<Self> {
        Ok(Self::Constant(MatD::zeros(dim)?))
    }

    pub fn constant(omega: MatD) -> Result<Self> {
        check_antisymmetric(&omega)?;
        Ok(Self::Constant(omega))
    }

    pub fn sampled(values: Vec<MatD>) -> Result<Self> {
        if let Some(first) = values.first() {
            for v in &values {
                crate::tensor::same_dim(first, v)?;
                check_antisymmetric(v)?;
            }
        }
        Ok(Self::Sampled(values))
    }

    /// Value at node `i`; a constant field ignores the index.
    pub fn at(&self, i: usize) -> &MatD {
        match self {
            Self::Constant(m) => m,
            Self::Sampled(v) => &v[i],
        }
    }

    /// Sample count; `None` for a constant field.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> Option<usize> {
        match self {
            Self::Constant(_) => None,
            Self::Sampled(v) => Some(v.len()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Constant(m) => m.norm() == 0.0,
            Self::Sampled(v) => v.iter().all(|m| m.norm() == 0.0),
        }
    }
}
