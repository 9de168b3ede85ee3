//! Pointwise stress laws and their convex potentials.
//!
//! Every routine takes the velocity gradient `X`, the micro-rotation `Ω`
//! and the material constants. `X` is split as `X_s + X_a` and the
//! rotational mismatch is `R = X_a − Ω`.

use crate::error::{Error, Result};
use crate::math::{npow, pow, sqrt};
use crate::params::{check_antisymmetric, FluidParams};
use crate::tensor::{same_dim, MatD};

/// Symmetric part and rotational mismatch of a gradient, with their norms.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Split {
    pub xs: MatD,
    pub r: MatD,
    pub ns: f64,
    pub nr: f64,
}

impl Split {
    pub fn new(x: &MatD, omega: &MatD) -> Result<Self> {
        same_dim(x, omega)?;
        check_antisymmetric(omega)?;
        Ok(Self::from_parts(x.sym(), x.skew() - *omega))
    }

    pub fn from_parts(xs: MatD, r: MatD) -> Self {
        Self {
            ns: xs.norm(),
            nr: r.norm(),
            xs,
            r,
        }
    }

    /// `X_s + ν R`
    pub fn flow_criterion(&self, nu: f64) -> MatD {
        self.xs.add_scaled(nu, &self.r)
    }

    /// `μ₁|X_s|^{p−2}X_s + μ₂|R|^{p−2}R`
    pub fn viscous(&self, prm: &FluidParams) -> MatD {
        let e = prm.p() - 2.0;
        self.xs * (prm.mu1() * npow(self.ns, e)) + self.r * (prm.mu2() * npow(self.nr, e))
    }

    /// `|X_s|^{q−2}X_s + ν|R|^{q−2}R`
    pub fn plastic(&self, prm: &FluidParams) -> MatD {
        let e = prm.q() - 2.0;
        self.xs * npow(self.ns, e) + self.r * (prm.nu() * npow(self.nr, e))
    }

    /// `|X_s|^q + ν|R|^q`
    pub fn plastic_weight(&self, prm: &FluidParams) -> f64 {
        npow(self.ns, prm.q()) + prm.nu() * npow(self.nr, prm.q())
    }

    /// `(μ₁/p)|X_s|^p + (μ₂/p)|R|^p`
    pub fn viscous_potential(&self, prm: &FluidParams) -> f64 {
        let p = prm.p();
        (prm.mu1() * npow(self.ns, p) + prm.mu2() * npow(self.nr, p)) / p
    }

    /// The modified plastic operator evaluated on a rescaled copy, so that
    /// tiny and huge arguments keep full relative precision.
    pub fn modified_plastic(&self, prm: &FluidParams) -> Option<MatD> {
        let scale = self.ns.max(if prm.nu() > 0.0 { self.nr } else { 0.0 });
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        let unit = Split {
            xs: self.xs * (1.0 / scale),
            r: self.r * (1.0 / scale),
            ns: self.ns / scale,
            nr: self.nr / scale,
        };
        let w = unit.plastic_weight(prm);
        if w <= 0.0 {
            return None;
        }
        Some(unit.plastic(prm) * pow(w, -(prm.q() - 1.0) / prm.q()))
    }
}

/// The four auxiliary tensors built from a gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildingBlocks {
    /// `μ₁|X_s|^{p−2}X_s + μ₂|R|^{p−2}R`
    pub viscous: MatD,
    /// `|X_s|^{q−2}X_s + ν|R|^{q−2}R`
    pub plastic: MatD,
    /// `|X_s|^{(q−2)/2}X_s + √ν|R|^{(q−2)/2}R`; its squared norm is
    /// `|X_s|^q + ν|R|^q`.
    pub plastic_root: MatD,
    /// `X_s + ν R`; vanishes exactly on the plug set.
    pub criterion: MatD,
}

pub fn building_blocks(x: &MatD, omega: &MatD, prm: &FluidParams) -> Result<BuildingBlocks> {
    let s = Split::new(x, omega)?;
    let h = 0.5 * (prm.q() - 2.0);
    Ok(BuildingBlocks {
        viscous: s.viscous(prm),
        plastic: s.plastic(prm),
        plastic_root: s.xs * npow(s.ns, h) + s.r * (sqrt(prm.nu()) * npow(s.nr, h)),
        criterion: s.flow_criterion(prm.nu()),
    })
}

/// Outcome of the exact (set-valued at the plug) stress law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StressResult {
    Flow(MatD),
    /// Only `|S| ≤ bound` is known, with `bound = τ*`.
    Plug { bound: f64 },
}

impl StressResult {
    pub fn is_plug(&self) -> bool {
        matches!(self, StressResult::Plug { .. })
    }

    pub fn flow(&self) -> Option<&MatD> {
        match self {
            StressResult::Flow(s) => Some(s),
            StressResult::Plug { .. } => None,
        }
    }
}

/// `V(X) = U(X) + τ̂ W(X)` with `W = (|X_s|^q + ν|R|^q)^{1/q}`.
pub fn potential_v(x: &MatD, omega: &MatD, prm: &FluidParams) -> Result<f64> {
    prm.require_potential()?;
    let s = Split::new(x, omega)?;
    Ok(s.viscous_potential(prm) + prm.tau_hat() * npow(s.plastic_weight(prm), 1.0 / prm.q()))
}

/// `Vⁿ(X) = U(X) + τ̂ (|X_s|^q + ν|R|^q + 1/n)^{1/q}`
pub fn potential_vn(x: &MatD, omega: &MatD, prm: &FluidParams, n: u64) -> Result<f64> {
    prm.require_potential()?;
    let eps = inv_n(n)?;
    let s = Split::new(x, omega)?;
    Ok(s.viscous_potential(prm) + prm.tau_hat() * pow(s.plastic_weight(prm) + eps, 1.0 / prm.q()))
}

/// Gradient of `V` away from the plug set.
pub fn grad_v(x: &MatD, omega: &MatD, prm: &FluidParams, tol_plug: f64) -> Result<MatD> {
    prm.require_potential()?;
    let s = Split::new(x, omega)?;
    if s.flow_criterion(prm.nu()).norm() <= tol_plug {
        return Err(Error::AtPlugPoint);
    }
    let dir = s.modified_plastic(prm).ok_or(Error::AtPlugPoint)?;
    Ok(s.viscous(prm).add_scaled(prm.tau_hat(), &dir))
}

/// One-sided directional derivative `V'(X; Y)`, defined everywhere.
pub fn dir_deriv_v(x: &MatD, y: &MatD, omega: &MatD, prm: &FluidParams, tol_plug: f64) -> Result<f64> {
    prm.require_potential()?;
    same_dim(x, y)?;
    let s = Split::new(x, omega)?;
    if s.flow_criterion(prm.nu()).norm() > tol_plug {
        if let Some(dir) = s.modified_plastic(prm) {
            return Ok(s.viscous(prm).add_scaled(prm.tau_hat(), &dir).dot(y));
        }
    }
    let (ys, ya) = y.decompose();
    let q = prm.q();
    let kink = npow(npow(ys.norm(), q) + prm.nu() * npow(ya.norm(), q), 1.0 / q);
    Ok(s.viscous(prm).dot(y) + prm.tau_hat() * kink)
}

/// Exact stress: single-valued off the plug set, a bound on it.
pub fn stress_exact(x: &MatD, omega: &MatD, prm: &FluidParams, tol_plug: f64) -> Result<StressResult> {
    let s = Split::new(x, omega)?;
    if s.flow_criterion(prm.nu()).norm() <= tol_plug {
        return Ok(StressResult::Plug {
            bound: prm.tau_star(),
        });
    }
    match s.modified_plastic(prm) {
        Some(dir) => Ok(StressResult::Flow(s.viscous(prm).add_scaled(prm.tau_hat(), &dir))),
        None => Ok(StressResult::Plug {
            bound: prm.tau_star(),
        }),
    }
}

/// Regularized stress `Sⁿ`, the gradient of `Vⁿ`.
pub fn stress_regularized(x: &MatD, omega: &MatD, prm: &FluidParams, n: u64) -> Result<MatD> {
    let eps = inv_n(n)?;
    let s = Split::new(x, omega)?;
    Ok(regularized_from_split(&s, prm, eps))
}

pub(crate) fn regularized_from_split(s: &Split, prm: &FluidParams, eps: f64) -> MatD {
    let q = prm.q();
    let den = pow(s.plastic_weight(prm) + eps, -(q - 1.0) / q);
    s.viscous(prm).add_scaled(prm.tau_hat() * den, &s.plastic(prm))
}

/// Right-hand side of the pointwise stress bound
/// `|Sⁿ| ≤ μ₁|X_s|^{p−1} + μ₂|R|^{p−1} + τ*`.
pub fn stress_bound(x: &MatD, omega: &MatD, prm: &FluidParams) -> Result<f64> {
    let s = Split::new(x, omega)?;
    let e = prm.p() - 1.0;
    Ok(prm.mu1() * npow(s.ns, e) + prm.mu2() * npow(s.nr, e) + prm.tau_star())
}

/// Two-sided estimate for `V'(X; X)` (and `Sⁿ : X`):
/// `μ₁|X_s|^p − 2^{p−2}μ₂|Ω|^p − τ*|Ω| ≤ · ≤ c₁|X|^p + c₂|Ω|^p + τ*|X|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoercivityBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn coercivity_bounds(x: &MatD, omega: &MatD, prm: &FluidParams) -> Result<CoercivityBounds> {
    let (c1, c2) = coercivity_constants(prm);
    coercivity_bounds_with(x, omega, prm, c1, c2)
}

/// `(c₁, c₂) = (μ₁ + 2^{p−2}μ₂(1+1/p), 2^{p−2}μ₂(1−1/p))`
pub fn coercivity_constants(prm: &FluidParams) -> (f64, f64) {
    let p = prm.p();
    let k = pow(2.0, p - 2.0) * prm.mu2();
    (prm.mu1() + k * (1.0 + 1.0 / p), k * (1.0 - 1.0 / p))
}

/// As [`coercivity_bounds`] with caller-supplied upper constants.
pub fn coercivity_bounds_with(
    x: &MatD,
    omega: &MatD,
    prm: &FluidParams,
    c1: f64,
    c2: f64,
) -> Result<CoercivityBounds> {
    same_dim(x, omega)?;
    let p = prm.p();
    let ns = x.sym().norm();
    let no = omega.norm();
    let nx = x.norm();
    let k = pow(2.0, p - 2.0) * prm.mu2();
    Ok(CoercivityBounds {
        lower: prm.mu1() * npow(ns, p) - k * npow(no, p) - prm.tau_star() * no,
        upper: c1 * npow(nx, p) + c2 * npow(no, p) + prm.tau_star() * nx,
    })
}

/// Plastic operator `B_{ν,q}/|B_{ν,q}|`.
pub fn plastic_operator(xs: &MatD, r: &MatD, prm: &FluidParams) -> Result<MatD> {
    same_dim(xs, r)?;
    let b = Split::from_parts(*xs, *r).plastic(prm);
    let nb = b.norm();
    if nb == 0.0 || !nb.is_finite() {
        return Err(Error::UndefinedAtPlug);
    }
    Ok(b * (1.0 / nb))
}

/// Modified plastic operator `B_{ν,q}/(|X_s|^q + ν|R|^q)^{(q−1)/q}`.
pub fn modified_plastic_operator(xs: &MatD, r: &MatD, prm: &FluidParams) -> Result<MatD> {
    same_dim(xs, r)?;
    Split::from_parts(*xs, *r)
        .modified_plastic(prm)
        .ok_or(Error::UndefinedAtPlug)
}

fn inv_n(n: u64) -> Result<f64> {
    if n == 0 {
        Err(Error::ZeroRegularization)
    } else {
        Ok(1.0 / n as f64)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use proptest::prelude::*;

    pub fn mat(dim: usize, lim: f64) -> impl Strategy<Value = MatD> {
        proptest::collection::vec(-lim..lim, dim * dim)
            .prop_map(move |v| MatD::from_row_major(dim, &v).unwrap())
    }

    pub fn skew(dim: usize, lim: f64) -> impl Strategy<Value = MatD> {
        mat(dim, lim).prop_map(|m| m.skew())
    }

    /// Parameters over the admissible grid used throughout the tests.
    pub fn params() -> impl Strategy<Value = FluidParams> {
        (
            prop::sample::select(&[2.0, 2.2, 3.0][..]),
            prop::sample::select(&[2.0, 3.0][..]),
            prop::sample::select(&[0.0, 0.5, 1.0, 4.0][..]),
            0.1f64..2.0,
            0.0f64..2.0,
            0.0f64..2.0,
        )
            .prop_map(|(p, q, nu, mu1, mu2, tau)| {
                let mu2 = if nu == 0.0 { 0.0 } else { mu2 };
                FluidParams::new(mu1, mu2, nu, tau, p, q).unwrap()
            })
    }

    pub fn gradient_case() -> impl Strategy<Value = (MatD, MatD, FluidParams)> {
        prop_oneof![Just(2usize), Just(3usize)]
            .prop_flat_map(|d| (mat(d, 2.0), skew(d, 1.0), params()))
    }
}
