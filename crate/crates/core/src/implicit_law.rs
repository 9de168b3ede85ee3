//! Implicit Cosserat–Bingham stress law with offsets `a₁, a₂ ≥ 0`.
//!
//! The stress `S` and the gradient `B` are related by
//! `μ₁(a₁+|B_s|)^{p−2}((|S|−τ*)₊ + τ*)B₀ = (|S|−τ*)₊ S`,
//! `B₀ = B_s + εR`, `ε = (μ₂/μ₁)(a₂+|R|)^{p−2}/(a₁+|B_s|)^{p−2}`.

use crate::constitutive::{Split, StressResult};
use crate::error::{Error, Result};
use crate::math::npow;
use crate::params::FluidParams;
use crate::tensor::MatD;

fn check(prm: &FluidParams) -> Result<()> {
    if prm.mu2() <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu2",
            value: prm.mu2(),
            requirement: "> 0 for the implicit law",
        });
    }
    if prm.tau_star() <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tau_star",
            value: prm.tau_star(),
            requirement: "> 0 for the implicit law",
        });
    }
    Ok(())
}

/// `μ₁(a₁+|B_s|)^{p−2}B₀ = μ₁(a₁+|B_s|)^{p−2}B_s + μ₂(a₂+|R|)^{p−2}R`.
///
/// The right-hand form stays finite when `a₁ = |B_s| = 0` and `p > 2`.
fn scaled_b0(s: &Split, prm: &FluidParams) -> MatD {
    let e = prm.p() - 2.0;
    s.xs * (prm.mu1() * npow(prm.a1() + s.ns, e)) + s.r * (prm.mu2() * npow(prm.a2() + s.nr, e))
}

/// The coupling weight `ε`; infinite when `a₁ + |B_s| = 0` and `p > 2`.
pub fn cb_epsilon(b: &MatD, omega: &MatD, prm: &FluidParams) -> Result<f64> {
    let s = Split::new(b, omega)?;
    let e = prm.p() - 2.0;
    let den = npow(prm.a1() + s.ns, e);
    Ok(prm.mu2() / prm.mu1() * npow(prm.a2() + s.nr, e) / den)
}

/// Explicit resolution of the implicit law.
///
/// Plug iff `B₀ = 0`, which by orthogonality of `B_s` and `R` means
/// `|B − Ω| ≤ tol`.
pub fn cb_explicit_stress(b: &MatD, omega: &MatD, prm: &FluidParams, tol: f64) -> Result<StressResult> {
    check(prm)?;
    let s = Split::new(b, omega)?;
    let d = scaled_b0(&s, prm);
    let nd = d.norm();
    if (b.sym() + s.r).norm() <= tol || nd == 0.0 {
        return Ok(StressResult::Plug {
            bound: prm.tau_star(),
        });
    }
    Ok(StressResult::Flow(d.add_scaled(prm.tau_star() / nd, &d)))
}

/// Frobenius norm of the difference between the two sides of the
/// implicit relation.
pub fn cb_implicit_residual(stress: &MatD, b: &MatD, omega: &MatD, prm: &FluidParams) -> Result<f64> {
    check(prm)?;
    crate::tensor::same_dim(stress, b)?;
    let s = Split::new(b, omega)?;
    let excess = (stress.norm() - prm.tau_star()).max(0.0);
    let lhs = scaled_b0(&s, prm) * (excess + prm.tau_star());
    Ok((lhs - *stress * excess).norm())
}

/// The explicit law with offsets removed and `ν = μ₂/μ₁`:
/// `B_{μ,p} + τ* B_{ν,p}/|B_{ν,p}|`.
pub fn sr_explicit_stress(b: &MatD, omega: &MatD, prm: &FluidParams, tol: f64) -> Result<StressResult> {
    let s = Split::new(b, omega)?;
    let e = prm.p() - 2.0;
    let ratio = prm.mu2() / prm.mu1();
    let dir = s.xs * npow(s.ns, e) + s.r * (ratio * npow(s.nr, e));
    let nd = dir.norm();
    if s.xs.add_scaled(ratio, &s.r).norm() <= tol || nd == 0.0 {
        return Ok(StressResult::Plug {
            bound: prm.tau_star(),
        });
    }
    Ok(StressResult::Flow(s.viscous(prm).add_scaled(prm.tau_star() / nd, &dir)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::testutil::{mat, skew};
    use proptest::prelude::*;

    fn cb_params() -> impl Strategy<Value = FluidParams> {
        (0.1f64..2.0, 0.1f64..2.0, 0.05f64..2.0, 2.0f64..4.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_map(|(mu1, mu2, tau, p, a1, a2)| {
                FluidParams::new(mu1, mu2, 1.0, tau, p, 2.0)
                    .unwrap()
                    .with_offsets(a1, a2)
                    .unwrap()
            })
    }

    #[test]
    fn rejects_missing_yield_or_rotation_viscosity() {
        let x = MatD::identity(2).unwrap();
        let z = MatD::zeros(2).unwrap();
        let prm = FluidParams::bingham(1.0, 1.0).unwrap();
        assert!(cb_explicit_stress(&x, &z, &prm, 1e-12).is_err());
    }

    #[test]
    fn epsilon_is_infinite_without_offset() {
        let prm = FluidParams::new(1.0, 1.0, 1.0, 1.0, 3.0, 2.0).unwrap();
        let omega = MatD::skew2(0.1);
        let b = MatD::skew2(0.5);
        assert!(cb_epsilon(&b, &omega, &prm).unwrap().is_infinite());
        let s = *cb_explicit_stress(&b, &omega, &prm, 1e-12).unwrap().flow().unwrap();
        assert!(s.is_finite());
        assert!(cb_implicit_residual(&s, &b, &omega, &prm).unwrap() < 1e-12);
    }

    proptest! {
        #[test]
        fn explicit_solves_implicit(b in mat(3, 2.0), omega in skew(3, 1.0), prm in cb_params()) {
            if let StressResult::Flow(s) = cb_explicit_stress(&b, &omega, &prm, 1e-12).unwrap() {
                prop_assert!(s.norm() > prm.tau_star());
                let res = cb_implicit_residual(&s, &b, &omega, &prm).unwrap();
                prop_assert!(res <= 1e-10 * (1.0 + s.norm()));
            }
        }

        #[test]
        fn plug_admits_any_small_stress(omega in skew(3, 1.0), sdir in mat(3, 1.0), t in 0.0f64..1.0, prm in cb_params()) {
            prop_assert!(cb_explicit_stress(&omega, &omega, &prm, 1e-12).unwrap().is_plug());
            prop_assume!(sdir.norm() > 0.0);
            let s = sdir * (t * prm.tau_star() / sdir.norm());
            prop_assert_eq!(cb_implicit_residual(&s, &omega, &omega, &prm).unwrap(), 0.0);
        }

        #[test]
        fn zero_offsets_give_explicit_sr(b in mat(3, 2.0), omega in skew(3, 1.0), prm in cb_params()) {
            let prm = FluidParams::new(prm.mu1(), prm.mu2(), prm.mu2() / prm.mu1(), prm.tau_star(), prm.p(), 2.0).unwrap();
            let cb = cb_explicit_stress(&b, &omega, &prm, 1e-12).unwrap();
            let sr = sr_explicit_stress(&b, &omega, &prm, 1e-12).unwrap();
            match (cb, sr) {
                (StressResult::Flow(a), StressResult::Flow(c)) => {
                    prop_assert!((a - c).norm() <= 1e-12 * (1.0 + a.norm()));
                }
                (a, c) => prop_assert_eq!(a.is_plug(), c.is_plug()),
            }
        }
    }
}
