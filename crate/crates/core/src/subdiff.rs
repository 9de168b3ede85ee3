//! Subdifferential of the potential at plug points.
//!
//! For `ν > 0` the plug point is `X = Ω` and the subdifferential there is
//! the ellipsoid `|X*_s|^{q'} + ν^{1−q'}|X*_a|^{q'} ≤ τ̂^{q'}`, `q' = q/(q−1)`,
//! squeezed between balls of radii `τ̂·r_q` and `τ*`.

use crate::constitutive::Split;
use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_1p, npow, pow};
use crate::params::FluidParams;
use crate::tensor::{same_dim, MatD};
use crate::tol;

/// `min_{t∈[0,1]} ((1−t)^{q/2} + ν t^{q/2})^{1/q}` in closed form.
pub fn extremal_ratio(nu: f64, q: f64) -> f64 {
    if nu <= 0.0 {
        return 0.0;
    }
    if q == 2.0 {
        return crate::math::sqrt(nu).min(1.0);
    }
    // ln of the minimum of (1−t)^{q/2} + ν t^{q/2}, via a stable softplus
    let l = 2.0 / (q - 2.0) * ln(nu);
    let softplus = l.max(0.0) + ln_1p(exp(-l.abs()));
    let ln_alpha = ln(nu) - 0.5 * (q - 2.0) * softplus;
    exp(ln_alpha / q)
}

/// Inner-ball radius factor for the given parameters.
pub fn r_q(prm: &FluidParams) -> f64 {
    extremal_ratio(prm.nu(), prm.q())
}

/// Radius of the largest ball centred at 0 inside the plug subdifferential.
pub fn r_star(prm: &FluidParams) -> f64 {
    prm.tau_hat() * r_q(prm)
}

/// `|X*_s|^{q'} + ν^{1−q'}|X*_a|^{q'}`; requires `ν > 0`.
pub fn ellipsoid_gauge(x_star: &MatD, prm: &FluidParams) -> Result<f64> {
    require_positive_nu(prm)?;
    let qc = prm.q_conj();
    let (s, a) = x_star.decompose();
    Ok(npow(s.norm(), qc) + pow(prm.nu(), 1.0 - qc) * npow(a.norm(), qc))
}

fn require_positive_nu(prm: &FluidParams) -> Result<()> {
    if prm.nu() > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "nu",
            value: prm.nu(),
            requirement: "> 0 for the ellipsoidal subdifferential",
        })
    }
}

/// Whether `x_star` is a subgradient of the potential at a plug point.
///
/// With `ν > 0` the plug point is `Ω` and `plug_point` is ignored. With
/// `ν = 0` the plug point `X` (any matrix with `X_s = 0`) is required; the
/// test is that `X* − μ₂|R|^{p−2}R` is symmetric with norm at most `τ*`.
pub fn in_subdifferential_at_plug(
    x_star: &MatD,
    omega: &MatD,
    prm: &FluidParams,
    plug_point: Option<&MatD>,
) -> Result<bool> {
    same_dim(x_star, omega)?;
    if prm.nu() > 0.0 {
        let cap = npow(prm.tau_hat(), prm.q_conj());
        return Ok(ellipsoid_gauge(x_star, prm)? <= cap * (1.0 + tol::MEMBERSHIP_REL));
    }
    let x = plug_point.ok_or(Error::MissingPlugMatrix)?;
    let s = Split::new(x, omega)?;
    let shifted = *x_star - s.r * (prm.mu2() * npow(s.nr, prm.p() - 2.0));
    let (zs, za) = shifted.decompose();
    let skew_ok = za.norm() <= tol::ZERO_SKEW_REL * x_star.norm().max(1.0);
    Ok(skew_ok && zs.norm() <= prm.tau_star() * (1.0 + tol::MEMBERSHIP_REL))
}

/// A direction `Y` along which `X*:Y` exceeds the one-sided derivative
/// `V'(Ω; Y) = τ̂ (|Y_s|^q + ν|Y_a|^q)^{1/q}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub direction: MatD,
    /// `X* : Y`
    pub pairing: f64,
    /// `V'(Ω; Y)`
    pub derivative: f64,
}

impl Witness {
    pub fn certifies(&self) -> bool {
        self.pairing > self.derivative
    }
}

/// Certificate that `x_star` lies outside the plug subdifferential.
pub fn violation_witness(x_star: &MatD, prm: &FluidParams) -> Result<Witness> {
    let gauge = ellipsoid_gauge(x_star, prm)?;
    let cap = npow(prm.tau_hat(), prm.q_conj());
    if gauge <= cap * (1.0 + tol::MEMBERSHIP_REL) {
        return Err(Error::NoWitness);
    }
    let qc = prm.q_conj();
    let q = prm.q();
    let (s, a) = x_star.decompose();
    let ys = power_dir(&s, qc - 2.0);
    let ya = power_dir(&a, qc - 2.0) * pow(prm.nu(), 1.0 - qc);
    let direction = ys + ya;
    let derivative =
        prm.tau_hat() * npow(npow(ys.norm(), q) + prm.nu() * npow(ya.norm(), q), 1.0 / q);
    Ok(Witness {
        direction,
        pairing: x_star.dot(&direction),
        derivative,
    })
}

/// `|M|^e M`, taken as 0 when `M = 0`.
fn power_dir(m: &MatD, e: f64) -> MatD {
    let n = m.norm();
    if n == 0.0 {
        *m
    } else {
        *m * pow(n, e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowRegime {
    Plug,
    Flow,
}

/// Plug iff `|B_s + ν(B_a − Ω)| ≤ tol`.
pub fn classify_plug(b: &MatD, omega: &MatD, prm: &FluidParams, tol: f64) -> Result<FlowRegime> {
    let s = Split::new(b, omega)?;
    Ok(if s.flow_criterion(prm.nu()).norm() <= tol {
        FlowRegime::Plug
    } else {
        FlowRegime::Flow
    })
}

/// `|B_{ν,q}| / (|X_s|^q + ν|R|^q)^{(q−1)/q}`, bounded by `max(1, ν^{1/q})`.
pub fn check_est_dw(x: &MatD, omega: &MatD, prm: &FluidParams) -> Result<f64> {
    let s = Split::new(x, omega)?;
    s.modified_plastic(prm)
        .map(|m| m.norm())
        .ok_or(Error::AtPlugPoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::testutil::{mat, skew};
    use crate::constitutive::{dir_deriv_v, potential_v};
    use proptest::prelude::*;

    /// Grid scan then golden-section refinement of the minimum of
    /// `(1−t)^{q/2} + ν t^{q/2}` over `[0, 1]`.
    fn numeric_ratio(nu: f64, q: f64) -> f64 {
        let alpha = |t: f64| (1.0 - t).powf(q / 2.0) + nu * t.powf(q / 2.0);
        let m = 2000;
        let k = (0..=m)
            .min_by(|&a, &b| alpha(a as f64 / m as f64).total_cmp(&alpha(b as f64 / m as f64)))
            .unwrap();
        let (mut lo, mut hi) = (
            (k as f64 - 1.0).max(0.0) / m as f64,
            (k as f64 + 1.0).min(m as f64) / m as f64,
        );
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if alpha(a) < alpha(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let t = 0.5 * (lo + hi);
        alpha(t).min(alpha(0.0)).min(alpha(1.0)).powf(1.0 / q)
    }

    #[test]
    fn ratio_reference_values() {
        let p = FluidParams::new(1.0, 0.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(r_star(&p), 1.0);
        let p = FluidParams::new(1.0, 0.0, 0.25, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(p.tau_hat(), 1.0);
        assert_eq!(r_star(&p), 0.5);
        assert_eq!(extremal_ratio(0.0, 3.0), 0.0);
    }

    #[test]
    fn ratio_matches_numeric_minimum() {
        for q in [2.0, 2.5, 3.0, 4.0, 6.0] {
            for nu in [0.01, 0.3, 1.0, 2.0, 9.0] {
                let a = extremal_ratio(nu, q);
                let b = numeric_ratio(nu, q);
                assert!((a - b).abs() < 1e-10, "q={q} nu={nu}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ratio_is_nondecreasing_in_nu() {
        for q in [2.0, 2.5, 3.0, 5.0] {
            let vals: std::vec::Vec<f64> =
                (0..=400).map(|i| extremal_ratio(i as f64 * 0.01, q)).collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-15), "q={q}");
        }
    }

    #[test]
    fn ellipsoid_at_q2_is_quadratic() {
        let p = FluidParams::new(1.0, 0.0, 0.5, 1.0, 2.0, 2.0).unwrap();
        let x = MatD::from_rows2([[0.2, 0.5], [0.1, -0.2]]);
        let (s, a) = x.decompose();
        let g = ellipsoid_gauge(&x, &p).unwrap();
        assert!((g - (s.norm_sq() + a.norm_sq() / 0.5)).abs() < 1e-15);
    }

    #[test]
    fn zero_is_always_a_subgradient() {
        let omega = MatD::skew2(0.3);
        let z = MatD::zeros(2).unwrap();
        let p = FluidParams::new(1.0, 0.5, 0.5, 1.0, 2.0, 3.0).unwrap();
        assert!(in_subdifferential_at_plug(&z, &omega, &p, None).unwrap());
        let p0 = FluidParams::new(1.0, 0.0, 0.0, 1.0, 2.0, 3.0).unwrap();
        assert!(in_subdifferential_at_plug(&z, &omega, &p0, Some(&omega)).unwrap());
        assert_eq!(
            in_subdifferential_at_plug(&z, &omega, &p0, None),
            Err(Error::MissingPlugMatrix)
        );
    }

    #[test]
    fn bingham_subdifferential_is_symmetric_ball() {
        let p = FluidParams::bingham(1.0, 0.8).unwrap();
        let z = MatD::zeros(2).unwrap();
        let x = MatD::skew2(0.4);
        let inside = MatD::from_rows2([[0.3, 0.2], [0.2, -0.3]]);
        assert!(in_subdifferential_at_plug(&inside, &z, &p, Some(&x)).unwrap());
        let skewed = inside + MatD::skew2(1e-3);
        assert!(!in_subdifferential_at_plug(&skewed, &z, &p, Some(&x)).unwrap());
        let big = inside * 2.0;
        assert!(!in_subdifferential_at_plug(&big, &z, &p, Some(&x)).unwrap());
    }

    #[test]
    fn rotation_viscosity_shifts_nu_zero_test() {
        let p = FluidParams::new(1.0, 2.0, 0.0, 0.5, 2.0, 2.0).unwrap();
        let omega = MatD::skew2(0.1);
        let x = MatD::skew2(0.4);
        let member = MatD::skew2(0.6) + MatD::from_rows2([[0.2, 0.0], [0.0, -0.2]]);
        assert!(in_subdifferential_at_plug(&member, &omega, &p, Some(&x)).unwrap());
    }

    #[test]
    fn witness_just_outside() {
        let p = FluidParams::new(1.0, 0.0, 2.0, 1.0, 2.0, 3.0).unwrap();
        let unit = MatD::from_rows2([[1.0, 0.0], [0.0, -1.0]]) * (1.0 / 2f64.sqrt());
        let w = violation_witness(&(unit * (1.001 * p.tau_hat())), &p).unwrap();
        assert!(w.certifies());
        assert_eq!(
            violation_witness(&(unit * p.tau_hat()), &p),
            Err(Error::NoWitness)
        );
    }

    #[test]
    fn dw_ratio_extremes() {
        let p = FluidParams::new(1.0, 0.0, 3.0, 1.0, 2.0, 3.0).unwrap();
        let omega = MatD::skew2(0.2);
        let r = check_est_dw(&MatD::skew2(0.9), &omega, &p).unwrap();
        assert!((r - 3f64.cbrt()).abs() < 1e-14);
        let x = MatD::from_rows2([[0.5, 0.2], [0.2, 0.1]]) + omega;
        assert!((check_est_dw(&x, &omega, &p).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(check_est_dw(&omega, &omega, &p), Err(Error::AtPlugPoint));
    }

    #[test]
    fn classification() {
        let p = FluidParams::new(1.0, 0.0, 0.5, 1.0, 2.0, 2.0).unwrap();
        let omega = MatD::skew2(0.2);
        assert_eq!(classify_plug(&omega, &omega, &p, 1e-12).unwrap(), FlowRegime::Plug);
        let p0 = FluidParams::bingham(1.0, 1.0).unwrap();
        assert_eq!(
            classify_plug(&MatD::skew2(5.0), &omega, &p0, 1e-12).unwrap(),
            FlowRegime::Plug
        );
        assert_eq!(
            classify_plug(&MatD::identity(2).unwrap(), &omega, &p0, 1e-12).unwrap(),
            FlowRegime::Flow
        );
    }

    fn pos_params() -> impl Strategy<Value = FluidParams> {
        (0.05f64..5.0, prop::sample::select(&[2.0, 2.5, 3.0, 4.0][..]), 0.1f64..2.0)
            .prop_map(|(nu, q, tau)| FluidParams::new(1.0, 0.5, nu, tau, 2.0, q).unwrap())
    }

    proptest! {
        #[test]
        fn ball_sandwich(d in mat(3, 1.0), prm in pos_params(), t in 0.0f64..1.0) {
            prop_assume!(d.norm() > 1e-6);
            let z = MatD::zeros(3).unwrap();
            let inner = d * (t * r_star(&prm) / d.norm());
            prop_assert!(in_subdifferential_at_plug(&inner, &z, &prm, None).unwrap());
            let outer = d * ((1.0 + 1e-6 + t) * prm.tau_star() / d.norm());
            prop_assert!(!in_subdifferential_at_plug(&outer, &z, &prm, None).unwrap());
        }

        #[test]
        fn witness_certifies_outside(d in mat(3, 2.0), prm in pos_params(), k in 1.001f64..3.0) {
            let g = ellipsoid_gauge(&d, &prm).unwrap();
            prop_assume!(g > 1e-9);
            let scale = (prm.tau_hat().powf(prm.q_conj()) / g).powf(1.0 / prm.q_conj()) * k;
            let x_star = d * scale;
            let w = violation_witness(&x_star, &prm).unwrap();
            prop_assert!(w.certifies());
            let omega = MatD::zeros(3).unwrap();
            let kink = dir_deriv_v(&omega, &w.direction, &omega, &prm, 1e-12).unwrap();
            prop_assert!((kink - w.derivative).abs() <= 1e-12 * (1.0 + kink));
        }

        #[test]
        fn members_satisfy_the_inequality(d in mat(2, 1.0), y in mat(2, 2.0), omega in skew(2, 1.0), prm in pos_params()) {
            let g = ellipsoid_gauge(&d, &prm).unwrap();
            prop_assume!(g > 1e-9);
            let x_star = d * (0.99 * (prm.tau_hat().powf(prm.q_conj()) / g).powf(1.0 / prm.q_conj()));
            prop_assert!(in_subdifferential_at_plug(&x_star, &omega, &prm, None).unwrap());
            let lhs = potential_v(&(omega + y), &omega, &prm).unwrap();
            prop_assert!(lhs >= x_star.dot(&y) - 1e-12);
        }

        #[test]
        fn dw_ratio_bounded(x in mat(3, 2.0), omega in skew(3, 1.0), nu in 0.0f64..6.0, q in 2.0f64..5.0) {
            let prm = FluidParams::new(1.0, 0.0, nu, 1.0, 2.0, q).unwrap();
            if let Ok(r) = check_est_dw(&x, &omega, &prm) {
                prop_assert!(r <= nu.powf(1.0 / q).max(1.0) + 1e-12);
            }
        }
    }
}
