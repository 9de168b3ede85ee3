use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ysl_core::constitutive::{grad_v, potential_v, stress_exact};
use ysl_core::implicit_law::{cb_explicit_stress, cb_implicit_residual};
use ysl_core::subdiff::{extremal_ratio, in_subdifferential_at_plug, r_star};
use ysl_core::tol::plug_tol;
use ysl_core::{FluidParams, MatD};

use super::{
    dim_of, grid_params, near_plug, parameter_grid, sample_tally, skew_mat, uniform_mat, Budget, Check, Failure,
    Report, Suite, Tally,
};
use crate::error::Result;

pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const GRADIENT_MIN_CRITERION: f64 = 0.1;
pub const BOUNDARY_BAND: f64 = 0.01;
pub const R_Q_TOL: f64 = 1e-10;
pub const IMPLICIT_REL_TOL: f64 = 1e-10;
pub const INEQUALITY_REL_SLACK: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;
const ORACLE_STEP: f64 = 1e-9;
const ORACLE_ANGLES: usize = 720;
const ORACLE_RANDOM: usize = 32;

const TAG_GRADIENT: u64 = 0x300;
const TAG_ELLIPSOID: u64 = 0x400;
const TAG_INNER: u64 = 0x500;
const TAG_OUTER: u64 = 0x600;
const TAG_IMPLICIT: u64 = 0x700;
const TAG_INEQUALITY: u64 = 0x800;
const TAG_BINGHAM: u64 = 0x900;
const TAG_FLOOR: u64 = 0xA00;

fn crit_norm(x: &MatD, omega: &MatD, nu: f64) -> f64 {
    (x.sym() + (x.skew() - *omega) * nu).norm()
}

/// Central differences of the potential, entry by entry.
fn fd_gradient(x: &MatD, omega: &MatD, prm: &FluidParams, h: f64) -> ysl_core::Result<MatD> {
    let d = x.dim();
    let mut g = MatD::zeros(d)?;
    for i in 0..d {
        for j in 0..d {
            let mut up = *x;
            let mut dn = *x;
            up.set(i, j, x.get(i, j) + h);
            dn.set(i, j, x.get(i, j) - h);
            g.set(i, j, (potential_v(&up, omega, prm)? - potential_v(&dn, omega, prm)?) / (2.0 * h));
        }
    }
    Ok(g)
}

/// Closed-form gradient against central differences at points with
/// `|X_ν| > 0.1`, spread round-robin over the grid.
pub fn gradient_fidelity_check(seed: u64, points: u64, rel_tol: f64) -> Check {
    let grid = parameter_grid();
    let t = sample_tally(seed, TAG_GRADIENT, points, |rng, start, n| {
        let mut t = Tally::default();
        for i in start..start + n {
            let prm = &grid[(i % grid.len() as u64) as usize];
            let d = dim_of(i / grid.len() as u64);
            let omega = skew_mat(rng, d, 1.0);
            let x = loop {
                let x = uniform_mat(rng, d, 2.0);
                if crit_norm(&x, &omega, prm.nu()) > GRADIENT_MIN_CRITERION {
                    break x;
                }
            };
            let err = grad_v(&x, &omega, prm, plug_tol(x.norm()))
                .and_then(|g| fd_gradient(&x, &omega, prm, FD_STEP).map(|f| (f - g).norm() / g.norm()))
                .unwrap_or(f64::NAN);
            let margin = rel_tol - err;
            t.record(margin, !(err <= rel_tol), || {
                Failure::new("gradient_fidelity", Some(prm), margin, format!("relative error {err:e}"))
                    .with("x", &x)
                    .with("omega", &omega)
            });
        }
        t
    });
    Check::from_tally("gradient_fidelity", rel_tol, t)
}

/// `V(Y) ≥ V(X) + S:(Y − X)` with the flow-branch stress; every fourth
/// sample uses `Y = X`.
pub fn subgradient_inequality_check(seed: u64, per_point: u64, rel_slack: f64) -> Check {
    let mut acc = Tally::default();
    for (gi, prm) in parameter_grid().iter().enumerate() {
        acc = acc.merge(sample_tally(seed, TAG_INEQUALITY + gi as u64, per_point, |rng, start, n| {
            let mut t = Tally::default();
            for i in start..start + n {
                let d = dim_of(i);
                let omega = skew_mat(rng, d, 2.0);
                let x = if i % 8 == 7 { near_plug(rng, &omega, prm.nu()) } else { uniform_mat(rng, d, 2.0) };
                let y = if i % 4 == 0 { x } else { uniform_mat(rng, d, 2.0) };
                let res = (|| -> Result<Option<f64>> {
                    let Some(s) = stress_exact(&x, &omega, prm, plug_tol(x.norm()))?.flow().copied() else {
                        return Ok(None);
                    };
                    let vx = potential_v(&x, &omega, prm)?;
                    let vy = potential_v(&y, &omega, prm)?;
                    Ok(Some((vy - vx - s.inner(&(y - x))?) / (1.0 + vx.abs() + vy.abs())))
                })();
                let margin = match res {
                    Ok(Some(m)) => m,
                    Ok(None) => continue,
                    Err(_) => f64::NAN,
                };
                t.record(margin, !(margin >= -rel_slack), || {
                    Failure::new("subgradient_inequality", Some(prm), margin, "V(Y) < V(X) + S:(Y-X)")
                        .with("x", &x)
                        .with("y", &y)
                        .with("omega", &omega)
                });
            }
            t
        }));
    }
    Check::from_tally("subgradient_inequality", rel_slack, acc)
}

/// `V'(X; Y)` as a one-sided difference quotient of the potential.
fn quotient_derivative(x: &MatD, y: &MatD, omega: &MatD, prm: &FluidParams) -> ysl_core::Result<f64> {
    let v0 = potential_v(x, omega, prm)?;
    Ok((potential_v(&x.add_scaled(ORACLE_STEP, y), omega, prm)? - v0) / ORACLE_STEP)
}

/// Sampled variational inequality: `X*` is accepted when no probe
/// direction has `X*:Y > V'(X; Y)`. Probes cover the plane spanned by the
/// symmetric and antisymmetric parts of `X*` plus random directions.
fn vi_oracle(x_star: &MatD, plug: &MatD, omega: &MatD, prm: &FluidParams, rng: &mut ChaCha8Rng) -> ysl_core::Result<(bool, f64)> {
    let (s, a) = x_star.decompose();
    let unit = |m: MatD| {
        let n = m.norm();
        if n > 0.0 {
            m * (1.0 / n)
        } else {
            m
        }
    };
    let (es, ea) = (unit(s), unit(a));
    let mut worst = f64::NEG_INFINITY;
    let mut probe = |y: MatD| -> ysl_core::Result<()> {
        if y.norm() == 0.0 {
            return Ok(());
        }
        let y = unit(y);
        let dv = quotient_derivative(plug, &y, omega, prm)?;
        worst = worst.max((x_star.inner(&y)? - dv) / (1.0 + dv.abs()));
        Ok(())
    };
    for k in 0..ORACLE_ANGLES {
        let th = 2.0 * std::f64::consts::PI * k as f64 / ORACLE_ANGLES as f64;
        probe(es * th.cos() + ea * th.sin())?;
    }
    for _ in 0..ORACLE_RANDOM {
        probe(uniform_mat(rng, x_star.dim(), 1.0))?;
    }
    Ok((worst <= 0.0, worst))
}

fn gauge(m: &MatD, prm: &FluidParams) -> f64 {
    let qc = prm.q_conj();
    m.sym().norm().powf(qc) + prm.nu().powf(1.0 - qc) * m.skew().norm().powf(qc)
}

fn plug_grid() -> Vec<FluidParams> {
    parameter_grid().into_iter().filter(|p| p.nu() > 0.0).collect()
}

/// Ellipsoid membership against the sampled variational inequality at
/// points scaled to `1 ± band` times the boundary.
pub fn ellipsoid_oracle_check(seed: u64, points: u64, band: f64) -> Check {
    let grid = plug_grid();
    let t = sample_tally(seed, TAG_ELLIPSOID, points, |rng, start, n| {
        let mut t = Tally::default();
        for i in start..start + n {
            let prm = &grid[(i % grid.len() as u64) as usize];
            let d = dim_of(i / grid.len() as u64);
            let omega = skew_mat(rng, d, 1.0);
            let a = uniform_mat(rng, d, 1.0);
            let cap = prm.tau_hat().powf(prm.q_conj());
            let scale = if i % 2 == 0 { 1.0 - band } else { 1.0 + band };
            let x_star = a * (scale * (cap / gauge(&a, prm)).powf(1.0 / prm.q_conj()));
            let verdicts = in_subdifferential_at_plug(&x_star, &omega, prm, None)
                .and_then(|m| Ok((m, vi_oracle(&x_star, &omega, &omega, prm, rng)?)));
            let (agree, margin, detail) = match verdicts {
                Ok((m, (o, w))) => (m == o, if m == o { w.abs() } else { -w.abs() }, format!("ellipsoid {m}, oracle {o}, oracle gap {w:e}")),
                Err(e) => (false, f64::NAN, e.to_string()),
            };
            t.record(margin, !agree, || {
                Failure::new("ellipsoid_oracle", Some(prm), margin, detail)
                    .with("x_star", &x_star)
                    .with("omega", &omega)
            });
        }
        t
    });
    Check::from_tally("ellipsoid_oracle", band, t)
}

/// Points in the ball of radius `r*` are members; sampled members have
/// norm at most `τ*`. Returns `inner_ball` and `outer_ball`.
pub fn ball_inclusion_check(seed: u64, points: u64) -> [Check; 2] {
    let grid = plug_grid();
    let inner = sample_tally(seed, TAG_INNER, points, |rng, start, n| {
        let mut t = Tally::default();
        for i in start..start + n {
            let prm = &grid[(i % grid.len() as u64) as usize];
            let d = dim_of(i / grid.len() as u64);
            let dir = uniform_mat(rng, d, 1.0);
            let u: f64 = if i % 4 == 0 { 1.0 } else { rng.random::<f64>().powf(1.0 / (d * d) as f64) };
            let x_star = dir * (u * r_star(prm) / dir.norm());
            let omega = skew_mat(rng, d, 1.0);
            let member = in_subdifferential_at_plug(&x_star, &omega, prm, None).unwrap_or(false);
            let cap = prm.tau_hat().powf(prm.q_conj());
            let margin = (cap - gauge(&x_star, prm)) / cap;
            t.record(margin, !member, || {
                Failure::new("inner_ball", Some(prm), margin, "point of the inner ball rejected").with("x_star", &x_star)
            });
        }
        t
    });
    let outer = sample_tally(seed, TAG_OUTER, points, |rng, start, n| {
        let mut t = Tally::default();
        for i in start..start + n {
            let prm = &grid[(i % grid.len() as u64) as usize];
            let d = dim_of(i / grid.len() as u64);
            let dir = uniform_mat(rng, d, 1.0);
            let cap = prm.tau_hat().powf(prm.q_conj());
            let level: f64 = if i % 4 == 0 { 1.0 } else { rng.random() };
            let x_star = dir * (level * cap / gauge(&dir, prm)).powf(1.0 / prm.q_conj());
            let omega = skew_mat(rng, d, 1.0);
            let member = in_subdifferential_at_plug(&x_star, &omega, prm, None).unwrap_or(false);
            let margin = (prm.tau_star() - x_star.norm()) / prm.tau_star();
            t.record(margin, member && margin < -ysl_core::tol::MEMBERSHIP_REL, || {
                Failure::new("outer_ball", Some(prm), margin, "member outside the outer ball").with("x_star", &x_star)
            });
        }
        t
    });
    [
        Check::from_tally("inner_ball", ysl_core::tol::MEMBERSHIP_REL, inner),
        Check::from_tally("outer_ball", ysl_core::tol::MEMBERSHIP_REL, outer),
    ]
}

/// Golden-section minimum of `((1−t)^{q/2} + ν t^{q/2})^{1/q}` over `[0, 1]`.
pub fn numeric_extremal_ratio(nu: f64, q: f64) -> f64 {
    let f = |t: f64| ((1.0 - t).powf(0.5 * q) + nu * t.powf(0.5 * q)).powf(1.0 / q);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    [f(0.0), f(1.0), fc, fd, f(0.5 * (a + b))].into_iter().fold(f64::INFINITY, f64::min)
}

pub const R_Q_PAIRS: [(f64, f64); 20] = {
    let qs = [2.0, 2.5, 3.0, 4.0];
    let nus = [0.1, 0.5, 1.0, 2.0, 4.0];
    let mut out = [(0.0, 0.0); 20];
    let mut k = 0;
    while k < 20 {
        out[k] = (qs[k / 5], nus[k % 5]);
        k += 1;
    }
    out
};

/// Closed-form inner-ball factor against numeric minimization.
pub fn r_q_minimization_check(tol: f64) -> Check {
    let mut t = Tally::default();
    for (q, nu) in R_Q_PAIRS {
        let closed = extremal_ratio(nu, q);
        let numeric = numeric_extremal_ratio(nu, q);
        let err = (closed - numeric).abs();
        t.record(tol - err, !(err <= tol), || {
            Failure::new("r_q_minimization", None, tol - err, format!("closed {closed:.17e}, numeric {numeric:.17e}"))
                .with_values("q_nu", vec![q, nu])
        });
    }
    Check::from_tally("r_q_minimization", tol, t)
}

fn random_implicit_params(rng: &mut ChaCha8Rng, i: u64) -> FluidParams {
    let p = [2.0, 2.2, 3.0][(i % 3) as usize];
    let mu1 = rng.random_range(0.1..2.0);
    let mu2 = rng.random_range(0.1..2.0);
    let tau = rng.random_range(0.1..2.0);
    let (a1, a2) = if i % 5 == 0 {
        (0.0, 0.0)
    } else {
        (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))
    };
    FluidParams::new(mu1, mu2, 0.5, tau, p, 2.0)
        .and_then(|prm| prm.with_offsets(a1, a2))
        .expect("sampled parameters are admissible")
}

/// The explicit resolution satisfies the implicit relation on flow-branch
/// inputs.
pub fn implicit_law_check(seed: u64, points: u64, rel_tol: f64) -> Check {
    let t = sample_tally(seed, TAG_IMPLICIT, points, |rng, start, n| {
        let mut t = Tally::default();
        for i in start..start + n {
            let prm = random_implicit_params(rng, i);
            let d = dim_of(i / 3);
            let omega = skew_mat(rng, d, 1.0);
            let b = uniform_mat(rng, d, 2.0);
            let res = cb_explicit_stress(&b, &omega, &prm, plug_tol(b.norm())).and_then(|s| match s.flow() {
                Some(s) => cb_implicit_residual(s, &b, &omega, &prm).map(|r| r / (1.0 + s.norm())),
                None => Ok(f64::NAN),
            });
            let rel = res.unwrap_or(f64::NAN);
            t.record(rel_tol - rel, !(rel <= rel_tol), || {
                Failure::new("implicit_law", Some(&prm), rel_tol - rel, format!("residual {rel:e}"))
                    .with("b", &b)
                    .with("omega", &omega)
            });
        }
        t
    });
    Check::from_tally("implicit_law", rel_tol, t)
}

/// With `p = q = 2`, `ν = μ₂ = 0`, a subgradient at a plug point is a
/// symmetric matrix of norm at most `τ*`. The membership test is compared
/// with the sampled variational inequality.
pub fn bingham_plug_check(seed: u64, points: u64, band: f64) -> Check {
    let prm = FluidParams::bingham(1.0, 0.8).expect("valid Bingham parameters");
    let t = sample_tally(seed, TAG_BINGHAM, points, |rng, start, n| {
        let mut t = Tally::default();
        for i in start..start + n {
            let d = dim_of(i);
            let omega = skew_mat(rng, d, 1.0);
            let plug = skew_mat(rng, d, 1.0);
            let s = uniform_mat(rng, d, 1.0).sym();
            let scale = if i % 2 == 0 { 1.0 - band } else { 1.0 + band };
            let mut x_star = s * (scale * prm.tau_star() / s.norm());
            if i % 3 == 0 {
                x_star += skew_mat(rng, d, band);
            }
            let verdicts = in_subdifferential_at_plug(&x_star, &omega, &prm, Some(&plug))
                .and_then(|m| Ok((m, vi_oracle(&x_star, &plug, &omega, &prm, rng)?)));
            let (agree, margin) = match verdicts {
                Ok((m, (o, w))) => (m == o, if m == o { w.abs() } else { -w.abs() }),
                Err(_) => (false, f64::NAN),
            };
            t.record(margin, !agree, || {
                Failure::new("bingham_plug", Some(&prm), margin, "membership disagrees with the sampled inequality")
                    .with("x_star", &x_star)
                    .with("plug", &plug)
                    .with("omega", &omega)
            });
        }
        t
    });
    Check::from_tally("bingham_plug", band, t)
}

/// Smallest `|S|/τ*` seen on near-plug flow points, per grid point with a
/// yield stress.
fn off_plug_stress_floor(seed: u64, per_point: u64) -> Vec<serde_json::Value> {
    parameter_grid()
        .iter()
        .enumerate()
        .map(|(gi, prm)| {
            let t = sample_tally(seed, TAG_FLOOR + gi as u64, per_point, |rng, start, n| {
                let mut t = Tally::default();
                for i in start..start + n {
                    let omega = skew_mat(rng, dim_of(i), 1.0);
                    let x = near_plug(rng, &omega, prm.nu());
                    if let Ok(Some(s)) = stress_exact(&x, &omega, prm, plug_tol(x.norm())).map(|r| r.flow().copied()) {
                        t.record(s.norm() / prm.tau_star(), false, || unreachable!());
                    }
                }
                t
            });
            serde_json::json!({"p": prm.p(), "q": prm.q(), "nu": prm.nu(), "min_ratio": t.worst_margin})
        })
        .collect()
}

pub fn suite_subgradient(seed: u64, budget: &Budget) -> Result<Report> {
    let [inner, outer] = ball_inclusion_check(seed, budget.ball_points);
    let checks = vec![
        gradient_fidelity_check(seed, budget.gradient_points, GRADIENT_REL_TOL),
        subgradient_inequality_check(seed, (budget.per_point / 10).max(1), INEQUALITY_REL_SLACK),
        ellipsoid_oracle_check(seed, budget.boundary_points, BOUNDARY_BAND),
        bingham_plug_check(seed, budget.boundary_points, BOUNDARY_BAND),
        inner,
        outer,
        r_q_minimization_check(R_Q_TOL),
        implicit_law_check(seed, budget.implicit_points, IMPLICIT_REL_TOL),
    ];
    Ok(Report::new(Suite::Subgradient, seed, grid_params(), checks)
        .metric("off_plug_stress_floor", off_plug_stress_floor(seed, 2000)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_r_q_matches_golden_section() {
        assert!(r_q_minimization_check(R_Q_TOL).passed);
        assert!((numeric_extremal_ratio(0.25, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_runs_pass() {
        for c in [
            gradient_fidelity_check(5, 200, GRADIENT_REL_TOL),
            subgradient_inequality_check(5, 100, INEQUALITY_REL_SLACK),
            ellipsoid_oracle_check(5, 60, BOUNDARY_BAND),
            bingham_plug_check(5, 30, BOUNDARY_BAND),
            implicit_law_check(5, 300, IMPLICIT_REL_TOL),
        ] {
            assert!(c.passed, "{c:?}");
        }
        for c in ball_inclusion_check(5, 200) {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn oracle_rejects_outside_and_accepts_inside() {
        let prm = FluidParams::new(1.0, 0.5, 0.5, 1.0, 2.0, 2.0).unwrap();
        let omega = MatD::skew2(0.2);
        let mut rng = super::super::chunk_rng(0, 0, 0);
        let big = MatD::from_rows2([[2.0, 0.0], [0.0, -2.0]]);
        assert!(!vi_oracle(&big, &omega, &omega, &prm, &mut rng).unwrap().0);
        let small = big * 0.1;
        assert!(vi_oracle(&small, &omega, &omega, &prm, &mut rng).unwrap().0);
    }
}
