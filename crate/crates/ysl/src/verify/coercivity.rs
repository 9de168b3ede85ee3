use ysl_core::constitutive::{
    coercivity_bounds_with, coercivity_constants, dir_deriv_v, stress_bound, stress_regularized,
};
use ysl_core::tol::plug_tol;
use ysl_core::MatD;

use super::{
    dim_of, grid_params, near_plug, parameter_grid, sample_tally, skew_mat, uniform_mat, Budget, Check, Failure,
    Report, Suite, Tally,
};
use crate::error::Result;

/// Regularization indices paired with every coercivity and stress-bound sample.
pub const REG_INDICES: [u64; 3] = [1, 1_000, 1_000_000_000];
pub const REL_SLACK: f64 = 1e-12;

const TAG_COERCIVITY: u64 = 0x100;
const TAG_STRESS: u64 = 0x200;

fn sample_point(rng: &mut rand_chacha::ChaCha8Rng, i: u64, nu: f64) -> (MatD, MatD) {
    let d = dim_of(i);
    let omega = skew_mat(rng, d, 2.0);
    let x = if i % 8 == 7 {
        near_plug(rng, &omega, nu)
    } else {
        uniform_mat(rng, d, 2.0)
    };
    (x, omega)
}

/// Two-sided estimate for `V'(X; X)` and for `Sⁿ : X` over the grid, and
/// the same estimate with `c₁` halved, which must be caught.
///
/// Returns the checks `coercivity_v`, `coercivity_vn` and
/// `mutant_c1_half`.
pub fn coercivity_check(seed: u64, per_point: u64, rel_slack: f64) -> [Check; 3] {
    let mut out = [Tally::default(), Tally::default(), Tally::default()];
    for (gi, prm) in parameter_grid().iter().enumerate() {
        let (c1, c2) = coercivity_constants(prm);
        let parts = [0u64, 1, 2].map(|which| {
            sample_tally(seed, TAG_COERCIVITY + gi as u64, per_point, |rng, start, n| {
                let mut t = Tally::default();
                for i in start..start + n {
                    let (x, omega) = sample_point(rng, i, prm.nu());
                    let value = match which {
                        0 | 2 => dir_deriv_v(&x, &x, &omega, prm, plug_tol(x.norm())),
                        _ => stress_regularized(&x, &omega, prm, REG_INDICES[(i % 3) as usize])
                            .and_then(|s| s.inner(&x)),
                    };
                    let c1_used = if which == 2 { 0.5 * c1 } else { c1 };
                    let b = coercivity_bounds_with(&x, &omega, prm, c1_used, c2);
                    let (value, b) = match (value, b) {
                        (Ok(v), Ok(b)) => (v, b),
                        _ => (f64::NAN, ysl_core::constitutive::CoercivityBounds { lower: 0.0, upper: 0.0 }),
                    };
                    let scale = 1.0 + b.upper.abs() + b.lower.abs();
                    let margin = (value - b.lower).min(b.upper - value) / scale;
                    let violated = !(margin >= -rel_slack);
                    t.record(margin, violated, || {
                        Failure::new(
                            ["coercivity_v", "coercivity_vn", "mutant_c1_half"][which as usize],
                            Some(prm),
                            margin,
                            format!("lower {:e}, value {:e}, upper {:e}", b.lower, value, b.upper),
                        )
                        .with("x", &x)
                        .with("omega", &omega)
                        .with_values("n", vec![REG_INDICES[(i % 3) as usize] as f64])
                    });
                }
                t
            })
        });
        for (acc, part) in out.iter_mut().zip(parts) {
            *acc = std::mem::take(acc).merge(part);
        }
    }
    let [v, vn, mutant] = out;
    [
        Check::from_tally("coercivity_v", rel_slack, v),
        Check::from_tally("coercivity_vn", rel_slack, vn),
        Check::expect_detection("mutant_c1_half", mutant),
    ]
}

/// `|Sⁿ| ≤ μ₁|X_s|^{p−1} + μ₂|R|^{p−1} + τ*` for every `n` in
/// [`REG_INDICES`].
pub fn stress_bound_check(seed: u64, per_point: u64, rel_slack: f64) -> Check {
    let mut acc = Tally::default();
    for (gi, prm) in parameter_grid().iter().enumerate() {
        let part = sample_tally(seed, TAG_STRESS + gi as u64, per_point, |rng, start, n| {
            let mut t = Tally::default();
            for i in start..start + n {
                let (x, omega) = sample_point(rng, i, prm.nu());
                let bound = stress_bound(&x, &omega, prm).unwrap_or(f64::NAN);
                for reg in REG_INDICES {
                    let s = stress_regularized(&x, &omega, prm, reg).map_or(f64::NAN, |s| s.norm());
                    let margin = (bound - s) / (1.0 + bound);
                    t.record(margin, !(margin >= -rel_slack), || {
                        Failure::new("stress_bound", Some(prm), margin, format!("|S| {s:e} > bound {bound:e}"))
                            .with("x", &x)
                            .with("omega", &omega)
                            .with_values("n", vec![reg as f64])
                    });
                }
            }
            t
        });
        acc = acc.merge(part);
    }
    Check::from_tally("stress_bound", rel_slack, acc)
}

pub fn suite_coercivity(seed: u64, budget: &Budget) -> Result<Report> {
    let [v, vn, mutant] = coercivity_check(seed, budget.per_point, REL_SLACK);
    let bound = stress_bound_check(seed, budget.per_point, REL_SLACK);
    let mutant_hits = mutant.failure_count;
    Ok(Report::new(Suite::Coercivity, seed, grid_params(), vec![v, vn, bound, mutant])
        .metric("reg_indices", REG_INDICES)
        .metric("mutant_c1_half_violations", mutant_hits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_catches_mutant() {
        let [v, vn, mutant] = coercivity_check(3, 500, REL_SLACK);
        assert!(v.passed && vn.passed, "{v:?} {vn:?}");
        assert!(mutant.passed && mutant.failure_count > 0);
        assert!(stress_bound_check(3, 300, REL_SLACK).passed);
    }

    #[test]
    fn zero_rotation_lower_bound_is_viscous_term() {
        let prm = &parameter_grid()[0];
        let x = MatD::from_rows2([[1.0, 0.3], [0.3, -1.0]]);
        let z = MatD::zeros(2).unwrap();
        let (c1, c2) = coercivity_constants(prm);
        let b = coercivity_bounds_with(&x, &z, prm, c1, c2).unwrap();
        assert_eq!(b.lower, prm.mu1() * x.sym().norm().powf(prm.p()));
        assert!(dir_deriv_v(&x, &x, &z, prm, 1e-12).unwrap() >= b.lower);
    }
}
