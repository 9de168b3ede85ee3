use ysl_core::constitutive::{grad_v, potential_v, potential_vn, stress_regularized};
use ysl_core::tol::plug_tol;
use ysl_core::MatD;

use super::{
    chunk_rng, dim_of, grid_params, near_plug, parameter_grid, sample_tally, skew_mat, uniform_mat, Budget, Check,
    Failure, Report, Suite, Tally,
};
use crate::error::Result;

pub const RATE_INDICES: [u64; 4] = [100, 10_000, 1_000_000, 100_000_000];
/// Required `|Sⁿ − ∇V| / (1 + |∇V|)` at the last index.
pub const FINAL_REL_TOL: f64 = 1e-3;
pub const GAP_REL_SLACK: f64 = 1e-12;
const MIN_CRITERION: f64 = 0.1;

const TAG_RATE: u64 = 0xE00;
const TAG_GAP: u64 = 0xF00;

#[derive(Clone, Debug, PartialEq)]
pub struct RateOutcome {
    pub check: Check,
    /// Median over points of `−d log|Sⁿ − ∇V| / d log n`.
    pub observed_order: f64,
    /// `|Sⁿ − ∇V|` per point, one column per index.
    pub table: Vec<[f64; 4]>,
}

/// Error of the regularized stress at `points` fixed flow-branch points:
/// strictly decreasing along [`RATE_INDICES`] and below
/// `final_rel·(1 + |∇V|)` at the end.
pub fn regularization_rate_check(seed: u64, points: u64, final_rel: f64) -> RateOutcome {
    let grid = parameter_grid();
    let mut rng = chunk_rng(seed, TAG_RATE, 0);
    let mut tally = Tally::default();
    let mut table = Vec::new();
    let mut slopes = Vec::new();
    for i in 0..points {
        let prm = &grid[(i % grid.len() as u64) as usize];
        let d = dim_of(i / grid.len() as u64);
        let omega = skew_mat(&mut rng, d, 1.0);
        let x = loop {
            let x = uniform_mat(&mut rng, d, 2.0);
            if (x.sym() + (x.skew() - omega) * prm.nu()).norm() > MIN_CRITERION {
                break x;
            }
        };
        let outcome = grad_v(&x, &omega, prm, plug_tol(x.norm())).and_then(|g| {
            let mut errs = [0.0; 4];
            for (e, n) in errs.iter_mut().zip(RATE_INDICES) {
                *e = (stress_regularized(&x, &omega, prm, n)? - g).norm();
            }
            Ok((g.norm(), errs))
        });
        let (gn, errs) = outcome.unwrap_or((f64::NAN, [f64::NAN; 4]));
        let scale = 1.0 + gn;
        let mut margin = (final_rel * scale - errs[3]) / scale;
        for w in errs.windows(2) {
            margin = margin.min((w[0] - w[1]) / scale);
            if w[1] > 0.0 {
                slopes.push((w[0] / w[1]).log10() / 2.0);
            }
        }
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let ok = decreasing && errs[3] <= final_rel * scale;
        tally.record(margin, !ok, || {
            Failure::new("regularization_rate", Some(prm), margin, format!("errors {errs:?}"))
                .with("x", &x)
                .with("omega", &omega)
        });
        table.push(errs);
    }
    slopes.sort_by(f64::total_cmp);
    let observed_order = slopes.get(slopes.len() / 2).copied().unwrap_or(f64::NAN);
    RateOutcome {
        check: Check::from_tally("regularization_rate", final_rel, tally),
        observed_order,
        table,
    }
}

/// `0 < Vⁿ − V ≤ τ̂ n^{−1/q}` on random points, near-plug points and plug
/// points.
pub fn regularization_gap_check(seed: u64, per_point: u64, rel_slack: f64) -> Check {
    let mut acc = Tally::default();
    for (gi, prm) in parameter_grid().iter().enumerate() {
        acc = acc.merge(sample_tally(seed, TAG_GAP + gi as u64, per_point, |rng, start, count| {
            let mut t = Tally::default();
            for i in start..start + count {
                let d = dim_of(i);
                let omega = skew_mat(rng, d, 2.0);
                let x: MatD = match i % 8 {
                    6 => omega,
                    7 => near_plug(rng, &omega, prm.nu()),
                    _ => uniform_mat(rng, d, 2.0),
                };
                let n = RATE_INDICES[(i % 4) as usize];
                let cap = prm.tau_hat() * (n as f64).powf(-1.0 / prm.q());
                let res = potential_v(&x, &omega, prm)
                    .and_then(|v| potential_vn(&x, &omega, prm, n).map(|vn| (v, vn - v)));
                let (v, gap) = res.unwrap_or((f64::NAN, f64::NAN));
                let slack = rel_slack * (1.0 + v.abs());
                let margin = (gap.min(cap - gap + slack)) / (1.0 + v.abs());
                let ok = gap > 0.0 && gap <= cap + slack;
                t.record(margin, !ok, || {
                    Failure::new("regularization_gap", Some(prm), margin, format!("gap {gap:e}, cap {cap:e}"))
                        .with("x", &x)
                        .with("omega", &omega)
                        .with_values("n", vec![n as f64])
                });
            }
            t
        }));
    }
    Check::from_tally("regularization_gap", rel_slack, acc)
}

pub fn suite_regularization(seed: u64, budget: &Budget) -> Result<Report> {
    let rate = regularization_rate_check(seed, budget.regularization_points, FINAL_REL_TOL);
    let gap = regularization_gap_check(seed, (budget.per_point / 10).max(1), GAP_REL_SLACK);
    Ok(Report::new(Suite::Regularization, seed, grid_params(), vec![rate.check, gap])
        .metric("reg_indices", RATE_INDICES)
        .metric("observed_order", rate.observed_order)
        .metric("error_table", rate.table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_table_decreases_at_first_order() {
        let r = regularization_rate_check(2, 50, FINAL_REL_TOL);
        assert!(r.check.passed, "{:?}", r.check);
        assert!((r.observed_order - 1.0).abs() < 0.1, "{}", r.observed_order);
    }

    #[test]
    fn plug_point_gap_equals_cap() {
        let prm = &parameter_grid()[5];
        let omega = MatD::skew2(0.3);
        let gap = potential_vn(&omega, &omega, prm, 10_000).unwrap() - potential_v(&omega, &omega, prm).unwrap();
        let cap = prm.tau_hat() * 10_000f64.powf(-1.0 / prm.q());
        assert!((gap - cap).abs() <= 1e-15);
        assert!(regularization_gap_check(2, 400, GAP_REL_SLACK).passed);
    }
}
