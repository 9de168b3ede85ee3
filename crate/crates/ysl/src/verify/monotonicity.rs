use serde::Serialize;
use ysl_core::constitutive::{modified_plastic_operator, plastic_operator};
use ysl_core::{FluidParams, MatD};

use super::{chunk_rng, dim_of, sample_tally, skew_mat, uniform_mat, Budget, Check, Failure, ParamSet, Report, Suite, Tally};
use crate::error::Result;

pub const MONOTONE_TOL: f64 = 1e-12;
pub const NUS: [f64; 4] = [0.0, 0.3, 1.0, 5.0];
pub const QS: [f64; 3] = [2.0, 2.5, 4.0];
/// A counterexample must undercut zero by at least this much.
pub const CERTIFY_GAP: f64 = 1e-6;

const TAG_MONO: u64 = 0xB00;
const TAG_SEARCH: u64 = 0xC00;
const SEARCH_LIMIT: u64 = 1_000_000;

fn operator_params(nu: f64, q: f64) -> FluidParams {
    FluidParams::new(1.0, 0.0, nu, 1.0, 2.0, q).expect("operator parameters are admissible")
}

fn pairing(
    op: fn(&MatD, &MatD, &FluidParams) -> ysl_core::Result<MatD>,
    x1: &MatD,
    x2: &MatD,
    omega: &MatD,
    prm: &FluidParams,
) -> ysl_core::Result<f64> {
    let m1 = op(&x1.sym(), &(x1.skew() - *omega), prm)?;
    let m2 = op(&x2.sym(), &(x2.skew() - *omega), prm)?;
    (m1 - m2).inner(&(*x1 - *x2))
}

/// `(M(X₁) − M(X₂)):(X₁ − X₂) ≥ −tol` for the modified plastic operator.
pub fn mpo_monotonicity(seed: u64, pairs: u64, tol: f64) -> Check {
    let mut acc = Tally::default();
    let mut gi = 0;
    for nu in NUS {
        for q in QS {
            let prm = operator_params(nu, q);
            acc = acc.merge(sample_tally(seed, TAG_MONO + gi, pairs, |rng, start, n| {
                let mut t = Tally::default();
                for i in start..start + n {
                    let d = dim_of(i);
                    let omega = skew_mat(rng, d, 2.0);
                    let x1 = match i % 8 {
                        6 => omega + uniform_mat(rng, d, 1e-6),
                        _ => uniform_mat(rng, d, 2.0),
                    };
                    let x2 = match i % 8 {
                        5 => x1 + uniform_mat(rng, d, 1e-6),
                        7 => x1,
                        _ => uniform_mat(rng, d, 2.0),
                    };
                    let v = pairing(modified_plastic_operator, &x1, &x2, &omega, &prm).unwrap_or(f64::NAN);
                    t.record(v, !(v >= -tol), || {
                        Failure::new("mpo_monotone", Some(&prm), v, "negative pairing")
                            .with("x1", &x1)
                            .with("x2", &x2)
                            .with("omega", &omega)
                    });
                }
                t
            }));
            gi += 1;
        }
    }
    Check::from_tally("mpo_monotone", tol, acc)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub params: ParamSet,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub omega: Vec<f64>,
    /// `(P(X₁) − P(X₂)):(X₁ − X₂)` for the unmodified operator; negative.
    pub po_pairing: f64,
    /// The same pairing for the modified operator; non-negative.
    pub mpo_pairing: f64,
    pub tries: u64,
}

/// Seeded search for a pair on which the unmodified plastic operator fails
/// monotonicity at `q = 2`, `ν = 0.5`.
pub fn po_counterexample(seed: u64) -> Option<Counterexample> {
    let prm = operator_params(0.5, 2.0);
    let mut rng = chunk_rng(seed, TAG_SEARCH, 0);
    for tries in 1..=SEARCH_LIMIT {
        let omega = skew_mat(&mut rng, 2, 1.0);
        let x1 = uniform_mat(&mut rng, 2, 2.0);
        let x2 = uniform_mat(&mut rng, 2, 2.0);
        let Ok(po) = pairing(plastic_operator, &x1, &x2, &omega, &prm) else {
            continue;
        };
        if po < -CERTIFY_GAP {
            let mpo = pairing(modified_plastic_operator, &x1, &x2, &omega, &prm).ok()?;
            return Some(Counterexample {
                params: ParamSet::from(&prm),
                x1: x1.entries().collect(),
                x2: x2.entries().collect(),
                omega: omega.entries().collect(),
                po_pairing: po,
                mpo_pairing: mpo,
                tries,
            });
        }
    }
    None
}

pub fn suite_monotonicity(seed: u64, budget: &Budget) -> Result<Report> {
    let mono = mpo_monotonicity(seed, budget.pairs, MONOTONE_TOL);
    let found = po_counterexample(seed);
    let search = Check {
        name: "po_counterexample".into(),
        tolerance: CERTIFY_GAP,
        samples: found.as_ref().map_or(SEARCH_LIMIT, |c| c.tries),
        worst_margin: found.as_ref().map(|c| c.po_pairing),
        failure_count: 0,
        passed: found.as_ref().is_some_and(|c| c.po_pairing < -CERTIFY_GAP && c.mpo_pairing >= -MONOTONE_TOL),
        failures: Vec::new(),
    };
    let params = NUS
        .iter()
        .flat_map(|&nu| QS.iter().map(move |&q| ParamSet::from(&operator_params(nu, q))))
        .collect();
    Ok(Report::new(Suite::Monotonicity, seed, params, vec![mono, search]).metric("po_counterexample", found))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pair_gives_zero() {
        let prm = operator_params(0.3, 2.5);
        let x = MatD::from_rows2([[0.4, -1.0], [0.2, 0.7]]);
        let omega = MatD::skew2(0.1);
        assert_eq!(pairing(modified_plastic_operator, &x, &x, &omega, &prm).unwrap(), 0.0);
    }

    #[test]
    fn small_run_and_counterexample() {
        assert!(mpo_monotonicity(11, 400, MONOTONE_TOL).passed);
        let c = po_counterexample(11).expect("counterexample");
        assert!(c.po_pairing < -CERTIFY_GAP && c.mpo_pairing >= 0.0);
    }
}
