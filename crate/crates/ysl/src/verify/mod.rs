//! Seeded property suites with JSON reports.
//!
//! Every check draws its samples in fixed-size chunks, each chunk from its
//! own ChaCha stream, and folds the chunk results in chunk order. Reports are
//! therefore identical for a given seed whatever the thread count.

pub mod coercivity;
pub mod korn;
pub mod monotonicity;
pub mod regularization;
pub mod subgradient;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use ysl_core::{FluidParams, MatD};

pub use korn::korn_ratio;
pub use monotonicity::{po_counterexample, mpo_monotonicity, suite_monotonicity, Counterexample};
pub use regularization::{regularization_gap_check, regularization_rate_check, suite_regularization};
pub use subgradient::{
    ball_inclusion_check, ellipsoid_oracle_check, gradient_fidelity_check, implicit_law_check,
    r_q_minimization_check, suite_subgradient,
};

/// Failures kept verbatim per check; the rest are only counted.
pub const MAX_FAILURES: usize = 20;
const CHUNK: u64 = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Coercivity,
    Subgradient,
    Monotonicity,
    Korn,
    Regularization,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Coercivity,
        Suite::Subgradient,
        Suite::Monotonicity,
        Suite::Korn,
        Suite::Regularization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Coercivity => "coercivity",
            Suite::Subgradient => "subgradient",
            Suite::Monotonicity => "monotonicity",
            Suite::Korn => "korn",
            Suite::Regularization => "regularization",
        }
    }
}

/// Sample counts of the suites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Budget {
    /// Random matrices per parameter point for pointwise inequalities.
    pub per_point: u64,
    /// Random pairs per parameter point for operator monotonicity.
    pub pairs: u64,
    /// Points for the gradient comparison, spread over the grid.
    pub gradient_points: u64,
    /// Boundary-straddling points for the ellipsoid oracle.
    pub boundary_points: u64,
    /// Points for each ball inclusion.
    pub ball_points: u64,
    /// Flow-branch points for the implicit law.
    pub implicit_points: u64,
    /// Fixed flow-branch points in the regularization table.
    pub regularization_points: u64,
    /// Random fields per exponent in the Korn suite.
    pub korn_fields: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            per_point: 100_000,
            pairs: 100_000,
            gradient_points: 12_000,
            boundary_points: 1_000,
            ball_points: 10_000,
            implicit_points: 10_000,
            regularization_points: 50,
            korn_fields: 4,
        }
    }
}

impl Budget {
    /// Scales every count by `per_point / default`, keeping at least one.
    pub fn scaled(per_point: u64) -> Self {
        let d = Self::default();
        let f = per_point as f64 / d.per_point as f64;
        let s = |n: u64| ((n as f64 * f).round() as u64).max(1);
        Self {
            per_point,
            pairs: s(d.pairs),
            gradient_points: s(d.gradient_points),
            boundary_points: s(d.boundary_points),
            ball_points: s(d.ball_points),
            implicit_points: s(d.implicit_points),
            regularization_points: d.regularization_points,
            korn_fields: d.korn_fields,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamSet {
    pub mu1: f64,
    pub mu2: f64,
    pub nu: f64,
    pub tau_star: f64,
    pub p: f64,
    pub q: f64,
    #[serde(skip_serializing_if = "is_zero")]
    pub a1: f64,
    #[serde(skip_serializing_if = "is_zero")]
    pub a2: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl From<&FluidParams> for ParamSet {
    fn from(p: &FluidParams) -> Self {
        Self {
            mu1: p.mu1(),
            mu2: p.mu2(),
            nu: p.nu(),
            tau_star: p.tau_star(),
            p: p.p(),
            q: p.q(),
            a1: p.a1(),
            a2: p.a2(),
        }
    }
}

/// A failing case with everything needed to replay it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub check: String,
    pub params: Option<ParamSet>,
    /// Named inputs, matrices as row-major entries.
    pub inputs: BTreeMap<String, Vec<f64>>,
    pub margin: f64,
    pub detail: String,
}

impl Failure {
    pub fn new(check: &str, params: Option<&FluidParams>, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            check: check.to_string(),
            params: params.map(ParamSet::from),
            inputs: BTreeMap::new(),
            margin,
            detail: detail.into(),
        }
    }

    pub fn with(mut self, name: &str, m: &MatD) -> Self {
        self.inputs.insert(name.to_string(), m.entries().collect());
        self
    }

    pub fn with_values(mut self, name: &str, v: Vec<f64>) -> Self {
        self.inputs.insert(name.to_string(), v);
        self
    }
}

/// Running result of one check; `merge` is associative.
#[derive(Clone, Debug, PartialEq)]
pub struct Tally {
    pub samples: u64,
    /// Smallest normalized margin; negative means a violation.
    pub worst_margin: f64,
    pub failure_count: u64,
    pub failures: Vec<Failure>,
}

impl Default for Tally {
    fn default() -> Self {
        Self {
            samples: 0,
            worst_margin: f64::INFINITY,
            failure_count: 0,
            failures: Vec::new(),
        }
    }
}

impl Tally {
    /// Records one sample; `failure` is built only when `violated`.
    pub fn record(&mut self, margin: f64, violated: bool, failure: impl FnOnce() -> Failure) {
        self.samples += 1;
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
        if violated {
            self.failure_count += 1;
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(failure());
            }
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.samples += other.samples;
        if other.worst_margin < self.worst_margin || other.worst_margin.is_nan() {
            self.worst_margin = other.worst_margin;
        }
        self.failure_count += other.failure_count;
        let room = MAX_FAILURES - self.failures.len();
        self.failures.extend(other.failures.into_iter().take(room));
        self
    }
}

/// Outcome of one named check inside a suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub tolerance: f64,
    pub samples: u64,
    pub worst_margin: Option<f64>,
    pub failure_count: u64,
    pub passed: bool,
    #[serde(skip)]
    pub failures: Vec<Failure>,
}

impl Check {
    pub fn from_tally(name: &str, tolerance: f64, t: Tally) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            samples: t.samples,
            worst_margin: t.worst_margin.is_finite().then_some(t.worst_margin),
            failure_count: t.failure_count,
            passed: t.failure_count == 0 && !t.worst_margin.is_nan(),
            failures: t.failures,
        }
    }

    /// A check whose pass condition is an expected failure count, such as a
    /// mutation control that must be caught.
    pub fn expect_detection(name: &str, t: Tally) -> Self {
        Self {
            name: name.to_string(),
            tolerance: 0.0,
            samples: t.samples,
            worst_margin: t.worst_margin.is_finite().then_some(t.worst_margin),
            failure_count: t.failure_count,
            passed: t.failure_count > 0,
            failures: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub params: Vec<ParamSet>,
    pub samples: u64,
    pub worst_margin: Option<f64>,
    pub failures: Vec<Failure>,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, serde_json::Value>,
}

impl Report {
    pub fn new(suite: Suite, seed: u64, params: Vec<ParamSet>, checks: Vec<Check>) -> Self {
        let samples = checks.iter().map(|c| c.samples).sum();
        let worst_margin = checks
            .iter()
            .filter(|c| c.tolerance > 0.0)
            .filter_map(|c| c.worst_margin)
            .reduce(f64::min);
        let failures: Vec<Failure> = checks
            .iter()
            .flat_map(|c| c.failures.iter().cloned())
            .take(MAX_FAILURES)
            .collect();
        let passed = checks.iter().all(|c| c.passed);
        Self {
            suite,
            params,
            samples,
            worst_margin,
            failures,
            seed,
            passed,
            checks,
            metrics: BTreeMap::new(),
        }
    }

    pub fn metric(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.metrics.insert(key.to_string(), v);
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_suite(suite: Suite, seed: u64, budget: &Budget) -> crate::error::Result<Report> {
    match suite {
        Suite::Coercivity => coercivity::suite_coercivity(seed, budget),
        Suite::Subgradient => subgradient::suite_subgradient(seed, budget),
        Suite::Monotonicity => monotonicity::suite_monotonicity(seed, budget),
        Suite::Korn => korn::suite_korn(seed, budget),
        Suite::Regularization => regularization::suite_regularization(seed, budget),
    }
}

/// The stream for chunk `chunk` of the check identified by `tag`.
pub fn chunk_rng(seed: u64, tag: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(chunk);
    rng
}

/// Runs `f(rng, first_index, count)` over `total` samples split into
/// chunks and folds the tallies in chunk order.
pub fn sample_tally<F>(seed: u64, tag: u64, total: u64, f: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng, u64, u64) -> Tally + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, tag, c);
            let start = c * CHUNK;
            f(&mut rng, start, CHUNK.min(total - start))
        })
        .collect();
    parts.into_iter().fold(Tally::default(), Tally::merge)
}

/// Entries i.i.d. uniform in `[−lim, lim]`.
pub fn uniform_mat<R: Rng>(rng: &mut R, dim: usize, lim: f64) -> MatD {
    let mut m = MatD::zeros(dim).expect("dimension 2 or 3");
    for i in 0..dim {
        for j in 0..dim {
            m.set(i, j, rng.random_range(-lim..=lim));
        }
    }
    m
}

pub fn skew_mat<R: Rng>(rng: &mut R, dim: usize, lim: f64) -> MatD {
    uniform_mat(rng, dim, lim).skew()
}

/// A point `Ω + tZ` whose flow criterion has norm `10^u`, `u ∈ [−8, −2]`.
pub fn near_plug<R: Rng>(rng: &mut R, omega: &MatD, nu: f64) -> MatD {
    loop {
        let z = uniform_mat(rng, omega.dim(), 1.0);
        let crit = (z.sym() + z.skew() * nu).norm();
        if crit > 1e-3 {
            let target = 10f64.powf(rng.random_range(-8.0..=-2.0));
            return *omega + z * (target / crit);
        }
    }
}

/// Dimension used for sample `i`: 2 and 3 alternate.
pub fn dim_of(i: u64) -> usize {
    if i % 2 == 0 {
        2
    } else {
        3
    }
}

/// `p ∈ {2, 2.2, 3}`, `q ∈ {2, 3}`, `ν ∈ {0, ½, 1, 4}` with `μ₁ = 1`,
/// `μ₂ = 0.7` (0 when `ν = 0`) and `τ* = 0.8`.
pub fn parameter_grid() -> Vec<FluidParams> {
    let mut out = Vec::new();
    for p in [2.0, 2.2, 3.0] {
        for q in [2.0, 3.0] {
            for nu in [0.0, 0.5, 1.0, 4.0] {
                let mu2 = if nu == 0.0 { 0.0 } else { 0.7 };
                out.push(FluidParams::new(1.0, mu2, nu, 0.8, p, q).expect("grid parameters are admissible"));
            }
        }
    }
    out
}

pub fn grid_params() -> Vec<ParamSet> {
    parameter_grid().iter().map(ParamSet::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_merge_is_associative() {
        let mk = |m: f64, fail: bool| {
            let mut t = Tally::default();
            t.record(m, fail, || Failure::new("c", None, m, ""));
            t
        };
        let (a, b, c) = (mk(0.5, false), mk(-0.1, true), mk(0.2, false));
        let left = a.clone().merge(b.clone()).merge(c.clone());
        let right = a.merge(b.merge(c));
        assert_eq!(left, right);
        assert_eq!(left.failure_count, 1);
        assert_eq!(left.worst_margin, -0.1);
    }

    #[test]
    fn chunked_sampling_is_thread_independent() {
        let run = || {
            sample_tally(7, 3, 5000, |rng, _, n| {
                let mut t = Tally::default();
                for _ in 0..n {
                    let x: f64 = rng.random();
                    t.record(x, x < 1e-3, || Failure::new("u", None, x, ""));
                }
                t
            })
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, four);
        assert_eq!(one.samples, 5000);
    }

    #[test]
    fn near_plug_hits_target_band() {
        let mut rng = chunk_rng(1, 1, 0);
        let omega = MatD::skew2(0.4);
        for _ in 0..100 {
            let x = near_plug(&mut rng, &omega, 0.5);
            let crit = (x.sym() + (x.skew() - omega) * 0.5).norm();
            assert!((1e-8 * 0.999..=1e-2 * 1.001).contains(&crit));
        }
    }
}
