//! Acceptance gate: one line per criterion, non-zero exit on any failure.

use std::f64::consts::SQRT_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use ysl::galerkin::{Galerkin, GalerkinConfig, GalerkinRun, SpectralState};
use ysl::verify::coercivity::{coercivity_check, stress_bound_check, REL_SLACK};
use ysl::verify::monotonicity::{mpo_monotonicity, po_counterexample, CERTIFY_GAP, MONOTONE_TOL};
use ysl::verify::regularization::{regularization_gap_check, regularization_rate_check, FINAL_REL_TOL, GAP_REL_SLACK};
use ysl::verify::subgradient::{
    ball_inclusion_check, bingham_plug_check, ellipsoid_oracle_check, gradient_fidelity_check, implicit_law_check,
    r_q_minimization_check, BOUNDARY_BAND, GRADIENT_REL_TOL, IMPLICIT_REL_TOL, R_Q_TOL,
};
use ysl::verify::Check;
use ysl_core::channel::{Channel, ChannelConfig, Scheme, NO_SLIP_FRICTION};
use ysl_core::{FluidParams, MatD, MicroRotation};

const SEED: u64 = 7;

const GRADIENT_POINTS: u64 = 12_000;
const PER_POINT: u64 = 100_000;
const ELLIPSOID_POINTS: u64 = 1_000;
const BALL_POINTS: u64 = 10_000;
const MPO_PAIRS: u64 = 100_000;
const RATE_POINTS: u64 = 50;
const GAP_PER_POINT: u64 = 10_000;
const IMPLICIT_POINTS: u64 = 10_000;

const CHANNEL_CELLS: usize = 400;
const PLUG_HALF_WIDTH: f64 = 0.25;
const BINGHAM_L2_TOL: f64 = 0.02;
const NEWTONIAN_L2_TOL: f64 = 0.01;

const GALERKIN_MODES: usize = 16;
const ORDER_DTS: [f64; 3] = [1.4e-3, 7e-4, 3.5e-4];
const ORDER_REG_N: u64 = 1_000;
const MIN_ORDER: f64 = 3.5;
const SUP_REG_N: [u64; 3] = [10, 1_000, 1_000_000];
const SUP_DT: f64 = 5e-4;
const SUP_REL_TOL: f64 = 1e-3;

struct Outcome {
    passed: bool,
    detail: String,
}

fn checks(list: &[&Check]) -> Outcome {
    let passed = list.iter().all(|c| c.passed);
    let detail = list
        .iter()
        .map(|c| format!("{} {}/{} bad", c.name, c.failure_count, c.samples))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome { passed, detail }
}

fn gradient() -> Outcome {
    checks(&[&gradient_fidelity_check(SEED, GRADIENT_POINTS, GRADIENT_REL_TOL)])
}

fn coercivity() -> Outcome {
    let [v, vn, mutant] = coercivity_check(SEED, PER_POINT, REL_SLACK);
    let mut out = checks(&[&v, &vn]);
    out.passed &= mutant.passed;
    out.detail += &format!(", mutant control caught {}", mutant.failure_count);
    out
}

fn stress_bound() -> Outcome {
    checks(&[&stress_bound_check(SEED, PER_POINT, REL_SLACK)])
}

fn subdifferential() -> Outcome {
    let ellipsoid = ellipsoid_oracle_check(SEED, ELLIPSOID_POINTS, BOUNDARY_BAND);
    let bingham = bingham_plug_check(SEED, ELLIPSOID_POINTS, BOUNDARY_BAND);
    let [inner, outer] = ball_inclusion_check(SEED, BALL_POINTS);
    let r_q = r_q_minimization_check(R_Q_TOL);
    checks(&[&ellipsoid, &bingham, &inner, &outer, &r_q])
}

fn monotonicity() -> Outcome {
    let mono = mpo_monotonicity(SEED, MPO_PAIRS, MONOTONE_TOL);
    let mut out = checks(&[&mono]);
    match po_counterexample(SEED) {
        Some(c) => {
            out.passed &= c.po_pairing < -CERTIFY_GAP && c.mpo_pairing >= -MONOTONE_TOL;
            out.detail += &format!(
                "; po pair x1 {:?} x2 {:?} omega {:?}: po pairing {:e}, mpo pairing {:e}",
                c.x1, c.x2, c.omega, c.po_pairing, c.mpo_pairing
            );
        }
        None => {
            out.passed = false;
            out.detail += "; no po counterexample found";
        }
    }
    out
}

fn regularization() -> Outcome {
    let rate = regularization_rate_check(SEED, RATE_POINTS, FINAL_REL_TOL);
    let gap = regularization_gap_check(SEED, GAP_PER_POINT, GAP_REL_SLACK);
    let mut out = checks(&[&rate.check, &gap]);
    out.detail += &format!(", observed order {:.3}", rate.observed_order);
    out
}

/// Steady profile of the shear-reduced scalar balance `−(σ)' = G`,
/// `σ = μ_eff u' + τ_eff sign(u')`, with no-slip walls.
fn bingham_oracle(y: f64, g: f64, h: f64, mu_eff: f64, tau_eff: f64) -> f64 {
    let yc = (tau_eff / g).min(h);
    let a = y.abs().max(yc);
    g / (2.0 * mu_eff) * (h * h - a * a) - tau_eff / mu_eff * (h - a)
}

fn channel_run(tau: f64) -> ysl_core::Result<(Channel, ysl_core::channel::ChannelRun)> {
    let mut cfg = ChannelConfig {
        half_width: 1.0,
        cells: CHANNEL_CELLS,
        dt: 0.02,
        t_end: 60.0,
        body_force: 1.0,
        friction: NO_SLIP_FRICTION,
        params: FluidParams::bingham(1.0, tau)?,
        reg_n: 1,
        omega: MicroRotation::zero(2)?,
        steady_tol: 1e-9,
        scheme: Scheme::Implicit,
        cfl: 0.45,
    };
    cfg.reg_n = cfg.coupled_reg_n();
    let ch = Channel::new(cfg)?;
    let run = ch.run_to_steady()?;
    Ok((ch, run))
}

fn l2_error(ch: &Channel, u: &[f64], tau_eff: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (y, u) in ch.centers().zip(u) {
        let e = bingham_oracle(y, 1.0, 1.0, 0.5, tau_eff);
        num += (u - e) * (u - e);
        den += e * e;
    }
    (num / den).sqrt()
}

fn channel() -> Outcome {
    let tau = PLUG_HALF_WIDTH * SQRT_2;
    let body = || -> ysl_core::Result<Outcome> {
        let (ch, run) = channel_run(tau)?;
        let plugs = ch.extract_plug(&run.state)?;
        let half = match plugs.as_slice() {
            [p] => 0.5 * (p.hi - p.lo),
            _ => f64::NAN,
        };
        let err = l2_error(&ch, &run.state.u, tau / SQRT_2);
        let (newt, newt_run) = channel_run(0.0)?;
        let newt_err = l2_error(&newt, &newt_run.state.u, 0.0);
        let cell = ch.config().cell_width();
        Ok(Outcome {
            passed: run.steady
                && newt_run.steady
                && (half - PLUG_HALF_WIDTH).abs() <= cell
                && err <= BINGHAM_L2_TOL
                && newt_err <= NEWTONIAN_L2_TOL,
            detail: format!(
                "reg_n {}, plug half-width {half:.5} (cell {cell}), L2 error {err:.3e}, newtonian L2 error {newt_err:.3e}",
                ch.config().reg_n
            ),
        })
    };
    body().unwrap_or_else(|e| Outcome {
        passed: false,
        detail: e.to_string(),
    })
}

fn galerkin_run(reg_n: u64, dt: f64) -> ysl::error::Result<GalerkinRun> {
    let grid = GalerkinConfig::dealiased_grid(GALERKIN_MODES);
    let cfg = GalerkinConfig {
        modes: GALERKIN_MODES,
        grid,
        params: FluidParams::new(1.0, 0.5, 0.5, 0.3, 2.5, 2.0)?,
        reg_n,
        omega: MicroRotation::constant(MatD::skew2(0.5))?,
        dt,
        t_end: 1.0,
        record_every: 10,
    };
    Galerkin::new(cfg)?.integrate(SpectralState::taylor_green(grid, GALERKIN_MODES, 1.0))
}

fn galerkin() -> Outcome {
    let jobs: Vec<(u64, f64)> = ORDER_DTS
        .iter()
        .map(|&dt| (ORDER_REG_N, dt))
        .chain(SUP_REG_N.iter().map(|&n| (n, SUP_DT)))
        .collect();
    let runs: ysl::error::Result<Vec<GalerkinRun>> = jobs.par_iter().map(|&(n, dt)| galerkin_run(n, dt)).collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: e.to_string(),
            }
        }
    };
    let residuals: Vec<f64> = runs[..3].iter().map(|r| r.max_abs_residual).collect();
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let margin = runs.iter().map(|r| r.worst_bound_margin).fold(f64::INFINITY, f64::min);
    let sups: Vec<f64> = runs[3..].iter().map(|r| r.sup_energy).collect();
    let hi = sups.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = sups.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = (hi - lo) / hi;
    Outcome {
        passed: orders.iter().all(|&o| o >= MIN_ORDER) && margin >= 0.0 && variation <= SUP_REL_TOL,
        detail: format!(
            "residuals [{}], orders {orders:.3?}, bound margin {margin:e}, sup-energy variation {variation:e}",
            residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn implicit_law() -> Outcome {
    checks(&[&implicit_law_check(SEED, IMPLICIT_POINTS, IMPLICIT_REL_TOL)])
}

fn verify_into(dir: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ysl"))
        .args(["verify", "--suite", "all", "--seed", "7", "--out"])
        .arg(dir)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("verify exited with {status}"))
    }
}

fn reproducibility() -> Outcome {
    let body = || -> Result<String, String> {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        verify_into(a.path())?;
        verify_into(b.path())?;
        let mut names: Vec<_> = std::fs::read_dir(a.path())
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err("no reports written".into());
        }
        for name in &names {
            let x = std::fs::read(a.path().join(name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.path().join(name)).map_err(|e| e.to_string())?;
            if x != y {
                return Err(format!("{} differs", name.to_string_lossy()));
            }
        }
        Ok(format!("{} reports byte-identical", names.len()))
    };
    match body() {
        Ok(detail) => Outcome { passed: true, detail },
        Err(detail) => Outcome { passed: false, detail },
    }
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { name: "gradient fidelity", budget: Some(Duration::from_secs(30)), run: gradient },
        Criterion { name: "coercivity", budget: Some(Duration::from_secs(60)), run: coercivity },
        Criterion { name: "stress bound", budget: None, run: stress_bound },
        Criterion { name: "subdifferential geometry", budget: None, run: subdifferential },
        Criterion { name: "monotonicity", budget: None, run: monotonicity },
        Criterion { name: "regularization consistency", budget: None, run: regularization },
        Criterion { name: "channel oracle", budget: Some(Duration::from_secs(120)), run: channel },
        Criterion { name: "galerkin monitors", budget: Some(Duration::from_secs(180)), run: galerkin },
        Criterion { name: "implicit law equivalence", budget: None, run: implicit_law },
        Criterion { name: "reproducibility", budget: None, run: reproducibility },
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut out = (c.run)();
        let elapsed = start.elapsed();
        if let Some(budget) = c.budget {
            if elapsed > budget {
                out.passed = false;
                out.detail += &format!("; over the {}s budget", budget.as_secs());
            }
        }
        if !out.passed {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {} ({:.1}s): {}",
            if out.passed { "PASS" } else { "FAIL" },
            i + 1,
            c.name,
            elapsed.as_secs_f64(),
            out.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
