//! Runners behind the subcommands: pointwise stress tables, plug queries,
//! channel and torus runs, and parameter sweeps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use ysl_core::channel::Channel;
use ysl_core::constitutive::{stress_exact, stress_regularized};
use ysl_core::subdiff::{self, violation_witness};
use ysl_core::{tol, MatD};

use crate::config::{self, ChannelSpec, CheckPlugConfig, EvalConfig, GalerkinSpec, InitSpec, RunKind, SweepSpec};
use crate::error::{Error, Result};
use crate::galerkin::{Galerkin, SpectralState};
use crate::output::{num, write_table, write_table_file, IndexEntry, Manifest, SweepIndex};

/// Worker count: `requested`, capped by `YSL_THREADS` when set.
pub fn worker_threads(requested: Option<usize>) -> usize {
    let cap = std::env::var("YSL_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let want = requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.map_or(want, |c| want.min(c))
}

fn entry_names(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim * dim).map(move |k| format!("{prefix}{}{}", k / dim + 1, k % dim + 1))
}

/// Exact stress, plug flag and regularized stresses for every input matrix.
pub fn eval_stress<W: Write>(cfg: &EvalConfig, input: &Path, out: W) -> Result<()> {
    let prm = cfg.fluid.build()?;
    let omega = cfg.omega.constant(cfg.dim)?;
    let xs = config::read_matrices(input, cfg.dim)?;
    let mut header = vec!["row".to_string(), "plug".to_string()];
    header.extend(entry_names("s", cfg.dim));
    for n in &cfg.reg_n {
        header.extend(entry_names(&format!("n{n}_s"), cfg.dim));
    }
    let mut rows = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        let tol = cfg.tol_plug.unwrap_or_else(|| tol::plug_tol(x.norm()));
        let exact = stress_exact(x, &omega, &prm, tol)?;
        let mut row = vec![(i + 1).to_string(), u8::from(exact.is_plug()).to_string()];
        match exact.flow() {
            Some(s) => row.extend(s.entries().map(num)),
            None => row.extend(std::iter::repeat(String::new()).take(cfg.dim * cfg.dim)),
        }
        for &n in &cfg.reg_n {
            row.extend(stress_regularized(x, &omega, &prm, n)?.entries().map(num));
        }
        rows.push(row);
    }
    write_table(out, &header, rows).map_err(|e| Error::io(input, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlugQuery {
    pub stress: Vec<f64>,
    pub member: bool,
    /// `|X*_s|^{q'} + ν^{1−q'}|X*_a|^{q'}`, compared against `τ̂^{q'}`.
    pub gauge: Option<f64>,
    pub witness: Option<WitnessReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub direction: Vec<f64>,
    pub pairing: f64,
    pub derivative: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlugReport {
    pub r_q: f64,
    pub r_star: f64,
    pub tau_star: f64,
    pub cap: f64,
    pub queries: Vec<PlugQuery>,
}

/// Membership of each query in the subdifferential at a plug point, with a
/// violating direction for non-members.
pub fn check_plug(cfg: &CheckPlugConfig) -> Result<PlugReport> {
    let prm = cfg.fluid.build()?;
    prm.require_potential()?;
    let omega = cfg.omega.constant(cfg.dim)?;
    let plug = match &cfg.plug_point {
        Some(e) => MatD::from_row_major(cfg.dim, e)?,
        None => omega,
    };
    let queries = cfg
        .queries
        .iter()
        .map(|entries| {
            let x = MatD::from_row_major(cfg.dim, entries)?;
            let member = subdiff::in_subdifferential_at_plug(&x, &omega, &prm, Some(&plug))?;
            let gauge = (prm.nu() > 0.0)
                .then(|| subdiff::ellipsoid_gauge(&x, &prm))
                .transpose()?;
            let witness = match (member, prm.nu() > 0.0) {
                (false, true) => violation_witness(&x, &prm).ok().map(|w| WitnessReport {
                    direction: w.direction.entries().collect(),
                    pairing: w.pairing,
                    derivative: w.derivative,
                    certified: w.certifies(),
                }),
                _ => None,
            };
            Ok(PlugQuery {
                stress: entries.clone(),
                member,
                gauge,
                witness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlugReport {
        r_q: subdiff::r_q(&prm),
        r_star: subdiff::r_star(&prm),
        tau_star: prm.tau_star(),
        cap: prm.tau_hat().powf(prm.q_conj()),
        queries,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs the channel to steady state and writes `profile.csv`, `ledger.csv`,
/// `plug.csv` and `manifest.json` into `out`.
pub fn run_channel(spec: &ChannelSpec, base: &Path, out: &Path) -> Result<Manifest> {
    let cfg = spec.build(base)?;
    let channel = Channel::new(cfg.clone())?;
    let run = channel.run_to_steady()?;
    create_dir(out)?;
    let profile = channel.profile(&run.state)?;
    write_table_file(
        &out.join("profile.csv"),
        &["y", "u", "s12", "plug"],
        profile
            .iter()
            .map(|r| vec![num(r.y), num(r.u), num(r.s12), u8::from(r.plug).to_string()]),
    )?;
    write_table_file(
        &out.join("ledger.csv"),
        &["t", "kinetic", "dissipation", "boundary_work", "forcing_work", "residual"],
        run.ledger.iter().map(|e| {
            vec![
                num(e.t),
                num(e.kinetic),
                num(e.dissipation),
                num(e.boundary_work),
                num(e.forcing_work),
                num(e.residual),
            ]
        }),
    )?;
    let plug = channel.extract_plug(&run.state)?;
    write_table_file(
        &out.join("plug.csv"),
        &["lo", "hi"],
        plug.iter().map(|iv| vec![num(iv.lo), num(iv.hi)]),
    )?;
    let (wall_lo, wall_hi) = channel.wall_velocities(&run.state)?;
    let summary = json!({
        "steady": run.steady,
        "steps": run.state.step,
        "t": run.state.t,
        "reg_n": cfg.reg_n,
        "cumulative_residual": run.cumulative_residual,
        "plug": plug.iter().map(|iv| [iv.lo, iv.hi]).collect::<Vec<_>>(),
        "wall_velocity": [wall_lo, wall_hi],
    });
    Manifest::write(
        out,
        RunKind::Channel,
        serde_json::to_value(spec)?,
        None,
        &["profile.csv", "ledger.csv", "plug.csv"],
        summary,
    )
}

/// Integrates the torus problem and writes `timeseries.csv` and
/// `manifest.json` into `out`.
pub fn run_galerkin(spec: &GalerkinSpec, base: &Path, out: &Path) -> Result<Manifest> {
    let cfg = spec.build(base)?;
    let (m, k) = (cfg.grid, cfg.modes);
    let (init, seed) = match spec.init {
        InitSpec::TaylorGreen(a) => (SpectralState::taylor_green(m, k, a), None),
        InitSpec::Random { amplitude, seed } => (SpectralState::random(m, k, amplitude, seed), Some(seed)),
    };
    let mut solver = Galerkin::new(cfg)?;
    let run = solver.integrate(init)?;
    create_dir(out)?;
    write_table_file(
        &out.join("timeseries.csv"),
        &[
            "t",
            "energy",
            "grad_p_integral",
            "stress_dual_norm",
            "identity_residual",
            "bound_lhs",
            "bound_rhs",
            "divergence",
        ],
        run.rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.energy),
                num(r.grad_p_integral),
                num(r.stress_dual_norm),
                num(r.identity_residual),
                num(r.bound_lhs),
                num(r.bound_rhs),
                num(r.divergence),
            ]
        }),
    )?;
    let summary = json!({
        "c0": run.c0,
        "max_abs_identity_residual": run.max_abs_residual,
        "worst_bound_margin": run.worst_bound_margin,
        "bound_holds": run.worst_bound_margin >= 0.0,
        "sup_energy": run.sup_energy,
        "max_divergence": run.max_divergence,
        "boundary_work": "absent on the torus; interior terms only",
    });
    let seed = seed.or(match spec.omega {
        config::OmegaSpec::Random { seed, .. } => Some(seed),
        _ => None,
    });
    Manifest::write(
        out,
        RunKind::Galerkin,
        serde_json::to_value(spec)?,
        seed,
        &["timeseries.csv"],
        summary,
    )
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub entries: Vec<IndexEntry>,
    /// The first failure, by run number.
    pub first_error: Option<Error>,
}

/// Expands the grid and runs every point in parallel; each run writes to
/// `out/run-NNN/` and is recorded in `out/index.json` as it finishes.
pub fn run_sweep(spec: &SweepSpec, base: &Path, jobs: Option<usize>) -> Result<SweepOutcome> {
    let runs = spec.expand()?;
    let out = base.join(&spec.out);
    create_dir(&out)?;
    let index = SweepIndex::create(out.join("index.json"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads(jobs))
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let results: Vec<(usize, PathBuf, Result<Manifest>)> = pool.install(|| {
        runs.par_iter()
            .enumerate()
            .map(|(i, value)| {
                let dir = out.join(format!("run-{i:03}"));
                let origin = PathBuf::from(format!("sweep run {i}"));
                let text = value.to_string();
                let res = match spec.kind {
                    RunKind::Channel => config::parse::<ChannelSpec>(&text, &origin)
                        .and_then(|s| run_channel(&s, base, &dir)),
                    RunKind::Galerkin => config::parse::<GalerkinSpec>(&text, &origin)
                        .and_then(|s| run_galerkin(&s, base, &dir)),
                };
                let entry = IndexEntry {
                    run: i,
                    dir: PathBuf::from(format!("run-{i:03}")),
                    status: match &res {
                        Ok(_) => "ok".to_string(),
                        Err(e) => format!("error: {e}"),
                    },
                    content_hash: res.as_ref().ok().map(|m| m.content_hash.clone()),
                };
                let res = index.append(entry).and(res);
                (i, dir, res)
            })
            .collect()
    });
    let mut entries = Vec::new();
    let mut first_error = None;
    for (i, dir, res) in results {
        match res {
            Ok(m) => entries.push(IndexEntry {
                run: i,
                dir,
                status: "ok".into(),
                content_hash: Some(m.content_hash),
            }),
            Err(e) => {
                entries.push(IndexEntry {
                    run: i,
                    dir,
                    status: format!("error: {e}"),
                    content_hash: None,
                });
                first_error.get_or_insert(e);
            }
        }
    }
    Ok(SweepOutcome { entries, first_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FluidSpec;

    fn fluid() -> FluidSpec {
        FluidSpec {
            mu1: 1.0,
            mu2: 0.5,
            nu: 0.5,
            tau_star: 1.0,
            p: 2.0,
            q: 2.0,
            a1: 0.0,
            a2: 0.0,
        }
    }

    #[test]
    fn plug_queries_with_witness() {
        let cfg = CheckPlugConfig {
            fluid: fluid(),
            dim: 2,
            omega: config::OmegaSpec::Constant(0.3),
            plug_point: None,
            queries: vec![vec![0.1, 0.0, 0.0, 0.1], vec![3.0, 0.0, 0.0, -3.0]],
        };
        let rep = check_plug(&cfg).unwrap();
        assert!(rep.queries[0].member && rep.queries[0].witness.is_none());
        let w = rep.queries[1].witness.as_ref().unwrap();
        assert!(!rep.queries[1].member && w.certified && w.pairing > w.derivative);
    }

    #[test]
    fn threads_respect_request() {
        assert!(worker_threads(Some(2)) <= 2);
        assert!(worker_threads(None) >= 1);
    }
}
