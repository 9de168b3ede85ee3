//! Plane shear flow `u(y, t)` between walls at `y = ±h`, driven by a body
//! force and closed by a friction law at the walls.
//!
//! Velocities live at cell centres and shear stresses at faces. The wall
//! velocity is eliminated by solving the friction balance
//! `S₁₂(wall) · n + g'(u_wall) = 0` exactly at every flux evaluation.

use alloc::vec::Vec;

use crate::constitutive::{regularized_from_split, Split};
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::params::{check_antisymmetric, FluidParams, MicroRotation};
use crate::subdiff::{classify_plug, FlowRegime};
use crate::tensor::MatD;

/// Plug tolerance scale: cells with `|B_ν| ≤ PLUG_SCALE / √n` count as plug.
pub const PLUG_SCALE: f64 = 6.0;

/// Friction value used to impose no-slip.
pub const NO_SLIP_FRICTION: f64 = 1e8;

/// Convex boundary potential `g(v)` of the tangential wall velocity.
pub trait BoundaryFunction {
    fn value(&self, v: f64) -> f64;
    fn gradient(&self, v: f64) -> f64;
    fn hessian(&self, v: f64) -> f64;
}

/// `g(v) = ½ α v²`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavierFriction {
    pub alpha: f64,
}

impl BoundaryFunction for NavierFriction {
    fn value(&self, v: f64) -> f64 {
        0.5 * self.alpha * v * v
    }
    fn gradient(&self, v: f64) -> f64 {
        self.alpha * v
    }
    fn hessian(&self, _v: f64) -> f64 {
        self.alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Forward Euler; `dt` must respect the diffusive stability limit.
    Explicit,
    /// Backward Euler solved by damped Newton iteration.
    Implicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    pub half_width: f64,
    pub cells: usize,
    pub dt: f64,
    pub t_end: f64,
    pub body_force: f64,
    /// Friction coefficient `α` of `g = ½αv²`; [`NO_SLIP_FRICTION`] for no-slip.
    pub friction: f64,
    pub params: FluidParams,
    pub reg_n: u64,
    /// Constant or one sample per cell.
    pub omega: MicroRotation,
    pub steady_tol: f64,
    pub scheme: Scheme,
    /// Safety factor of the explicit stability limit.
    pub cfl: f64,
}

impl ChannelConfig {
    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    /// Regularization index that keeps both the creeping plug shear rate and
    /// the smeared yield transition below one cell.
    pub fn coupled_reg_n(&self) -> u64 {
        coupled_reg_n(self.half_width, self.cells, self.body_force, &self.params)
    }
}

/// `max((τ_eff/(μ_eff Δy G))², 4 (μ_eff C/(G Δy))²)` with the shear-reduced
/// constants `μ_eff = μ₁/2`, `τ_eff = τ̂/√2`, clamped to `[1, 10¹²]`.
pub fn coupled_reg_n(half_width: f64, cells: usize, body_force: f64, prm: &FluidParams) -> u64 {
    let dy = 2.0 * half_width / cells as f64;
    let g = body_force.abs().max(f64::MIN_POSITIVE);
    let mu_eff = 0.5 * prm.mu1();
    let tau_eff = prm.tau_hat() / core::f64::consts::SQRT_2;
    let a = tau_eff / (mu_eff * dy * g);
    let b = 2.0 * mu_eff * PLUG_SCALE / (g * dy);
    let n = (a * a).max(b * b).clamp(1.0, 1e12);
    libm::ceil(n) as u64
}

/// Plug tolerance paired with regularization index `n`.
pub fn plug_tolerance(reg_n: u64) -> f64 {
    (PLUG_SCALE / sqrt(reg_n as f64)).max(1e-8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    pub t: f64,
    pub step: u64,
    pub u: Vec<f64>,
}

/// Energy budget of one step; all terms are already multiplied by `dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry {
    pub t: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    pub boundary_work: f64,
    pub forcing_work: f64,
    /// `Δkinetic + dissipation + boundary_work − forcing_work`; equals
    /// `±½ Δy Σ|Δu|²` for the two Euler schemes.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRun {
    pub state: ChannelState,
    pub ledger: Vec<LedgerEntry>,
    pub steady: bool,
    pub cumulative_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub y: f64,
    pub u: f64,
    pub s12: f64,
    pub plug: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Fluxes and wall data for one velocity vector.
struct Fluxes {
    /// Shear stress at the `N+1` faces, walls included.
    stress: Vec<f64>,
    /// Shear rate at the faces.
    rate: Vec<f64>,
    /// `dF/du` of the adjacent cell(s), per face.
    slope: Vec<f64>,
    wall_bottom: f64,
    wall_top: f64,
}

pub struct Channel<B = NavierFriction> {
    cfg: ChannelConfig,
    boundary: B,
    dy: f64,
    face_omega: Vec<MatD>,
    eps: f64,
}

impl Channel<NavierFriction> {
    pub fn new(cfg: ChannelConfig) -> Result<Self> {
        let b = NavierFriction { alpha: cfg.friction };
        Self::with_boundary(cfg, b)
    }
}

fn invalid(msg: &'static str) -> Error {
    Error::InvalidConfig(msg)
}

/// `S₁₂` of the regularized stress for the shear gradient `[[0, γ], [0, 0]]`.
pub fn assemble_shear_stress(rate: f64, omega: &MatD, prm: &FluidParams, reg_n: u64) -> Result<f64> {
    if omega.dim() != 2 {
        return Err(Error::DimensionMismatch {
            left: 2,
            right: omega.dim(),
        });
    }
    check_antisymmetric(omega)?;
    if reg_n == 0 {
        return Err(Error::ZeroRegularization);
    }
    Ok(shear_stress(rate, omega, prm, 1.0 / reg_n as f64))
}

fn shear_split(rate: f64, omega: &MatD) -> Split {
    let h = 0.5 * rate;
    Split::from_parts(
        MatD::from_rows2([[0.0, h], [h, 0.0]]),
        MatD::from_rows2([[0.0, h], [-h, 0.0]]) - *omega,
    )
}

/// Regularized potential along the shear direction; its derivative in the
/// rate is [`shear_stress`].
fn shear_energy(rate: f64, omega: &MatD, prm: &FluidParams, eps: f64) -> f64 {
    let s = shear_split(rate, omega);
    s.viscous_potential(prm) + prm.tau_hat() * libm::pow(s.plastic_weight(prm) + eps, 1.0 / prm.q())
}

fn shear_stress(rate: f64, omega: &MatD, prm: &FluidParams, eps: f64) -> f64 {
    regularized_from_split(&shear_split(rate, omega), prm, eps).get(0, 1)
}

impl<B: BoundaryFunction> Channel<B> {
    pub fn with_boundary(cfg: ChannelConfig, boundary: B) -> Result<Self> {
        if !(cfg.half_width > 0.0 && cfg.half_width.is_finite()) {
            return Err(invalid("half_width must be positive"));
        }
        if cfg.cells < 3 {
            return Err(invalid("cells must be at least 3"));
        }
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        if !(cfg.t_end >= 0.0 && cfg.t_end.is_finite()) {
            return Err(invalid("t_end must be non-negative"));
        }
        if !cfg.body_force.is_finite() {
            return Err(invalid("body_force must be finite"));
        }
        if !(cfg.friction >= 0.0 && cfg.friction.is_finite()) {
            return Err(invalid("friction must be non-negative"));
        }
        if !(cfg.steady_tol >= 0.0) {
            return Err(invalid("steady_tol must be non-negative"));
        }
        if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
            return Err(invalid("cfl must lie in (0, 1]"));
        }
        if cfg.reg_n == 0 {
            return Err(Error::ZeroRegularization);
        }
        let n = cfg.cells;
        let cell_omega = |i: usize| cfg.omega.at(i);
        match cfg.omega.len() {
            Some(len) if len != n => {
                return Err(invalid("micro-rotation needs one sample per cell"));
            }
            _ => {}
        }
        for i in 0..cfg.omega.len().unwrap_or(1) {
            let o = cell_omega(i);
            if o.dim() != 2 {
                return Err(invalid("channel micro-rotation must be 2x2"));
            }
            check_antisymmetric(o)?;
        }
        let face_omega = (0..=n)
            .map(|f| match f {
                0 => *cell_omega(0),
                f if f == n => *cell_omega(n - 1),
                f => (*cell_omega(f - 1) + *cell_omega(f)) * 0.5,
            })
            .collect();
        let ch = Self {
            dy: cfg.cell_width(),
            eps: 1.0 / cfg.reg_n as f64,
            cfg,
            boundary,
            face_omega,
        };
        if ch.cfg.scheme == Scheme::Explicit {
            let zero = ChannelState {
                t: 0.0,
                step: 0,
                u: alloc::vec![0.0; n],
            };
            ch.check_stability(&zero)?;
        }
        Ok(ch)
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> ChannelState {
        ChannelState {
            t: 0.0,
            step: 0,
            u: alloc::vec![0.0; self.cfg.cells],
        }
    }

    /// Cell-centre coordinates.
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cfg.cells).map(|i| -self.cfg.half_width + (i as f64 + 0.5) * self.dy)
    }

    fn sigma(&self, face: usize, rate: f64) -> f64 {
        shear_stress(rate, &self.face_omega[face], &self.cfg.params, self.eps)
    }

    /// `dS₁₂/dγ` by central differences on a step scaled to the
    /// regularization width.
    fn sigma_slope(&self, face: usize, rate: f64) -> f64 {
        let h = 1e-6 * (rate.abs() + sqrt(self.eps));
        (self.sigma(face, rate + h) - self.sigma(face, rate - h)) / (2.0 * h)
    }

    /// Wall velocity `w` solving `side · S(side · k (w − u_c)) ... = 0`.
    /// `side = +1` at the top wall, `−1` at the bottom.
    fn wall_velocity(&self, face: usize, u_c: f64, side: f64) -> Result<f64> {
        let k = 2.0 / self.dy;
        let phi = |w: f64| side * self.sigma(face, side * k * (w - u_c)) + self.boundary.gradient(w);
        let dphi = |w: f64| {
            k * self.sigma_slope(face, side * k * (w - u_c)) + self.boundary.hessian(w)
        };
        solve_increasing(phi, dphi, u_c).ok_or(Error::NewtonFailed {
            step: 0,
            residual: f64::NAN,
        })
    }

    fn fluxes(&self, u: &[f64]) -> Result<Fluxes> {
        let n = u.len();
        let k = 2.0 / self.dy;
        let mut stress = alloc::vec![0.0; n + 1];
        let mut rate = alloc::vec![0.0; n + 1];
        let mut slope = alloc::vec![0.0; n + 1];
        for f in 1..n {
            let r = (u[f] - u[f - 1]) / self.dy;
            rate[f] = r;
            stress[f] = self.sigma(f, r);
            slope[f] = self.sigma_slope(f, r) / self.dy;
        }
        let wall_bottom = self.wall_velocity(0, u[0], -1.0)?;
        let wall_top = self.wall_velocity(n, u[n - 1], 1.0)?;
        for (f, w, c) in [(0, wall_bottom, u[0]), (n, wall_top, u[n - 1])] {
            let r = if f == 0 { k * (c - w) } else { k * (w - c) };
            rate[f] = r;
            stress[f] = if f == 0 {
                self.boundary.gradient(w)
            } else {
                -self.boundary.gradient(w)
            };
            let sk = self.sigma_slope(f, r) * k;
            let gh = self.boundary.hessian(w);
            slope[f] = if sk + gh > 0.0 { sk * gh / (sk + gh) } else { 0.0 };
        }
        Ok(Fluxes {
            stress,
            rate,
            slope,
            wall_bottom,
            wall_top,
        })
    }

    /// Largest stable explicit step for the current state.
    pub fn stability_limit(&self, state: &ChannelState) -> Result<f64> {
        let fl = self.fluxes(&state.u)?;
        let mut max_slope = 0.0f64;
        for f in 0..=self.cfg.cells {
            max_slope = max_slope.max(self.sigma_slope(f, fl.rate[f])).max(self.sigma_slope(f, 0.0));
        }
        Ok(if max_slope > 0.0 {
            self.cfg.cfl * self.dy * self.dy / max_slope
        } else {
            f64::INFINITY
        })
    }

    fn check_stability(&self, state: &ChannelState) -> Result<()> {
        let limit = self.stability_limit(state)?;
        if self.cfg.dt > limit {
            Err(Error::Cfl {
                dt: self.cfg.dt,
                limit,
            })
        } else {
            Ok(())
        }
    }

    fn budget(&self, u: &[f64], fl: &Fluxes) -> (f64, f64, f64) {
        let n = u.len();
        let mut diss = 0.0;
        for f in 0..=n {
            let w = if f == 0 || f == n { 0.5 } else { 1.0 };
            diss += w * self.dy * fl.stress[f] * fl.rate[f];
        }
        let bw = self.boundary.gradient(fl.wall_bottom) * fl.wall_bottom
            + self.boundary.gradient(fl.wall_top) * fl.wall_top;
        let force = self.cfg.body_force * self.dy * u.iter().sum::<f64>();
        (diss, bw, force)
    }

    fn kinetic(&self, u: &[f64]) -> f64 {
        0.5 * self.dy * u.iter().map(|v| v * v).sum::<f64>()
    }

    /// Convex functional whose minimizer is the backward Euler update and
    /// whose gradient is `Δy` times the residual.
    fn step_energy(&self, u_old: &[f64], v: &[f64], fl: &Fluxes) -> f64 {
        let n = v.len();
        let prm = &self.cfg.params;
        let mut e = 0.0;
        for f in 0..=n {
            let w = if f == 0 || f == n { 0.5 } else { 1.0 };
            e += w * self.dy * shear_energy(fl.rate[f], &self.face_omega[f], prm, self.eps);
        }
        e += self.boundary.value(fl.wall_bottom) + self.boundary.value(fl.wall_top);
        e -= self.cfg.body_force * self.dy * v.iter().sum::<f64>();
        let jump: f64 = v.iter().zip(u_old).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * self.dy * jump + self.cfg.dt * e
    }

    fn residual_vec(&self, u_old: &[f64], v: &[f64], fl: &Fluxes, out: &mut [f64]) {
        let dt = self.cfg.dt;
        for i in 0..v.len() {
            out[i] = v[i] - u_old[i]
                - dt * ((fl.stress[i + 1] - fl.stress[i]) / self.dy + self.cfg.body_force);
        }
    }

    /// Advances `state` by one step and returns its energy budget.
    pub fn step(&self, state: &mut ChannelState) -> Result<LedgerEntry> {
        let dt = self.cfg.dt;
        let ke0 = self.kinetic(&state.u);
        let (new_u, fl_used, u_used) = match self.cfg.scheme {
            Scheme::Explicit => {
                if state.step % 16 == 0 && state.step > 0 {
                    self.check_stability(state)?;
                }
                let fl = self.fluxes(&state.u)?;
                let new_u: Vec<f64> = (0..state.u.len())
                    .map(|i| {
                        state.u[i]
                            + dt * ((fl.stress[i + 1] - fl.stress[i]) / self.dy
                                + self.cfg.body_force)
                    })
                    .collect();
                (new_u, fl, state.u.clone())
            }
            Scheme::Implicit => {
                let v = self.newton(&state.u, state.step)?;
                let fl = self.fluxes(&v)?;
                (v.clone(), fl, v)
            }
        };
        if new_u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step: state.step,
                t: state.t,
            });
        }
        let (diss, bw, force) = self.budget(&u_used, &fl_used);
        state.u = new_u;
        state.step += 1;
        state.t += dt;
        let ke1 = self.kinetic(&state.u);
        let entry = LedgerEntry {
            t: state.t,
            kinetic: ke1,
            dissipation: dt * diss,
            boundary_work: dt * bw,
            forcing_work: dt * force,
            residual: ke1 - ke0 + dt * (diss + bw - force),
        };
        Ok(entry)
    }

    fn newton(&self, u_old: &[f64], step: u64) -> Result<Vec<f64>> {
        let n = u_old.len();
        let dt = self.cfg.dt;
        let mut v = u_old.to_vec();
        let mut res = alloc::vec![0.0; n];
        let mut trial_res = alloc::vec![0.0; n];
        let mut fl = self.fluxes(&v)?;
        self.residual_vec(u_old, &v, &fl, &mut res);
        let mut norm = inf_norm(&res);
        let mut energy = self.step_energy(u_old, &v, &fl);
        let scale = 1.0 + inf_norm(u_old) + dt * self.cfg.body_force.abs();
        let tol = 1e-12 * scale;
        let mut lower = alloc::vec![0.0; n];
        let mut diag = alloc::vec![0.0; n];
        let mut upper = alloc::vec![0.0; n];
        for _ in 0..60 {
            if norm <= tol {
                return Ok(v);
            }
            let c = dt / self.dy;
            for i in 0..n {
                diag[i] = 1.0 + c * (fl.slope[i] + fl.slope[i + 1]);
                lower[i] = if i > 0 { -c * fl.slope[i] } else { 0.0 };
                upper[i] = if i + 1 < n { -c * fl.slope[i + 1] } else { 0.0 };
            }
            let delta = thomas(&lower, &diag, &upper, &res);
            let descent = self.dy * res.iter().zip(&delta).map(|(r, d)| r * d).sum::<f64>();
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = v.iter().zip(&delta).map(|(a, d)| a - lam * d).collect();
                let tfl = self.fluxes(&trial)?;
                self.residual_vec(u_old, &trial, &tfl, &mut trial_res);
                let tn = inf_norm(&trial_res);
                let te = self.step_energy(u_old, &trial, &tfl);
                let armijo = te <= energy - 1e-4 * lam * descent;
                let flat = (te - energy).abs() <= 1e-13 * energy.abs() && tn < norm;
                if tn.is_finite() && (armijo || flat || tn <= tol) {
                    v = trial;
                    energy = te;
                    fl = tfl;
                    core::mem::swap(&mut res, &mut trial_res);
                    norm = tn;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if norm <= tol * 1e3 {
            return Ok(v);
        }
        Err(Error::NewtonFailed {
            step,
            residual: norm,
        })
    }

    /// Steps until `max|Δu|/dt < steady_tol` or `t_end` is reached.
    pub fn run_to_steady(&self) -> Result<ChannelRun> {
        let mut state = self.initial_state();
        let mut ledger = Vec::new();
        let mut cumulative = 0.0;
        let mut steady = false;
        let max_steps = libm::ceil(self.cfg.t_end / self.cfg.dt) as u64;
        while state.step < max_steps {
            let before = state.u.clone();
            let entry = self.step(&mut state)?;
            cumulative += entry.residual;
            ledger.push(entry);
            let change = before
                .iter()
                .zip(&state.u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change / self.cfg.dt < self.cfg.steady_tol {
                steady = true;
                break;
            }
        }
        Ok(ChannelRun {
            state,
            ledger,
            steady,
            cumulative_residual: cumulative,
        })
    }

    /// Cell-centre shear rate: mean of the two adjacent face rates.
    fn cell_rates(&self, u: &[f64]) -> Result<Vec<f64>> {
        let fl = self.fluxes(u)?;
        Ok((0..u.len()).map(|i| 0.5 * (fl.rate[i] + fl.rate[i + 1])).collect())
    }

    /// Per-cell velocity, stress and plug flag. Without a yield stress the
    /// plug set has measure zero and no cell is flagged.
    pub fn profile(&self, state: &ChannelState) -> Result<Vec<ProfileRow>> {
        let rates = self.cell_rates(&state.u)?;
        let tol = plug_tolerance(self.cfg.reg_n);
        let prm = &self.cfg.params;
        self.centers()
            .zip(&state.u)
            .zip(&rates)
            .enumerate()
            .map(|(i, ((y, &u), &r))| {
                let omega = self.cfg.omega.at(i);
                let b = MatD::from_rows2([[0.0, r], [0.0, 0.0]]);
                let plug = prm.tau_star() > 0.0
                    && classify_plug(&b, omega, prm, tol)? == FlowRegime::Plug;
                Ok(ProfileRow {
                    y,
                    u,
                    s12: shear_stress(r, omega, prm, self.eps),
                    plug,
                })
            })
            .collect()
    }

    /// Maximal runs of plug cells, as `[lo, hi]` spans of cell faces.
    pub fn extract_plug(&self, state: &ChannelState) -> Result<Vec<Interval>> {
        let rows = self.profile(state)?;
        let mut out: Vec<Interval> = Vec::new();
        let mut open: Option<f64> = None;
        let half = 0.5 * self.dy;
        for (i, row) in rows.iter().enumerate() {
            match (row.plug, open) {
                (true, None) => open = Some(row.y - half),
                (false, Some(lo)) => {
                    out.push(Interval { lo, hi: row.y - half });
                    open = None;
                }
                _ => {}
            }
            if i + 1 == rows.len() {
                if let Some(lo) = open {
                    out.push(Interval { lo, hi: row.y + half });
                }
            }
        }
        Ok(out)
    }

    /// Wall velocities `(bottom, top)` for the given state.
    pub fn wall_velocities(&self, state: &ChannelState) -> Result<(f64, f64)> {
        let fl = self.fluxes(&state.u)?;
        Ok((fl.wall_bottom, fl.wall_top))
    }

    /// Shear stresses at the walls `(bottom, top)`.
    pub fn wall_stresses(&self, state: &ChannelState) -> Result<(f64, f64)> {
        let fl = self.fluxes(&state.u)?;
        Ok((fl.stress[0], fl.stress[self.cfg.cells]))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves the tridiagonal system `lower·x[i−1] + diag·x[i] + upper·x[i+1] = rhs`.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = alloc::vec![0.0; n];
    let mut d = alloc::vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Root of a non-decreasing scalar function by Newton steps kept inside a
/// bisection bracket.
fn solve_increasing(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x0: f64) -> Option<f64> {
    let f0 = f(x0);
    if f0 == 0.0 {
        return Some(x0);
    }
    let dir = if f0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 1e-6 * (1.0 + x0.abs());
    let mut far = x0 + dir * step;
    let mut near = x0;
    while f(far) * f0 > 0.0 {
        near = far;
        step *= 4.0;
        far = x0 + dir * step;
        if !far.is_finite() || step > 1e300 {
            return None;
        }
    }
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    let mut x = near;
    for _ in 0..300 {
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let cand = x - fx / d;
        let next = if d > 0.0 && cand > lo && cand < hi {
            cand
        } else {
            0.5 * (lo + hi)
        };
        let scale = next.abs().max(f64::MIN_POSITIVE);
        if (next - x).abs() <= 2.0 * f64::EPSILON * scale || hi - lo <= 2.0 * f64::EPSILON * scale {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::SQRT_2;

    fn config(params: FluidParams, cells: usize, scheme: Scheme) -> ChannelConfig {
        let mut cfg = ChannelConfig {
            half_width: 1.0,
            cells,
            dt: 0.02,
            t_end: 60.0,
            body_force: 1.0,
            friction: NO_SLIP_FRICTION,
            params,
            reg_n: 1,
            omega: MicroRotation::zero(2).unwrap(),
            steady_tol: 1e-9,
            scheme,
            cfl: 0.45,
        };
        cfg.reg_n = cfg.coupled_reg_n();
        cfg
    }

    #[test]
    fn shear_stress_reduces_to_scalar_law() {
        let prm = FluidParams::bingham(1.0, 0.5).unwrap();
        let z = MatD::zeros(2).unwrap();
        assert_eq!(assemble_shear_stress(0.0, &z, &prm, 100).unwrap(), 0.0);
        for g in [0.3, -1.2, 4.0] {
            let n = 1000u64;
            let s = assemble_shear_stress(g, &z, &prm, n).unwrap();
            let expect = 0.5 * g + 0.5 / SQRT_2 * g / (g * g + 2.0 / n as f64).sqrt();
            assert!((s - expect).abs() < 1e-14);
            let neg = assemble_shear_stress(-g, &z, &prm, n).unwrap();
            assert_eq!(neg, -s);
        }
        let big = assemble_shear_stress(2.0, &z, &prm, 1_000_000_000_000).unwrap();
        assert!((big - (1.0 + 0.5 / SQRT_2)).abs() < 1e-9);
    }

    #[test]
    fn thomas_solves_tridiagonal() {
        let lower = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, 0.0];
        let x = thomas(&lower, &diag, &upper, &[1.0, 0.0, 1.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_unstable_explicit_step() {
        let prm = FluidParams::bingham(1.0, 0.0).unwrap();
        let mut cfg = config(prm, 50, Scheme::Explicit);
        cfg.dt = 1.0;
        assert!(matches!(Channel::new(cfg), Err(Error::Cfl { .. })));
    }

    #[test]
    fn rejects_bad_config() {
        let prm = FluidParams::bingham(1.0, 0.0).unwrap();
        let mut cfg = config(prm, 50, Scheme::Implicit);
        cfg.cells = 2;
        assert!(Channel::new(cfg.clone()).is_err());
        cfg.cells = 50;
        cfg.omega = MicroRotation::Sampled(alloc::vec![MatD::skew2(0.1); 3]);
        assert!(Channel::new(cfg.clone()).is_err());
        cfg.omega = MicroRotation::zero(3).unwrap();
        assert!(Channel::new(cfg).is_err());
    }

    /// Steady analytic solution with `μ_eff = μ₁/2`, `τ_eff = τ*/√2`.
    fn bingham_profile(y: f64, g: f64, h: f64, mu_eff: f64, tau_eff: f64) -> f64 {
        let yc = (tau_eff / g).min(h);
        let a = y.abs().max(yc);
        g / (2.0 * mu_eff) * (h * h - a * a) - tau_eff / mu_eff * (h - a)
    }

    #[test]
    fn implicit_bingham_plug_and_profile() {
        let prm = FluidParams::bingham(1.0, 0.25 * SQRT_2).unwrap();
        let ch = Channel::new(config(prm, 100, Scheme::Implicit)).unwrap();
        let run = ch.run_to_steady().unwrap();
        assert!(run.steady);
        let plugs = ch.extract_plug(&run.state).unwrap();
        assert_eq!(plugs.len(), 1);
        let half = 0.5 * (plugs[0].hi - plugs[0].lo);
        assert!((half - 0.25).abs() <= ch.config().cell_width(), "{half}");
        let (mut num, mut den) = (0.0, 0.0);
        for (y, u) in ch.centers().zip(&run.state.u) {
            let e = bingham_profile(y, 1.0, 1.0, 0.5, 0.25);
            num += (u - e) * (u - e);
            den += e * e;
        }
        assert!((num / den).sqrt() < 0.02);
    }

    #[test]
    fn explicit_ledger_defect_is_half_step_increment() {
        let prm = FluidParams::bingham(1.0, 0.2).unwrap();
        let mut cfg = config(prm, 40, Scheme::Explicit);
        cfg.reg_n = 100;
        cfg.dt = 5e-4;
        let ch = Channel::new(cfg).unwrap();
        cfg_dt_to_limit(&ch);
        let mut st = ch.initial_state();
        for _ in 0..200 {
            let before = st.u.clone();
            let e = ch.step(&mut st).unwrap();
            let inc: f64 = before.iter().zip(&st.u).map(|(a, b)| (a - b) * (a - b)).sum();
            let expect = 0.5 * ch.config().cell_width() * inc;
            assert!((e.residual - expect).abs() <= 1e-12 * (1.0 + e.kinetic));
            assert!(e.dissipation >= 0.0);
            assert!(e.boundary_work >= 0.0);
        }
    }

    fn cfg_dt_to_limit(ch: &Channel) {
        let lim = ch.stability_limit(&ch.initial_state()).unwrap();
        assert!(ch.config().dt <= lim);
    }

    #[test]
    fn implicit_ledger_defect_is_negative_half_increment() {
        let prm = FluidParams::new(1.0, 0.3, 0.5, 0.3, 2.5, 3.0).unwrap();
        let mut cfg = config(prm, 40, Scheme::Implicit);
        cfg.friction = 2.0;
        cfg.omega = MicroRotation::constant(MatD::skew2(0.1)).unwrap();
        let ch = Channel::new(cfg).unwrap();
        let mut st = ch.initial_state();
        for _ in 0..50 {
            let before = st.u.clone();
            let e = ch.step(&mut st).unwrap();
            let inc: f64 = before.iter().zip(&st.u).map(|(a, b)| (a - b) * (a - b)).sum();
            let expect = -0.5 * ch.config().cell_width() * inc;
            assert!((e.residual - expect).abs() <= 1e-9 * (1.0 + e.kinetic), "{} {}", e.residual, expect);
            assert!(e.boundary_work >= 0.0);
        }
    }

    #[test]
    fn finite_friction_slip_balances_wall_shear() {
        let prm = FluidParams::bingham(1.0, 0.1).unwrap();
        let mut cfg = config(prm, 80, Scheme::Implicit);
        cfg.friction = 3.0;
        let ch = Channel::new(cfg).unwrap();
        let run = ch.run_to_steady().unwrap();
        assert!(run.steady);
        let (wb, wt) = ch.wall_velocities(&run.state).unwrap();
        let (sb, st) = ch.wall_stresses(&run.state).unwrap();
        assert!((wt - st.abs() / 3.0).abs() < 1e-9);
        assert!((wb - sb.abs() / 3.0).abs() < 1e-9);
        assert!((st.abs() - 1.0).abs() < 1e-6, "{st}");
    }

    #[test]
    fn below_yield_everything_is_plug() {
        let prm = FluidParams::bingham(1.0, 2.0 * SQRT_2).unwrap();
        let ch = Channel::new(config(prm, 50, Scheme::Implicit)).unwrap();
        let run = ch.run_to_steady().unwrap();
        let plugs = ch.extract_plug(&run.state).unwrap();
        assert_eq!(plugs.len(), 1);
        assert!((plugs[0].lo + 1.0).abs() < 1e-12 && (plugs[0].hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newtonian_has_no_plug() {
        let prm = FluidParams::bingham(1.0, 0.0).unwrap();
        let ch = Channel::new(config(prm, 50, Scheme::Implicit)).unwrap();
        let run = ch.run_to_steady().unwrap();
        let plugs = ch.extract_plug(&run.state).unwrap();
        assert!(plugs.is_empty(), "{plugs:?}");
    }

    #[test]
    fn increasing_solver_handles_stiff_and_flat() {
        let x = solve_increasing(|w| 1e8 * w + 3.0, |_| 1e8, 5.0).unwrap();
        assert!((x + 3e-8).abs() < 1e-20);
        let x = solve_increasing(|w| w * w * w - 8.0, |w| 3.0 * w * w, 0.0).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
    }
}
