//! Divergence-free Fourier–Galerkin solver on the torus `[0, 2π)²` with the
//! regularized stress, plus energy and a-priori-bound monitors.
//!
//! The velocity keeps the modes `|k|∞ ≤ K`. Products are formed on an `M×M`
//! grid with `M ≥ 3K + 1`, so the convective term of the truncated system is
//! computed without aliasing and conserves energy exactly.

use rustfft::num_complex::Complex64;
use serde::Serialize;
use ysl_core::constitutive::stress_regularized;
use ysl_core::{FluidParams, MatD, MicroRotation};

use crate::error::{Error, Result};
use crate::fft2::{wavenumber, Fft2};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct GalerkinConfig {
    /// Mode cap `K`.
    pub modes: usize,
    /// Physical grid size `M`.
    pub grid: usize,
    pub params: FluidParams,
    pub reg_n: u64,
    /// Constant or one sample per grid node (row-major, `y` slowest).
    pub omega: MicroRotation,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
}

impl GalerkinConfig {
    /// Smallest even grid that dealiases quadratic products of `K` modes.
    pub fn dealiased_grid(modes: usize) -> usize {
        let m = 3 * modes + 1;
        m + m % 2
    }
}

/// Fourier coefficients of the two velocity components, stored on the full
/// `M×M` index set with every mode outside `|k|∞ ≤ K` held at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub m: usize,
    pub modes: usize,
    pub t: f64,
    pub v: [Vec<Complex64>; 2],
}

impl SpectralState {
    pub fn zeros(m: usize, modes: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); m * m];
        Self {
            m,
            modes,
            t: 0.0,
            v: [z.clone(), z],
        }
    }

    /// Samples `f(x, y)` on the grid, transforms, truncates and projects.
    pub fn from_fn(m: usize, modes: usize, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let fft = Fft2::new(m);
        let mut scratch = Vec::new();
        let h = TWO_PI / m as f64;
        let mut st = Self::zeros(m, modes);
        for a in 0..2 {
            for j in 0..m {
                for i in 0..m {
                    st.v[a][j * m + i] = Complex64::new(f(i as f64 * h, j as f64 * h)[a], 0.0);
                }
            }
            fft.forward(&mut st.v[a], &mut scratch);
        }
        st.truncate();
        leray_project(&mut st.v, m);
        st
    }

    /// `A (sin x cos y, −cos x sin y)`
    pub fn taylor_green(m: usize, modes: usize, amplitude: f64) -> Self {
        Self::from_fn(m, modes, |x, y| {
            [amplitude * x.sin() * y.cos(), -amplitude * x.cos() * y.sin()]
        })
    }

    /// Random solenoidal field built from modes `|k|∞ ≤ 3` with `|k|⁻²`
    /// amplitude decay.
    pub fn random(m: usize, modes: usize, amplitude: f64, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for kx in -3i32..=3 {
            for ky in 0i32..=3 {
                if (ky == 0 && kx <= 0) || kx.unsigned_abs() as usize > modes || ky as usize > modes {
                    continue;
                }
                let decay = 1.0 / f64::from(kx * kx + ky * ky);
                let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) * decay);
                terms.push((f64::from(kx), f64::from(ky), c));
            }
        }
        Self::from_fn(m, modes, |x, y| {
            terms.iter().fold([0.0, 0.0], |acc, &(kx, ky, c)| {
                let (s, co) = (kx * x + ky * y).sin_cos();
                [
                    acc[0] + amplitude * (c[0] * co + c[1] * s),
                    acc[1] + amplitude * (c[2] * co + c[3] * s),
                ]
            })
        })
    }

    fn truncate(&mut self) {
        let (m, k) = (self.m, self.modes as i64);
        for a in 0..2 {
            for j in 0..m {
                for i in 0..m {
                    if wavenumber(i, m).abs() > k || wavenumber(j, m).abs() > k {
                        self.v[a][j * m + i] = Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
    }

    /// `½‖v‖²_{L²}` by Parseval.
    pub fn energy(&self) -> f64 {
        let s: f64 = self.v.iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum();
        0.5 * TWO_PI * TWO_PI * s
    }

    /// `max_k |k · v̂(k)|`
    pub fn divergence(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for j in 0..m {
            for i in 0..m {
                let idx = j * m + i;
                let kx = wavenumber(i, m) as f64;
                let ky = wavenumber(j, m) as f64;
                worst = worst.max((self.v[0][idx] * kx + self.v[1][idx] * ky).norm());
            }
        }
        worst
    }

    /// Velocity samples on the grid.
    pub fn to_physical(&self) -> [Vec<f64>; 2] {
        let fft = Fft2::new(self.m);
        let mut scratch = Vec::new();
        let mut out = [Vec::new(), Vec::new()];
        for (a, o) in out.iter_mut().enumerate() {
            let mut buf = self.v[a].clone();
            fft.inverse(&mut buf, &mut scratch);
            *o = buf.iter().map(|z| z.re).collect();
        }
        out
    }
}

/// `v̂(k) ← (I − k kᵀ/|k|²) v̂(k)`; the mean mode is left alone.
pub fn leray_project(v: &mut [Vec<Complex64>; 2], m: usize) {
    for j in 0..m {
        for i in 0..m {
            let kx = wavenumber(i, m) as f64;
            let ky = wavenumber(j, m) as f64;
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                continue;
            }
            let idx = j * m + i;
            let dot = (v[0][idx] * kx + v[1][idx] * ky) / k2;
            v[0][idx] -= dot * kx;
            v[1][idx] -= dot * ky;
        }
    }
}

/// Quadratures evaluated alongside one right-hand side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Rates {
    /// `∫ Sⁿ : ∇v`
    pub dissipation: f64,
    /// `∫ |∇v|^p`
    pub grad_p: f64,
    /// `∫ |(∇v)_s|^p`
    pub sym_p: f64,
    /// `‖Sⁿ‖_{L^{p'}}`
    pub stress_dual_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    pub energy: f64,
    /// `∫₀ᵗ ‖∇v‖ᵖ_p`
    pub grad_p_integral: f64,
    pub stress_dual_norm: f64,
    /// `E(t) + ∫₀ᵗ ∫ Sⁿ:∇v − E(0)`
    pub identity_residual: f64,
    /// `E(t) + μ₁ ∫₀ᵗ ‖(∇v)_s‖ᵖ_p`
    pub bound_lhs: f64,
    /// `E(0) + C₀ t`
    pub bound_rhs: f64,
    pub divergence: f64,
}

#[derive(Clone, Debug)]
pub struct GalerkinRun {
    pub state: SpectralState,
    pub rows: Vec<MonitorRow>,
    /// `C₀ = ∫ (2^{p−2}μ₂|Ω|^p + τ*|Ω|)`, the bound's growth rate.
    pub c0: f64,
    pub max_abs_residual: f64,
    pub max_divergence: f64,
    /// `min (bound_rhs − bound_lhs)` over recorded rows.
    pub worst_bound_margin: f64,
    pub sup_energy: f64,
}

pub struct Galerkin {
    cfg: GalerkinConfig,
    fft: Fft2,
    omega: Vec<MatD>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    mask: Vec<bool>,
    scratch: Vec<Complex64>,
}

impl Galerkin {
    pub fn new(cfg: GalerkinConfig) -> Result<Self> {
        let m = cfg.grid;
        if cfg.modes == 0 || m < 3 * cfg.modes + 1 {
            return Err(Error::Invalid(format!(
                "grid {m} cannot dealias {} modes (needs at least {})",
                cfg.modes,
                3 * cfg.modes + 1
            )));
        }
        if !(cfg.dt > 0.0 && cfg.t_end >= 0.0 && cfg.dt.is_finite() && cfg.t_end.is_finite()) {
            return Err(Error::Invalid("dt must be positive and t_end non-negative".into()));
        }
        if cfg.reg_n == 0 {
            return Err(ysl_core::Error::ZeroRegularization.into());
        }
        let omega: Vec<MatD> = match &cfg.omega {
            MicroRotation::Constant(o) => vec![*o; m * m],
            MicroRotation::Sampled(v) => {
                if v.len() != m * m {
                    return Err(Error::Invalid(format!(
                        "micro-rotation has {} samples, grid needs {}",
                        v.len(),
                        m * m
                    )));
                }
                v.clone()
            }
        };
        if omega.iter().any(|o| o.dim() != 2) {
            return Err(Error::Invalid("micro-rotation samples must be 2x2".into()));
        }
        let mut kx = Vec::with_capacity(m * m);
        let mut ky = Vec::with_capacity(m * m);
        let mut mask = Vec::with_capacity(m * m);
        let cap = cfg.modes as i64;
        for j in 0..m {
            for i in 0..m {
                let (a, b) = (wavenumber(i, m), wavenumber(j, m));
                kx.push(a as f64);
                ky.push(b as f64);
                mask.push(a.abs() <= cap && b.abs() <= cap);
            }
        }
        Ok(Self {
            fft: Fft2::new(m),
            cfg,
            omega,
            kx,
            ky,
            mask,
            scratch: Vec::new(),
        })
    }

    pub fn config(&self) -> &GalerkinConfig {
        &self.cfg
    }

    fn weight(&self) -> f64 {
        let h = TWO_PI / self.cfg.grid as f64;
        h * h
    }

    /// `∫ (2^{p−2}μ₂|Ω|^p + τ*|Ω|)`
    pub fn bound_rate(&self) -> f64 {
        let prm = &self.cfg.params;
        let k = 2f64.powf(prm.p() - 2.0) * prm.mu2();
        self.weight()
            * self
                .omega
                .iter()
                .map(|o| {
                    let n = o.norm();
                    k * n.powf(prm.p()) + prm.tau_star() * n
                })
                .sum::<f64>()
    }

    fn synthesize(&mut self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.fft.inverse(&mut buf, &mut self.scratch);
        buf
    }

    /// `−P[(v·∇)v] + P[div Sⁿ(∇v)]` together with the pointwise quadratures.
    pub fn rhs(&mut self, v: &[Vec<Complex64>; 2]) -> Result<([Vec<Complex64>; 2], Rates)> {
        let m = self.cfg.grid;
        let nn = m * m;
        let i_unit = Complex64::new(0.0, 1.0);
        let mut vel = [Vec::new(), Vec::new()];
        let mut grad: [[Vec<Complex64>; 2]; 2] = Default::default();
        for a in 0..2 {
            vel[a] = self.synthesize(&v[a]);
            for (j, k) in [&self.kx, &self.ky].into_iter().enumerate() {
                let d: Vec<Complex64> = v[a].iter().zip(k).map(|(c, &kj)| i_unit * kj * c).collect();
                grad[a][j] = d;
            }
        }
        for a in 0..2 {
            for j in 0..2 {
                let d = std::mem::take(&mut grad[a][j]);
                grad[a][j] = self.synthesize(&d);
            }
        }
        let prm = self.cfg.params;
        let pc = prm.p() / (prm.p() - 1.0);
        let mut stress: [[Vec<Complex64>; 2]; 2] = Default::default();
        for row in stress.iter_mut() {
            for s in row.iter_mut() {
                *s = vec![Complex64::new(0.0, 0.0); nn];
            }
        }
        let mut conv = [vec![Complex64::new(0.0, 0.0); nn], vec![Complex64::new(0.0, 0.0); nn]];
        let mut rates = Rates::default();
        let mut dual = 0.0;
        for idx in 0..nn {
            let g = MatD::from_rows2([
                [grad[0][0][idx].re, grad[0][1][idx].re],
                [grad[1][0][idx].re, grad[1][1][idx].re],
            ]);
            let s = stress_regularized(&g, &self.omega[idx], &prm, self.cfg.reg_n)?;
            rates.dissipation += s.inner(&g)?;
            rates.grad_p += g.norm().powf(prm.p());
            rates.sym_p += g.sym().norm().powf(prm.p());
            dual += s.norm().powf(pc);
            let (ux, uy) = (vel[0][idx].re, vel[1][idx].re);
            for a in 0..2 {
                conv[a][idx] = Complex64::new(ux * g.get(a, 0) + uy * g.get(a, 1), 0.0);
                for j in 0..2 {
                    stress[a][j][idx] = Complex64::new(s.get(a, j), 0.0);
                }
            }
        }
        let w = self.weight();
        rates.dissipation *= w;
        rates.grad_p *= w;
        rates.sym_p *= w;
        rates.stress_dual_norm = (w * dual).powf(1.0 / pc);
        for a in 0..2 {
            self.fft.forward(&mut conv[a], &mut self.scratch);
            for j in 0..2 {
                self.fft.forward(&mut stress[a][j], &mut self.scratch);
            }
        }
        let mut out = [vec![Complex64::new(0.0, 0.0); nn], vec![Complex64::new(0.0, 0.0); nn]];
        for idx in 0..nn {
            if !self.mask[idx] {
                continue;
            }
            for a in 0..2 {
                let div = i_unit * (stress[a][0][idx] * self.kx[idx] + stress[a][1][idx] * self.ky[idx]);
                out[a][idx] = div - conv[a][idx];
            }
        }
        leray_project(&mut out, m);
        Ok((out, rates))
    }

    /// Classical RK4 on the velocity together with the running integrals of
    /// dissipation, `‖∇v‖ᵖ_p` and `‖(∇v)_s‖ᵖ_p`.
    pub fn integrate(&mut self, init: SpectralState) -> Result<GalerkinRun> {
        let m = self.cfg.grid;
        if init.m != m || init.modes != self.cfg.modes {
            return Err(Error::Invalid("initial state does not match the configured grid".into()));
        }
        let dt = self.cfg.dt;
        let steps = (self.cfg.t_end / dt).round() as u64;
        let every = self.cfg.record_every.max(1) as u64;
        let c0 = self.bound_rate();
        let mu1 = self.cfg.params.mu1();
        let e0 = init.energy();
        let mut state = init;
        let mut acc = [0.0f64; 3];
        let mut rows = Vec::new();
        for step in 0..=steps {
            let (k1, r1) = self.rhs(&state.v)?;
            if step % every == 0 || step == steps {
                let e = state.energy();
                rows.push(MonitorRow {
                    t: state.t,
                    energy: e,
                    grad_p_integral: acc[1],
                    stress_dual_norm: r1.stress_dual_norm,
                    identity_residual: e + acc[0] - e0,
                    bound_lhs: e + mu1 * acc[2],
                    bound_rhs: e0 + c0 * state.t,
                    divergence: state.divergence(),
                });
            }
            if step == steps {
                break;
            }
            let stage = |base: &[Vec<Complex64>; 2], k: &[Vec<Complex64>; 2], h: f64| {
                let mut out = base.clone();
                for a in 0..2 {
                    for (o, d) in out[a].iter_mut().zip(&k[a]) {
                        *o += d * h;
                    }
                }
                out
            };
            let (k2, r2) = self.rhs(&stage(&state.v, &k1, 0.5 * dt))?;
            let (k3, r3) = self.rhs(&stage(&state.v, &k2, 0.5 * dt))?;
            let (k4, r4) = self.rhs(&stage(&state.v, &k3, dt))?;
            for a in 0..2 {
                for idx in 0..m * m {
                    state.v[a][idx] += (k1[a][idx] + (k2[a][idx] + k3[a][idx]) * 2.0 + k4[a][idx]) * (dt / 6.0);
                }
            }
            let comb = |f: fn(&Rates) -> f64| (f(&r1) + 2.0 * (f(&r2) + f(&r3)) + f(&r4)) * dt / 6.0;
            acc[0] += comb(|r| r.dissipation);
            acc[1] += comb(|r| r.grad_p);
            acc[2] += comb(|r| r.sym_p);
            state.t = (step + 1) as f64 * dt;
            if !state.v.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Diverged { t: state.t });
            }
        }
        let max_abs_residual = rows.iter().map(|r| r.identity_residual.abs()).fold(0.0, f64::max);
        let max_divergence = rows.iter().map(|r| r.divergence).fold(0.0, f64::max);
        let worst_bound_margin = rows
            .iter()
            .map(|r| r.bound_rhs - r.bound_lhs)
            .fold(f64::INFINITY, f64::min);
        let sup_energy = rows.iter().map(|r| r.energy).fold(0.0, f64::max);
        Ok(GalerkinRun {
            state,
            rows,
            c0,
            max_abs_residual,
            max_divergence,
            worst_bound_margin,
            sup_energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(params: FluidParams, reg_n: u64, omega: MicroRotation) -> GalerkinConfig {
        GalerkinConfig {
            modes: 4,
            grid: GalerkinConfig::dealiased_grid(4),
            params,
            reg_n,
            omega,
            dt: 0.01,
            t_end: 0.2,
            record_every: 5,
        }
    }

    #[test]
    fn projection_removes_gradients_and_keeps_solenoidal() {
        let m = 16;
        let grad = SpectralState::from_fn(m, 5, |x, y| [x.cos() * y.sin(), x.sin() * y.cos()]);
        assert!(grad.energy() < 1e-28);
        let tg = SpectralState::taylor_green(m, 5, 1.0);
        let mut v = tg.v.clone();
        leray_project(&mut v, m);
        let moved: f64 = v
            .iter()
            .flatten()
            .zip(tg.v.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(moved < 1e-15);
        assert!((tg.energy() - 0.25 * TWO_PI * TWO_PI).abs() < 1e-12);
    }

    #[test]
    fn random_field_projects_to_divergence_free() {
        let m = 16;
        let st = SpectralState::from_fn(m, 5, |x, y| {
            [(2.0 * x + y).sin() + 0.3 * (x - 3.0 * y).cos(), (x + 2.0 * y).cos() - (3.0 * x).sin()]
        });
        assert!(st.divergence() <= 1e-12);
        assert!(st.energy() > 0.1);
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let prm = FluidParams::new(1.0, 0.5, 0.5, 0.3, 2.5, 3.0).unwrap();
        let mut g = Galerkin::new(config(prm, 100, MicroRotation::zero(2).unwrap())).unwrap();
        let st = SpectralState::zeros(g.config().grid, 4);
        let (d, r) = g.rhs(&st.v).unwrap();
        assert!(d.iter().flatten().all(|z| z.norm() == 0.0));
        assert_eq!(r.dissipation, 0.0);
    }

    #[test]
    fn newtonian_taylor_green_decay() {
        let prm = FluidParams::bingham(0.2, 0.0).unwrap();
        let mut g = Galerkin::new(config(prm, 100, MicroRotation::zero(2).unwrap())).unwrap();
        let init = SpectralState::taylor_green(g.config().grid, 4, 1.0);
        let e0 = init.energy();
        let run = g.integrate(init).unwrap();
        for row in &run.rows {
            let expect = e0 * (-2.0 * 0.2 * row.t).exp();
            assert!((row.energy - expect).abs() <= 1e-8 * e0, "{row:?}");
        }
        assert!(run.max_abs_residual < 1e-10);
    }

    #[test]
    fn yield_stress_energy_never_grows() {
        let prm = FluidParams::new(0.1, 0.0, 0.0, 0.2, 2.0, 2.0).unwrap();
        let mut g = Galerkin::new(config(prm, 1000, MicroRotation::zero(2).unwrap())).unwrap();
        let init = SpectralState::from_fn(GalerkinConfig::dealiased_grid(4), 4, |x, y| {
            [x.sin() * y.cos() + 0.2 * (2.0 * y).sin(), -x.cos() * y.sin()]
        });
        let run = g.integrate(init).unwrap();
        assert!(run.rows.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!(run.c0 == 0.0 && run.worst_bound_margin >= -1e-10);
        assert!(run.max_divergence <= 1e-12);
    }

    #[test]
    fn rejects_undersized_grid() {
        let prm = FluidParams::bingham(1.0, 0.0).unwrap();
        let mut cfg = config(prm, 10, MicroRotation::zero(2).unwrap());
        cfg.grid = 10;
        assert!(Galerkin::new(cfg).is_err());
    }
}
