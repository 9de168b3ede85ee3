//! Square 2D complex FFT built from 1D transforms along rows and columns.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    fn apply(&self, data: &mut [Complex64], fft: &dyn Fft<f64>, scratch: &mut Vec<Complex64>) {
        let m = self.m;
        fft.process(data);
        transpose(data, m, scratch);
        fft.process(data);
        transpose(data, m, scratch);
    }

    /// Row-major samples → coefficients normalized so that
    /// `f(x) = Σ_k f̂_k e^{i k·x}`.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.apply(data, self.forward.as_ref(), scratch);
        let s = 1.0 / (self.m * self.m) as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.apply(data, self.inverse.as_ref(), scratch);
    }
}

fn transpose(data: &mut [Complex64], m: usize, scratch: &mut Vec<Complex64>) {
    scratch.clear();
    scratch.extend_from_slice(data);
    for r in 0..m {
        for c in 0..m {
            data[c * m + r] = scratch[r * m + c];
        }
    }
}

/// Signed wavenumber of FFT index `i`.
pub fn wavenumber(i: usize, m: usize) -> i64 {
    if i <= m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}
