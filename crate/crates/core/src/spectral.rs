//! FFT plumbing for the periodic grids: forward/inverse transforms in one or
//! two dimensions and multiplication by real, even Fourier multipliers.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct Transform {
    n: usize,
    dimension: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("n", &self.n)
            .field("dimension", &self.dimension)
            .finish()
    }
}

impl Transform {
    pub(crate) fn new(n: usize, dimension: usize) -> Self {
        let mut planner = FftPlanner::new();
        Transform {
            n,
            dimension,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn len(&self) -> usize {
        self.n.pow(self.dimension as u32)
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        // rustfft processes every contiguous chunk of length n
        plan.process(data);
        if self.dimension == 2 {
            transpose(data, self.n);
            plan.process(data);
            transpose(data, self.n);
        }
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut data, &self.forward);
        data
    }

    /// Inverse transform keeping the real part, normalised so that
    /// `inverse_real(forward(v)) == v`.
    pub(crate) fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        debug_assert_eq!(spectrum.len(), self.len());
        self.run(&mut spectrum, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies the real Fourier multiplier `symbol` to `values`.
    pub(crate) fn apply_multiplier(&self, values: &[f64], symbol: &[f64]) -> Vec<f64> {
        let mut spectrum = self.forward(values);
        for (c, &s) in spectrum.iter_mut().zip(symbol) {
            *c *= s;
        }
        self.inverse_real(spectrum)
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
