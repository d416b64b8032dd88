use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square 2-D FFT on row-major data. The inverse is normalised by 1/n².
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.forward);
        self.run(&*plan, data);
    }

    /// Unnormalised inverse transform (plain sum over frequencies).
    pub fn inverse_unnormalized(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inverse);
        self.run(&*plan, data);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse_unnormalized(data);
        let norm = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }

    fn run(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n, "fft size mismatch");
        plan.process_with_scratch(data, &mut self.scratch);
        transpose(data, self.n);
        plan.process_with_scratch(data, &mut self.scratch);
        transpose(data, self.n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Angular frequency of FFT bin `i` for `n` samples at spacing `dx`.
pub fn angular_frequency(i: usize, n: usize, dx: f64) -> f64 {
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    if i <= n / 2 {
        i as f64 * dk
    } else {
        (i as f64 - n as f64) * dk
    }
}
