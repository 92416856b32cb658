use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized 2-D DFT over an `height`×`width` grid; the inverse divides
/// by `height * width`.
#[derive(Clone)]
pub struct Fft2d {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2d {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn run(&self, buf: &mut [Complex64], rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        debug_assert_eq!(buf.len(), self.len());
        for row in buf.chunks_exact_mut(self.width) {
            rows.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.height];
        for x in 0..self.width {
            for y in 0..self.height {
                col[y] = buf[y * self.width + x];
            }
            cols.process(&mut col);
            for y in 0..self.height {
                buf[y * self.width + x] = col[y];
            }
        }
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.run(buf, self.row_fwd.as_ref(), self.col_fwd.as_ref());
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.run(&mut spec, self.row_inv.as_ref(), self.col_inv.as_ref());
        let scale = 1.0 / self.len() as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    /// Spectrum of a `k`×`k` kernel zero-padded into the grid with its
    /// `(0, 0)` entry at grid `(0, 0)`.
    pub fn forward_padded(&self, kernel: &[f64], k: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len()];
        for u in 0..k {
            for v in 0..k {
                buf[u * self.width + v].re = kernel[u * k + v];
            }
        }
        self.forward_in_place(&mut buf);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_undoes_forward() {
        let f = Fft2d::new(3, 5);
        let data: Vec<f64> = (0..15).map(|i| (i as f64 * 0.7).sin()).collect();
        let back = f.inverse_real(f.forward_real(&data));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_bin_is_sum() {
        let f = Fft2d::new(4, 4);
        let spec = f.forward_real(&[1.0; 16]);
        assert!((spec[0].re - 16.0).abs() < 1e-12);
        assert!(spec[1..].iter().all(|c| c.norm() < 1e-12));
    }
}
