//! Discrete Fourier helpers and the uniform frequency grid type.
//!
//! Frequencies are in cycles/sample. Internally spectra are produced in FFT
//! order (bin `k` at `k/G` modulo 1); [`SpectrumGrid`] stores them in
//! ascending order over `[-1/2, 1/2)`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place forward DFT, `X_k = sum_t x_t e^{-i 2 pi k t / G}`.
pub fn fft_forward(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), false).process(buf);
}

/// In-place unnormalized inverse DFT.
pub fn fft_inverse(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), true).process(buf);
}

/// DFT of `x` zero-padded to `grid_size` points, FFT order.
///
/// Samples the discrete-time Fourier transform exactly when `grid_size >= x.len()`.
pub fn zero_padded_dft(x: &[f64], grid_size: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
    for (i, &v) in x.iter().enumerate() {
        buf[i % grid_size] += v;
    }
    fft_forward(&mut buf);
    buf
}

/// Direct evaluation of `sum_t x_t e^{-i 2 pi f (t + offset)}`.
pub fn dtft(x: &[f64], offset: usize, f: f64) -> Complex64 {
    let w = Complex64::from_polar(1.0, -2.0 * PI * f);
    // Horner in w, highest power first
    let mut acc = Complex64::new(0.0, 0.0);
    for &v in x.iter().rev() {
        acc = acc * w + v;
    }
    acc * Complex64::from_polar(1.0, -2.0 * PI * f * offset as f64)
}

/// `(1/G) * (a ⊛ b)`: the rectangle-rule periodic convolution of two spectra
/// sampled on the same G-point grid (FFT order).
pub fn circular_convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.len(), b.len(), "circular_convolve length mismatch");
    let g = a.len();
    let mut fa = a.to_vec();
    let mut fb = b.to_vec();
    fft_forward(&mut fa);
    fft_forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    fft_inverse(&mut fa);
    let scale = 1.0 / (g as f64 * g as f64);
    fa.iter_mut().for_each(|v| *v *= scale);
    fa
}

/// Frequency of FFT bin `k` on a `g`-point grid, folded into `[-1/2, 1/2)`.
pub fn bin_frequency(k: usize, g: usize) -> f64 {
    let k = k as i64;
    let g = g as i64;
    let signed = if 2 * k >= g { k - g } else { k };
    signed as f64 / g as f64
}

/// FFT bin index holding frequency `i/g` for signed integer `i`.
pub fn bin_index(i: i64, g: usize) -> usize {
    i.rem_euclid(g as i64) as usize
}

/// Uniform frequency grid with complex samples, ascending over `[-1/2, 1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl SpectrumGrid {
    /// Reorders an FFT-order spectrum into ascending frequency.
    pub fn from_fft_order(values: &[Complex64]) -> Self {
        let g = values.len();
        let start = g - g / 2; // first negative bin
        let mut frequencies = Vec::with_capacity(g);
        let mut out = Vec::with_capacity(g);
        for j in 0..g {
            let k = (start + j) % g;
            frequencies.push(bin_frequency(k, g));
            out.push(values[k]);
        }
        Self {
            frequencies,
            values: out,
        }
    }

    /// Builds a grid by evaluating `func` at each ascending grid frequency.
    pub fn from_fn(grid_size: usize, mut func: impl FnMut(f64) -> Complex64) -> Self {
        let g = grid_size as i64;
        let lo = -(g / 2);
        let frequencies: Vec<f64> = (0..g).map(|j| (lo + j) as f64 / g as f64).collect();
        let values = frequencies.iter().map(|&f| func(f)).collect();
        Self { frequencies, values }
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.grid_size() as f64
    }

    /// Converts back to FFT order.
    pub fn to_fft_order(&self) -> Vec<Complex64> {
        let g = self.grid_size();
        let start = g - g / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); g];
        for (j, v) in self.values.iter().enumerate() {
            out[(start + j) % g] = *v;
        }
        out
    }

    /// Sample nearest to frequency `f` (cycles/sample, taken modulo 1).
    pub fn nearest(&self, f: f64) -> Complex64 {
        let g = self.grid_size();
        let k = (f * g as f64).round() as i64;
        self.to_fft_index_value(bin_index(k, g))
    }

    fn to_fft_index_value(&self, k: usize) -> Complex64 {
        let g = self.grid_size();
        let start = g - g / 2;
        let j = (k + g - start) % g;
        self.values[j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascending_order_roundtrip() {
        let vals: Vec<Complex64> = (0..7).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let grid = SpectrumGrid::from_fft_order(&vals);
        assert!(grid.frequencies.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(grid.to_fft_order(), vals);
        let even: Vec<Complex64> = (0..8).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let grid = SpectrumGrid::from_fft_order(&even);
        assert_eq!(grid.frequencies[0], -0.5);
        assert_eq!(grid.nearest(0.25).re, 2.0);
        assert_eq!(grid.nearest(-0.25).re, 6.0);
    }

    #[test]
    fn dtft_matches_fft_bins() {
        let x = [0.3, -1.0, 2.0, 0.5, 0.25];
        let spec = zero_padded_dft(&x, 16);
        for (k, v) in spec.iter().enumerate() {
            let d = dtft(&x, 0, k as f64 / 16.0);
            assert!((d - v).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_convolution_matches_direct_sum() {
        let g = 12;
        let a: Vec<Complex64> = (0..g).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let b: Vec<Complex64> = (0..g).map(|k| Complex64::new((k * k) as f64 * 0.1, 0.5)).collect();
        let c = circular_convolve(&a, &b);
        for n in 0..g {
            let mut s = Complex64::new(0.0, 0.0);
            for m in 0..g {
                s += a[m] * b[(n + g - m) % g];
            }
            s /= g as f64;
            assert!((s - c[n]).norm() < 1e-10);
        }
    }
}
