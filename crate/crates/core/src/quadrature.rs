//! Integrals of products of DTFTs over frequency intervals, computed from
//! samples on a uniform grid.
//!
//! The integrand `h(f) = X(f) conj(Y(f))` is smooth and 1-periodic. Over a
//! sub-interval the plain trapezoid rule is only second order, so the
//! endpoint corrections of the Euler–Maclaurin formula are added using exact
//! derivatives of `h`, which are themselves DTFTs of `(-i 2 pi t)^p x_t`.
//! Ends that fall between grid points are closed with a Taylor panel.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{bin_index, fft_forward};

/// Highest derivative of the integrand used by the endpoint corrections.
const MAX_DERIVATIVE: usize = 5;
/// Minimum number of grid points that must fall inside the interval.
pub const MIN_POINTS: usize = 8;

/// DTFTs of `(-i 2 pi t)^p x_t` for `p = 0..=MAX_DERIVATIVE` on a `g`-point grid.
fn derivative_spectra(x: &[f64], offset: usize, g: usize) -> Vec<Vec<Complex64>> {
    let factor = Complex64::new(0.0, -2.0 * std::f64::consts::PI);
    (0..=MAX_DERIVATIVE)
        .map(|p| {
            let mut buf = vec![Complex64::new(0.0, 0.0); g];
            for (i, &v) in x.iter().enumerate() {
                let t = (i + offset) as f64;
                buf[(i + offset) % g] += v * (factor * t).powu(p as u32);
            }
            fft_forward(&mut buf);
            buf
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Spectral samples of a pair of sequences, reusable across many intervals.
pub struct ProductIntegrand {
    g: usize,
    xd: Vec<Vec<Complex64>>,
    yd: Vec<Vec<Complex64>>,
}

impl ProductIntegrand {
    /// `x` and `y` are taken to start at time index `offset`.
    pub fn new(x: &[f64], y: &[f64], offset: usize, grid_size: usize) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::InvalidParameter("grid size must be positive".into()));
        }
        let xd = derivative_spectra(x, offset, grid_size);
        let yd = if std::ptr::eq(x, y) {
            xd.clone()
        } else {
            derivative_spectra(y, offset, grid_size)
        };
        Ok(Self { g: grid_size, xd, yd })
    }

    /// `d^n/df^n [X conj(Y)]` at grid index `k` (any integer, wrapped).
    fn derivative(&self, n: usize, k: i64) -> Complex64 {
        let idx = bin_index(k, self.g);
        (0..=n)
            .map(|p| binomial(n, p) * self.xd[p][idx] * self.yd[n - p][idx].conj())
            .sum()
    }

    /// Integral of the Taylor expansion around grid point `k` over `[k h, k h + d]`.
    fn taylor_panel(&self, k: i64, d: f64) -> Complex64 {
        (0..=MAX_DERIVATIVE)
            .map(|p| self.derivative(p, k) * (d.powi(p as i32 + 1) / factorial(p + 1)))
            .sum()
    }

    /// `∫_a^b X(f) conj(Y(f)) df` with `a < b` in cycles/sample.
    pub fn integrate(&self, a: f64, b: f64) -> Result<Complex64> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "integration interval [{a}, {b}] is empty or non-finite"
            )));
        }
        let g = self.g as f64;
        let h = 1.0 / g;
        let snap = 1e-9;
        let ka = (a * g - snap).ceil() as i64;
        let kb = (b * g + snap).floor() as i64;
        let points = (kb - ka + 1).max(0) as usize;
        if points < MIN_POINTS {
            return Err(Error::Resolution(format!(
                "{points} grid points inside [{a}, {b}] on a {}-point grid, need {MIN_POINTS}",
                self.g
            )));
        }
        let mut total: Complex64 = (ka..=kb).map(|k| self.derivative(0, k)).sum();
        total -= 0.5 * (self.derivative(0, ka) + self.derivative(0, kb));
        total *= h;
        // Euler–Maclaurin: -B2/2! h^2 [h'] - B4/4! h^4 [h'''] - B6/6! h^6 [h^(5)]
        let em = [(1usize, -1.0 / 12.0), (3, 1.0 / 720.0), (5, -1.0 / 30240.0)];
        for (order, weight) in em {
            let jump = self.derivative(order, kb) - self.derivative(order, ka);
            total += weight * h.powi(order as i32 + 1) * jump;
        }
        let left = ka as f64 * h - a;
        if left > snap * h {
            total += -self.taylor_panel(ka, -left);
        }
        let right = b - kb as f64 * h;
        if right > snap * h {
            total += self.taylor_panel(kb, right);
        }
        Ok(total)
    }
}

/// `∫_a^b X(f) conj(Y(f)) df` where `X`, `Y` are the DTFTs of `x`, `y`.
pub fn interval_integral(x: &[f64], y: &[f64], a: f64, b: f64, grid_size: usize) -> Result<Complex64> {
    ProductIntegrand::new(x, y, 0, grid_size)?.integrate(a, b)
}
