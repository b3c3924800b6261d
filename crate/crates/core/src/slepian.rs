//! Discrete prolate spheroidal sequences (Slepian sequences).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{zero_padded_dft, SpectrumGrid};
use crate::linalg::{dot, normalize, SymTridiagonal};
use crate::quadrature::ProductIntegrand;

/// Default frequency-grid oversampling factor, `G = 8 N`.
pub const DEFAULT_OVERSAMPLING: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpssParams {
    pub n_samples: usize,
    pub time_bandwidth: f64,
    pub num_sequences: usize,
}

impl DpssParams {
    pub fn new(n_samples: usize, time_bandwidth: f64, num_sequences: usize) -> Result<Self> {
        let p = Self {
            n_samples,
            time_bandwidth,
            num_sequences,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.num_sequences == 0 {
            return Err(Error::InvalidParameter("N and K must be positive".into()));
        }
        if self.num_sequences > self.n_samples {
            return Err(Error::InvalidParameter(format!(
                "K = {} exceeds N = {}",
                self.num_sequences, self.n_samples
            )));
        }
        let w = self.half_bandwidth();
        if !(w > 0.0 && w < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "half-bandwidth W = NW/N = {w} outside (0, 1/2)"
            )));
        }
        Ok(())
    }

    /// `W = NW / N` in cycles/sample.
    pub fn half_bandwidth(&self) -> f64 {
        self.time_bandwidth / self.n_samples as f64
    }

    pub fn default_grid_size(&self) -> usize {
        DEFAULT_OVERSAMPLING * self.n_samples
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpssSet {
    pub params: DpssParams,
    pub sequences: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl DpssSet {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn half_bandwidth(&self) -> f64 {
        self.params.half_bandwidth()
    }

    /// Smallest eigenvalue among the given orders.
    pub fn lambda_min(&self, orders: &[usize]) -> f64 {
        orders
            .iter()
            .map(|&k| self.eigenvalues[k])
            .fold(f64::INFINITY, f64::min)
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "sequence index {k} out of range for K = {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Fraction of energy of `x` inside `(-w, w)`, evaluated exactly through the
/// lag-domain form `sum_d r(d) sin(2 pi w d) / (pi d)`.
pub fn concentration(x: &[f64], w: f64) -> f64 {
    let n = x.len();
    let energy = dot(x, x);
    if energy == 0.0 {
        return 0.0;
    }
    let mut acc = 2.0 * w * energy;
    for d in 1..n {
        let r: f64 = (0..n - d).map(|t| x[t] * x[t + d]).sum();
        let df = d as f64;
        acc += 2.0 * r * (2.0 * PI * w * df).sin() / (PI * df);
    }
    acc / energy
}

/// Generates the first `K` DPSS from the tridiagonal commuting matrix.
pub fn generate_dpss(params: &DpssParams) -> Result<DpssSet> {
    params.validate()?;
    let n = params.n_samples;
    let w = params.half_bandwidth();
    let cw = (2.0 * PI * w).cos();
    let diag: Vec<f64> = (0..n)
        .map(|t| {
            let c = (n as f64 - 1.0 - 2.0 * t as f64) / 2.0;
            c * c * cw
        })
        .collect();
    let off: Vec<f64> = (1..n).map(|t| t as f64 * (n - t) as f64 / 2.0).collect();
    let tri = SymTridiagonal::new(diag, off)?;
    let (_, mut vectors) = tri.top_eigenpairs(params.num_sequences)?;

    for (k, v) in vectors.iter_mut().enumerate() {
        let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
        let sym: Vec<f64> = (0..n).map(|t| 0.5 * (v[t] + parity * v[n - 1 - t])).collect();
        *v = sym;
        normalize(v);
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * peak) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    let eigenvalues = vectors.iter().map(|v| concentration(v, w)).collect();
    Ok(DpssSet {
        params: *params,
        sequences: vectors,
        eigenvalues,
    })
}

/// In-band energies `∫_{-W}^{W} |V_k(f)|^2 df` by grid quadrature.
pub fn eigenvalues_via_quadrature(set: &DpssSet, grid_size: usize) -> Result<Vec<f64>> {
    let n = set.params.n_samples;
    if grid_size < 2 * n {
        return Err(Error::Resolution(format!(
            "grid of {grid_size} points is below 2N = {}",
            2 * n
        )));
    }
    let w = set.half_bandwidth();
    set.sequences
        .iter()
        .map(|v| {
            ProductIntegrand::new(v, v, 0, grid_size)?
                .integrate(-w, w)
                .map(|z| z.re)
        })
        .collect()
}

/// `V_k(f)` on a `grid_size`-point grid.
pub fn evaluate_dpswf(set: &DpssSet, k: usize, grid_size: usize) -> Result<SpectrumGrid> {
    set.check_index(k)?;
    if grid_size < 2 * set.params.n_samples {
        return Err(Error::Resolution(format!(
            "grid of {grid_size} points is below 2N = {}",
            2 * set.params.n_samples
        )));
    }
    Ok(SpectrumGrid::from_fft_order(&zero_padded_dft(
        &set.sequences[k],
        grid_size,
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Modulated {
    pub values: Vec<f64>,
    /// Set when `carrier + W >= 1/2`, i.e. the shifted band wraps past Nyquist.
    pub aliasing_warning: bool,
}

/// `v_t^{(k)} cos(2 pi f0 t)`; energy is left as produced.
pub fn modulate(set: &DpssSet, k: usize, carrier_cycles_per_sample: f64) -> Result<Modulated> {
    set.check_index(k)?;
    let f0 = carrier_cycles_per_sample;
    if !(0.0..0.5).contains(&f0) {
        return Err(Error::InvalidParameter(format!("carrier {f0} outside [0, 1/2)")));
    }
    let values = set.sequences[k]
        .iter()
        .enumerate()
        .map(|(t, v)| v * (2.0 * PI * f0 * t as f64).cos())
        .collect();
    Ok(Modulated {
        values,
        aliasing_warning: f0 + set.half_bandwidth() >= 0.5,
    })
}

/// Fraction of the energy of `x` lying in `(c - w, c + w) ∪ (-c - w, -c + w)`,
/// by grid quadrature.
pub fn band_energy_fraction(x: &[f64], center: f64, w: f64, grid_size: usize) -> Result<f64> {
    let energy = dot(x, x);
    if energy == 0.0 {
        return Err(Error::InvalidParameter("zero-energy sequence".into()));
    }
    let integrand = ProductIntegrand::new(x, x, 0, grid_size)?;
    let inside = if center <= w {
        integrand.integrate(-(center + w), center + w)?.re
    } else {
        integrand.integrate(center - w, center + w)?.re + integrand.integrate(-center - w, -center + w)?.re
    };
    Ok(inside / energy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_params() {
        assert!(DpssParams::new(8, 2.0, 9).is_err());
        assert!(DpssParams::new(8, 4.0, 2).is_err());
        assert!(DpssParams::new(8, 0.0, 2).is_err());
    }

    #[test]
    fn n200_nw5_smallest_eigenvalue_gap() {
        let set = generate_dpss(&DpssParams::new(200, 5.0, 6).unwrap()).unwrap();
        let gap = 1.0 - set.eigenvalues[5];
        assert!(gap > 3.5e-5 && gap < 1.4e-4, "1 - lambda_5 = {gap}");
    }

    #[test]
    fn orthonormal_and_symmetric() {
        let set = generate_dpss(&DpssParams::new(64, 3.0, 6).unwrap()).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let p = dot(&set.sequences[i], &set.sequences[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p - want).abs() < 1e-10);
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let v = &set.sequences[i];
            for t in 0..64 {
                assert!((v[t] - sign * v[63 - t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_matches_eigenvalues() {
        let set = generate_dpss(&DpssParams::new(200, 5.0, 6).unwrap()).unwrap();
        let quad = eigenvalues_via_quadrature(&set, 1600).unwrap();
        for (q, l) in quad.iter().zip(&set.eigenvalues) {
            assert!((q - l).abs() < 1e-6, "{q} vs {l}");
        }
    }

    #[test]
    fn odd_dpswf_vanishes_at_zero_and_even_peaks_there() {
        let set = generate_dpss(&DpssParams::new(200, 5.0, 4).unwrap()).unwrap();
        let v1 = evaluate_dpswf(&set, 1, 1600).unwrap();
        assert!(v1.nearest(0.0).norm() < 1e-10);
        let v0 = evaluate_dpswf(&set, 0, 1600).unwrap();
        let mags = v0.magnitudes();
        let argmax = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
        assert_eq!(v0.frequencies[argmax], 0.0);
        assert!(v0.max_abs() <= (200f64).sqrt());
    }

    #[test]
    fn modulation_concentrates_around_carrier() {
        let set = generate_dpss(&DpssParams::new(240, 4.0, 4).unwrap()).unwrap();
        let same = modulate(&set, 1, 0.0).unwrap();
        assert_eq!(same.values, set.sequences[1]);
        let f0 = 2.0 / 30.0;
        let m = modulate(&set, 1, f0).unwrap();
        assert!(!m.aliasing_warning);
        let frac = band_energy_fraction(&m.values, f0, set.half_bandwidth(), 1920).unwrap();
        assert!(frac >= set.eigenvalues[1] - 0.01, "{frac}");
        assert!(modulate(&set, 0, 0.49).unwrap().aliasing_warning);
    }
}
