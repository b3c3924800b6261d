//! Separable MIMO Volterra systems in the time and frequency domains.
//!
//! Each order-`q` kernel is a sum of rank-one products of causal factor
//! sequences, so `y` needs only per-factor convolutions and pointwise
//! products. Factor taps start at lag one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{bin_frequency, zero_padded_dft, SpectrumGrid};
use crate::laguerre::causal_filter;

/// Largest grid for which the full order-`q` tensor is materialized.
pub const FULL_TENSOR_MAX_GRID: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub input: usize,
    /// `taps[i]` is the kernel value at lag `i + 1`.
    pub taps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    /// Indices into the factor bank; the term's order is `factors.len()`.
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableVolterraSystem {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub dc_offset: Vec<f64>,
    pub factors: Vec<Factor>,
    /// `terms[m]` lists the rank-one terms feeding output `m`.
    pub terms: Vec<Vec<Term>>,
}

impl SeparableVolterraSystem {
    pub fn new(num_inputs: usize, num_outputs: usize) -> Self {
        Self {
            num_inputs,
            num_outputs,
            dc_offset: vec![0.0; num_outputs],
            factors: Vec::new(),
            terms: vec![Vec::new(); num_outputs],
        }
    }

    pub fn add_factor(&mut self, input: usize, taps: Vec<f64>) -> Result<usize> {
        if input >= self.num_inputs {
            return Err(Error::Shape(format!(
                "factor input {input} but system has {} inputs",
                self.num_inputs
            )));
        }
        if !taps.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("factor taps".into()));
        }
        self.factors.push(Factor { input, taps });
        Ok(self.factors.len() - 1)
    }

    pub fn add_term(&mut self, output: usize, coeff: f64, factors: Vec<usize>) -> Result<()> {
        if output >= self.num_outputs {
            return Err(Error::Shape(format!(
                "term output {output} but system has {} outputs",
                self.num_outputs
            )));
        }
        if factors.is_empty() {
            return Err(Error::InvalidParameter("term needs at least one factor".into()));
        }
        if let Some(&bad) = factors.iter().find(|&&f| f >= self.factors.len()) {
            return Err(Error::Shape(format!("unknown factor index {bad}")));
        }
        if !coeff.is_finite() {
            return Err(Error::NonFinite("term coefficient".into()));
        }
        self.terms[output].push(Term { coeff, factors });
        Ok(())
    }

    pub fn set_dc_offset(&mut self, output: usize, value: f64) -> Result<()> {
        if output >= self.num_outputs {
            return Err(Error::Shape(format!("no output {output}")));
        }
        self.dc_offset[output] = value;
        Ok(())
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().flatten().map(|t| t.factors.len()).max().unwrap_or(0)
    }

    /// Input channel sequence of a term.
    pub fn term_channels(&self, term: &Term) -> Vec<usize> {
        term.factors.iter().map(|&f| self.factors[f].input).collect()
    }

    /// Terms of output `m` of order `q` acting on the ordered channel tuple `inputs`.
    pub fn matching_terms<'a>(&'a self, m: usize, inputs: &'a [usize]) -> impl Iterator<Item = &'a Term> + 'a {
        self.terms[m].iter().filter(move |t| {
            t.factors.len() == inputs.len()
                && t.factors
                    .iter()
                    .zip(inputs)
                    .all(|(&f, &ch)| self.factors[f].input == ch)
        })
    }

    /// Factor frequency responses `F_j(f) = sum_i taps[i] e^{-i 2 pi f (i+1)}`, FFT order.
    pub fn factor_spectra(&self, grid_size: usize) -> Vec<Vec<Complex64>> {
        self.factors
            .iter()
            .map(|f| {
                let mut lagged = Vec::with_capacity(f.taps.len() + 1);
                lagged.push(0.0);
                lagged.extend_from_slice(&f.taps);
                zero_padded_dft(&lagged, grid_size)
            })
            .collect()
    }

    fn check_output(&self, m: usize) -> Result<()> {
        if m >= self.num_outputs {
            return Err(Error::Shape(format!(
                "output {m} out of range for {} outputs",
                self.num_outputs
            )));
        }
        Ok(())
    }

    fn check_inputs(&self, inputs: &[usize]) -> Result<()> {
        if let Some(&bad) = inputs.iter().find(|&&c| c >= self.num_inputs) {
            return Err(Error::Shape(format!("input channel {bad} out of range")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelSignal {
    /// `values[channel][t]`.
    pub values: Vec<Vec<f64>>,
    pub sample_period: f64,
}

impl MultiChannelSignal {
    pub fn new(values: Vec<Vec<f64>>, sample_period: f64) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        if values.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("channels differ in length".into()));
        }
        if !values.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("signal values".into()));
        }
        Ok(Self { values, sample_period })
    }

    pub fn single(values: Vec<f64>, sample_period: f64) -> Result<Self> {
        Self::new(vec![values], sample_period)
    }

    pub fn num_channels(&self) -> usize {
        self.values.len()
    }

    pub fn n_samples(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Copy extended with trailing zeros to `len` samples.
    pub fn zero_extended(&self, len: usize) -> Self {
        let values = self
            .values
            .iter()
            .map(|c| {
                let mut v = c.clone();
                v.resize(len.max(c.len()), 0.0);
                v
            })
            .collect();
        Self {
            values,
            sample_period: self.sample_period,
        }
    }
}

/// Time-domain output split by order: `orders[q - 1][m][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderDecomposition {
    pub orders: Vec<Vec<Vec<f64>>>,
    pub dc_offset: Vec<f64>,
    pub sample_period: f64,
}

impl OrderDecomposition {
    pub fn total(&self) -> MultiChannelSignal {
        let m_out = self.dc_offset.len();
        let n = self.orders.first().and_then(|o| o.first()).map_or(0, Vec::len);
        let mut values: Vec<Vec<f64>> = self.dc_offset.iter().map(|&d| vec![d; n]).collect();
        for order in &self.orders {
            for (m, ch) in order.iter().enumerate().take(m_out) {
                values[m].iter_mut().zip(ch).for_each(|(a, b)| *a += b);
            }
        }
        MultiChannelSignal {
            values,
            sample_period: self.sample_period,
        }
    }
}

/// Per-order outputs as products of per-factor convolutions.
pub fn evaluate_per_order(sys: &SeparableVolterraSystem, input: &MultiChannelSignal) -> Result<OrderDecomposition> {
    if input.num_channels() != sys.num_inputs {
        return Err(Error::Shape(format!(
            "input has {} channels, system expects {}",
            input.num_channels(),
            sys.num_inputs
        )));
    }
    let n = input.n_samples();
    let filtered: Vec<Vec<f64>> = sys
        .factors
        .iter()
        .map(|f| causal_filter(&f.taps, &input.values[f.input]))
        .collect();
    let q_max = sys.max_order();
    let mut orders = vec![vec![vec![0.0; n]; sys.num_outputs]; q_max];
    let mut scratch = vec![0.0; n];
    for (m, terms) in sys.terms.iter().enumerate() {
        for term in terms {
            scratch.iter_mut().for_each(|v| *v = term.coeff);
            for &f in &term.factors {
                scratch.iter_mut().zip(&filtered[f]).for_each(|(a, b)| *a *= b);
            }
            let out = &mut orders[term.factors.len() - 1][m];
            out.iter_mut().zip(&scratch).for_each(|(a, b)| *a += b);
        }
    }
    Ok(OrderDecomposition {
        orders,
        dc_offset: sys.dc_offset.clone(),
        sample_period: input.sample_period,
    })
}

pub fn evaluate_time_domain(sys: &SeparableVolterraSystem, input: &MultiChannelSignal) -> Result<MultiChannelSignal> {
    Ok(evaluate_per_order(sys, input)?.total())
}

/// `Gamma^{(1)}_{m,m'}(f)` on a `grid_size`-point grid.
pub fn gfrf_order1(sys: &SeparableVolterraSystem, m: usize, m_in: usize, grid_size: usize) -> Result<SpectrumGrid> {
    gfrf_orderq_diagonal(sys, m, &[m_in], grid_size)
}

/// `Gamma^{(q)}_{m,inputs}(f, ..., f)` for each grid frequency `f`, where
/// `q = inputs.len()`.
pub fn gfrf_orderq_diagonal(
    sys: &SeparableVolterraSystem,
    m: usize,
    inputs: &[usize],
    grid_size: usize,
) -> Result<SpectrumGrid> {
    sys.check_output(m)?;
    sys.check_inputs(inputs)?;
    let spectra = sys.factor_spectra(grid_size);
    let mut out = vec![Complex64::new(0.0, 0.0); grid_size];
    for term in sys.matching_terms(m, inputs) {
        for (k, o) in out.iter_mut().enumerate() {
            let p: Complex64 = term.factors.iter().map(|&f| spectra[f][k]).product();
            *o += term.coeff * p;
        }
    }
    Ok(SpectrumGrid::from_fft_order(&out))
}

/// Full tensor `Gamma^{(q)}(f_1, ..., f_q)` over FFT-order grid indices,
/// flattened row-major with the first frequency slowest.
pub fn gfrf_orderq_full(
    sys: &SeparableVolterraSystem,
    m: usize,
    inputs: &[usize],
    grid_size: usize,
) -> Result<Vec<Complex64>> {
    if grid_size > FULL_TENSOR_MAX_GRID {
        return Err(Error::Capacity(format!(
            "full tensor limited to grids of {FULL_TENSOR_MAX_GRID} points (got {grid_size}); \
             use gfrf_orderq_diagonal"
        )));
    }
    sys.check_output(m)?;
    sys.check_inputs(inputs)?;
    let q = inputs.len() as u32;
    let spectra = sys.factor_spectra(grid_size);
    let total = grid_size.pow(q);
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    let terms: Vec<&Term> = sys.matching_terms(m, inputs).collect();
    for (flat, o) in out.iter_mut().enumerate() {
        let mut idx = vec![0usize; q as usize];
        let mut rem = flat;
        for slot in idx.iter_mut().rev() {
            *slot = rem % grid_size;
            rem /= grid_size;
        }
        for term in &terms {
            let p: Complex64 = term.factors.iter().zip(&idx).map(|(&f, &k)| spectra[f][k]).product();
            *o += term.coeff * p;
        }
    }
    Ok(out)
}

/// `Gamma^{(q)}` at arbitrary frequencies (cycles/sample) by direct summation.
pub fn gfrf_at(sys: &SeparableVolterraSystem, m: usize, inputs: &[usize], freqs: &[f64]) -> Result<Complex64> {
    sys.check_output(m)?;
    sys.check_inputs(inputs)?;
    if freqs.len() != inputs.len() {
        return Err(Error::Shape("one frequency per input slot required".into()));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for term in sys.matching_terms(m, inputs) {
        let p: Complex64 = term
            .factors
            .iter()
            .zip(freqs)
            .map(|(&f, &fr)| crate::fourier::dtft(&sys.factors[f].taps, 1, fr))
            .product();
        acc += term.coeff * p;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSpectrum {
    /// `total[m]` is the DFT of output `m`.
    pub total: Vec<SpectrumGrid>,
    /// `per_order[m][q - 1]` is `T_{m,q}`.
    pub per_order: Vec<Vec<SpectrumGrid>>,
}

/// Output spectra and their per-order decomposition. The DFT covers the
/// samples of `input`; extend it with zeros to capture the full output support.
pub fn response_spectrum(
    sys: &SeparableVolterraSystem,
    input: &MultiChannelSignal,
    grid_size: usize,
) -> Result<ResponseSpectrum> {
    let dec = evaluate_per_order(sys, input)?;
    let total_sig = dec.total();
    let total = total_sig
        .values
        .iter()
        .map(|y| SpectrumGrid::from_fft_order(&zero_padded_dft(y, grid_size)))
        .collect();
    let per_order = (0..sys.num_outputs)
        .map(|m| {
            dec.orders
                .iter()
                .map(|o| SpectrumGrid::from_fft_order(&zero_padded_dft(&o[m], grid_size)))
                .collect()
        })
        .collect();
    Ok(ResponseSpectrum { total, per_order })
}

/// Frequencies (cycles/sample) of an FFT-order grid.
pub fn fft_frequencies(grid_size: usize) -> Vec<f64> {
    (0..grid_size).map(|k| bin_frequency(k, grid_size)).collect()
}
