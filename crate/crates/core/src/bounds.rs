//! Higher-order suppression bounds for DPSS-driven Volterra systems.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{bin_frequency, dtft, fft_forward, fft_inverse, zero_padded_dft};
use crate::quadrature::MIN_POINTS;
use crate::seeds::{derive_seed, rng_from_seed};
use crate::slepian::{generate_dpss, DpssParams, DpssSet};
use crate::volterra::{SeparableVolterraSystem, Term};

/// Above this many (multiset, last index) evaluations `compute_jb` samples tuples.
pub const JB_EXHAUSTIVE_CAP: usize = 10_000;
/// Number of random tuples drawn when sampling.
pub const JB_SAMPLED_DRAWS: usize = 25;
/// Full-grid supremum search is used while `G^q * terms` stays below this.
const EXHAUSTIVE_SUP_BUDGET: usize = 1 << 22;

/// Closed-form comparator `(2W)^{(Q-2)/2}`.
pub fn jb_closed_form(w: f64, q: usize) -> f64 {
    (2.0 * w).powf((q as f64 - 2.0) / 2.0)
}

/// DPSWFs on a grid with their band weights, shared by the J computations.
pub struct BandSpectra {
    grid_size: usize,
    half_bandwidth: f64,
    /// FFT-order DPSWFs.
    spectra: Vec<Vec<Complex64>>,
    /// Trapezoid weights of `(-W, W)`: 1 inside, 1/2 on a grid-aligned edge.
    weights: Vec<f64>,
    inband: Vec<bool>,
}

impl BandSpectra {
    pub fn new(dpss: &DpssSet, grid_size: usize) -> Result<Self> {
        let w = dpss.half_bandwidth();
        let tol = 1e-9 / grid_size as f64;
        let mut weights = vec![0.0; grid_size];
        let mut inband = vec![false; grid_size];
        for k in 0..grid_size {
            let f = bin_frequency(k, grid_size).abs();
            if f < w - tol {
                weights[k] = 1.0;
                inband[k] = true;
            } else if (f - w).abs() <= tol {
                weights[k] = 0.5;
            }
        }
        let count = inband.iter().filter(|&&b| b).count();
        if count < MIN_POINTS {
            return Err(Error::Resolution(format!(
                "only {count} grid points inside (-W, W) on a {grid_size}-point grid"
            )));
        }
        let spectra = dpss.sequences.iter().map(|v| zero_padded_dft(v, grid_size)).collect();
        Ok(Self {
            grid_size,
            half_bandwidth: w,
            spectra,
            weights,
            inband,
        })
    }

    fn transformed(&self, values: impl Iterator<Item = Complex64>) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.collect();
        fft_forward(&mut buf);
        buf
    }

    /// FFT of the band-limited factor `V_j w` (or `|V_j| w`).
    fn weighted(&self, j: usize, absolute: bool) -> Vec<Complex64> {
        self.transformed(self.spectra[j].iter().zip(&self.weights).map(|(v, &w)| {
            let v = if absolute { Complex64::new(v.norm(), 0.0) } else { *v };
            v * w
        }))
    }

    fn full(&self, j: usize, absolute: bool) -> Vec<Complex64> {
        self.transformed(
            self.spectra[j]
                .iter()
                .map(|v| if absolute { Complex64::new(v.norm(), 0.0) } else { *v }),
        )
    }

    /// Inverse of a product of `q` transformed factors: the `(q-1)`-fold
    /// rectangle-rule convolution sampled on the grid.
    fn finish(&self, mut product: Vec<Complex64>, q: usize) -> Vec<Complex64> {
        fft_inverse(&mut product);
        let scale = (self.grid_size as f64).powi(-(q as i32));
        product.iter_mut().for_each(|v| *v *= scale);
        product
    }

    fn inband_max(&self, values: &[Complex64]) -> f64 {
        values
            .iter()
            .zip(&self.inband)
            .filter(|(_, &b)| b)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    }

    fn check_tuple(&self, m_q: &[usize]) -> Result<()> {
        if m_q.len() < 2 {
            return Err(Error::InvalidParameter("J needs Q >= 2".into()));
        }
        if let Some(&bad) = m_q.iter().find(|&&j| j >= self.spectra.len()) {
            return Err(Error::InvalidParameter(format!(
                "DPSS index {bad} out of range for K = {}",
                self.spectra.len()
            )));
        }
        Ok(())
    }

    /// `J(W, Q, f, m_Q)` at every grid frequency, FFT order.
    pub fn j_grid(&self, m_q: &[usize]) -> Result<Vec<Complex64>> {
        self.check_tuple(m_q)?;
        let q = m_q.len();
        let mut prod = self.full(m_q[q - 1], false);
        for &j in &m_q[..q - 1] {
            let f = self.weighted(j, false);
            prod.iter_mut().zip(&f).for_each(|(a, b)| *a *= b);
        }
        Ok(self.finish(prod, q))
    }

    /// Absolute-integrand version of [`Self::j_grid`].
    pub fn j_abs_grid(&self, m_q: &[usize]) -> Result<Vec<f64>> {
        self.check_tuple(m_q)?;
        let q = m_q.len();
        let mut prod = self.full(m_q[q - 1], true);
        for &j in &m_q[..q - 1] {
            let f = self.weighted(j, true);
            prod.iter_mut().zip(&f).for_each(|(a, b)| *a *= b);
        }
        Ok(self.finish(prod, q).iter().map(|v| v.re).collect())
    }

    /// `max_{f in (-W, W)} |J|` on the grid.
    pub fn max_abs_j(&self, m_q: &[usize]) -> Result<f64> {
        Ok(self.inband_max(&self.j_grid(m_q)?))
    }

    /// `sup_{f in (-W, W)}` of the absolute-integrand integral for one tuple.
    pub fn jb_tuple(&self, m_q: &[usize]) -> Result<f64> {
        let g = self.j_abs_grid(m_q)?;
        Ok(g.iter()
            .zip(&self.inband)
            .filter(|(_, &b)| b)
            .map(|(v, _)| *v)
            .fold(0.0, f64::max))
    }

    pub fn half_bandwidth(&self) -> f64 {
        self.half_bandwidth
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }
}

fn validate_q(q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!("order Q = {q} must be at least 2")));
    }
    Ok(())
}

/// `J(W, Q, f, m_Q)` at an arbitrary `f`: the first `Q - 1` band-limited
/// convolutions on the grid, the last one summed directly against `V_{m_Q}`.
pub fn compute_j(dpss: &DpssSet, q: usize, f: f64, m_q: &[usize], grid_size: usize) -> Result<Complex64> {
    validate_q(q)?;
    if m_q.len() != q {
        return Err(Error::Shape(format!("{} indices for Q = {q}", m_q.len())));
    }
    if !(f > -0.5 && f < 0.5) {
        return Err(Error::InvalidParameter(format!("frequency {f} outside (-1/2, 1/2)")));
    }
    let bands = BandSpectra::new(dpss, grid_size)?;
    bands.check_tuple(m_q)?;
    let mut prod = bands.weighted(m_q[0], false);
    for &j in &m_q[1..q - 1] {
        let t = bands.weighted(j, false);
        prod.iter_mut().zip(&t).for_each(|(a, b)| *a *= b);
    }
    // back to the frequency grid: a (q-2)-fold convolution of q-1 factors
    let acc = bands.finish(prod, q - 1);
    let last = &dpss.sequences[m_q[q - 1]];
    let h = 1.0 / grid_size as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, a) in acc.iter().enumerate() {
        if a.norm() == 0.0 {
            continue;
        }
        sum += a * dtft(last, 0, f - bin_frequency(k, grid_size));
    }
    Ok(sum * h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JbResult {
    pub value: f64,
    /// True when the supremum over tuples was estimated from random draws.
    pub sampled: bool,
    pub maximizer: Vec<usize>,
    pub tuples_evaluated: usize,
}

fn multiset_count(m: usize, r: usize) -> usize {
    // C(m + r - 1, r)
    let mut c: f64 = 1.0;
    for i in 0..r {
        c = c * (m + r - 1 - i) as f64 / (i + 1) as f64;
    }
    c.round() as usize
}

/// `J_B(W, Q, M)`: supremum over index tuples and in-band `f` of the
/// absolute-integrand integral.
///
/// The first `Q - 1` indices enter through commuting convolutions, so only
/// their multisets are enumerated; each is paired with every last index.
pub fn compute_jb(dpss: &DpssSet, q: usize, m: usize, grid_size: usize, seed: u64) -> Result<JbResult> {
    validate_q(q)?;
    if m == 0 || m > dpss.len() {
        return Err(Error::InvalidParameter(format!(
            "M = {m} must lie in 1..={}",
            dpss.len()
        )));
    }
    let bands = BandSpectra::new(dpss, grid_size)?;
    jb_with_bands(&bands, q, m, seed)
}

fn jb_with_bands(bands: &BandSpectra, q: usize, m: usize, seed: u64) -> Result<JbResult> {
    let evaluations = multiset_count(m, q - 1) * m;
    if evaluations > JB_EXHAUSTIVE_CAP {
        let mut rng = rng_from_seed(derive_seed(seed, &[q as u64, m as u64]));
        let mut best = JbResult {
            value: 0.0,
            sampled: true,
            maximizer: Vec::new(),
            tuples_evaluated: JB_SAMPLED_DRAWS,
        };
        for _ in 0..JB_SAMPLED_DRAWS {
            let tuple: Vec<usize> = (0..q).map(|_| rng.random_range(0..m)).collect();
            let v = bands.jb_tuple(&tuple)?;
            if v > best.value {
                best.value = v;
                best.maximizer = tuple;
            }
        }
        return Ok(best);
    }
    let weighted: Vec<Vec<Complex64>> = (0..m).map(|j| bands.weighted(j, true)).collect();
    let full: Vec<Vec<Complex64>> = (0..m).map(|j| bands.full(j, true)).collect();
    let mut prefixes: Vec<(Vec<usize>, Vec<Complex64>)> = Vec::new();
    let ones = vec![Complex64::new(1.0, 0.0); bands.grid_size];
    collect_multisets(&weighted, q - 1, 0, Vec::new(), ones, &mut prefixes);
    let results: Vec<(f64, Vec<usize>)> = prefixes
        .par_iter()
        .flat_map_iter(|(prefix, prod)| {
            full.iter().enumerate().map(move |(last, fl)| {
                let p: Vec<Complex64> = prod.iter().zip(fl).map(|(a, b)| a * b).collect();
                let vals = bands.finish(p, q);
                let sup = vals
                    .iter()
                    .zip(&bands.inband)
                    .filter(|(_, &b)| b)
                    .map(|(v, _)| v.re)
                    .fold(0.0, f64::max);
                let mut tuple = prefix.clone();
                tuple.push(last);
                (sup, tuple)
            })
        })
        .collect();
    let tuples_evaluated = results.len();
    let (value, maximizer) = results
        .into_iter()
        .fold((0.0, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(JbResult {
        value,
        sampled: false,
        maximizer,
        tuples_evaluated,
    })
}

fn collect_multisets(
    factors: &[Vec<Complex64>],
    remaining: usize,
    start: usize,
    prefix: Vec<usize>,
    product: Vec<Complex64>,
    out: &mut Vec<(Vec<usize>, Vec<Complex64>)>,
) {
    if remaining == 0 {
        out.push((prefix, product));
        return;
    }
    for j in start..factors.len() {
        let p: Vec<Complex64> = product.iter().zip(&factors[j]).map(|(a, b)| a * b).collect();
        let mut next = prefix.clone();
        next.push(j);
        collect_multisets(factors, remaining - 1, j, next, p, out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Row {
    pub n: usize,
    pub nw: f64,
    pub q: usize,
    pub draw: usize,
    pub tuple: Vec<usize>,
    pub max_abs_j: f64,
    /// Supremum of the absolute-integrand integral for this draw's tuple.
    pub j_b_draw: f64,
    /// Supremum over all tuples.
    pub j_b: f64,
    pub closed_form: f64,
    pub j_b_sampled: bool,
}

/// The J/J_B study: `draws` random tuples (with replacement from `0..m`) per order.
pub fn fig1_rows(
    n: usize,
    nw: f64,
    m: usize,
    orders: &[usize],
    draws: usize,
    seed: u64,
    grid_size: Option<usize>,
) -> Result<Vec<Fig1Row>> {
    let params = DpssParams::new(n, nw, m)?;
    let dpss = generate_dpss(&params)?;
    let g = grid_size.unwrap_or_else(|| params.default_grid_size());
    let bands = BandSpectra::new(&dpss, g)?;
    let w = params.half_bandwidth();
    let per_order: Vec<Result<Vec<Fig1Row>>> = orders
        .par_iter()
        .map(|&q| {
            validate_q(q)?;
            let jb = jb_with_bands(&bands, q, m, seed)?;
            let mut rng = rng_from_seed(derive_seed(seed, &[n as u64, q as u64]));
            (0..draws)
                .map(|draw| {
                    let tuple: Vec<usize> = (0..q).map(|_| rng.random_range(0..m)).collect();
                    Ok(Fig1Row {
                        n,
                        nw,
                        q,
                        draw,
                        max_abs_j: bands.max_abs_j(&tuple)?,
                        j_b_draw: bands.jb_tuple(&tuple)?,
                        tuple,
                        j_b: jb.value,
                        closed_form: jb_closed_form(w, q),
                        j_b_sampled: jb.sampled,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_order {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Suprema of a system's frequency responses and of the DPSS inputs.
/// Vectors are indexed by `order - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupremaReport {
    pub gamma_star: Vec<f64>,
    /// False where `gamma_star` is the separable triangle bound rather than a grid maximum.
    pub gamma_star_exact: Vec<bool>,
    pub gamma_prime_star: Vec<f64>,
    /// Grid maximum over `f` of `Gamma_**(0, f)`.
    pub gamma_double_star: Vec<f64>,
    /// `Gamma_**(0, f)` on the ascending grid `curve_frequencies`.
    #[serde(skip)]
    pub gamma_double_star_curve: Vec<Vec<f64>>,
    #[serde(skip)]
    pub curve_frequencies: Vec<f64>,
    pub gamma1_prime_double_star: f64,
    pub v_m_star: f64,
    pub lambda_min: f64,
}

impl SupremaReport {
    /// Report with the same value for every supremum, for analytic checks.
    pub fn uniform(orders: usize, value: f64, gradient: f64, v_m_star: f64, lambda_min: f64) -> Self {
        Self {
            gamma_star: vec![value; orders],
            gamma_star_exact: vec![true; orders],
            gamma_prime_star: vec![gradient; orders],
            gamma_double_star: vec![value; orders],
            gamma_double_star_curve: vec![Vec::new(); orders],
            curve_frequencies: Vec::new(),
            gamma1_prime_double_star: gradient,
            v_m_star,
            lambda_min,
        }
    }

    pub fn orders(&self) -> usize {
        self.gamma_star.len()
    }

    /// `Gamma_**(0, f)` at the grid point nearest `f`, or its maximum when no curve is stored.
    pub fn gamma_double_star_at(&self, q: usize, f: f64) -> f64 {
        let curve = &self.gamma_double_star_curve[q - 1];
        if curve.is_empty() || self.curve_frequencies.is_empty() {
            return self.gamma_double_star[q - 1];
        }
        let g = self.curve_frequencies.len();
        let lo = self.curve_frequencies[0];
        let j = ((f - lo) * g as f64).round().rem_euclid(g as f64) as usize;
        curve[j.min(g - 1)]
    }
}

fn group_terms(sys: &SeparableVolterraSystem, m: usize, m_inputs: usize) -> BTreeMap<Vec<usize>, Vec<&Term>> {
    let mut groups: BTreeMap<Vec<usize>, Vec<&Term>> = BTreeMap::new();
    for t in &sys.terms[m] {
        let ch = sys.term_channels(t);
        if ch.iter().all(|&c| c < m_inputs) {
            groups.entry(ch).or_default().push(t);
        }
    }
    groups
}

/// `dF/df` for each factor, FFT order.
fn factor_derivative_spectra(sys: &SeparableVolterraSystem, grid_size: usize) -> Vec<Vec<Complex64>> {
    let two_pi = 2.0 * std::f64::consts::PI;
    sys.factors
        .iter()
        .map(|f| {
            let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
            for (i, &v) in f.taps.iter().enumerate() {
                let lag = i + 1;
                buf[lag % grid_size] += Complex64::new(0.0, -two_pi * lag as f64) * v;
            }
            fft_forward(&mut buf);
            buf
        })
        .collect()
}

fn exhaustive_sup(terms: &[&Term], spectra: &[Vec<Complex64>], g: usize, q: usize) -> f64 {
    let total = g.pow(q as u32);
    let mut best = 0.0f64;
    let mut idx = vec![0usize; q];
    for flat in 0..total {
        let mut rem = flat;
        for slot in idx.iter_mut() {
            *slot = rem % g;
            rem /= g;
        }
        let v: Complex64 = terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.factors
                        .iter()
                        .zip(&idx)
                        .map(|(&f, &k)| spectra[f][k])
                        .product::<Complex64>()
            })
            .sum();
        best = best.max(v.norm());
    }
    best
}

/// Measures the suprema of output `m` over the first `m_inputs` input
/// channels, driven by the first `m_inputs` sequences of `dpss`.
///
/// Frequency suprema are grid maxima. For orders above one on large grids
/// `gamma_star` falls back to `sum |c| prod max |F_j|`, and the gradient
/// supremum always uses the matching product bound on the factor derivatives.
pub fn measure_suprema(
    sys: &SeparableVolterraSystem,
    m: usize,
    dpss: &DpssSet,
    m_inputs: usize,
    grid_size: usize,
) -> Result<SupremaReport> {
    if m >= sys.num_outputs {
        return Err(Error::Shape(format!("output {m} out of range")));
    }
    if m_inputs == 0 || m_inputs > dpss.len() || m_inputs > sys.num_inputs {
        return Err(Error::InvalidParameter(format!(
            "M = {m_inputs} exceeds the available inputs or sequences"
        )));
    }
    let g = grid_size;
    let orders = sys.max_order();
    let spectra = sys.factor_spectra(g);
    let derivs = factor_derivative_spectra(sys, g);
    let peak: Vec<f64> = spectra
        .iter()
        .map(|s| s.iter().map(|v| v.norm()).fold(0.0, f64::max))
        .collect();
    let dpeak: Vec<f64> = derivs
        .iter()
        .map(|s| s.iter().map(|v| v.norm()).fold(0.0, f64::max))
        .collect();
    let groups = group_terms(sys, m, m_inputs);

    let mut gamma_star = vec![0.0; orders];
    let mut gamma_star_exact = vec![true; orders];
    let mut gamma_prime_star = vec![0.0; orders];
    let mut curves = vec![vec![0.0f64; g]; orders];
    let mut gamma1_prime = 0.0f64;
    let w = dpss.half_bandwidth();

    for (channels, terms) in &groups {
        let q = channels.len();
        let sup = if q == 1 {
            (0..g)
                .map(|k| {
                    terms
                        .iter()
                        .map(|t| t.coeff * spectra[t.factors[0]][k])
                        .sum::<Complex64>()
                        .norm()
                })
                .fold(0.0, f64::max)
        } else if g.saturating_pow(q as u32).saturating_mul(terms.len()) <= EXHAUSTIVE_SUP_BUDGET {
            exhaustive_sup(terms, &spectra, g, q)
        } else {
            gamma_star_exact[q - 1] = false;
            terms
                .iter()
                .map(|t| t.coeff.abs() * t.factors.iter().map(|&f| peak[f]).product::<f64>())
                .sum()
        };
        gamma_star[q - 1] = f64::max(gamma_star[q - 1], sup);

        if q == 1 {
            for k in 0..g {
                if bin_frequency(k, g).abs() <= w {
                    let d: Complex64 = terms.iter().map(|t| t.coeff * derivs[t.factors[0]][k]).sum();
                    gamma1_prime = gamma1_prime.max(d.norm());
                }
            }
        } else {
            let dmax = (0..q)
                .map(|j| {
                    terms
                        .iter()
                        .map(|t| {
                            t.coeff.abs()
                                * t.factors
                                    .iter()
                                    .enumerate()
                                    .map(|(i, &f)| if i == j { dpeak[f] } else { peak[f] })
                                    .product::<f64>()
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            let grad = ((q - 1) as f64).sqrt() * dmax;
            gamma_prime_star[q - 1] = f64::max(gamma_prime_star[q - 1], grad);
        }

        // Gamma(0, ..., 0, f)
        for k in 0..g {
            let v: Complex64 = terms
                .iter()
                .map(|t| {
                    let (last, head) = t.factors.split_last().expect("non-empty term");
                    t.coeff * head.iter().map(|&f| spectra[f][0]).product::<Complex64>() * spectra[*last][k]
                })
                .sum();
            let c = &mut curves[q - 1][k];
            *c = f64::max(*c, v.norm());
        }
    }

    // reorder curves to ascending frequency
    let start = g - g / 2;
    let curve_frequencies: Vec<f64> = (0..g).map(|j| bin_frequency((start + j) % g, g)).collect();
    let gamma_double_star_curve: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| (0..g).map(|j| c[(start + j) % g]).collect())
        .collect();
    let gamma_double_star = gamma_double_star_curve
        .iter()
        .map(|c| c.iter().cloned().fold(0.0, f64::max))
        .collect();
    let v_m_star = (0..m_inputs)
        .map(|j| {
            zero_padded_dft(&dpss.sequences[j], g)
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let lambda_min = dpss.eigenvalues[..m_inputs]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(SupremaReport {
        gamma_star,
        gamma_star_exact,
        gamma_prime_star,
        gamma_double_star,
        gamma_double_star_curve,
        curve_frequencies,
        gamma1_prime_double_star: gamma1_prime,
        v_m_star,
        lambda_min,
    })
}

/// `(1 - lambda_min)^{(Q-1)/2} V_* M^Q Gamma_*`.
pub fn bound_a(q: usize, m: usize, lambda_min: f64, v_m_star: f64, gamma_star: f64) -> f64 {
    let gap = (1.0 - lambda_min).max(0.0);
    gap.powf((q as f64 - 1.0) / 2.0) * v_m_star * (m as f64).powi(q as i32) * gamma_star
}

/// `W^{Q-1} Gamma'_* M^Q J_B`.
pub fn bound_b(q: usize, m: usize, w: f64, gamma_prime_star: f64, j_b: f64) -> f64 {
    w.powi(q as i32 - 1) * gamma_prime_star * (m as f64).powi(q as i32) * j_b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub order: usize,
    pub frequency: f64,
    pub bound_a: f64,
    pub bound_b: f64,
    /// `(2W)^{(Q-2)/2} M^Q Gamma_**(0, f)`.
    pub in_band_term: f64,
    pub bound_c: f64,
    pub j_b: f64,
    pub j_b_closed_form: f64,
    /// `M^Q Gamma_**(0, f) max(0, J_B - (2W)^{(Q-2)/2})`.
    pub delta_prime: f64,
    pub epsilon: Option<f64>,
}

/// Assembles `C = A + B + (2W)^{(Q-2)/2} M^Q Gamma_**(0, f)` for order `q`.
pub fn bound_c(q: usize, m: usize, w: f64, suprema: &SupremaReport, j_b: f64, f: f64) -> Result<BoundReport> {
    validate_q(q)?;
    if q > suprema.orders() {
        return Err(Error::InvalidParameter(format!(
            "suprema cover orders up to {}, asked for {q}",
            suprema.orders()
        )));
    }
    let closed = jb_closed_form(w, q);
    let mq = (m as f64).powi(q as i32);
    let gdd = suprema.gamma_double_star_at(q, f);
    let a = bound_a(q, m, suprema.lambda_min, suprema.v_m_star, suprema.gamma_star[q - 1]);
    let b = bound_b(q, m, w, suprema.gamma_prime_star[q - 1], j_b);
    let in_band_term = closed * mq * gdd;
    Ok(BoundReport {
        order: q,
        frequency: f,
        bound_a: a,
        bound_b: b,
        in_band_term,
        bound_c: a + b + in_band_term,
        j_b,
        j_b_closed_form: closed,
        delta_prime: mq * gdd * (j_b - closed).max(0.0),
        epsilon: None,
    })
}

/// `e^x - 1 - x - x^2/2` without cancellation for small `x`.
fn exp_tail3(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let mut term = x * x * x / 6.0;
        let mut sum = 0.0f64;
        let mut j = 3.0;
        while term.abs() > 1e-18 * sum.abs() || sum == 0.0 {
            sum += term;
            j += 1.0;
            term *= x / j;
            if term == 0.0 {
                break;
            }
        }
        sum
    } else {
        x.exp_m1() - x - 0.5 * x * x
    }
}

/// The exponential-system bound on `|Y - T_1 - T_2|`: the three series tails
/// `sum_{j>=3}` with arguments `alpha M sqrt(1 - lambda_min)`,
/// `sqrt(2) gamma M W^{3/2}` and `sqrt(2W) beta M`.
pub fn theorem1_epsilon(alpha: f64, beta: f64, gamma: f64, m: usize, w: f64, lambda_min: f64, v_m_star: f64) -> f64 {
    let mf = m as f64;
    let x = alpha * mf * (1.0 - lambda_min).max(0.0).sqrt();
    let y = std::f64::consts::SQRT_2 * gamma * mf * w.powf(1.5);
    let z = (2.0 * w).sqrt() * beta * mf;
    v_m_star * exp_tail3(x) + w.powi(-2) * std::f64::consts::FRAC_1_SQRT_2 * exp_tail3(y) + exp_tail3(z) / (2.0 * w)
}

/// Bound on `|I_{m,m'} - Gamma^{(1)}_{m,m'}(0) lambda_{m'}|`.
pub fn inner_product_bound(
    m: usize,
    w: f64,
    lambda_values: &[f64],
    suprema: &SupremaReport,
    epsilon: f64,
    m_prime: usize,
) -> Result<f64> {
    if m_prime >= lambda_values.len() {
        return Err(Error::InvalidParameter(format!(
            "probe index {m_prime} out of range for {} eigenvalues",
            lambda_values.len()
        )));
    }
    let lambda_min = lambda_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mf = m as f64;
    let g1 = suprema.gamma_star.first().copied().unwrap_or(0.0);
    let g2 = suprema.gamma_star.get(1).copied().unwrap_or(0.0);
    let gap_prime = (1.0 - lambda_values[m_prime]).max(0.0);
    Ok(epsilon * lambda_min.max(0.0).sqrt()
        + w * mf * suprema.gamma1_prime_double_star
        + mf * g1 * (1.0 - lambda_min).max(0.0)
        + ((2.0 * w).sqrt() + gap_prime.sqrt()) * mf * mf * g2)
}
