//! The four stimulus classes and the additive output noise.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::dot;
use crate::seeds::rng_from_seed;
use crate::slepian::{generate_dpss, modulate, DpssParams, DpssSet};
use crate::{Error, Result};

/// Degree of the maximal-length shift register.
pub const LFSR_DEGREE: u32 = 8;
pub const LFSR_PERIOD: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputClass {
    GaussianWhite,
    MSequence,
    Ssr,
    ModulatedDpss,
}

impl InputClass {
    pub const ALL: [InputClass; 4] = [
        InputClass::GaussianWhite,
        InputClass::MSequence,
        InputClass::Ssr,
        InputClass::ModulatedDpss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputClass::GaussianWhite => "gaussian_white",
            InputClass::MSequence => "m_sequence",
            InputClass::Ssr => "ssr",
            InputClass::ModulatedDpss => "modulated_dpss",
        }
    }

    /// White classes are analysed by kernel identification, the others by inner products.
    pub fn is_white(self) -> bool {
        matches!(self, InputClass::GaussianWhite | InputClass::MSequence)
    }
}

impl fmt::Display for InputClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        InputClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown input class `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub class: InputClass,
    pub n_samples: usize,
    /// Seconds per sample.
    pub sample_period: f64,
    /// Required value of the sum of squared samples.
    pub target_energy: f64,
    pub center_hz: f64,
    pub half_bandwidth_hz: f64,
    /// Frequency spacing of the sum-of-sinusoids input.
    pub rayleigh_hz: f64,
    pub dpss_order: Option<usize>,
    pub seed: u64,
    /// Reject even DPSS orders and orders above `2NW - 1`.
    pub enforce_odd_orders: bool,
}

impl InputSpec {
    /// Defaults of the detection study: 240 samples at 30 Hz, 2 Hz centre.
    pub fn new(class: InputClass, target_energy: f64, half_bandwidth_hz: f64, seed: u64) -> Self {
        InputSpec {
            class,
            n_samples: 240,
            sample_period: 1.0 / 30.0,
            target_energy,
            center_hz: 2.0,
            half_bandwidth_hz,
            rayleigh_hz: 0.375,
            dpss_order: None,
            seed,
            enforce_odd_orders: true,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.dpss_order = Some(order);
        self
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 / self.sample_period
    }

    /// `NW` implied by the bandwidth, sample period and length.
    pub fn time_bandwidth(&self) -> f64 {
        self.half_bandwidth_hz * self.sample_period * self.n_samples as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidSpec("n_samples must be positive".into()));
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::InvalidSpec("sample period must be positive".into()));
        }
        if !(self.target_energy > 0.0 && self.target_energy.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "target energy {} must be positive",
                self.target_energy
            )));
        }
        if !(self.half_bandwidth_hz >= 0.0 && self.center_hz >= 0.0) {
            return Err(Error::InvalidSpec("centre and bandwidth must be non-negative".into()));
        }
        if self.center_hz + self.half_bandwidth_hz >= self.nyquist_hz() {
            return Err(Error::InvalidSpec(format!(
                "band {} +/- {} Hz reaches Nyquist {} Hz",
                self.center_hz,
                self.half_bandwidth_hz,
                self.nyquist_hz()
            )));
        }
        Ok(())
    }
}

/// Scales `u` in place so that its energy equals `target`.
pub fn rescale_to_energy(u: &mut [f64], target: f64) -> Result<()> {
    let e = dot(u, u);
    if !(e > 0.0) {
        return Err(Error::InvalidSpec("cannot rescale a zero-energy signal".into()));
    }
    let s = (target / e).sqrt();
    u.iter_mut().for_each(|v| *v *= s);
    Ok(())
}

pub fn gaussian_white(spec: &InputSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut u: Vec<f64> = (0..spec.n_samples).map(|_| rng.sample(StandardNormal)).collect();
    rescale_to_energy(&mut u, spec.target_energy)?;
    Ok(u)
}

/// One full period of the ±1 maximal-length sequence for x⁸+x⁶+x⁵+x⁴+1,
/// starting from the all-ones-in-bit-0 register state.
pub fn m_sequence_period() -> Vec<f64> {
    let mut state: u16 = 1;
    let mut out = Vec::with_capacity(LFSR_PERIOD);
    for _ in 0..LFSR_PERIOD {
        let bit = state & 1;
        out.push(if bit == 1 { 1.0 } else { -1.0 });
        let fb = (state ^ (state >> 2) ^ (state >> 3) ^ (state >> 4)) & 1;
        state = (state >> 1) | (fb << (LFSR_DEGREE - 1));
    }
    out
}

/// Period-255 sequence started at phase `seed mod 255`, repeated or
/// truncated to the requested length.
pub fn m_sequence(spec: &InputSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let period = m_sequence_period();
    let start = (spec.seed % LFSR_PERIOD as u64) as usize;
    let mut u: Vec<f64> = (0..spec.n_samples).map(|t| period[(start + t) % LFSR_PERIOD]).collect();
    rescale_to_energy(&mut u, spec.target_energy)?;
    Ok(u)
}

/// Cosine frequencies (Hz): `c - W, c - W + f_R, ...` while not above `c + W`.
/// A band too narrow to hold two frequencies collapses to the centre.
pub fn ssr_frequencies(center_hz: f64, half_bandwidth_hz: f64, rayleigh_hz: f64) -> Result<Vec<f64>> {
    if !(rayleigh_hz > 0.0) || !(half_bandwidth_hz >= 0.0) || !center_hz.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "no frequencies for centre {center_hz}, W {half_bandwidth_hz}, spacing {rayleigh_hz}"
        )));
    }
    let lo = center_hz - half_bandwidth_hz;
    let hi = center_hz + half_bandwidth_hz + 1e-12;
    let freqs: Vec<f64> = (0..)
        .map(|i| lo + i as f64 * rayleigh_hz)
        .take_while(|&f| f <= hi)
        .collect();
    match freqs.len() {
        0 => Err(Error::InvalidSpec("empty frequency set".into())),
        1 => Ok(vec![center_hz]),
        _ => Ok(freqs),
    }
}

pub fn ssr(spec: &InputSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let freqs = ssr_frequencies(spec.center_hz, spec.half_bandwidth_hz, spec.rayleigh_hz)?;
    let mut u: Vec<f64> = (0..spec.n_samples)
        .map(|t| {
            let time = t as f64 * spec.sample_period;
            freqs.iter().map(|f| (2.0 * PI * f * time).cos()).sum()
        })
        .collect();
    rescale_to_energy(&mut u, spec.target_energy)?;
    Ok(u)
}

/// Odd orders `1, 3, ...` not exceeding `2NW - 1`.
pub fn protocol_dpss_orders(time_bandwidth: f64) -> Vec<usize> {
    let max = (2.0 * time_bandwidth - 1.0 + 1e-9).floor();
    if max < 1.0 {
        return Vec::new();
    }
    (1..=max as usize).step_by(2).collect()
}

/// DPSS set matching `spec`'s bandwidth with enough sequences for its order.
pub fn dpss_for_spec(spec: &InputSpec) -> Result<DpssSet> {
    let order = spec
        .dpss_order
        .ok_or_else(|| Error::InvalidSpec("modulated DPSS input needs an order".into()))?;
    generate_dpss(&DpssParams::new(spec.n_samples, spec.time_bandwidth(), order + 1)?)
}

pub fn modulated_dpss(spec: &InputSpec, dpss: &DpssSet) -> Result<Vec<f64>> {
    spec.validate()?;
    let order = spec
        .dpss_order
        .ok_or_else(|| Error::InvalidSpec("modulated DPSS input needs an order".into()))?;
    if dpss.params.n_samples != spec.n_samples {
        return Err(Error::Shape(format!(
            "DPSS length {} differs from input length {}",
            dpss.params.n_samples, spec.n_samples
        )));
    }
    if spec.enforce_odd_orders {
        let nw = dpss.params.time_bandwidth;
        if order % 2 == 0 {
            return Err(Error::ProtocolViolation(format!(
                "even DPSS order {order} is not admissible"
            )));
        }
        if order as f64 > 2.0 * nw - 1.0 + 1e-9 {
            return Err(Error::ProtocolViolation(format!(
                "DPSS order {order} exceeds 2NW-1 = {}",
                2.0 * nw - 1.0
            )));
        }
    }
    let carrier = spec.center_hz * spec.sample_period;
    let mut u = modulate(dpss, order, carrier)?.values;
    rescale_to_energy(&mut u, spec.target_energy)?;
    Ok(u)
}

/// Dispatches on `spec.class`, building the DPSS set when needed.
pub fn generate(spec: &InputSpec) -> Result<Vec<f64>> {
    match spec.class {
        InputClass::GaussianWhite => gaussian_white(spec),
        InputClass::MSequence => m_sequence(spec),
        InputClass::Ssr => ssr(spec),
        InputClass::ModulatedDpss => {
            spec.validate()?;
            modulated_dpss(spec, &dpss_for_spec(spec)?)
        }
    }
}

/// `signal` plus seeded Gaussian noise of the given variance.
pub fn add_output_noise(signal: &[f64], seed: u64, variance: f64) -> Result<Vec<f64>> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance {variance}")));
    }
    if variance == 0.0 {
        return Ok(signal.to_vec());
    }
    let sd = variance.sqrt();
    let mut rng = rng_from_seed(seed);
    Ok(signal
        .iter()
        .map(|s| s + sd * rng.sample::<f64, _>(StandardNormal))
        .collect())
}
