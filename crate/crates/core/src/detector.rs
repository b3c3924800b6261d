//! Inner-product detection, null-referenced z-scores and DPSS cross products.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fourier::zero_padded_dft;
use crate::laguerre::SystemLabel;
use crate::linalg::dot;
use crate::signals::InputClass;
use crate::{Error, Result};

/// Two-sided 95% point of the standard normal.
pub const Z_95: f64 = 1.96;

/// `<y, p> / ||p||`.
pub fn inner_product_response(output: &[f64], probe: &[f64]) -> Result<f64> {
    if output.len() != probe.len() {
        return Err(Error::Shape(format!(
            "output has {} samples, probe has {}",
            output.len(),
            probe.len()
        )));
    }
    let e = dot(probe, probe);
    if !(e > 0.0) {
        return Err(Error::InvalidParameter("zero-energy probe".into()));
    }
    Ok(dot(output, probe) / e.sqrt())
}

/// Frequency-domain form of [`inner_product_response`] on a `G`-point grid.
pub fn spectral_inner_product(output: &[f64], probe: &[f64], grid_size: usize) -> Result<f64> {
    if output.len() != probe.len() {
        return Err(Error::Shape("output and probe lengths differ".into()));
    }
    if grid_size < output.len() {
        return Err(Error::Resolution(format!(
            "grid of {grid_size} points for {} samples",
            output.len()
        )));
    }
    let y = zero_padded_dft(output, grid_size);
    let p = zero_padded_dft(probe, grid_size);
    let s: Complex64 = y.iter().zip(&p).map(|(a, b)| a * b.conj()).sum();
    Ok(s.re / grid_size as f64 / dot(probe, probe).sqrt())
}

/// Sample mean and standard deviation (denominator `n - 1`) of a null ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullStats {
    pub mean: f64,
    pub std: f64,
}

impl NullStats {
    pub fn from_samples(null: &[f64]) -> Result<Self> {
        if null.len() < 2 {
            return Err(Error::DegenerateEnsemble(format!(
                "{} null samples, need at least 2",
                null.len()
            )));
        }
        let n = null.len() as f64;
        let mean = null.iter().sum::<f64>() / n;
        let var = null.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::DegenerateEnsemble("null responses have zero variance".into()));
        }
        Ok(NullStats { mean, std })
    }

    pub fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

pub fn normalize_against_null(alternate: &[f64], null: &[f64]) -> Result<Vec<f64>> {
    let s = NullStats::from_samples(null)?;
    Ok(alternate.iter().map(|&x| s.z(x)).collect())
}

/// Un-normalized matrix `<y^(j), p^(j')> / ||p^(j')||` over the shared keys.
pub fn inner_product_matrix(
    responses: &BTreeMap<usize, Vec<f64>>,
    probes: &BTreeMap<usize, Vec<f64>>,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    if !responses.keys().eq(probes.keys()) {
        return Err(Error::Shape("response and probe orders differ".into()));
    }
    let orders: Vec<usize> = responses.keys().copied().collect();
    let m = orders
        .iter()
        .map(|j| {
            orders
                .iter()
                .map(|jp| inner_product_response(&responses[j], &probes[jp]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((orders, m))
}

/// Cross-response magnitudes normalized by the geometric mean of self-responses.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossProducts {
    pub orders: Vec<usize>,
    pub matrix: Vec<Vec<f64>>,
}

impl CrossProducts {
    pub fn off_diagonal_mean(&self) -> f64 {
        let k = self.orders.len();
        if k < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    s += self.matrix[i][j];
                }
            }
        }
        s / (k * (k - 1)) as f64
    }
}

pub fn cross_product_matrix(
    responses: &BTreeMap<usize, Vec<f64>>,
    probes: &BTreeMap<usize, Vec<f64>>,
) -> Result<CrossProducts> {
    let (orders, raw) = inner_product_matrix(responses, probes)?;
    let k = orders.len();
    for (i, j) in orders.iter().enumerate() {
        if raw[i][i] == 0.0 || !raw[i][i].is_finite() {
            return Err(Error::DegenerateNormalization(format!(
                "self-response of order {j} is {}",
                raw[i][i]
            )));
        }
    }
    let matrix = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| raw[i][j].abs() / (raw[i][i] * raw[j][j]).abs().sqrt())
                .collect()
        })
        .collect();
    Ok(CrossProducts { orders, matrix })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// Inner product with the unit-energy probe.
    InnerProduct,
    /// `|Gamma_1(f)|` of the identified linear kernel at one in-band frequency.
    KernelMagnitude,
}

impl StatisticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatisticKind::InnerProduct => "inner_product",
            StatisticKind::KernelMagnitude => "kernel_magnitude",
        }
    }
}

/// One detector statistic from one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub input_class: InputClass,
    pub statistic: StatisticKind,
    /// DPSS order, for modulated-DPSS inputs.
    pub dpss_order: Option<usize>,
    /// Frequency in Hz, for kernel statistics.
    pub frequency_hz: Option<f64>,
    pub raw_response: f64,
    pub normalized_response: Option<f64>,
    pub seed: u64,
    pub energy: f64,
    pub w_hz: f64,
    pub ho_scale: f64,
    pub system_label: SystemLabel,
    pub repetition: usize,
    /// Input energy over output-noise variance.
    pub snri: f64,
}

impl DetectionRecord {
    /// Everything identifying the null ensemble this record is compared with.
    fn group_key(&self) -> (InputClass, StatisticKind, Option<usize>, [u64; 4]) {
        (
            self.input_class,
            self.statistic,
            self.dpss_order,
            [
                self.frequency_hz.map_or(u64::MAX, f64::to_bits),
                self.energy.to_bits(),
                self.w_hz.to_bits(),
                self.ho_scale.to_bits(),
            ],
        )
    }

    /// Total order used when writing records.
    pub fn sort_key(&self) -> impl Ord {
        (
            self.input_class,
            self.statistic,
            self.system_label,
            ordered(self.energy),
            ordered(self.w_hz),
            ordered(self.ho_scale),
            self.repetition,
            self.dpss_order,
            self.frequency_hz.map(ordered),
        )
    }
}

fn ordered(x: f64) -> i64 {
    // Monotone map from finite doubles to integers.
    let b = x.to_bits() as i64;
    if b < 0 {
        i64::MIN - b
    } else {
        b
    }
}

/// Fills `normalized_response` of every record from the null-labelled records
/// sharing its class, statistic, order, frequency, energy, W and scale.
/// Groups whose null ensemble is degenerate are left unnormalized and reported.
pub fn normalize_records(records: &mut [DetectionRecord], null_label: SystemLabel) -> Vec<String> {
    let mut nulls: HashMap<_, Vec<f64>> = HashMap::new();
    for r in records.iter().filter(|r| r.system_label == null_label) {
        nulls.entry(r.group_key()).or_default().push(r.raw_response);
    }
    let stats: HashMap<_, Result<NullStats>> = nulls
        .into_iter()
        .map(|(k, v)| (k, NullStats::from_samples(&v)))
        .collect();
    let mut problems = Vec::new();
    for r in records.iter_mut() {
        match stats.get(&r.group_key()) {
            Some(Ok(s)) => r.normalized_response = Some(s.z(r.raw_response)),
            Some(Err(e)) => {
                r.normalized_response = None;
                problems.push(format!("{} E={} W={}: {e}", r.input_class, r.energy, r.w_hz));
            }
            None => {
                r.normalized_response = None;
                problems.push(format!(
                    "{} E={} W={}: no null records",
                    r.input_class, r.energy, r.w_hz
                ));
            }
        }
    }
    problems.sort();
    problems.dedup();
    problems
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
