//! Laguerre-polynomial kernel bases and the null/alternate test systems.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{fft_inverse, SpectrumGrid};
use crate::linalg::least_squares;
use crate::volterra::SeparableVolterraSystem;

/// Polynomial order used for basis function `index` (0-based): `100 index + 1`.
pub fn basis_polynomial_order(index: usize) -> usize {
    100 * index + 1
}

/// `L_k(x)` by the three-term recurrence
/// `(k + 1) L_{k+1} = (2k + 1 - x) L_k - k L_{k-1}`.
pub fn laguerre_polynomial(k: usize, x: f64) -> Result<f64> {
    let mut prev = 1.0;
    if k == 0 {
        return Ok(prev);
    }
    let mut cur = 1.0 - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 - x) * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    if cur.is_finite() {
        Ok(cur)
    } else {
        Err(Error::NonFinite(format!("L_{k}({x})")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreBasis {
    pub num_functions: usize,
    pub n_samples: usize,
    pub sample_period: f64,
    /// `functions[k][t] = L_{100k+1}(sample_period * t)`.
    pub functions: Vec<Vec<f64>>,
    pub rank: usize,
    pub condition_number: f64,
    /// Set when the numerical rank falls short of `num_functions`.
    pub conditioning_warning: bool,
}

pub fn build_basis(num_functions: usize, n_samples: usize, sample_period: f64) -> Result<LaguerreBasis> {
    if num_functions == 0 || n_samples == 0 || !(sample_period > 0.0) {
        return Err(Error::InvalidParameter(
            "basis size, length and sample period must be positive".into(),
        ));
    }
    let functions = (0..num_functions)
        .map(|k| {
            let order = basis_polynomial_order(k);
            (0..n_samples)
                .map(|t| laguerre_polynomial(order, sample_period * t as f64))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let design = DMatrix::from_fn(n_samples, num_functions, |t, k| functions[k][t]);
    let sv = design.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let tol = n_samples.max(num_functions) as f64 * f64::EPSILON * smax;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    Ok(LaguerreBasis {
        num_functions,
        n_samples,
        sample_period,
        functions,
        rank,
        condition_number: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        conditioning_warning: rank < num_functions,
    })
}

impl LaguerreBasis {
    /// `N x K` matrix with the basis functions as columns.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_samples, self.num_functions, |t, k| self.functions[k][t])
    }

    /// `sum_k c_k g_{k,t}`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_samples];
        for (c, g) in coeffs.iter().zip(&self.functions) {
            out.iter_mut().zip(g).for_each(|(o, v)| *o += c * v);
        }
        out
    }

    /// Filter-bank outputs `phi_k(t) = sum_{j>=1} g_{k,j-1} u_{t-j}`: each basis
    /// function acts as a causal kernel starting at lag one.
    pub fn filter(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.functions.iter().map(|g| causal_filter(g, u)).collect()
    }

    /// Converts a frequency in Hz to cycles/sample.
    pub fn hz_to_cycles(&self, f_hz: f64) -> f64 {
        f_hz * self.sample_period
    }
}

/// `y_t = sum_{j=1}^{t} taps[j-1] u_{t-j}` over the length of `u`.
pub fn causal_filter(taps: &[f64], u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut y = vec![0.0; n];
    for (t, yt) in y.iter_mut().enumerate() {
        let lags = t.min(taps.len());
        let mut acc = 0.0;
        for j in 1..=lags {
            acc += taps[j - 1] * u[t - j];
        }
        *yt = acc;
    }
    y
}

/// Real part of the inverse DFT of a spectrum, length `G`.
pub fn time_kernel_from_spectrum(target: &SpectrumGrid) -> Vec<f64> {
    let mut buf = target.to_fft_order();
    fft_inverse(&mut buf);
    let g = buf.len() as f64;
    buf.iter().map(|v| v.re / g).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norm divided by the target norm (zero for a zero target).
    pub relative_residual: f64,
    pub condition_number: f64,
    pub rank_deficient: bool,
}

/// Least-squares fit of a time kernel (lags `1..=N`) in the basis.
pub fn fit_time_kernel(kernel: &[f64], basis: &LaguerreBasis) -> Result<KernelFit> {
    if kernel.len() < basis.n_samples {
        return Err(Error::Shape(format!(
            "kernel has {} samples, basis needs {}",
            kernel.len(),
            basis.n_samples
        )));
    }
    let target = &kernel[..basis.n_samples];
    let ls = least_squares(&basis.design_matrix(), target)?;
    let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(KernelFit {
        relative_residual: if norm > 0.0 { ls.residual_norm / norm } else { 0.0 },
        coefficients: ls.coefficients,
        residual_norm: ls.residual_norm,
        condition_number: ls.condition_number,
        rank_deficient: ls.rank_deficient,
    })
}

/// Fits a frequency-response target (grid of at least `N` points).
pub fn fit_order1_coeffs(target: &SpectrumGrid, basis: &LaguerreBasis) -> Result<KernelFit> {
    if target.grid_size() < basis.n_samples {
        return Err(Error::Shape(format!(
            "target grid of {} points is shorter than N = {}",
            target.grid_size(),
            basis.n_samples
        )));
    }
    fit_time_kernel(&time_kernel_from_spectrum(target), basis)
}

/// Builds an `N`-point real spectrum from a function of frequency in Hz.
pub fn target_from_hz(basis: &LaguerreBasis, response: impl Fn(f64) -> f64) -> SpectrumGrid {
    let dt = basis.sample_period;
    SpectrumGrid::from_fn(basis.n_samples, |f| Complex64::new(response(f / dt), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemLabel {
    Null,
    Alternate,
}

impl fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemLabel::Null => "null",
            SystemLabel::Alternate => "alternate",
        })
    }
}

impl FromStr for SystemLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(SystemLabel::Null),
            "alternate" => Ok(SystemLabel::Alternate),
            other => Err(Error::Parse(format!("unknown system label '{other}'"))),
        }
    }
}

/// How the elevated linear response term is read: literally as
/// `a |f|^3` (growing) or as `a |f|^-3` (decaying).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpReading {
    #[default]
    Literal,
    Decaying,
}

impl FromStr for BumpReading {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(BumpReading::Literal),
            "decaying" => Ok(BumpReading::Decaying),
            other => Err(Error::Parse(format!("unknown bump reading '{other}'"))),
        }
    }
}

/// Spectral targets from which the test-system coefficients are fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDesign {
    /// Flat first-order gain of the null system.
    pub linear_gain: f64,
    /// Amplitude of the extra first-order term of the alternate system.
    pub linear_bump_amplitude: f64,
    pub rayleigh_hz: f64,
    pub reading: BumpReading,
    /// Flat level of the second- and third-order factor spectra.
    pub higher_order_level: f64,
    /// Relative height of the Gaussian elevations in the alternate system.
    pub higher_order_bump_gain: f64,
    pub bump_width_hz: f64,
    pub order2_bumps_hz: Vec<f64>,
    pub order3_bumps_hz: Vec<f64>,
}

impl Default for TargetDesign {
    fn default() -> Self {
        Self {
            linear_gain: 0.75,
            linear_bump_amplitude: 1e-3,
            rayleigh_hz: 3.0 / 8.0,
            reading: BumpReading::Literal,
            higher_order_level: 0.5,
            higher_order_bump_gain: 1.0,
            bump_width_hz: 3.0 / 8.0,
            order2_bumps_hz: vec![2.0],
            order3_bumps_hz: vec![2.0, 6.0],
        }
    }
}

impl TargetDesign {
    pub fn null_order1(&self, _f_hz: f64) -> f64 {
        self.linear_gain
    }

    /// First-order target of the alternate system.
    pub fn alternate_order1(&self, f_hz: f64) -> f64 {
        let f = f_hz.abs();
        let fr = self.rayleigh_hz;
        let extra = match self.reading {
            BumpReading::Literal if f >= 3.0 * fr => f.powi(3),
            BumpReading::Literal => fr.powi(3),
            BumpReading::Decaying if f >= 3.0 * fr => f.powi(-3),
            BumpReading::Decaying => fr.powi(-3),
        };
        self.linear_gain + self.linear_bump_amplitude * extra
    }

    fn bumps(&self, f_hz: f64, centers: &[f64]) -> f64 {
        let s = self.bump_width_hz;
        centers
            .iter()
            .map(|c| (-0.5 * ((f_hz.abs() - c) / s).powi(2)).exp())
            .sum()
    }

    pub fn higher_order(&self, label: SystemLabel, order: usize, f_hz: f64) -> f64 {
        let base = self.higher_order_level;
        match label {
            SystemLabel::Null => base,
            SystemLabel::Alternate => {
                let centers = if order == 2 {
                    &self.order2_bumps_hz
                } else {
                    &self.order3_bumps_hz
                };
                base * (1.0 + self.higher_order_bump_gain * self.bumps(f_hz, centers))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub label: SystemLabel,
    pub coeffs_order1: Vec<f64>,
    pub coeffs_order2: Vec<f64>,
    pub coeffs_order3: Vec<f64>,
    /// Multiplies the summed second- and third-order output.
    pub ho_scale: f64,
}

/// Per-order outputs of a [`SystemSpec`], higher orders already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemResponse {
    pub order1: Vec<f64>,
    pub order2: Vec<f64>,
    pub order3: Vec<f64>,
}

impl SystemResponse {
    pub fn total(&self) -> Vec<f64> {
        (0..self.order1.len())
            .map(|t| self.order1[t] + self.order2[t] + self.order3[t])
            .collect()
    }
}

/// Fit quality of each order of a built system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFits {
    pub order1: KernelFit,
    pub order2: KernelFit,
    pub order3: KernelFit,
}

/// Fits the three coefficient vectors of a labelled system from `design`.
pub fn make_system(
    basis: &LaguerreBasis,
    label: SystemLabel,
    ho_scale: f64,
    design: &TargetDesign,
) -> Result<(SystemSpec, SystemFits)> {
    let order1 = match label {
        SystemLabel::Null => fit_order1_coeffs(&target_from_hz(basis, |f| design.null_order1(f)), basis)?,
        SystemLabel::Alternate => fit_order1_coeffs(&target_from_hz(basis, |f| design.alternate_order1(f)), basis)?,
    };
    let order2 = fit_order1_coeffs(&target_from_hz(basis, |f| design.higher_order(label, 2, f)), basis)?;
    let order3 = fit_order1_coeffs(&target_from_hz(basis, |f| design.higher_order(label, 3, f)), basis)?;
    let spec = SystemSpec {
        label,
        coeffs_order1: order1.coefficients.clone(),
        coeffs_order2: order2.coefficients.clone(),
        coeffs_order3: order3.coefficients.clone(),
        ho_scale,
    };
    Ok((spec, SystemFits { order1, order2, order3 }))
}

pub fn make_null_system(basis: &LaguerreBasis, ho_scale: f64) -> Result<SystemSpec> {
    Ok(make_system(basis, SystemLabel::Null, ho_scale, &TargetDesign::default())?.0)
}

pub fn make_alternate_system(basis: &LaguerreBasis, ho_scale: f64, reading: BumpReading) -> Result<SystemSpec> {
    let design = TargetDesign {
        reading,
        ..TargetDesign::default()
    };
    Ok(make_system(basis, SystemLabel::Alternate, ho_scale, &design)?.0)
}

const SHIPPED_NULL: &str = include_str!("../data/null_coefficients.csv");
const SHIPPED_ALTERNATE: &str = include_str!("../data/alternate_coefficients.csv");

impl SystemSpec {
    /// Coefficient tables distributed with the crate (50 functions, literal reading).
    pub fn shipped(label: SystemLabel, ho_scale: f64) -> Result<Self> {
        let text = match label {
            SystemLabel::Null => SHIPPED_NULL,
            SystemLabel::Alternate => SHIPPED_ALTERNATE,
        };
        Self::from_csv(text, label, ho_scale)
    }

    /// Parses a `k,c1,c2,c3` table; lines starting with `#` are ignored.
    pub fn from_csv(text: &str, label: SystemLabel, ho_scale: f64) -> Result<Self> {
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        let mut c3 = Vec::new();
        let mut rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        match rows.next() {
            Some(h) if h.replace(' ', "") == "k,c1,c2,c3" => {}
            other => return Err(Error::Parse(format!("expected header 'k,c1,c2,c3', found {other:?}"))),
        }
        for (i, line) in rows.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("row {}: expected 4 fields", i + 1)));
            }
            let k: usize = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
            if k != i + 1 {
                return Err(Error::Parse(format!("row {}: index {k} out of sequence", i + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))
            };
            c1.push(parse(fields[1])?);
            c2.push(parse(fields[2])?);
            c3.push(parse(fields[3])?);
        }
        Ok(SystemSpec {
            label,
            coeffs_order1: c1,
            coeffs_order2: c2,
            coeffs_order3: c3,
            ho_scale,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# schema_version=1\nk,c1,c2,c3\n");
        for k in 0..self.coeffs_order1.len() {
            s.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                k + 1,
                self.coeffs_order1[k],
                self.coeffs_order2[k],
                self.coeffs_order3[k]
            ));
        }
        s
    }

    pub fn num_functions(&self) -> usize {
        self.coeffs_order1.len()
    }

    fn check_basis(&self, basis: &LaguerreBasis) -> Result<()> {
        let k = basis.num_functions;
        if self.coeffs_order1.len() != k || self.coeffs_order2.len() != k || self.coeffs_order3.len() != k {
            return Err(Error::Shape(format!(
                "system has {}/{}/{} coefficients, basis has {k} functions",
                self.coeffs_order1.len(),
                self.coeffs_order2.len(),
                self.coeffs_order3.len()
            )));
        }
        Ok(())
    }

    /// Response given precomputed filter-bank outputs `phi` (see [`LaguerreBasis::filter`]).
    pub fn respond_from_filtered(&self, phi: &[Vec<f64>]) -> Result<SystemResponse> {
        if phi.len() != self.num_functions() {
            return Err(Error::Shape(format!(
                "{} filter outputs for {} coefficients",
                phi.len(),
                self.num_functions()
            )));
        }
        let n = phi.first().map_or(0, Vec::len);
        let mut r = SystemResponse {
            order1: vec![0.0; n],
            order2: vec![0.0; n],
            order3: vec![0.0; n],
        };
        for (k, p) in phi.iter().enumerate() {
            let (a, b, c) = (self.coeffs_order1[k], self.coeffs_order2[k], self.coeffs_order3[k]);
            for t in 0..n {
                let x = p[t];
                r.order1[t] += a * x;
                r.order2[t] += b * x * x;
                r.order3[t] += c * x * x * x;
            }
        }
        r.order2.iter_mut().for_each(|v| *v *= self.ho_scale);
        r.order3.iter_mut().for_each(|v| *v *= self.ho_scale);
        Ok(r)
    }

    pub fn respond(&self, basis: &LaguerreBasis, u: &[f64]) -> Result<SystemResponse> {
        self.check_basis(basis)?;
        if u.len() != basis.n_samples {
            return Err(Error::Shape(format!(
                "input has {} samples, basis expects {}",
                u.len(),
                basis.n_samples
            )));
        }
        self.respond_from_filtered(&basis.filter(u))
    }

    /// Single-input single-output Volterra realization. The higher-order
    /// scale is folded into the order-2 and order-3 coefficients.
    pub fn to_volterra(&self, basis: &LaguerreBasis) -> Result<SeparableVolterraSystem> {
        self.check_basis(basis)?;
        let mut sys = SeparableVolterraSystem::new(1, 1);
        for k in 0..basis.num_functions {
            let f = sys.add_factor(0, basis.functions[k].clone())?;
            sys.add_term(0, self.coeffs_order1[k], vec![f])?;
            sys.add_term(0, self.ho_scale * self.coeffs_order2[k], vec![f, f])?;
            sys.add_term(0, self.ho_scale * self.coeffs_order3[k], vec![f, f, f])?;
        }
        Ok(sys)
    }
}
