//! Least-squares third-order kernel identification in the Laguerre basis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::fourier::dtft;
use crate::laguerre::LaguerreBasis;
use crate::linalg::least_squares;
use crate::{Error, Result};

/// Columns `[phi_1..phi_K, phi_1^2..phi_K^2, phi_1^3..phi_K^3]`, no constant column.
pub fn build_regression(input: &[f64], basis: &LaguerreBasis) -> Result<DMatrix<f64>> {
    if input.len() != basis.n_samples {
        return Err(Error::Shape(format!(
            "input has {} samples, basis expects {}",
            input.len(),
            basis.n_samples
        )));
    }
    Ok(regression_from_filtered(&basis.filter(input)))
}

pub fn regression_from_filtered(phi: &[Vec<f64>]) -> DMatrix<f64> {
    let k = phi.len();
    let n = phi.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, 3 * k, |t, c| {
        let x = phi[c % k][t];
        match c / k {
            0 => x,
            1 => x * x,
            _ => x * x * x,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub coeffs_order1: Vec<f64>,
    pub coeffs_order2: Vec<f64>,
    pub coeffs_order3: Vec<f64>,
    pub residual_norm: f64,
    /// Condition number of the column-equilibrated regression matrix.
    pub condition_number: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl IdentificationResult {
    /// Estimated first-order kernel; entry `j` is the tap at lag `j + 1`.
    pub fn order1_kernel(&self, basis: &LaguerreBasis) -> Vec<f64> {
        basis.synthesize(&self.coeffs_order1)
    }
}

pub fn least_squares_identify(input: &[f64], output: &[f64], basis: &LaguerreBasis) -> Result<IdentificationResult> {
    if input.len() != output.len() {
        return Err(Error::Shape(format!(
            "input has {} samples, output has {}",
            input.len(),
            output.len()
        )));
    }
    let x = build_regression(input, basis)?;
    identify_with_design(&x, output)
}

/// Solves against a prebuilt regression matrix (see [`build_regression`]).
pub fn identify_with_design(x: &DMatrix<f64>, output: &[f64]) -> Result<IdentificationResult> {
    if !x.ncols().is_multiple_of(3) {
        return Err(Error::Shape(format!("{} regression columns", x.ncols())));
    }
    let k = x.ncols() / 3;
    let ls = least_squares(x, output)?;
    let c = ls.coefficients;
    Ok(IdentificationResult {
        coeffs_order1: c[..k].to_vec(),
        coeffs_order2: c[k..2 * k].to_vec(),
        coeffs_order3: c[2 * k..].to_vec(),
        residual_norm: ls.residual_norm,
        condition_number: ls.condition_number,
        rank: ls.rank,
        rank_deficient: ls.rank_deficient,
    })
}

/// Frequencies `c - W, c - W + df, ...` not above `c + W` (Hz).
pub fn inband_frequencies(w_hz: f64, center_hz: f64, df_hz: f64) -> Result<Vec<f64>> {
    if !(df_hz > 0.0) || !(w_hz >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "frequency step {df_hz} and bandwidth {w_hz}"
        )));
    }
    let hi = center_hz + w_hz + 1e-12;
    Ok((0..)
        .map(|i| center_hz - w_hz + i as f64 * df_hz)
        .take_while(|&f| f <= hi)
        .collect())
}

/// `(f, |Gamma_1(f)|)` of the identified linear kernel over the band.
pub fn inband_gfrf_statistics(
    result: &IdentificationResult,
    basis: &LaguerreBasis,
    w_hz: f64,
    center_hz: f64,
    df_hz: f64,
) -> Result<Vec<(f64, f64)>> {
    if result.coeffs_order1.len() != basis.num_functions {
        return Err(Error::Shape("coefficient count differs from basis size".into()));
    }
    let kernel = result.order1_kernel(basis);
    Ok(inband_frequencies(w_hz, center_hz, df_hz)?
        .into_iter()
        .map(|f| (f, dtft(&kernel, 1, basis.hz_to_cycles(f)).norm()))
        .collect())
}
