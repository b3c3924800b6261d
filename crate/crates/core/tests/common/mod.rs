//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use slepvol::seeds::{rng_from_seed, Rng as SeededRng};
use slepvol::slepian::DpssSet;
use slepvol::volterra::SeparableVolterraSystem;

/// Top `k` eigenpairs of the dense concentration matrix
/// `A[t, s] = sin(2 pi W (t - s)) / (pi (t - s))`, descending.
pub fn dense_dpss(n: usize, w: f64, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let a = DMatrix::from_fn(n, n, |t, s| {
        if t == s {
            2.0 * w
        } else {
            let d = t as f64 - s as f64;
            (2.0 * PI * w * d).sin() / (PI * d)
        }
    });
    let eig = a.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = idx[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx[..k]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Largest deviation between two vectors allowing for a global sign flip.
pub fn max_dev_up_to_sign(a: &[f64], b: &[f64]) -> f64 {
    let plus = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let minus = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}

/// Direct nested-sum evaluation over every lag tuple of every term.
pub fn naive_volterra(sys: &SeparableVolterraSystem, input: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = input[0].len();
    let mut out: Vec<Vec<f64>> = sys.dc_offset.iter().map(|&d| vec![d; n]).collect();
    for (m, terms) in sys.terms.iter().enumerate() {
        for term in terms {
            let factors: Vec<_> = term.factors.iter().map(|&f| &sys.factors[f]).collect();
            for t in 0..n {
                let mut lags = vec![1usize; factors.len()];
                let mut acc = 0.0;
                'tuples: loop {
                    let mut p = term.coeff;
                    for (f, &l) in factors.iter().zip(&lags) {
                        if l > t {
                            p = 0.0;
                            break;
                        }
                        p *= f.taps[l - 1] * input[f.input][t - l];
                    }
                    acc += p;
                    for (j, f) in factors.iter().enumerate() {
                        if lags[j] < f.taps.len() {
                            lags[j] += 1;
                            continue 'tuples;
                        }
                        lags[j] = 1;
                    }
                    break;
                }
                out[m][t] += acc;
            }
        }
    }
    out
}

/// Naive `O(G N)` DFT in FFT order.
pub fn naive_dft(x: &[f64], g: usize) -> Vec<Complex64> {
    (0..g)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / g as f64))
                .sum()
        })
        .collect()
}

/// Evaluates `V_k(f) = sum_t v_t e^{-i 2 pi f t}` directly.
pub fn dpswf_at(v: &[f64], f: f64) -> Complex64 {
    v.iter()
        .enumerate()
        .map(|(t, &x)| x * Complex64::from_polar(1.0, -2.0 * PI * f * t as f64))
        .sum()
}

/// Band nodes of a `g`-point grid with trapezoid weights on `(-W, W)`.
pub fn band_nodes(w: f64, g: usize) -> Vec<(f64, f64)> {
    let tol = 1e-9 / g as f64;
    (0..g)
        .filter_map(|k| {
            let kk = k as i64 - (g / 2) as i64;
            let f = kk as f64 / g as f64;
            if f.abs() < w - tol {
                Some((f, 1.0))
            } else if (f.abs() - w).abs() <= tol {
                Some((f, 0.5))
            } else {
                None
            }
        })
        .collect()
}

/// Tensor-product quadrature of the band-limited `(q-1)`-fold integral
/// `int V_{m_q}(f - sum f_j) prod V_{m_j}(f_j) df_j`, for `q` in {2, 3}.
pub fn tensor_j(dpss: &DpssSet, m_q: &[usize], f: f64, g: usize) -> Complex64 {
    let nodes = band_nodes(dpss.half_bandwidth(), g);
    let h = 1.0 / g as f64;
    let seq = |j: usize| &dpss.sequences[m_q[j]];
    let pre: Vec<Vec<Complex64>> = (0..m_q.len() - 1)
        .map(|j| nodes.iter().map(|&(fr, _)| dpswf_at(seq(j), fr)).collect())
        .collect();
    let last = seq(m_q.len() - 1);
    let mut acc = Complex64::new(0.0, 0.0);
    match m_q.len() {
        2 => {
            for (i, &(f1, w1)) in nodes.iter().enumerate() {
                acc += w1 * h * pre[0][i] * dpswf_at(last, f - f1);
            }
        }
        3 => {
            for (i, &(f1, w1)) in nodes.iter().enumerate() {
                for (j, &(f2, w2)) in nodes.iter().enumerate() {
                    acc += w1 * w2 * h * h * pre[0][i] * pre[1][j] * dpswf_at(last, f - f1 - f2);
                }
            }
        }
        q => panic!("tensor oracle supports Q = 2, 3 (got {q})"),
    }
    acc
}

/// Seeded random separable single-output system: `terms_per_order` rank-one
/// terms for each order up to `max_order`, factor taps of length `1..=max_taps`.
pub fn random_system(
    rng: &mut SeededRng,
    num_inputs: usize,
    max_order: usize,
    terms_per_order: usize,
    max_taps: usize,
    order_scale: &[f64],
) -> SeparableVolterraSystem {
    let mut sys = SeparableVolterraSystem::new(num_inputs, 1);
    for q in 1..=max_order {
        for _ in 0..terms_per_order {
            let mut factors = Vec::with_capacity(q);
            for _ in 0..q {
                let len = rng.random_range(1..=max_taps);
                let taps = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                let input = rng.random_range(0..num_inputs);
                factors.push(sys.add_factor(input, taps).unwrap());
            }
            let c = rng.random_range(-1.0..1.0) * order_scale[q - 1];
            sys.add_term(0, c, factors).unwrap();
        }
    }
    sys
}

pub fn seeded(seed: u64) -> SeededRng {
    rng_from_seed(seed)
}

pub fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `sum_j x^j / j!` for `j >= 3`, 200 terms.
pub fn series_tail(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for j in 1..=200 {
        term *= x / j as f64;
        if j >= 3 {
            sum += term;
        }
    }
    sum
}
