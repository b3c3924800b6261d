#![allow(clippy::needless_range_loop)]

mod common;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use num_complex::Complex64;
use rand::Rng;

use common::*;
use slepvol::bounds::{compute_j, BandSpectra};
use slepvol::fourier::zero_padded_dft;
use slepvol::laguerre::{build_basis, laguerre_polynomial, make_system, SystemLabel, SystemSpec, TargetDesign};
use slepvol::slepian::{generate_dpss, DpssParams};
use slepvol::volterra::{
    evaluate_per_order, evaluate_time_domain, gfrf_orderq_full, response_spectrum, MultiChannelSignal,
};

#[test]
fn dpss_matches_dense_eigensolve() {
    for n in [8usize, 13, 16, 24, 32] {
        for nw in [1.0, 1.5, 2.5, 3.0] {
            let k = ((2.0 * nw) as usize).min(n);
            let set = generate_dpss(&DpssParams::new(n, nw, k).unwrap()).unwrap();
            let (vals, vecs) = dense_dpss(n, nw / n as f64, k);
            for j in 0..k {
                let dev = max_dev_up_to_sign(&set.sequences[j], &vecs[j]);
                assert!(dev <= 1e-8, "N={n} NW={nw} k={j}: {dev:e}");
                assert!((set.eigenvalues[j] - vals[j]).abs() <= 1e-10, "N={n} NW={nw} k={j}");
            }
        }
    }
}

#[test]
fn separable_matches_nested_sums() {
    let mut rng = seeded(101);
    for case in 0..200 {
        let n = rng.random_range(2..=16);
        let inputs = rng.random_range(1..=2);
        let mut sys = random_system(&mut rng, inputs, 3, 2, 6, &[1.0, 1.0, 1.0]);
        sys.set_dc_offset(0, rng.random_range(-1.0..1.0)).unwrap();
        let u: Vec<Vec<f64>> = (0..inputs)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let fast = evaluate_time_domain(&sys, &MultiChannelSignal::new(u.clone(), 1.0).unwrap()).unwrap();
        let slow = naive_volterra(&sys, &u);
        let scale = slow[0].iter().map(|v| v.abs()).fold(1e-300, f64::max);
        for t in 0..n {
            let rel = (fast.values[0][t] - slow[0][t]).abs() / scale;
            assert!(rel <= 1e-10, "case {case} t={t}: {rel:e}");
        }
    }
}

#[test]
fn second_order_tensor_matches_direct_2d_dft() {
    let mut rng = seeded(7);
    let mut sys = random_system(&mut rng, 1, 2, 3, 16, &[1.0, 1.0]);
    // keep only the order-2 terms for the kernel comparison
    sys.terms[0].retain(|t| t.factors.len() == 2);
    let n = 16;
    let mut gamma = vec![vec![0.0; n + 1]; n + 1];
    for term in &sys.terms[0] {
        let (a, b) = (&sys.factors[term.factors[0]].taps, &sys.factors[term.factors[1]].taps);
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                gamma[i + 1][j + 1] += term.coeff * x * y;
            }
        }
    }
    let g = 16;
    let full = gfrf_orderq_full(&sys, 0, &[0, 0], g).unwrap();
    let mut worst = 0.0f64;
    for k1 in 0..g {
        for k2 in 0..g {
            let mut v = Complex64::new(0.0, 0.0);
            for (t1, row) in gamma.iter().enumerate() {
                for (t2, &c) in row.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * ((k1 * t1 + k2 * t2) as f64) / g as f64;
                    v += c * Complex64::from_polar(1.0, ph);
                }
            }
            worst = worst.max((v - full[k1 * g + k2]).norm());
        }
    }
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn convolution_j_matches_tensor_quadrature() {
    let mut rng = seeded(33);
    for (n, nw) in [(16usize, 2.0), (24, 2.0), (32, 2.5), (32, 3.0)] {
        let k = (2.0 * nw) as usize;
        let set = generate_dpss(&DpssParams::new(n, nw, k).unwrap()).unwrap();
        let g = 8 * n;
        let w = nw / n as f64;
        for q in [2usize, 3] {
            for _ in 0..3 {
                let m_q: Vec<usize> = (0..q).map(|_| rng.random_range(0..k)).collect();
                let scale = (0..=20)
                    .map(|i| tensor_j(&set, &m_q, -w + 2.0 * w * i as f64 / 20.0, g).norm())
                    .fold(0.0, f64::max);
                for f in [0.0, 0.3 * w, -0.7 * w, 1.3 * w, 0.123] {
                    let a = compute_j(&set, q, f, &m_q, g).unwrap();
                    let b = tensor_j(&set, &m_q, f, g);
                    let rel = (a - b).norm() / scale;
                    assert!(rel <= 1e-6, "N={n} Q={q} {m_q:?} f={f}: {rel:e}");
                }
            }
        }
    }
}

#[test]
fn grid_j_matches_pointwise_j() {
    let set = generate_dpss(&DpssParams::new(32, 2.0, 4).unwrap()).unwrap();
    let g = 256;
    let bands = BandSpectra::new(&set, g).unwrap();
    let grid = bands.j_grid(&[1, 2, 3]).unwrap();
    for k in [0usize, 3, 17, 250] {
        let f = slepvol::fourier::bin_frequency(k, g);
        let p = compute_j(&set, 3, f, &[1, 2, 3], g).unwrap();
        assert!((grid[k] - p).norm() <= 1e-12 * (1.0 + p.norm()), "bin {k}");
    }
}

#[test]
fn per_order_spectra_sum_to_output_dft() {
    let mut rng = seeded(5);
    for _ in 0..20 {
        let n = rng.random_range(8..=40);
        let sys = random_system(&mut rng, 2, 3, 2, 8, &[1.0, 0.5, 0.25]);
        let u: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let sig = MultiChannelSignal::new(u.clone(), 1.0).unwrap();
        let g = 64;
        let spec = response_spectrum(&sys, &sig, g).unwrap();
        let y = naive_volterra(&sys, &u);
        let direct = naive_dft(&y[0], g);
        let direct = slepvol::fourier::SpectrumGrid::from_fft_order(&direct);
        let scale = max_abs(&direct.values);
        for i in 0..g {
            let sum: Complex64 = spec.per_order[0].iter().map(|s| s.values[i]).sum();
            assert!((sum - direct.values[i]).norm() <= 1e-10 * scale);
            assert!((spec.total[0].values[i] - direct.values[i]).norm() <= 1e-10 * scale);
        }
    }
}

#[test]
fn third_order_spectrum_matches_triple_convolution() {
    let n = 32;
    let g = 64;
    let set = generate_dpss(&DpssParams::new(n, 2.0, 2).unwrap()).unwrap();
    let mut rng = seeded(77);
    let sys = random_system(&mut rng, 1, 3, 2, 8, &[1.0, 1.0, 1.0]);
    // zero extension keeps the whole output support inside the grid
    let u = MultiChannelSignal::single(set.sequences[1].clone(), 1.0)
        .unwrap()
        .zero_extended(g);
    let spec = response_spectrum(&sys, &u, g).unwrap();
    let t3 = spec.per_order[0][2].to_fft_order();
    let gamma = gfrf_orderq_full(&sys, 0, &[0, 0, 0], g).unwrap();
    let uf = zero_padded_dft(&set.sequences[1], g);
    let mut oracle = vec![Complex64::new(0.0, 0.0); g];
    for (k, o) in oracle.iter_mut().enumerate() {
        for k1 in 0..g {
            for k2 in 0..g {
                let k3 = (k + 2 * g - k1 - k2) % g;
                *o += gamma[(k1 * g + k2) * g + k3] * uf[k1] * uf[k2] * uf[k3];
            }
        }
        *o /= (g * g) as f64;
    }
    let rel = max_abs_diff(&t3, &oracle) / max_abs(&oracle);
    assert!(rel <= 1e-6, "{rel:e}");
    let dec = evaluate_per_order(&sys, &u).unwrap();
    assert!(dec.orders[2][0].iter().any(|v| v.abs() > 1e-6));
}

fn laguerre_exact(k: usize, x: &BigRational) -> BigRational {
    // sum_j (-1)^j C(k, j) x^j / j!
    let mut sum = BigRational::zero();
    let mut binom = BigInt::one();
    let mut fact = BigInt::one();
    let mut pow = BigRational::one();
    for j in 0..=k {
        if j > 0 {
            binom = binom * BigInt::from(k - j + 1) / BigInt::from(j);
            fact *= BigInt::from(j);
            pow *= x.clone();
        }
        let term = pow.clone() * BigRational::new(binom.clone(), fact.clone());
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

#[test]
fn laguerre_recurrence_matches_exact_sum() {
    let cases = [
        (101usize, 1i64, 1i64),
        (101, 7, 30),
        (201, 3, 2),
        (301, 1, 30),
        (50, 4, 1),
        (5, 1, 3),
    ];
    for (k, num, den) in cases {
        let x = BigRational::new(BigInt::from(num), BigInt::from(den));
        let exact = laguerre_exact(k, &x).to_f64().unwrap();
        let got = laguerre_polynomial(k, num as f64 / den as f64).unwrap();
        let rel = (got - exact).abs() / exact.abs().max(1e-300);
        assert!(rel <= 1e-9, "L_{k}({num}/{den}) = {got}, exact {exact}");
    }
}

#[test]
fn shipped_tables_equal_refit() {
    let basis = build_basis(50, 240, 1.0 / 30.0).unwrap();
    for label in [SystemLabel::Null, SystemLabel::Alternate] {
        let (fit, _) = make_system(&basis, label, 1.0, &TargetDesign::default()).unwrap();
        let shipped = SystemSpec::shipped(label, 1.0).unwrap();
        for (a, b) in [
            (&fit.coeffs_order1, &shipped.coeffs_order1),
            (&fit.coeffs_order2, &shipped.coeffs_order2),
            (&fit.coeffs_order3, &shipped.coeffs_order3),
        ] {
            let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-8 * scale, "{label}: {x} vs {y}");
            }
        }
    }
}
