//! One PASS/FAIL line per acceptance criterion. Red criteria are reported,
//! not asserted; the process fails only if a computation errors.
#![allow(clippy::needless_range_loop)]

mod common;

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use common::*;
use slepvol::bounds::{compute_j, inner_product_bound, measure_suprema, theorem1_epsilon};
use slepvol::detector::{median, DetectionRecord, StatisticKind};
use slepvol::fourier::zero_padded_dft;
use slepvol::harness::{run_experiment, run_fig1, summarize_cross, ExperimentConfig};
use slepvol::identify::{inband_gfrf_statistics, least_squares_identify};
use slepvol::laguerre::{build_basis, SystemLabel, SystemSpec};
use slepvol::signals::{add_output_noise, gaussian_white, InputClass, InputSpec};
use slepvol::slepian::{generate_dpss, DpssParams};
use slepvol::volterra::{evaluate_per_order, evaluate_time_domain, gfrf_at, response_spectrum, MultiChannelSignal};

type Res<T> = Result<T, Box<dyn std::error::Error>>;
type Step = fn(&mut Report) -> Res<()>;

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn criterion1(rep: &mut Report) -> Res<()> {
    let start = Instant::now();
    let set = generate_dpss(&DpssParams::new(200, 5.0, 6)?)?;
    let secs = start.elapsed().as_secs_f64();
    let gap = 1.0 - set.eigenvalues[5];
    let pass = (3.5e-5..=1.4e-4).contains(&gap) && secs < 1.0;
    rep.line(
        "1",
        pass,
        format!("1 - lambda_5 = {gap:.4e} (want [3.5e-5, 1.4e-4]), {secs:.3} s (< 1 s)"),
    );
    Ok(())
}

fn criterion2(rep: &mut Report) -> Res<()> {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let rows = run_fig1(&cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let bad = rows
        .iter()
        .filter(|r| !(r.max_abs_j <= r.j_b_draw && r.j_b_draw <= r.j_b && r.j_b <= r.closed_form))
        .count();
    let sampled = rows.iter().filter(|r| r.j_b_sampled).count();
    let n = rows.len();
    let pass = bad == 0 && n == 2 * 4 * 25 && secs < 300.0;
    rep.line(
        "2",
        pass,
        format!(
            "{n} draws, {bad} violate max|J| <= J_B <= (2W)^((Q-2)/2); {sampled} rows use sampled J_B; {secs:.1} s (< 300 s)"
        ),
    );
    Ok(())
}

fn criterion3(rep: &mut Report) -> Res<()> {
    // (a) separable vs nested sums
    let mut rng = seeded(0x3a);
    let mut worst_a = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..=16);
        let inputs = rng.random_range(1..=2);
        let sys = random_system(&mut rng, inputs, 3, 2, 6, &[1.0, 1.0, 1.0]);
        let u: Vec<Vec<f64>> = (0..inputs)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let fast = evaluate_time_domain(&sys, &MultiChannelSignal::new(u.clone(), 1.0)?)?;
        let slow = naive_volterra(&sys, &u);
        let scale = slow[0].iter().map(|v| v.abs()).fold(1e-300, f64::max);
        for (a, b) in fast.values[0].iter().zip(&slow[0]) {
            worst_a = worst_a.max((a - b).abs() / scale);
        }
    }
    rep.line(
        "3a",
        worst_a <= 1e-10,
        format!("separable vs nested-sum max rel err {worst_a:.2e} (<= 1e-10)"),
    );

    // (b) convolution J vs tensor quadrature
    let mut worst_b = 0.0f64;
    for (n, nw) in [(16usize, 2.0), (32, 2.0), (32, 3.0)] {
        let k = (2.0 * nw) as usize;
        let set = generate_dpss(&DpssParams::new(n, nw, k)?)?;
        let g = 8 * n;
        let w = nw / n as f64;
        for q in [2usize, 3] {
            for _ in 0..4 {
                let m_q: Vec<usize> = (0..q).map(|_| rng.random_range(0..k)).collect();
                let scale = (0..=10)
                    .map(|i| tensor_j(&set, &m_q, -w + 0.2 * w * i as f64, g).norm())
                    .fold(0.0, f64::max);
                for f in [0.0, 0.4 * w, -0.9 * w, 0.05] {
                    let a = compute_j(&set, q, f, &m_q, g)?;
                    worst_b = worst_b.max((a - tensor_j(&set, &m_q, f, g)).norm() / scale);
                }
            }
        }
    }
    rep.line(
        "3b",
        worst_b <= 1e-6,
        format!("convolution J vs tensor quadrature max rel err {worst_b:.2e} (<= 1e-6)"),
    );

    // (c) per-order spectra vs output DFT
    let mut worst_c = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(8..=40);
        let sys = random_system(&mut rng, 2, 3, 2, 8, &[1.0, 0.5, 0.25]);
        let u: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let spec = response_spectrum(&sys, &MultiChannelSignal::new(u.clone(), 1.0)?, 64)?;
        let direct = naive_dft(&naive_volterra(&sys, &u)[0], 64);
        let direct = slepvol::fourier::SpectrumGrid::from_fft_order(&direct);
        let scale = max_abs(&direct.values);
        for i in 0..64 {
            let sum: Complex64 = spec.per_order[0].iter().map(|s| s.values[i]).sum();
            worst_c = worst_c.max((sum - direct.values[i]).norm() / scale);
        }
    }
    rep.line(
        "3c",
        worst_c <= 1e-10,
        format!("per-order spectra vs output DFT max rel err {worst_c:.2e} (<= 1e-10)"),
    );

    // (d) tridiagonal vs dense eigensolve
    let mut worst_d = 0.0f64;
    for n in [8usize, 16, 24, 32] {
        for nw in [1.0, 2.0, 3.0] {
            let k = (2.0 * nw) as usize;
            let set = generate_dpss(&DpssParams::new(n, nw, k)?)?;
            let (_, vecs) = dense_dpss(n, nw / n as f64, k);
            for j in 0..k {
                worst_d = worst_d.max(max_dev_up_to_sign(&set.sequences[j], &vecs[j]));
            }
        }
    }
    rep.line(
        "3d",
        worst_d <= 1e-8,
        format!("tridiagonal vs dense DPSS max abs dev {worst_d:.2e} (<= 1e-8)"),
    );
    Ok(())
}

/// Random systems driven by `M = 2` DPSS inputs; epsilon is the grid maximum
/// of the order-three spectrum, so each system is epsilon-quadratic by construction.
fn criterion4(rep: &mut Report) -> Res<()> {
    let n = 64;
    let set = generate_dpss(&DpssParams::new(n, 2.0, 2)?)?;
    let w = set.half_bandwidth();
    let g = 1024;
    let mut rng = seeded(0x44);
    let (mut ok, mut total, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..50 {
        let sys = random_system(&mut rng, 2, 3, 2, 12, &[1.0, 0.1, 0.01]);
        let u = MultiChannelSignal::new(set.sequences.clone(), 1.0)?.zero_extended(n + 3 * 12);
        let dec = evaluate_per_order(&sys, &u)?;
        let y = dec.total().values.remove(0);
        let eps = max_abs(&zero_padded_dft(&dec.orders[2][0], g));
        let sup = measure_suprema(&sys, 0, &set, 2, g)?;
        for mp in 0..2 {
            let ip: f64 = y.iter().zip(&set.sequences[mp]).map(|(a, b)| a * b).sum();
            let g1 = gfrf_at(&sys, 0, &[mp], &[0.0])?;
            let dev = (Complex64::new(ip, 0.0) - g1 * set.eigenvalues[mp]).norm();
            let bound = inner_product_bound(2, w, &set.eigenvalues, &sup, eps, mp)?;
            total += 1;
            if dev <= bound {
                ok += 1;
            }
            worst = worst.max(dev / bound);
        }
    }
    rep.line(
        "4",
        ok == total,
        format!("{ok}/{total} (system, probe) pairs within the inner-product bound; max deviation/bound {worst:.3}"),
    );
    Ok(())
}

fn pooled_median(records: &[&DetectionRecord]) -> f64 {
    let mut z: Vec<f64> = records
        .iter()
        .filter_map(|r| r.normalized_response.map(f64::abs))
        .collect();
    median(&mut z).unwrap_or(f64::NAN)
}

fn criteria5_6(rep: &mut Report) -> Res<()> {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let out = run_experiment(&cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let alt: Vec<&DetectionRecord> = out
        .records
        .iter()
        .filter(|r| r.system_label == SystemLabel::Alternate)
        .collect();
    let pick = |f: &dyn Fn(&DetectionRecord) -> bool| -> Vec<&DetectionRecord> {
        alt.iter().copied().filter(|r| f(r)).collect()
    };
    let dpss = |e: f64| {
        pick(&|r| {
            r.input_class == InputClass::ModulatedDpss && r.statistic == StatisticKind::InnerProduct && r.energy == e
        })
    };
    let white =
        |e: f64| pick(&|r| r.input_class.is_white() && r.statistic == StatisticKind::KernelMagnitude && r.energy == e);

    let (a3, a4) = (pooled_median(&dpss(4e3)), pooled_median(&dpss(4e4)));
    rep.line(
        "5a",
        a3 > 1.96 && a4 > 1.96,
        format!("modulated-DPSS inner-product median |z| = {a3:.2} at 4e3, {a4:.2} at 4e4 (> 1.96)"),
    );
    let (b4, b6) = (pooled_median(&white(4e4)), pooled_median(&white(4e6)));
    rep.line(
        "5b",
        b4 < 1.96 && b6 > 1.96,
        format!("white-input kernel median |z| = {b4:.2} at 4e4 (< 1.96), {b6:.2} at 4e6 (> 1.96)"),
    );
    let c_dpss = pooled_median(&pick(&|r| r.input_class == InputClass::ModulatedDpss && r.w_hz == 1.0));
    let c_ssr = pooled_median(&pick(&|r| r.input_class == InputClass::Ssr && r.w_hz == 1.0));
    rep.line(
        "5c",
        c_dpss >= c_ssr && secs < 900.0,
        format!(
            "W = 1 Hz median |z|: DPSS {c_dpss:.2} vs SSR {c_ssr:.2} (DPSS >= SSR); experiment {secs:.1} s (< 900 s)"
        ),
    );
    if !out.diagnostics.is_empty() {
        println!("note: {} harness diagnostics", out.diagnostics.len());
    }

    let cross = summarize_cross(&out.cross_products);
    let mut means: Vec<(f64, f64)> = cross
        .iter()
        .filter(|c| c.system_label == SystemLabel::Alternate && c.energy == 4e4 && c.ho_scale == 4e-6)
        .map(|c| (c.w_hz, c.mean_normalized_cross))
        .collect();
    means.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = means.len() == 3 && means.windows(2).all(|p| p[1].1 < p[0].1);
    let listing: Vec<String> = means.iter().map(|(w, m)| format!("W={w}: {m:.4}")).collect();
    rep.line(
        "6",
        monotone,
        format!(
            "mean normalized cross-product at E=4e4, S=4e-6: {} (strictly decreasing)",
            listing.join(", ")
        ),
    );
    Ok(())
}

fn criterion7(rep: &mut Report) -> Res<()> {
    let zero = theorem1_epsilon(0.0, 0.0, 0.0, 2, 0.025, 0.9999, 1.0);
    let (a, m, w, lam, v) = (0.1, 2usize, 0.025, 0.9999, 1.0);
    let got = theorem1_epsilon(a, a, a, m, w, lam, v);
    let mf = m as f64;
    let want = v * series_tail(a * mf * (1.0 - lam).sqrt())
        + w.powi(-2) * std::f64::consts::FRAC_1_SQRT_2 * series_tail(std::f64::consts::SQRT_2 * a * mf * w.powf(1.5))
        + series_tail((2.0 * w).sqrt() * a * mf) / (2.0 * w);
    let rel = (got - want).abs() / want.abs();
    rep.line(
        "7",
        zero == 0.0 && rel <= 1e-10,
        format!("epsilon(0,0,0) = {zero}; series-tail oracle rel err {rel:.2e} (<= 1e-10)"),
    );
    Ok(())
}

/// Not a criterion: in-band error of the identified linear response at 4e6.
fn identification_note() -> Res<()> {
    let basis = build_basis(50, 240, 1.0 / 30.0)?;
    let sys = SystemSpec::shipped(SystemLabel::Null, 0.0)?;
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let u = gaussian_white(&InputSpec::new(InputClass::GaussianWhite, 4e6, 1.0, seed))?;
        let y = add_output_noise(&sys.respond(&basis, &u)?.total(), seed + 100, 1.0)?;
        let id = least_squares_identify(&u, &y, &basis)?;
        for (_, g) in inband_gfrf_statistics(&id, &basis, 1.0, 2.0, 0.125)? {
            worst = worst.max((g - 0.75).abs() / 0.75);
        }
    }
    println!(
        "INFO identification at E=4e6, noise variance 1: worst in-band |Gamma_1| error {:.1}% over 5 seeds",
        100.0 * worst
    );
    Ok(())
}

fn main() {
    let mut rep = Report { failed: Vec::new() };
    let steps: [(&str, Step); 6] = [
        ("1", criterion1),
        ("2", criterion2),
        ("3", criterion3),
        ("4", criterion4),
        ("5-6", criteria5_6),
        ("7", criterion7),
    ];
    let mut errored = false;
    for (id, f) in steps {
        if let Err(e) = f(&mut rep) {
            println!("FAIL criterion {id}: error {e}");
            errored = true;
        }
    }
    if let Err(e) = identification_note() {
        println!("INFO identification note failed: {e}");
    }
    println!(
        "acceptance summary: {} red criteria{}",
        rep.failed.len(),
        if rep.failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", rep.failed.join(", "))
        }
    );
    if errored {
        std::process::exit(1);
    }
}
