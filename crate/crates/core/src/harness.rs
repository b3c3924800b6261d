//! The detection experiment matrix, the J/J_B study, and plot-data emission.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{fig1_rows, Fig1Row};
use crate::detector::{
    cross_product_matrix, inner_product_response, median, normalize_records, DetectionRecord, StatisticKind,
};
use crate::identify::{inband_gfrf_statistics, least_squares_identify};
use crate::io::{fmt_f64, write_records, Table};
use crate::laguerre::{build_basis, make_system, BumpReading, LaguerreBasis, SystemLabel, SystemSpec, TargetDesign};
use crate::seeds::{derive_seed, tag};
use crate::signals::{self, add_output_noise, protocol_dpss_orders, InputClass, InputSpec};
use crate::slepian::{generate_dpss, DpssParams, DpssSet};
use crate::{Error, Result};

pub const DEFAULT_MASTER_SEED: u64 = 20210923;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub sample_period: f64,
    pub center_hz: f64,
    /// Spacing of the sum-of-sinusoids frequencies and break frequency of the
    /// alternate system.
    pub rayleigh_hz: f64,
    pub energies: Vec<f64>,
    pub ho_scales: Vec<f64>,
    pub w_hz: Vec<f64>,
    pub repetitions: usize,
    pub input_classes: Vec<InputClass>,
    pub system_labels: Vec<SystemLabel>,
    pub null_label: SystemLabel,
    pub noise_variance: f64,
    pub num_basis: usize,
    /// Step of the in-band frequency list for kernel statistics; `1/(n dt)` when absent.
    pub kernel_df_hz: Option<f64>,
    /// When set, the higher-order output is scaled per simulation so that the
    /// noiseless output has this sample standard deviation, and `ho_scales`
    /// is ignored.
    pub output_std_target: Option<f64>,
    pub bump_reading: BumpReading,
    pub fig1_n: Vec<usize>,
    pub fig1_nw: f64,
    pub fig1_m: usize,
    pub fig1_orders: Vec<usize>,
    pub fig1_draws: usize,
    pub fig1_grid: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: DEFAULT_MASTER_SEED,
            n_samples: 240,
            sample_period: 1.0 / 30.0,
            center_hz: 2.0,
            rayleigh_hz: 0.375,
            energies: vec![4e3, 4e4, 4e6],
            ho_scales: vec![2e-6, 4e-6, 6e-6],
            w_hz: vec![0.5, 0.75, 1.0],
            repetitions: 10,
            input_classes: InputClass::ALL.to_vec(),
            system_labels: vec![SystemLabel::Null, SystemLabel::Alternate],
            null_label: SystemLabel::Null,
            noise_variance: 1.0,
            num_basis: 50,
            kernel_df_hz: None,
            output_std_target: None,
            bump_reading: BumpReading::Literal,
            fig1_n: vec![256, 1000],
            fig1_nw: 4.0,
            fig1_m: 6,
            fig1_orders: vec![3, 4, 5, 6],
            fig1_draws: 25,
            fig1_grid: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 * self.sample_period
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 / self.sample_period
    }

    pub fn time_bandwidth(&self, w_hz: f64) -> f64 {
        w_hz * self.duration()
    }

    pub fn kernel_df(&self) -> f64 {
        self.kernel_df_hz.unwrap_or(1.0 / self.duration())
    }

    pub fn hz_to_cycles(&self, f_hz: f64) -> f64 {
        f_hz * self.sample_period
    }

    pub fn cycles_to_hz(&self, f: f64) -> f64 {
        f / self.sample_period
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_samples < 2 {
            return bad("n_samples must be at least 2".into());
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return bad("sample_period must be positive".into());
        }
        if self.repetitions < 2 {
            return bad("at least 2 repetitions are needed for null statistics".into());
        }
        if self.energies.is_empty() || self.energies.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad("energies must be positive".into());
        }
        if self.ho_scales.is_empty() || self.ho_scales.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return bad("ho_scales must be non-negative".into());
        }
        if self.w_hz.is_empty() {
            return bad("w_hz is empty".into());
        }
        for &w in &self.w_hz {
            if !(w > 0.0) || self.center_hz + w >= self.nyquist_hz() {
                return bad(format!("W = {w} Hz around {} Hz is not below Nyquist", self.center_hz));
            }
            if self.input_classes.contains(&InputClass::ModulatedDpss)
                && protocol_dpss_orders(self.time_bandwidth(w)).is_empty()
            {
                return bad(format!("W = {w} Hz admits no odd DPSS order"));
            }
        }
        if !(self.rayleigh_hz > 0.0) {
            return bad("rayleigh_hz must be positive".into());
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return bad("noise_variance must be non-negative".into());
        }
        if self.num_basis == 0 {
            return bad("num_basis must be positive".into());
        }
        if let Some(df) = self.kernel_df_hz {
            if !(df > 0.0) {
                return bad("kernel_df_hz must be positive".into());
            }
        }
        if let Some(s) = self.output_std_target {
            if !(s > 0.0 && s.is_finite()) {
                return bad("output_std_target must be positive".into());
            }
        }
        if self.input_classes.is_empty() || self.system_labels.is_empty() {
            return bad("input_classes and system_labels must be non-empty".into());
        }
        Ok(())
    }

    /// Higher-order scale keys actually swept.
    fn scale_keys(&self) -> Vec<f64> {
        match self.output_std_target {
            Some(t) => vec![t],
            None => self.ho_scales.clone(),
        }
    }
}

/// Mean normalized cross product of one ordered DPSS pair in one simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossProductRecord {
    pub system_label: SystemLabel,
    pub energy: f64,
    pub w_hz: f64,
    pub ho_scale: f64,
    pub repetition: usize,
    pub order_j: usize,
    pub order_jp: usize,
    pub normalized: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<DetectionRecord>,
    pub cross_products: Vec<CrossProductRecord>,
    /// Failed cells and unnormalizable groups.
    pub diagnostics: Vec<String>,
}

impl ExperimentOutput {
    /// Number of simulation cells per (class, label), from the records.
    pub fn cell_counts(&self) -> BTreeMap<(InputClass, SystemLabel), usize> {
        let mut seen: BTreeMap<(InputClass, SystemLabel), std::collections::BTreeSet<u64>> = BTreeMap::new();
        for r in &self.records {
            seen.entry((r.input_class, r.system_label)).or_default().insert(r.seed);
        }
        seen.into_iter().map(|(k, v)| (k, v.len())).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    class: InputClass,
    label: SystemLabel,
    energy: f64,
    scale: f64,
    w_hz: f64,
    repetition: usize,
}

impl Cell {
    fn seed(&self, master: u64) -> u64 {
        derive_seed(
            master,
            &[
                tag(self.class.as_str()),
                tag(&self.label.to_string()),
                self.energy.to_bits(),
                self.scale.to_bits(),
                self.w_hz.to_bits(),
                self.repetition as u64,
            ],
        )
    }

    fn describe(&self) -> String {
        format!(
            "{} {} E={} S={} W={} rep={}",
            self.class, self.label, self.energy, self.scale, self.w_hz, self.repetition
        )
    }
}

#[derive(Default)]
struct CellOutput {
    records: Vec<DetectionRecord>,
    cross: Vec<CrossProductRecord>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    basis: LaguerreBasis,
    /// Systems keyed by label and scale bits; in output-std mode the scale is 1.
    systems: HashMap<(SystemLabel, u64), SystemSpec>,
    dpss: HashMap<u64, DpssSet>,
}

fn uses_shipped_tables(cfg: &ExperimentConfig) -> bool {
    cfg.num_basis == 50
        && cfg.n_samples == 240
        && (cfg.sample_period - 1.0 / 30.0).abs() < 1e-15
        && cfg.bump_reading == BumpReading::Literal
        && (cfg.rayleigh_hz - 0.375).abs() < 1e-15
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let basis = build_basis(cfg.num_basis, cfg.n_samples, cfg.sample_period)?;
        let design = TargetDesign {
            reading: cfg.bump_reading,
            rayleigh_hz: cfg.rayleigh_hz,
            bump_width_hz: cfg.rayleigh_hz,
            ..TargetDesign::default()
        };
        let scales: Vec<f64> = match cfg.output_std_target {
            Some(_) => vec![1.0],
            None => cfg.ho_scales.clone(),
        };
        let mut systems = HashMap::new();
        for &label in &cfg.system_labels {
            let base = if uses_shipped_tables(cfg) {
                SystemSpec::shipped(label, 1.0)?
            } else {
                make_system(&basis, label, 1.0, &design)?.0
            };
            for &s in &scales {
                systems.insert(
                    (label, s.to_bits()),
                    SystemSpec {
                        ho_scale: s,
                        ..base.clone()
                    },
                );
            }
        }
        let mut dpss = HashMap::new();
        if cfg.input_classes.contains(&InputClass::ModulatedDpss) {
            for &w in &cfg.w_hz {
                let nw = cfg.time_bandwidth(w);
                let max_order = *protocol_dpss_orders(nw).last().unwrap_or(&0);
                dpss.insert(
                    w.to_bits(),
                    generate_dpss(&DpssParams::new(cfg.n_samples, nw, max_order + 1)?)?,
                );
            }
        }
        Ok(Context {
            cfg,
            basis,
            systems,
            dpss,
        })
    }

    fn system(&self, cell: &Cell) -> &SystemSpec {
        let key = match self.cfg.output_std_target {
            Some(_) => 1.0f64.to_bits(),
            None => cell.scale.to_bits(),
        };
        &self.systems[&(cell.label, key)]
    }

    fn input_spec(&self, cell: &Cell, seed: u64) -> InputSpec {
        InputSpec {
            class: cell.class,
            n_samples: self.cfg.n_samples,
            sample_period: self.cfg.sample_period,
            target_energy: cell.energy,
            center_hz: self.cfg.center_hz,
            half_bandwidth_hz: cell.w_hz,
            rayleigh_hz: self.cfg.rayleigh_hz,
            dpss_order: None,
            seed,
            enforce_odd_orders: true,
        }
    }

    /// Noiseless output with the higher-order part scaled per the configured mode.
    fn noiseless_output(&self, sys: &SystemSpec, u: &[f64]) -> Result<Vec<f64>> {
        let r = sys.respond(&self.basis, u)?;
        match self.cfg.output_std_target {
            None => Ok(r.total()),
            Some(target) => {
                let ho: Vec<f64> = r.order2.iter().zip(&r.order3).map(|(a, b)| a + b).collect();
                let s = std_matching_scale(&r.order1, &ho, target)?;
                Ok(r.order1.iter().zip(&ho).map(|(a, h)| a + s * h).collect())
            }
        }
    }

    fn record(&self, cell: &Cell, seed: u64, statistic: StatisticKind, raw: f64) -> DetectionRecord {
        DetectionRecord {
            input_class: cell.class,
            statistic,
            dpss_order: None,
            frequency_hz: None,
            raw_response: raw,
            normalized_response: None,
            seed,
            energy: cell.energy,
            w_hz: cell.w_hz,
            ho_scale: cell.scale,
            system_label: cell.label,
            repetition: cell.repetition,
            snri: if self.cfg.noise_variance > 0.0 {
                cell.energy / self.cfg.noise_variance
            } else {
                f64::INFINITY
            },
        }
    }

    fn run_cell(&self, cell: &Cell) -> Result<CellOutput> {
        let seed = cell.seed(self.cfg.seed);
        let input_seed = derive_seed(seed, &[tag("input")]);
        let noise_seed = |order: u64| derive_seed(seed, &[tag("noise"), order]);
        let sys = self.system(cell);
        let spec = self.input_spec(cell, input_seed);
        let mut out = CellOutput::default();
        match cell.class {
            InputClass::GaussianWhite | InputClass::MSequence => {
                let u = signals::generate(&spec)?;
                let y = add_output_noise(&self.noiseless_output(sys, &u)?, noise_seed(0), self.cfg.noise_variance)?;
                let id = least_squares_identify(&u, &y, &self.basis)?;
                let stats =
                    inband_gfrf_statistics(&id, &self.basis, cell.w_hz, self.cfg.center_hz, self.cfg.kernel_df())?;
                for (f, m) in stats {
                    let mut r = self.record(cell, seed, StatisticKind::KernelMagnitude, m);
                    r.frequency_hz = Some(f);
                    out.records.push(r);
                }
            }
            InputClass::Ssr => {
                let u = signals::ssr(&spec)?;
                let y = add_output_noise(&self.noiseless_output(sys, &u)?, noise_seed(0), self.cfg.noise_variance)?;
                let raw = inner_product_response(&y, &u)?;
                out.records
                    .push(self.record(cell, seed, StatisticKind::InnerProduct, raw));
            }
            InputClass::ModulatedDpss => {
                let dpss = &self.dpss[&cell.w_hz.to_bits()];
                let mut responses = BTreeMap::new();
                let mut probes = BTreeMap::new();
                for order in protocol_dpss_orders(dpss.params.time_bandwidth) {
                    let u = signals::modulated_dpss(&spec.clone().with_order(order), dpss)?;
                    let y = add_output_noise(
                        &self.noiseless_output(sys, &u)?,
                        noise_seed(order as u64 + 1),
                        self.cfg.noise_variance,
                    )?;
                    let mut r = self.record(cell, seed, StatisticKind::InnerProduct, inner_product_response(&y, &u)?);
                    r.dpss_order = Some(order);
                    out.records.push(r);
                    responses.insert(order, y);
                    probes.insert(order, u);
                }
                if responses.len() >= 2 {
                    let cp = cross_product_matrix(&responses, &probes)?;
                    for (i, &j) in cp.orders.iter().enumerate() {
                        for (k, &jp) in cp.orders.iter().enumerate() {
                            if i != k {
                                out.cross.push(CrossProductRecord {
                                    system_label: cell.label,
                                    energy: cell.energy,
                                    w_hz: cell.w_hz,
                                    ho_scale: cell.scale,
                                    repetition: cell.repetition,
                                    order_j: j,
                                    order_jp: jp,
                                    normalized: cp.matrix[i][k],
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Positive `s` with `std(a + s h) = target` (sample standard deviation).
pub fn std_matching_scale(a: &[f64], h: &[f64], target: f64) -> Result<f64> {
    let n = a.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (ma, mh) = (mean(a), mean(h));
    let cov = |x: &[f64], mx: f64, y: &[f64], my: f64| {
        x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / (n - 1.0)
    };
    let (vaa, vah, vhh) = (cov(a, ma, a, ma), cov(a, ma, h, mh), cov(h, mh, h, mh));
    let disc = vah * vah - vhh * (vaa - target * target);
    if !(vhh > 0.0) || disc < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "no higher-order scale reaches output standard deviation {target}"
        )));
    }
    let s = (-vah + disc.sqrt()) / vhh;
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "linear output already exceeds standard deviation {target}"
        )));
    }
    Ok(s)
}

fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut v = Vec::new();
    for &class in &cfg.input_classes {
        for &label in &cfg.system_labels {
            for &energy in &cfg.energies {
                for scale in cfg.scale_keys() {
                    for &w_hz in &cfg.w_hz {
                        for repetition in 0..cfg.repetitions {
                            v.push(Cell {
                                class,
                                label,
                                energy,
                                scale,
                                w_hz,
                                repetition,
                            });
                        }
                    }
                }
            }
        }
    }
    v
}

/// Runs every (class, label, energy, scale, W, repetition) cell in parallel,
/// normalizes against the null label and sorts the results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let ctx = Context::new(cfg)?;
    let results: Vec<(Cell, Result<CellOutput>)> = cells(cfg).into_par_iter().map(|c| (c, ctx.run_cell(&c))).collect();
    let mut out = ExperimentOutput::default();
    for (cell, r) in results {
        match r {
            Ok(o) => {
                out.records.extend(o.records);
                out.cross_products.extend(o.cross);
            }
            Err(e) => out.diagnostics.push(format!("{}: {e}", cell.describe())),
        }
    }
    out.diagnostics
        .extend(normalize_records(&mut out.records, cfg.null_label));
    out.records.sort_by_key(|r| r.sort_key());
    out.cross_products.sort_by(|a, b| {
        (a.system_label, a.repetition, a.order_j, a.order_jp)
            .cmp(&(b.system_label, b.repetition, b.order_j, b.order_jp))
            .then(a.energy.total_cmp(&b.energy))
            .then(a.w_hz.total_cmp(&b.w_hz))
            .then(a.ho_scale.total_cmp(&b.ho_scale))
    });
    Ok(out)
}

/// The J/J_B study over every configured length.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Vec<Fig1Row>> {
    let mut rows = Vec::new();
    for &n in &cfg.fig1_n {
        rows.extend(fig1_rows(
            n,
            cfg.fig1_nw,
            cfg.fig1_m,
            &cfg.fig1_orders,
            cfg.fig1_draws,
            derive_seed(cfg.seed, &[tag("fig1")]),
            cfg.fig1_grid,
        )?);
    }
    Ok(rows)
}

pub fn fig1_table(rows: &[Fig1Row]) -> Table {
    let mut t = Table::new(&[
        "n",
        "nw",
        "Q",
        "draw",
        "tuple",
        "max_abs_J",
        "J_B_draw",
        "J_B",
        "closed_form",
        "J_B_sampled",
    ]);
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            fmt_f64(r.nw),
            r.q.to_string(),
            r.draw.to_string(),
            r.tuple.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            fmt_f64(r.max_abs_j),
            fmt_f64(r.j_b_draw),
            fmt_f64(r.j_b),
            fmt_f64(r.closed_form),
            r.j_b_sampled.to_string(),
        ]);
    }
    t
}

/// Median `|z|` per (class, statistic, label, energy, W, scale).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub input_class: InputClass,
    pub statistic: StatisticKind,
    pub system_label: SystemLabel,
    pub energy: f64,
    pub w_hz: f64,
    pub ho_scale: f64,
    pub count: usize,
    pub median_abs_z: f64,
    pub fraction_outside_95: f64,
}

pub fn summarize(records: &[DetectionRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<_, (DetectionRecord, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let Some(z) = r.normalized_response {
            let key = (
                r.input_class,
                r.statistic,
                r.system_label,
                r.energy.to_bits(),
                r.w_hz.to_bits(),
                r.ho_scale.to_bits(),
            );
            groups
                .entry(key)
                .or_insert_with(|| (r.clone(), Vec::new()))
                .1
                .push(z.abs());
        }
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_values()
        .map(|(r, mut z)| {
            let outside = z.iter().filter(|&&v| v > crate::detector::Z_95).count();
            SummaryRow {
                input_class: r.input_class,
                statistic: r.statistic,
                system_label: r.system_label,
                energy: r.energy,
                w_hz: r.w_hz,
                ho_scale: r.ho_scale,
                count: z.len(),
                fraction_outside_95: outside as f64 / z.len() as f64,
                median_abs_z: median(&mut z).unwrap_or(f64::NAN),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.input_class, a.statistic, a.system_label)
            .cmp(&(b.input_class, b.statistic, b.system_label))
            .then(a.energy.total_cmp(&b.energy))
            .then(a.w_hz.total_cmp(&b.w_hz))
            .then(a.ho_scale.total_cmp(&b.ho_scale))
    });
    rows
}

/// Mean normalized cross product per (label, energy, W, scale).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSummaryRow {
    pub system_label: SystemLabel,
    pub energy: f64,
    pub w_hz: f64,
    pub ho_scale: f64,
    pub count: usize,
    pub mean_normalized_cross: f64,
}

pub fn summarize_cross(cross: &[CrossProductRecord]) -> Vec<CrossSummaryRow> {
    let mut groups: BTreeMap<_, (CrossProductRecord, f64, usize)> = BTreeMap::new();
    for c in cross {
        let key = (
            c.system_label,
            c.energy.to_bits(),
            c.w_hz.to_bits(),
            c.ho_scale.to_bits(),
        );
        let e = groups.entry(key).or_insert_with(|| (c.clone(), 0.0, 0));
        e.1 += c.normalized;
        e.2 += 1;
    }
    let mut rows: Vec<CrossSummaryRow> = groups
        .into_values()
        .map(|(c, s, n)| CrossSummaryRow {
            system_label: c.system_label,
            energy: c.energy,
            w_hz: c.w_hz,
            ho_scale: c.ho_scale,
            count: n,
            mean_normalized_cross: s / n as f64,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.system_label
            .cmp(&b.system_label)
            .then(a.energy.total_cmp(&b.energy))
            .then(a.w_hz.total_cmp(&b.w_hz))
            .then(a.ho_scale.total_cmp(&b.ho_scale))
    });
    rows
}

const RECORD_COLUMNS: [&str; 13] = [
    "input_class",
    "statistic",
    "dpss_order",
    "frequency_hz",
    "raw_response",
    "normalized_response",
    "seed",
    "energy",
    "w_hz",
    "ho_scale",
    "system_label",
    "repetition",
    "snri",
];

fn opt(x: Option<impl ToString>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn detection_table(records: &[DetectionRecord], statistic: StatisticKind) -> Table {
    let key = match statistic {
        StatisticKind::KernelMagnitude => "frequency_hz",
        StatisticKind::InnerProduct => "dpss_order",
    };
    let mut t = Table::new(&[
        "input_class",
        "system_label",
        "energy",
        "w_hz",
        "ho_scale",
        "repetition",
        key,
        "raw_response",
        "normalized_response",
    ]);
    for r in records.iter().filter(|r| r.statistic == statistic) {
        t.push(vec![
            r.input_class.to_string(),
            r.system_label.to_string(),
            fmt_f64(r.energy),
            fmt_f64(r.w_hz),
            fmt_f64(r.ho_scale),
            r.repetition.to_string(),
            match statistic {
                StatisticKind::KernelMagnitude => opt(r.frequency_hz.map(fmt_f64)),
                StatisticKind::InnerProduct => opt(r.dpss_order),
            },
            fmt_f64(r.raw_response),
            opt(r.normalized_response.map(fmt_f64)),
        ]);
    }
    t
}

/// Writes the record dump and one CSV per figure analogue into `dir`.
pub fn emit_plot_data(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, f: &dyn Fn(&mut dyn std::io::Write) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
        f(&mut w)?;
        std::io::Write::flush(&mut w)?;
        written.push(path);
        Ok(())
    };
    put("records.csv", &|w| write_records(w, &output.records, &RECORD_COLUMNS))?;
    put("detection-kernel.csv", &|w| {
        detection_table(&output.records, StatisticKind::KernelMagnitude).write_to(w)
    })?;
    put("detection-ip.csv", &|w| {
        detection_table(&output.records, StatisticKind::InnerProduct).write_to(w)
    })?;
    put("cross-products.csv", &|w| {
        write_records(
            w,
            &summarize_cross(&output.cross_products),
            &[
                "system_label",
                "energy",
                "w_hz",
                "ho_scale",
                "count",
                "mean_normalized_cross",
            ],
        )
    })?;
    put("summary.csv", &|w| {
        write_records(
            w,
            &summarize(&output.records),
            &[
                "input_class",
                "statistic",
                "system_label",
                "energy",
                "w_hz",
                "ho_scale",
                "count",
                "median_abs_z",
                "fraction_outside_95",
            ],
        )
    })?;
    put("diagnostics.csv", &|w| {
        let mut t = Table::new(&["message"]);
        for d in &output.diagnostics {
            t.push(vec![d.clone()]);
        }
        t.write_to(w)
    })?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            energies: vec![4e4],
            ho_scales: vec![4e-6],
            w_hz: vec![0.5],
            repetitions: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_roundtrip_and_validation() {
        let cfg = ExperimentConfig::default();
        assert!((cfg.duration() - 8.0).abs() < 1e-12);
        for w in &cfg.w_hz {
            let nw = cfg.time_bandwidth(*w);
            assert!((nw - nw.round()).abs() < 1e-9);
        }
        let f = 2.0;
        assert!((cfg.cycles_to_hz(cfg.hz_to_cycles(f)) - f).abs() <= 1e-12);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let partial = ExperimentConfig::from_toml_str("seed = 5\nrepetitions = 4\n").unwrap();
        assert_eq!(partial.seed, 5);
        assert_eq!(partial.energies, cfg.energies);
        assert!(ExperimentConfig::from_toml_str("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("repetitions = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("w_hz = [14.0]\n").is_err());
    }

    #[test]
    fn cell_counts_and_determinism() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap();
        assert!(a.diagnostics.is_empty(), "{:?}", a.diagnostics);
        for (_, n) in a.cell_counts() {
            assert_eq!(n, 3);
        }
        let per_dpss_cell = protocol_dpss_orders(4.0).len();
        let dpss = a
            .records
            .iter()
            .filter(|r| r.input_class == InputClass::ModulatedDpss)
            .count();
        assert_eq!(dpss, 2 * 3 * per_dpss_cell);
        assert!(a.records.iter().all(|r| r.normalized_response.is_some()));
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn std_matching() {
        let a = [1.0, -1.0, 2.0, 0.0];
        let h = [0.5, 0.1, -0.3, 0.2];
        let s = std_matching_scale(&a, &h, 5.0).unwrap();
        let y: Vec<f64> = a.iter().zip(&h).map(|(p, q)| p + s * q).collect();
        let m = y.iter().sum::<f64>() / 4.0;
        let sd = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((sd - 5.0).abs() < 1e-9);
        assert!(std_matching_scale(&a, &h, 0.1).is_err());
    }

    #[test]
    fn emission_layout() {
        let dir = std::env::temp_dir().join(format!("slepvol-emit-{}", std::process::id()));
        let files = emit_plot_data(&ExperimentOutput::default(), &dir).unwrap();
        assert_eq!(files.len(), 6);
        let text = fs::read_to_string(dir.join("detection-ip.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
        let text = fs::read_to_string(dir.join("records.csv")).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("input_class,"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
