#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use slepvol::bounds::{bound_c, compute_jb, measure_suprema, theorem1_epsilon, BoundReport};
use slepvol::detector::{inner_product_response, normalize_records, DetectionRecord, StatisticKind};
use slepvol::fourier::{bin_frequency, zero_padded_dft};
use slepvol::harness::{emit_plot_data, fig1_table, run_experiment, run_fig1, ExperimentConfig, DEFAULT_MASTER_SEED};
use slepvol::identify::{inband_gfrf_statistics, least_squares_identify};
use slepvol::io::{fmt_f64, series_table, write_records, Table};
use slepvol::laguerre::{build_basis, make_system, BumpReading, SystemLabel, SystemSpec, TargetDesign};
use slepvol::signals::{self, InputClass, InputSpec};
use slepvol::slepian::{eigenvalues_via_quadrature, generate_dpss, DpssParams};

#[derive(Parser)]
#[command(name = "slepvol", version, about = "DPSS excitation of Volterra systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete prolate spheroidal sequences.
    #[command(subcommand)]
    Dpss(DpssCmd),
    /// Laguerre-expanded test systems.
    #[command(subcommand)]
    System(SystemCmd),
    /// Stimulus generation.
    #[command(subcommand)]
    Input(InputCmd),
    /// Drive a system with an input.
    Simulate(SimulateArgs),
    /// Higher-order suppression bounds.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Inner-product detection over a directory of outputs.
    Detect(DetectArgs),
    /// Least-squares kernel identification.
    Identify(IdentifyArgs),
    /// Full experiment matrix.
    #[command(subcommand)]
    Harness(HarnessCmd),
}

#[derive(Subcommand)]
enum DpssCmd {
    Gen(DpssGenArgs),
}

#[derive(Args)]
struct DpssGenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    nw: f64,
    #[arg(long)]
    k: usize,
    /// Also report eigenvalues by quadrature on a grid of this size.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Eigenvalue table; defaults to `<out stem>_eigenvalues.csv`.
    #[arg(long)]
    eigen_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SystemCmd {
    Build(SystemBuildArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Null,
    Alternate,
}

impl From<LabelArg> for SystemLabel {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Null => SystemLabel::Null,
            LabelArg::Alternate => SystemLabel::Alternate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadingArg {
    Literal,
    Decaying,
}

#[derive(Args)]
struct SystemBuildArgs {
    #[arg(long, value_enum)]
    label: LabelArg,
    #[arg(long)]
    ho_scale: f64,
    #[arg(long)]
    out: PathBuf,
    /// Fit the coefficients instead of using the shipped tables.
    #[arg(long)]
    refit: bool,
    #[arg(long, value_enum, default_value = "literal")]
    reading: ReadingArg,
    #[arg(long, default_value_t = 50)]
    num_basis: usize,
    #[arg(long, default_value_t = 240)]
    n: usize,
    #[arg(long, default_value_t = 1.0 / 30.0)]
    dt: f64,
}

#[derive(Subcommand)]
enum InputCmd {
    Gen(InputGenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    GaussianWhite,
    MSequence,
    Ssr,
    ModulatedDpss,
}

impl From<ClassArg> for InputClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::GaussianWhite => InputClass::GaussianWhite,
            ClassArg::MSequence => InputClass::MSequence,
            ClassArg::Ssr => InputClass::Ssr,
            ClassArg::ModulatedDpss => InputClass::ModulatedDpss,
        }
    }
}

#[derive(Args)]
struct InputGenArgs {
    #[arg(long, value_enum)]
    class: ClassArg,
    #[arg(long)]
    energy: f64,
    #[arg(long)]
    w_hz: f64,
    #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    /// DPSS order for modulated-DPSS inputs.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 240)]
    n: usize,
    #[arg(long, default_value_t = 1.0 / 30.0)]
    dt: f64,
    #[arg(long, default_value_t = 2.0)]
    center_hz: f64,
    #[arg(long, default_value_t = 0.375)]
    rayleigh_hz: f64,
    /// Permit even DPSS orders and orders above 2NW-1.
    #[arg(long)]
    allow_any_order: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Add per-order columns and write `<out stem>_spectra.csv`.
    #[arg(long)]
    per_order: bool,
    /// Overrides the higher-order scale stored in the system file.
    #[arg(long)]
    ho_scale: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    noise_variance: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Used when the input file carries no `sample_period`.
    #[arg(long, default_value_t = 1.0 / 30.0)]
    dt: f64,
}

#[derive(Subcommand)]
enum BoundsCmd {
    Fig1(Fig1Args),
    Report(ReportArgs),
}

#[derive(Args)]
struct Fig1Args {
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [256usize, 1000])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 4.0)]
    nw: f64,
    #[arg(long, default_value_t = 6)]
    m: usize,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [3usize, 4, 5, 6])]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    draws: usize,
    #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    system: PathBuf,
    /// DPSS length; defaults to the system's sample count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 4.0)]
    nw: f64,
    /// Number of DPSS inputs M.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    grid: Option<usize>,
    /// Output frequency (cycles/sample) for the in-band term.
    #[arg(long, default_value_t = 0.0)]
    freq: f64,
    #[arg(long, default_value_t = 240)]
    basis_n: usize,
    #[arg(long, default_value_t = 1.0 / 30.0)]
    dt: f64,
    /// Exponential-system constants; all three enable the epsilon column.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    outputs: PathBuf,
    #[arg(long)]
    probes: PathBuf,
    #[arg(long, default_value = "null")]
    null_label: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    num_basis: usize,
    #[arg(long, default_value_t = 1.0 / 30.0)]
    dt: f64,
    /// Write in-band |Gamma_1| samples for this half-bandwidth to `<out stem>_inband.csv`.
    #[arg(long)]
    w_hz: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    center_hz: f64,
    /// Frequency step; defaults to the record's bin spacing.
    #[arg(long)]
    df_hz: Option<f64>,
}

#[derive(Subcommand)]
enum HarnessCmd {
    Run(HarnessRunArgs),
}

#[derive(Args)]
struct HarnessRunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also run the J/J_B study.
    #[arg(long)]
    fig1: bool,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn dpss_gen(a: DpssGenArgs) -> Result<()> {
    let set = generate_dpss(&DpssParams::new(a.n, a.nw, a.k)?)?;
    let mut seq = Table::new(&["k", "t", "v"]).with_meta("n", a.n).with_meta("nw", a.nw);
    for (k, v) in set.sequences.iter().enumerate() {
        for (t, x) in v.iter().enumerate() {
            seq.push(vec![k.to_string(), t.to_string(), fmt_f64(*x)]);
        }
    }
    seq.write_file(&a.out)?;
    let quad = a.grid.map(|g| eigenvalues_via_quadrature(&set, g)).transpose()?;
    let mut header = vec!["k", "lambda"];
    if quad.is_some() {
        header.push("lambda_quadrature");
    }
    let mut eig = Table::new(&header).with_meta("n", a.n).with_meta("nw", a.nw);
    for (k, l) in set.eigenvalues.iter().enumerate() {
        let mut row = vec![k.to_string(), fmt_f64(*l)];
        if let Some(q) = &quad {
            row.push(fmt_f64(q[k]));
        }
        eig.push(row);
    }
    eig.write_file(&a.eigen_out.unwrap_or_else(|| sibling(&a.out, "eigenvalues")))?;
    Ok(())
}

fn system_build(a: SystemBuildArgs) -> Result<()> {
    let label = SystemLabel::from(a.label);
    let spec = if a.refit {
        let basis = build_basis(a.num_basis, a.n, a.dt)?;
        let design = TargetDesign {
            reading: match a.reading {
                ReadingArg::Literal => BumpReading::Literal,
                ReadingArg::Decaying => BumpReading::Decaying,
            },
            ..TargetDesign::default()
        };
        make_system(&basis, label, a.ho_scale, &design)?.0
    } else {
        SystemSpec::shipped(label, a.ho_scale)?
    };
    let text = spec.to_csv();
    let meta = format!(
        "# label={label}\n# ho_scale={}\n# n_samples={}\n# sample_period={}\n",
        fmt_f64(a.ho_scale),
        a.n,
        fmt_f64(a.dt)
    );
    fs::write(&a.out, format!("{meta}{text}"))?;
    Ok(())
}

fn input_gen(a: InputGenArgs) -> Result<()> {
    let spec = InputSpec {
        class: a.class.into(),
        n_samples: a.n,
        sample_period: a.dt,
        target_energy: a.energy,
        center_hz: a.center_hz,
        half_bandwidth_hz: a.w_hz,
        rayleigh_hz: a.rayleigh_hz,
        dpss_order: a.order,
        seed: a.seed,
        enforce_odd_orders: !a.allow_any_order,
    };
    let u = signals::generate(&spec)?;
    let mut t = series_table("u", &u)
        .with_meta("class", spec.class)
        .with_meta("energy", fmt_f64(a.energy))
        .with_meta("w_hz", fmt_f64(a.w_hz))
        .with_meta("seed", a.seed)
        .with_meta("sample_period", fmt_f64(a.dt))
        .with_meta("center_hz", fmt_f64(a.center_hz));
    if let Some(k) = a.order {
        t = t.with_meta("dpss_order", k);
    }
    t.write_file(&a.out)?;
    Ok(())
}

fn load_system(path: &Path, ho_override: Option<f64>) -> Result<(SystemSpec, BTreeMap<String, String>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let meta = slepvol::io::parse_metadata(&text);
    let label: SystemLabel = meta
        .get("label")
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(SystemLabel::Null);
    let ho = match ho_override {
        Some(s) => s,
        None => meta
            .get("ho_scale")
            .map(|s| s.parse::<f64>())
            .transpose()?
            .unwrap_or(1.0),
    };
    Ok((SystemSpec::from_csv(&text, label, ho)?, meta))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (sys, _) = load_system(&a.system, a.ho_scale)?;
    let input = Table::read_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let u = input.column_f64("u")?;
    let dt = input.meta_parsed::<f64>("sample_period")?.unwrap_or(a.dt);
    let basis = build_basis(sys.num_functions(), u.len(), dt)?;
    let r = sys.respond(&basis, &u)?;
    let y = signals::add_output_noise(&r.total(), a.noise_seed, a.noise_variance)?;
    let header: Vec<&str> = if a.per_order {
        vec!["t", "y", "y1", "y2", "y3"]
    } else {
        vec!["t", "y"]
    };
    let mut t = Table::new(&header);
    t.metadata = input.metadata.clone();
    t.metadata.remove("schema_version");
    t = t
        .with_meta("system_label", sys.label)
        .with_meta("ho_scale", fmt_f64(sys.ho_scale))
        .with_meta("noise_variance", fmt_f64(a.noise_variance))
        .with_meta("noise_seed", a.noise_seed)
        .with_meta(
            "input_file",
            a.input.file_name().and_then(|s| s.to_str()).unwrap_or_default(),
        );
    for i in 0..y.len() {
        let mut row = vec![i.to_string(), fmt_f64(y[i])];
        if a.per_order {
            row.extend([fmt_f64(r.order1[i]), fmt_f64(r.order2[i]), fmt_f64(r.order3[i])]);
        }
        t.push(row);
    }
    t.write_file(&a.out)?;
    if a.per_order {
        let g = (2 * y.len()).next_power_of_two();
        let spectra: Vec<Vec<Complex64>> = [&y, &r.order1, &r.order2, &r.order3]
            .iter()
            .map(|s| zero_padded_dft(s, g))
            .collect();
        let mut st = Table::new(&["f_cycles", "f_hz", "Y_abs", "T1_abs", "T2_abs", "T3_abs"]).with_meta("grid_size", g);
        for k in 0..g {
            let f = bin_frequency(k, g);
            if f < 0.0 {
                continue;
            }
            let mut row = vec![fmt_f64(f), fmt_f64(f / dt)];
            row.extend(spectra.iter().map(|s| fmt_f64(s[k].norm())));
            st.push(row);
        }
        st.write_file(&sibling(&a.out, "spectra"))?;
    }
    Ok(())
}

fn bounds_fig1(a: Fig1Args) -> Result<()> {
    let cfg = ExperimentConfig {
        seed: a.seed,
        fig1_n: a.n,
        fig1_nw: a.nw,
        fig1_m: a.m,
        fig1_orders: a.orders,
        fig1_draws: a.draws,
        fig1_grid: a.grid,
        ..ExperimentConfig::default()
    };
    fig1_table(&run_fig1(&cfg)?).write_file(&a.out)?;
    Ok(())
}

fn bounds_report(a: ReportArgs) -> Result<()> {
    let (sys, meta) = load_system(&a.system, None)?;
    let basis_n = meta
        .get("n_samples")
        .map(|s| s.parse::<usize>())
        .transpose()?
        .unwrap_or(a.basis_n);
    let basis = build_basis(sys.num_functions(), basis_n, a.dt)?;
    let volterra = sys.to_volterra(&basis)?;
    let n = a.n.unwrap_or(basis_n);
    let dpss = generate_dpss(&DpssParams::new(n, a.nw, a.m.max(1))?)?;
    let g = a.grid.unwrap_or_else(|| dpss.params.default_grid_size());
    let sup = measure_suprema(&volterra, 0, &dpss, a.m, g)?;
    let w = dpss.half_bandwidth();
    let eps = match (a.alpha, a.beta, a.gamma) {
        (Some(al), Some(be), Some(ga)) => Some(theorem1_epsilon(al, be, ga, a.m, w, sup.lambda_min, sup.v_m_star)),
        (None, None, None) => None,
        _ => bail!("--alpha, --beta and --gamma must be given together"),
    };
    let mut reports: Vec<BoundReport> = Vec::new();
    for q in 2..=sup.orders() {
        let jb = compute_jb(&dpss, q, a.m, g, a.seed)?;
        let mut r = bound_c(q, a.m, w, &sup, jb.value, a.freq)?;
        r.epsilon = eps;
        reports.push(r);
    }
    match a.format {
        FormatArg::Csv => {
            let mut buf = Vec::new();
            write_records(
                &mut buf,
                &reports,
                &[
                    "order",
                    "frequency",
                    "bound_a",
                    "bound_b",
                    "in_band_term",
                    "bound_c",
                    "j_b",
                    "j_b_closed_form",
                    "delta_prime",
                    "epsilon",
                ],
            )?;
            fs::write(&a.out, buf)?;
        }
        FormatArg::Jsonl => {
            let mut s = serde_json::to_string(&serde_json::json!({ "suprema": &sup }))?;
            s.push('\n');
            for r in &reports {
                s.push_str(&serde_json::to_string(r)?);
                s.push('\n');
            }
            fs::write(&a.out, s)?;
        }
    }
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    Ok(v)
}

fn detect(a: DetectArgs) -> Result<()> {
    let null_label: SystemLabel = a.null_label.parse()?;
    let mut records = Vec::new();
    let mut reps: BTreeMap<String, usize> = BTreeMap::new();
    for path in csv_files(&a.outputs)? {
        let out = Table::read_file(&path)?;
        if out.column_index("y").is_err() {
            eprintln!("skipping {}: no `y` column", path.display());
            continue;
        }
        let y = out.column_f64("y")?;
        let probe_name = out
            .meta("input_file")
            .map(str::to_string)
            .or_else(|| path.file_name().and_then(|s| s.to_str()).map(str::to_string))
            .unwrap_or_default();
        let probe_path = a.probes.join(&probe_name);
        let probe = Table::read_file(&probe_path)
            .with_context(|| format!("probe {} for {}", probe_path.display(), path.display()))?;
        let u = probe.column_f64("u")?;
        let meta = |k: &str| out.meta(k).or_else(|| probe.meta(k));
        let num = |k: &str| -> Result<f64> { Ok(meta(k).map(str::parse::<f64>).transpose()?.unwrap_or(f64::NAN)) };
        let label: SystemLabel = meta("system_label")
            .context(format!("{} has no system_label", path.display()))?
            .parse()?;
        let class: InputClass = meta("class").unwrap_or("modulated_dpss").parse()?;
        let dpss_order = meta("dpss_order").map(str::parse::<usize>).transpose()?;
        let energy = num("energy")?;
        let noise = num("noise_variance")?;
        let key = format!(
            "{label}|{class}|{dpss_order:?}|{energy}|{}|{}",
            num("w_hz")?,
            num("ho_scale")?
        );
        let rep = reps.entry(key).or_insert(0);
        records.push(DetectionRecord {
            input_class: class,
            statistic: StatisticKind::InnerProduct,
            dpss_order,
            frequency_hz: None,
            raw_response: inner_product_response(&y, &u)?,
            normalized_response: None,
            seed: meta("seed").map(str::parse::<u64>).transpose()?.unwrap_or(0),
            energy,
            w_hz: num("w_hz")?,
            ho_scale: num("ho_scale")?,
            system_label: label,
            repetition: *rep,
            snri: energy / noise,
        });
        *rep += 1;
    }
    for p in normalize_records(&mut records, null_label) {
        eprintln!("warning: {p}");
    }
    records.sort_by_key(|r| r.sort_key());
    let mut buf = Vec::new();
    write_records(
        &mut buf,
        &records,
        &[
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
        ],
    )?;
    fs::write(&a.out, buf)?;
    Ok(())
}

fn identify(a: IdentifyArgs) -> Result<()> {
    let input = Table::read_file(&a.input)?;
    let output = Table::read_file(&a.output)?;
    let u = input.column_f64("u")?;
    let y = output.column_f64("y")?;
    let dt = input.meta_parsed::<f64>("sample_period")?.unwrap_or(a.dt);
    let basis = build_basis(a.num_basis, u.len(), dt)?;
    let r = least_squares_identify(&u, &y, &basis)?;
    let mut t = Table::new(&["k", "c1", "c2", "c3"])
        .with_meta("residual_norm", fmt_f64(r.residual_norm))
        .with_meta("condition_number", fmt_f64(r.condition_number))
        .with_meta("rank", r.rank)
        .with_meta("rank_deficient", r.rank_deficient);
    for k in 0..basis.num_functions {
        t.push(vec![
            (k + 1).to_string(),
            fmt_f64(r.coeffs_order1[k]),
            fmt_f64(r.coeffs_order2[k]),
            fmt_f64(r.coeffs_order3[k]),
        ]);
    }
    t.write_file(&a.out)?;
    if let Some(w) = a.w_hz {
        let df = a.df_hz.unwrap_or(1.0 / (u.len() as f64 * dt));
        let mut s = Table::new(&["f_hz", "gamma1_abs"]).with_meta("df_hz", fmt_f64(df));
        for (f, m) in inband_gfrf_statistics(&r, &basis, w, a.center_hz, df)? {
            s.push(vec![fmt_f64(f), fmt_f64(m)]);
        }
        s.write_file(&sibling(&a.out, "inband"))?;
    }
    Ok(())
}

fn harness_run(a: HarnessRunArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => ExperimentConfig::from_toml_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => ExperimentConfig::default(),
    };
    let out = run_experiment(&cfg)?;
    for d in &out.diagnostics {
        eprintln!("warning: {d}");
    }
    emit_plot_data(&out, &a.out)?;
    fs::write(a.out.join("config.toml"), cfg.to_toml_string()?)?;
    if a.fig1 {
        fig1_table(&run_fig1(&cfg)?).write_file(&a.out.join("fig1.csv"))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Dpss(DpssCmd::Gen(a)) => dpss_gen(a),
        Command::System(SystemCmd::Build(a)) => system_build(a),
        Command::Input(InputCmd::Gen(a)) => input_gen(a),
        Command::Simulate(a) => simulate(a),
        Command::Bounds(BoundsCmd::Fig1(a)) => bounds_fig1(a),
        Command::Bounds(BoundsCmd::Report(a)) => bounds_report(a),
        Command::Detect(a) => detect(a),
        Command::Identify(a) => identify(a),
        Command::Harness(HarnessCmd::Run(a)) => harness_run(a),
    }
}
