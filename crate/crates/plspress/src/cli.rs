//! Command-line front end: dataset I/O, experiment drivers and
//! machine-readable CSV/JSON output for external plotting.
//!
//! Numeric CSV output uses 17 significant digits so every `f64` round-trips
//! bit-exactly. Each run writes its resolved configuration (including the
//! seed) as a `#`-prefixed JSON header line, so results can be reproduced
//! from the artifact alone.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, ArrayView2};
use serde::Serialize;
use serde_json::json;

use crate::modelselect::{
    select_gamma, select_r, sensitivity_experiment, ExperimentConfig, ExperimentKind,
    ScoreMethod, SelectionResult,
};
use crate::numkernel::Matrix;
use crate::pls::{fit_pls, DataBlock};
use crate::press::{loocv_pls_full, press_pls, PressResult};
use crate::simgen::{simulate, SimConfig};
use crate::{Error, Result};

/// Two-block PLS regression with an analytic PRESS statistic.
#[derive(Debug, Parser)]
#[command(name = "plspress", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (X.csv, Y.csv, truth.json).
    Simulate(SimulateArgs),
    /// Fit the latent-factor model and report its summary.
    Fit(FitArgs),
    /// Analytic PRESS from a single fit.
    Press(PressArgs),
    /// Brute-force leave-one-out cross-validation.
    Loocv(PressArgs),
    /// Grid-search the factor count R.
    SelectR(SelectRArgs),
    /// Grid-search the sparsity penalty.
    SelectGamma(SelectGammaArgs),
    /// Monte Carlo sensitivity of PRESS against LOOCV (CSV row per run).
    BenchSensitivity(BenchSensitivityArgs),
    /// Wall-time comparison of PRESS and LOOCV over a list of sample sizes.
    BenchTiming(BenchTimingArgs),
    /// PRESS-vs-LOOCV approximation gap over a list of sample sizes.
    BenchError(BenchErrorArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Press,
    Loocv,
}

impl From<MethodArg> for ScoreMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Press => ScoreMethod::Press,
            MethodArg::Loocv => ScoreMethod::LoocvFull,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub q: usize,
    /// True number of latent factors.
    #[arg(long, short = 'r')]
    pub r: usize,
    /// Sparse mode: keep round(p/j) nonzero loading rows.
    #[arg(long)]
    pub sparsity_j: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    /// Latent pair correlation in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub latent_corr: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output directory for X.csv, Y.csv, truth.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, short = 'r')]
    pub r: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PressArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, short = 'r')]
    pub r: usize,
    /// Include the full n×q leave-one-out residual matrix in the report.
    #[arg(long, default_value_t = false)]
    pub residuals: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SelectRArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub r_max: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Press)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SelectGammaArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Press)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct BenchSensitivityArgs {
    /// What to select per trial: the factor count or the penalty.
    #[arg(long, value_enum)]
    pub mode: SensitivityMode,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub r_max: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// CSV emits the aggregate row; JSON includes per-trial details.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SensitivityMode {
    R,
    Gamma,
}

#[derive(Debug, Args)]
pub struct BenchTimingArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long, short = 'r', default_value_t = 3)]
    pub r: usize,
    /// Timed repeats per point; one extra warm-up run is discarded.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Timing runs single-threaded unless overridden.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct BenchErrorArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long, short = 'r', default_value_t = 3)]
    pub r: usize,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

/// Formats a float with 17 significant digits (round-trippable).
pub fn fmt_full(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes a headerless numeric CSV, one observation per row.
pub fn write_matrix_csv(path: &Path, m: &ArrayView2<'_, f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_full(*v));
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a headerless numeric CSV; parse failures name the 1-based row and
/// column.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (j, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Csv {
                path: display.clone(),
                row: i + 1,
                col: j + 1,
                msg: format!("cannot parse {:?} as a number", field.trim()),
            })?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Csv {
                    path: display,
                    row: i + 1,
                    col: row.len(),
                    msg: format!("expected {w} fields, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let n = rows.len();
    let w = width.ok_or_else(|| Error::Csv {
        path: display.clone(),
        row: 1,
        col: 1,
        msg: "empty file".into(),
    })?;
    let mut m = Array2::zeros((n, w));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn matrix_to_rows(m: &ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text)?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_block(x: &Path, y: &Path) -> Result<DataBlock> {
    let xm = read_matrix_csv(x)?;
    let ym = read_matrix_csv(y)?;
    DataBlock::center(&xm.view(), &ym.view())
}

#[derive(Serialize)]
struct PressReport {
    config: serde_json::Value,
    method: crate::press::PressMethod,
    press_value: f64,
    n: usize,
    q: usize,
    elapsed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    loo_residuals: Option<Vec<Vec<f64>>>,
}

fn press_report(res: &PressResult, config: serde_json::Value, with_residuals: bool) -> PressReport {
    PressReport {
        config,
        method: res.method,
        press_value: res.press_value,
        n: res.loo_residuals.nrows(),
        q: res.loo_residuals.ncols(),
        elapsed: res.elapsed,
        loo_residuals: with_residuals.then(|| matrix_to_rows(&res.loo_residuals.view())),
    }
}

fn selection_csv(res: &SelectionResult, header: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {header}");
    let _ = writeln!(out, "candidate,score,chosen");
    for (i, (cand, score)) in res.grid.iter().zip(res.scores.iter()).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_full(*cand),
            fmt_full(*score),
            usize::from(i == res.chosen_index)
        );
    }
    out
}

fn selection_report(
    res: &SelectionResult,
    config: serde_json::Value,
    format: OutputFormat,
    out: &Option<PathBuf>,
) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let doc = json!({
                "config": config,
                "result": res,
            });
            write_or_print(out, &serde_json::to_string_pretty(&doc)?)
        }
        OutputFormat::Csv => write_or_print(out, &selection_csv(res, &config.to_string())),
    }
}

fn hardware_fingerprint() -> String {
    let cores = std::thread::available_parallelism()
        .map(|c| c.get())
        .unwrap_or(1);
    format!(
        "{}-{}-{}core",
        std::env::consts::OS,
        std::env::consts::ARCH,
        cores
    )
}

fn run_in_pool<T: Send>(threads: usize, task: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads) // 0 means one thread per core
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(task))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut config = SimConfig::new(args.n, args.p, args.q, args.r, args.seed)
        .with_noise_sd(args.noise_sd)
        .with_latent_corr(args.latent_corr);
    if let Some(j) = args.sparsity_j {
        config = config.with_sparsity(j);
    }
    let sim = simulate(&config)?;
    fs::create_dir_all(&args.out)?;
    // files carry the centered blocks; loaders re-center, which is a no-op
    write_matrix_csv(&args.out.join("X.csv"), &sim.data.x())?;
    write_matrix_csv(&args.out.join("Y.csv"), &sim.data.y())?;
    let truth = json!({
        "config": config,
        "u_true": matrix_to_rows(&sim.truth.u_true.view()),
        "v_true": matrix_to_rows(&sim.truth.v_true.view()),
        "support": sim.truth.support_true,
        "mean_t": sim.truth.mean_t.to_vec(),
        "mean_s": sim.truth.mean_s.to_vec(),
    });
    fs::write(
        args.out.join("truth.json"),
        serde_json::to_string_pretty(&truth)?,
    )?;
    println!(
        "wrote {}, {}, {}",
        args.out.join("X.csv").display(),
        args.out.join("Y.csv").display(),
        args.out.join("truth.json").display()
    );
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let data = load_block(&args.x, &args.y)?;
    let fit = fit_pls(&data, args.r)?;
    let ey_norm = fit.ey_resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h_norm = fit.h_resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    let beta_norm = fit.beta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y_norm = data.y().iter().map(|v| v * v).sum::<f64>().sqrt();
    let report = json!({
        "config": {"x": args.x.display().to_string(), "y": args.y.display().to_string(), "r": args.r},
        "n": data.n(),
        "p": data.p(),
        "q": data.q(),
        "singular_values": fit.g.to_vec(),
        "inner_coefficients": fit.d.to_vec(),
        "beta_frobenius": beta_norm,
        "residual_frobenius": ey_norm,
        "relative_residual": if y_norm > 0.0 { ey_norm / y_norm } else { 0.0 },
        "inner_residual_frobenius": h_norm,
    });
    write_or_print(&args.out, &serde_json::to_string_pretty(&report)?)
}

fn cmd_press(args: &PressArgs, full_loocv: bool) -> Result<()> {
    let data = load_block(&args.x, &args.y)?;
    let res = run_in_pool(args.threads, || -> Result<PressResult> {
        if full_loocv {
            loocv_pls_full(&data, args.r)
        } else {
            let fit = fit_pls(&data, args.r)?;
            press_pls(&fit, &data)
        }
    })??;
    let config = json!({
        "x": args.x.display().to_string(),
        "y": args.y.display().to_string(),
        "r": args.r,
        "threads": args.threads,
    });
    let report = press_report(&res, config, args.residuals);
    write_or_print(&args.out, &serde_json::to_string_pretty(&report)?)
}

fn cmd_select_r(args: &SelectRArgs) -> Result<()> {
    let data = load_block(&args.x, &args.y)?;
    let method: ScoreMethod = args.method.into();
    let res = run_in_pool(args.threads, || select_r(&data, args.r_max, method))??;
    let config = json!({
        "x": args.x.display().to_string(),
        "y": args.y.display().to_string(),
        "r_max": args.r_max,
        "method": method,
        "threads": args.threads,
    });
    selection_report(&res, config, args.format, &args.out)
}

fn cmd_select_gamma(args: &SelectGammaArgs) -> Result<()> {
    let data = load_block(&args.x, &args.y)?;
    let method: ScoreMethod = args.method.into();
    let res = run_in_pool(args.threads, || select_gamma(&data, args.grid_size, method))??;
    let config = json!({
        "x": args.x.display().to_string(),
        "y": args.y.display().to_string(),
        "grid_size": args.grid_size,
        "method": method,
        "threads": args.threads,
    });
    selection_report(&res, config, args.format, &args.out)
}

fn cmd_bench_sensitivity(args: &BenchSensitivityArgs) -> Result<()> {
    let kind = match args.mode {
        SensitivityMode::R => ExperimentKind::SelectR,
        SensitivityMode::Gamma => ExperimentKind::SelectGamma,
    };
    let config = ExperimentConfig {
        r_max: args.r_max,
        grid_size: args.grid_size,
        ..ExperimentConfig::new(kind, args.n, args.p, args.q, args.trials, args.seed)
    };
    let record = run_in_pool(args.threads, || sensitivity_experiment(&config))??;
    let mode = match args.mode {
        SensitivityMode::R => "r",
        SensitivityMode::Gamma => "gamma",
    };
    if matches!(args.format, OutputFormat::Json) {
        let doc = json!({
            "config": {"experiment": config, "threads": args.threads},
            "record": record,
        });
        return write_or_print(&args.out, &serde_json::to_string_pretty(&doc)?);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {}",
        json!({"experiment": config, "threads": args.threads})
    );
    let _ = writeln!(out, "n,p,q,mode,trials,ratio,se,seed,failures");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        args.n,
        args.p,
        args.q,
        mode,
        args.trials,
        record.ratio.map(fmt_full).unwrap_or_default(),
        record.se.map(fmt_full).unwrap_or_default(),
        args.seed,
        record.failures
    );
    write_or_print(&args.out, &out)
}

fn cmd_bench_timing(args: &BenchTimingArgs) -> Result<()> {
    if args.n.is_empty() {
        return Err(Error::InvalidConfig("empty sample-size list".into()));
    }
    if args.repeats < 1 {
        return Err(Error::InvalidConfig("need at least one repeat".into()));
    }
    // rows collected as (method, n, median seconds), sorted by (method, n)
    let mut rows: Vec<(String, usize, f64)> = Vec::new();
    run_in_pool(args.threads, || -> Result<()> {
        for &n in &args.n {
            let sim_cfg = SimConfig::new(n, args.p, args.q, args.r, args.seed);
            let sim = simulate(&sim_cfg)?;
            let mut press_times = Vec::new();
            let mut loocv_times = Vec::new();
            // one warm-up per method, excluded from the medians
            for rep in 0..=args.repeats {
                let t0 = Instant::now();
                let fit = fit_pls(&sim.data, args.r)?;
                let _ = press_pls(&fit, &sim.data)?;
                if rep > 0 {
                    press_times.push(t0.elapsed().as_secs_f64());
                }
            }
            for rep in 0..=args.repeats {
                let t0 = Instant::now();
                let _ = loocv_pls_full(&sim.data, args.r)?;
                if rep > 0 {
                    loocv_times.push(t0.elapsed().as_secs_f64());
                }
            }
            rows.push(("loocv".into(), n, median(&mut loocv_times)));
            rows.push(("press".into(), n, median(&mut press_times)));
        }
        Ok(())
    })??;
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {}",
        json!({
            "command": "bench-timing", "n": args.n, "p": args.p, "q": args.q,
            "r": args.r, "repeats": args.repeats, "seed": args.seed,
            "threads": args.threads, "hardware": hardware_fingerprint(),
            "methodology": "median of repeats after one discarded warm-up run",
        })
    );
    let _ = writeln!(out, "method,n,seconds");
    for (method, n, secs) in rows {
        let _ = writeln!(out, "{method},{n},{}", fmt_full(secs));
    }
    write_or_print(&args.out, &out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn cmd_bench_error(args: &BenchErrorArgs) -> Result<()> {
    if args.n.is_empty() {
        return Err(Error::InvalidConfig("empty sample-size list".into()));
    }
    let mut medians: Vec<(usize, f64)> = Vec::new();
    run_in_pool(args.threads, || -> Result<()> {
        for &n in &args.n {
            let mut gaps = Vec::new();
            for s in 0..args.seeds {
                let seed = args
                    .seed
                    .wrapping_add(s as u64)
                    .wrapping_mul(0x9e3779b97f4a7c15);
                let sim_cfg = SimConfig::new(n, args.p, args.q, args.r, seed);
                let sim = simulate(&sim_cfg)?;
                let fit = fit_pls(&sim.data, args.r)?;
                let analytic = press_pls(&fit, &sim.data)?;
                let oracle = loocv_pls_full(&sim.data, args.r)?;
                gaps.push((analytic.press_value - oracle.press_value).abs() / oracle.press_value);
            }
            medians.push((n, median(&mut gaps)));
        }
        Ok(())
    })??;
    // least-squares slope of log(gap) against log(sqrt(log n / n))
    let xs: Vec<f64> = medians
        .iter()
        .map(|(n, _)| ((*n as f64).ln() / *n as f64).sqrt().ln())
        .collect();
    let ys: Vec<f64> = medians.iter().map(|(_, g)| g.ln()).collect();
    let slope = if medians.len() >= 2 {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {}",
        json!({
            "command": "bench-error", "n": args.n, "p": args.p, "q": args.q,
            "r": args.r, "seeds": args.seeds, "seed": args.seed,
            "loglog_slope_vs_sqrt_logn_over_n": slope,
        })
    );
    let _ = writeln!(out, "n,median_relative_gap");
    for (n, g) in &medians {
        let _ = writeln!(out, "{n},{}", fmt_full(*g));
    }
    if let Some(s) = slope {
        let _ = writeln!(out, "# loglog_slope={}", fmt_full(s));
    }
    write_or_print(&args.out, &out)
}

/// Runs one parsed command; errors propagate to `main` for a nonzero exit.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Press(args) => cmd_press(args, false),
        Command::Loocv(args) => cmd_press(args, true),
        Command::SelectR(args) => cmd_select_r(args),
        Command::SelectGamma(args) => cmd_select_gamma(args),
        Command::BenchSensitivity(args) => cmd_bench_sensitivity(args),
        Command::BenchTiming(args) => cmd_bench_timing(args),
        Command::BenchError(args) => cmd_bench_error(args),
    }
}
