//! `fcpd`: change-point detection for functional time series.
//!
//! Exit codes: 0 success (for `detect`: no rejection), 3 `detect` rejected
//! the null hypothesis, 1 usage or data error.

mod manifest;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fcpd::covariance::{BandwidthRule, KernelKind, KernelSpec};
use fcpd::critval::{critval_table, write_table, CritvalCache, CritvalConfig};
use fcpd::cusum::{cusum_stat, decide, CusumConfig, Estimator};
use fcpd::datagen::{figure2_trend, inject_change, noise, scenario_trend, Noise, ScenarioId};
use fcpd::hilbert::{uniform_grid, BasisDescriptor};
use fcpd::io::{
    read_coefficients, read_curves_projected, sample_on_grid, write_coefficients, write_curves,
};
use fcpd::oracle::{alt_covariance_limit, drift_sup, trend_variance, TrendFunctionHandle};
use fcpd::study::{
    component_table, rejection_rates, write_rejections, ComponentLayout, StudyConfig,
};

use manifest::RunManifest;

const EXIT_REJECT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fcpd",
    version,
    about = "CUSUM change-point detection for functional time series"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
struct Global {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout). A manifest is written to `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test a sample for a change in the mean.
    Detect(DetectArgs),
    /// Rejection rates of the four statistics over simulated replications.
    Simulate(SimulateArgs),
    /// Critical values of the supremum of Brownian bridge norms.
    Critval(CritvalArgs),
    /// Generate a scenario sample.
    Gen(GenArgs),
    /// Export estimated principal components and the aligned component.
    Components(ComponentsArgs),
    /// Limit quantities of a scenario trend.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct EstimatorArgs {
    /// Number of projection directions.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Alignment exponent.
    #[arg(long, default_value_t = fcpd::cusum::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value = "flattop")]
    kernel: String,
    /// Kernel support bound `a`.
    #[arg(long, default_value_t = 1.0)]
    kernel_support: f64,
    /// Bandwidth exponent `e` in `h = floor(n^e)`.
    #[arg(long, default_value_t = 0.2)]
    bandwidth_exp: f64,
    /// Fixed bandwidth; overrides `--bandwidth-exp`.
    #[arg(long)]
    bandwidth: Option<usize>,
}

impl EstimatorArgs {
    fn kernel(&self) -> anyhow::Result<KernelSpec> {
        let kind: KernelKind = self.kernel.parse()?;
        Ok(KernelSpec::new(kind, self.kernel_support)?)
    }

    fn bandwidth(&self) -> BandwidthRule {
        match self.bandwidth {
            Some(h) => BandwidthRule::Fixed(h),
            None => BandwidthRule::PowerLaw(self.bandwidth_exp),
        }
    }

    fn config(&self, aligned: bool, estimator: Estimator) -> anyhow::Result<CusumConfig> {
        Ok(CusumConfig {
            d: self.d,
            gamma: self.gamma,
            aligned,
            estimator,
            kernel: self.kernel()?,
            bandwidth: self.bandwidth(),
        })
    }
}

#[derive(Debug, Args, Serialize)]
struct DetectArgs {
    /// Sample file, `-` for stdin.
    input: PathBuf,
    /// Input holds grid-sampled curves instead of coefficients.
    #[arg(long)]
    curves: bool,
    /// Basis size used to project curve input.
    #[arg(long, default_value_t = 25)]
    basis_dim: usize,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    /// Use the change-aligned first component.
    #[arg(long)]
    aligned: bool,
    #[arg(long, default_value = "cov0")]
    estimator: String,
    /// Include per-k scores in the report.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    est: EstimatorArgs,
    #[command(flatten)]
    crit: CritArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CritArgs {
    /// Monte Carlo replications for the critical value.
    #[arg(long, default_value_t = 200_000)]
    reps: usize,
    /// Bridge discretization steps.
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    /// Disable the discrete-monitoring continuity correction.
    #[arg(long)]
    no_correction: bool,
}

impl CritArgs {
    fn config(&self, d: usize, seed: u64) -> CritvalConfig {
        CritvalConfig {
            d,
            grid_size: self.grid,
            replications: self.reps,
            seed,
            continuity_correction: !self.no_correction,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Comma-separated scenarios.
    #[arg(long, value_delimiter = ',', default_value = "A,B,C,D,E,F")]
    scenario: Vec<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    /// Functional AR(1) noise with this contraction instead of Brownian noise.
    #[arg(long)]
    psi: Option<f64>,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Seed for the critical value simulation.
    #[arg(long, default_value_t = 1)]
    critval_seed: u64,
    /// Monte Carlo replications for the critical value.
    #[arg(long, default_value_t = 200_000)]
    crit_reps: usize,
    /// Bridge discretization steps.
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    /// Disable the discrete-monitoring continuity correction.
    #[arg(long)]
    no_correction: bool,
}

#[derive(Debug, Args, Serialize)]
struct CritvalArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    /// Emit a table for alpha in {0.10, 0.05, 0.01} and d = 1..5.
    #[arg(long)]
    table: bool,
    #[command(flatten)]
    crit: CritArgs,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    n: usize,
    /// Emit curves on a uniform grid instead of coefficients.
    #[arg(long)]
    curves: bool,
    /// Grid points for `--curves`.
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    #[arg(long)]
    psi: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct ComponentsArgs {
    /// Coefficient file; otherwise `--scenario` or `--figure2` data is generated.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    curves: bool,
    #[arg(long, conflicts_with = "input")]
    scenario: Option<String>,
    /// The three-component direction setting with a mid-sample step.
    #[arg(long, conflicts_with_all = ["input", "scenario"])]
    figure2: bool,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Number of leading components.
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long, default_value = "cov0")]
    estimator: String,
    /// Write coefficient vectors instead of grid evaluations.
    #[arg(long)]
    coefficients: bool,
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum OracleQuantity {
    /// `G(g)` per trend component.
    #[value(name = "Gg", alias = "gg")]
    Gg,
    /// Supremum of the drift norm.
    Sup,
    /// Long-run covariance scaling `s_n` (single direction only).
    Sn,
}

#[derive(Debug, Args, Serialize)]
struct OracleArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum)]
    what: OracleQuantity,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[command(flatten)]
    est: EstimatorArgs,
}

struct Session {
    global: Global,
}

impl Session {
    fn format(&self, default: Format) -> Format {
        self.global.format.unwrap_or(default)
    }

    fn writer(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.global.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn manifest(&self, command: &str, args: &impl Serialize) -> anyhow::Result<()> {
        if let Some(out) = &self.global.out {
            let params = serde_json::json!({ "global": &self.global, "args": args });
            RunManifest::new(command, params, self.global.seed).write_beside(out)?;
        }
        Ok(())
    }
}

fn read_input(path: &PathBuf) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    if path.as_os_str() == "-" {
        io::stdin().read_to_end(&mut buf)?;
    } else {
        buf = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    }
    Ok(buf)
}

fn load_sample(
    path: &PathBuf,
    curves: bool,
    basis_dim: usize,
) -> anyhow::Result<fcpd::hilbert::FunctionalSample> {
    let data = read_input(path)?;
    let sample = if curves {
        read_curves_projected(data.as_slice(), BasisDescriptor::fourier(basis_dim)?)
    } else {
        read_coefficients(data.as_slice())
    };
    sample.with_context(|| format!("reading {}", path.display()))
}

fn noise_kind(psi: Option<f64>) -> Noise {
    psi.map_or(Noise::Brownian, |psi| Noise::Far1 { psi })
}

fn cmd_detect(ctx: &Session, args: &DetectArgs) -> anyhow::Result<u8> {
    let sample = load_sample(&args.input, args.curves, args.basis_dim)?;
    if sample.n() < 10 {
        bail!(
            "detection needs at least 10 observations, got {}",
            sample.n()
        );
    }
    let cfg = args.est.config(args.aligned, args.estimator.parse()?)?;
    let result = cusum_stat(&sample, &cfg)?;
    let cache = CritvalCache::from_env()?;
    let crit =
        cache.critical_value(cfg.d, args.alpha, &args.crit.config(cfg.d, ctx.global.seed))?;
    let result = decide(result, args.alpha, crit)?;
    let report = result.report(args.trace);

    let mut out = ctx.writer()?;
    match ctx.format(Format::Json) {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        Format::Csv => {
            writeln!(
                out,
                "statistic,k_hat,d,aligned,estimator,critical_value,alpha,reject"
            )?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                report.statistic,
                report.k_hat,
                report.d,
                report.aligned,
                report.estimator,
                crit,
                args.alpha,
                result.reject.unwrap_or(false)
            )?;
        }
    }
    out.flush()?;
    ctx.manifest("detect", args)?;
    Ok(if result.reject == Some(true) {
        EXIT_REJECT
    } else {
        0
    })
}

fn cmd_simulate(ctx: &Session, args: &SimulateArgs) -> anyhow::Result<u8> {
    let scenarios = args
        .scenario
        .iter()
        .map(|s| s.parse::<ScenarioId>())
        .collect::<Result<Vec<_>, _>>()?;
    let cache = CritvalCache::from_env()?;
    let crit = cache.critical_value(
        args.est.d,
        args.alpha,
        &CritArgs {
            reps: args.crit_reps,
            grid: args.grid,
            no_correction: args.no_correction,
        }
        .config(args.est.d, args.critval_seed),
    )?;
    let mut rows = Vec::new();
    for id in &scenarios {
        for n in &args.n {
            let cfg = StudyConfig {
                scenario: *id,
                n: *n,
                reps: args.reps,
                seed: ctx.global.seed,
                d: args.est.d,
                gamma: args.est.gamma,
                kernel: args.est.kernel()?,
                bandwidth: args.est.bandwidth(),
                noise: noise_kind(args.psi),
                critical_value: crit,
            };
            rows.push(rejection_rates(&cfg)?);
        }
    }
    let mut out = ctx.writer()?;
    match ctx.format(Format::Csv) {
        Format::Csv => write_rejections(&rows, &mut out)?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?,
    }
    out.flush()?;
    ctx.manifest("simulate", args)?;
    Ok(0)
}

fn cmd_critval(ctx: &Session, args: &CritvalArgs) -> anyhow::Result<u8> {
    let cache = CritvalCache::from_env()?;
    let cfg = args.crit.config(args.d, ctx.global.seed);
    let mut out = ctx.writer()?;
    if args.table {
        let table = critval_table(5, &cfg, &cache)?;
        match ctx.format(Format::Csv) {
            Format::Csv => write_table(&table, &mut out)?,
            Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&table)?)?,
        }
    } else {
        let value = cache.critical_value(args.d, args.alpha, &cfg)?;
        match ctx.format(Format::Csv) {
            Format::Csv => writeln!(out, "{value}")?,
            Format::Json => writeln!(
                out,
                "{}",
                serde_json::json!({ "d": args.d, "alpha": args.alpha, "value": value })
            )?,
        }
    }
    out.flush()?;
    ctx.manifest("critval", args)?;
    Ok(0)
}

fn cmd_gen(ctx: &Session, args: &GenArgs) -> anyhow::Result<u8> {
    let id: ScenarioId = args.scenario.parse()?;
    let sample =
        fcpd::datagen::scenario_with_noise(id, args.n, ctx.global.seed, noise_kind(args.psi))?;
    let mut out = ctx.writer()?;
    if args.curves {
        let grid = uniform_grid(args.grid_points.max(2));
        write_curves(&grid, &sample_on_grid(&sample, &grid), &mut out)?;
    } else {
        write_coefficients(&sample, &mut out)?;
    }
    out.flush()?;
    ctx.manifest("gen", args)?;
    Ok(0)
}

fn cmd_components(ctx: &Session, args: &ComponentsArgs) -> anyhow::Result<u8> {
    let (sample, delta) = if let Some(path) = &args.input {
        (load_sample(path, args.curves, 25)?, None)
    } else {
        let trend = if args.figure2 {
            figure2_trend()?
        } else {
            let id: ScenarioId = args.scenario.as_deref().unwrap_or("A").parse()?;
            scenario_trend(id)?
        };
        let base = noise(Noise::Brownian, args.n, ctx.global.seed)?;
        let delta = match trend.components() {
            [only] => Some(only.delta.clone()),
            _ => None,
        };
        (inject_change(&base, &trend)?, delta)
    };
    let cfg = args.est.config(true, args.estimator.parse()?)?;
    let table = component_table(&sample, args.count, &cfg, delta.as_ref())?;
    let layout = if args.coefficients {
        ComponentLayout::Coefficients
    } else {
        ComponentLayout::Grid(args.grid_points)
    };
    let mut out = ctx.writer()?;
    table.write(layout, &mut out)?;
    out.flush()?;
    ctx.manifest("components", args)?;
    Ok(0)
}

fn cmd_oracle(ctx: &Session, args: &OracleArgs) -> anyhow::Result<u8> {
    let id: ScenarioId = args.scenario.parse()?;
    let trend = scenario_trend(id)?;
    let values: Vec<f64> = match args.what {
        OracleQuantity::Gg => trend
            .components()
            .iter()
            .map(|c| trend_variance(&TrendFunctionHandle::from_component(c)))
            .collect(),
        OracleQuantity::Sup => vec![drift_sup(&trend)],
        OracleQuantity::Sn => {
            let h = args.est.bandwidth().bandwidth(args.n)?;
            vec![alt_covariance_limit(&trend, &args.est.kernel()?, args.n, h)?.s_n]
        }
    };
    let mut out = ctx.writer()?;
    match ctx.format(Format::Csv) {
        Format::Csv => {
            for v in &values {
                writeln!(out, "{v}")?;
            }
        }
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::json!({ "scenario": id.to_string(), "what": args.what, "values": values })
        )?,
    }
    out.flush()?;
    ctx.manifest("oracle", args)?;
    Ok(0)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(threads) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    let ctx = Session { global: cli.global };
    match &cli.command {
        Command::Detect(a) => cmd_detect(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Critval(a) => cmd_critval(&ctx, a),
        Command::Gen(a) => cmd_gen(&ctx, a),
        Command::Components(a) => cmd_components(&ctx, a),
        Command::Oracle(a) => cmd_oracle(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
