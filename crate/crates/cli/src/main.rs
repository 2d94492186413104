//! `hdp-transport`: run the configured experiments or use the transport and
//! demixing tools directly on JSON and CSV files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use hdp_transport::deconv::eta_mle;
use hdp_transport::hierarchy::nested_wasserstein;
use hdp_transport::measures::{sample_groups, sample_hdp};
use hdp_transport::{
    parallel, run_experiment, wasserstein, write_outputs, BaseMeasure, BoundedDomain, DemixConfig, DiscreteMeasure,
    ExperimentConfig, ExperimentKind, KernelModel, MeasureEnsemble, Seed, StickBreakingTruncation,
};

#[derive(Parser)]
#[command(name = "hdp-transport", version, about = "Transport distances over hierarchical Dirichlet measures")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nested-Dirichlet transport identity bracket.
    Identity(ExperimentArgs),
    /// Stick-breaking tail probabilities against the tail bound.
    Tail(ExperimentArgs),
    /// KL divergence of marginals against C1 n W_r^r.
    KlBound(ExperimentArgs),
    /// Small-ball probability of a Dirichlet process.
    SmallBall(ExperimentArgs),
    /// Prior thickness of KL neighborhoods.
    Thickness(ExperimentArgs),
    /// Tube measure and regularity exponent of a Dirichlet test set.
    Tube(ExperimentArgs),
    /// Demixing error against sample size.
    DemixRate(ExperimentArgs),
    /// Base-measure estimation and borrowing of strength.
    BorrowStrength(ExperimentArgs),
    /// Demixing test power against the transport distance.
    Contraction(ExperimentArgs),
    /// Exact W_r between two measures.
    Wasserstein(PairArgs),
    /// Nested W_r between two ensembles of measures.
    Nested(PairArgs),
    /// Draw a hierarchical Dirichlet sample with grouped observations.
    SampleHdp(ToolArgs),
    /// Fit a finite mixture to a data CSV.
    Demix(DemixArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; parameters default when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ToolArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DemixArgs {
    /// CSV with one observation per row; a non-numeric first row is a header.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HdpConfig {
    gamma: f64,
    alpha: f64,
    base: BaseMeasure,
    groups: usize,
    #[serde(default)]
    n: usize,
    kernel: Option<KernelModel>,
    #[serde(default = "default_tail_eps")]
    tail_eps: f64,
    #[serde(default = "default_tail_target")]
    tail_target: f64,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DemixToolConfig {
    kernel: KernelModel,
    domain: BoundedDomain,
    #[serde(default)]
    demix: DemixConfig,
    #[serde(default)]
    seed: Option<u64>,
}

fn default_tail_eps() -> f64 {
    0.01
}

fn default_tail_target() -> f64 {
    1e-4
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(value: &impl serde::Serialize, out: Option<&Path>, file_name: &str) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        None => println!("{text}"),
        Some(p) => {
            // a directory gets a default file name
            let path = if p.is_dir() { p.join(file_name) } else { p.to_path_buf() };
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn read_data(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => bail!("{}: row {}: {e}", path.display(), i + 1),
        }
    }
    Ok(rows)
}

fn run_named(kind: ExperimentKind, args: &ExperimentArgs) -> anyhow::Result<bool> {
    let mut raw: Value = match &args.config {
        Some(path) => read_json(path)?,
        None => serde_json::json!({}),
    };
    let obj = raw.as_object_mut().context("config must be a JSON object")?;
    match obj.get("experiment").and_then(Value::as_str) {
        None => {
            obj.insert("experiment".into(), kind.name().into());
        }
        Some(name) if name != kind.name() => bail!("config is for experiment `{name}`, not `{kind}`"),
        Some(_) => {}
    }
    if let Some(seed) = args.seed {
        obj.insert("seed".into(), seed.into());
    }
    let cfg: ExperimentConfig = serde_json::from_value(raw).context("invalid experiment config")?;
    let record = run_experiment(&cfg)?;
    let out = cfg.output_path.as_deref().map(PathBuf::from).unwrap_or_else(|| args.out.clone());
    let (csv, json) = write_outputs(&record, &out)?;
    for v in &record.verdicts {
        println!("{} {:?} margin={:.4e} {}", v.criterion, v.status, v.margin, v.detail);
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(!record.has_failure())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    parallel::set_threads(cli.threads);
    let kind = match &cli.command {
        Command::Identity(a) => Some((ExperimentKind::Identity, a)),
        Command::Tail(a) => Some((ExperimentKind::Tail, a)),
        Command::KlBound(a) => Some((ExperimentKind::KlBound, a)),
        Command::SmallBall(a) => Some((ExperimentKind::SmallBall, a)),
        Command::Thickness(a) => Some((ExperimentKind::Thickness, a)),
        Command::Tube(a) => Some((ExperimentKind::Tube, a)),
        Command::DemixRate(a) => Some((ExperimentKind::DemixRate, a)),
        Command::BorrowStrength(a) => Some((ExperimentKind::BorrowStrength, a)),
        Command::Contraction(a) => Some((ExperimentKind::Contraction, a)),
        _ => None,
    };
    if let Some((kind, args)) = kind {
        return run_named(kind, args);
    }
    match cli.command {
        Command::Wasserstein(a) => {
            let g: DiscreteMeasure = read_json(&a.source)?;
            let gp: DiscreteMeasure = read_json(&a.target)?;
            emit(&wasserstein(&g, &gp, a.r)?, a.out.as_deref(), "wasserstein.json")?;
        }
        Command::Nested(a) => {
            let g: MeasureEnsemble = read_json(&a.source)?;
            let gp: MeasureEnsemble = read_json(&a.target)?;
            emit(&nested_wasserstein(&g, &gp, a.r)?, a.out.as_deref(), "nested.json")?;
        }
        Command::SampleHdp(a) => {
            let cfg: HdpConfig = read_json(&a.config)?;
            let seed = a.seed.or(cfg.seed).context("no seed given in the config or on the command line")?;
            let trunc = StickBreakingTruncation::for_tolerance(cfg.gamma.max(cfg.alpha), cfg.tail_eps, cfg.tail_target)?;
            let mut sample = sample_hdp(cfg.gamma, &cfg.base, cfg.alpha, cfg.groups, &trunc, Seed(seed))?;
            if cfg.n > 0 {
                let kernel = cfg.kernel.context("`n` > 0 needs a kernel")?;
                sample = sample_groups(&sample, &kernel, cfg.n, Seed(seed))?;
            }
            emit(&sample, a.out.as_deref(), "hdp.json")?;
        }
        Command::Demix(a) => {
            let cfg: DemixToolConfig = read_json(&a.config)?;
            let seed = a.seed.or(cfg.seed).context("no seed given in the config or on the command line")?;
            let data = read_data(&a.data)?;
            let fit = eta_mle(&data, &cfg.kernel, &cfg.domain, &cfg.demix, Seed(seed))?;
            emit(&fit, a.out.as_deref(), "demix.json")?;
        }
        _ => unreachable!("experiments handled above"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
