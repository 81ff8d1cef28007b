//! pottsfit: batch interface to the sparse discrete graphical model
//! engine. Subcommands draw synthetic datasets, fit the quasi-posterior,
//! score fits against a reference, and cluster node groups.
//!
//! Configuration lives in a TOML file; command line flags override single
//! fields. The only environment variable consulted is POTTSFIT_WORKERS,
//! which caps the worker pool; results never depend on it.

mod cluster;
mod config;
mod fit;
mod generate;
mod ingest;
mod io;
mod score;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{GenerateBlock, InitId, McmcBlock, RunConfigFile, TopologyId, TruthBlock};
use pottsfit_core::engine::{configure_workers, Progress, SamplerKind};
use std::path::PathBuf;

const WORKERS_ENV: &str = "POTTSFIT_WORKERS";

#[derive(Parser)]
#[command(name = "pottsfit", version, about = "Sparse graphical model fitting by node-parallel MCMC")]
struct Cli {
    /// Print per-node progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a synthetic dataset from a known coupling matrix.
    Generate(GenerateArgs),
    /// Fit a dataset and write the posterior summary tables.
    Fit(FitArgs),
    /// Compare fit outputs against a reference coupling matrix.
    Score(ScoreArgs),
    /// Average edge probabilities over node groups and cluster the groups.
    Cluster(ClusterArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Mala,
    PgGibbs,
}

impl From<SamplerArg> for SamplerKind {
    fn from(v: SamplerArg) -> Self {
        match v {
            SamplerArg::Mala => SamplerKind::Mala,
            SamplerArg::PgGibbs => SamplerKind::PgGibbs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Random,
    PairBlocks,
}

impl From<TopologyArg> for TopologyId {
    fn from(v: TopologyArg) -> Self {
        match v {
            TopologyArg::Random => TopologyId::Random,
            TopologyArg::PairBlocks => TopologyId::PairBlocks,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the dataset path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long)]
    directory: Option<PathBuf>,
    #[arg(long)]
    sampler: Option<SamplerArg>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ci_level: Option<f64>,
    /// Also persist every retained sample as a binary stream.
    #[arg(long)]
    save_samples: bool,
    /// Reference coupling matrix; adds metrics.json to the outputs.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// JSON file with node index groups; adds phi and clustering outputs.
    #[arg(long)]
    groups_file: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Optional configuration file with a [generate] block.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    topology: Option<TopologyArg>,
    /// Explicit coupling matrix file instead of a built-in design.
    #[arg(long)]
    theta: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    /// Number of coupled pairs for the built-in designs.
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long)]
    diagonal: Option<f64>,
    #[arg(long)]
    off_diagonal: Option<f64>,
    /// Number of rows to draw.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    directory: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Directory holding the fit's summary tables.
    #[arg(long)]
    estimates: PathBuf,
    /// Reference coupling matrix.
    #[arg(long)]
    truth: PathBuf,
    /// Sample stream from the fit; adds per-iteration chain metrics.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Credible level the fit's intervals were computed at.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Edge probability matrix file.
    #[arg(long, conflicts_with = "estimates")]
    edge_prob: Option<PathBuf>,
    /// Directory holding a fit's summary tables (uses its edge_prob.tsv).
    #[arg(long)]
    estimates: Option<PathBuf>,
    /// JSON file with node index groups.
    #[arg(long)]
    groups_file: Option<PathBuf>,
    /// Configuration file supplying [output].groups instead.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    directory: Option<PathBuf>,
}

/// Progress callback for the engine; silent unless verbose.
pub fn progress_printer(verbose: bool) -> impl Fn(Progress) + Sync {
    move |event| {
        if !verbose {
            return;
        }
        match event {
            Progress::NodeStarted { node } => eprintln!("node {node} started"),
            Progress::NodeFinished { node, diagnostics, retained } => eprintln!(
                "node {node} finished: {retained} samples, acceptance {:.3}",
                diagnostics.acceptance_rate()
            ),
        }
    }
}

fn apply_fit_overrides(cfg: &mut RunConfigFile, args: &FitArgs) -> Result<()> {
    if let Some(path) = &args.data {
        match &mut cfg.data {
            Some(block) => block.path = path.clone(),
            None => bail!("--data needs a [data] block to override"),
        }
    }
    if cfg.mcmc.is_none() {
        if let (Some(sampler), Some(iterations)) = (args.sampler, args.iterations) {
            cfg.mcmc = Some(McmcBlock {
                sampler: sampler.into(),
                iterations,
                burn_in: 0,
                thin: 1,
                master_seed: 0,
                init: InitId::Lasso,
                lasso_lambda: None,
            });
        }
    }
    if let Some(mc) = &mut cfg.mcmc {
        if let Some(v) = args.sampler {
            mc.sampler = v.into();
        }
        if let Some(v) = args.iterations {
            mc.iterations = v;
        }
        if let Some(v) = args.burn_in {
            mc.burn_in = v;
        }
        if let Some(v) = args.thin {
            mc.thin = v;
        }
        if let Some(v) = args.seed {
            mc.master_seed = v;
        }
    }
    if let Some(v) = args.ci_level {
        cfg.output.ci_level = v;
    }
    if let Some(d) = &args.directory {
        cfg.output.directory = d.clone();
    }
    if args.save_samples {
        cfg.output.save_samples = true;
    }
    if let Some(t) = &args.truth {
        cfg.truth = Some(TruthBlock { theta: t.clone() });
    }
    if let Some(g) = &args.groups_file {
        cfg.output.groups = Some(cluster::load_groups(g)?);
    }
    Ok(())
}

fn apply_generate_overrides(cfg: &mut RunConfigFile, args: &GenerateArgs) -> Result<()> {
    let mut block = cfg.generate.clone().unwrap_or(GenerateBlock {
        topology: None,
        theta: None,
        p: None,
        edges: None,
        diagonal: -2.0,
        off_diagonal: 4.0,
        n: 0,
        burn_in: 1000,
        thin: 1,
        seed: 0,
        directory: PathBuf::from("generated"),
    });
    if let Some(t) = args.topology {
        block.topology = Some(t.into());
    }
    if let Some(t) = &args.theta {
        block.theta = Some(t.clone());
    }
    if let Some(v) = args.p {
        block.p = Some(v);
    }
    if let Some(v) = args.edges {
        block.edges = Some(v);
    }
    if let Some(v) = args.diagonal {
        block.diagonal = v;
    }
    if let Some(v) = args.off_diagonal {
        block.off_diagonal = v;
    }
    if let Some(v) = args.n {
        block.n = v;
    }
    if let Some(v) = args.burn_in {
        block.burn_in = v;
    }
    if let Some(v) = args.thin {
        block.thin = v;
    }
    if let Some(v) = args.seed {
        block.seed = v;
    }
    if let Some(d) = &args.directory {
        block.directory = d.clone();
    }
    if block.n == 0 {
        bail!("generate: the number of rows must be positive (set [generate].n or --n)");
    }
    cfg.generate = Some(block);
    Ok(())
}

fn main() -> Result<()> {
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let workers: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))?;
        configure_workers(workers).context("worker pool setup")?;
    }
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Fit(args) => {
            let mut cfg = RunConfigFile::load(&args.config)?;
            apply_fit_overrides(&mut cfg, args)?;
            fit::run(&cfg, cli.verbose)
        }
        Cmd::Generate(args) => {
            let mut cfg = match &args.config {
                Some(path) => RunConfigFile::load(path)?,
                None => RunConfigFile::default(),
            };
            apply_generate_overrides(&mut cfg, args)?;
            generate::run(&cfg)
        }
        Cmd::Score(args) => score::run(
            &args.estimates,
            &args.truth,
            args.samples.as_deref(),
            args.level,
            args.out.as_ref(),
        ),
        Cmd::Cluster(args) => {
            let edge_prob = match (&args.edge_prob, &args.estimates) {
                (Some(path), _) => path.clone(),
                (None, Some(dir)) => dir.join("edge_prob.tsv"),
                (None, None) => bail!("cluster: need --edge-prob or --estimates"),
            };
            let groups = match (&args.groups_file, &args.config) {
                (Some(path), _) => cluster::load_groups(path)?,
                (None, Some(path)) => RunConfigFile::load(path)?
                    .output
                    .groups
                    .context("cluster: config has no [output].groups")?,
                (None, None) => bail!("cluster: need --groups-file or --config"),
            };
            let dir = match (&args.directory, &args.estimates) {
                (Some(d), _) => d.clone(),
                (None, Some(e)) => e.clone(),
                (None, None) => edge_prob
                    .parent()
                    .map(PathBuf::from)
                    .context("cluster: cannot infer an output directory, pass --directory")?,
            };
            cluster::run(&edge_prob, groups, &dir)
        }
    }
}
