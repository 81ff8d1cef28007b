//! The fit command: ingest a dataset, run every node chain, and write the
//! summary tables. Reference couplings add a metrics file; group labels
//! add the group-averaged probabilities and their clustering.

use crate::config::RunConfigFile;
use crate::ingest::{ingest, IngestReport};
use crate::io::{write_float_matrix, write_int_matrix, write_samples, Stamp};
use crate::{cluster, progress_printer};
use anyhow::{Context, Result};
use pottsfit_core::engine::run_all_with_progress;
use pottsfit_core::summary::{
    chain_f1, chain_relative_error, coverage_report, summarize, support_of, CoverageReport,
};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct IngestFile<'a> {
    config: &'a str,
    seed: u64,
    #[serde(flatten)]
    report: &'a IngestReport,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    config: &'a str,
    seed: u64,
    relative_error: f64,
    f1: f64,
    coverage: &'a CoverageReport,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("cannot serialize report")?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn run(cfg: &RunConfigFile, verbose: bool) -> Result<()> {
    let data_block = cfg.data()?;
    let mcmc_block = cfg.mcmc()?;
    let (data, report) = ingest(data_block, cfg.model.m)?;
    let (n, p) = (data.n(), data.p());
    let spec = cfg.model.to_spec(p)?;
    let hp = cfg.hyper.to_hyperparams(n, p)?;
    let mc = mcmc_block.to_mcmc_config();
    let stamp = Stamp { config_hash: cfg.hash()?, seed: mc.master_seed };

    let dir = &cfg.output.directory;
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    write_json(&dir.join("ingest.json"), &IngestFile {
        config: &stamp.config_hash,
        seed: stamp.seed,
        report: &report,
    })?;

    let fit = run_all_with_progress(&data, &hp, &spec, &mc, progress_printer(verbose))
        .context("engine: fit failed")?;
    let summary = summarize(&fit, cfg.output.ci_level).context("summary: cannot summarize fit")?;

    write_float_matrix(&dir.join("theta_hat.tsv"), &stamp, &summary.theta_hat, p, p)?;
    write_float_matrix(&dir.join("theta_tilde.tsv"), &stamp, &summary.theta_tilde, p, p)?;
    write_float_matrix(&dir.join("edge_prob.tsv"), &stamp, &summary.edge_prob, p, p)?;
    write_float_matrix(&dir.join("ci_lo.tsv"), &stamp, &summary.ci_lo, p, p)?;
    write_float_matrix(&dir.join("ci_hi.tsv"), &stamp, &summary.ci_hi, p, p)?;

    if let Some(truth_block) = &cfg.truth {
        let truth = crate::io::read_theta(&truth_block.theta)?;
        let coverage = coverage_report(&summary, &truth).context("metrics: coverage failed")?;
        write_json(&dir.join("metrics.json"), &MetricsFile {
            config: &stamp.config_hash,
            seed: stamp.seed,
            relative_error: chain_relative_error(&fit, &truth)
                .context("metrics: relative error failed")?,
            f1: chain_f1(&fit, &support_of(&truth)).context("metrics: f1 failed")?,
            coverage: &coverage,
        })?;
    }

    if let Some(groups) = &cfg.output.groups {
        cluster::emit(dir, &stamp, &summary.edge_prob, p, groups)?;
    }
    if cfg.output.save_samples {
        write_samples(&dir.join("samples.bin"), &fit.nodes)?;
    }
    if data_block.missing_code.is_some() {
        // The completed matrix is part of the record: downstream scoring
        // must see the same imputed cells the fit saw.
        write_int_matrix(&dir.join("data_imputed.tsv"), &stamp, data.values(), n, p)?;
    }

    println!(
        "fit: p={p} n={n} sampler={} retained={} -> {}",
        match mc.sampler {
            pottsfit_core::engine::SamplerKind::Mala => "mala",
            pottsfit_core::engine::SamplerKind::PgGibbs => "pg-gibbs",
        },
        fit.retained(),
        dir.display()
    );
    Ok(())
}
