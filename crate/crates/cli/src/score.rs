//! The score command: compare the tables a fit wrote against a reference
//! coupling matrix. Matrix-level metrics come from the summary files; when
//! a sample stream is supplied the per-iteration chain metrics are added.

use crate::fit::write_json;
use crate::io::{read_float_matrix, read_samples, read_theta};
use anyhow::{bail, Context, Result};
use pottsfit_core::engine::{FitResult, McmcConfig, SamplerKind};
use pottsfit_core::summary::{
    chain_f1, chain_relative_error, coverage_report, node_averaged_relative_error, f1_score,
    support_of, CoverageReport, PosteriorSummary,
};
use pottsfit_core::model::ThetaMatrix;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct ChainMetrics {
    relative_error: f64,
    f1: f64,
}

#[derive(Serialize)]
struct ScoreFile {
    relative_error: f64,
    f1: f64,
    coverage: CoverageReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain: Option<ChainMetrics>,
}

fn read_square(path: &Path, p: usize) -> Result<Vec<f64>> {
    let (values, rows, cols) = read_float_matrix(path)?;
    if rows != p || cols != p {
        bail!("{}: expected a {p} x {p} matrix, got {rows} x {cols}", path.display());
    }
    Ok(values)
}

pub fn run(
    estimates: &Path,
    truth_path: &Path,
    samples: Option<&Path>,
    level: f64,
    out: Option<&PathBuf>,
) -> Result<()> {
    let truth = read_theta(truth_path)?;
    let p = truth.p();
    let theta_hat = read_square(&estimates.join("theta_hat.tsv"), p)?;
    let theta_tilde = read_square(&estimates.join("theta_tilde.tsv"), p)?;
    let edge_prob = read_square(&estimates.join("edge_prob.tsv"), p)?;
    let ci_lo = read_square(&estimates.join("ci_lo.tsv"), p)?;
    let ci_hi = read_square(&estimates.join("ci_hi.tsv"), p)?;

    let est = ThetaMatrix::from_rows(p, theta_hat.clone())
        .context("score: theta_hat is not a valid matrix")?;
    let pred: Vec<bool> = edge_prob.iter().map(|&v| v >= 0.5).collect();
    let summary = PosteriorSummary { p, level, theta_hat, theta_tilde, edge_prob, ci_lo, ci_hi };

    let chain = match samples {
        Some(path) => {
            let nodes = read_samples(path)?;
            if nodes.len() != p {
                bail!(
                    "{}: stream holds {} nodes where the reference has {p}",
                    path.display(),
                    nodes.len()
                );
            }
            let retained = nodes.first().map_or(0, |n| n.retained);
            // Sampler kind and m are not persisted; the chain metrics never
            // consult them.
            let fit = FitResult {
                p,
                m: 0,
                nodes,
                config: McmcConfig::new(SamplerKind::PgGibbs, retained.max(1), 0, 1, 0),
            };
            Some(ChainMetrics {
                relative_error: chain_relative_error(&fit, &truth)?,
                f1: chain_f1(&fit, &support_of(&truth))?,
            })
        }
        None => None,
    };

    let report = ScoreFile {
        relative_error: node_averaged_relative_error(&est, &truth)?,
        f1: f1_score(&pred, &support_of(&truth), p)?,
        coverage: coverage_report(&summary, &truth)?,
        chain,
    };
    let text = serde_json::to_string_pretty(&report).context("score: cannot serialize report")?;
    println!("{text}");
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(())
}
