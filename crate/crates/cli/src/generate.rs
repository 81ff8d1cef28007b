//! The generate command: draw a synthetic dataset from a known coupling
//! matrix, either loaded from a file or built from one of two designs, and
//! write the data alongside the reference coupling and its support.

use crate::config::{GenerateBlock, RunConfigFile, TopologyId};
use crate::io::{read_theta, write_float_matrix, write_int_matrix, Stamp};
use anyhow::{bail, Context, Result};
use pottsfit_core::model::{gibbs_generate, ThetaMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Disjoint consecutive pairs (2b, 2b+1) coupled along the diagonal.
pub fn pair_block_theta(p: usize, edges: usize, diagonal: f64, off_diagonal: f64) -> Result<ThetaMatrix> {
    if 2 * edges > p {
        bail!("generate: {edges} disjoint pairs need at least {} nodes, got {p}", 2 * edges);
    }
    let mut theta = ThetaMatrix::zeros(p);
    for i in 0..p {
        theta.set(i, i, diagonal);
    }
    for b in 0..edges {
        theta.set(2 * b, 2 * b + 1, off_diagonal);
        theta.set(2 * b + 1, 2 * b, off_diagonal);
    }
    Ok(theta)
}

/// Uniformly chosen distinct node pairs.
pub fn random_theta(
    p: usize,
    edges: usize,
    diagonal: f64,
    off_diagonal: f64,
    seed: u64,
) -> Result<ThetaMatrix> {
    let max_edges = p * (p - 1) / 2;
    if edges > max_edges {
        bail!("generate: {edges} edges exceed the {max_edges} distinct pairs of {p} nodes");
    }
    let mut theta = ThetaMatrix::zeros(p);
    for i in 0..p {
        theta.set(i, i, diagonal);
    }
    // Edge choice runs on its own stream so the dataset draw, which uses
    // the seed directly, is unaffected.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1F8B_4D2C_A6E3_7059);
    let mut chosen = HashSet::new();
    while chosen.len() < edges {
        let i = rng.gen_range(0..p);
        let j = rng.gen_range(0..p);
        if i == j {
            continue;
        }
        let pair = (i.min(j), i.max(j));
        if chosen.insert(pair) {
            theta.set(pair.0, pair.1, off_diagonal);
            theta.set(pair.1, pair.0, off_diagonal);
        }
    }
    Ok(theta)
}

fn resolve_theta(block: &GenerateBlock) -> Result<ThetaMatrix> {
    if let Some(path) = &block.theta {
        let theta = read_theta(path)?;
        theta
            .require_symmetric()
            .with_context(|| format!("generate: {} is not symmetric", path.display()))?;
        return Ok(theta);
    }
    let topology = block
        .topology
        .context("generate: need either a theta file or a topology")?;
    let p = block.p.context("generate: built-in designs need p")?;
    let edges = block.edges.context("generate: built-in designs need an edge count")?;
    match topology {
        TopologyId::PairBlocks => pair_block_theta(p, edges, block.diagonal, block.off_diagonal),
        TopologyId::Random => random_theta(p, edges, block.diagonal, block.off_diagonal, block.seed),
    }
}

pub fn run(cfg: &RunConfigFile) -> Result<()> {
    let block = cfg.generate()?;
    let theta = resolve_theta(block)?;
    let p = theta.p();
    let spec = cfg.model.to_spec(p)?;
    let data = gibbs_generate(&theta, &spec, block.n, block.burn_in, block.thin, block.seed)
        .context("generate: dataset draw failed")?;

    let stamp = Stamp { config_hash: cfg.hash()?, seed: block.seed };
    let dir = &block.directory;
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    write_int_matrix(&dir.join("data.tsv"), &stamp, data.values(), block.n, p)?;
    write_float_matrix(&dir.join("theta_true.tsv"), &stamp, theta.values(), p, p)?;
    let support: Vec<u8> = theta.values().iter().map(|&v| u8::from(v != 0.0)).collect();
    write_int_matrix(&dir.join("delta_true.tsv"), &stamp, &support, p, p)?;

    println!(
        "generate: p={p} n={} support={} -> {}",
        block.n,
        theta.support_size(),
        dir.display()
    );
    Ok(())
}
