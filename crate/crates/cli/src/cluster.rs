//! The cluster command: average edge probabilities over node groups and
//! cluster the groups by Ward linkage on reciprocal affinities. The fit
//! command calls the same emission path when groups are configured.

use crate::io::{read_float_matrix, read_stamp, write_float_matrix_annotated, Stamp};
use anyhow::{bail, Context, Result};
use pottsfit_core::summary::cluster::{reciprocal_distance, ward_cluster};
use pottsfit_core::summary::phi_matrix;
use std::io::Write;
use std::path::Path;

/// Writes phi.tsv and clusters.tsv for one edge-probability matrix.
pub fn emit(
    dir: &Path,
    stamp: &Stamp,
    edge_prob: &[f64],
    p: usize,
    groups: &[Vec<usize>],
) -> Result<()> {
    let k = groups.len();
    let phi = phi_matrix(edge_prob, p, groups).context("cluster: phi averaging failed")?;
    let groups_note = format!(
        "# groups={}",
        serde_json::to_string(groups).context("cluster: cannot serialize groups")?
    );
    write_float_matrix_annotated(&dir.join("phi.tsv"), stamp, &[groups_note], &phi, k, k)?;

    let dissim = reciprocal_distance(&phi, k).context("cluster: dissimilarity failed")?;
    let tree = ward_cluster(&dissim, k).context("cluster: linkage failed")?;
    let path = dir.join("clusters.tsv");
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{}", stamp.line())?;
    writeln!(w, "# columns: step\tcluster_a\tcluster_b\theight\tsize")?;
    for (step, m) in tree.merges.iter().enumerate() {
        writeln!(w, "{step}\t{}\t{}\t{}\t{}", m.a, m.b, m.height, m.size)?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn load_groups(path: &Path) -> Result<Vec<Vec<usize>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cluster: cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("cluster: {} must hold a JSON array of node index arrays", path.display()))
}

pub fn run(edge_prob_path: &Path, groups: Vec<Vec<usize>>, dir: &Path) -> Result<()> {
    let (edge_prob, rows, cols) = read_float_matrix(edge_prob_path)?;
    if rows != cols {
        bail!(
            "{}: edge probability matrix must be square, got {rows} x {cols}",
            edge_prob_path.display()
        );
    }
    // Outputs inherit the fit's provenance stamp when the input carries one.
    let stamp = read_stamp(edge_prob_path)?.unwrap_or(Stamp {
        config_hash: "unknown".into(),
        seed: 0,
    });
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    emit(dir, &stamp, &edge_prob, rows, &groups)?;
    println!("cluster: k={} groups, {} merges -> {}", groups.len(), groups.len() - 1, dir.display());
    Ok(())
}
