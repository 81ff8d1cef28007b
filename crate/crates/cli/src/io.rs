//! File formats: delimited matrices with a provenance header, and an
//! optional binary stream holding every retained sample.
//!
//! Text outputs are tab-separated; floats use the shortest representation
//! that round-trips, so reading a matrix back reproduces it bit for bit.
//! The first line of every file is `# config=<hash> seed=<seed>`.

use anyhow::{bail, Context, Result};
use pottsfit_core::engine::NodeSamples;
use pottsfit_core::model::ThetaMatrix;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Provenance stamp carried by every output file.
#[derive(Clone, Debug)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn line(&self) -> String {
        format!("# config={} seed={}", self.config_hash, self.seed)
    }
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn write_float_matrix(
    path: &Path,
    stamp: &Stamp,
    values: &[f64],
    rows: usize,
    cols: usize,
) -> Result<()> {
    write_float_matrix_annotated(path, stamp, &[], values, rows, cols)
}

/// Same as `write_float_matrix` with extra '#' header lines after the stamp.
pub fn write_float_matrix_annotated(
    path: &Path,
    stamp: &Stamp,
    notes: &[String],
    values: &[f64],
    rows: usize,
    cols: usize,
) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let mut w = create(path)?;
    writeln!(w, "{}", stamp.line())?;
    for note in notes {
        writeln!(w, "{note}")?;
    }
    for r in 0..rows {
        let line: Vec<String> = values[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        writeln!(w, "{}", line.join("\t"))?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// Recovers the provenance stamp from a file's first header line, if any.
pub fn read_stamp(path: &Path) -> Result<Option<Stamp>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let Some(line) = text.lines().next() else {
        return Ok(None);
    };
    let Some(rest) = line.strip_prefix("# config=") else {
        return Ok(None);
    };
    let Some((hash, seed_part)) = rest.split_once(" seed=") else {
        return Ok(None);
    };
    let Ok(seed) = seed_part.trim().parse::<u64>() else {
        return Ok(None);
    };
    Ok(Some(Stamp { config_hash: hash.to_string(), seed }))
}

pub fn write_int_matrix(
    path: &Path,
    stamp: &Stamp,
    values: &[u8],
    rows: usize,
    cols: usize,
) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let mut w = create(path)?;
    writeln!(w, "{}", stamp.line())?;
    for r in 0..rows {
        let line: Vec<String> = values[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| v.to_string())
            .collect();
        writeln!(w, "{}", line.join("\t"))?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// Reads a float matrix written by `write_float_matrix`, or any delimited
/// numeric table with '#' comment lines.
pub fn read_float_matrix(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c| c == '\t' || c == ',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}: line {}: bad number {t:?}", path.display(), lineno + 1))
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                bail!("{}: line {}: ragged row", path.display(), lineno + 1)
            }
            _ => {}
        }
        rows += 1;
        values.extend(row);
    }
    let cols = cols.with_context(|| format!("{}: no data rows", path.display()))?;
    Ok((values, rows, cols))
}

/// Reads a square coupling matrix.
pub fn read_theta(path: &Path) -> Result<ThetaMatrix> {
    let (values, rows, cols) = read_float_matrix(path)?;
    if rows != cols {
        bail!("{}: coupling matrix must be square, got {rows} x {cols}", path.display());
    }
    ThetaMatrix::from_rows(rows, values)
        .with_context(|| format!("{}: invalid coupling matrix", path.display()))
}

const SAMPLE_MAGIC: &[u8; 8] = b"POTFSMP1";
const SAMPLE_VERSION: u64 = 1;

/// Writes every retained sample as little-endian f64, node by node: first
/// the coefficient draws (retained x p), then the selection indicators as
/// 0.0/1.0. The 32-byte header is magic, version, p, retained-per-node.
pub fn write_samples(path: &Path, nodes: &[NodeSamples]) -> Result<()> {
    let p = nodes.len();
    let retained = nodes.first().map_or(0, |n| n.retained);
    if nodes.iter().any(|n| n.retained != retained || n.p != p) {
        bail!("sample stream needs equally sized node chains");
    }
    let mut w = create(path)?;
    w.write_all(SAMPLE_MAGIC)?;
    w.write_all(&SAMPLE_VERSION.to_le_bytes())?;
    w.write_all(&(p as u64).to_le_bytes())?;
    w.write_all(&(retained as u64).to_le_bytes())?;
    for node in nodes {
        for t in 0..retained {
            for v in node.theta_row(t) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for t in 0..retained {
            for d in node.delta_row(t) {
                w.write_all(&(f64::from(u8::from(*d))).to_le_bytes())?;
            }
        }
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// Reads a sample stream back into per-node records. Seeds and kernel
/// diagnostics are not persisted; the returned records carry zeros there.
pub fn read_samples(path: &Path) -> Result<Vec<NodeSamples>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("cannot read {}", path.display()))?;
    if bytes.len() < 32 || &bytes[..8] != SAMPLE_MAGIC {
        bail!("{}: not a sample stream", path.display());
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    if word(8) != SAMPLE_VERSION {
        bail!("{}: unsupported sample stream version {}", path.display(), word(8));
    }
    let p = word(16) as usize;
    let retained = word(24) as usize;
    let expect = 32 + p * retained * p * 2 * 8;
    if bytes.len() != expect {
        bail!(
            "{}: truncated sample stream, {} bytes where {expect} expected",
            path.display(),
            bytes.len()
        );
    }
    let mut off = 32;
    let mut read_block = |len: usize| {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        out
    };
    let mut nodes = Vec::with_capacity(p);
    for r in 0..p {
        let theta = read_block(retained * p);
        let delta: Vec<bool> = read_block(retained * p).iter().map(|&v| v != 0.0).collect();
        nodes.push(
            NodeSamples::from_parts(r, p, 0, theta, delta)
                .with_context(|| format!("{}: node {r} block is invalid", path.display()))?,
        );
    }
    Ok(nodes)
}
