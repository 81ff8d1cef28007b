//! Dataset ingestion: delimited integer tables in, clean DataMatrix out.
//!
//! Pipeline: read rows, apply row filters on raw columns, keep the model
//! columns, shift the origin, then replace missing cells by draws from the
//! column's empirical distribution of observed values. Everything after
//! parsing is deterministic given the imputation seed.

use crate::config::DataBlock;
use anyhow::{bail, Context, Result};
use pottsfit_core::model::DataMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Debug, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub columns_kept: usize,
    /// Missing cells per kept column, counted after filtering.
    pub missing_counts: Vec<usize>,
    pub missing_fractions: Vec<f64>,
    pub imputation_seed: u64,
    /// Per-column observed range after the origin shift.
    pub value_min: Vec<i64>,
    pub value_max: Vec<i64>,
}

/// Splits one line on tabs or commas; single values fall through intact.
fn tokens(line: &str) -> Vec<&str> {
    line.split(|c| c == '\t' || c == ',')
        .map(str::trim)
        .collect()
}

/// Reads a rectangular integer table, skipping '#' comment lines and blank
/// lines. Errors on ragged rows or non-integer cells.
pub fn read_raw_table(path: &Path) -> Result<(Vec<Vec<i64>>, usize)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("ingest: cannot read {}", path.display()))?;
    let mut rows: Vec<Vec<i64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<i64> = tokens(line)
            .iter()
            .map(|t| {
                t.parse::<i64>().with_context(|| {
                    format!("ingest: line {}: not an integer: {t:?}", lineno + 1)
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                bail!(
                    "ingest: line {}: ragged row, {} cells where {} expected",
                    lineno + 1,
                    row.len(),
                    w
                );
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.context("ingest: file holds no data rows")?;
    Ok((rows, width))
}

pub fn ingest(block: &DataBlock, m: usize) -> Result<(DataMatrix, IngestReport)> {
    let (raw, width) = read_raw_table(&block.path)?;
    let rows_read = raw.len();

    for rule in &block.filters {
        if rule.column >= width {
            bail!(
                "ingest: filter column {} out of range for {width}-column file",
                rule.column
            );
        }
    }
    let kept_rows: Vec<&Vec<i64>> = raw
        .iter()
        .filter(|row| block.filters.iter().all(|rule| rule.keeps(row[rule.column])))
        .collect();
    if kept_rows.is_empty() {
        bail!("ingest: no rows remain after filtering");
    }

    let columns: Vec<usize> = match &block.columns {
        Some(cols) => {
            for &c in cols {
                if c >= width {
                    bail!("ingest: selected column {c} out of range for {width}-column file");
                }
            }
            cols.clone()
        }
        None => (0..width).collect(),
    };
    let p = columns.len();
    if p < 2 {
        bail!("ingest: at least two model columns are required, got {p}");
    }

    // Shift first, impute after: missing codes are matched on raw values,
    // observed cells must land in 0..m-1.
    let n = kept_rows.len();
    let mut cells: Vec<Option<u8>> = Vec::with_capacity(n * p);
    let mut missing_counts = vec![0usize; p];
    let mut value_min = vec![i64::MAX; p];
    let mut value_max = vec![i64::MIN; p];
    for row in &kept_rows {
        for (j, &col) in columns.iter().enumerate() {
            let raw_value = row[col];
            if block.missing_code == Some(raw_value) {
                missing_counts[j] += 1;
                cells.push(None);
                continue;
            }
            let shifted = raw_value - block.origin_shift;
            if shifted < 0 || shifted >= m as i64 {
                bail!(
                    "ingest: column {col}: value {raw_value} shifts to {shifted}, outside 0..{}",
                    m - 1
                );
            }
            value_min[j] = value_min[j].min(shifted);
            value_max[j] = value_max[j].max(shifted);
            cells.push(Some(shifted as u8));
        }
    }

    // Observed values per column drive the empirical imputation draws.
    let mut observed: Vec<Vec<u8>> = vec![Vec::new(); p];
    for (idx, cell) in cells.iter().enumerate() {
        if let Some(v) = cell {
            observed[idx % p].push(*v);
        }
    }
    for (j, obs) in observed.iter().enumerate() {
        if obs.is_empty() {
            bail!(
                "ingest: column {} is entirely missing, nothing to impute from",
                columns[j]
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(block.impute_seed);
    let values: Vec<u8> = cells
        .iter()
        .enumerate()
        .map(|(idx, cell)| match cell {
            Some(v) => *v,
            None => {
                let obs = &observed[idx % p];
                obs[rng.gen_range(0..obs.len())]
            }
        })
        .collect();

    let missing_fractions = missing_counts.iter().map(|&c| c as f64 / n as f64).collect();
    let data = DataMatrix::new(n, p, values, m).context("ingest: assembled matrix is invalid")?;
    Ok((
        data,
        IngestReport {
            rows_read,
            rows_kept: n,
            columns_kept: p,
            missing_counts,
            missing_fractions,
            imputation_seed: block.impute_seed,
            value_min,
            value_max,
        },
    ))
}
