//! Dataset persistence: feature/label CSVs plus a provenance manifest.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sha256_hex;

use super::dataset::{LabeledDataset, SplitTag, FEATURES_PER_BUS};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub n_rows: usize,
    pub n_buses: usize,
    pub case_path: String,
    pub case_hash: String,
    pub contingency_hash: String,
    pub safe_rows: usize,
    pub unsafe_rows: usize,
    pub split_counts: [usize; 3],
    /// Wall-clock provenance only; never used by consumers.
    pub created_unix: u64,
}

impl DatasetManifest {
    pub fn new(
        ds: &LabeledDataset,
        seed: u64,
        case_path: &str,
        case_text: &str,
        contingency_text: &str,
    ) -> Self {
        let (safe, unsafe_) = ds.class_counts();
        DatasetManifest {
            seed,
            n_rows: ds.n_rows(),
            n_buses: ds.n_buses,
            case_path: case_path.to_string(),
            case_hash: sha256_hex(case_text.as_bytes()),
            contingency_hash: sha256_hex(contingency_text.as_bytes()),
            safe_rows: safe,
            unsafe_rows: unsafe_,
            split_counts: [
                ds.rows_with_tag(SplitTag::Train).len(),
                ds.rows_with_tag(SplitTag::Val).len(),
                ds.rows_with_tag(SplitTag::Test).len(),
            ],
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Write features.csv, labels.csv, and manifest.json into `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, ds: &LabeledDataset, manifest: &DatasetManifest) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut fw = BufWriter::new(fs::File::create(dir.join("features.csv"))?);
    let w = ds.row_len();
    for row in 0..ds.n_rows() {
        let r = ds.row(row);
        for (c, v) in r.iter().enumerate() {
            if c + 1 == w {
                writeln!(fw, "{}", v)?;
            } else {
                write!(fw, "{},", v)?;
            }
        }
    }
    fw.flush()?;

    let mut lw = BufWriter::new(fs::File::create(dir.join("labels.csv"))?);
    writeln!(lw, "label,split")?;
    for row in 0..ds.n_rows() {
        writeln!(lw, "{},{}", ds.labels[row], ds.tags[row])?;
    }
    lw.flush()?;

    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

/// Read a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<(LabeledDataset, DatasetManifest)> {
    let dir = dir.as_ref();
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;

    let mut features = Vec::with_capacity(manifest.n_rows * manifest.n_buses * FEATURES_PER_BUS);
    for line in BufReader::new(fs::File::open(dir.join("features.csv"))?).lines() {
        for tok in line?.split(',') {
            features.push(
                tok.parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad feature value: {e}")))?,
            );
        }
    }

    let mut labels = Vec::with_capacity(manifest.n_rows);
    let mut tags = Vec::with_capacity(manifest.n_rows);
    for (i, line) in BufReader::new(fs::File::open(dir.join("labels.csv"))?)
        .lines()
        .enumerate()
    {
        let line = line?;
        if i == 0 {
            continue; // header
        }
        let (label, tag) = line
            .split_once(',')
            .ok_or_else(|| Error::InvalidInput(format!("bad labels row: {line:?}")))?;
        labels.push(
            label
                .parse::<u8>()
                .map_err(|e| Error::InvalidInput(format!("bad label: {e}")))?,
        );
        tags.push(tag.parse::<SplitTag>()?);
    }

    let ds = LabeledDataset { n_buses: manifest.n_buses, features, labels, tags };
    if ds.features.len() != ds.n_rows() * ds.row_len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} feature values", ds.n_rows() * ds.row_len()),
            found: format!("{}", ds.features.len()),
        });
    }
    Ok((ds, manifest))
}
