//! On-disk datasets: a `manifest.json` plus one text matrix file per entry.
//!
//! Matrix files are UTF-8 text. The first line holds `rows cols`, followed by
//! `rows` lines of `cols` space-separated values written with 17 significant
//! digits, which round-trips every `f64` exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{GridAxis, ParameterPoint, SnapshotMatrix, SolverConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                w.write_all(b" ")?;
            }
            write!(w, "{:.16e}", m[(i, j)])?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::SchemaMismatch(format!("missing matrix file {}", path.display())),
        _ => Error::Io(e),
    })?;
    let mut lines = BufReader::new(file).lines();
    let bad = |msg: String| Error::SchemaMismatch(format!("{}: {msg}", path.display()));
    let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad header `{header}`"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad(format!("header must be `rows cols`, got `{header}`")));
    };
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines.next().ok_or_else(|| bad(format!("expected {rows} rows, found {i}")))??;
        let mut count = 0;
        for (j, tok) in line.split_whitespace().enumerate() {
            if j >= cols {
                return Err(bad(format!("row {i} has more than {cols} values")));
            }
            m[(i, j)] = tok.parse().map_err(|_| bad(format!("bad value `{tok}` in row {i}")))?;
            count += 1;
        }
        if count != cols {
            return Err(bad(format!("row {i} has {count} values, expected {cols}")));
        }
    }
    for line in lines {
        if !line?.trim().is_empty() {
            return Err(bad(format!("trailing data after {rows} rows")));
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub theta: ParameterPoint,
    /// Path of the matrix file relative to the dataset directory.
    pub path: String,
    pub n: usize,
    pub n_t: usize,
    pub split: Split,
}

/// A named parameter grid that contributed entries to the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDescription {
    pub role: String,
    pub axes: Vec<GridAxis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub grids: Vec<GridDescription>,
    pub solver: SolverConfig,
    /// Whether downstream POD should mean-center snapshots.
    pub pod_centering: bool,
}

/// An in-memory dataset: snapshot matrices tagged with their split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<(SnapshotMatrix, Split)>,
    pub grids: Vec<GridDescription>,
    pub solver: SolverConfig,
    pub pod_centering: bool,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<SnapshotMatrix> {
        self.samples.iter().filter(|(_, s)| *s == split).map(|(m, _)| m.clone()).collect()
    }
}

fn check_unique_thetas<'a>(thetas: impl Iterator<Item = &'a ParameterPoint>) -> Result<()> {
    let thetas: Vec<&ParameterPoint> = thetas.collect();
    for (i, a) in thetas.iter().enumerate() {
        if let Some(b) = thetas[..i].iter().find(|b| **b == *a) {
            return Err(Error::SchemaMismatch(format!("duplicate parameter point {b}")));
        }
    }
    Ok(())
}

/// Writes the dataset into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<DatasetManifest> {
    check_unique_thetas(dataset.samples.iter().map(|(m, _)| &m.theta))?;
    fs::create_dir_all(dir)?;
    let width = dataset.samples.len().max(1).to_string().len().max(3);
    let mut entries = Vec::with_capacity(dataset.samples.len());
    for (i, (m, split)) in dataset.samples.iter().enumerate() {
        let rel = format!("snap_{i:0width$}.txt");
        write_matrix(&dir.join(&rel), &m.data)?;
        entries.push(ManifestEntry { theta: m.theta.clone(), path: rel, n: m.n(), n_t: m.n_t(), split: *split });
    }
    let manifest = DatasetManifest {
        entries,
        grids: dataset.grids.clone(),
        solver: dataset.solver.clone(),
        pod_centering: dataset.pod_centering,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = manifest_path(dir);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::SchemaMismatch(format!("no manifest at {}", path.display())),
        _ => Error::Io(e),
    })?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    for e in &manifest.entries {
        e.theta.validate().map_err(|err| Error::SchemaMismatch(err.to_string()))?;
    }
    check_unique_thetas(manifest.entries.iter().map(|e| &e.theta))?;
    Ok(manifest)
}

fn manifest_path(dir: &Path) -> PathBuf {
    if dir.extension().is_some_and(|e| e == "json") {
        dir.to_path_buf()
    } else {
        dir.join(MANIFEST_FILE)
    }
}

/// Reads a dataset given its directory (or the path of its manifest).
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let root = manifest_path(dir).parent().map(Path::to_path_buf).unwrap_or_default();
    let mut samples = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let data = read_matrix(&root.join(&e.path))?;
        if data.nrows() != e.n || data.ncols() != e.n_t {
            return Err(Error::SchemaMismatch(format!(
                "{} is {}x{}, manifest says {}x{}",
                e.path,
                data.nrows(),
                data.ncols(),
                e.n,
                e.n_t
            )));
        }
        let m = SnapshotMatrix::new(e.theta.clone(), data).map_err(|err| Error::SchemaMismatch(err.to_string()))?;
        samples.push((m, e.split));
    }
    Ok(Dataset {
        samples,
        grids: manifest.grids,
        solver: manifest.solver,
        pod_centering: manifest.pod_centering,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: f64, offset: f64) -> SnapshotMatrix {
        let theta = ParameterPoint::new(["d"], vec![v]).unwrap();
        let data = DMatrix::from_fn(4, 3, |i, j| (i as f64 + offset).sin() / (j as f64 + 3.0) + 1e-300);
        SnapshotMatrix::new(theta, data).unwrap()
    }

    fn dataset(samples: Vec<(SnapshotMatrix, Split)>) -> Dataset {
        Dataset { samples, grids: vec![], solver: SolverConfig::default(), pod_centering: false }
    }

    #[test]
    fn write_then_read_reproduces_matrices_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset(vec![(sample(0.01, 0.3), Split::Train), (sample(0.02, 1.7), Split::Test)]);
        write_dataset(dir.path(), &ds).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.samples.len(), 2);
        for ((a, sa), (b, sb)) in ds.samples.iter().zip(&back.samples) {
            assert_eq!(sa, sb);
            assert_eq!(a.theta, b.theta);
            let bits_a: Vec<u64> = a.data.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(back.split(Split::Test).len(), 1);
    }

    #[test]
    fn missing_matrix_file_is_a_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset(vec![(sample(0.01, 0.0), Split::Train), (sample(0.02, 1.0), Split::Train)]);
        let manifest = write_dataset(dir.path(), &ds).unwrap();
        fs::remove_file(dir.path().join(&manifest.entries[1].path)).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn duplicate_parameter_points_are_rejected_at_write_time() {
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset(vec![(sample(0.01, 0.0), Split::Train), (sample(0.01, 1.0), Split::Test)]);
        assert!(matches!(write_dataset(dir.path(), &ds), Err(Error::SchemaMismatch(_))));
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn matrix_header_and_row_lengths_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "2 2\n1 2\n3\n").unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::SchemaMismatch(_))));
        fs::write(&p, "2\n1 2\n").unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::SchemaMismatch(_))));
        fs::write(&p, "1 2\n1 x\n").unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn unknown_manifest_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset(vec![(sample(0.01, 0.0), Split::Train)]);
        write_dataset(dir.path(), &ds).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).unwrap().replacen('{', "{\"extra\": 1,", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::SchemaMismatch(_))));
    }
}
