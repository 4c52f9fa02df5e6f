//! Artifact input/output: plot-ready CSV, JSON reports, and a hash manifest
//! that lets any artifact directory be re-validated offline.
//!
//! Floats are written with 17 significant digits
//! ([`defaults::CSV_SIG_DIGITS`]), which round-trips every `f64` exactly, so
//! "re-running a config reproduces all non-timing outputs bit-for-bit" is a
//! checkable statement about files, not a hope about parsers.
//!
//! The manifest (`manifest.json`) maps each artifact file to its SHA-256
//! digest and echoes the producing configuration. Timing lives in a separate
//! unhashed file (`timing.json`) so wall-clock noise never contaminates
//! byte-level reproducibility checks; [`verify_manifest`] skips both special
//! files when re-hashing.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::defaults;
use crate::density::{Density, DensityError};
use crate::grid::{Grid, GridError};
use crate::linfp::{DensityPath, LinfpError, QuantileCurve};
use crate::particles::{ParticleEnsemble, SimulationRecord};

/// Files that are never hashed into the manifest: the manifest itself and
/// the wall-clock record.
pub const UNHASHED_FILES: &[&str] = &["manifest.json", "timing.json"];

/// Errors from artifact reading, writing, and validation.
#[derive(Debug, Error)]
pub enum IoError {
    /// Filesystem operation failed.
    #[error("io error on {path}: {source}")]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failed.
    #[error("json error on {path}: {source}")]
    Json {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: serde_json::Error,
    },

    /// A CSV file did not parse.
    #[error("malformed csv {path}, line {line}: {reason}")]
    MalformedCsv {
        /// Offending path.
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        /// What went wrong.
        reason: String,
    },

    /// A manifest entry's hash does not match the file on disk.
    #[error("hash mismatch for {file}: manifest has {expected}, disk has {actual}")]
    ManifestMismatch {
        /// Relative file name.
        file: String,
        /// Digest recorded in the manifest.
        expected: String,
        /// Digest of the current file content.
        actual: String,
    },

    /// A file listed in the manifest is missing.
    #[error("file {file} is listed in the manifest but missing on disk")]
    MissingFile {
        /// Relative file name.
        file: String,
    },

    /// Reconstructing a grid from CSV data failed.
    #[error(transparent)]
    Grid(#[from] GridError),

    /// Reconstructing a density from CSV data failed.
    #[error(transparent)]
    Density(#[from] DensityError),

    /// Reconstructing a curve from CSV data failed.
    #[error(transparent)]
    Linfp(#[from] LinfpError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Format one float with [`defaults::CSV_SIG_DIGITS`] significant digits
/// (exact `f64` round trip).
#[must_use]
pub fn fmt_f64(v: f64) -> String {
    debug_assert_eq!(defaults::CSV_SIG_DIGITS, 17);
    format!("{v:.16e}")
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64, IoError> {
    field.trim().parse::<f64>().map_err(|e| IoError::MalformedCsv {
        path: path.to_path_buf(),
        line,
        reason: format!("bad float {field:?}: {e}"),
    })
}

/// Read a CSV with an expected header into rows of `width` floats.
fn read_rows(path: &Path, header: &str, width: usize) -> Result<Vec<Vec<f64>>, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(first))) if first.trim() == header => {}
        Some((_, Ok(first))) => {
            return Err(IoError::MalformedCsv {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("expected header {header:?}, got {first:?}"),
            });
        }
        Some((_, Err(source))) => return Err(IoError::Io { path: path.to_path_buf(), source }),
        None => {
            return Err(IoError::MalformedCsv {
                path: path.to_path_buf(),
                line: 1,
                reason: "empty file".to_string(),
            });
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(IoError::MalformedCsv {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("expected {width} columns, got {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(width);
        for field in fields {
            row.push(parse_f64(field, path, idx + 1)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Write a density as `x,u` rows over cell centers.
pub fn write_density_csv(path: &Path, u: &Density) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x,u").map_err(io_err(path))?;
    let grid = u.grid();
    for (j, &v) in u.values().iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(grid.center(j)), fmt_f64(v)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read a density written by [`write_density_csv`], reconstructing the
/// uniform grid from the cell centers.
pub fn read_density_csv(path: &Path) -> Result<Density, IoError> {
    let rows = read_rows(path, "x,u", 2)?;
    if rows.len() < 2 {
        return Err(IoError::MalformedCsv {
            path: path.to_path_buf(),
            line: rows.len() + 1,
            reason: "need at least 2 cells".to_string(),
        });
    }
    let n = rows.len();
    let first = rows[0][0];
    let last = rows[n - 1][0];
    let dx = (last - first) / (n - 1) as f64;
    for (i, row) in rows.iter().enumerate() {
        let expected = first + i as f64 * dx;
        if (row[0] - expected).abs() > 1e-9 * dx.abs().max(1.0) {
            return Err(IoError::MalformedCsv {
                path: path.to_path_buf(),
                line: i + 2,
                reason: format!("cell centers not uniformly spaced at x = {}", row[0]),
            });
        }
    }
    // Recovering the box ends from centers picks up one ulp of noise per
    // arithmetic step; artifact grids are human-chosen round numbers, so
    // snap the ends to 12 significant digits (cell values stay bitwise).
    let snap = |v: f64| -> f64 { format!("{v:.11e}").parse().expect("formatted float") };
    let grid = Grid::new(snap(first - 0.5 * dx), snap(last + 0.5 * dx), n)?;
    let values = rows.iter().map(|r| r[1]).collect();
    Ok(Density::new(grid, values)?)
}

/// Write a quantile curve as `t,omega` rows.
pub fn write_curve_csv(path: &Path, curve: &QuantileCurve) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,omega").map_err(io_err(path))?;
    for (&t, &v) in curve.times().iter().zip(curve.values()) {
        writeln!(w, "{},{}", fmt_f64(t), fmt_f64(v)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read a curve written by [`write_curve_csv`].
pub fn read_curve_csv(path: &Path) -> Result<QuantileCurve, IoError> {
    let rows = read_rows(path, "t,omega", 2)?;
    let times = rows.iter().map(|r| r[0]).collect();
    let values = rows.iter().map(|r| r[1]).collect();
    Ok(QuantileCurve::new(times, values)?)
}

/// Write a solver path in long format: `t,x,u` rows, nodes concatenated.
pub fn write_path_csv(path: &Path, density_path: &DensityPath) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,x,u").map_err(io_err(path))?;
    let grid = density_path.grid();
    for (i, &t) in density_path.times().iter().enumerate() {
        let t_str = fmt_f64(t);
        let node = density_path.node(i);
        for (j, &v) in node.values().iter().enumerate() {
            writeln!(w, "{},{},{}", t_str, fmt_f64(grid.center(j)), fmt_f64(v))
                .map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Write a particle quantile record as `t,q` rows.
pub fn write_record_csv(path: &Path, record: &SimulationRecord) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,q").map_err(io_err(path))?;
    for (&t, &q) in record.times.iter().zip(&record.quantiles) {
        writeln!(w, "{},{}", fmt_f64(t), fmt_f64(q)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Write an ensemble snapshot as one `x` row per particle.
pub fn write_ensemble_csv(path: &Path, ensemble: &ParticleEnsemble) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x").map_err(io_err(path))?;
    for &x in &ensemble.positions {
        writeln!(w, "{}", fmt_f64(x)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Serialize a report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut body = serde_json::to_vec_pretty(value)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    body.push(b'\n');
    fs::write(path, body).map_err(io_err(path))
}

/// Deserialize a JSON artifact.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let body = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&body)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

/// SHA-256 digest of a byte slice, lowercase hex.
#[must_use]
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// SHA-256 digest of a file on disk.
pub fn hash_file(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

/// The top-level run manifest: configuration echo, producing version, and
/// one digest per artifact file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    /// Producing package and version.
    pub created_by: String,
    /// Configuration echo (every number in a report traces back here).
    pub config: serde_json::Value,
    /// Relative artifact path -> SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    /// Start an empty manifest around a configuration echo.
    #[must_use]
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            created_by: format!("quantfp {}", env!("CARGO_PKG_VERSION")),
            config,
            files: BTreeMap::new(),
        }
    }
}

/// Hash every regular file under `dir` (recursively, excluding
/// [`UNHASHED_FILES`]) into a manifest with the given config echo.
pub fn collect_manifest(dir: &Path, config: serde_json::Value) -> Result<Manifest, IoError> {
    let mut manifest = Manifest::new(config);
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current).map_err(io_err(&current))? {
            let entry = entry.map_err(io_err(&current))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path
                .strip_prefix(dir)
                .expect("walk stays under dir")
                .to_string_lossy()
                .replace('\\', "/");
            if UNHASHED_FILES.contains(&rel.as_str()) {
                continue;
            }
            manifest.files.insert(rel, hash_file(&path)?);
        }
    }
    Ok(manifest)
}

/// Write `manifest.json` into `dir`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), IoError> {
    write_json(&dir.join("manifest.json"), manifest)
}

/// Read `dir/manifest.json`.
pub fn read_manifest(dir: &Path) -> Result<Manifest, IoError> {
    read_json(&dir.join("manifest.json"))
}

/// Re-validate an artifact directory offline: every manifest entry must
/// exist and hash to its recorded digest.
pub fn verify_manifest(dir: &Path) -> Result<Manifest, IoError> {
    let manifest = read_manifest(dir)?;
    for (file, expected) in &manifest.files {
        let path = dir.join(file);
        if !path.is_file() {
            return Err(IoError::MissingFile { file: file.clone() });
        }
        let actual = hash_file(&path)?;
        if &actual != expected {
            return Err(IoError::ManifestMismatch {
                file: file.clone(),
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn grid(n: usize) -> Grid {
        Grid::new(-5.0, 5.0, n).unwrap()
    }

    #[test]
    fn density_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let u = Density::gaussian(grid(200), 0.3, 1.1).unwrap();
        write_density_csv(&path, &u).unwrap();
        let back = read_density_csv(&path).unwrap();
        assert_eq!(back.values(), u.values(), "17 significant digits must round-trip");
        assert_eq!(back.grid(), u.grid());
    }

    #[test]
    fn curve_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("omega.csv");
        let times: Vec<f64> = (0..50).map(|i| 0.02 * i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| (t * std::f64::consts::PI).sin()).collect();
        let curve = QuantileCurve::new(times, values).unwrap();
        write_curve_csv(&path, &curve).unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back.times(), curve.times());
        assert_eq!(back.values(), curve.values());
    }

    #[test]
    fn path_csv_lists_every_node_cell_pair() {
        use crate::coeffs::ModelSpec;
        use crate::linfp::{LinearSolver, TimeWindow};

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("path.csv");
        let field = ModelSpec::Brownian { sigma: 1.0 }.build((-5.0, 5.0), (-1.0, 1.0)).unwrap();
        let u0 = Density::gaussian(grid(100), 0.0, 1.0).unwrap();
        let run = LinearSolver::new(field)
            .solve(&u0, &QuantileCurve::constant(0.0).unwrap(), TimeWindow::to(0.01, 1e-3).unwrap())
            .unwrap();
        write_path_csv(&path, &run).unwrap();

        let text = fs::read_to_string(&path).unwrap();
        let rows = text.lines().count();
        assert_eq!(rows, 1 + run.len() * 100);
        assert!(text.starts_with("t,x,u\n"));
    }

    #[test]
    fn malformed_csv_is_reported_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x,u\n1.0,2.0\noops,3.0\n").unwrap();
        let err = read_density_csv(&path).unwrap_err();
        match err {
            IoError::MalformedCsv { line, .. } => assert_eq!(line, 3),
            other => panic!("expected MalformedCsv, got {other}"),
        }

        fs::write(&path, "wrong,header\n1.0,2.0\n").unwrap();
        assert!(matches!(read_density_csv(&path), Err(IoError::MalformedCsv { line: 1, .. })));
    }

    #[test]
    fn manifest_detects_tampering_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x,u\n0.0,1.0\n").unwrap();
        fs::write(dir.path().join("b.json"), "{}\n").unwrap();
        // Timing is never hashed.
        fs::write(dir.path().join("timing.json"), "{\"wall_s\": 1.0}\n").unwrap();

        let manifest = collect_manifest(dir.path(), json!({"kind": "test"})).unwrap();
        assert_eq!(manifest.files.len(), 2);
        write_manifest(dir.path(), &manifest).unwrap();
        verify_manifest(dir.path()).unwrap();

        // Wall-clock noise must not break validation.
        fs::write(dir.path().join("timing.json"), "{\"wall_s\": 9.9}\n").unwrap();
        verify_manifest(dir.path()).unwrap();

        fs::write(dir.path().join("a.csv"), "x,u\n0.0,2.0\n").unwrap();
        assert!(matches!(verify_manifest(dir.path()), Err(IoError::ManifestMismatch { .. })));

        fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert!(matches!(verify_manifest(dir.path()), Err(IoError::MissingFile { .. })));
    }

    #[test]
    fn json_reports_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let mut measured = BTreeMap::new();
        measured.insert("l1_error".to_string(), 2.5e-4);
        write_json(&path, &measured).unwrap();
        let back: BTreeMap<String, f64> = read_json(&path).unwrap();
        assert_eq!(back, measured);
    }

    #[test]
    fn known_digest_for_fixed_bytes() {
        // RFC test vector: sha256("abc").
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
