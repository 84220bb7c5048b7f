//! Feature matrices on a 6-hour sample grid, with a self-describing binary
//! file format.
//!
//! Layout (little endian): magic `EVFM`, version u16, rows u64, cols u64,
//! start epoch seconds i64, step seconds u64, then `rows * cols` raw f64
//! values in row-major order. Raw values round-trip bit-exactly; the
//! in-memory matrix additionally carries a per-feature min-max normalized
//! copy for training.

use std::fs;
use std::io::Write;
use std::path::Path;

use evitrans_core::Matrix;

use crate::error::{AppError, Result};

const MAGIC: &[u8; 4] = b"EVFM";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8 + 8 + 8;
pub const SECONDS_PER_SAMPLE_STEP: u64 = 21_600;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SAMPLES_PER_DAY: usize = 4;

/// N x D feature rows on a strict 6-hour grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    raw: Matrix,
    normalized: Matrix,
    feature_min: Vec<f64>,
    feature_range: Vec<f64>,
    start_epoch_secs: i64,
    step_secs: u64,
}

impl FeatureMatrix {
    /// Validates the grid and computes the per-feature normalization.
    pub fn new(raw: Matrix, start_epoch_secs: i64, step_secs: u64) -> Result<Self> {
        if raw.rows() == 0 || raw.cols() == 0 {
            return Err(AppError::Data("empty feature matrix".into()));
        }
        if step_secs == 0 || step_secs % SECONDS_PER_SAMPLE_STEP != 0 {
            return Err(AppError::Data(format!(
                "timestamp step of {step_secs}s is not a positive multiple of 6 hours"
            )));
        }
        let cols = raw.cols();
        let mut feature_min = vec![f64::INFINITY; cols];
        let mut feature_max = vec![f64::NEG_INFINITY; cols];
        for i in 0..raw.rows() {
            for (j, &v) in raw.row(i).iter().enumerate() {
                feature_min[j] = feature_min[j].min(v);
                feature_max[j] = feature_max[j].max(v);
            }
        }
        let feature_range: Vec<f64> = feature_min
            .iter()
            .zip(&feature_max)
            .map(|(lo, hi)| hi - lo)
            .collect();
        let normalized = Matrix::from_fn(raw.rows(), cols, |i, j| {
            if feature_range[j] > 0.0 {
                (raw.get(i, j) - feature_min[j]) / feature_range[j]
            } else {
                0.0
            }
        });
        Ok(Self {
            raw,
            normalized,
            feature_min,
            feature_range,
            start_epoch_secs,
            step_secs,
        })
    }

    pub fn rows(&self) -> usize {
        self.raw.rows()
    }

    pub fn dim(&self) -> usize {
        self.raw.cols()
    }

    pub fn raw(&self) -> &Matrix {
        &self.raw
    }

    /// Per-feature min-max normalized values in [0, 1].
    pub fn normalized(&self) -> &Matrix {
        &self.normalized
    }

    pub fn normalization(&self) -> (&[f64], &[f64]) {
        (&self.feature_min, &self.feature_range)
    }

    pub fn start_epoch_secs(&self) -> i64 {
        self.start_epoch_secs
    }

    pub fn step_secs(&self) -> u64 {
        self.step_secs
    }

    pub fn timestamp_secs(&self, row: usize) -> i64 {
        self.start_epoch_secs + row as i64 * self.step_secs as i64
    }

    /// Calendar day of a sample as days since the Unix epoch (UTC).
    pub fn epoch_day(&self, row: usize) -> i64 {
        self.timestamp_secs(row).div_euclid(SECONDS_PER_DAY)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(HEADER_LEN + self.raw.as_slice().len() * 8);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.raw.rows() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.raw.cols() as u64).to_le_bytes());
        bytes.extend_from_slice(&self.start_epoch_secs.to_le_bytes());
        bytes.extend_from_slice(&self.step_secs.to_le_bytes());
        for v in self.raw.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < HEADER_LEN {
            return Err(AppError::Data(format!(
                "{}: file too short for a feature header",
                path.display()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(AppError::Data(format!(
                "{}: bad magic, not a feature file",
                path.display()
            )));
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().expect("sized"));
        if version != VERSION {
            return Err(AppError::Data(format!(
                "{}: unsupported feature file version {version}",
                path.display()
            )));
        }
        let rows = u64::from_le_bytes(bytes[6..14].try_into().expect("sized")) as usize;
        let cols = u64::from_le_bytes(bytes[14..22].try_into().expect("sized")) as usize;
        let start_epoch_secs = i64::from_le_bytes(bytes[22..30].try_into().expect("sized"));
        let step_secs = u64::from_le_bytes(bytes[30..38].try_into().expect("sized"));
        let expected = HEADER_LEN + rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(
            || AppError::Data(format!("{}: header declares an absurd size", path.display())),
        )?;
        if bytes.len() != expected {
            return Err(AppError::Data(format!(
                "{}: expected {expected} bytes for {rows}x{cols}, found {}",
                path.display(),
                bytes.len()
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for chunk in bytes[HEADER_LEN..].chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().expect("sized")));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(AppError::Data(format!(
                "{}: non-finite value at row {} column {}",
                path.display(),
                idx / cols,
                idx % cols
            )));
        }
        let raw = Matrix::from_vec(rows, cols, data)
            .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        Self::new(raw, start_epoch_secs, step_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use evitrans_core::rng::Rng;
    use tempfile::tempdir;

    fn sample_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.uniform_in(-5.0, 12.0))
    }

    #[test]
    fn small_file_round_trips_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("features.evfm");
        let fm = FeatureMatrix::new(sample_matrix(8, 4, 1), 86_400, 21_600).unwrap();
        fm.save(&path).unwrap();
        let loaded = FeatureMatrix::load(&path).unwrap();
        assert_eq!(loaded, fm);
        assert_eq!(loaded.rows(), 8);
        assert_eq!(loaded.dim(), 4);
        // Byte-for-byte stable on re-save.
        let path2 = dir.path().join("again.evfm");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn normalization_is_per_feature_min_max() {
        let raw = Matrix::from_vec(3, 2, vec![0.0, 5.0, 10.0, 5.0, 5.0, 5.0]).unwrap();
        let fm = FeatureMatrix::new(raw, 0, 21_600).unwrap();
        let n = fm.normalized();
        assert_eq!(n.get(0, 0), 0.0);
        assert_eq!(n.get(1, 0), 1.0);
        assert_eq!(n.get(2, 0), 0.5);
        // Constant feature normalizes to zero.
        assert!(n.row(0).iter().skip(1).all(|&v| v == 0.0));
    }

    #[test]
    fn five_hour_step_is_rejected() {
        let err = FeatureMatrix::new(sample_matrix(4, 2, 2), 0, 18_000).unwrap_err();
        assert!(matches!(err, AppError::Data(_)));
    }

    #[test]
    fn timestamps_follow_the_grid() {
        let fm = FeatureMatrix::new(sample_matrix(8, 2, 3), 86_400, 21_600).unwrap();
        assert_eq!(fm.timestamp_secs(0), 86_400);
        assert_eq!(fm.timestamp_secs(4), 86_400 + 4 * 21_600);
        assert_eq!(fm.epoch_day(0), 1);
        assert_eq!(fm.epoch_day(3), 1);
        assert_eq!(fm.epoch_day(4), 2);
    }

    #[test]
    fn nan_payload_is_rejected_with_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.evfm");
        let fm = FeatureMatrix::new(sample_matrix(3, 2, 4), 0, 21_600).unwrap();
        fm.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let offset = 38 + 8 * 3; // row 1, column 1
        bytes[offset..offset + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = FeatureMatrix::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn truncated_and_corrupt_headers_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.evfm");
        std::fs::write(&path, b"EV").unwrap();
        assert!(FeatureMatrix::load(&path).is_err());
        std::fs::write(&path, vec![0u8; 64]).unwrap();
        assert!(FeatureMatrix::load(&path).is_err());
    }
}
