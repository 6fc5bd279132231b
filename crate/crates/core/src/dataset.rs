//! Calibration data containers: load paths of (F, d0_hat, P_hat, e0_hat)
//! tuples. Independent of how the rows were produced (analytic potential,
//! laminate homogenization, or file input).

use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Vec3};
use std::collections::HashSet;

/// One calibration tuple in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub f: Tensor2,
    pub d0: Vec3,
    pub p: Tensor2,
    pub e0: Vec3,
}

/// One load path: an identified sequence of rows sharing a loss weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadPath {
    pub id: String,
    pub rows: Vec<Row>,
}

/// A list of load paths; the unit consumed and produced by every generator,
/// trainer and file format in this crate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub paths: Vec<LoadPath>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.paths.iter().map(|p| p.rows.len()).sum()
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.paths.iter().flat_map(|p| p.rows.iter())
    }

    /// Enforce the container invariants: unique non-empty path ids, no empty
    /// paths, every deformation gradient in GL+(3), finite entries.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for path in &self.paths {
            if path.id.is_empty() {
                return Err(Error::InvalidDataset("empty path id".into()));
            }
            if !seen.insert(path.id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate path id '{}'",
                    path.id
                )));
            }
            if path.rows.is_empty() {
                return Err(Error::InvalidDataset(format!(
                    "path '{}' has no rows",
                    path.id
                )));
            }
            for (k, row) in path.rows.iter().enumerate() {
                let det = row.f.det();
                if !(det > 0.0) {
                    return Err(Error::InvalidDataset(format!(
                        "path '{}' row {} has det F = {}",
                        path.id, k, det
                    )));
                }
                if !(row.f.is_finite()
                    && row.d0.is_finite()
                    && row.p.is_finite()
                    && row.e0.is_finite())
                {
                    return Err(Error::InvalidDataset(format!(
                        "path '{}' row {} has non-finite entries",
                        path.id, k
                    )));
                }
            }
        }
        Ok(())
    }
}
