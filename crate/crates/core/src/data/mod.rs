//! Seeded synthetic tasks: class blobs with hardness strata, domain shift,
//! whole-slide emulation, and the binary dataset format.

mod blobs;
mod io;
mod shift;
mod slides;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use blobs::{generate_blobs, BlobTaskSpec};
pub use io::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, write_text_export};
pub use shift::{apply_domain_shift, DomainShiftSpec};
pub use slides::{generate_slides, Slide, SlideSpec, TumorRegion};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub type SpecHash = [u8; 32];

/// Generator metadata carried alongside a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub spec_hash: SpecHash,
    /// Sample was drawn from the boundary-proximal stratum.
    pub hard: Vec<bool>,
    /// Sample label was flipped by label noise.
    pub flipped: Vec<bool>,
}

/// Labelled feature vectors with stable ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix<f64>,
    pub labels: Vec<usize>,
    pub ids: Vec<u64>,
    pub classes: usize,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        features: Matrix<f64>,
        labels: Vec<usize>,
        ids: Vec<u64>,
        classes: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::validation("dataset is empty"));
        }
        for (what, len) in [
            ("labels", labels.len()),
            ("ids", ids.len()),
            ("hard flags", provenance.hard.len()),
            ("flip flags", provenance.flipped.len()),
        ] {
            if len != n {
                return Err(Error::Dimension {
                    context: what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::validation(format!("label {bad} out of range for {classes} classes")));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("dataset ids are not unique"));
        }
        Ok(Self {
            features,
            labels,
            ids,
            classes,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows `indices` (in that order) as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pick = |v: &[bool]| indices.iter().map(|&i| v[i]).collect();
        Dataset::new(
            self.features.select_rows(indices)?,
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.ids[i]).collect(),
            self.classes,
            Provenance {
                spec_hash: self.provenance.spec_hash,
                hard: pick(&self.provenance.hard),
                flipped: pick(&self.provenance.flipped),
            },
        )
    }

    /// Stacks datasets with the same width and class count. Ids are
    /// renumbered `0..N` because the parts may have overlapping ids.
    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::validation("nothing to concatenate"))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut hard = Vec::new();
        let mut flipped = Vec::new();
        let mut hasher = Sha256::new();
        for p in parts {
            if p.dim() != first.dim() || p.classes != first.classes {
                return Err(Error::validation("concatenated datasets disagree on shape"));
            }
            features.extend_from_slice(p.features.as_slice());
            labels.extend_from_slice(&p.labels);
            hard.extend_from_slice(&p.provenance.hard);
            flipped.extend_from_slice(&p.provenance.flipped);
            hasher.update(p.provenance.spec_hash);
        }
        let n = labels.len();
        Dataset::new(
            Matrix::from_vec(n, first.dim(), features)?,
            labels,
            (0..n as u64).collect(),
            first.classes,
            Provenance {
                spec_hash: hasher.finalize().into(),
                hard,
                flipped,
            },
        )
    }
}

/// SHA-256 of the JSON form of a generator spec.
pub fn spec_hash<S: Serialize>(spec: &S) -> SpecHash {
    let json = serde_json::to_vec(spec).expect("specs serialize");
    Sha256::digest(&json).into()
}

/// Independent 64-bit seed for a named sub-stream of `seed`.
pub fn derive_seed(seed: u64, salt: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(salt.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// `round(fraction × n)`: the exact size of a generated stratum.
pub(crate) fn exact_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}
