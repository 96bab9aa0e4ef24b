use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Feature-space distribution shift `x ↦ R·(s·x) + ε`.
///
/// `R` rotates the plane of the first two features by `rotation_degrees`,
/// `s` is `scale`, and `ε ~ N(0, noise²·I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainShiftSpec {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub rotation_degrees: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl Default for DomainShiftSpec {
    fn default() -> Self {
        Self {
            scale: 1.0,
            noise: 0.0,
            rotation_degrees: 0.0,
            seed: 0,
        }
    }
}

impl DomainShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::validation("shift scale must be positive"));
        }
        if !(self.noise >= 0.0) || !self.rotation_degrees.is_finite() {
            return Err(Error::validation("shift noise must be >= 0 and rotation finite"));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.noise == 0.0 && self.rotation_degrees == 0.0
    }
}

pub fn apply_domain_shift(ds: &Dataset, shift: &DomainShiftSpec) -> Result<Dataset> {
    shift.validate()?;
    let d = ds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(shift.seed);
    let (sin, cos) = shift.rotation_degrees.to_radians().sin_cos();
    let rotate = d >= 2 && shift.rotation_degrees != 0.0;

    let mut out = Vec::with_capacity(ds.features.as_slice().len());
    for r in 0..ds.len() {
        let mut x: Vec<f64> = ds.features.row(r).iter().map(|v| shift.scale * v).collect();
        if rotate {
            let (x0, x1) = (x[0], x[1]);
            x[0] = cos * x0 - sin * x1;
            x[1] = sin * x0 + cos * x1;
        }
        if shift.noise > 0.0 {
            for v in &mut x {
                *v += shift.noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        out.extend(x);
    }

    let mut h = Sha256::new();
    h.update(ds.provenance.spec_hash);
    h.update(serde_json::to_vec(shift).expect("shift serializes"));
    Dataset::new(
        Matrix::from_vec(ds.len(), d, out)?,
        ds.labels.clone(),
        ds.ids.clone(),
        ds.classes,
        Provenance {
            spec_hash: h.finalize().into(),
            hard: ds.provenance.hard.clone(),
            flipped: ds.provenance.flipped.clone(),
        },
    )
}
