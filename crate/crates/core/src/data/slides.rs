use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blobs::BlobSampler;
use super::{derive_seed, spec_hash, BlobTaskSpec, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// A cohort of emulated whole slides: a grid of patches per slide, with
/// tumor patches inside planted discs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideSpec {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    /// Probability that a slide carries tumor regions.
    pub tumor_fraction: f64,
    pub max_regions: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Patch feature generator; class 1 is tumor. `samples_per_class` and
    /// `label_noise` are ignored, `hard_fraction` is applied per patch.
    pub patch: BlobTaskSpec,
    #[serde(default)]
    pub seed: u64,
}

impl SlideSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::validation("slide cohort needs count, height and width >= 1"));
        }
        if !(0.0..=1.0).contains(&self.tumor_fraction) {
            return Err(Error::validation("tumor_fraction must lie in [0, 1]"));
        }
        if !(self.radius_min >= 0.0 && self.radius_max >= self.radius_min) {
            return Err(Error::validation("need 0 <= radius_min <= radius_max"));
        }
        if self.patch.classes != 2 {
            return Err(Error::validation("slide patches are binary (normal/tumor)"));
        }
        let mut patch = self.patch.clone();
        patch.samples_per_class = patch.samples_per_class.max(1);
        patch.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TumorRegion {
    pub row: usize,
    pub col: usize,
    pub radius: f64,
}

impl TumorRegion {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let dr = row as f64 - self.row as f64;
        let dc = col as f64 - self.col as f64;
        dr * dr + dc * dc <= self.radius * self.radius
    }
}

/// One emulated slide. `patches` holds one row per grid cell in row-major
/// order and `coords[i]` is the `(row, col)` of patch `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slide {
    pub id: usize,
    pub height: usize,
    pub width: usize,
    pub coords: Vec<(usize, usize)>,
    pub patches: Dataset,
    pub regions: Vec<TumorRegion>,
    /// 1 iff any patch is tumor.
    pub label: usize,
}

impl Slide {
    pub fn tumor_patches(&self) -> usize {
        self.patches.labels.iter().filter(|&&y| y == 1).count()
    }
}

pub fn generate_slides(spec: &SlideSpec) -> Result<Vec<Slide>> {
    spec.validate()?;
    let hash = spec_hash(spec);
    let sampler = BlobSampler::new(&spec.patch);
    let mut slides = Vec::with_capacity(spec.count);
    for id in 0..spec.count {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("slide-{id}")));
        let tumor = spec.max_regions > 0 && rng.random::<f64>() < spec.tumor_fraction;
        let mut regions = Vec::new();
        if tumor {
            let n = rng.random_range(1..=spec.max_regions);
            for _ in 0..n {
                regions.push(TumorRegion {
                    row: rng.random_range(0..spec.height),
                    col: rng.random_range(0..spec.width),
                    radius: rng.random_range(spec.radius_min..=spec.radius_max),
                });
            }
        }

        let cells = spec.height * spec.width;
        let mut coords = Vec::with_capacity(cells);
        let mut labels = Vec::with_capacity(cells);
        let mut hard = Vec::with_capacity(cells);
        let mut features = Vec::with_capacity(cells * spec.patch.dim);
        for r in 0..spec.height {
            for c in 0..spec.width {
                let y = usize::from(regions.iter().any(|g| g.contains(r, c)));
                let is_hard = rng.random::<f64>() < spec.patch.hard_fraction;
                let x = if is_hard {
                    sampler.hard(y, &mut rng)
                } else {
                    sampler.easy(y, &mut rng)
                };
                coords.push((r, c));
                labels.push(y);
                hard.push(is_hard);
                features.extend(x);
            }
        }
        let label = usize::from(labels.contains(&1));
        let patches = Dataset::new(
            Matrix::from_vec(cells, spec.patch.dim, features)?,
            labels,
            (0..cells as u64).map(|i| (id * cells) as u64 + i).collect(),
            2,
            Provenance {
                spec_hash: hash,
                hard,
                flipped: vec![false; cells],
            },
        )?;
        slides.push(Slide {
            id,
            height: spec.height,
            width: spec.width,
            coords,
            patches,
            regions,
            label,
        });
    }
    Ok(slides)
}
