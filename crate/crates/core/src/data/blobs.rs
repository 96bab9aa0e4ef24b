use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{exact_count, spec_hash, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Gaussian class blobs with a boundary-proximal "hard" stratum and label noise.
///
/// Class `k` is centred at `separation/√2 · e_k + center_shift · 1/√d`, so any
/// two centres are `separation` apart. Easy samples are `centre + spread·N(0, I)`.
/// Hard samples are uniform in the ball of radius `spread` around the
/// midpoint between their own centre and a random other centre, so about half
/// of them fall on the wrong side of the bisecting hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobTaskSpec {
    pub dim: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    pub samples_per_class: usize,
    pub separation: f64,
    pub spread: f64,
    #[serde(default)]
    pub hard_fraction: f64,
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default)]
    pub center_shift: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_classes() -> usize {
    2
}

impl BlobTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::validation("blob task needs at least two classes"));
        }
        if self.dim < self.classes {
            return Err(Error::validation(format!(
                "blob task needs dim >= classes, got dim {} for {} classes",
                self.dim, self.classes
            )));
        }
        if self.samples_per_class == 0 {
            return Err(Error::validation("blob task has zero samples"));
        }
        if !(self.separation > 0.0) || !(self.spread > 0.0) {
            return Err(Error::validation("separation and spread must be positive"));
        }
        for (name, v) in [("hard_fraction", self.hard_fraction), ("label_noise", self.label_noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !self.center_shift.is_finite() {
            return Err(Error::validation("center_shift must be finite"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.classes * self.samples_per_class
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn center(&self, class: usize) -> Vec<f64> {
        let scale = self.separation / std::f64::consts::SQRT_2;
        let offset = self.center_shift / (self.dim as f64).sqrt();
        (0..self.dim)
            .map(|j| offset + if j == class { scale } else { 0.0 })
            .collect()
    }
}

/// Draws individual feature vectors from a [`BlobTaskSpec`].
pub(crate) struct BlobSampler<'a> {
    spec: &'a BlobTaskSpec,
    centers: Vec<Vec<f64>>,
}

impl<'a> BlobSampler<'a> {
    pub fn new(spec: &'a BlobTaskSpec) -> Self {
        let centers = (0..spec.classes).map(|k| spec.center(k)).collect();
        Self { spec, centers }
    }

    pub fn easy<R: Rng>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        self.centers[class]
            .iter()
            .map(|c| c + self.spec.spread * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    pub fn hard<R: Rng>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        let classes = self.spec.classes;
        let mut partner = rng.random_range(0..classes - 1);
        if partner >= class {
            partner += 1;
        }
        let own = &self.centers[class];
        let other = &self.centers[partner];
        let d = self.spec.dim;

        let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let radius = self.spec.spread * rng.random::<f64>().powf(1.0 / d as f64);
        for (j, g) in dir.iter_mut().enumerate() {
            let mid = 0.5 * (own[j] + other[j]);
            *g = mid + radius * *g / norm;
        }
        dir
    }
}

/// Generates the labelled blob dataset described by `spec`.
///
/// Exactly `round(hard_fraction·N)` samples are hard and exactly
/// `round(label_noise·N)` labels are flipped; both sets are recorded in the
/// provenance flags.
pub fn generate_blobs(spec: &BlobTaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.sample_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sampler = BlobSampler::new(spec);

    let hard_n = exact_count(spec.hard_fraction, n);
    let flip_n = exact_count(spec.label_noise, n);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut hard = vec![false; n];
    for &i in &idx[..hard_n] {
        hard[i] = true;
    }
    idx.shuffle(&mut rng);
    let mut flipped = vec![false; n];
    for &i in &idx[..flip_n] {
        flipped[i] = true;
    }

    let mut features = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i / spec.samples_per_class;
        let x = if hard[i] {
            sampler.hard(class, &mut rng)
        } else {
            sampler.easy(class, &mut rng)
        };
        features.extend(x);
        let label = if flipped[i] {
            let mut other = rng.random_range(0..spec.classes - 1);
            if other >= class {
                other += 1;
            }
            other
        } else {
            class
        };
        labels.push(label);
    }

    Dataset::new(
        Matrix::from_vec(n, spec.dim, features)?,
        labels,
        (0..n as u64).collect(),
        spec.classes,
        Provenance {
            spec_hash: spec_hash(spec),
            hard,
            flipped,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BlobTaskSpec {
        BlobTaskSpec {
            dim: 4,
            classes: 2,
            samples_per_class: 500,
            separation: 4.0,
            spread: 1.0,
            hard_fraction: 0.3,
            label_noise: 0.0,
            center_shift: 0.0,
            seed: 9,
        }
    }

    #[test]
    fn hard_stratum_count_is_exact() {
        let ds = generate_blobs(&spec()).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.provenance.hard.iter().filter(|&&h| h).count(), 300);
    }

    #[test]
    fn hard_samples_straddle_the_midpoint() {
        let s = spec();
        let ds = generate_blobs(&s).unwrap();
        let (c0, c1) = (s.center(0), s.center(1));
        let mut wrong_side = 0;
        for i in (0..ds.len()).filter(|&i| ds.provenance.hard[i]) {
            let x = ds.features.row(i);
            let dist2: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| (v - 0.5 * (c0[j] + c1[j])).powi(2))
                .sum();
            assert!(dist2.sqrt() <= s.spread + 1e-12);
            let side: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| (v - 0.5 * (c0[j] + c1[j])) * (c0[j] - c1[j]))
                .sum();
            let class = i / s.samples_per_class;
            if (class == 0) != (side >= 0.0) {
                wrong_side += 1;
            }
        }
        // Binomial(300, 1/2): 150 ± 26 at ~3σ.
        assert!((124..=176).contains(&wrong_side), "{wrong_side}");
    }

    #[test]
    fn generation_is_pure() {
        let a = generate_blobs(&spec()).unwrap();
        let b = generate_blobs(&spec()).unwrap();
        assert_eq!(a, b);
        let c = generate_blobs(&spec().with_seed(10)).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn full_label_noise_flips_every_binary_label() {
        let s = BlobTaskSpec {
            label_noise: 1.0,
            ..spec()
        };
        let ds = generate_blobs(&s).unwrap();
        for (i, &y) in ds.labels.iter().enumerate() {
            assert_eq!(y, 1 - i / s.samples_per_class);
        }
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let s = BlobTaskSpec {
            samples_per_class: 0,
            ..spec()
        };
        assert!(matches!(generate_blobs(&s), Err(Error::Validation(_))));
        let s = BlobTaskSpec { dim: 1, ..spec() };
        assert!(generate_blobs(&s).is_err());
        let s = BlobTaskSpec {
            hard_fraction: 1.5,
            ..spec()
        };
        assert!(generate_blobs(&s).is_err());
    }
}
