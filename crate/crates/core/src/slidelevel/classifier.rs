use serde::{Deserialize, Serialize};

use super::features::{RegionFeatures, FEATURE_COUNT};
use crate::error::{Error, Result};

/// L2-regularized logistic regression on standardized features, fitted by
/// full-batch gradient descent from zero. No randomness is involved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideClassifierConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for SlideClassifierConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rate: 0.5,
            l2: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideClassifier {
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn train_slide_classifier(
    features: &[RegionFeatures],
    labels: &[usize],
    config: &SlideClassifierConfig,
) -> Result<SlideClassifier> {
    if features.len() != labels.len() {
        return Err(Error::dimension("slide labels", features.len(), labels.len()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::validation("slide labels must be 0 or 1"));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::validation("slide classifier needs both classes in training"));
    }
    let rows: Vec<[f64; FEATURE_COUNT]> = features.iter().map(RegionFeatures::to_array).collect();
    let n = rows.len() as f64;

    let mut mean = vec![0.0; FEATURE_COUNT];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; FEATURE_COUNT];
    for r in &rows {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..FEATURE_COUNT).map(|j| (r[j] - mean[j]) / scale[j]).collect())
        .collect();

    let mut weights = vec![0.0; FEATURE_COUNT];
    let mut bias = 0.0;
    for _ in 0..config.iterations {
        let mut gw = vec![0.0; FEATURE_COUNT];
        let mut gb = 0.0;
        for (x, &y) in z.iter().zip(labels) {
            let p = sigmoid(bias + x.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>());
            let err = p - y as f64;
            for (g, xv) in gw.iter_mut().zip(x) {
                *g += err * xv / n;
            }
            gb += err / n;
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= config.learning_rate * (g + config.l2 * *w);
        }
        bias -= config.learning_rate * gb;
    }
    Ok(SlideClassifier {
        mean,
        scale,
        weights,
        bias,
    })
}

/// Slide tumor probability.
pub fn predict_slide(model: &SlideClassifier, features: &RegionFeatures) -> f64 {
    let x = features.to_array();
    let z = model.bias
        + (0..FEATURE_COUNT)
            .map(|j| model.weights[j] * (x[j] - model.mean[j]) / model.scale[j])
            .sum::<f64>();
    sigmoid(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slidelevel::features::ThresholdSummary;

    fn feat(max_p: f64, area: usize) -> RegionFeatures {
        RegionFeatures {
            low: ThresholdSummary {
                region_count: 1,
                largest_area: area,
                total_area: area,
                largest_mean_probability: 0.7,
                largest_extent: 1.0,
            },
            high: ThresholdSummary::default(),
            max_probability: max_p,
        }
    }

    #[test]
    fn separable_training_set_is_fit() {
        let features: Vec<_> = (0..20).map(|i| feat(i as f64 / 20.0, 3)).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let model = train_slide_classifier(&features, &labels, &SlideClassifierConfig::default()).unwrap();
        for (f, &y) in features.iter().zip(&labels) {
            let p = predict_slide(&model, f);
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(usize::from(p >= 0.5), y);
        }
        let again = train_slide_classifier(&features, &labels, &SlideClassifierConfig::default()).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn single_class_rejected() {
        let features = vec![feat(0.1, 1), feat(0.2, 2)];
        assert!(train_slide_classifier(&features, &[1, 1], &SlideClassifierConfig::default()).is_err());
    }
}
