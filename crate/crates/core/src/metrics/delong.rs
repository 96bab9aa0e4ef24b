//! DeLong's nonparametric AUC variance via placement values, computed from
//! mid-ranks in `O(n log n)`.

use serde::{Deserialize, Serialize};

use super::auc::{midranks, ScoredOutcomes};
use crate::error::{Error, Result};

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucEstimate {
    pub auc: f64,
    pub variance: f64,
    /// Normal-approximation 95% interval, clipped to `[0, 1]`.
    pub ci95: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedAucTest {
    pub auc_a: f64,
    pub auc_b: f64,
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// AUC plus the placement values of every positive (fraction of negatives
/// it beats) and every negative (fraction of positives that beat it).
struct Placements {
    auc: f64,
    positive: Vec<f64>,
    negative: Vec<f64>,
}

fn placements(outcomes: &ScoredOutcomes) -> Placements {
    let (pos, neg) = outcomes.split();
    let (m, n) = (pos.len(), neg.len());
    let combined: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    let all = midranks(&combined);
    let within_pos = midranks(&pos);
    let within_neg = midranks(&neg);

    let positive: Vec<f64> = (0..m).map(|i| (all[i] - within_pos[i]) / n as f64).collect();
    let negative: Vec<f64> = (0..n)
        .map(|j| 1.0 - (all[m + j] - within_neg[j]) / m as f64)
        .collect();
    let auc = positive.iter().sum::<f64>() / m as f64;
    Placements {
        auc,
        positive,
        negative,
    }
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1.0)
}

fn variance_of(p: &Placements) -> f64 {
    covariance(&p.positive, &p.positive) / p.positive.len() as f64
        + covariance(&p.negative, &p.negative) / p.negative.len() as f64
}

/// AUC with DeLong variance and a `±1.96σ` interval.
pub fn delong_ci(outcomes: &ScoredOutcomes) -> Result<AucEstimate> {
    outcomes.require_classes(2)?;
    let p = placements(outcomes);
    let variance = variance_of(&p).max(0.0);
    let half = Z_95 * variance.sqrt();
    Ok(AucEstimate {
        auc: p.auc,
        variance,
        ci95: ((p.auc - half).max(0.0), (p.auc + half).min(1.0)),
    })
}

/// Paired DeLong test of `AUC_a = AUC_b` for two scorings of the same cases.
pub fn delong_paired_test(a: &ScoredOutcomes, b: &ScoredOutcomes) -> Result<PairedAucTest> {
    if a.labels() != b.labels() {
        return Err(Error::validation("paired AUC test needs identical labels in identical order"));
    }
    a.require_classes(2)?;
    let pa = placements(a);
    let pb = placements(b);
    let m = pa.positive.len() as f64;
    let n = pa.negative.len() as f64;
    let var_diff = variance_of(&pa) + variance_of(&pb)
        - 2.0
            * (covariance(&pa.positive, &pb.positive) / m
                + covariance(&pa.negative, &pb.negative) / n);
    let diff = pa.auc - pb.auc;
    let (z, p_value) = if diff == 0.0 {
        (0.0, 1.0)
    } else if var_diff <= 0.0 {
        (f64::INFINITY.copysign(diff), 0.0)
    } else {
        let z = diff / var_diff.sqrt();
        (z, libm::erfc(z.abs() / std::f64::consts::SQRT_2))
    };
    Ok(PairedAucTest {
        auc_a: pa.auc,
        auc_b: pb.auc,
        z,
        p_value,
    })
}
