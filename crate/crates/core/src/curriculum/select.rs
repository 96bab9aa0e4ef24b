use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Slack added before flooring `fraction × count`, so that e.g. `0.29 × 100`
/// yields 29 despite binary rounding of the product.
const FLOOR_SLACK: f64 = 1e-9;

/// `max(1, ⌊fraction × count⌋)`, capped at `count`.
pub fn hard_count(fraction: f64, count: usize) -> usize {
    let raw = (fraction * count as f64 + FLOOR_SLACK).floor();
    (raw.max(1.0) as usize).min(count.max(1))
}

/// Indices sorted by descending loss; ties keep their original order.
pub fn rank_by_loss<T: Scalar>(losses: &[T]) -> Result<Vec<usize>> {
    if losses.is_empty() {
        return Err(Error::validation("cannot rank an empty batch"));
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(Error::Numeric(format!("loss of sample {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&i, &j| losses[j].partial_cmp(&losses[i]).expect("finite losses"));
    Ok(order)
}

/// The `K = max(1, ⌊α·B⌋)` hardest samples: a prefix of the ranking.
pub fn select_top_k(order: &[usize], alpha: f64) -> Vec<usize> {
    order[..hard_count(alpha, order.len())].to_vec()
}

/// The `K′ = max(1, ⌊thres·K⌋)` hardest samples of the top-K set.
pub fn select_top_k_prime(top_k: &[usize], thres: f64) -> Vec<usize> {
    top_k[..hard_count(thres, top_k.len())].to_vec()
}

/// Per-sample losses of one mini-batch, their ranking and the hard subsets.
///
/// All loss sums are prefix sums along the descending ranking, which makes
/// `top_k_prime_loss <= top_k_loss <= total_loss` hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchHardness<T> {
    pub losses: Vec<T>,
    pub order: Vec<usize>,
    pub top_k: Vec<usize>,
    pub top_k_prime: Option<Vec<usize>>,
    pub total_loss: T,
    pub top_k_loss: T,
    pub top_k_prime_loss: Option<T>,
}

impl<T: Scalar> BatchHardness<T> {
    /// Ranks `losses` and extracts the top-K set; when `thres` is given the
    /// nested top-K′ set is extracted as well.
    pub fn compute(losses: Vec<T>, alpha: f64, thres: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::validation(format!("hard fraction must lie in (0, 1], got {alpha}")));
        }
        let order = rank_by_loss(&losses)?;
        let top_k = select_top_k(&order, alpha);
        let top_k_prime = thres.map(|t| select_top_k_prime(&top_k, t));

        let mut running = T::zero();
        let mut prefix = Vec::with_capacity(order.len());
        for &i in &order {
            running += losses[i];
            prefix.push(running);
        }
        let top_k_loss = prefix[top_k.len() - 1];
        let top_k_prime_loss = top_k_prime.as_ref().map(|d| prefix[d.len() - 1]);
        Ok(Self {
            total_loss: running,
            top_k_loss,
            top_k_prime_loss,
            losses,
            order,
            top_k,
            top_k_prime,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.losses.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Update on every sample of the batch.
    Total,
    /// Update on the top-K hard samples.
    TopK,
    /// Update on the top-K′ very-hard samples.
    TopKPrime,
    /// Update on a control subset (random or easiest samples).
    Control,
}

/// Outcome of one update condition, with the two sides that were compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDecision {
    pub branch: Branch,
    pub thres: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl UpdateDecision {
    pub fn hard_branch_taken(&self) -> bool {
        self.lhs > self.rhs
    }
}

/// Curriculum-I: the top-K samples are used when their loss sum exceeds
/// `thres` times the loss of the whole batch.
pub fn decide_update_stage1<T: Scalar>(h: &BatchHardness<T>, thres: f64) -> UpdateDecision {
    let lhs = h.top_k_loss;
    let rhs = T::of(thres) * h.total_loss;
    UpdateDecision {
        branch: if lhs > rhs { Branch::TopK } else { Branch::Total },
        thres,
        lhs: lhs.as_f64(),
        rhs: rhs.as_f64(),
    }
}

/// Curriculum-II: the top-K′ samples are used when their loss sum exceeds
/// `thres` times the top-K loss; otherwise the top-K set is used.
pub fn decide_update_stage2<T: Scalar>(h: &BatchHardness<T>, thres: f64) -> Result<UpdateDecision> {
    let lhs = h
        .top_k_prime_loss
        .ok_or_else(|| Error::validation("top-K′ set was not computed for this batch"))?;
    let rhs = T::of(thres) * h.top_k_loss;
    Ok(UpdateDecision {
        branch: if lhs > rhs { Branch::TopKPrime } else { Branch::TopK },
        thres,
        lhs: lhs.as_f64(),
        rhs: rhs.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_by_loss(&[0.2, 0.9, 0.5]).unwrap(), vec![1, 2, 0]);
        assert_eq!(rank_by_loss(&[0.5, 0.5]).unwrap(), vec![0, 1]);
        assert!(matches!(rank_by_loss(&[0.1, f64::NAN]), Err(Error::Numeric(_))));
        assert!(rank_by_loss::<f64>(&[]).is_err());
    }

    #[test]
    fn top_k_counts() {
        assert_eq!(hard_count(0.10, 512), 51);
        assert_eq!(hard_count(0.25, 4), 1);
        assert_eq!(hard_count(0.10, 32), 3);
        assert_eq!(hard_count(0.9, 51), 45);
        assert_eq!(hard_count(0.2, 3), 1);
        assert_eq!(hard_count(0.55, 10), 5);
        assert_eq!(hard_count(0.29, 100), 29);
        assert_eq!(hard_count(1.0, 7), 7);
    }

    #[test]
    fn stage1_examples() {
        let h = BatchHardness::compute(vec![3.0, 1.0, 0.5, 0.5], 0.25, None).unwrap();
        assert_eq!(h.top_k, vec![0]);
        let d = decide_update_stage1(&h, 0.5);
        assert_eq!(d.branch, Branch::TopK);
        assert_eq!((d.lhs, d.rhs), (3.0, 2.5));

        let h = BatchHardness::compute(vec![1.0, 1.0, 1.0, 1.0], 0.25, None).unwrap();
        assert_eq!(decide_update_stage1(&h, 0.5).branch, Branch::Total);
    }

    #[test]
    fn stage2_examples() {
        // top-K set is the whole batch here; K′ = ⌊0.5·3⌋ = 1
        let h = BatchHardness::compute(vec![0.1, 2.0, 0.1], 1.0, Some(0.5)).unwrap();
        assert_eq!(h.top_k_prime.as_deref(), Some(&[1usize][..]));
        let d = decide_update_stage2(&h, 0.5).unwrap();
        assert_eq!(d.branch, Branch::TopKPrime);
        assert!((d.rhs - 1.1).abs() < 1e-15);

        let h = BatchHardness::compute(vec![1.0, 1.0], 1.0, Some(0.9)).unwrap();
        assert_eq!(h.top_k_prime.as_ref().unwrap().len(), 1);
        assert_eq!(decide_update_stage2(&h, 0.9).unwrap().branch, Branch::TopK);

        let no_prime = BatchHardness::compute(vec![1.0, 1.0], 1.0, None).unwrap();
        assert!(decide_update_stage2(&no_prime, 0.9).is_err());
    }

    #[test]
    fn all_zero_losses_take_total_branch() {
        let h = BatchHardness::compute(vec![0.0; 5], 0.2, None).unwrap();
        assert_eq!(decide_update_stage1(&h, 0.3).branch, Branch::Total);
    }

    #[test]
    fn alpha_must_be_in_unit_interval() {
        assert!(BatchHardness::compute(vec![1.0], 0.0, None).is_err());
        assert!(BatchHardness::compute(vec![1.0], 1.5, None).is_err());
    }
}
