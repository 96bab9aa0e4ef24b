use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cross-entropy of each row of `logits` against its label.
///
/// Computed as `(max − z_y) + ln Σ exp(z − max)`; both terms are
/// non-negative in floating point, so every loss is `>= 0`.
pub fn per_sample_cross_entropy<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<Vec<T>> {
    if labels.len() != logits.rows() {
        return Err(Error::dimension("labels", logits.rows(), labels.len()));
    }
    let classes = logits.cols();
    labels
        .iter()
        .enumerate()
        .map(|(r, &y)| {
            if y >= classes {
                return Err(Error::validation(format!(
                    "label {y} out of range for {classes} classes"
                )));
            }
            let row = logits.row(r);
            let max = row_max(row);
            let sum: T = row.iter().map(|&z| (z - max).exp()).sum();
            Ok((max - row[y]) + sum.ln())
        })
        .collect()
}

/// Row-wise softmax with the max shift.
pub fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let classes = logits.cols();
    let mut data = Vec::with_capacity(logits.as_slice().len());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row_max(row);
        let exps: Vec<T> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        data.extend(exps.into_iter().map(|e| e / sum));
    }
    Matrix::from_vec(logits.rows(), classes, data).expect("softmax keeps shape and finiteness")
}

fn row_max<T: Scalar>(row: &[T]) -> T {
    row.iter().copied().fold(T::neg_infinity(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln2() {
        let logits = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let losses = per_sample_cross_entropy(&logits, &[0, 1]).unwrap();
        for l in losses {
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let logits = Matrix::<f64>::from_rows(&[vec![1000.0, -1000.0]]).unwrap();
        let losses = per_sample_cross_entropy(&logits, &[0]).unwrap();
        assert!(losses[0] >= 0.0 && losses[0] < 1e-300);
        let wrong = per_sample_cross_entropy(&logits, &[1]).unwrap();
        assert!((wrong[0] - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_label() {
        let logits = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            per_sample_cross_entropy(&logits, &[2]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Matrix::from_rows(&[vec![3.0, -1.0, 0.5], vec![-700.0, 700.0, 0.0]]).unwrap();
        let p = softmax_rows(&logits);
        for r in 0..2 {
            let s: f64 = p.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
