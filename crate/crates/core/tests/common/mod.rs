//! Independent reference implementations shared by the integration tests.
//! Everything here is written the slow, obvious way on purpose.
#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments, clippy::manual_is_multiple_of)]

use std::collections::BTreeSet;

use hadcl::curriculum::{decide_update_stage1, decide_update_stage2, BatchHardness, Branch};
use hadcl::numcore::{Dense, Matrix, MlpModel};
use rand::Rng;

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Pre-activations of every layer, by triple loop.
pub fn naive_preactivations(model: &MlpModel<f64>, x: &Matrix<f64>) -> Vec<Vec<Vec<f64>>> {
    let mut act: Vec<Vec<f64>> = (0..x.rows()).map(|r| x.row(r).to_vec()).collect();
    let mut out = Vec::new();
    let n = model.layers().len();
    for (li, layer) in model.layers().iter().enumerate() {
        let w = &layer.weights;
        let mut z = vec![vec![0.0; w.rows()]; act.len()];
        for (i, a) in act.iter().enumerate() {
            for o in 0..w.rows() {
                let mut s = layer.bias[o];
                for k in 0..w.cols() {
                    s += a[k] * w.get(o, k);
                }
                z[i][o] = s;
            }
        }
        out.push(z.clone());
        if li + 1 < n {
            act = z.into_iter().map(|r| r.into_iter().map(|v| v.max(0.0)).collect()).collect();
        }
    }
    out
}

pub fn naive_forward(model: &MlpModel<f64>, x: &Matrix<f64>) -> Vec<Vec<f64>> {
    naive_preactivations(model, x).pop().unwrap()
}

/// Cross-entropy through an explicit softmax, no max shift.
pub fn naive_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let denom: f64 = logits.iter().map(|z| z.exp()).sum();
    -(logits[label].exp() / denom).ln()
}

pub fn masked_mean_loss(model: &MlpModel<f64>, x: &Matrix<f64>, y: &[usize], mask: &[usize]) -> f64 {
    let logits = naive_forward(model, x);
    mask.iter().map(|&i| naive_cross_entropy(&logits[i], y[i])).sum::<f64>() / mask.len() as f64
}

/// Copy of `model` with parameter `idx` of flat block `block` shifted by
/// `delta`; blocks run weights, bias, weights, bias, ...
pub fn perturbed(model: &MlpModel<f64>, block: usize, idx: usize, delta: f64) -> MlpModel<f64> {
    let mut layers: Vec<Dense<f64>> = model.layers().to_vec();
    let layer = &mut layers[block / 2];
    if block % 2 == 0 {
        let (r, c) = (layer.weights.rows(), layer.weights.cols());
        let mut w = layer.weights.as_slice().to_vec();
        w[idx] += delta;
        layer.weights = Matrix::from_vec(r, c, w).unwrap();
    } else {
        layer.bias[idx] += delta;
    }
    MlpModel::from_layers(layers).unwrap()
}

/// Central finite differences of the masked mean loss, per parameter block.
pub fn fd_gradient(model: &MlpModel<f64>, x: &Matrix<f64>, y: &[usize], mask: &[usize], h: f64) -> Vec<Vec<f64>> {
    model
        .blocks()
        .iter()
        .enumerate()
        .map(|(b, block)| {
            (0..block.len())
                .map(|i| {
                    let up = masked_mean_loss(&perturbed(model, b, i, h), x, y, mask);
                    let down = masked_mean_loss(&perturbed(model, b, i, -h), x, y, mask);
                    (up - down) / (2.0 * h)
                })
                .collect()
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn norm_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// One random gradient-check draw: random widths, batch, labels and mask.
/// Re-draws inputs whose hidden pre-activations sit within `1e-3` of the
/// ReLU kink, where central differences are not valid. Returns the worst
/// per-tensor norm-relative error.
pub fn gradient_check_draw<R: Rng>(rng: &mut R) -> f64 {
    let d = rng.random_range(2..6);
    let h = rng.random_range(2..7);
    let c = rng.random_range(2..5);
    let b = rng.random_range(1..7);
    let model = MlpModel::<f64>::new(&[d, h, h, c], rng).unwrap();
    let x = loop {
        let x = random_matrix(b, d, 2.0, rng);
        let pre = naive_preactivations(&model, &x);
        let near_kink = pre[..pre.len() - 1]
            .iter()
            .flatten()
            .flatten()
            .any(|z| z.abs() < 1e-3);
        if !near_kink {
            break x;
        }
    };
    let y: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
    let mut mask: Vec<usize> = (0..b).filter(|_| rng.random_bool(0.6)).collect();
    if mask.is_empty() {
        mask.push(rng.random_range(0..b));
    }
    let (grads, _) = model.backward(&x, &y, Some(&mask)).unwrap();
    let numeric = fd_gradient(&model, &x, &y, &mask, 1e-6);
    grads
        .blocks()
        .iter()
        .zip(&numeric)
        .map(|(a, n)| norm_relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Descending order by repeated selection of the largest remaining loss,
/// lowest index first on ties.
pub fn brute_rank(losses: &[f64]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..losses.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for j in 1..left.len() {
            if losses[left[j]] > losses[left[best]] {
                best = j;
            }
        }
        out.push(left.remove(best));
    }
    out
}

/// `max(1, ⌊num·count/den⌋)` in exact integer arithmetic.
pub fn floor_count(num: usize, den: usize, count: usize) -> usize {
    ((num * count) / den).max(1)
}

/// Mann–Whitney AUC by explicit pair counting.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Percentile CI of the pairwise AUC under stratified resampling.
pub fn bootstrap_ci<R: Rng>(scores: &[f64], labels: &[u8], resamples: usize, rng: &mut R) -> (f64, f64) {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(s, _)| *s).collect();
    let mut aucs: Vec<f64> = (0..resamples)
        .map(|_| {
            let p: Vec<f64> = (0..pos.len()).map(|_| pos[rng.random_range(0..pos.len())]).collect();
            let mut n: Vec<f64> = (0..neg.len()).map(|_| neg[rng.random_range(0..neg.len())]).collect();
            n.sort_by(f64::total_cmp);
            // count with binary search: pairs below and ties
            let mut wins = 0.0;
            for s in &p {
                let below = n.partition_point(|v| v < s);
                let upto = n.partition_point(|v| v <= s);
                wins += below as f64 + 0.5 * (upto - below) as f64;
            }
            wins / (p.len() * n.len()) as f64
        })
        .collect();
    aucs.sort_by(f64::total_cmp);
    let at = |q: f64| aucs[((q * resamples as f64).round() as usize).min(resamples - 1)];
    (at(0.025), at(0.975))
}

/// Regions of cells with `p >= tau` under 4-connectivity, by recursive
/// flood fill; each region as a sorted set of raster indices, regions sorted.
pub fn flood_fill_regions(probs: &[f64], height: usize, width: usize, tau: f64) -> Vec<BTreeSet<usize>> {
    fn fill(probs: &[f64], h: usize, w: usize, tau: f64, r: usize, c: usize, seen: &mut [bool], out: &mut BTreeSet<usize>) {
        let i = r * w + c;
        if seen[i] || probs[i] < tau {
            return;
        }
        seen[i] = true;
        out.insert(i);
        if r > 0 {
            fill(probs, h, w, tau, r - 1, c, seen, out);
        }
        if r + 1 < h {
            fill(probs, h, w, tau, r + 1, c, seen, out);
        }
        if c > 0 {
            fill(probs, h, w, tau, r, c - 1, seen, out);
        }
        if c + 1 < w {
            fill(probs, h, w, tau, r, c + 1, seen, out);
        }
    }
    let mut seen = vec![false; probs.len()];
    let mut regions = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let mut region = BTreeSet::new();
            fill(probs, height, width, tau, r, c, &mut seen, &mut region);
            if !region.is_empty() {
                regions.push(region);
            }
        }
    }
    regions.sort();
    regions
}

/// Random grid with blob-like structure: smoothed noise thresholded at
/// varying densities, so both large and tiny regions occur.
pub fn random_grid<R: Rng>(height: usize, width: usize, rng: &mut R) -> Vec<f64> {
    let density: f64 = rng.random_range(0.1..0.9);
    (0..height * width)
        .map(|_| {
            if rng.random_bool(density) {
                rng.random_range(0.5..=1.0)
            } else {
                rng.random_range(0.0..0.5)
            }
        })
        .collect()
}

/// Losses drawn from a coarse grid half the time, so ties are common.
pub fn random_losses<R: Rng>(rng: &mut R, b: usize) -> Vec<f64> {
    if rng.random_bool(0.5) {
        (0..b).map(|_| rng.random_range(0..4) as f64 * 0.5).collect()
    } else {
        (0..b).map(|_| rng.random_range(0.0..3.0)).collect()
    }
}

/// Full brute-force check of one batch; returns a description of the first
/// mismatch.
pub fn check_batch(losses: &[f64], alpha_num: usize, thres: f64) -> Result<(), String> {
    let b = losses.len();
    let alpha = alpha_num as f64 / 100.0;
    let order = brute_rank(losses);
    let k = floor_count(alpha_num, 100, b).min(b);
    let top_k: Vec<usize> = order[..k].to_vec();
    let k_prime = ((thres * k as f64 + 1e-9).floor() as usize).max(1);
    let top_kp: Vec<usize> = top_k[..k_prime].to_vec();
    let sum = |set: &[usize]| {
        let mut s = 0.0;
        for &i in set {
            s += losses[i];
        }
        s
    };

    let h1 = BatchHardness::compute(losses.to_vec(), alpha, None).map_err(|e| e.to_string())?;
    let h2 = BatchHardness::compute(losses.to_vec(), alpha, Some(thres)).map_err(|e| e.to_string())?;
    if h1.order != order || h1.top_k != top_k || h2.top_k_prime.as_deref() != Some(&top_kp[..]) {
        return Err(format!("selection mismatch for {losses:?}"));
    }
    let (total, lk, lkp) = (sum(&order), sum(&top_k), sum(&top_kp));
    if h1.total_loss != total || h1.top_k_loss != lk || h2.top_k_prime_loss != Some(lkp) {
        return Err(format!("sum mismatch for {losses:?}"));
    }
    let d1 = decide_update_stage1(&h1, thres);
    let want1 = if lk > thres * total { Branch::TopK } else { Branch::Total };
    let d2 = decide_update_stage2(&h2, thres).map_err(|e| e.to_string())?;
    let want2 = if lkp > thres * lk { Branch::TopKPrime } else { Branch::TopK };
    if d1.branch != want1 || d2.branch != want2 {
        return Err(format!("decision mismatch for {losses:?} at thres {thres}"));
    }
    Ok(())
}
