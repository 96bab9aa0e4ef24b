use rand::Rng;

use super::loss::{per_sample_cross_entropy, softmax_rows};
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fully connected layer; `weights` is `out × in`, so `z = W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![T::zero(); outputs],
        }
    }

    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| T::of(rng.random_range(-bound..bound)))
            .collect();
        Self {
            weights: Matrix::from_vec(outputs, inputs, data).expect("shape is consistent"),
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    fn apply(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut z = x.matmul_transposed(&self.weights)?;
        let width = self.outputs();
        for row in z.as_mut_slice().chunks_mut(width) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += *b;
            }
        }
        Ok(z)
    }
}

/// Multilayer perceptron with ReLU between layers and raw logits at the end.
///
/// The standard configuration is `input → hidden → hidden → classes`; the
/// last two layers play the role of the freshly initialized classification
/// head on top of a transferred encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    layers: Vec<Dense<T>>,
}

/// Per-layer gradients, shaped exactly like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn blocks(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl<T: Scalar> MlpModel<T> {
    /// Builds a model with He-uniform initialization for layer widths `dims`
    /// (`dims[0]` inputs, `dims[last]` classes).
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Dense::he_uniform(w[0], w[1], rng))
            .collect();
        Ok(Self { layers })
    }

    /// Two hidden layers of equal width.
    pub fn standard<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(&[inputs, hidden, hidden, classes], rng)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::validation("model needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::dimension("layer bias", l.outputs(), l.bias.len()));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::dimension("layer chain", layers[i - 1].outputs(), l.inputs()));
            }
            if !l.weights.all_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::Numeric("layer parameters must be finite".into()));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs()];
        dims.extend(self.layers.iter().map(Dense::outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Parameter blocks in a fixed order: for each layer, weights then bias.
    pub fn blocks(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub(crate) fn blocks_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Re-draws the last `count` layers, keeping the rest (the transferred
    /// encoder) untouched.
    pub fn reinit_head<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) {
        let n = self.layers.len();
        for layer in self.layers.iter_mut().skip(n.saturating_sub(count)) {
            *layer = Dense::he_uniform(layer.inputs(), layer.outputs(), rng);
        }
    }

    /// Logits for a batch of row-vector inputs.
    pub fn forward(&self, inputs: &Matrix<T>) -> Result<Matrix<T>> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::dimension("model input width", self.input_dim(), inputs.cols()));
        }
        let mut act = self.layers[0].apply(inputs)?;
        for layer in &self.layers[1..] {
            relu_in_place(&mut act);
            act = layer.apply(&act)?;
        }
        Ok(act)
    }

    /// Softmax class probabilities.
    pub fn predict_proba(&self, inputs: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(softmax_rows(&self.forward(inputs)?))
    }

    /// Gradient of the mean cross-entropy over the masked samples (all
    /// samples when `mask` is `None`), together with that mean loss.
    ///
    /// The mask is treated as a set: indices are validated and visited in
    /// ascending order, so a mask covering every row reproduces the unmasked
    /// computation bit for bit.
    pub fn backward(
        &self,
        inputs: &Matrix<T>,
        labels: &[usize],
        mask: Option<&[usize]>,
    ) -> Result<(Gradients<T>, T)> {
        if labels.len() != inputs.rows() {
            return Err(Error::dimension("labels", inputs.rows(), labels.len()));
        }
        match mask {
            None => self.backward_rows(inputs, labels),
            Some(mask) => {
                let rows = normalize_mask(mask, inputs.rows())?;
                let x = inputs.select_rows(&rows)?;
                let y: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
                self.backward_rows(&x, &y)
            }
        }
    }

    fn backward_rows(&self, inputs: &Matrix<T>, labels: &[usize]) -> Result<(Gradients<T>, T)> {
        if inputs.rows() == 0 {
            return Err(Error::validation("cannot differentiate an empty batch"));
        }
        if inputs.cols() != self.input_dim() {
            return Err(Error::dimension("model input width", self.input_dim(), inputs.cols()));
        }
        // pre[i] is the pre-activation of layer i, post[i] its input.
        let mut post = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = inputs.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&act)?;
            post.push(act);
            act = z.clone();
            if i + 1 < self.layers.len() {
                relu_in_place(&mut act);
            }
            pre.push(z);
        }
        let logits = pre.last().expect("at least one layer");
        let losses = per_sample_cross_entropy(logits, labels)?;
        let m = T::of(inputs.rows() as f64);
        let mean_loss = losses.iter().copied().sum::<T>() / m;

        let mut delta = softmax_rows(logits);
        let classes = self.classes();
        for (r, &y) in labels.iter().enumerate() {
            let row = &mut delta.as_mut_slice()[r * classes..(r + 1) * classes];
            row[y] -= T::one();
            for v in row.iter_mut() {
                *v /= m;
            }
        }

        let mut grads: Vec<Dense<T>> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let weights = delta.transpose_matmul(&post[i])?;
            let mut bias = vec![T::zero(); self.layers[i].outputs()];
            for row in delta.as_slice().chunks(bias.len()) {
                for (b, d) in bias.iter_mut().zip(row) {
                    *b += *d;
                }
            }
            if i > 0 {
                let mut next = delta.matmul(&self.layers[i].weights)?;
                let z = &pre[i - 1];
                for (d, zv) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if *zv <= T::zero() {
                        *d = T::zero();
                    }
                }
                delta = next;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, mean_loss))
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::validation("model needs input and output widths"));
    }
    if dims.contains(&0) {
        return Err(Error::validation("layer widths must be positive"));
    }
    Ok(())
}

/// Sorted, de-duplicated view of a sample mask; rejects empty masks,
/// out-of-range and repeated indices.
pub fn normalize_mask(mask: &[usize], rows: usize) -> Result<Vec<usize>> {
    if mask.is_empty() {
        return Err(Error::validation("sample mask is empty"));
    }
    let mut sorted = mask.to_vec();
    sorted.sort_unstable();
    if let Some(&last) = sorted.last() {
        if last >= rows {
            return Err(Error::validation(format!(
                "mask index {last} out of range for batch of {rows}"
            )));
        }
    }
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation("sample mask repeats an index"));
    }
    Ok(sorted)
}

fn relu_in_place<T: Scalar>(m: &mut Matrix<T>) {
    for v in m.as_mut_slice() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_gives_zero_logits() {
        let model = MlpModel::<f64>::zeros(&[3, 4, 4, 2]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.5, 0.5]]).unwrap();
        let logits = model.forward(&x).unwrap();
        assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_layer_picks_first_weight_column() {
        let w = Matrix::from_rows(&[vec![0.3, -1.0], vec![2.5, 4.0], vec![-0.7, 0.1]]).unwrap();
        let model = MlpModel::from_layers(vec![Dense {
            weights: w,
            bias: vec![0.0; 3],
        }])
        .unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(model.forward(&x).unwrap().as_slice(), &[0.3, 2.5, -0.7]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = MlpModel::<f64>::standard(4, 8, 2, &mut rng).unwrap();
        let x = Matrix::zeros(2, 3);
        assert!(matches!(model.forward(&x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mask_validation() {
        assert!(normalize_mask(&[], 4).is_err());
        assert!(normalize_mask(&[4], 4).is_err());
        assert!(normalize_mask(&[1, 1], 4).is_err());
        assert_eq!(normalize_mask(&[3, 0, 2], 4).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn full_mask_matches_unmasked_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = MlpModel::<f64>::standard(5, 6, 3, &mut rng).unwrap();
        let data: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = Matrix::from_vec(8, 5, data).unwrap();
        let y: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let (g_all, l_all) = model.backward(&x, &y, None).unwrap();
        let mask = [7, 3, 1, 0, 2, 6, 5, 4];
        let (g_mask, l_mask) = model.backward(&x, &y, Some(&mask)).unwrap();
        assert_eq!(g_all, g_mask);
        assert_eq!(l_all.to_bits(), l_mask.to_bits());
    }

    #[test]
    fn head_reinit_keeps_encoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = MlpModel::<f64>::standard(4, 5, 2, &mut rng).unwrap();
        let mut other = model.clone();
        other.reinit_head(2, &mut rng);
        assert_eq!(model.layers()[0], other.layers()[0]);
        assert_ne!(model.layers()[1], other.layers()[1]);
        assert_ne!(model.layers()[2], other.layers()[2]);
        assert_eq!(model.parameter_count(), other.parameter_count());
    }

    #[test]
    fn works_in_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = MlpModel::<f32>::standard(3, 4, 2, &mut rng).unwrap();
        let x = Matrix::<f32>::from_rows(&[vec![0.1, 0.2, 0.3]]).unwrap();
        let (g, loss) = model.backward(&x, &[1], None).unwrap();
        assert!(loss > 0.0 && g.all_finite());
    }
}
