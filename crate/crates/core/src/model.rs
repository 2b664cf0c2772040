//! Minimal dense network: forward pass, softmax cross-entropy, analytic
//! gradients, and plain SGD. Every sub-structure operation in the crate works
//! on these weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Activation applied after every non-final layer. The final layer always
/// feeds a softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    /// Apply the activation to a single pre-activation value.
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// One dense layer: `weight` maps p inputs to q outputs, `bias` has length q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::dims(format!(
                "bias length {} does not match {} output columns",
                bias.len(),
                weight.cols()
            )));
        }
        Ok(DenseLayer { weight, bias })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            weight: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

/// The full stack of dense layers plus the hidden activation.
///
/// Consecutive layers must be dimension-compatible and there are at least two
/// layers, so at least one hidden channel dimension exists for partitioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
}

/// Gradient container with the same layer shapes as the model it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

/// A batch of samples: `inputs` is n x d, `labels` holds n class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl LabeledBatch {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(Error::dims(format!(
                "{} labels for {} input rows",
                labels.len(),
                inputs.rows()
            )));
        }
        if inputs.rows() == 0 {
            return Err(Error::rejected("batch must contain at least one sample"));
        }
        Ok(LabeledBatch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Copy out the rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledBatch {
        let d = self.inputs.cols();
        let inputs = Matrix::from_fn(indices.len(), d, |r, c| self.inputs.get(indices[r], c));
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledBatch { inputs, labels }
    }
}

impl ModelWeights {
    pub fn new(layers: Vec<DenseLayer>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::rejected(
                "a model needs at least two layers (one hidden dimension)",
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].weight.cols() != pair[1].weight.rows() {
                return Err(Error::dims(format!(
                    "layer {} outputs {} channels but layer {} expects {}",
                    i,
                    pair[0].weight.cols(),
                    i + 1,
                    pair[1].weight.rows()
                )));
            }
        }
        Ok(ModelWeights { layers, activation })
    }

    /// Seeded initialization: weights uniform in +-sqrt(6/(p+q)), biases zero.
    /// `widths` is the full layer-size chain `[d, h1, ..., q]`.
    pub fn init(widths: &[usize], activation: Activation, rng: &mut impl Rng) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::rejected(
                "need input, at least one hidden, and output widths",
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::rejected("layer widths must be positive"));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (p, q) = (w[0], w[1]);
            let limit = (6.0 / (p + q) as f64).sqrt();
            let weight = Matrix::from_fn(p, q, |_, _| rng.gen_range(-limit..=limit));
            layers.push(DenseLayer {
                weight,
                bias: vec![0.0; q],
            });
        }
        ModelWeights::new(layers, activation)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.cols()
    }

    /// Channel widths of the hidden dimensions, one per layer boundary.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.weight.cols())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn zeros_like(&self) -> ModelWeights {
        ModelWeights {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            activation: self.activation,
        }
    }

    pub fn same_shape(&self, other: &ModelWeights) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols()
            })
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weight.scale(factor);
            for b in &mut layer.bias {
                *b *= factor;
            }
        }
    }

    /// `self += factor * other`, layer by layer.
    pub fn add_scaled(&mut self, other: &ModelWeights, factor: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::dims("models have different layer shapes"));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_scaled(&b.weight, factor)?;
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += factor * y;
            }
        }
        Ok(())
    }
}

/// Class probabilities for every sample: n x q, rows summing to one.
pub fn forward(model: &ModelWeights, batch: &LabeledBatch) -> Result<Matrix> {
    let (_, logits) = forward_trace(model, batch)?;
    softmax_rows(&logits)
}

/// Mean cross-entropy and analytic gradients for every parameter.
pub fn loss_and_gradients(model: &ModelWeights, batch: &LabeledBatch) -> Result<(f64, Gradients)> {
    let q = model.output_dim();
    for &label in &batch.labels {
        if label >= q {
            return Err(Error::rejected(format!(
                "label {label} out of range for {q} classes"
            )));
        }
    }
    let (activations, logits) = forward_trace(model, batch)?;
    let n = batch.len();

    // Loss via log-sum-exp so confident predictions never produce ln(0).
    let mut loss = 0.0;
    for (i, &label) in batch.labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        loss += max + sum_exp.ln() - row[label];
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            layer: model.layers.len() - 1,
            context: "cross-entropy loss".into(),
        });
    }

    // dL/dlogits = (softmax - onehot) / n
    let probs = softmax_rows(&logits)?;
    let mut delta = probs;
    for (i, &label) in batch.labels.iter().enumerate() {
        let v = delta.get(i, label);
        delta.set(i, label, v - 1.0);
    }
    delta.scale(1.0 / n as f64);

    let mut grads = vec![DenseLayer::zeros(0, 0); model.layers.len()];
    for idx in (0..model.layers.len()).rev() {
        let input = &activations[idx];
        let layer = &model.layers[idx];
        let weight_grad = input.transpose().matmul(&delta)?;
        let mut bias_grad = vec![0.0; layer.bias.len()];
        for r in 0..delta.rows() {
            for (c, g) in bias_grad.iter_mut().enumerate() {
                *g += delta.get(r, c);
            }
        }
        if weight_grad.entries().iter().any(|v| !v.is_finite())
            || bias_grad.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                layer: idx,
                context: "gradient".into(),
            });
        }
        grads[idx] = DenseLayer {
            weight: weight_grad,
            bias: bias_grad,
        };
        if idx > 0 {
            let upstream = delta.matmul(&layer.weight.transpose())?;
            let act_out = &activations[idx];
            delta = Matrix::from_fn(upstream.rows(), upstream.cols(), |r, c| {
                upstream.get(r, c) * model.activation.derivative_from_output(act_out.get(r, c))
            });
        }
    }

    Ok((loss, Gradients { layers: grads }))
}

/// One plain SGD step: every parameter moves by `-learning_rate * gradient`.
pub fn sgd_step(
    model: &ModelWeights,
    grads: &Gradients,
    learning_rate: f64,
) -> Result<ModelWeights> {
    if learning_rate < 0.0 || !learning_rate.is_finite() {
        return Err(Error::rejected("learning rate must be non-negative"));
    }
    if model.layers.len() != grads.layers.len() {
        return Err(Error::dims("gradient layer count differs from model"));
    }
    let mut out = model.clone();
    for (layer, grad) in out.layers.iter_mut().zip(&grads.layers) {
        layer.weight.add_scaled(&grad.weight, -learning_rate)?;
        if layer.bias.len() != grad.bias.len() {
            return Err(Error::dims("gradient bias length differs from model"));
        }
        for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
            *b -= learning_rate * g;
        }
    }
    Ok(out)
}

/// Fraction of argmax-correct predictions; argmax ties go to the lowest class.
pub fn evaluate_accuracy(model: &ModelWeights, test: &LabeledBatch) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::rejected("cannot evaluate on an empty test set"));
    }
    let probs = forward(model, test)?;
    let mut correct = 0usize;
    for (i, &label) in test.labels.iter().enumerate() {
        if argmax(probs.row(i)) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Deterministic layer-then-row-major concatenation: per layer, the weight
/// entries followed by the bias entries.
pub fn flatten(model: &ModelWeights) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.param_count());
    for layer in &model.layers {
        out.extend_from_slice(layer.weight.entries());
        out.extend_from_slice(&layer.bias);
    }
    out
}

/// Inverse of [`flatten`] given a model of the target shape.
pub fn unflatten(shape_like: &ModelWeights, values: &[f64]) -> Result<ModelWeights> {
    if values.len() != shape_like.param_count() {
        return Err(Error::dims(format!(
            "{} values cannot fill {} parameters",
            values.len(),
            shape_like.param_count()
        )));
    }
    let mut layers = Vec::with_capacity(shape_like.layers.len());
    let mut offset = 0;
    for layer in &shape_like.layers {
        let (rows, cols) = (layer.weight.rows(), layer.weight.cols());
        let weight =
            Matrix::from_vec(rows, cols, values[offset..offset + rows * cols].to_vec())?;
        offset += rows * cols;
        let bias = values[offset..offset + layer.bias.len()].to_vec();
        offset += layer.bias.len();
        layers.push(DenseLayer { weight, bias });
    }
    ModelWeights::new(layers, shape_like.activation)
}

/// Mini-batch SGD over `data` for `epochs` passes. Batches are drawn from a
/// seeded shuffle so training is reproducible. Returns the trained model and
/// the mean mini-batch loss across all steps taken.
pub fn train_sgd(
    model: &ModelWeights,
    data: &LabeledBatch,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<(ModelWeights, f64)> {
    if batch_size == 0 {
        return Err(Error::rejected("batch size must be positive"));
    }
    let mut current = model.clone();
    let mut loss_sum = 0.0;
    let mut steps = 0usize;
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        // Fisher-Yates with the caller's stream.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch_size) {
            let batch = data.subset(chunk);
            let (loss, grads) = loss_and_gradients(&current, &batch)?;
            current = sgd_step(&current, &grads, learning_rate)?;
            loss_sum += loss;
            steps += 1;
        }
    }
    let mean_loss = if steps == 0 { 0.0 } else { loss_sum / steps as f64 };
    Ok((current, mean_loss))
}

/// Run the batch through every layer. Returns the per-layer inputs
/// (activations[0] is the batch itself) and the final-layer logits.
fn forward_trace(model: &ModelWeights, batch: &LabeledBatch) -> Result<(Vec<Matrix>, Matrix)> {
    if batch.inputs.cols() != model.input_dim() {
        return Err(Error::dims(format!(
            "batch has {} features but the model expects {}",
            batch.inputs.cols(),
            model.input_dim()
        )));
    }
    let mut activations = Vec::with_capacity(model.layers.len());
    activations.push(batch.inputs.clone());
    let last = model.layers.len() - 1;
    for (idx, layer) in model.layers.iter().enumerate() {
        let mut z = activations[idx].matmul(&layer.weight)?;
        for r in 0..z.rows() {
            for (c, &b) in layer.bias.iter().enumerate() {
                let v = z.get(r, c) + b;
                z.set(r, c, v);
            }
        }
        if z.entries().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                layer: idx,
                context: "pre-activation".into(),
            });
        }
        if idx < last {
            let a = Matrix::from_fn(z.rows(), z.cols(), |r, c| {
                model.activation.apply(z.get(r, c))
            });
            activations.push(a);
        } else {
            return Ok((activations, z));
        }
    }
    unreachable!("models always have at least one layer")
}

/// Row-wise softmax, stabilized by subtracting the row maximum.
fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (c, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            out.set(r, c, e);
            sum += e;
        }
        for c in 0..logits.cols() {
            let v = out.get(r, c) / sum;
            out.set(r, c, v);
        }
    }
    Ok(out)
}
