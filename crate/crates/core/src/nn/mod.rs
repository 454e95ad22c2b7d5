//! Minimal dense network engine: layers, losses, adaptive-moment updates,
//! gradient checking and model persistence. Training is single threaded and
//! fully determined by the seed.

mod matrix;
mod model_io;
mod rng;

pub use matrix::Matrix;
pub use model_io::{
    load_model, metadata_f64_array, metadata_string_array, save_model, ModelFile, FORMAT_VERSION,
    MODEL_FILE_EXTENSION,
};
pub use rng::Rng;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model format version {found} unsupported (expected {expected})")]
    VersionMismatch { found: i64, expected: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, NnError> {
        match name {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(NnError::Malformed(format!("unknown activation {other:?}"))),
        }
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative as a function of the pre-activation.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable ln(1 + exp(z)).
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Fully connected layer: y = act(x W + b), weights stored input x output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
    pub fn new_random(input: usize, output: usize, activation: Activation, rng: &mut Rng) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        let mut weights = Matrix::zeros(input, output);
        for v in weights.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        Self { weights, bias: vec![0.0; output], activation }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// Stack of dense layers with chained shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Per-layer input and pre-activation kept from a forward pass.
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    preacts: Vec<Matrix>,
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Parameter gradients for one layer.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(NnError::ShapeMismatch(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.input_dim()).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.output_dim()).unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix, NnError> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache, NnError> {
        if x.cols() != self.input_dim() {
            return Err(NnError::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            inputs.push(cur.clone());
            let mut pre = cur.matmul(&layer.weights)?;
            for r in 0..pre.rows() {
                for (v, b) in pre.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            preacts.push(pre.clone());
            cur = pre.map(|z| layer.activation.apply(z));
        }
        Ok(ForwardCache { inputs, preacts, output: cur })
    }

    /// Reverse-mode gradients of the composed map. Returns per-layer parameter
    /// gradients and the gradient with respect to the input batch.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Result<(Vec<LayerGrads>, Matrix), NnError> {
        if grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols() {
            return Err(NnError::ShapeMismatch(format!(
                "grad_out {}x{} does not match output {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                cache.output.rows(),
                cache.output.cols()
            )));
        }
        let mut grads = vec![
            LayerGrads { weights: Matrix::zeros(0, 0), bias: Vec::new() };
            self.layers.len()
        ];
        let mut upstream = grad_out.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.preacts[idx];
            let mut delta = upstream;
            for r in 0..delta.rows() {
                for c in 0..delta.cols() {
                    let d = delta.get(r, c) * layer.activation.derivative(pre.get(r, c));
                    delta.set(r, c, d);
                }
            }
            let input = &cache.inputs[idx];
            let dw = input.matmul_transpose_self(&delta)?;
            let mut db = vec![0.0; layer.output_dim()];
            for r in 0..delta.rows() {
                for (acc, d) in db.iter_mut().zip(delta.row(r)) {
                    *acc += d;
                }
            }
            upstream = delta.matmul_transpose_other(&layer.weights)?;
            grads[idx] = LayerGrads { weights: dw, bias: db };
        }
        Ok((grads, upstream))
    }

    /// All parameters flattened in layer order (weights row-major, then bias).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NnError> {
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.weights.data_mut();
            let n = w.len();
            w.copy_from_slice(flat.get(offset..offset + n).ok_or_else(short)?);
            offset += n;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(flat.get(offset..offset + nb).ok_or_else(short)?);
            offset += nb;
        }
        if offset != flat.len() {
            return Err(NnError::ShapeMismatch("parameter vector too long".into()));
        }
        Ok(())
    }
}

fn short() -> NnError {
    NnError::ShapeMismatch("parameter vector too short".into())
}

pub fn flatten_grads(grads: &[LayerGrads]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(g.weights.data());
        out.extend_from_slice(&g.bias);
    }
    out
}

/// Mean binary cross-entropy on logits: softplus(s) - y*s averaged over the
/// batch, with gradient (sigmoid(s) - y) / n.
pub fn bce_logit_loss(scores: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(NnError::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n = scores.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &y) in scores.iter().zip(labels) {
        loss += softplus(s) - y * s;
        grad.push((sigmoid(s) - y) / n);
    }
    Ok((loss / n, grad))
}

/// Mean squared error over all entries, gradient 2(pred - target)/count.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix), NnError> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(NnError::ShapeMismatch(format!(
            "mse {}x{} vs {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let count = (pred.rows() * pred.cols()) as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    for r in 0..pred.rows() {
        for c in 0..pred.cols() {
            let diff = pred.get(r, c) - target.get(r, c);
            loss += diff * diff;
            grad.set(r, c, 2.0 * diff / count);
        }
    }
    Ok((loss / count, grad))
}

/// Adaptive-moment estimation state for one parameter tensor.
///
/// Every tensor's state must be stepped exactly once per batch so the shared
/// bias-correction step count stays aligned.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update: p -= lr * m_hat / (sqrt(v_hat) + eps).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "adam state {} vs params {} vs grads {}",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / bc1;
            let v_hat = self.second_moment[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Optimizer over a whole network: one Adam state per layer tensor.
#[derive(Debug, Clone)]
pub struct MlpOptimizer {
    slots: Vec<(Adam, Adam)>,
}

impl MlpOptimizer {
    pub fn new(mlp: &Mlp, lr: f64) -> Self {
        let slots = mlp
            .layers()
            .iter()
            .map(|l| (Adam::new(l.weights.data().len(), lr), Adam::new(l.bias.len(), lr)))
            .collect();
        Self { slots }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &[LayerGrads]) -> Result<(), NnError> {
        if grads.len() != self.slots.len() {
            return Err(NnError::ShapeMismatch("gradient count != layer count".into()));
        }
        for ((layer, grad), (w_state, b_state)) in
            mlp.layers_mut().iter_mut().zip(grads).zip(&mut self.slots)
        {
            w_state.step(layer.weights.data_mut(), grad.weights.data())?;
            b_state.step(&mut layer.bias, &grad.bias)?;
        }
        Ok(())
    }
}

/// Max relative error between analytic gradients and central finite
/// differences with h = 1e-6, denominated by max(1e-8, |a| + |n|).
pub fn gradient_check(
    mut loss: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
) -> f64 {
    const H: f64 = 1e-6;
    let mut work = point.to_vec();
    let mut max_err: f64 = 0.0;
    for i in 0..point.len() {
        let orig = work[i];
        work[i] = orig + H;
        let up = loss(&work);
        work[i] = orig - H;
        let down = loss(&work);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        max_err = max_err.max(err);
    }
    max_err
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_layer(dim: usize) -> DenseLayer {
        let mut weights = Matrix::zeros(dim, dim);
        for i in 0..dim {
            weights.set(i, i, 1.0);
        }
        DenseLayer { weights, bias: vec![0.0; dim], activation: Activation::Identity }
    }

    #[test]
    fn identity_network_is_identity() {
        let mlp = Mlp::new(vec![identity_layer(3)]).unwrap();
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.0, 5.0, -6.0]).unwrap();
        assert_eq!(mlp.forward(&x).unwrap(), x);
    }

    #[test]
    fn relu_zeroes_negative_preactivations() {
        let mut layer = identity_layer(2);
        layer.activation = Activation::Relu;
        let mlp = Mlp::new(vec![layer]).unwrap();
        let x = Matrix::from_vec(1, 2, vec![-3.0, -0.5]).unwrap();
        assert_eq!(mlp.forward(&x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn two_layer_forward_matches_hand_multiplication() {
        let l1 = DenseLayer {
            weights: Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            bias: vec![0.5, -0.5],
            activation: Activation::Identity,
        };
        let l2 = DenseLayer {
            weights: Matrix::from_vec(2, 1, vec![2.0, -1.0]).unwrap(),
            bias: vec![1.0],
            activation: Activation::Identity,
        };
        let mlp = Mlp::new(vec![l1, l2]).unwrap();
        let x = Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        // h = [1+3+0.5, 2+4-0.5] = [4.5, 5.5]; y = 2*4.5 - 5.5 + 1 = 4.5
        let y = mlp.forward(&x).unwrap();
        assert!((y.get(0, 0) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn mismatched_input_width_errors() {
        let mlp = Mlp::new(vec![identity_layer(3)]).unwrap();
        let x = Matrix::zeros(1, 2);
        assert!(matches!(mlp.forward(&x), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn zero_grad_out_gives_zero_gradients() {
        let mut rng = Rng::new(5);
        let mlp = Mlp::new(vec![
            DenseLayer::new_random(3, 4, Activation::Sigmoid, &mut rng),
            DenseLayer::new_random(4, 2, Activation::Identity, &mut rng),
        ])
        .unwrap();
        let x = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.1, -0.2, -0.3]).unwrap();
        let cache = mlp.forward_cached(&x).unwrap();
        let (grads, grad_in) = mlp.backward(&cache, &Matrix::zeros(2, 2)).unwrap();
        assert!(grads.iter().all(|g| g.weights.data().iter().all(|&v| v == 0.0)));
        assert!(grad_in.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_xt_grad() {
        let layer = DenseLayer {
            weights: Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            bias: vec![0.0, 0.0],
            activation: Activation::Identity,
        };
        let mlp = Mlp::new(vec![layer]).unwrap();
        let x = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = Matrix::from_vec(2, 2, vec![0.5, -0.5, 1.0, 2.0]).unwrap();
        let cache = mlp.forward_cached(&x).unwrap();
        let (grads, _) = mlp.backward(&cache, &g).unwrap();
        let expected = x.matmul_transpose_self(&g).unwrap();
        assert_eq!(grads[0].weights, expected);
    }

    #[test]
    fn bce_logit_loss_fixed_points() {
        let (loss, _) = bce_logit_loss(&[0.0], &[1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        let (loss, _) = bce_logit_loss(&[20.0], &[1.0]).unwrap();
        assert!(loss < 1e-8);
        let (loss, grad) = bce_logit_loss(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((grad[0] + 0.25).abs() < 1e-15);
        assert!((grad[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mse_loss_fixed_points() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (loss, grad) = mse_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));
        let b = a.map(|v| v - 1.0);
        let (loss, _) = mse_loss(&a, &b).unwrap();
        assert!((loss - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // w = 1, d(w^2)/dw = 2: first bias-corrected step has |m_hat/sqrt(v_hat)| == 1.
        let mut adam = Adam::new(1, 0.1);
        let mut params = vec![1.0];
        adam.step(&mut params, &[2.0]).unwrap();
        assert!((params[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut adam = Adam::new(2, 0.1);
        let mut params = vec![1.0, -2.0];
        for _ in 0..50 {
            adam.step(&mut params, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(params, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_descends_a_parabola() {
        let mut adam = Adam::new(1, 0.05);
        let mut params = vec![1.0];
        for _ in 0..200 {
            let grad = 2.0 * params[0];
            adam.step(&mut params, &[grad]).unwrap();
        }
        assert!(params[0].abs() < 0.05, "got {}", params[0]);
    }

    #[test]
    fn gradient_check_linear_map_is_exact() {
        // f(p) = 3 p0 - 2 p1
        let point = vec![0.7, -1.3];
        let err = gradient_check(|p| 3.0 * p[0] - 2.0 * p[1], &point, &[3.0, -2.0]);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn gradient_check_constant_map() {
        let err = gradient_check(|_| 5.0, &[1.0, 2.0], &[0.0, 0.0]);
        assert!(err < 1e-9);
    }

    #[test]
    fn gradient_check_all_layer_configurations() {
        for (acts, tol) in [
            (vec![Activation::Identity], 1e-9),
            (vec![Activation::Relu, Activation::Identity], 1e-4),
            (vec![Activation::Sigmoid, Activation::Sigmoid], 1e-4),
            (vec![Activation::Sigmoid, Activation::Identity], 1e-4),
            (vec![Activation::Relu, Activation::Sigmoid, Activation::Identity], 1e-4),
        ] {
            let mut rng = Rng::new(42);
            let dims: Vec<usize> = std::iter::once(3).chain(acts.iter().map(|_| 3)).collect();
            let layers: Vec<DenseLayer> = acts
                .iter()
                .enumerate()
                .map(|(i, &a)| DenseLayer::new_random(dims[i], dims[i + 1], a, &mut rng))
                .collect();
            let mlp = Mlp::new(layers).unwrap();
            let x = Matrix::from_vec(4, 3, vec![
                0.3, -0.8, 0.5, 0.9, 0.2, -0.4, -0.6, 0.7, 0.1, 0.45, -0.25, 0.85,
            ])
            .unwrap();
            let target = Matrix::from_vec(4, 3, vec![
                0.1, 0.9, 0.4, 0.3, 0.5, 0.2, 0.8, 0.1, 0.6, 0.25, 0.45, 0.65,
            ])
            .unwrap();

            let cache = mlp.forward_cached(&x).unwrap();
            let (_, grad_out) = mse_loss(cache.output(), &target).unwrap();
            let (grads, _) = mlp.backward(&cache, &grad_out).unwrap();

            let point = mlp.params_flat();
            let analytic = flatten_grads(&grads);
            let template = mlp.clone();
            let err = gradient_check(
                |p| {
                    let mut probe = template.clone();
                    probe.set_params_flat(p).unwrap();
                    let out = probe.forward(&x).unwrap();
                    mse_loss(&out, &target).unwrap().0
                },
                &point,
                &analytic,
            );
            assert!(err < tol, "activations {acts:?}: err {err} >= {tol}");
        }
    }
}
