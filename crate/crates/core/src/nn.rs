//! Feed-forward action-value network with hand-written backpropagation.
//!
//! Hidden layers use ReLU, the output layer is linear. Training minimises the
//! mean squared TD error of the *selected* action outputs only:
//!
//! `L = 1/B * sum_j (y_j - Q(s_j, a_j))^2`
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Diagnostics for one optimizer step. `mean_loss` is measured before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStepReport {
    pub mean_loss: f64,
    pub gradient_norm: f64,
}

/// Per-parameter gradient of the batch loss, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// All components in parameter order: per layer, weights row-major then biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

/// Largest `|a - b| / max(|a|, |b|, 1e-8)` over matching components.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

impl QNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for w in &mut net.weights {
            let (fan_out, fan_in) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            w.iter_mut().for_each(|x| *x = dist.sample(rng));
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a network needs at least an input and an output layer, got dims {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer dims must be positive, got {dims:?}"
            )));
        }
        let weights = dims
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = dims[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Builds a network from explicit parameters; shapes must chain.
    pub fn from_parameters(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} weight matrices but {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut dims = vec![weights[0].ncols()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != dims[i] || b.len() != w.nrows() || w.nrows() == 0 {
                return Err(Error::Shape(format!(
                    "layer {i}: weight {:?} and bias {} do not chain from width {}",
                    w.dim(),
                    b.len(),
                    dims[i]
                )));
            }
            dims.push(w.nrows());
        }
        let net = Self {
            dims,
            weights,
            biases,
        };
        if !net.parameters_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    /// Parameter `index` in [`QNetwork::parameters`] order.
    fn parameter_slot(&mut self, mut index: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if index < w.len() {
                return &mut w.as_slice_mut().expect("standard layout")[index];
            }
            index -= w.len();
            if index < b.len() {
                return &mut b[index];
            }
            index -= b.len();
        }
        panic!("parameter index out of range")
    }

    fn parameters_finite(&self) -> bool {
        self.parameters().all(f64::is_finite)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let view = ArrayView2::from_shape((1, input.len()), input).expect("contiguous row");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Evaluates a batch laid out as rows; returns `(batch, output_dim)`.
    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_batch_width(inputs)?;
        let mut acts = self.forward_cached(inputs);
        Ok(acts.pop().unwrap())
    }

    fn check_batch_width(&self, inputs: ArrayView2<'_, f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch rows have width {}, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Returns the input followed by every layer's output (post-activation).
    fn forward_cached(&self, inputs: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(inputs.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    fn check_training_batch(
        &self,
        inputs: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<()> {
        self.check_batch_width(inputs)?;
        let n = inputs.nrows();
        if n == 0 || actions.len() != n || targets.len() != n {
            return Err(Error::Shape(format!(
                "batch of {n} inputs, {} actions, {} targets",
                actions.len(),
                targets.len()
            )));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.output_dim()) {
            return Err(Error::Shape(format!(
                "action index {a} out of range for {} outputs",
                self.output_dim()
            )));
        }
        if !inputs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("training inputs"));
        }
        if !targets.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("training targets"));
        }
        Ok(())
    }

    /// Mean squared error of the selected outputs.
    pub fn loss(&self, inputs: ArrayView2<'_, f64>, actions: &[usize], targets: &[f64]) -> Result<f64> {
        self.check_training_batch(inputs, actions, targets)?;
        let q = self.forward_batch(inputs)?;
        Ok(selected_mse(&q, actions, targets))
    }

    /// Analytic gradient of [`QNetwork::loss`]; returns the loss alongside.
    pub fn gradient(
        &self,
        inputs: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        self.check_training_batch(inputs, actions, targets)?;
        Ok(self.backprop(inputs, actions, targets))
    }

    fn backprop(&self, inputs: ArrayView2<'_, f64>, actions: &[usize], targets: &[f64]) -> (f64, Gradients) {
        let acts = self.forward_cached(inputs);
        let q = acts.last().unwrap();
        let n = inputs.nrows() as f64;
        let loss = selected_mse(q, actions, targets);

        // dL/dQ is nonzero only at the taken action of each sample.
        let mut delta = Array2::<f64>::zeros(q.dim());
        for (j, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            delta[[j, a]] = 2.0 * (q[[j, a]] - y) / n;
        }

        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        for l in (0..layers).rev() {
            gw.push(delta.t().dot(&acts[l]));
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut upstream = delta.dot(&self.weights[l]);
                Zip::from(&mut upstream)
                    .and(&acts[l])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = upstream;
            }
        }
        gw.reverse();
        gb.reverse();
        (
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }

    /// One plain gradient-descent step on the mean squared TD error.
    pub fn train_step(
        &mut self,
        inputs: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
        learning_rate: f64,
    ) -> Result<TrainStepReport> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        self.check_training_batch(inputs, actions, targets)?;
        let (loss, grads) = self.backprop(inputs, actions, targets);
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite("loss gradient"));
        }
        self.apply_gradients(&grads, learning_rate)?;
        Ok(TrainStepReport {
            mean_loss: loss,
            gradient_norm: grads.norm(),
        })
    }

    /// `theta <- theta - learning_rate * grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        self.check_gradient_shape(grads)?;
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-learning_rate, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-learning_rate, g);
        }
        if !self.parameters_finite() {
            return Err(Error::NonFinite("network parameters after update"));
        }
        Ok(())
    }

    fn check_gradient_shape(&self, grads: &Gradients) -> Result<()> {
        let ok = grads.weights.len() == self.weights.len()
            && grads.biases.len() == self.biases.len()
            && grads.weights.iter().zip(&self.weights).all(|(g, w)| g.dim() == w.dim())
            && grads.biases.iter().zip(&self.biases).all(|(g, b)| g.len() == b.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("gradient does not match network layout".into()))
        }
    }

    /// Overwrites `self` with `src`'s parameters.
    pub fn copy_from(&mut self, src: &QNetwork) -> Result<()> {
        if self.dims != src.dims {
            return Err(Error::Shape(format!(
                "cannot copy weights from {:?} into {:?}",
                src.dims, self.dims
            )));
        }
        for (d, s) in self.weights.iter_mut().zip(&src.weights) {
            d.assign(s);
        }
        for (d, s) in self.biases.iter_mut().zip(&src.biases) {
            d.assign(s);
        }
        Ok(())
    }

    /// Central-difference gradient of the batch loss.
    pub fn numeric_gradient(
        &self,
        inputs: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
        epsilon: f64,
    ) -> Result<Gradients> {
        if !(epsilon > 0.0 && epsilon <= 1e-2) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference epsilon must lie in (0, 1e-2], got {epsilon}"
            )));
        }
        self.check_training_batch(inputs, actions, targets)?;
        let mut probe = self.clone();
        let mut numeric = Gradients {
            weights: self.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        };
        for (i, slot) in numeric.iter_mut().enumerate() {
            let original = *probe.parameter_slot(i);
            *probe.parameter_slot(i) = original + epsilon;
            let plus = probe.loss_unchecked(inputs, actions, targets);
            *probe.parameter_slot(i) = original - epsilon;
            let minus = probe.loss_unchecked(inputs, actions, targets);
            *probe.parameter_slot(i) = original;
            *slot = (plus - minus) / (2.0 * epsilon);
        }
        Ok(numeric)
    }

    fn loss_unchecked(&self, inputs: ArrayView2<'_, f64>, actions: &[usize], targets: &[f64]) -> f64 {
        let q = self.forward_cached(inputs).pop().unwrap();
        selected_mse(&q, actions, targets)
    }

    /// Max relative disagreement between backprop and central differences.
    pub fn finite_difference_check(
        &self,
        inputs: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
        epsilon: f64,
    ) -> Result<f64> {
        let numeric = self.numeric_gradient(inputs, actions, targets, epsilon)?;
        let (_, analytic) = self.gradient(inputs, actions, targets)?;
        Ok(max_relative_error(&analytic, &numeric))
    }

    /// Snapshot layout: `u64` layer count, `u64` per dim, then for each layer
    /// the row-major weights followed by the biases. All little-endian.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for &d in &self.dims {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for p in self.parameters() {
            out.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input
                .read_exact(&mut word)
                .map_err(|e| Error::InvalidArgument(format!("truncated snapshot: {e}")))?;
            Ok(word)
        };
        let count = u64::from_le_bytes(next(&mut input)?) as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::InvalidArgument(format!("implausible layer count {count}")));
        }
        let dims = (0..count)
            .map(|_| next(&mut input).map(|w| u64::from_le_bytes(w) as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self::zeros(&dims)?;
        let total = net.parameter_count();
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(f64::from_le_bytes(next(&mut input)?));
        }
        for (slot, v) in net.parameters_mut().zip(values) {
            *slot = v;
        }
        if !net.parameters_finite() {
            return Err(Error::NonFinite("snapshot parameters"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_snapshot(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_snapshot(std::io::BufReader::new(file))
    }
}

/// Copies `src` into `dst`; architectures must match.
pub fn copy_weights(src: &QNetwork, dst: &mut QNetwork) -> Result<()> {
    dst.copy_from(src)
}

fn selected_mse(q: &Array2<f64>, actions: &[usize], targets: &[f64]) -> f64 {
    let sum: f64 = actions
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(j, (&a, &y))| (y - q[[j, a]]).powi(2))
        .sum();
    sum / actions.len() as f64
}
