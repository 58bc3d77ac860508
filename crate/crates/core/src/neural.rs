//! A small fully connected network with masked mean-squared-error fitting
//! and the Adam optimizer.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Magic bytes opening a serialized network.
pub const MAGIC: &[u8; 5] = b"ORLN1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `inputs x outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Rectifier hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// He-style uniform initialization `U(-sqrt(6/fan_in), sqrt(6/fan_in))`,
    /// zero biases; identical seeds give identical networks.
    pub fn new(input: usize, hidden: &[usize], output: usize, seed: u64) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        if sizes.contains(&0) {
            return Err(Error::ZeroSize);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-limit..limit));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation: if i == last {
                        Activation::Linear
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ZeroSize);
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::ArchitectureMismatch);
            }
        }
        if layers
            .iter()
            .any(|l| l.outputs() != l.bias.len() || l.inputs() == 0 || l.outputs() == 0)
        {
            return Err(Error::ArchitectureMismatch);
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Layer::outputs));
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flat parameter vector: per layer, weights row-major then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = ArrayView2::from_shape((1, x.len()), x).map_err(|_| Error::NonFinite)?;
        Ok(self.forward_batch(input)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass over a `batch x input` matrix.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.to_owned();
        for l in &self.layers {
            a = l.apply(&a);
        }
        Ok(a)
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Masked mean-squared error of a batch and its parameter gradients.
    ///
    /// A row's loss is the mean squared error over its unmasked outputs
    /// (zero if none); the batch loss is the mean over rows.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        mask: Option<ArrayView2<bool>>,
    ) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        let batch = x.nrows();
        let out = self.output_dim();
        if targets.dim() != (batch, out) {
            return Err(Error::DimensionMismatch {
                expected: out,
                got: targets.ncols(),
            });
        }
        if let Some(m) = mask {
            if m.dim() != (batch, out) {
                return Err(Error::DimensionMismatch {
                    expected: out,
                    got: m.ncols(),
                });
            }
        }
        if x.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }

        // activations[i] is the input to layer i; the last entry the output
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for l in &self.layers {
            let next = l.apply(activations.last().unwrap());
            activations.push(next);
        }
        let y = activations.last().unwrap();

        let mut delta = Array2::<f64>::zeros((batch, out));
        let mut loss = 0.0;
        for r in 0..batch {
            let active: Vec<bool> = match mask {
                Some(m) => m.row(r).to_vec(),
                None => vec![true; out],
            };
            let count = active.iter().filter(|&&a| a).count();
            if count == 0 {
                continue;
            }
            let scale = 1.0 / (count as f64 * batch as f64);
            for c in (0..out).filter(|&c| active[c]) {
                let err = y[[r, c]] - targets[[r, c]];
                loss += err * err * scale;
                delta[[r, c]] = 2.0 * err * scale;
            }
        }

        let depth = self.layers.len();
        let mut grad_w = vec![Array2::zeros((0, 0)); depth];
        let mut grad_b = vec![Array1::zeros(0); depth];
        for i in (0..depth).rev() {
            grad_w[i] = activations[i].t().dot(&delta);
            grad_b[i] = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                if self.layers[i - 1].activation == Activation::Relu {
                    // activations[i] is the rectified output of layer i - 1
                    ndarray::Zip::from(&mut back)
                        .and(&activations[i])
                        .for_each(|d, &a| {
                            if a <= 0.0 {
                                *d = 0.0;
                            }
                        });
                }
                delta = back;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: grad_w,
                bias: grad_b,
            },
        ))
    }

    /// One Adam step on a batch; returns the loss before the step.
    pub fn fit_batch(
        &mut self,
        adam: &mut AdamState,
        x: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        mask: Option<ArrayView2<bool>>,
    ) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradients(x, targets, mask)?;
        adam.apply(self, &grads)?;
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(loss)
    }

    /// Single-sample form of [`Mlp::fit_batch`].
    pub fn fit(
        &mut self,
        adam: &mut AdamState,
        x: &[f64],
        target: &[f64],
        mask: Option<&[bool]>,
    ) -> Result<f64> {
        let xv = ArrayView2::from_shape((1, x.len()), x).map_err(|_| Error::NonFinite)?;
        let tv = ArrayView2::from_shape((1, target.len()), target).map_err(|_| Error::NonFinite)?;
        let mv = match mask {
            Some(m) => Some(ArrayView2::from_shape((1, m.len()), m).map_err(|_| Error::NonFinite)?),
            None => None,
        };
        self.fit_batch(adam, xv, tv, mv)
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.activation == b.activation)
    }

    /// Overwrites this network's parameters with `src`'s.
    pub fn copy_parameters_from(&mut self, src: &Mlp) -> Result<()> {
        if !self.same_architecture(src) {
            return Err(Error::ArchitectureMismatch);
        }
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            dst.weights.assign(&s.weights);
            dst.bias.assign(&s.bias);
        }
        Ok(())
    }

    /// Binary record: magic, number of layer sizes and the sizes as
    /// little-endian `u32`, then [`Mlp::parameters`] as little-endian `f64`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let sizes = self.sizes();
        w.write_all(MAGIC)?;
        w.write_all(&(sizes.len() as u32).to_le_bytes())?;
        for s in sizes {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        for p in self.parameters() {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let count = u32::from_le_bytes(word) as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::Checkpoint(format!("{count} layer sizes")));
        }
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut word)?;
            sizes.push(u32::from_le_bytes(word) as usize);
        }
        let mut net = Mlp::new(sizes[0], &sizes[1..count - 1], sizes[count - 1], 0)
            .map_err(|_| Error::Checkpoint("zero layer size".into()))?;
        let mut params = vec![0.0; net.parameter_count()];
        let mut bytes = [0u8; 8];
        for p in &mut params {
            r.read_exact(&mut bytes)?;
            *p = f64::from_le_bytes(bytes);
        }
        net.set_parameters(&params)?;
        Ok(net)
    }
}

impl Layer {
    fn apply(&self, input: &Array2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights);
        z += &self.bias;
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }
}

pub fn copy_parameters(src: &Mlp, dst: &mut Mlp) -> Result<()> {
    dst.copy_parameters_from(src)
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        let zeros = Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.dim()))
                .collect(),
            bias: net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        };
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    fn apply(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != net.layers.len() {
            return Err(Error::ArchitectureMismatch);
        }
        self.step += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (i, layer) in net.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weights)
                .and(&mut self.m.weights[i])
                .and(&mut self.v.weights[i])
                .and(&grads.weights[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut self.m.bias[i])
                .and(&mut self.v.bias[i])
                .and(&grads.bias[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences with step `1e-5`, over all parameters.
pub fn gradient_check(net: &Mlp, x: &[f64], target: &[f64]) -> Result<f64> {
    let xv = ArrayView2::from_shape((1, x.len()), x).map_err(|_| Error::NonFinite)?;
    let tv = ArrayView2::from_shape((1, target.len()), target).map_err(|_| Error::NonFinite)?;
    let (_, grads) = net.loss_and_gradients(xv, tv, None)?;
    let analytic = grads.flatten();
    let base = net.parameters();
    let h = 1e-5;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut params = base.clone();
    for (i, &ga) in analytic.iter().enumerate() {
        params[i] = base[i] + h;
        probe.set_parameters(&params)?;
        let (plus, _) = probe.loss_and_gradients(xv, tv, None)?;
        params[i] = base[i] - h;
        probe.set_parameters(&params)?;
        let (minus, _) = probe.loss_and_gradients(xv, tv, None)?;
        params[i] = base[i];
        let gn = (plus - minus) / (2.0 * h);
        let rel = (ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
