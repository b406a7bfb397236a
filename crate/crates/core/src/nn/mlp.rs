use rand::Rng;

use crate::error::{Error, Result};

/// Dense feed-forward Q-network: tanh hidden layers, identity output.
///
/// Parameters live in one flat vector in layer order, each layer storing its
/// row-major `out x in` weight matrix followed by its bias vector. This is
/// also the checkpoint byte order.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Borrowed view of one affine layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl LayerView<'_> {
    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }
}

/// Per-parameter gradient, laid out exactly like [`Mlp::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            values: vec![0.0; net.n_params()],
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.l2_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

fn layer_offsets(dims: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(dims.len());
    let mut acc = 0;
    for pair in dims.windows(2) {
        offsets.push(acc);
        acc += pair[0] * pair[1] + pair[1];
    }
    offsets.push(acc);
    offsets
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid("network needs at least an input and an output layer"));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Mlp {
    /// All-zero network with the given layer widths (`[input, hidden.., output]`).
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        let offsets = layer_offsets(dims);
        let n = *offsets.last().unwrap();
        Ok(Self {
            dims: dims.to_vec(),
            offsets,
            params: vec![0.0; n],
        })
    }

    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for k in 0..net.n_layers() {
            let fan_in = net.dims[k];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let (start, end) = (net.offsets[k], net.offsets[k + 1]);
            for p in &mut net.params[start..end] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    /// Builds a network from explicit `(weights, bias)` pairs, weights row-major `out x in`.
    pub fn from_layers(layers: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        let mut dims = Vec::with_capacity(layers.len() + 1);
        for (k, (w, b)) in layers.iter().enumerate() {
            let outputs = b.len();
            if outputs == 0 || w.len() % outputs != 0 {
                return Err(Error::invalid(format!(
                    "layer {k}: weight length {} is not a multiple of bias length {outputs}",
                    w.len()
                )));
            }
            let inputs = w.len() / outputs;
            match dims.last() {
                None => dims.push(inputs),
                Some(&prev) if prev != inputs => {
                    return Err(Error::invalid(format!(
                        "layer {k}: expects {inputs} inputs but previous layer has {prev} outputs"
                    )))
                }
                Some(_) => {}
            }
            dims.push(outputs);
        }
        let params: Vec<f64> = layers
            .into_iter()
            .flat_map(|(w, b)| w.into_iter().chain(b))
            .collect();
        Self::from_params(&dims, params)
    }

    /// Builds a network from a flat parameter vector in checkpoint order.
    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let offsets = layer_offsets(dims);
        let expected = *offsets.last().unwrap();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self {
            dims: dims.to_vec(),
            offsets,
            params,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn layer(&self, k: usize) -> LayerView<'_> {
        let (inputs, outputs) = (self.dims[k], self.dims[k + 1]);
        let start = self.offsets[k];
        let split = start + inputs * outputs;
        LayerView {
            inputs,
            outputs,
            weights: &self.params[start..split],
            bias: &self.params[split..self.offsets[k + 1]],
        }
    }

    #[cfg(test)]
    pub(crate) fn layer_offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Q-values for every action at `state`.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_input(state.len())?;
        Ok(self.forward_unchecked(state))
    }

    pub(crate) fn forward_unchecked(&self, state: &[f64]) -> Vec<f64> {
        let mut current = state.to_vec();
        let last = self.n_layers() - 1;
        for k in 0..self.n_layers() {
            let layer = self.layer(k);
            let mut next = layer.bias.to_vec();
            for (row, out) in next.iter_mut().enumerate() {
                let w = &layer.weights[row * layer.inputs..(row + 1) * layer.inputs];
                *out += w.iter().zip(&current).map(|(a, b)| a * b).sum::<f64>();
            }
            if k != last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            current = next;
        }
        current
    }

    /// Greedy action at `state` (lowest index wins ties).
    pub fn greedy_action(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(state)?))
    }

    /// Gradient of `is_weight * 0.5 * (Q(state, action) - td_target)^2`.
    pub fn gradient(
        &self,
        state: &[f64],
        action: usize,
        td_target: f64,
        is_weight: f64,
    ) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_gradient(state, action, td_target, is_weight, &mut grads)?;
        Ok(grads)
    }

    /// Adds the weighted squared-TD-error gradient into `grads`. Returns `Q(state, action)`.
    pub fn accumulate_gradient(
        &self,
        state: &[f64],
        action: usize,
        td_target: f64,
        is_weight: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(state.len())?;
        if action >= self.output_dim() {
            return Err(Error::invalid(format!(
                "action {action} out of range for {} outputs",
                self.output_dim()
            )));
        }
        if !td_target.is_finite() {
            return Err(Error::invalid("non-finite TD target"));
        }
        if !(is_weight > 0.0) || !is_weight.is_finite() {
            return Err(Error::invalid("importance weight must be positive and finite"));
        }
        if grads.values.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                actual: grads.values.len(),
            });
        }

        // activations[k] is the input to layer k; the final entry is the output.
        let n_layers = self.n_layers();
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(state.to_vec());
        for k in 0..n_layers {
            let layer = self.layer(k);
            let input = &activations[k];
            let mut z = layer.bias.to_vec();
            for (row, out) in z.iter_mut().enumerate() {
                let w = &layer.weights[row * layer.inputs..(row + 1) * layer.inputs];
                *out += w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            if k + 1 != n_layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        let q = activations[n_layers][action];

        let mut delta = vec![0.0; self.output_dim()];
        delta[action] = is_weight * (q - td_target);

        for k in (0..n_layers).rev() {
            let layer = self.layer(k);
            let input = &activations[k];
            let offset = self.offsets[k];
            let bias_offset = offset + layer.inputs * layer.outputs;
            for (row, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let g = &mut grads.values[offset + row * layer.inputs..offset + (row + 1) * layer.inputs];
                g.iter_mut().zip(input).for_each(|(gw, x)| *gw += d * x);
                grads.values[bias_offset + row] += d;
            }
            if k > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (row, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let w = &layer.weights[row * layer.inputs..(row + 1) * layer.inputs];
                    prev.iter_mut().zip(w).for_each(|(p, w)| *p += w * d);
                }
                // tanh'(z) = 1 - tanh(z)^2, and activations[k] already holds tanh(z).
                prev.iter_mut()
                    .zip(input)
                    .for_each(|(p, a)| *p *= 1.0 - a * a);
                delta = prev;
            }
        }
        Ok(q)
    }

    /// Polyak averaging `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.dims != online.dims {
            return Err(Error::invalid(format!(
                "architecture mismatch: {:?} vs {:?}",
                self.dims, online.dims
            )));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::invalid(format!("soft update rate {tau} outside (0, 1]")));
        }
        if tau == 1.0 {
            self.params.copy_from_slice(&online.params);
            return Ok(());
        }
        for (t, &o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }
}
