//! Sequential networks over `steps x channels` inputs with exact analytic
//! gradients.
//!
//! Every layer maps a matrix to a matrix: recurrent and convolutional layers
//! run along the step axis, dense layers and activations apply row by row,
//! and global max pooling collapses the step axis to a single row.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tensor::Tensor;
use super::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerConfig {
    Gru { hidden: usize },
    Conv1d { filters: usize, kernel: usize },
    Dense { units: usize },
    Tanh,
    Relu,
    Sigmoid,
    GlobalMaxPool,
    Dropout { rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_steps: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Layer {
    Gru {
        input: usize,
        hidden: usize,
        w: usize,
        u: usize,
        b: usize,
    },
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        k: usize,
        b: usize,
    },
    Dense {
        input: usize,
        units: usize,
        w: usize,
        b: usize,
    },
    Act(Activation),
    GlobalMaxPool,
    Dropout(f64),
}

/// Forward-pass mode. Dropout is only active in training mode.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

#[derive(Clone, Debug)]
enum Cache {
    None,
    Gru {
        z: Vec<f64>,
        r: Vec<f64>,
        cand: Vec<f64>,
        rh: Vec<f64>,
    },
    MaxPool {
        argmax: Vec<usize>,
    },
    Dropout {
        mask: Vec<f64>,
    },
}

/// Recorded forward pass; required by [`Network::backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    /// `activations[i]` is the input of layer `i`; the last entry is the output.
    activations: Vec<Tensor>,
    caches: Vec<Cache>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("tape holds the input at least")
    }

    pub fn input(&self) -> &Tensor {
        &self.activations[0]
    }

    /// Scalar output of a network ending in a single unit.
    pub fn scalar(&self) -> f64 {
        self.output().data[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub params: ParamSet,
    layers: Vec<Layer>,
    output_shape: (usize, usize),
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Network {
    /// Builds the layer stack, registering parameters in layer order. All
    /// parameters start at zero; see [`Network::init`].
    pub fn build(config: NetworkConfig) -> Result<Self, NnError> {
        let mut params = ParamSet::default();
        let mut layers = Vec::with_capacity(config.layers.len());
        let (mut steps, mut ch) = (config.input_steps, config.input_channels);
        if steps == 0 || ch == 0 {
            return Err(NnError::ShapeMismatch {
                expected: vec![1, 1],
                got: vec![steps, ch],
            });
        }
        for (i, lc) in config.layers.iter().enumerate() {
            let layer = match *lc {
                LayerConfig::Gru { hidden } => {
                    let w = params.register(format!("l{i}.gru.w"), vec![3 * hidden, ch]);
                    let u = params.register(format!("l{i}.gru.u"), vec![3 * hidden, hidden]);
                    let b = params.register(format!("l{i}.gru.b"), vec![3 * hidden]);
                    let l = Layer::Gru {
                        input: ch,
                        hidden,
                        w,
                        u,
                        b,
                    };
                    ch = hidden;
                    l
                }
                LayerConfig::Conv1d { filters, kernel } => {
                    if kernel == 0 || kernel > steps {
                        return Err(NnError::KernelLargerThanInput { kernel, steps });
                    }
                    let k = params.register(format!("l{i}.conv.k"), vec![filters, kernel, ch]);
                    let b = params.register(format!("l{i}.conv.b"), vec![filters]);
                    let l = Layer::Conv1d {
                        in_ch: ch,
                        out_ch: filters,
                        kernel,
                        k,
                        b,
                    };
                    steps = steps - kernel + 1;
                    ch = filters;
                    l
                }
                LayerConfig::Dense { units } => {
                    let w = params.register(format!("l{i}.dense.w"), vec![units, ch]);
                    let b = params.register(format!("l{i}.dense.b"), vec![units]);
                    let l = Layer::Dense {
                        input: ch,
                        units,
                        w,
                        b,
                    };
                    ch = units;
                    l
                }
                LayerConfig::Tanh => Layer::Act(Activation::Tanh),
                LayerConfig::Relu => Layer::Act(Activation::Relu),
                LayerConfig::Sigmoid => Layer::Act(Activation::Sigmoid),
                LayerConfig::GlobalMaxPool => {
                    steps = 1;
                    Layer::GlobalMaxPool
                }
                LayerConfig::Dropout { rate } => Layer::Dropout(rate.clamp(0.0, 0.99)),
            };
            layers.push(layer);
        }
        Ok(Network {
            config,
            params,
            layers,
            output_shape: (steps, ch),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&mut self, rng: &mut impl Rng) {
        for layer in self.layers.clone() {
            match layer {
                Layer::Gru { input, hidden, w, u, .. } => {
                    let (wn, un) = (self.slot_name(w), self.slot_name(u));
                    self.params.glorot(&wn, input, hidden, rng);
                    self.params.glorot(&un, hidden, hidden, rng);
                }
                Layer::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    k,
                    ..
                } => {
                    let kn = self.slot_name(k);
                    self.params.glorot(&kn, kernel * in_ch, kernel * out_ch, rng);
                }
                Layer::Dense { input, units, w, .. } => {
                    let wn = self.slot_name(w);
                    self.params.glorot(&wn, input, units, rng);
                }
                _ => {}
            }
        }
    }

    fn slot_name(&self, offset: usize) -> String {
        self.params
            .slots
            .iter()
            .find(|s| s.offset == offset)
            .map(|s| s.name.clone())
            .expect("offset belongs to a registered slot")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.config.input_steps, self.config.input_channels)
    }

    pub fn output_shape(&self) -> (usize, usize) {
        self.output_shape
    }

    pub fn forward(&self, input: &Tensor, mode: &mut Mode<'_>) -> Result<Tape, NnError> {
        let (steps, ch) = self.input_shape();
        if input.shape != [steps, ch] {
            return Err(NnError::ShapeMismatch {
                expected: vec![steps, ch],
                got: input.shape.clone(),
            });
        }
        let p = &self.params.values;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for layer in &self.layers {
            let x = activations.last().expect("non-empty");
            let (out, cache) = match *layer {
                Layer::Gru { input, hidden, w, u, b } => gru_forward(x, p, input, hidden, w, u, b),
                Layer::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    k,
                    b,
                } => (conv_forward(x, p, in_ch, out_ch, kernel, k, b), Cache::None),
                Layer::Dense { input, units, w, b } => (dense_forward(x, p, input, units, w, b), Cache::None),
                Layer::Act(a) => (
                    x.map(|v| match a {
                        Activation::Tanh => v.tanh(),
                        Activation::Relu => v.max(0.0),
                        Activation::Sigmoid => sigmoid(v),
                    }),
                    Cache::None,
                ),
                Layer::GlobalMaxPool => {
                    let (rows, cols) = (x.rows(), x.cols());
                    let mut out = vec![f64::NEG_INFINITY; cols];
                    let mut argmax = vec![0; cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            let v = x.data[r * cols + c];
                            if v > out[c] {
                                out[c] = v;
                                argmax[c] = r;
                            }
                        }
                    }
                    (Tensor::row(out), Cache::MaxPool { argmax })
                }
                Layer::Dropout(rate) => match mode {
                    Mode::Train(rng) if rate > 0.0 => {
                        let keep = 1.0 - rate;
                        let mask: Vec<f64> = (0..x.len())
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        let out = Tensor {
                            shape: x.shape.clone(),
                            data: x.data.iter().zip(&mask).map(|(v, m)| v * m).collect(),
                        };
                        (out, Cache::Dropout { mask })
                    }
                    _ => (x.clone(), Cache::None),
                },
            };
            activations.push(out);
            caches.push(cache);
        }
        Ok(Tape { activations, caches })
    }

    /// Scalar output in evaluation mode.
    pub fn predict(&self, input: &Tensor) -> Result<f64, NnError> {
        Ok(self.forward(input, &mut Mode::Eval)?.scalar())
    }

    /// Back-propagates `d_output` through a recorded pass. Parameter
    /// gradients are added into `param_grads` when given; the gradient with
    /// respect to the network input is returned.
    pub fn backward(
        &self,
        tape: &Tape,
        d_output: &Tensor,
        mut param_grads: Option<&mut [f64]>,
    ) -> Result<Tensor, NnError> {
        if tape.caches.len() != self.layers.len() || tape.activations.len() != self.layers.len() + 1 {
            return Err(NnError::NoForwardPass);
        }
        if d_output.shape != tape.output().shape {
            return Err(NnError::ShapeMismatch {
                expected: tape.output().shape.clone(),
                got: d_output.shape.clone(),
            });
        }
        if let Some(g) = param_grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(NnError::ShapeMismatch {
                    expected: vec![self.params.len()],
                    got: vec![g.len()],
                });
            }
        }
        let p = &self.params.values;
        let mut grad = d_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.activations[i];
            let y = &tape.activations[i + 1];
            grad = match (*layer, &tape.caches[i]) {
                (Layer::Gru { input, hidden, w, u, b }, Cache::Gru { z, r, cand, rh }) => gru_backward(
                    x,
                    y,
                    &grad,
                    p,
                    param_grads.as_deref_mut(),
                    (input, hidden, w, u, b),
                    (z, r, cand, rh),
                ),
                (
                    Layer::Conv1d {
                        in_ch,
                        out_ch,
                        kernel,
                        k,
                        b,
                    },
                    _,
                ) => conv_backward(x, &grad, p, param_grads.as_deref_mut(), in_ch, out_ch, kernel, k, b),
                (Layer::Dense { input, units, w, b }, _) => {
                    dense_backward(x, &grad, p, param_grads.as_deref_mut(), input, units, w, b)
                }
                (Layer::Act(a), _) => Tensor {
                    shape: x.shape.clone(),
                    data: grad
                        .data
                        .iter()
                        .zip(x.data.iter().zip(&y.data))
                        .map(|(&g, (&xi, &yi))| match a {
                            Activation::Tanh => g * (1.0 - yi * yi),
                            Activation::Relu => {
                                if xi > 0.0 {
                                    g
                                } else {
                                    0.0
                                }
                            }
                            Activation::Sigmoid => g * yi * (1.0 - yi),
                        })
                        .collect(),
                },
                (Layer::GlobalMaxPool, Cache::MaxPool { argmax }) => {
                    let cols = x.cols();
                    let mut d = Tensor::zeros(x.shape.clone());
                    for (c, &r) in argmax.iter().enumerate() {
                        d.data[r * cols + c] = grad.data[c];
                    }
                    d
                }
                (Layer::Dropout(_), Cache::Dropout { mask }) => Tensor {
                    shape: grad.shape.clone(),
                    data: grad.data.iter().zip(mask).map(|(g, m)| g * m).collect(),
                },
                (Layer::Dropout(_), _) => grad,
                _ => return Err(NnError::NoForwardPass),
            };
        }
        Ok(grad)
    }

    /// Scalar output and its gradient with respect to the input, eval mode.
    pub fn input_gradient(&self, input: &Tensor) -> Result<(f64, Tensor), NnError> {
        let tape = self.forward(input, &mut Mode::Eval)?;
        let d_out = Tensor {
            shape: tape.output().shape.clone(),
            data: vec![1.0; tape.output().len()],
        };
        let g = self.backward(&tape, &d_out, None)?;
        Ok((tape.scalar(), g))
    }
}

fn gru_forward(x: &Tensor, p: &[f64], input: usize, hidden: usize, w: usize, u: usize, b: usize) -> (Tensor, Cache) {
    let steps = x.rows();
    let h = hidden;
    let wm = &p[w..w + 3 * h * input];
    let um = &p[u..u + 3 * h * h];
    let bv = &p[b..b + 3 * h];
    let mut out = vec![0.0; steps * h];
    let mut z = vec![0.0; steps * h];
    let mut r = vec![0.0; steps * h];
    let mut cand = vec![0.0; steps * h];
    let mut rh = vec![0.0; steps * h];
    let zero = vec![0.0; h];
    for t in 0..steps {
        let xt = &x.data[t * input..(t + 1) * input];
        let (done, rest) = out.split_at_mut(t * h);
        let hprev: &[f64] = if t == 0 { &zero } else { &done[(t - 1) * h..] };
        let ht = &mut rest[..h];
        for j in 0..h {
            let az = bv[j] + dot(&wm[j * input..(j + 1) * input], xt) + dot(&um[j * h..(j + 1) * h], hprev);
            let rj = h + j;
            let ar = bv[rj] + dot(&wm[rj * input..(rj + 1) * input], xt) + dot(&um[rj * h..(rj + 1) * h], hprev);
            z[t * h + j] = sigmoid(az);
            r[t * h + j] = sigmoid(ar);
            rh[t * h + j] = r[t * h + j] * hprev[j];
        }
        let rh_t = &rh[t * h..(t + 1) * h];
        for j in 0..h {
            let cj = 2 * h + j;
            let ac = bv[cj] + dot(&wm[cj * input..(cj + 1) * input], xt) + dot(&um[cj * h..(cj + 1) * h], rh_t);
            let c = ac.tanh();
            cand[t * h + j] = c;
            let zt = z[t * h + j];
            ht[j] = (1.0 - zt) * hprev[j] + zt * c;
        }
    }
    (
        Tensor {
            shape: vec![steps, h],
            data: out,
        },
        Cache::Gru { z, r, cand, rh },
    )
}

type GruDims = (usize, usize, usize, usize, usize);
type GruCache<'a> = (&'a [f64], &'a [f64], &'a [f64], &'a [f64]);

fn gru_backward(
    x: &Tensor,
    y: &Tensor,
    d_out: &Tensor,
    p: &[f64],
    mut grads: Option<&mut [f64]>,
    (input, h, w, u, b): GruDims,
    (z, r, cand, rh): GruCache<'_>,
) -> Tensor {
    let steps = x.rows();
    let wm = &p[w..w + 3 * h * input];
    let um = &p[u..u + 3 * h * h];
    let mut dx = vec![0.0; steps * input];
    let mut dh_next = vec![0.0; h];
    let mut da = vec![0.0; 3 * h];
    let mut d_rh = vec![0.0; h];
    let zero = vec![0.0; h];
    for t in (0..steps).rev() {
        let xt = &x.data[t * input..(t + 1) * input];
        let hprev: &[f64] = if t == 0 { &zero } else { &y.data[(t - 1) * h..t * h] };
        let mut dh_prev = vec![0.0; h];
        for j in 0..h {
            let i = t * h + j;
            let dh = d_out.data[i] + dh_next[j];
            let (zt, ct) = (z[i], cand[i]);
            let dz = dh * (ct - hprev[j]);
            let dc = dh * zt;
            dh_prev[j] += dh * (1.0 - zt);
            da[j] = dz * zt * (1.0 - zt);
            da[2 * h + j] = dc * (1.0 - ct * ct);
        }
        // Candidate path through the reset-gated state.
        d_rh.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..h {
            axpy(da[2 * h + j], &um[(2 * h + j) * h..(2 * h + j + 1) * h], &mut d_rh);
        }
        for j in 0..h {
            let i = t * h + j;
            let rt = r[i];
            let dr = d_rh[j] * hprev[j];
            dh_prev[j] += d_rh[j] * rt;
            da[h + j] = dr * rt * (1.0 - rt);
        }
        // Update and reset gates read h_{t-1} directly.
        for g in 0..2 * h {
            axpy(da[g], &um[g * h..(g + 1) * h], &mut dh_prev);
        }
        let dxt = &mut dx[t * input..(t + 1) * input];
        for g in 0..3 * h {
            axpy(da[g], &wm[g * input..(g + 1) * input], dxt);
        }
        if let Some(gr) = grads.as_deref_mut() {
            let rh_t = &rh[t * h..(t + 1) * h];
            for g in 0..3 * h {
                let a = da[g];
                if a == 0.0 {
                    continue;
                }
                axpy(a, xt, &mut gr[w + g * input..w + (g + 1) * input]);
                let hsrc = if g >= 2 * h { rh_t } else { hprev };
                axpy(a, hsrc, &mut gr[u + g * h..u + (g + 1) * h]);
                gr[b + g] += a;
            }
        }
        dh_next = dh_prev;
    }
    Tensor {
        shape: x.shape.clone(),
        data: dx,
    }
}

fn conv_forward(x: &Tensor, p: &[f64], in_ch: usize, out_ch: usize, kernel: usize, k: usize, b: usize) -> Tensor {
    let steps = x.rows() - kernel + 1;
    let span = kernel * in_ch;
    let mut out = vec![0.0; steps * out_ch];
    for t in 0..steps {
        let patch = &x.data[t * in_ch..t * in_ch + span];
        for o in 0..out_ch {
            out[t * out_ch + o] = p[b + o] + dot(&p[k + o * span..k + (o + 1) * span], patch);
        }
    }
    Tensor {
        shape: vec![steps, out_ch],
        data: out,
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &Tensor,
    d_out: &Tensor,
    p: &[f64],
    mut grads: Option<&mut [f64]>,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    k: usize,
    b: usize,
) -> Tensor {
    let steps = d_out.rows();
    let span = kernel * in_ch;
    let mut dx = vec![0.0; x.len()];
    for t in 0..steps {
        let patch = &x.data[t * in_ch..t * in_ch + span];
        for o in 0..out_ch {
            let g = d_out.data[t * out_ch + o];
            if g == 0.0 {
                continue;
            }
            axpy(g, &p[k + o * span..k + (o + 1) * span], &mut dx[t * in_ch..t * in_ch + span]);
            if let Some(gr) = grads.as_deref_mut() {
                axpy(g, patch, &mut gr[k + o * span..k + (o + 1) * span]);
                gr[b + o] += g;
            }
        }
    }
    Tensor {
        shape: x.shape.clone(),
        data: dx,
    }
}

fn dense_forward(x: &Tensor, p: &[f64], input: usize, units: usize, w: usize, b: usize) -> Tensor {
    let rows = x.rows();
    let mut out = vec![0.0; rows * units];
    for r in 0..rows {
        let xr = &x.data[r * input..(r + 1) * input];
        for o in 0..units {
            out[r * units + o] = p[b + o] + dot(&p[w + o * input..w + (o + 1) * input], xr);
        }
    }
    Tensor {
        shape: vec![rows, units],
        data: out,
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    x: &Tensor,
    d_out: &Tensor,
    p: &[f64],
    mut grads: Option<&mut [f64]>,
    input: usize,
    units: usize,
    w: usize,
    b: usize,
) -> Tensor {
    let rows = x.rows();
    let mut dx = vec![0.0; rows * input];
    for r in 0..rows {
        let xr = &x.data[r * input..(r + 1) * input];
        for o in 0..units {
            let g = d_out.data[r * units + o];
            if g == 0.0 {
                continue;
            }
            axpy(g, &p[w + o * input..w + (o + 1) * input], &mut dx[r * input..(r + 1) * input]);
            if let Some(gr) = grads.as_deref_mut() {
                axpy(g, xr, &mut gr[w + o * input..w + (o + 1) * input]);
                gr[b + o] += g;
            }
        }
    }
    Tensor {
        shape: x.shape.clone(),
        data: dx,
    }
}
