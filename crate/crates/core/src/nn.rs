//! Small dense-network toolkit with hand-written backward passes. Everything
//! is `f64`, row-major, and allocation-light enough for desk-scale training.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A collection of trainable tensors, exposed flat in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Inner product with four independent accumulators so the loop vectorizes.
/// The summation order is fixed, so results are deterministic.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Fully connected layer `y = W x + b`, `W` stored `out × inp` row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inp: usize,
    pub out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(inp: usize, out: usize) -> Self {
        Dense {
            inp,
            out,
            w: vec![0.0; inp * out],
            b: vec![0.0; out],
        }
    }

    /// Uniform(±√(6/(inp+out))) weights, zero bias.
    pub fn glorot<R: Rng>(inp: usize, out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inp + out) as f64).sqrt();
        Self::uniform(inp, out, limit, rng)
    }

    /// Uniform(±√(6/inp)) weights, zero bias; suited to ReLU stacks.
    pub fn he<R: Rng>(inp: usize, out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inp as f64).sqrt();
        Self::uniform(inp, out, limit, rng)
    }

    pub fn uniform<R: Rng>(inp: usize, out: usize, limit: f64, rng: &mut R) -> Self {
        let w = (0..inp * out).map(|_| rng.gen_range(-limit..=limit)).collect();
        Dense {
            inp,
            out,
            w,
            b: vec![0.0; out],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inp {
            return Err(Error::DimensionMismatch {
                expected: self.inp,
                got: x.len(),
            });
        }
        Ok(self
            .w
            .chunks_exact(self.inp)
            .zip(&self.b)
            .map(|(row, b)| dot(row, x) + b)
            .collect())
    }

    /// Accumulates parameter gradients into `grad` and returns dL/dx.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut grad_in = vec![0.0; self.inp];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.b[o] += g;
            let row = &self.w[o * self.inp..(o + 1) * self.inp];
            let grow = &mut grad.w[o * self.inp..(o + 1) * self.inp];
            for k in 0..self.inp {
                grow[k] += g * x[k];
                grad_in[k] += g * row[k];
            }
        }
        grad_in
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, &mut self.b]
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Multiplies `grad` by the ReLU derivative evaluated at pre-activation `pre`.
pub fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[target]`, computed via log-sum-exp.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments, one moment pair per tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step: u32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Parameters + ?Sized>(cfg: AdamConfig, params: &P) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Adam {
            cfg,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step<P: Parameters + ?Sized, G: Parameters + ?Sized>(&mut self, params: &mut P, grads: &G) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let grads = grads.tensors();
        for (t, p) in params.tensors_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[t], &mut self.v[t], grads[t]);
            for k in 0..p.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                p[k] -= learning_rate * mhat / (vhat.sqrt() + epsilon);
            }
        }
    }
}

/// Central finite-difference check of an analytic gradient. Returns the
/// largest relative error `|a - n| / max(|a| + |n|, floor)` over all entries.
pub fn max_relative_error<P, F>(params: &P, analytic: &P, step: f64, floor: f64, mut loss: F) -> f64
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let mut probe = params.clone();
    let analytic = analytic.tensors();
    let mut worst: f64 = 0.0;
    for t in 0..analytic.len() {
        for k in 0..analytic[t].len() {
            let orig = probe.tensors()[t][k];
            probe.tensors_mut()[t][k] = orig + step;
            let up = loss(&probe);
            probe.tensors_mut()[t][k] = orig - step;
            let down = loss(&probe);
            probe.tensors_mut()[t][k] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[t][k];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}
