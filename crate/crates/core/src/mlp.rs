//! Fully connected ReLU network with a linear output, trained by Adam on
//! mean squared error plus an L2 penalty on the weights.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpArch {
    pub hidden_sizes: Vec<usize>,
}

impl Default for MlpArch {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![200, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpTrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub l2_alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_epochs: 1000,
            batch_size: 32,
            l2_alpha: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl MlpTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if !(self.l2_alpha >= 0.0 && self.l2_alpha.is_finite()) {
            return Err(Error::invalid("l2_alpha", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("beta1", "Adam betas must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Dense layer: `out = w * in + b` with `w` stored row-major (`n_out x n_in`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            n_in: self.n_in,
            n_out: self.n_out,
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
    /// Objective on the full (standardized) training set after each epoch.
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

impl Mlp {
    /// Network with fan-in scaled uniform weights and zero biases, no scaling.
    pub fn init(n_inputs: usize, arch: &MlpArch, seed: u64) -> Result<Self> {
        if arch.hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden_sizes", "layer sizes must be positive"));
        }
        if n_inputs == 0 {
            return Err(Error::invalid("features", "network needs at least one input"));
        }
        let mut r = rng::stream(seed, 0x31f);
        let mut sizes = vec![n_inputs];
        sizes.extend(&arch.hidden_sizes);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|s| {
                let lim = (6.0 / s[0] as f64).sqrt();
                Layer {
                    n_in: s[0],
                    n_out: s[1],
                    w: (0..s[0] * s[1]).map(|_| r.random_range(-lim..lim)).collect(),
                    b: vec![0.0; s[1]],
                }
            })
            .collect();
        Ok(Self::from_layers(layers))
    }

    /// Network over raw inputs and outputs (identity standardization).
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        let n_in = layers.first().map_or(0, |l| l.n_in);
        Self {
            layers,
            x_mean: vec![0.0; n_in],
            x_scale: vec![1.0; n_in],
            y_mean: 0.0,
            y_scale: 1.0,
            loss_trace: Vec::new(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.x_mean.len()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Output of the network on an already-standardized input.
    fn forward_raw(&self, input: &[f64]) -> f64 {
        let mut a = input.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = l.b.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &l.w[o * l.n_in..(o + 1) * l.n_in];
                for (w, v) in row.iter().zip(&a) {
                    *zo += w * v;
                }
            }
            if k < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        a[0]
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.n_inputs())?;
        Ok(crate::exec::map_indexed(x.n_rows(), |i| {
            let s: Vec<f64> = x
                .row(i)
                .iter()
                .zip(self.x_mean.iter().zip(&self.x_scale))
                .map(|(v, (m, sc))| (v - m) / sc)
                .collect();
            self.y_mean + self.y_scale * self.forward_raw(&s)
        }))
    }

    /// Objective and its gradient over a batch of network-space inputs:
    /// `mean((f(x) - y)^2) + alpha/2 * sum(w^2)`.
    pub fn loss_and_grad(&self, rows: &[&[f64]], y: &[f64], alpha: f64) -> (f64, Vec<Layer>) {
        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let nb = rows.len() as f64;
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        for (row, &t) in rows.iter().zip(y) {
            acts.clear();
            acts.push(row.to_vec());
            for (k, l) in self.layers.iter().enumerate() {
                let a = &acts[k];
                let mut z = l.b.clone();
                for (o, zo) in z.iter_mut().enumerate() {
                    let wr = &l.w[o * l.n_in..(o + 1) * l.n_in];
                    for (w, v) in wr.iter().zip(a) {
                        *zo += w * v;
                    }
                }
                if k < last {
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                acts.push(z);
            }
            let err = acts[last + 1][0] - t;
            loss += err * err / nb;
            let mut delta = vec![2.0 * err / nb];
            for k in (0..self.layers.len()).rev() {
                let l = &self.layers[k];
                let a = &acts[k];
                let g = &mut grads[k];
                for o in 0..l.n_out {
                    g.b[o] += delta[o];
                    let gr = &mut g.w[o * l.n_in..(o + 1) * l.n_in];
                    for (gw, v) in gr.iter_mut().zip(a) {
                        *gw += delta[o] * v;
                    }
                }
                if k > 0 {
                    let mut prev = vec![0.0; l.n_in];
                    for o in 0..l.n_out {
                        let wr = &l.w[o * l.n_in..(o + 1) * l.n_in];
                        for (p, w) in prev.iter_mut().zip(wr) {
                            *p += delta[o] * w;
                        }
                    }
                    // ReLU derivative from the stored activation
                    for (p, &act) in prev.iter_mut().zip(&acts[k]) {
                        if act <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        if alpha > 0.0 {
            for (l, g) in self.layers.iter().zip(grads.iter_mut()) {
                for (w, gw) in l.w.iter().zip(g.w.iter_mut()) {
                    loss += 0.5 * alpha * w * w;
                    *gw += alpha * w;
                }
            }
        }
        (loss, grads)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
        .collect()
}

/// Largest relative difference between backpropagated gradients and central
/// finite differences over every parameter.
pub fn gradient_check(model: &Mlp, x: &Matrix, y: &[f64], alpha: f64, epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::invalid("epsilon", "must be in [1e-7, 1e-3]"));
    }
    x.check_cols(model.n_inputs())?;
    let rows: Vec<&[f64]> = x.rows().collect();
    let analytic = flatten(&model.loss_and_grad(&rows, y, alpha).1);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..analytic.len() {
        let orig = *probe.params_mut().nth(k).expect("param index");
        *probe.params_mut().nth(k).expect("param index") = orig + epsilon;
        let up = probe.loss_and_grad(&rows, y, alpha).0;
        *probe.params_mut().nth(k).expect("param index") = orig - epsilon;
        let down = probe.loss_and_grad(&rows, y, alpha).0;
        *probe.params_mut().nth(k).expect("param index") = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Analytic gradient over a batch of network-space inputs, flattened layer
/// by layer (weights, then biases).
pub fn gradients(model: &Mlp, x: &Matrix, y: &[f64], alpha: f64) -> Vec<f64> {
    let rows: Vec<&[f64]> = x.rows().collect();
    flatten(&model.loss_and_grad(&rows, y, alpha).1)
}

fn standardize(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    let s = var.sqrt();
    (m, if s > 1e-12 { s } else { 1.0 })
}

/// Trains a network on `x`, `y`. Inputs and target are standardized with the
/// training moments, which the model keeps for prediction.
pub fn fit_mlp(x: &Matrix, y: &[f64], arch: &MlpArch, cfg: &MlpTrainConfig) -> Result<Mlp> {
    cfg.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let p = x.n_cols();
    let mut model = Mlp::init(p, arch, cfg.seed)?;
    let (mut xm, mut xs) = (Vec::with_capacity(p), Vec::with_capacity(p));
    for j in 0..p {
        let (m, s) = standardize(&x.rows().map(|r| r[j]).collect::<Vec<_>>());
        xm.push(m);
        xs.push(s);
    }
    let (ym, ys) = standardize(y);
    let xz: Vec<Vec<f64>> = x
        .rows()
        .map(|r| r.iter().enumerate().map(|(j, v)| (v - xm[j]) / xs[j]).collect())
        .collect();
    let yz: Vec<f64> = y.iter().map(|v| (v - ym) / ys).collect();
    model.x_mean = xm;
    model.x_scale = xs;
    model.y_mean = ym;
    model.y_scale = ys;

    let n_params = model.n_params();
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = rng::stream(cfg.seed, 0x5b0f);
    let all_rows: Vec<&[f64]> = xz.iter().map(|r| r.as_slice()).collect();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(cfg.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| xz[i].as_slice()).collect();
            let ty: Vec<f64> = chunk.iter().map(|&i| yz[i]).collect();
            let (_, grads) = model.loss_and_grad(&rows, &ty, cfg.l2_alpha);
            let g = flatten(&grads);
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            for (k, param) in model.params_mut().enumerate() {
                m1[k] = cfg.beta1 * m1[k] + (1.0 - cfg.beta1) * g[k];
                m2[k] = cfg.beta2 * m2[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                *param -= cfg.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + cfg.epsilon);
            }
        }
        let (loss, _) = model.loss_and_grad(&all_rows, &yz, cfg.l2_alpha);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("MLP loss became {loss} in epoch {epoch}")));
        }
        model.loss_trace.push(loss);
    }
    Ok(model)
}
