//! Feedforward ReLU network for the data-driven human model.
//!
//! Four affine layers (`input → h → h → h → 4`), ReLU after the first three.
//! The network predicts the one-step residual `x_H(k+1) − x_H(k)` from a
//! standardized window of the last `N + 1` frames `(x_H, x_R, x_G)`. After
//! training the output de-standardization is folded into the last layer, so
//! the last layer alone maps `[h₃; 1]` to the residual and can be adapted
//! online by the belief-space RLS.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adapt::{flatten_rows, unflatten_rows, Observation, N_H};
use crate::error::{Error, Result};
use crate::world::{AgentState, Vec2, Vec4};

/// Values per frame: `x_H` (4), `x_R` (4), `x_G` (2).
pub const FRAME_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub human: AgentState,
    pub robot: AgentState,
    pub goal: Vec2,
}

impl Frame {
    fn write(&self, out: &mut [f64]) {
        out[..4].copy_from_slice(self.human.to_vec4().as_slice());
        out[4..8].copy_from_slice(self.robot.to_vec4().as_slice());
        out[8..10].copy_from_slice(self.goal.as_slice());
    }
}

/// Flattened input window; the newest frame is last. Frames before the start
/// of the record repeat the first available frame.
pub fn window_input(frames: &[Frame], end: usize, history_len: usize) -> DVector<f64> {
    let mut v = DVector::zeros((history_len + 1) * FRAME_DIM);
    for j in 0..=history_len {
        let idx = (end + j).saturating_sub(history_len);
        frames[idx].write(&mut v.as_mut_slice()[j * FRAME_DIM..(j + 1) * FRAME_DIM]);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub format: String,
    pub version: u32,
    pub history_len: usize,
    pub sizes: Vec<usize>,
    pub input_mean: DVector<f64>,
    pub input_std: DVector<f64>,
    pub output_mean: DVector<f64>,
    pub output_std: DVector<f64>,
    pub layers: Vec<Layer>,
}

const MODEL_FORMAT: &str = "safe-explore-mlp";

/// Intermediate activations kept for backprop.
struct Forward {
    /// Post-activation of each layer input (index 0 is the standardized input).
    acts: Vec<DMatrix<f64>>,
    out: DMatrix<f64>,
}

impl MlpModel {
    pub fn new(input_dim: usize, hidden: usize, history_len: usize, seed: u64) -> Self {
        let sizes = vec![input_dim, hidden, hidden, hidden, N_H];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let scale = (2.0 / w[0] as f64).sqrt();
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| {
                        scale * rng.sample::<f64, _>(StandardNormal)
                    }),
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Self {
            format: MODEL_FORMAT.into(),
            version: 1,
            history_len,
            input_mean: DVector::zeros(input_dim),
            input_std: DVector::from_element(input_dim, 1.0),
            output_mean: DVector::zeros(N_H),
            output_std: DVector::from_element(N_H, 1.0),
            sizes,
            layers,
        }
    }

    pub fn hidden(&self) -> usize {
        self.sizes[self.sizes.len() - 2]
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn standardize(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for (i, mut row) in z.row_iter_mut().enumerate() {
            let (m, s) = (self.input_mean[i], self.input_std[i]);
            row.apply(|v| *v = (*v - m) / s);
        }
        z
    }

    fn forward_batch(&self, x_raw: &DMatrix<f64>) -> Forward {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut h = self.standardize(x_raw);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &h;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            acts.push(h);
            h = z;
        }
        Forward { acts, out: h }
    }

    /// Raw network output (before output de-standardization) for a batch of
    /// columns.
    fn raw_output(&self, x_raw: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_batch(x_raw).out
    }

    /// Predicted residual for one input window.
    pub fn predict_residual(&self, input: &DVector<f64>) -> Vec4 {
        let x = DMatrix::from_column_slice(input.len(), 1, input.as_slice());
        let out = self.raw_output(&x);
        Vec4::from_fn(|i, _| self.output_mean[i] + self.output_std[i] * out[(i, 0)])
    }

    /// Post-ReLU activations of the penultimate layer with a constant 1 appended.
    pub fn features(&self, input: &DVector<f64>) -> DVector<f64> {
        let x = DMatrix::from_column_slice(input.len(), 1, input.as_slice());
        let fwd = self.forward_batch(&x);
        let h = fwd.acts.last().expect("at least one layer");
        let mut phi = DVector::zeros(h.nrows() + 1);
        phi.rows_mut(0, h.nrows()).copy_from(&h.column(0));
        phi[h.nrows()] = 1.0;
        phi
    }

    /// Fold the output de-standardization into the last layer.
    pub fn fold_output_scaling(&mut self) {
        let last = self.layers.last_mut().expect("at least one layer");
        for i in 0..N_H {
            let s = self.output_std[i];
            last.weights.row_mut(i).scale_mut(s);
            last.bias[i] = s * last.bias[i] + self.output_mean[i];
        }
        self.output_mean.fill(0.0);
        self.output_std.fill(1.0);
    }

    /// Last layer as the `4 × (h+1)` block `[W | b]`, flattened row-major.
    /// Requires output scaling to be folded.
    pub fn last_layer_theta(&self) -> DVector<f64> {
        let last = self.layers.last().expect("at least one layer");
        let h = last.weights.ncols();
        let mut c = DMatrix::zeros(N_H, h + 1);
        c.view_mut((0, 0), (N_H, h)).copy_from(&last.weights);
        c.set_column(h, &last.bias);
        flatten_rows(&c)
    }

    pub fn set_last_layer_theta(&mut self, theta: &DVector<f64>) {
        let c = unflatten_rows(theta, N_H);
        let last = self.layers.last_mut().expect("at least one layer");
        let h = last.weights.ncols();
        last.weights.copy_from(&c.view((0, 0), (N_H, h)));
        last.bias.copy_from(&c.column(h));
    }

    /// Parameter-affine observation for adaptation: `φ = [h₃; 1]`, known
    /// offset = current human state (the network predicts a residual).
    pub fn observation(&self, frames: &[Frame], end: usize) -> Observation {
        let input = window_input(frames, end, self.history_len);
        Observation::new(self.features(&input), frames[end].human.to_vec4())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: MlpModel = serde_json::from_str(&text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Config(format!(
                "{}: not a {MODEL_FORMAT} file",
                path.display()
            )));
        }
        if model.layers.len() + 1 != model.sizes.len() {
            return Err(Error::Config(
                "model layer count does not match sizes".into(),
            ));
        }
        Ok(model)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
        out
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.as_mut_slice().copy_from_slice(&p[at..at + n]);
            at += n;
            let n = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&p[at..at + n]);
            at += n;
        }
    }

    /// Mean squared error over a batch (targets already standardized) and its
    /// gradient, flattened in `params_flat` order.
    pub fn loss_and_grad(&self, x_raw: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, Vec<f64>) {
        let fwd = self.forward_batch(x_raw);
        let count = (y.nrows() * y.ncols()) as f64;
        let diff = &fwd.out - y;
        let loss = diff.norm_squared() / count;

        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(self.layers.len());
        let mut delta = diff * (2.0 / count);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let a_in = &fwd.acts[i];
            let gw = &delta * a_in.transpose();
            let gb = delta.column_sum();
            grads.push((gw, gb));
            if i > 0 {
                let mut back = layer.weights.transpose() * &delta;
                // ReLU derivative: the input to layer i is post-ReLU of layer i−1
                back.zip_apply(a_in, |g, a| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.num_params());
        for (gw, gb) in grads {
            flat.extend_from_slice(gw.as_slice());
            flat.extend_from_slice(gb.as_slice());
        }
        (loss, flat)
    }
}

/// Bias-corrected adaptive-moment optimizer.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Windowed supervised pairs cut from whole trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub history_len: usize,
    pub trajectories: Vec<Vec<Frame>>,
    /// One column per sample.
    pub inputs: DMatrix<f64>,
    /// Next human state, one column per sample.
    pub labels: DMatrix<f64>,
    /// Current human state for each sample (residual base).
    pub current: DMatrix<f64>,
}

impl TrajectoryDataset {
    /// Cut every contiguous window `k−N..=k` with label `x_H(k+1)`.
    pub fn from_trajectories(trajectories: Vec<Vec<Frame>>, history_len: usize) -> Self {
        let count: usize = trajectories
            .iter()
            .map(|t| t.len().saturating_sub(1).saturating_sub(history_len))
            .sum();
        let in_dim = (history_len + 1) * FRAME_DIM;
        let mut inputs = DMatrix::zeros(in_dim, count);
        let mut labels = DMatrix::zeros(N_H, count);
        let mut current = DMatrix::zeros(N_H, count);
        let mut col = 0;
        for traj in &trajectories {
            if traj.len() < history_len + 2 {
                continue;
            }
            for k in history_len..traj.len() - 1 {
                inputs.set_column(col, &window_input(traj, k, history_len));
                labels.set_column(col, &traj[k + 1].human.to_vec4());
                current.set_column(col, &traj[k].human.to_vec4());
                col += 1;
            }
        }
        Self {
            history_len,
            trajectories,
            inputs,
            labels,
            current,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn residuals(&self) -> DMatrix<f64> {
        &self.labels - &self.current
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 1e-3,
            batch_size: 64,
            hidden: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

fn column_stats(m: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = m.ncols().max(1) as f64;
    let mean = m.column_sum() / n;
    let mut std = DVector::zeros(m.nrows());
    for i in 0..m.nrows() {
        let var = m.row(i).iter().map(|v| (v - mean[i]).powi(2)).sum::<f64>() / n;
        std[i] = if var > 1e-12 { var.sqrt() } else { 1.0 };
    }
    (mean, std)
}

/// Set normalization statistics from the dataset, then minimize the
/// standardized residual MSE with Adam. Output scaling is folded at the end.
pub fn train(
    mut model: MlpModel,
    dataset: &TrajectoryDataset,
    params: &TrainParams,
) -> Result<(MlpModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if params.epochs == 0 {
        return Ok((
            model,
            TrainReport {
                epoch_losses: vec![],
            },
        ));
    }
    let (im, is) = column_stats(&dataset.inputs);
    let residuals = dataset.residuals();
    let (om, os) = column_stats(&residuals);
    model.input_mean = im;
    model.input_std = is;
    model.output_mean = om.clone();
    model.output_std = os.clone();

    let mut targets = residuals;
    for i in 0..N_H {
        let (m, s) = (om[i], os[i]);
        targets.row_mut(i).apply(|v| *v = (*v - m) / s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_7a1e);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut flat = model.params_flat();
    let mut adam = Adam::new(flat.len(), params.lr);
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let bs = params.batch_size.max(1);

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(bs) {
            let x = dataset.inputs.select_columns(chunk.iter());
            let y = targets.select_columns(chunk.iter());
            model.set_params_flat(&flat);
            let (loss, grad) = model.loss_and_grad(&x, &y);
            total += loss * chunk.len() as f64;
            adam.step(&mut flat, &grad);
        }
        let mean = total / dataset.len() as f64;
        if !mean.is_finite() || mean > 1e6 {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }
    model.set_params_flat(&flat);
    model.fold_output_scaling();
    Ok((model, TrainReport { epoch_losses }))
}

/// Mean squared one-step error (raw units, averaged over the 4 outputs).
pub fn dataset_mse(model: &MlpModel, dataset: &TrajectoryDataset) -> f64 {
    let out = model.raw_output(&dataset.inputs);
    let mut pred = out;
    for i in 0..N_H {
        let (m, s) = (model.output_mean[i], model.output_std[i]);
        pred.row_mut(i).apply(|v| *v = m + s * *v);
    }
    let diff = pred - dataset.residuals();
    diff.norm_squared() / (diff.len().max(1) as f64)
}

/// Per-output variance of the labels, averaged over outputs.
pub fn label_variance(dataset: &TrajectoryDataset) -> f64 {
    let (_, std) = column_stats(&dataset.labels);
    std.iter().map(|s| s * s).sum::<f64>() / N_H as f64
}
