//! RoCoF predictor: feature construction, a ReLU multilayer perceptron, its
//! minibatch trainer and tolerance-band evaluation.
//!
//! Row-vector convention throughout: a layer maps `x` (1×in) to `x·W + b`
//! with `W` stored row-major as in×out.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::uc_milp::ModelVariant;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid feature: {0}")]
    Feature(String),
    #[error("non-finite parameter in layer {0}")]
    NonFinite(usize),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("label {index} is {value}; labels must be finite and non-zero")]
    BadLabel { index: usize, value: f64 },
    #[error("weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `[u (N_G), disturbance (N_G), P (N_G)]`, P in per unit. The disturbance
/// block carries the largest dispatch at its (lowest-id) argmax position.
pub fn build_features(u: &[bool], p_pu: &[f64]) -> Result<Vec<f64>, NetError> {
    let n = u.len();
    if n == 0 {
        return Err(NetError::Empty);
    }
    if p_pu.len() != n {
        return Err(NetError::Dimension { expected: n, got: p_pu.len() });
    }
    for (g, (&on, &p)) in u.iter().zip(p_pu).enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(NetError::Feature(format!("generator {} dispatch {p}", g + 1)));
        }
        if !on && p != 0.0 {
            return Err(NetError::Feature(format!("generator {} is off but dispatched {p}", g + 1)));
        }
    }
    let mut x = Vec::with_capacity(3 * n);
    x.extend(u.iter().map(|&on| if on { 1.0 } else { 0.0 }));
    let mut w = vec![0.0; n];
    if let Some((g, &pmax)) = p_pu
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (g, p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((g, p)),
        })
    {
        if pmax > 0.0 {
            w[g] = pmax;
        }
    }
    x.extend(w);
    x.extend_from_slice(p_pu);
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major in×out.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, w: vec![0.0; n_in * n_out], b: vec![0.0; n_out] }
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n_out + j]
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w[i * self.n_out..(i + 1) * self.n_out];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self, NetError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NetError::Format(format!("bad layer dims {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|d| {
                let a = (6.0 / (d[0] + d[1]) as f64).sqrt();
                let mut l = Layer::zeros(d[0], d[1]);
                for w in &mut l.w {
                    *w = rng.random_range(-a..a);
                }
                l
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].n_in];
        d.extend(self.layers.iter().map(|l| l.n_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.layers.is_empty() {
            return Err(NetError::Empty);
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.w.len() != l.n_in * l.n_out || l.b.len() != l.n_out {
                return Err(NetError::Format(format!("layer {} has inconsistent sizes", k + 1)));
            }
            if k > 0 && self.layers[k - 1].n_out != l.n_in {
                return Err(NetError::Dimension { expected: self.layers[k - 1].n_out, got: l.n_in });
            }
            if l.w.iter().chain(&l.b).any(|v| !v.is_finite()) {
                return Err(NetError::NonFinite(k + 1));
            }
        }
        if self.layers.last().unwrap().n_out != 1 {
            return Err(NetError::Format("output layer must have width 1".into()));
        }
        Ok(())
    }

    /// Flat parameter vector, layer by layer, `W` then `b`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            p.extend_from_slice(&l.w);
            p.extend_from_slice(&l.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), NetError> {
        if p.len() != self.num_params() {
            return Err(NetError::Dimension { expected: self.num_params(), got: p.len() });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[k..k + nw]);
            k += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
        Ok(())
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            l.affine(&a, &mut z);
            if k < last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        a[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::Dimension { expected: self.input_dim(), got: x.len() });
        }
        self.validate()?;
        Ok(self.forward_unchecked(x))
    }

    /// Mean squared error over the batch and its gradient in [`Mlp::params`] order.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect();
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        for (x, &y) in xs.iter().zip(ys) {
            acts.clear();
            acts.push(x.clone());
            for (k, l) in self.layers.iter().enumerate() {
                let mut z = Vec::new();
                l.affine(&acts[k], &mut z);
                if k < last {
                    for v in &mut z {
                        *v = v.max(0.0);
                    }
                }
                acts.push(z);
            }
            let err = acts[last + 1][0] - y;
            loss += err * err;
            // dL/dz of the output layer.
            let mut delta = vec![2.0 * err / n];
            for k in (0..=last).rev() {
                let l = &self.layers[k];
                let input = &acts[k];
                let g = &mut grads[k];
                for (i, &xi) in input.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (j, &d) in delta.iter().enumerate() {
                        g.w[i * l.n_out + j] += xi * d;
                    }
                }
                for (gb, &d) in g.b.iter_mut().zip(&delta) {
                    *gb += d;
                }
                if k > 0 {
                    // Previous layer is hidden: mask by its ReLU activity.
                    let prev = &acts[k];
                    delta = (0..l.n_in)
                        .map(|i| {
                            if prev[i] > 0.0 {
                                (0..l.n_out).map(|j| l.weight(i, j) * delta[j]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for g in &grads {
            flat.extend_from_slice(&g.w);
            flat.extend_from_slice(&g.b);
        }
        (loss / n, flat)
    }

    pub fn mse(&self, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        let s: f64 = xs.iter().zip(ys).map(|(x, y)| (self.forward_unchecked(x) - y).powi(2)).sum();
        s / xs.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub scenario: usize,
    pub variant: ModelVariant,
    /// 1-based.
    pub period: usize,
    pub event_gen: usize,
    pub event_mw: f64,
}

/// Features with positive RoCoF magnitude labels in Hz/s.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub n_gens: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub meta: Vec<SampleMeta>,
}

impl LabeledDataset {
    pub fn new(n_gens: usize) -> Self {
        Self { n_gens, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, features: Vec<f64>, label: f64, meta: SampleMeta) {
        self.features.push(features);
        self.labels.push(label);
        self.meta.push(meta);
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            n_gens: self.n_gens,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            meta: idx.iter().map(|&i| self.meta[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub max_epochs: usize,
    /// Training stops once the learning rate falls below this.
    pub min_lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![10, 10],
            batch_size: 32,
            initial_lr: 0.05,
            lr_factor: 0.5,
            lr_patience: 300,
            max_epochs: 20_000,
            min_lr: 1e-6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub best_val_mse: f64,
    pub lr: f64,
}

/// Minibatch gradient descent on MSE with a reduce-on-plateau learning
/// rate. Returns the parameters with the best validation MSE.
pub fn train(
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(Mlp, Vec<EpochRecord>), NetError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NetError::Empty);
    }
    if config.batch_size == 0 || !(config.lr_factor > 0.0 && config.lr_factor < 1.0) {
        return Err(NetError::Format("batch_size must be ≥ 1 and lr_factor in (0, 1)".into()));
    }
    let dim = train_set.features[0].len();
    for x in train_set.features.iter().chain(&val_set.features) {
        if x.len() != dim {
            return Err(NetError::Dimension { expected: dim, got: x.len() });
        }
    }
    let mut dims = vec![dim];
    dims.extend(&config.hidden);
    dims.push(1);
    let mut net = Mlp::new(&dims, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut lr = config.initial_lr;
    let mut best = (f64::INFINITY, net.clone());
    let mut stale = 0;
    let mut history = Vec::new();
    let mut params = net.params();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<Vec<f64>> = batch.iter().map(|&i| train_set.features[i].clone()).collect();
            let ys: Vec<f64> = batch.iter().map(|&i| train_set.labels[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&xs, &ys);
            if !loss.is_finite() {
                return Err(NetError::Diverged { epoch, loss });
            }
            sum += loss * batch.len() as f64;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            net.set_params(&params)?;
        }
        let train_mse = sum / train_set.len() as f64;
        let val_mse = net.mse(&val_set.features, &val_set.labels);
        if !val_mse.is_finite() {
            return Err(NetError::Diverged { epoch, loss: val_mse });
        }
        if val_mse < best.0 {
            best = (val_mse, net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.lr_patience {
                lr *= config.lr_factor;
                stale = 0;
            }
        }
        history.push(EpochRecord { epoch, train_mse, val_mse, best_val_mse: best.0, lr });
        if lr < config.min_lr {
            break;
        }
    }
    Ok((best.1, history))
}

/// Fraction of samples with relative error within each tolerance.
pub fn evaluate(mlp: &Mlp, data: &LabeledDataset, tolerances: &[f64]) -> Result<Vec<(f64, f64)>, NetError> {
    if data.is_empty() {
        return Err(NetError::Empty);
    }
    let mut rel = Vec::with_capacity(data.len());
    for (i, (x, &y)) in data.features.iter().zip(&data.labels).enumerate() {
        if !y.is_finite() || y == 0.0 {
            return Err(NetError::BadLabel { index: i, value: y });
        }
        rel.push(((mlp.forward(x)? - y) / y).abs());
    }
    Ok(tolerances
        .iter()
        .map(|&tau| (tau, rel.iter().filter(|&&r| r <= tau).count() as f64 / rel.len() as f64))
        .collect())
}

pub fn weights_to_string(mlp: &Mlp) -> String {
    let mut s = String::new();
    let dims: Vec<String> = mlp.dims().iter().map(|d| d.to_string()).collect();
    writeln!(s, "dims {}", dims.join(" ")).unwrap();
    for (k, l) in mlp.layers.iter().enumerate() {
        writeln!(s, "layer {}", k + 1).unwrap();
        writeln!(s, "W").unwrap();
        for i in 0..l.n_in {
            let row: Vec<String> = (0..l.n_out).map(|j| format!("{:e}", l.weight(i, j))).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        writeln!(s, "b").unwrap();
        let b: Vec<String> = l.b.iter().map(|v| format!("{v:e}")).collect();
        writeln!(s, "{}", b.join(" ")).unwrap();
    }
    s
}

pub fn save_weights(mlp: &Mlp, path: &Path) -> Result<(), NetError> {
    std::fs::write(path, weights_to_string(mlp))?;
    Ok(())
}

fn parse_row(line: Option<&str>, n: usize, what: &str) -> Result<Vec<f64>, NetError> {
    let line = line.ok_or_else(|| NetError::Format(format!("{what} is missing")))?;
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| NetError::Format(format!("{what}: bad number `{t}`"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != n {
        return Err(NetError::Format(format!("{what}: expected {n} values, found {}", vals.len())));
    }
    Ok(vals)
}

pub fn parse_weights(text: &str) -> Result<Mlp, NetError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let head = lines.next().ok_or_else(|| NetError::Format("empty weight file".into()))?;
    let dims: Vec<usize> = head
        .strip_prefix("dims")
        .ok_or_else(|| NetError::Format("first line must be `dims ...`".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| NetError::Format(format!("bad dimension `{t}`"))))
        .collect::<Result<_, _>>()?;
    if dims.len() < 2 {
        return Err(NetError::Format("need at least two dims".into()));
    }
    let mut layers = Vec::new();
    for k in 0..dims.len() - 1 {
        let (n_in, n_out) = (dims[k], dims[k + 1]);
        let name = format!("layer {}", k + 1);
        match lines.next() {
            Some(l) if l == name => {}
            Some(l) => return Err(NetError::Format(format!("expected `{name}`, found `{l}`"))),
            None => return Err(NetError::Format(format!("{name} is missing"))),
        }
        if lines.next() != Some("W") {
            return Err(NetError::Format(format!("{name}: expected `W`")));
        }
        let mut w = Vec::with_capacity(n_in * n_out);
        for i in 0..n_in {
            w.extend(parse_row(lines.next(), n_out, &format!("{name} W row {}", i + 1))?);
        }
        if lines.next() != Some("b") {
            return Err(NetError::Format(format!("{name}: expected `b` after {n_in} weight rows")));
        }
        let b = parse_row(lines.next(), n_out, &format!("{name} b"))?;
        layers.push(Layer { n_in, n_out, w, b });
    }
    if let Some(extra) = lines.next() {
        return Err(NetError::Format(format!("unexpected trailing line `{extra}`")));
    }
    let mlp = Mlp { layers };
    mlp.validate()?;
    Ok(mlp)
}

pub fn load_weights(path: &Path) -> Result<Mlp, NetError> {
    parse_weights(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_one_hot() {
        let x = build_features(&[true, true, true], &[1.0, 0.5, 0.8]).unwrap();
        assert_eq!(&x[3..6], &[1.0, 0.0, 0.0]);
        let tie = build_features(&[true, true], &[0.8, 0.8]).unwrap();
        assert_eq!(&tie[2..4], &[0.8, 0.0]);
        let zero = build_features(&[false, false], &[0.0, 0.0]).unwrap();
        assert_eq!(&zero[2..4], &[0.0, 0.0]);
        assert_eq!(build_features(&[true; 33], &[0.1; 33]).unwrap().len(), 99);
        assert!(build_features(&[false], &[0.2]).is_err());
        assert!(matches!(build_features(&[], &[]), Err(NetError::Empty)));
    }

    #[test]
    fn constant_and_clamped_networks() {
        let mut m = Mlp::new(&[4, 3, 1], 0).unwrap();
        m.set_params(&vec![0.0; m.num_params()]).unwrap();
        m.layers[1].b[0] = 0.3;
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 4.0]).unwrap(), 0.3);
        let clamp = Mlp {
            layers: vec![
                Layer { n_in: 1, n_out: 1, w: vec![-1.0], b: vec![0.0] },
                Layer { n_in: 1, n_out: 1, w: vec![1.0], b: vec![0.0] },
            ],
        };
        assert_eq!(clamp.forward(&[2.0]).unwrap(), 0.0);
        assert!(clamp.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn weight_file_errors() {
        let m = Mlp::new(&[3, 2, 1], 1).unwrap();
        let text = weights_to_string(&m);
        assert_eq!(parse_weights(&text).unwrap(), m);
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        let err = parse_weights(&cut).unwrap_err().to_string();
        assert!(err.contains("layer 2"), "{err}");
        let bad = text.replacen("dims 3 2 1", "dims 3 3 1", 1);
        assert!(parse_weights(&bad).is_err());
    }

    #[test]
    fn constant_labels_fit() {
        let mut d = LabeledDataset::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..64 {
            let x = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            d.push(x, 0.4, SampleMeta { scenario: i, variant: ModelVariant::T, period: 1, event_gen: 1, event_mw: 1.0 });
        }
        let cfg = TrainConfig { hidden: vec![4], max_epochs: 3000, initial_lr: 0.05, ..Default::default() };
        let (m, hist) = train(&d, &d, &cfg).unwrap();
        let mse = m.mse(&d.features, &d.labels);
        assert!(mse < 1e-6, "{mse} after {} epochs", hist.len());
        assert!(hist.windows(2).all(|w| w[1].best_val_mse <= w[0].best_val_mse));
    }
}
