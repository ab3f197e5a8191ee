//! Training loop: per-epoch shuffled batches, RMSprop updates, the published
//! learning-rate schedule, inverted dropout, and a per-epoch loss log.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::bce_loss;
use super::tensor::Tensor;
use super::{Gradients, Network, NetworkSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dropout: f64,
    pub rho: f64,
    pub eps: f64,
    pub lr_start: f64,
    /// Last epoch of the flat initial phase.
    pub lr_plateau_epoch: usize,
    pub lr_floor: f64,
    /// Epoch at which the floor is reached; constant afterwards.
    pub lr_floor_epoch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 120,
            batch_size: 8,
            seed: 0,
            dropout: 0.35,
            rho: 0.9,
            eps: 1e-6,
            lr_start: 5e-4,
            lr_plateau_epoch: 10,
            lr_floor: 1e-5,
            lr_floor_epoch: 60,
        }
    }
}

/// Flat at `lr_start` through the plateau, log-linear decay to `lr_floor`
/// by `lr_floor_epoch`, constant afterwards. Epochs are 1-based.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    if epoch <= cfg.lr_plateau_epoch {
        cfg.lr_start
    } else if epoch >= cfg.lr_floor_epoch {
        cfg.lr_floor
    } else {
        let span = (cfg.lr_floor_epoch - cfg.lr_plateau_epoch) as f64;
        let t = (epoch - cfg.lr_plateau_epoch) as f64 / span;
        (cfg.lr_start.ln() + t * (cfg.lr_floor.ln() - cfg.lr_start.ln())).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

pub fn write_train_log(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut text = String::from("epoch,lr,mean_loss,train_accuracy\n");
    for l in logs {
        text.push_str(&format!(
            "{},{:?},{:?},{:?}\n",
            l.epoch, l.lr, l.mean_loss, l.train_accuracy
        ));
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Rmsprop {
    acc: Vec<Vec<f64>>,
}

impl Rmsprop {
    fn new(sizes: &[usize]) -> Rmsprop {
        Rmsprop {
            acc: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn update(
        &mut self,
        group: usize,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
        rho: f64,
        eps: f64,
    ) {
        let acc = &mut self.acc[group];
        for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
            *a = rho * *a + (1.0 - rho) * g * g;
            *p -= lr * g / (*a + eps).sqrt();
        }
    }
}

fn add_scaled(into: &mut Gradients, from: &Gradients) {
    let add = |a: &mut Vec<f64>, b: &[f64]| {
        if a.is_empty() {
            *a = b.to_vec();
        } else {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    };
    for (dst, src) in into.convs.iter_mut().zip(&from.convs) {
        add(&mut dst.0, &src.0);
        add(&mut dst.1, &src.1);
    }
    add(&mut into.fc.0, &from.fc.0);
    add(&mut into.fc.1, &from.fc.1);
    add(&mut into.out.0, &from.out.0);
    add(&mut into.out.1, &from.out.1);
}

fn scale(g: &mut Gradients, s: f64) {
    let sc = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x *= s);
    for c in g.convs.iter_mut() {
        sc(&mut c.0);
        sc(&mut c.1);
    }
    sc(&mut g.fc.0);
    sc(&mut g.fc.1);
    sc(&mut g.out.0);
    sc(&mut g.out.1);
}

/// Train a network from the given spec. Deterministic in `cfg.seed`.
pub fn train(
    spec: NetworkSpec,
    inputs: &[Tensor],
    labels: &[u8],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<EpochLog>)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Training(format!(
            "{} inputs vs {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Training("need >= 1 study per class".into()));
    }
    let mut net = Network::init(spec, cfg.seed)?;
    let sizes: Vec<usize> = net
        .convs
        .iter()
        .flat_map(|c| [c.weights.len(), c.biases.len()])
        .chain([
            net.fc.weights.len(),
            net.fc.biases.len(),
            net.out.weights.len(),
            net.out.biases.len(),
        ])
        .collect();
    let mut opt = Rmsprop::new(&sizes);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0bde_b5ee);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd209_0007);
    let mut logs = Vec::with_capacity(cfg.epochs);
    let n = inputs.len();
    let batch = cfg.batch_size.max(1).min(n);
    for epoch in 1..=cfg.epochs {
        let lr = learning_rate(cfg, epoch);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut acc_grads = Gradients {
                convs: vec![(Vec::new(), Vec::new()); net.convs.len()],
                fc: (Vec::new(), Vec::new()),
                out: (Vec::new(), Vec::new()),
            };
            for &i in chunk {
                let dropout = if cfg.dropout > 0.0 {
                    Some((&mut dropout_rng, cfg.dropout))
                } else {
                    None
                };
                let cache = net.forward(&inputs[i], dropout)?;
                let loss = bce_loss(cache.probs[1], labels[i]);
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, sample {i}: probs {:?}",
                        cache.probs
                    )));
                }
                epoch_loss += loss;
                let g = net.backward(&cache, labels[i])?;
                add_scaled(&mut acc_grads, &g);
            }
            scale(&mut acc_grads, 1.0 / chunk.len() as f64);
            let mut group = 0;
            for (l, (gw, gb)) in acc_grads.convs.iter().enumerate() {
                opt.update(group, &mut net.convs[l].weights, gw, lr, cfg.rho, cfg.eps);
                opt.update(group + 1, &mut net.convs[l].biases, gb, lr, cfg.rho, cfg.eps);
                group += 2;
            }
            opt.update(group, &mut net.fc.weights, &acc_grads.fc.0, lr, cfg.rho, cfg.eps);
            opt.update(group + 1, &mut net.fc.biases, &acc_grads.fc.1, lr, cfg.rho, cfg.eps);
            opt.update(group + 2, &mut net.out.weights, &acc_grads.out.0, lr, cfg.rho, cfg.eps);
            opt.update(group + 3, &mut net.out.biases, &acc_grads.out.1, lr, cfg.rho, cfg.eps);
        }
        // dropout-free evaluation pass
        let mut correct = 0usize;
        for (input, &label) in inputs.iter().zip(labels) {
            let p = net.predict(input)?;
            if u8::from(p > 0.5) == label {
                correct += 1;
            }
        }
        logs.push(EpochLog {
            epoch,
            lr,
            mean_loss: epoch_loss / n as f64,
            train_accuracy: correct as f64 / n as f64,
        });
    }
    Ok((net, logs))
}
