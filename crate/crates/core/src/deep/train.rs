use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{NetParams, NetSpec, Network, WeightInit};
use super::tensor::{Real, Tensor4};
use crate::datasets::{FeatureKind, LabeledDataset};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// The learning rate is multiplied by `lr_decay` every `lr_step` epochs.
    pub lr_step: usize,
    pub lr_decay: f64,
    pub momentum: f64,
    /// L2 penalty on weights; biases are not decayed.
    pub weight_decay: f64,
    pub epochs: usize,
    pub init: WeightInit,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.01,
            lr_step: 10,
            lr_decay: 0.5,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 30,
            init: WeightInit::FanIn,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let std = match self.init {
            WeightInit::FanIn => 1.0,
            WeightInit::Gaussian { std } => std,
        };
        let positive = [self.learning_rate, self.lr_decay, std];
        if self.batch_size == 0 || self.epochs == 0 || self.lr_step == 0 || positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("batch size, epochs, lr step, learning rate, lr decay and init std must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("momentum must lie in [0, 1) and weight decay must be non-negative"));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((epoch / self.lr_step) as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub lr: f64,
}

pub fn write_train_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut out = String::from("epoch,loss,train_accuracy,lr\n");
    for e in log {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.loss, e.train_accuracy, e.lr));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Rows `idx` of `x` as an image batch.
pub fn image_batch<T: Real>(x: &Matrix, idx: &[usize], spec: &NetSpec) -> Tensor4<T> {
    let s = spec.input;
    let mut data = Vec::with_capacity(idx.len() * s.len());
    for &i in idx {
        data.extend(x.row(i).iter().map(|&v| T::of(v)));
    }
    Tensor4 {
        dims: [idx.len(), s.channels, s.height, s.width],
        data,
    }
}

pub struct Trained {
    pub params: NetParams<f32>,
    pub log: Vec<EpochLog>,
}

/// Mini-batch SGD with momentum on softmax cross-entropy. The per-epoch
/// log is reported through `on_epoch` as training proceeds.
pub fn train_with(data: &LabeledDataset, spec: &NetSpec, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochLog)) -> Result<Trained> {
    cfg.validate()?;
    spec.validate()?;
    if data.kind != FeatureKind::RawPixels {
        return Err(Error::invalid("the network trains on raw pixels, not precomputed features"));
    }
    if data.features.cols() != spec.input.len() || data.image_shape.is_some_and(|s| s != spec.input) {
        return Err(Error::shape("train", format!("{} features", data.features.cols()), format!("{:?}", spec.input)));
    }
    let classes = spec.classes().expect("validated");
    if let Some(&bad) = data.labels.iter().find(|&&l| usize::from(l) >= classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{classes}")));
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }

    let mut params = NetParams::<f32>::init(spec, cfg.init, &mut Rng::derive(cfg.seed, "deep-init"))?;
    let mut velocity: Vec<Vec<f32>> = params.blocks.iter().map(|b| vec![0.0; b.data.len()]).collect();
    let mut order_rng = Rng::derive(cfg.seed, "deep-shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let momentum = cfg.momentum as f32;
    let decay = cfg.weight_decay as f32;

    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let lr = cfg.learning_rate_at(epoch);
        let lr32 = lr as f32;
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = image_batch::<f32>(&data.features, idx, spec);
            let labels: Vec<u8> = idx.iter().map(|&i| data.labels[i]).collect();
            let (loss, grads, predicted) = Network::new(spec, &params)?.loss_and_grads(&x, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, batch, reason: format!("loss is {loss}") });
            }
            loss_sum += f64::from(loss) * idx.len() as f64;
            correct += predicted.iter().zip(&labels).filter(|(p, l)| **p == usize::from(**l)).count();
            for ((block, v), g) in params.blocks.iter_mut().zip(&mut velocity).zip(&grads) {
                let wd = if block.is_weight() { decay } else { 0.0 };
                for ((w, v), &g) in block.data.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = momentum * *v - lr32 * (g + wd * *w);
                    *w += *v;
                }
            }
        }
        if !params.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: n.div_ceil(cfg.batch_size) - 1,
                reason: "parameters are no longer finite".into(),
            });
        }
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: loss_sum / n as f64,
            train_accuracy: correct as f64 / n as f64,
            lr,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(Trained { params, log })
}

pub fn train(data: &LabeledDataset, spec: &NetSpec, cfg: &TrainConfig) -> Result<Trained> {
    train_with(data, spec, cfg, |_| {})
}
