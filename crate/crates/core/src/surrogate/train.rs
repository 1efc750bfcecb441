//! Mini-batch RMSprop training loop.

use serde::{Deserialize, Serialize};

use super::dataset::WindowedDataset;
use super::optim::RmsProp;
use super::seq2seq::{Dims, ForwardCache, Seq2SeqModel, Seq2SeqParams};
use super::{NormStats, SurrogateError};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    /// Global gradient-norm clip, applied to the batch-mean gradient.
    pub clip: Option<f64>,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            seed: 0,
            lr: 1e-3,
            rho: 0.9,
            eps: 1e-7,
            clip: Some(5.0),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(SurrogateError::InvalidConfig(format!(
                "epochs={} batch_size={}",
                self.epochs, self.batch_size
            )));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(SurrogateError::InvalidConfig(format!("clip={c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean window loss seen during each epoch, before that window's update.
    pub epoch_losses: Vec<f64>,
    pub windows: usize,
    pub updates: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(f64::NAN)
    }
}

pub fn train(
    dataset: &WindowedDataset,
    dims: Dims,
    norm: NormStats,
    config: &TrainConfig,
) -> Result<(Seq2SeqModel, TrainReport), SurrogateError> {
    train_with(dataset, dims, norm, config, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn train_with(
    dataset: &WindowedDataset,
    dims: Dims,
    norm: NormStats,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Seq2SeqModel, TrainReport), SurrogateError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    if (dataset.enc_len, dataset.dec_len, dataset.features) != (dims.enc_len, dims.dec_len, dims.enc_features) {
        return Err(SurrogateError::ShapeMismatch(format!(
            "dataset {}x{} over {} features vs dims {dims:?}",
            dataset.enc_len, dataset.dec_len, dataset.features
        )));
    }
    let mut rng = SplitMix64::new(config.seed);
    let params = Seq2SeqParams::init(&dims, rng.next_u64());
    let mut model = Seq2SeqModel::new(dims, params, norm)?;
    let mut opt = RmsProp::new(config.lr, config.rho, config.eps, &model.params)?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cache = ForwardCache::default();
    let mut grad = Seq2SeqParams::zeros(&dims);
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        windows: dataset.len(),
        updates: 0,
    };

    for epoch in 0..config.epochs {
        if config.shuffle {
            rng.shuffle(&mut order);
        }
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            for &k in batch {
                let w = &dataset.windows[k];
                model.forward_into(&w.enc, &w.dec, &mut cache);
                total += model.backward_unchecked(&w.enc, &w.dec, &w.labels, &cache, &mut grad);
            }
            grad.scale(1.0 / batch.len() as f64);
            if let Some(c) = config.clip {
                let n = grad.norm();
                if n > c {
                    grad.scale(c / n);
                }
            }
            opt.step(&mut model.params, &grad)?;
            report.updates += 1;
        }
        let mean = total / dataset.len() as f64;
        if !mean.is_finite() || !model.params.is_finite() {
            return Err(SurrogateError::NonfiniteLoss { epoch });
        }
        report.epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }
    Ok((model, report))
}
