//! Self-supervised training and the inference pipeline.
//!
//! Both run the network inside pixel-shuffle downsampling:
//! `out = pd_inv(net(pd(noisy)))`. Training minimizes the L1 distance between
//! `out` and the very same noisy input.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, AdamState};
use crate::error::{Error, Result};
use crate::io::{list_pngs, load_png};
use crate::mask::MaskShape;
use crate::model::{build, ArchKind, ArchitectureConfig, Checkpoint, ModelGraph};
use crate::pd::{crop, pad_to_multiple, pd, pd_inv, random_replace_refine, PdStride, REFINE_P, REFINE_T};
use crate::tensor::{l1_loss_and_grad, Shape4, Tensor4};

/// Hyper-parameters of a training run. Field names double as the keys of
/// the TOML config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub arch: ArchKind,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Multiplier applied every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub crop: usize,
    /// Optimizer steps per epoch.
    pub steps_per_epoch: usize,
    pub pd_train: usize,
    pub pd_test: usize,
    /// Random quarter-turn plus horizontal and vertical flips.
    pub augment: bool,
    pub seed: u64,
    pub architecture: ArchitectureConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            arch: ArchKind::Mmbsn,
            batch: 8,
            epochs: 30,
            lr: 1e-4,
            lr_decay: 0.1,
            lr_decay_every: 8,
            crop: 128,
            steps_per_epoch: 1000,
            pd_train: 5,
            pd_test: 2,
            augment: true,
            seed: 0,
            architecture: ArchitectureConfig::default(),
        }
    }
}

impl TrainingConfig {
    /// Desk-scale preset: 16 channels, short depths, small crops.
    pub fn toy(arch: ArchKind, masks: Vec<MaskShape>) -> Self {
        Self {
            arch,
            epochs: 2,
            lr: 1e-3,
            crop: 32,
            steps_per_epoch: 100,
            architecture: ArchitectureConfig::toy(16, masks),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.batch == 0 || self.crop == 0 || self.steps_per_epoch == 0 {
            return bad("batch, crop and steps_per_epoch must be positive");
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_decay > 0.0) {
            return bad("lr and lr_decay must be positive");
        }
        if self.pd_train == 0 || self.pd_test == 0 {
            return bad("pd strides must be >= 1");
        }
        self.architecture.validate()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        lr_at_epoch(self.lr, self.lr_decay, self.lr_decay_every, epoch)
    }
}

/// Step schedule: `lr * decay^(epoch / every)`.
pub fn lr_at_epoch(lr: f64, decay: f64, every: usize, epoch: usize) -> f64 {
    lr * decay.powi((epoch / every) as i32)
}

/// Noisy training images. There is deliberately no slot for clean targets.
#[derive(Clone, Debug)]
pub struct NoisyDataset {
    images: Vec<Tensor4>,
}

impl NoisyDataset {
    /// Each image must be a single item; all must share a channel count.
    pub fn new(images: Vec<Tensor4>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let ch = images[0].channels();
        for im in &images {
            if im.batch() != 1 || im.channels() != ch {
                return Err(Error::InvalidArgument(format!(
                    "dataset images must be 1x{ch}xHxW, got {}",
                    im.shape()
                )));
            }
        }
        Ok(Self { images })
    }

    /// Every PNG in `dir`, in file-name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let images = list_pngs(dir)?
            .into_iter()
            .map(load_png)
            .collect::<Result<Vec<_>>>()?;
        Self::new(images)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Tensor4] {
        &self.images
    }

    pub fn channels(&self) -> usize {
        self.images[0].channels()
    }
}

/// Rotates a single-item tensor by `quarter_turns` * 90 degrees
/// (counter-clockwise), then optionally flips it.
pub fn augment(image: &Tensor4, quarter_turns: usize, hflip: bool, vflip: bool) -> Tensor4 {
    let sh = image.shape();
    let rot = quarter_turns % 2 == 1;
    let (h, w) = if rot {
        (sh.width, sh.height)
    } else {
        (sh.height, sh.width)
    };
    Tensor4::from_fn(Shape4::new(sh.batch, sh.channels, h, w), |b, c, y, x| {
        let y = if vflip { h - 1 - y } else { y };
        let x = if hflip { w - 1 - x } else { x };
        let (sy, sx) = match quarter_turns % 4 {
            0 => (y, x),
            1 => (x, sh.width - 1 - y),
            2 => (sh.height - 1 - y, sh.width - 1 - x),
            _ => (sh.height - 1 - x, y),
        };
        image.get(b, c, sy, sx)
    })
}

/// Draws one training batch: random image, random crop, random
/// augmentation, in that order per item.
pub fn sample_batch(
    data: &NoisyDataset,
    batch: usize,
    crop_size: usize,
    augment_on: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor4> {
    let items = (0..batch)
        .map(|_| {
            let img = &data.images[rng.random_range(0..data.len())];
            let size = crop_size.min(img.height()).min(img.width());
            let y0 = rng.random_range(0..=img.height() - size);
            let x0 = rng.random_range(0..=img.width() - size);
            let patch = Tensor4::from_fn(
                Shape4::new(1, img.channels(), size, size),
                |_, c, y, x| img.get(0, c, y0 + y, x0 + x),
            );
            if augment_on {
                let turns = rng.random_range(0..2usize);
                let (h, v) = (rng.random::<bool>(), rng.random::<bool>());
                augment(&patch, turns, h, v)
            } else {
                patch
            }
        })
        .collect::<Vec<_>>();
    Tensor4::stack(&items)
}

/// The PD-wrapped network output for `noisy`, before any clamping:
/// reflect-pad to a multiple of `s`, `pd`, forward, `pd_inv`, crop.
pub fn pd_forward(model: &ModelGraph, noisy: &Tensor4, s: PdStride) -> Result<Tensor4> {
    let padded = pad_to_multiple(noisy, s.get());
    let out = pd_inv(&model.forward(&pd(&padded, s)?)?, s)?;
    Ok(crop(&out, noisy.height(), noisy.width()))
}

/// One optimizer step on a batch of noisy crops; returns the L1 loss
/// measured before the update.
pub fn train_step(
    model: &mut ModelGraph,
    optimizer: &mut AdamState,
    batch: &Tensor4,
    s: PdStride,
) -> Result<f64> {
    let padded = pad_to_multiple(batch, s.get());
    let (mosaic_out, tape) = model.forward_with_tape(&pd(&padded, s)?)?;
    let out = crop(&pd_inv(&mosaic_out, s)?, batch.height(), batch.width());
    let (loss, grad) = l1_loss_and_grad(&out, batch)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            step: optimizer.step + 1,
            loss,
        });
    }
    // Adjoint of crop is zero-embedding; adjoint of pd_inv is pd.
    let mut grad_padded = Tensor4::zeros(padded.shape());
    let (h, w) = (batch.height(), batch.width());
    for b in 0..batch.batch() {
        for c in 0..batch.channels() {
            for y in 0..h {
                for x in 0..w {
                    grad_padded.set(b, c, y, x, grad.get(b, c, y, x));
                }
            }
        }
    }
    let grads = model.backward(&tape, &pd(&grad_padded, s)?)?;
    adam_step(model.params_mut(), &grads.params, optimizer)?;
    Ok(loss)
}

/// Per-epoch summary handed to [`train_with`] callbacks.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Loss of every optimizer step, in order.
    pub losses: Vec<f64>,
}

/// Freshly initialized model and optimizer for `config`.
pub fn init_checkpoint(config: &TrainingConfig) -> Result<Checkpoint> {
    config.validate()?;
    let mut model = build(config.arch, &config.architecture)?;
    model.init_weights(config.seed);
    let opt = AdamState::new(model.params(), config.lr);
    Ok(Checkpoint::new(model, Some(opt), config.seed, 0))
}

pub fn train(config: &TrainingConfig, data: &NoisyDataset) -> Result<TrainOutcome> {
    train_with(config, data, |_, _| Ok(()))
}

/// Full run. `on_epoch` sees a checkpoint after every epoch, e.g. to save it.
/// Everything is derived from `config.seed`, so equal seeds give identical
/// runs.
pub fn train_with<F>(config: &TrainingConfig, data: &NoisyDataset, mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&EpochReport, &Checkpoint) -> Result<()>,
{
    let mut ck = init_checkpoint(config)?;
    if data.channels() != config.architecture.in_channels {
        return Err(Error::InvalidConfig(format!(
            "dataset has {} channels, model expects {}",
            data.channels(),
            config.architecture.in_channels
        )));
    }
    let s = PdStride::new(config.pd_train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut opt = ck.optimizer.take().expect("fresh optimizer");
    let mut losses = Vec::with_capacity(config.epochs * config.steps_per_epoch);
    for epoch in 0..config.epochs {
        opt.lr = config.lr_at_epoch(epoch);
        let start = losses.len();
        for _ in 0..config.steps_per_epoch {
            let batch = sample_batch(data, config.batch, config.crop, config.augment, &mut rng)?;
            losses.push(train_step(&mut ck.model, &mut opt, &batch, s)?);
        }
        ck.step = opt.step;
        let epoch_losses = &losses[start..];
        let report = EpochReport {
            epoch,
            lr: opt.lr,
            mean_loss: epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64,
        };
        ck.optimizer = Some(opt);
        on_epoch(&report, &ck)?;
        opt = ck.optimizer.take().expect("optimizer restored");
    }
    ck.optimizer = Some(opt);
    Ok(TrainOutcome {
        checkpoint: ck,
        losses,
    })
}

/// Inference-time random-replacement refinement settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineOptions {
    pub p: f64,
    pub passes: usize,
    pub seed: u64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            p: REFINE_P,
            passes: REFINE_T,
            seed: 0,
        }
    }
}

/// Denoises `noisy` through the PD pipeline at stride `s`, optionally
/// refines, and clamps to [0,1]. Refinement passes run the network at
/// stride 1.
pub fn denoise(
    model: &ModelGraph,
    noisy: &Tensor4,
    s: PdStride,
    refine: Option<RefineOptions>,
) -> Result<Tensor4> {
    let first = pd_forward(model, noisy, s)?;
    let out = match refine {
        None => first,
        Some(r) => random_replace_refine(&first, noisy, r.p, r.passes, r.seed, |x| {
            model.forward(x)
        })?,
    };
    Ok(out.clamp(0.0, 1.0))
}
