use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ap::mean_average_precision;
use super::split::{Partition, SplitSpec};
use crate::error::{LivrError, Result};
use crate::model::{Model, ModelConfig, Phase, SceneInputs};
use crate::synth::Dataset;
use crate::tensor::adam::{AdamConfig, AdamState};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::ops::sigmoid_bce;
use crate::topology::ActionCatalog;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a validation mAP improvement before stopping.
    pub patience: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self { model, epochs: 40, batch_size: 8, patience: 5, adam: AdamConfig::default(), seed: 0 }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(LivrError::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(LivrError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_map: f64,
}

pub struct TrainOutcome {
    /// Weights of the best validation epoch.
    pub model: Model<f32>,
    pub adam: AdamState<f32>,
    pub curves: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_map: f64,
}

impl TrainOutcome {
    pub fn checkpoint(&self, cfg: &TrainConfig) -> Result<Checkpoint> {
        let meta = serde_json::json!({
            "train": cfg,
            "curves": self.curves,
            "best_epoch": self.best_epoch,
            "best_val_map": self.best_val_map,
        });
        Ok(Checkpoint::new(serde_json::to_value(&self.model.config)?, &self.model.params, Some(&self.adam), meta))
    }
}

/// Clips drawn from a dataset, each paired with its scene's precomputed inputs.
pub struct ClipView<'a> {
    pub data: &'a Dataset,
    pub scenes: &'a [SceneInputs],
    pub clip_scene: Vec<usize>,
}

impl<'a> ClipView<'a> {
    pub fn new(data: &'a Dataset, scenes: &'a [SceneInputs]) -> Result<Self> {
        let clip_scene = data
            .manifest
            .clips
            .iter()
            .map(|c| data.scene_index(&c.scene).ok_or_else(|| LivrError::Format(format!("unknown scene {}", c.scene))))
            .collect::<Result<_>>()?;
        Ok(Self { data, scenes, clip_scene })
    }

    pub fn labels(&self, clip: usize) -> &[u8] {
        &self.data.manifest.clips[clip].labels
    }

    fn scene(&self, clip: usize) -> &SceneInputs {
        &self.scenes[self.clip_scene[clip]]
    }
}

/// Scene inputs for every scene of a dataset, each from its own annotation.
pub fn prepare_scenes(data: &Dataset, cfg: &ModelConfig, catalog: &ActionCatalog) -> Result<Vec<SceneInputs>> {
    data.annotations.iter().map(|a| SceneInputs::prepare(a, cfg, catalog)).collect()
}

/// Scores `clips` in evaluation mode; returns the score matrix and the mAP.
pub fn score_clips(model: &Model<f32>, view: &ClipView, clips: &[usize]) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut scores = Vec::with_capacity(clips.len());
    let mut labels = Vec::with_capacity(clips.len());
    for &c in clips {
        scores.push(model.predict(&view.data.videos[c], view.scene(c))?);
        labels.push(view.labels(c).to_vec());
    }
    let (_, map) = mean_average_precision(&scores, &labels, model.n_actions());
    Ok((scores, map))
}

/// One optimizer step on `batch`; returns the mean loss over the batch.
pub fn train_step(model: &mut Model<f32>, adam: &mut AdamState<f32>, view: &ClipView, batch: &[usize]) -> Result<f64> {
    let mut grads = model.params.zeros_like();
    let mut total = 0.0;
    for &c in batch {
        let pass = model.forward(&view.data.videos[c], view.scene(c), Phase::Train)?;
        let target: Vec<f32> = view.labels(c).iter().map(|&l| l as f32).collect();
        let (loss, g) = sigmoid_bce(&pass.logits, &target)?;
        if !loss.is_finite() {
            return Err(LivrError::NonFinite(format!("training loss on clip {}", view.data.manifest.clips[c].id)));
        }
        total += loss as f64;
        model.backward(&pass, &g, &mut grads)?;
    }
    grads.scale(1.0 / batch.len() as f32);
    if !grads.is_finite() {
        return Err(LivrError::NonFinite("gradient".into()));
    }
    adam.step_store(&mut model.params, &grads)?;
    Ok(total / batch.len() as f64)
}

/// Mini-batch Adam on `part.train`, early-stopped on validation mAP. Clip
/// order is reshuffled every epoch from the configured seed.
pub fn train_on(cfg: &TrainConfig, view: &ClipView, part: &Partition, mut log: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    cfg.validate()?;
    if part.train.is_empty() {
        return Err(LivrError::EmptySplit("train".into()));
    }
    if part.val.is_empty() {
        return Err(LivrError::EmptySplit("validation".into()));
    }
    let n_actions = view.data.manifest.actions.len();
    let mut model = Model::<f32>::new(cfg.model.clone(), n_actions, cfg.seed)?;
    let mut adam = AdamState::new(cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut order = part.train.clone();
    let mut best = (model.params.clone(), adam.clone(), 0usize, f64::NEG_INFINITY);
    let mut curves = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            loss += train_step(&mut model, &mut adam, view, batch)? * batch.len() as f64;
        }
        let (_, val_map) = score_clips(&model, view, &part.val)?;
        let rec = EpochRecord { epoch, train_loss: loss / order.len() as f64, val_map };
        log(&rec);
        curves.push(rec);
        if val_map > best.3 {
            best = (model.params.clone(), adam.clone(), epoch, val_map);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    model.params = best.0;
    Ok(TrainOutcome { model, adam: best.1, curves, best_epoch: best.2, best_val_map: best.3 })
}

/// Trains on the observed scenes of `data` under `split`.
pub fn train(cfg: &TrainConfig, data: &Dataset, split: &SplitSpec, log: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    let part = split.partition(&data.manifest)?;
    let scenes = prepare_scenes(data, &cfg.model, &ActionCatalog::standard())?;
    let view = ClipView::new(data, &scenes)?;
    train_on(cfg, &view, &part, log)
}

/// Restores a model from a checkpoint written by [`TrainOutcome::checkpoint`].
pub fn model_from_checkpoint(ck: &Checkpoint, n_actions: usize) -> Result<Model<f32>> {
    let config: ModelConfig = serde_json::from_value(ck.config.clone())?;
    config.validate()?;
    let mut model = Model::<f32>::new(config, n_actions, 0)?;
    model.params.load_from(&ck.store())?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use crate::synth::{generate, DatasetSpec, SynthConfig};

    fn small(variant: Variant) -> (Dataset, SplitSpec, TrainConfig) {
        let spec = DatasetSpec {
            scenes: 3,
            clips_per_scene: 6,
            unseen: 1,
            seed: 4,
            synth: SynthConfig { frames: 4, ..SynthConfig::default() },
        };
        let (data, _, split, _) = generate(&spec).unwrap();
        let mut model = ModelConfig::desk(variant);
        model.frames = 4;
        model.filters = 4;
        let mut cfg = TrainConfig::new(model);
        cfg.epochs = 2;
        cfg.seed = 11;
        (data, split, cfg)
    }

    #[test]
    fn single_clip_overfits() {
        let (data, split, mut cfg) = small(Variant::V4);
        cfg.adam.lr = 3e-3;
        let part = split.partition(&data.manifest).unwrap();
        let scenes = prepare_scenes(&data, &cfg.model, &ActionCatalog::standard()).unwrap();
        let view = ClipView::new(&data, &scenes).unwrap();
        let mut model = Model::<f32>::new(cfg.model.clone(), 15, cfg.seed).unwrap();
        let mut adam = AdamState::new(cfg.adam);
        let clip = [part.train[0]];
        let mut last = f64::INFINITY;
        for step in 0..200 {
            last = train_step(&mut model, &mut adam, &view, &clip).unwrap();
            if last < 0.01 {
                eprintln!("overfit after {} steps", step + 1);
                break;
            }
        }
        assert!(last < 0.01, "loss {last} after 200 steps");
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let (data, split, cfg) = small(Variant::V3);
        let a = train(&cfg, &data, &split, |_| {}).unwrap();
        let b = train(&cfg, &data, &split, |_| {}).unwrap();
        assert_eq!(a.curves, b.curves);
        assert_eq!(a.model.params.entries()[0].data, b.model.params.entries()[0].data);
        let (scores, _) = {
            let scenes = prepare_scenes(&data, &cfg.model, &ActionCatalog::standard()).unwrap();
            let view = ClipView::new(&data, &scenes).unwrap();
            let part = split.partition(&data.manifest).unwrap();
            let sa = score_clips(&a.model, &view, &part.unseen).unwrap();
            let sb = score_clips(&b.model, &view, &part.unseen).unwrap();
            assert_eq!(sa.1, sb.1);
            sa
        };
        assert!(scores.iter().flatten().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn empty_split_is_an_error() {
        let (data, _, cfg) = small(Variant::BL1);
        let scenes = prepare_scenes(&data, &cfg.model, &ActionCatalog::standard()).unwrap();
        let view = ClipView::new(&data, &scenes).unwrap();
        let part = Partition { train: vec![], val: vec![0], unseen: vec![1] };
        assert!(matches!(train_on(&cfg, &view, &part, |_| {}), Err(LivrError::EmptySplit(_))));
    }

    #[test]
    fn exploding_learning_rate_aborts() {
        let (data, split, mut cfg) = small(Variant::BL1);
        cfg.adam.lr = 1e30;
        cfg.epochs = 3;
        let r = train(&cfg, &data, &split, |_| {});
        assert!(matches!(r, Err(LivrError::NonFinite(_))), "{:?}", r.err());
    }

    #[test]
    fn checkpoint_restores_predictions() {
        let (data, split, cfg) = small(Variant::V1);
        let out = train(&cfg, &data, &split, |_| {}).unwrap();
        let ck = out.checkpoint(&cfg).unwrap();
        let ck = Checkpoint::from_json_str(&serde_json::to_string(&ck).unwrap()).unwrap();
        let back = model_from_checkpoint(&ck, 15).unwrap();
        let scenes = prepare_scenes(&data, &cfg.model, &ActionCatalog::standard()).unwrap();
        let s = &scenes[data.scene_index(&data.manifest.clips[0].scene).unwrap()];
        assert_eq!(out.model.predict(&data.videos[0], s).unwrap(), back.predict(&data.videos[0], s).unwrap());
        assert_eq!(ck.adam_state::<f32>().unwrap().step, out.adam.step);
    }
}
