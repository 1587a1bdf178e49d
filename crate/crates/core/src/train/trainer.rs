use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::losses::{d_loss, g_loss, r1_from_scores};
use super::{CheckpointScore, LogRow, TrainConfig, TrainError};
use crate::autodiff::{adam_step, backward, AdamConfig, AdamState, OptimError, Tape, Var};
use crate::data::{shard_tensor, ShardSet};
use crate::metrics::{derive_seed, fid, Embedder, GeneratorSource, ShardSource};
use crate::model::snapshot::RngState;
use crate::model::{
    sample_latents, style_mixing, Discriminator, Generator, ModelConfig, NoiseConfig, ParamStore, SnapshotFile,
    SnapshotHeader,
};
use crate::tensor::Tensor;

pub const SNAPSHOT_KIND: &str = "gan";

/// Parameters at one training step. `wall_clock_secs` is kept outside the
/// serialized bytes so identical runs produce identical files.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub file: SnapshotFile,
    pub wall_clock_secs: f64,
}

pub trait TrainObserver {
    fn on_log(&mut self, _row: &LogRow) -> Result<(), TrainError> {
        Ok(())
    }

    fn on_snapshot(&mut self, _snapshot: &Snapshot, _score: &CheckpointScore) -> Result<(), TrainError> {
        Ok(())
    }
}

pub struct NullObserver;

impl TrainObserver for NullObserver {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub snapshots: Vec<Snapshot>,
    pub scores: Vec<CheckpointScore>,
    pub log: Vec<LogRow>,
    /// Set when training stopped early on a numerical failure.
    pub aborted: Option<String>,
    /// Completed passes over the dataset.
    pub epochs: u64,
}

/// The generator `train_loop` starts from for this configuration.
pub fn initial_generator(model: &ModelConfig, cfg: &TrainConfig) -> Result<Generator<f32>, TrainError> {
    Ok(Generator::new(model, derive_seed(cfg.seed, 0))?)
}

fn model_config(file: &SnapshotFile) -> Result<&ModelConfig, TrainError> {
    file.header
        .model
        .as_ref()
        .ok_or_else(|| TrainError::Config("snapshot has no model configuration".into()))
}

/// Rebuilds the generator stored under `prefix` (`"g."` or `"g_ema."`).
pub fn generator_from_snapshot(file: &SnapshotFile, prefix: &str) -> Result<Generator<f32>, TrainError> {
    let mut g = Generator::new(model_config(file)?, 0)?;
    g.params_mut().load_from(&file.params_with_prefix(prefix))?;
    Ok(g)
}

pub fn discriminator_from_snapshot(file: &SnapshotFile) -> Result<Discriminator<f32>, TrainError> {
    let mut d = Discriminator::new(model_config(file)?, 0)?;
    d.params_mut().load_from(&file.params_with_prefix("d."))?;
    Ok(d)
}

/// Latents, optional mixing partner with crossover layer, and per-sample noise seeds.
struct StepLatents {
    z: Tensor<f32>,
    mix: Option<(Tensor<f32>, usize)>,
    noise_seeds: Vec<u64>,
}

fn draw_latents(rng: &mut ChaCha8Rng, batch: usize, z_dim: usize, layers: usize, mixing: f64) -> StepLatents {
    let z = sample_latents(batch, z_dim, rng.next_u64());
    let mix = (layers > 1 && rng.random::<f64>() < mixing)
        .then(|| (sample_latents(batch, z_dim, rng.next_u64()), rng.random_range(1..layers)));
    let noise_seeds = (0..batch).map(|_| rng.next_u64()).collect();
    StepLatents { z, mix, noise_seeds }
}

fn g_forward<'t>(
    g: &Generator<f32>,
    p: &[Var<'t, f32>],
    tape: &'t Tape<f32>,
    lat: &StepLatents,
) -> Result<Var<'t, f32>, TrainError> {
    let layers = g.num_layers();
    let w1 = g.map_latent_var(p, tape.leaf(lat.z.clone()))?;
    let styles = match &lat.mix {
        Some((z2, k)) => {
            let w2 = g.map_latent_var(p, tape.leaf(z2.clone()))?;
            style_mixing(&w1, &w2, *k, layers)?
        }
        None => vec![w1; layers],
    };
    let noise = NoiseConfig::all_from_sample_seeds(lat.noise_seeds.clone())
        .resolve::<f32>(&g.layer_resolutions(), lat.noise_seeds.len())?;
    Ok(g.synthesize_var(p, &styles, &noise)?)
}

fn apply_adam(
    params: &mut ParamStore<f32>,
    grads: &[Tensor<f32>],
    states: &mut [AdamState<f32>],
    cfg: &AdamConfig,
) -> Result<(), OptimError> {
    // Check every gradient first so a failure leaves all parameters untouched.
    for g in grads {
        if let Some(index) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(OptimError::NonFinite { index });
        }
    }
    for (i, g) in grads.iter().enumerate() {
        adam_step(params.get_mut(i), g, &mut states[i], cfg)?;
    }
    Ok(())
}

/// Cycles through the dataset in a fresh seeded order every epoch.
struct EpochSampler {
    seed: u64,
    len: usize,
    order: Vec<usize>,
    pos: usize,
    epoch: u64,
}

impl EpochSampler {
    fn new(seed: u64, len: usize) -> Self {
        let mut s = EpochSampler { seed, len, order: vec![], pos: 0, epoch: 0 };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 1000 + self.epoch));
        self.order = (0..self.len).collect();
        self.order.shuffle(&mut rng);
        self.pos = 0;
    }

    fn next_batch(&mut self, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.pos == self.len {
                    self.epoch += 1;
                    self.shuffle();
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

struct Trainer<'a> {
    model: ModelConfig,
    cfg: &'a TrainConfig,
    g: Generator<f32>,
    g_ema: Generator<f32>,
    d: Discriminator<f32>,
    g_adam: Vec<AdamState<f32>>,
    d_adam: Vec<AdamState<f32>>,
    rng: ChaCha8Rng,
}

impl Trainer<'_> {
    fn snapshot(&self, step: u64) -> Result<SnapshotFile, TrainError> {
        let mut header = SnapshotHeader::new(SNAPSHOT_KIND);
        header.step = step;
        header.model = Some(self.model.clone());
        header.rng = Some(RngState::capture(&self.rng));
        let cfg_json = serde_json::to_string(self.cfg).map_err(|e| TrainError::Config(e.to_string()))?;
        header.meta = BTreeMap::from([("train_config".to_string(), cfg_json)]);
        let mut f = SnapshotFile::new(header);
        f.push_params("g.", self.g.params());
        f.push_params("g_ema.", self.g_ema.params());
        f.push_params("d.", self.d.params());
        Ok(f)
    }

    /// One D step then one G step; returns `(loss_d, loss_g, r1)`.
    fn step(&mut self, real: Tensor<f32>, gamma: f64) -> Result<(f64, f64, f64), String> {
        let cfg = self.cfg;
        let batch = real.shape()[0];
        let layers = self.g.num_layers();
        let z_dim = self.g.z_dim();
        let err = |e: TrainError| e.to_string();

        let lat = draw_latents(&mut self.rng, batch, z_dim, layers, cfg.mixing_prob);
        let fake = {
            let tape = Tape::new();
            let p = self.g.params().bind(&tape);
            let img = g_forward(&self.g, &p, &tape, &lat).map_err(err)?;
            (*img.value()).clone()
        };
        let (loss_d, r1) = {
            let tape = Tape::new();
            let p = self.d.params().bind(&tape);
            let xr = tape.leaf(real);
            let sr = self.d.forward(&p, xr).map_err(|e| e.to_string())?;
            let sf = self.d.forward(&p, tape.leaf(fake)).map_err(|e| e.to_string())?;
            let ld = d_loss(sr, sf).map_err(|e| e.to_string())?;
            let r1 = r1_from_scores(&tape, sr, xr, gamma).map_err(|e| e.to_string())?;
            let (ldv, r1v) = (ld.value().data()[0] as f64, r1.value().data()[0] as f64);
            if !ldv.is_finite() || !r1v.is_finite() {
                return Err(format!("non-finite discriminator loss ({ldv}, r1 {r1v})"));
            }
            let total = ld.add(r1).map_err(|e| e.to_string())?;
            let grads = backward(&tape, total, &p).map_err(|e| e.to_string())?;
            let adam = AdamConfig { lr: cfg.lr_d, beta1: cfg.beta1, beta2: cfg.beta2, eps: 1e-8 };
            apply_adam(self.d.params_mut(), &grads, &mut self.d_adam, &adam)
                .map_err(|e| format!("discriminator update: {e}"))?;
            (ldv, r1v)
        };

        let lat = draw_latents(&mut self.rng, batch, z_dim, layers, cfg.mixing_prob);
        let loss_g = {
            let tape = Tape::new();
            let pg = self.g.params().bind(&tape);
            let pd = self.d.params().bind(&tape);
            let img = g_forward(&self.g, &pg, &tape, &lat).map_err(err)?;
            let sf = self.d.forward(&pd, img).map_err(|e| e.to_string())?;
            let lg = g_loss(sf).map_err(|e| e.to_string())?;
            let lgv = lg.value().data()[0] as f64;
            if !lgv.is_finite() {
                return Err(format!("non-finite generator loss {lgv}"));
            }
            let grads = backward(&tape, lg, &pg).map_err(|e| e.to_string())?;
            let adam = AdamConfig { lr: cfg.lr_g, beta1: cfg.beta1, beta2: cfg.beta2, eps: 1e-8 };
            apply_adam(self.g.params_mut(), &grads, &mut self.g_adam, &adam)
                .map_err(|e| format!("generator update: {e}"))?;
            lgv
        };
        self.g_ema.params_mut().ema_update(self.g.params(), cfg.ema_decay);
        Ok((loss_d, loss_g, r1))
    }
}

/// [`train_loop_with`] without an observer.
pub fn train_loop(
    dataset: &ShardSet,
    model: &ModelConfig,
    cfg: &TrainConfig,
    embedder: &dyn Embedder,
) -> Result<TrainOutcome, TrainError> {
    train_loop_with(dataset, model, cfg, embedder, &mut NullObserver)
}

/// Alternating D/G training. A snapshot is taken every `snapshot_every` steps
/// and after the final step, each scored by the FID of the EMA generator.
pub fn train_loop_with(
    dataset: &ShardSet,
    model: &ModelConfig,
    cfg: &TrainConfig,
    embedder: &dyn Embedder,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    model.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    let r = model.resolution;
    if dataset.record_shape() != (r, r, 3) {
        return Err(TrainError::Config(format!(
            "dataset records are {:?} (w,h,c) but the model expects {r}×{r} RGB",
            dataset.record_shape()
        )));
    }
    let g = initial_generator(model, cfg)?;
    let d = Discriminator::new(model, derive_seed(cfg.seed, 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(7);
    let mut t = Trainer {
        model: model.clone(),
        cfg,
        g_ema: g.clone(),
        g_adam: g.params().tensors().iter().map(|p| AdamState::new(p.shape())).collect(),
        d_adam: d.params().tensors().iter().map(|p| AdamState::new(p.shape())).collect(),
        g,
        d,
        rng,
    };
    let gamma = cfg.gamma_for(r);
    let fid_seed = derive_seed(cfg.seed, 2);
    let mut sampler = EpochSampler::new(derive_seed(cfg.seed, 3), dataset.len());
    let started = Instant::now();
    let mut out = TrainOutcome { snapshots: vec![], scores: vec![], log: vec![], aborted: None, epochs: 0 };

    for step in 1..=cfg.steps {
        let idx = sampler.next_batch(cfg.batch);
        let real = shard_tensor::<f32>(dataset, &idx)?;
        let (loss_d, loss_g, r1) = match t.step(real, gamma) {
            Ok(v) => v,
            Err(msg) => {
                out.aborted = Some(format!("step {step}: {msg}"));
                break;
            }
        };
        let mut row = LogRow { step, loss_d, loss_g, r1, fid: None };
        if step % cfg.snapshot_every == 0 || step == cfg.steps {
            let file = t.snapshot(step)?;
            let value = fid(
                &GeneratorSource { generator: &t.g_ema },
                &ShardSource { shards: dataset },
                embedder,
                cfg.fid_n,
                fid_seed,
            )?
            .value;
            row.fid = Some(value);
            let snap = Snapshot { step, file, wall_clock_secs: started.elapsed().as_secs_f64() };
            let score = CheckpointScore { snapshot_id: out.snapshots.len(), step, fid: value, n: cfg.fid_n };
            observer.on_log(&row)?;
            observer.on_snapshot(&snap, &score)?;
            out.snapshots.push(snap);
            out.scores.push(score);
        } else {
            observer.on_log(&row)?;
        }
        out.log.push(row);
    }
    out.epochs = sampler.epoch;
    Ok(out)
}
