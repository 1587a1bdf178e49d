use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttributeOracle, Embedder, MetricError, OracleBatch, OracleLabel};
use crate::autodiff::{adam_step, backward, AdamConfig, AdamState, Tape, Var};
use crate::data::{ToyAttributes, ATTRIBUTE_NAMES};
use crate::model::params::{EqConv, EqDense};
use crate::model::{ParamStore, SnapshotFile, SnapshotHeader};
use crate::tensor::Tensor;

pub const CLASSIFIER_KIND: &str = "attribute_classifier";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub resolution: usize,
    pub channels: usize,
    pub features: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            resolution: 16,
            channels: 8,
            features: 32,
            steps: 400,
            batch: 32,
            lr: 2e-3,
            seed: 0,
        }
    }
}

/// Small conv net predicting the toy attributes; its penultimate layer doubles
/// as the "classifier" embedding.
#[derive(Debug, Clone)]
pub struct AttributeClassifier {
    cfg: ClassifierConfig,
    params: ParamStore<f32>,
    convs: Vec<EqConv>,
    fc: EqDense,
    head: EqDense,
}

impl AttributeClassifier {
    pub fn new(cfg: &ClassifierConfig) -> Result<Self, MetricError> {
        let r = cfg.resolution;
        if r < 8 || !r.is_power_of_two() {
            return Err(MetricError::Input(format!("classifier resolution {r} must be a power of two ≥ 8")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ParamStore::new();
        let gain = 2f64.sqrt();
        let mut convs = Vec::new();
        let (mut res, mut ch_in, mut ch) = (r, 3, cfg.channels);
        while res > 4 {
            convs.push(EqConv::new(&mut params, &format!("c.conv{res}"), ch_in, ch, 3, gain, &mut rng));
            ch_in = ch;
            ch *= 2;
            res /= 2;
        }
        let fc = EqDense::new(&mut params, "c.fc", ch_in * 16, cfg.features, gain, 1.0, 0.0, &mut rng);
        let head = EqDense::new(&mut params, "c.head", cfg.features, ATTRIBUTE_NAMES.len(), 1.0, 1.0, 0.0, &mut rng);
        Ok(AttributeClassifier { cfg: cfg.clone(), params, convs, fc, head })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.cfg
    }

    fn forward<'t>(&self, p: &[Var<'t, f32>], x: Var<'t, f32>) -> Result<(Var<'t, f32>, Var<'t, f32>), MetricError> {
        let n = x.shape()[0];
        let mut h = x;
        for c in &self.convs {
            h = c.forward(p, h)?.leaky_relu(0.2).avg_pool2x()?;
        }
        let flat = h.shape()[1..].iter().product::<usize>();
        let feats = self.fc.forward(p, h.reshape(&[n, flat])?)?.leaky_relu(0.2);
        let logits = self.head.forward(p, feats)?;
        Ok((feats, logits))
    }

    fn check(&self, images: &Tensor<f64>) -> Result<(), MetricError> {
        let r = self.cfg.resolution;
        if images.shape().len() != 4 || images.shape()[1..] != [3, r, r] {
            return Err(MetricError::Input(format!(
                "classifier expects [n,3,{r},{r}] images, got {:?}",
                images.shape()
            )));
        }
        Ok(())
    }

    /// Trains on `[n,3,R,R]` images in `[-1,1]` with their attribute labels.
    pub fn train(cfg: &ClassifierConfig, images: &Tensor<f64>, labels: &[ToyAttributes]) -> Result<Self, MetricError> {
        let mut net = Self::new(cfg)?;
        net.check(images)?;
        let n = images.shape()[0];
        if n != labels.len() || n == 0 {
            return Err(MetricError::Input(format!("{n} images but {} labels", labels.len())));
        }
        let images: Tensor<f32> = images.cast();
        let k = ATTRIBUTE_NAMES.len();
        let adam = AdamConfig { lr: cfg.lr, ..Default::default() };
        let mut states: Vec<AdamState<f32>> = net.params.tensors().iter().map(|t| AdamState::new(t.shape())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
        for _ in 0..cfg.steps {
            let idx: Vec<usize> = (0..cfg.batch.max(1)).map(|_| rng.random_range(0..n)).collect();
            let parts: Vec<Tensor<f32>> = idx.iter().map(|&i| images.slice_outer(i, 1)).collect::<Result<_, _>>()?;
            let x = Tensor::concat_outer(&parts)?;
            let y: Vec<f32> = idx.iter().flat_map(|&i| labels[i].values().map(|b| b as u8 as f32)).collect();
            let tape = Tape::new();
            let p = net.params.bind(&tape);
            let (_, logits) = net.forward(&p, tape.leaf(x))?;
            let yv = tape.leaf(Tensor::new(&[idx.len(), k], y)?);
            let loss = logits.softplus().sub(logits.mul(yv)?)?.mean()?;
            let grads = backward(&tape, loss, &p)?;
            for (i, g) in grads.iter().enumerate() {
                adam_step(net.params.get_mut(i), g, &mut states[i], &adam)
                    .map_err(|e| MetricError::Numeric(e.to_string()))?;
            }
        }
        Ok(net)
    }

    fn run(&self, images: &Tensor<f64>) -> Result<(Tensor<f32>, Tensor<f32>), MetricError> {
        self.check(images)?;
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let (f, l) = self.forward(&p, tape.leaf(images.cast()))?;
        Ok(((*f.value()).clone(), (*l.value()).clone()))
    }

    /// Per-sample attribute probabilities, `[n][attribute]`.
    pub fn probabilities(&self, images: &Tensor<f64>) -> Result<Vec<Vec<f64>>, MetricError> {
        let (_, l) = self.run(images)?;
        let k = ATTRIBUTE_NAMES.len();
        Ok(l.data()
            .chunks(k)
            .map(|r| r.iter().map(|&v| 1.0 / (1.0 + (-(v as f64)).exp())).collect())
            .collect())
    }

    /// Fraction of correct attribute predictions.
    pub fn accuracy(&self, images: &Tensor<f64>, labels: &[ToyAttributes]) -> Result<f64, MetricError> {
        let probs = self.probabilities(images)?;
        let mut hit = 0;
        for (p, l) in probs.iter().zip(labels) {
            for (q, t) in p.iter().zip(l.values()) {
                hit += ((*q > 0.5) == t) as usize;
            }
        }
        Ok(hit as f64 / (probs.len() * ATTRIBUTE_NAMES.len()) as f64)
    }

    pub fn to_snapshot(&self) -> Result<SnapshotFile, MetricError> {
        let mut header = SnapshotHeader::new(CLASSIFIER_KIND);
        header.meta = BTreeMap::from([(
            "config".to_string(),
            serde_json::to_string(&self.cfg).map_err(|e| MetricError::Input(e.to_string()))?,
        )]);
        let mut f = SnapshotFile::new(header);
        f.push_params("", &self.params);
        Ok(f)
    }

    pub fn from_snapshot(file: &SnapshotFile) -> Result<Self, MetricError> {
        if file.header.kind != CLASSIFIER_KIND {
            return Err(MetricError::Input(format!("snapshot kind `{}` is not a classifier", file.header.kind)));
        }
        let cfg: ClassifierConfig = file
            .header
            .meta
            .get("config")
            .ok_or_else(|| MetricError::Input("classifier snapshot lacks its config".into()))
            .and_then(|s| serde_json::from_str(s).map_err(|e| MetricError::Input(e.to_string())))?;
        let mut net = Self::new(&cfg)?;
        net.params.load_from(&file.params_with_prefix(""))?;
        Ok(net)
    }
}

impl Embedder for AttributeClassifier {
    fn name(&self) -> &str {
        "classifier"
    }

    fn embed(&self, images: &Tensor<f64>) -> Result<DMatrix<f64>, MetricError> {
        let (f, _) = self.run(images)?;
        let n = f.shape()[0];
        Ok(DMatrix::from_row_iterator(n, f.len() / n, f.data().iter().map(|&v| v as f64)))
    }
}

/// Labels generated images with a trained classifier; confidence is `|2p − 1|`.
pub struct ClassifierOracle<'a>(pub &'a AttributeClassifier);

impl AttributeOracle for ClassifierOracle<'_> {
    fn attributes(&self) -> Vec<String> {
        ATTRIBUTE_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn label(&self, b: &OracleBatch<'_>) -> Result<Vec<Vec<OracleLabel>>, MetricError> {
        Ok(self
            .0
            .probabilities(b.images)?
            .into_iter()
            .map(|p| p.into_iter().map(|q| OracleLabel { label: q > 0.5, confidence: (2.0 * q - 1.0).abs() }).collect())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{images_to_tensor, synth_toy_dataset, ToyDatasetSpec};

    #[test]
    fn learns_toy_attributes_and_roundtrips() {
        let spec = ToyDatasetSpec { count: 300, seed: 1, ..Default::default() };
        let d = synth_toy_dataset(&spec).unwrap();
        let x = images_to_tensor::<f64>(&d.images).unwrap();
        let cfg = ClassifierConfig::default();
        let c = AttributeClassifier::train(&cfg, &x, &d.attributes).unwrap();
        let acc = c.accuracy(&x, &d.attributes).unwrap();
        assert!(acc > 0.9, "accuracy {acc}");
        let back = AttributeClassifier::from_snapshot(&c.to_snapshot().unwrap()).unwrap();
        assert_eq!(back.embed(&x).unwrap(), c.embed(&x).unwrap());
    }
}
