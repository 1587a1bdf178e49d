use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, LatentGenerator, MetricError, Space};
use crate::model::sample_latents;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLabel {
    pub label: bool,
    pub confidence: f64,
}

/// Everything an oracle may inspect about a batch of generated samples.
pub struct OracleBatch<'a> {
    pub z: &'a Tensor<f64>,
    pub w: &'a Tensor<f64>,
    pub images: &'a Tensor<f64>,
    /// Global index of the first sample in the batch.
    pub first_index: usize,
    pub seed: u64,
}

pub trait AttributeOracle: Sync {
    fn attributes(&self) -> Vec<String>;
    /// One label per sample and attribute: `out[sample][attribute]`.
    fn label(&self, batch: &OracleBatch<'_>) -> Result<Vec<Vec<OracleLabel>>, MetricError>;
}

/// Reads the sign of one latent coordinate back as the attribute.
#[derive(Debug, Clone, Copy)]
pub struct LatentCoordinateOracle {
    pub space: Space,
    pub coordinate: usize,
}

impl AttributeOracle for LatentCoordinateOracle {
    fn attributes(&self) -> Vec<String> {
        vec![format!("{}{}_positive", self.space.as_str(), self.coordinate)]
    }

    fn label(&self, b: &OracleBatch<'_>) -> Result<Vec<Vec<OracleLabel>>, MetricError> {
        let src = match self.space {
            Space::Z => b.z,
            Space::W => b.w,
        };
        let d = src.shape()[1];
        if self.coordinate >= d {
            return Err(MetricError::Input(format!("coordinate {} of a {d}-vector", self.coordinate)));
        }
        Ok(src
            .data()
            .chunks(d)
            .map(|r| {
                let v = r[self.coordinate];
                vec![OracleLabel { label: v > 0.0, confidence: v.abs() }]
            })
            .collect())
    }
}

/// Fair coin labels and uniform confidences that ignore the sample entirely.
#[derive(Debug, Clone, Copy)]
pub struct RandomOracle {
    pub attributes: usize,
    pub seed: u64,
}

impl AttributeOracle for RandomOracle {
    fn attributes(&self) -> Vec<String> {
        (0..self.attributes).map(|k| format!("random{k}")).collect()
    }

    fn label(&self, b: &OracleBatch<'_>) -> Result<Vec<Vec<OracleLabel>>, MetricError> {
        let n = b.z.shape()[0];
        Ok((0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream((b.first_index + i) as u64);
                (0..self.attributes)
                    .map(|_| OracleLabel { label: rng.random::<bool>(), confidence: rng.random::<f64>() })
                    .collect()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityConfig {
    pub space: Space,
    pub n_samples: usize,
    pub keep_fraction: f64,
    /// Newton iterations for the logistic fit.
    pub classifier_steps: usize,
    /// L2 penalty per training sample.
    pub ridge: f64,
    pub seed: u64,
    pub batch: usize,
}

impl SeparabilityConfig {
    pub fn new(space: Space, n_samples: usize, seed: u64) -> Self {
        SeparabilityConfig {
            space,
            n_samples,
            keep_fraction: 0.5,
            classifier_steps: 25,
            ridge: 1e-3,
            seed,
            batch: 256,
        }
    }

    pub fn metric_name(&self) -> String {
        format!("ls_{}", self.space.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsResult {
    pub name: String,
    /// `exp(Σ H(Y|X))` over the attributes that were scored.
    pub score: f64,
    /// Conditional entropy in nats per scored attribute.
    pub entropies: Vec<(String, f64)>,
    /// Attributes with a single class after filtering.
    pub skipped: Vec<String>,
}

/// `H(Y|X)` in nats from paired binary predictions and labels.
pub fn conditional_entropy(pred: &[bool], truth: &[bool]) -> f64 {
    let n = pred.len() as f64;
    let mut table = [[0usize; 2]; 2];
    for (&x, &y) in pred.iter().zip(truth) {
        table[x as usize][y as usize] += 1;
    }
    let mut h = 0.0;
    for row in table {
        let nx = (row[0] + row[1]) as f64;
        for &c in &row {
            if c > 0 {
                let c = c as f64;
                h -= c / n * (c / nx).ln();
            }
        }
    }
    h
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Ridge-regularized logistic regression by Newton's method; returns `[weights…, bias]`.
fn fit_logistic(x: &DMatrix<f64>, y: &[bool], steps: usize, ridge: f64) -> DVector<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let xb = x.clone().insert_column(d, 1.0);
    let lambda = ridge * n as f64;
    let mut beta = DVector::zeros(d + 1);
    for _ in 0..steps {
        let p = (&xb * &beta).map(sigmoid);
        let mut grad = &beta * lambda;
        let mut hess = DMatrix::identity(d + 1, d + 1) * lambda;
        for i in 0..n {
            let r = xb.row(i);
            let wi = p[i] * (1.0 - p[i]);
            let gi = p[i] - y[i] as u8 as f64;
            grad += r.transpose() * gi;
            hess.ger(wi, &r.transpose(), &r.transpose(), 1.0);
        }
        let Some(chol) = hess.cholesky() else { break };
        let step = chol.solve(&grad);
        beta -= &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    beta
}

fn predict(x: &DMatrix<f64>, beta: &DVector<f64>) -> Vec<bool> {
    let d = x.ncols();
    (0..x.nrows())
        .map(|i| (x.row(i) * beta.rows(0, d))[0] + beta[d] > 0.0)
        .collect()
}

/// Generates samples, labels them with `oracle`, keeps the most confident
/// fraction per attribute, fits a linear classifier on the latents of every
/// other kept sample and scores the rest: `exp(Σ_attr H(Y|X))`.
pub fn linear_separability(
    generator: &dyn LatentGenerator,
    oracle: &dyn AttributeOracle,
    cfg: &SeparabilityConfig,
) -> Result<LsResult, MetricError> {
    if !(cfg.keep_fraction > 0.0 && cfg.keep_fraction <= 1.0) {
        return Err(MetricError::Input(format!("keep_fraction {} not in (0,1]", cfg.keep_fraction)));
    }
    if cfg.n_samples < 4 {
        return Err(MetricError::Input("linear separability needs at least 4 samples".into()));
    }
    let n = cfg.n_samples;
    let dz = generator.z_dim();
    let names = oracle.attributes();
    let z_all = sample_latents::<f64>(n, dz, cfg.seed);
    let noise_seed = derive_seed(cfg.seed, u64::MAX);
    let mut latents: Vec<f64> = Vec::new();
    let mut labels: Vec<Vec<OracleLabel>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let count = cfg.batch.max(1).min(n - start);
        let z = z_all.slice_outer(start, count)?;
        let w = generator.map_z(&z)?;
        let seeds: Vec<u64> = (start..start + count).map(|i| derive_seed(noise_seed, i as u64)).collect();
        let images = generator.render(&w, &seeds)?;
        let batch = OracleBatch { z: &z, w: &w, images: &images, first_index: start, seed: cfg.seed };
        let l = oracle.label(&batch)?;
        if l.len() != count || l.iter().any(|r| r.len() != names.len()) {
            return Err(MetricError::Input("oracle returned a malformed label table".into()));
        }
        labels.extend(l);
        latents.extend_from_slice(match cfg.space {
            Space::Z => z.data(),
            Space::W => w.data(),
        });
        start += count;
    }
    let d = latents.len() / n;
    let keep = ((cfg.keep_fraction * n as f64).ceil() as usize).clamp(2, n);

    let mut entropies = Vec::new();
    let mut skipped = Vec::new();
    for (a, name) in names.iter().enumerate() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| labels[j][a].confidence.total_cmp(&labels[i][a].confidence).then(i.cmp(&j)));
        let mut kept = order[..keep].to_vec();
        kept.sort_unstable();
        let (train, test): (Vec<_>, Vec<_>) = kept.iter().copied().enumerate().partition(|(k, _)| k % 2 == 0);
        let gather = |set: &[(usize, usize)]| {
            let x = DMatrix::from_fn(set.len(), d, |r, c| latents[set[r].1 * d + c]);
            let y: Vec<bool> = set.iter().map(|&(_, i)| labels[i][a].label).collect();
            (x, y)
        };
        let (xt, yt) = gather(&train);
        let (xh, yh) = gather(&test);
        let single = |y: &[bool]| y.iter().all(|&v| v) || y.iter().all(|&v| !v);
        if single(&yt) || single(&yh) {
            skipped.push(name.clone());
            continue;
        }
        let beta = fit_logistic(&xt, &yt, cfg.classifier_steps, cfg.ridge);
        entropies.push((name.clone(), conditional_entropy(&predict(&xh, &beta), &yh)));
    }
    let score = entropies.iter().map(|(_, h)| h).sum::<f64>().exp();
    Ok(LsResult { name: cfg.metric_name(), score, entropies, skipped })
}
