use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restyle::data::{synth_toy_dataset, write_shards, read_shards, ToyDatasetSpec};
use restyle::metrics::{
    fid, frechet_distance, linear_separability, ppl, ppl_on_pairs, slerp, AttributeOracle, GaussianStats,
    GeneratorSource, IdentityEmbedder, LatentCoordinateOracle, LinearGenerator, MetricError, OracleBatch,
    OracleLabel, PixelEmbedder, PplConfig, PplPair, Sampling, SeparabilityConfig, ShardSource, Space,
};
use restyle::model::{Generator, ModelConfig};

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 1e-3
}

fn stats(mean: DVector<f64>, cov: DMatrix<f64>) -> GaussianStats {
    GaussianStats { mean, cov, n: 100 }
}

#[test]
fn frechet_is_zero_on_itself_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let d = rng.random_range(1..8);
        let g1 = stats(DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)), random_psd(&mut rng, d));
        let g2 = stats(DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)), random_psd(&mut rng, d));
        assert!(frechet_distance(&g1, &g1).unwrap().abs() < 1e-6);
        let (a, b) = (frechet_distance(&g1, &g2).unwrap(), frechet_distance(&g2, &g1).unwrap());
        assert!((a - b).abs() < 1e-6 * a.max(1.0), "{a} vs {b}");
        assert!(a >= -1e-9);
    }
}

#[test]
fn frechet_matches_diagonal_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let d = rng.random_range(1..10);
        let m1: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let m2: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let s1: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(0.01..4.0));
        let s2: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(0.01..4.0));
        let expected: f64 = (0..d)
            .map(|i| (m1[i] - m2[i]).powi(2) + (s1[i].sqrt() - s2[i].sqrt()).powi(2))
            .sum();
        let got = frechet_distance(
            &stats(m1, DMatrix::from_diagonal(&s1)),
            &stats(m2, DMatrix::from_diagonal(&s2)),
        )
        .unwrap();
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn slerp_keeps_norm_between_equal_length_vectors(
        a in proptest::collection::vec(-3.0f64..3.0, 4),
        b in proptest::collection::vec(-3.0f64..3.0, 4),
        t in 0.0f64..1.0,
    ) {
        prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
        let b: Vec<f64> = b.iter().map(|x| x * norm(&a) / norm(&b)).collect();
        let s = slerp(&a, &b, t).unwrap();
        prop_assert!((norm(&s) - norm(&a)).abs() < 1e-9 * norm(&a).max(1.0) || angle_is_degenerate(&a, &b));
    }

    #[test]
    fn slerp_is_symmetric_under_reversal(
        a in proptest::collection::vec(-3.0f64..3.0, 5),
        b in proptest::collection::vec(-3.0f64..3.0, 5),
        t in 0.0f64..1.0,
    ) {
        prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
        let x = slerp(&a, &b, t).unwrap();
        let y = slerp(&b, &a, 1.0 - t).unwrap();
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }
}

fn angle_is_degenerate(a: &[f64], b: &[f64]) -> bool {
    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b));
    c.abs() > 1.0 - 1e-10
}

fn random_pairs(seed: u64, n: usize, d: usize) -> Vec<PplPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| PplPair {
            a: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
            b: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
            t: rng.random_range(0.0..0.9),
            noise_seed: i as u64,
        })
        .collect()
}

#[test]
fn ppl_scores_follow_their_pairs() {
    let lin = LinearGenerator { z_dim: 6, gain: 1.5 };
    for space in [Space::Z, Space::W] {
        let pairs = random_pairs(8, 40, 6);
        let forward = ppl_on_pairs(&lin, &pairs, space, 1e-4, &IdentityEmbedder).unwrap();
        let reversed: Vec<PplPair> = pairs.iter().rev().cloned().collect();
        let mut back = ppl_on_pairs(&lin, &reversed, space, 1e-4, &IdentityEmbedder).unwrap();
        back.reverse();
        assert_eq!(forward, back);
    }
}

#[test]
fn ppl_converges_as_epsilon_shrinks() {
    let lin = LinearGenerator { z_dim: 8, gain: 2.0 };
    for space in [Space::Z, Space::W] {
        for sampling in [Sampling::Full, Sampling::End] {
            let mut cfg = PplConfig::new(space, sampling, 500, 2);
            let coarse = ppl(&lin, &cfg, &IdentityEmbedder).unwrap().value;
            cfg.epsilon /= 10.0;
            let fine = ppl(&lin, &cfg, &IdentityEmbedder).unwrap().value;
            assert!((coarse - fine).abs() / fine < 0.01, "{}: {coarse} vs {fine}", cfg.metric_name());
        }
    }
}

#[test]
fn linear_w_path_length_is_gain_squared_times_distance() {
    // a lerp through a linear map of gain g scores g²|a−b|² for every t
    let lin = LinearGenerator { z_dim: 3, gain: 2.0 };
    let pairs = random_pairs(1, 20, 3);
    let got = ppl_on_pairs(&lin, &pairs, Space::W, 1e-3, &IdentityEmbedder).unwrap();
    for (p, v) in pairs.iter().zip(got) {
        let d2: f64 = p.a.iter().zip(&p.b).map(|(x, y)| (x - y).powi(2)).sum();
        assert!((v - 4.0 * d2).abs() < 1e-6 * (4.0 * d2).max(1.0), "{v} vs {}", 4.0 * d2);
    }
}

/// Reports the negation of another oracle.
struct Flipped<O>(O);

impl<O: AttributeOracle> AttributeOracle for Flipped<O> {
    fn attributes(&self) -> Vec<String> {
        self.0.attributes()
    }
    fn label(&self, b: &OracleBatch<'_>) -> Result<Vec<Vec<OracleLabel>>, MetricError> {
        Ok(self
            .0
            .label(b)?
            .into_iter()
            .map(|row| row.into_iter().map(|l| OracleLabel { label: !l.label, ..l }).collect())
            .collect())
    }
}

#[test]
fn separability_ignores_label_naming() {
    let lin = LinearGenerator { z_dim: 4, gain: 1.0 };
    for coordinate in 0..2 {
        let oracle = LatentCoordinateOracle { space: Space::W, coordinate };
        let mut cfg = SeparabilityConfig::new(Space::Z, 600, 5);
        cfg.classifier_steps = 15;
        let a = linear_separability(&lin, &oracle, &cfg).unwrap();
        let b = linear_separability(&lin, &Flipped(oracle), &cfg).unwrap();
        assert!((a.score - b.score).abs() < 1e-9, "{} vs {}", a.score, b.score);
    }
}

#[test]
fn metrics_do_not_depend_on_thread_count() {
    let g = Generator::<f32>::new(
        &ModelConfig { resolution: 8, z_dim: 8, base_channels: 8, min_channels: 4, ..Default::default() },
        3,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let toy = synth_toy_dataset(&ToyDatasetSpec { resolution: 8, count: 60, seed: 1, ..Default::default() }).unwrap();
    write_shards(dir.path(), 8, 8, 3, toy.images.iter().map(|i| i.as_raw().as_slice()), 25).unwrap();
    let shards = read_shards(dir.path()).unwrap();

    let run = || {
        let f = fid(&GeneratorSource { generator: &g }, &ShardSource { shards: &shards }, &PixelEmbedder, 50, 2)
            .unwrap()
            .value;
        let p = ppl(&g, &PplConfig::new(Space::W, Sampling::Full, 30, 1), &PixelEmbedder).unwrap().value;
        let mut cfg = SeparabilityConfig::new(Space::W, 80, 4);
        cfg.classifier_steps = 5;
        let l = linear_separability(&g, &LatentCoordinateOracle { space: Space::Z, coordinate: 1 }, &cfg)
            .unwrap()
            .score;
        (f.to_bits(), p.to_bits(), l.to_bits())
    };
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    assert_eq!(pool(1).install(run), pool(4).install(run));
}
