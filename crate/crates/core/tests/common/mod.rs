#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use restyle::autodiff::{Tape, Var};
use restyle::model::{adain, inject_noise, Discriminator, Generator, ModelConfig, NoiseConfig};
use restyle::train::{d_loss, g_loss, r1_from_scores};
use restyle::{Tensor, TensorError};

pub type Loss = Box<dyn for<'t> Fn(&'t Tape<f64>, Var<'t, f64>) -> Result<Var<'t, f64>, TensorError>>;

/// One scalar function of a single tensor argument, with the point to check it at.
pub struct OpCase {
    pub name: &'static str,
    pub point: Tensor<f64>,
    pub f: Loss,
}

/// `Σ y ⊙ r`: turns any output into a scalar with a non-trivial upstream gradient.
fn weighted<'t>(y: Var<'t, f64>, r: &Tensor<f64>) -> Result<Var<'t, f64>, TensorError> {
    y.mul(y.tape().leaf(r.clone()))?.sum()
}

macro_rules! case {
    ($name:expr, $point:expr, [$($cap:ident),*], |$t:ident, $x:ident| $body:expr) => {{
        $(let $cap = $cap.clone();)*
        OpCase { name: $name, point: $point.clone(), f: Box::new(move |$t, $x| $body) }
    }};
}

/// Every differentiable tape operation, once per differentiable argument,
/// plus the model-level blocks and losses built from them.
pub fn op_cases(seed: u64) -> Vec<OpCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rn = |s: &[usize]| Tensor::<f64>::randn(s, &mut rng);
    let (a, b, r23) = (rn(&[2, 3]), rn(&[2, 3]), rn(&[2, 3]));
    let positive = a.map(|v| v.abs() + 0.5);
    let (m34, m42, r32, r43) = (rn(&[3, 4]), rn(&[4, 2]), rn(&[3, 2]), rn(&[4, 3]));
    let (img, kern, bias4) = (rn(&[2, 3, 4, 4]), rn(&[4, 3, 3, 3]), rn(&[4]));
    let (r_img4, r_img3) = (rn(&[2, 4, 4, 4]), rn(&[2, 3, 4, 4]));
    let (r_up, r_pool) = (rn(&[2, 3, 8, 8]), rn(&[2, 3, 2, 2]));
    let (col, r21, r6) = (rn(&[2, 1]), rn(&[2, 1]), rn(&[6]));
    let (dw, db, r24) = (rn(&[3, 4]), rn(&[4]), rn(&[2, 4]));
    let (style_s, style_b) = (rn(&[2, 3]), rn(&[2, 3]));
    let (noise, strength) = (rn(&[2, 1, 4, 4]), rn(&[3]));
    let (scores, other) = (rn(&[4]), rn(&[4]));
    let crit = rn(&[2, 3, 4, 4]);

    vec![
        case!("add.lhs", a, [b, r23], |t, x| weighted(x.add(t.leaf(b.clone()))?, &r23)),
        case!("add.rhs", b, [a, r23], |t, x| weighted(t.leaf(a.clone()).add(x)?, &r23)),
        case!("sub.lhs", a, [b, r23], |t, x| weighted(x.sub(t.leaf(b.clone()))?, &r23)),
        case!("sub.rhs", b, [a, r23], |t, x| weighted(t.leaf(a.clone()).sub(x)?, &r23)),
        case!("mul.lhs", a, [b, r23], |t, x| weighted(x.mul(t.leaf(b.clone()))?, &r23)),
        case!("mul.rhs", b, [a, r23], |t, x| weighted(t.leaf(a.clone()).mul(x)?, &r23)),
        case!("scale", a, [r23], |_t, x| weighted(x.scale(-1.7), &r23)),
        case!("add_scalar", a, [r23], |_t, x| weighted(x.add_scalar(0.3), &r23)),
        case!("powf", positive, [r23], |_t, x| weighted(x.powf(-0.5), &r23)),
        case!("square", a, [r23], |_t, x| weighted(x.square()?, &r23)),
        case!("sigmoid", a, [r23], |_t, x| weighted(x.sigmoid(), &r23)),
        case!("softplus", a, [r23], |_t, x| weighted(x.softplus(), &r23)),
        case!("leaky_relu", a, [r23], |_t, x| weighted(x.leaky_relu(0.2), &r23)),
        case!("matmul.lhs", m34, [m42, r32], |t, x| weighted(x.matmul(t.leaf(m42.clone()))?, &r32)),
        case!("matmul.rhs", m42, [m34, r32], |t, x| weighted(t.leaf(m34.clone()).matmul(x)?, &r32)),
        case!("transpose", m34, [r43], |_t, x| weighted(x.transpose()?, &r43)),
        case!("conv2d.input", img, [kern, r_img4], |t, x| weighted(x.conv2d(t.leaf(kern.clone()))?, &r_img4)),
        case!("conv2d.kernel", kern, [img, r_img4], |t, x| weighted(t.leaf(img.clone()).conv2d(x)?, &r_img4)),
        case!("conv2d_bias.bias", bias4, [img, kern, r_img4], |t, x| {
            weighted(t.leaf(img.clone()).conv2d_bias(t.leaf(kern.clone()), x)?, &r_img4)
        }),
        case!("conv2d_bias.kernel", kern, [img, bias4], |t, x| {
            t.leaf(img.clone()).conv2d_bias(x, t.leaf(bias4.clone()))?.square()?.sum()
        }),
        case!("dense.input", a, [dw, db, r24], |t, x| weighted(x.dense(t.leaf(dw.clone()), t.leaf(db.clone()))?, &r24)),
        case!("dense.weight", dw, [a, db, r24], |t, x| weighted(t.leaf(a.clone()).dense(x, t.leaf(db.clone()))?, &r24)),
        case!("dense.bias", db, [a, dw, r24], |t, x| weighted(t.leaf(a.clone()).dense(t.leaf(dw.clone()), x)?, &r24)),
        case!("upsample2x", img, [r_up], |_t, x| weighted(x.upsample2x()?, &r_up)),
        case!("sum_pool2x", img, [r_pool], |_t, x| weighted(x.sum_pool2x()?, &r_pool)),
        case!("avg_pool2x", img, [r_pool], |_t, x| weighted(x.avg_pool2x()?, &r_pool)),
        case!("broadcast_to", col, [r23], |_t, x| weighted(x.broadcast_to(&[2, 3])?, &r23)),
        case!("sum_to", a, [r21], |_t, x| weighted(x.sum_to(&[2, 1])?, &r21)),
        case!("reshape", a, [r6], |_t, x| weighted(x.reshape(&[6])?, &r6)),
        case!("sum", a, [], |_t, x| x.square()?.sum()),
        case!("mean", a, [], |_t, x| x.softplus().mean()),
        case!("adain.input", img, [style_s, style_b, r_img3], |t, x| {
            weighted(adain(x, t.leaf(style_s.clone()), t.leaf(style_b.clone()))?, &r_img3)
        }),
        case!("adain.scale", style_s, [img, style_b, r_img3], |t, x| {
            weighted(adain(t.leaf(img.clone()), x, t.leaf(style_b.clone()))?, &r_img3)
        }),
        case!("adain.bias", style_b, [img, style_s, r_img3], |t, x| {
            weighted(adain(t.leaf(img.clone()), t.leaf(style_s.clone()), x)?, &r_img3)
        }),
        case!("inject_noise.input", img, [noise, strength, r_img3], |t, x| {
            weighted(inject_noise(x, t.leaf(noise.clone()), t.leaf(strength.clone()))?, &r_img3)
        }),
        case!("inject_noise.noise", noise, [img, strength, r_img3], |t, x| {
            weighted(inject_noise(t.leaf(img.clone()), x, t.leaf(strength.clone()))?, &r_img3)
        }),
        case!("inject_noise.strength", strength, [img, noise, r_img3], |t, x| {
            weighted(inject_noise(t.leaf(img.clone()), t.leaf(noise.clone()), x)?, &r_img3)
        }),
        case!("d_loss.real", scores, [other], |t, x| d_loss(x, t.leaf(other.clone()))),
        case!("d_loss.fake", other, [scores], |t, x| d_loss(t.leaf(scores.clone()), x)),
        case!("g_loss", other, [], |_t, x| g_loss(x)),
        case!("r1.second_order", img, [crit], |t, x| {
            let s = x.mul(t.leaf(crit.clone()))?.softplus().sum_to(&[2, 1, 1, 1])?.reshape(&[2])?;
            r1_from_scores(t, s, x, 10.0)
        }),
    ]
}

/// A small generator/discriminator pair for composed gradient checks.
pub fn tiny_pair(seed: u64) -> (Generator<f64>, Discriminator<f64>) {
    let cfg = ModelConfig {
        resolution: 8,
        z_dim: 4,
        mapping_depth: 2,
        base_channels: 4,
        min_channels: 4,
        noise_strength_init: 0.3,
        ..Default::default()
    };
    (Generator::new(&cfg, seed).unwrap(), Discriminator::new(&cfg, seed + 1).unwrap())
}

/// `Σ D(G(z))` with fixed per-layer noise, as a function of the latent batch `z`.
pub fn g_then_d(g: Generator<f64>, d: Discriminator<f64>, noise_seed: u64) -> Loss {
    Box::new(move |tape, z| {
        let n = z.shape()[0];
        let pg = g.params().bind(tape);
        let pd = d.params().bind(tape);
        let err = |e: restyle::model::ModelError| TensorError::Contract(e.to_string());
        let w = g.map_latent_var(&pg, z).map_err(err)?;
        let styles = vec![w; g.num_layers()];
        let seeds = (0..g.num_layers() as u64).map(|l| noise_seed + l).collect();
        let noise = NoiseConfig::all_from_layer_seeds(seeds)
            .resolve::<f64>(&g.layer_resolutions(), n)
            .map_err(err)?;
        let img = g.synthesize_var(&pg, &styles, &noise).map_err(err)?;
        d.forward(&pd, img).map_err(err)?.sum()
    })
}

/// A random corpus mixing decodable, undecodable and detection-less images,
/// with random (possibly out-of-bounds or tiny) boxes and a random policy.
pub fn random_corpus(
    seed: u64,
) -> (Vec<restyle::data::CorpusImage>, Vec<restyle::data::DetectionRecord>, restyle::data::FilterPolicy) {
    use rand::Rng;
    use restyle::data::{CorpusImage, CorpusItem, DetectionRecord, FilterPolicy};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..24);
    let mut images = Vec::with_capacity(n);
    let mut dets = Vec::new();
    for i in 0..n {
        let id = format!("img{i}");
        let (w, h) = (rng.random_range(4..24u32), rng.random_range(4..24u32));
        let item = if rng.random_bool(0.15) {
            CorpusItem::Encoded((0..rng.random_range(0..32)).map(|_| rng.random()).collect())
        } else {
            CorpusItem::Decoded(image::RgbImage::from_fn(w, h, |x, y| image::Rgb([(x * 9) as u8, (y * 7) as u8, 3])))
        };
        images.push(CorpusImage { id: id.clone(), item });
        for _ in 0..rng.random_range(0..3) {
            let bbox = [
                rng.random_range(-10.0..30.0),
                rng.random_range(-10.0..30.0),
                rng.random_range(0.0..20.0),
                rng.random_range(0.0..20.0),
            ];
            dets.push(DetectionRecord::new(id.clone(), bbox, rng.random_range(0.0..1.0)));
        }
    }
    let policy = FilterPolicy {
        min_conf: rng.random_range(0.0..0.8),
        margin: rng.random_range(0.0..12.0),
        out_size: rng.random_range(2..8),
        min_box_size: rng.random_range(0.0..6.0),
    };
    (images, dets, policy)
}

/// Runs the command line in-process: `(exit code, stdout, stderr)`.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["restyle"];
    argv.extend_from_slice(args);
    let code = restyle::cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// A small but complete run configuration at `resolution`.
pub fn small_config(resolution: usize) -> String {
    format!(
        r#"[model]
resolution = {resolution}
z_dim = 8
mapping_depth = 2
base_channels = 8
min_channels = 4
noise_strength_init = 0.1

[train]
batch = 4
steps = 4
snapshot_every = 2
fid_n = 16

[toy]
count = 48

[data]
shard_capacity = 20

[truncation]
mean_w_samples = 256

[generate]
latents = 3

[metrics]
fid_n = 40
ppl_pairs = 20
ls_samples = 120
ls_steps = 5

[classifier]
steps = 5
"#
    )
}

/// Every file below `root` with its bytes, keyed by relative path.
pub fn tree_bytes(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}
