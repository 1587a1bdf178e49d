mod common;

use std::path::{Path, PathBuf};

use common::{cli, small_config, tree_bytes};
use restyle::cli::RunManifest;
use restyle::data::FilterReport;
use restyle::data::{toy_corpus, DetectionRecord};
use restyle::metrics::{derive_seed, read_metric_csv};
use restyle::model::{sample_latents, NoiseConfig};

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new(resolution: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), small_config(resolution)).unwrap();
        Run { dir }
    }

    fn p(&self, rel: &str) -> String {
        self.dir.path().join(rel).to_string_lossy().into_owned()
    }

    fn cli(&self, args: &[&str]) -> (i32, String, String) {
        let cfg = self.p("run.toml");
        let mut all = args.to_vec();
        all.extend(["--config", &cfg]);
        cli(&all)
    }

    fn ok(&self, args: &[&str]) -> String {
        let (code, out, err) = self.cli(args);
        assert_eq!(code, 0, "{args:?} failed: {err}");
        out
    }

    /// Toy shards plus a short training run; returns the final snapshot path.
    fn trained(&self) -> String {
        self.ok(&["prepare", "--toy", "--out", &self.p("toy")]);
        self.ok(&["train", "--shards", &self.p("toy"), "--run-dir", &self.p("run")]);
        self.p("run/snapshots/step-000004.sgfw")
    }
}

fn save_toy_corpus(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for (id, img, _) in toy_corpus(90, 10, 96, 3) {
        img.save(dir.join(id)).unwrap();
    }
}

fn count(summary: &str, key: &str) -> usize {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
        .parse()
        .unwrap()
}

fn cell(dir: &str, mode: &str, r: usize, c: usize) -> image::RgbImage {
    image::open(PathBuf::from(dir).join(format!("{mode}_r{r:02}_c{c:02}.png"))).unwrap().to_rgb8()
}

#[test]
fn prepare_heuristic_keeps_the_faces() {
    let run = Run::new(32);
    save_toy_corpus(&run.dir.path().join("raw"));
    let out = run.ok(&["prepare", "--input", &run.p("raw"), "--heuristic-detector", "--out", &run.p("shards")]);
    assert_eq!((count(&out, "kept"), count(&out, "rejected")), (90, 10), "{out}");
    let report: FilterReport = serde_json::from_str(&std::fs::read_to_string(run.p("shards/filter_report.json")).unwrap()).unwrap();
    assert_eq!(report.summary(), out.trim());
    let shards = restyle::data::read_shards(Path::new(&run.p("shards"))).unwrap();
    assert_eq!(shards.len(), 90);
    assert_eq!(shards.record_shape(), (32, 32, 3));
}

#[test]
fn prepare_with_detection_file() {
    let run = Run::new(16);
    save_toy_corpus(&run.dir.path().join("raw"));
    let lines: Vec<String> = toy_corpus(90, 10, 96, 3)
        .into_iter()
        .filter_map(|(id, _, b)| b.map(|b| (id, b)))
        .map(|(id, b)| {
            let rec = DetectionRecord::new(id, [b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64], 0.99);
            serde_json::to_string(&rec).unwrap()
        })
        .collect();
    assert_eq!(lines.len(), 90);
    std::fs::write(run.p("dets.jsonl"), lines.join("\n")).unwrap();
    let out = run.ok(&["prepare", "--input", &run.p("raw"), "--detections", &run.p("dets.jsonl"), "--out", &run.p("shards")]);
    assert_eq!((count(&out, "kept"), count(&out, "no_detection")), (90, 10), "{out}");
}

#[test]
fn prepare_edge_cases() {
    let run = Run::new(16);
    std::fs::create_dir_all(run.p("empty")).unwrap();
    let out = run.ok(&["prepare", "--input", &run.p("empty"), "--heuristic-detector", "--out", &run.p("s")]);
    assert_eq!((count(&out, "total"), count(&out, "kept")), (0, 0));

    let missing = run.p("nope.jsonl");
    let (code, _, err) = run.cli(&["prepare", "--input", &run.p("empty"), "--detections", &missing, "--out", &run.p("s2")]);
    assert_ne!(code, 0);
    assert!(err.contains("nope.jsonl"), "{err}");

    let (code, _, err) = run.cli(&["prepare", "--input", &run.p("empty"), "--out", &run.p("s3")]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = cli(&["prepare"]);
    assert_eq!(code, 1);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let run = Run::new(16);
    let (code, _, err) = run.cli(&["prepare", "--toy", "--out", &run.p("t"), "--set", "toy.colour=3"]);
    assert_eq!(code, 1, "{err}");
    std::fs::write(run.p("bad.toml"), "[model]\nwidth = 3\n").unwrap();
    let (code, _, _) = cli(&["prepare", "--toy", "--out", &run.p("t"), "--config", &run.p("bad.toml")]);
    assert_eq!(code, 1);
}

#[test]
fn train_without_steps_and_with_wrong_resolution() {
    let run = Run::new(16);
    run.ok(&["prepare", "--toy", "--out", &run.p("toy")]);
    let out = run.ok(&["train", "--shards", &run.p("toy"), "--run-dir", &run.p("zero"), "--steps", "0"]);
    assert!(out.contains("no snapshots"), "{out}");
    let m = RunManifest::load(Path::new(&run.p("zero"))).unwrap();
    assert!(m.snapshots.is_empty() && m.best.is_none());

    run.ok(&["prepare", "--toy", "--out", &run.p("toy32"), "--set", "toy.resolution=32"]);
    let (code, _, err) = run.cli(&["train", "--shards", &run.p("toy32"), "--run-dir", &run.p("bad")]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("resolution"), "{err}");
    assert!(!Path::new(&run.p("bad/manifest.json")).exists());
}

#[test]
fn train_writes_a_complete_manifest() {
    let run = Run::new(16);
    run.trained();
    let m = RunManifest::load(Path::new(&run.p("run"))).unwrap();
    assert_eq!(m.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(), vec![2, 4]);
    assert!(m.best.is_some());
    for f in m.referenced_files() {
        assert!(Path::new(&run.p("run")).join(f).exists(), "{f}");
    }
}

#[test]
fn generate_grid_composite() {
    let run = Run::new(32);
    let snap = run.trained();
    let out = run.ok(&["generate", "--snapshot", &snap, "--mode", "grid", "--out", &run.p("grid")]);
    assert!(out.contains("4x4"), "{out}");
    let composite = image::open(run.p("grid/grid.png")).unwrap().to_rgb8();
    assert_eq!(composite.dimensions(), (128, 128));
    for r in 0..4 {
        for c in 0..4 {
            let cell_img = cell(&run.p("grid"), "grid", r, c);
            let view = image::imageops::crop_imm(&composite, 32 * c as u32, 32 * r as u32, 32, 32).to_image();
            assert_eq!(cell_img, view);
        }
    }
    let (code, _, _) = run.cli(&["generate", "--snapshot", &snap, "--mode", "mosaic", "--out", &run.p("x")]);
    assert_eq!(code, 1);
}

#[test]
fn trunc_sweep_columns() {
    let run = Run::new(16);
    let snap = run.trained();
    let dir = run.p("sweep");
    run.ok(&["generate", "--snapshot", &snap, "--mode", "trunc_sweep", "--psi-values", "1,0.5,0", "--out", &dir]);
    let cfg = restyle::cli::RunConfig::load(Some(Path::new(&run.p("run.toml"))), &[]).unwrap();
    let g = restyle::cli::load_generator(Path::new(&snap), true).unwrap();
    let noise = NoiseConfig::all_from_layer_seeds(
        (0..g.num_layers() as u64).map(|l| derive_seed(cfg.generate.noise_seed, l)).collect(),
    );
    let z = sample_latents::<f32>(3, g.z_dim(), cfg.generate.seed);
    let mean_w = g.mean_w(cfg.truncation.mean_w_samples, cfg.truncation.mean_w_seed).unwrap();
    let mean_face = restyle::data::tensor_to_images(
        &g.synthesize(&g.layer_styles(&mean_w.clone().reshape(&[1, mean_w.len()]).unwrap(), None).unwrap(), &noise).unwrap(),
    )
    .unwrap()
    .remove(0);
    for r in 0..3 {
        let plain = g.generate(&z.slice_outer(r, 1).unwrap(), None, &noise).unwrap();
        assert_eq!(cell(&dir, "trunc_sweep", r, 0), restyle::data::tensor_to_images(&plain).unwrap().remove(0));
        // the cutoff covers every layer at this resolution
        assert_eq!(cell(&dir, "trunc_sweep", r, 2), mean_face);
    }
    assert_ne!(cell(&dir, "trunc_sweep", 0, 0), cell(&dir, "trunc_sweep", 1, 0));
}

#[test]
fn noise_ablation_none_column_ignores_noise_seed() {
    let run = Run::new(16);
    let snap = run.trained();
    for seed in ["1", "2"] {
        run.ok(&["generate", "--snapshot", &snap, "--mode", "noise_ablation", "--noise-seed", seed, "--out", &run.p(&format!("ab{seed}"))]);
    }
    for r in 0..3 {
        assert_eq!(cell(&run.p("ab1"), "noise_ablation", r, 1), cell(&run.p("ab2"), "noise_ablation", r, 1));
        assert_ne!(cell(&run.p("ab1"), "noise_ablation", r, 0), cell(&run.p("ab2"), "noise_ablation", r, 0));
    }
}

#[test]
fn eval_rows_and_csv() {
    let run = Run::new(16);
    let snap = run.trained();
    let csv = run.p("m/metrics.csv");
    let out = run.ok(&[
        "eval", "--snapshot", &snap, "--shards", &run.p("toy"), "--labels", &run.p("toy/labels.csv"),
        "--metrics", "fid,ppl_zfull,ppl_wfull,ppl_zend,ppl_wend,ls_z", "--out", &csv,
        "--set", "metrics.ls_oracle=\"latent_coordinate\"",
    ]);
    let rows = read_metric_csv(Path::new(&csv)).unwrap();
    let ppl: Vec<(&str, &str, &str)> = rows
        .iter()
        .filter(|r| r.metric.starts_with("ppl"))
        .map(|r| (r.metric.as_str(), r.space.as_str(), r.variant.as_str()))
        .collect();
    assert_eq!(
        ppl,
        vec![("ppl_zfull", "z", "full"), ("ppl_wfull", "w", "full"), ("ppl_zend", "z", "end"), ("ppl_wend", "w", "end")]
    );
    let ls = rows.iter().find(|r| r.metric == "ls_z").unwrap();
    assert!((ls.number().unwrap() - 1.0).abs() < 1e-6, "{ls:?}");
    for r in &rows {
        assert!(r.number().is_some(), "{r:?}");
        assert!(out.contains(&r.value), "{} missing from {out}", r.value);
    }
}

#[test]
fn eval_survives_a_failing_metric() {
    let run = Run::new(16);
    let snap = run.trained();
    let csv = run.p("metrics.csv");
    run.ok(&["eval", "--snapshot", &snap, "--shards", &run.p("missing"), "--metrics", "fid,ppl_wend", "--out", &csv]);
    let rows = read_metric_csv(Path::new(&csv)).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].value.starts_with("error") && rows[0].number().is_none());
    assert!(rows[1].number().is_some());
    let (code, _, _) = run.cli(&["eval", "--snapshot", &snap, "--metrics", "fid,bogus", "--out", &csv]);
    assert_eq!(code, 1);
}

#[test]
fn reruns_are_byte_identical() {
    let pipeline = || {
        let run = Run::new(16);
        let snap = run.trained();
        run.ok(&["generate", "--snapshot", &snap, "--out", &run.p("gen")]);
        run.ok(&["eval", "--snapshot", &snap, "--shards", &run.p("toy"), "--labels", &run.p("toy/labels.csv"), "--out", &run.p("eval/m.csv")]);
        let mut files = tree_bytes(run.dir.path());
        let mut m: serde_json::Value = serde_json::from_slice(&files["run/manifest.json"]).unwrap();
        m["created"] = 0.into();
        files.insert("run/manifest.json".into(), serde_json::to_vec(&m).unwrap());
        files.remove("run.toml");
        files
    };
    let (a, b) = (pipeline(), pipeline());
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(&b[k] == v, "{k} differs");
    }
}
