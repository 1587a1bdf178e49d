mod common;

use proptest::prelude::*;
use restyle::data::{
    crop_region, filter_corpus, heuristic_detector, read_shards, synth_toy_dataset, toy_corpus, write_shards,
    CorpusImage, DetectorConfig, FilterPolicy, ToyDatasetSpec,
};

#[test]
fn hand_derived_crop_regions() {
    let r = crop_region(400, 300, [100.0, 100.0, 80.0, 80.0], 50.0).unwrap();
    assert_eq!((r.x, r.y, r.width, r.height), (75, 75, 130, 130));
    let r = crop_region(100, 100, [0.0, 0.0, 40.0, 40.0], 50.0).unwrap();
    assert_eq!((r.x, r.y, r.width, r.height), (0, 0, 65, 65));
}

#[test]
fn report_is_conserved_over_random_corpora() {
    for seed in 0..300 {
        let (images, dets, policy) = common::random_corpus(seed);
        let (kept, r) = filter_corpus(&images, &dets, &policy);
        assert_eq!(r.kept + r.rejected, r.total, "seed {seed}");
        assert_eq!(r.total, images.len());
        assert_eq!(r.kept, kept.len());
        assert_eq!(r.no_detection + r.decode_error + r.undersized, r.rejected);
        assert_eq!(r.rejections.len(), r.rejected);
        assert!(kept.iter().all(|k| k.image.dimensions() == (policy.out_size, policy.out_size)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn in_bounds_crop_grows_by_the_margin(
        x in 30u32..100, y in 30u32..100, w in 1u32..60, h in 1u32..60, half in 0u32..25,
    ) {
        let m = 2 * half;
        let r = crop_region(200, 200, [x as f64, y as f64, w as f64, h as f64], m as f64).unwrap();
        prop_assert_eq!((r.x, r.y, r.width, r.height), (x - half, y - half, w + m, h + m));
    }

    #[test]
    fn shard_roundtrip_and_cursor_partition(
        records in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 12), 0..40),
        capacity in 1usize..9,
        k in 1usize..6,
    ) {
        let dir = tempfile::tempdir().unwrap();
        write_shards(dir.path(), 2, 2, 3, records.iter().map(|r| r.as_slice()), capacity).unwrap();
        let set = read_shards(dir.path()).unwrap();
        let all: Vec<Vec<u8>> = set.cursor().map(|r| r.to_vec()).collect();
        prop_assert_eq!(&all, &records);
        let mut split: Vec<Vec<u8>> = set.partition(k).into_iter().flatten().map(|r| r.to_vec()).collect();
        let mut sorted = records.clone();
        split.sort();
        sorted.sort();
        prop_assert_eq!(split, sorted);
    }
}

#[test]
fn toy_labels_match_measured_geometry() {
    for resolution in [16u32, 32] {
        let spec = ToyDatasetSpec { resolution, count: 400, seed: 9, ..Default::default() };
        let ds = synth_toy_dataset(&spec).unwrap();
        let r = resolution as f64;
        for (i, ((img, attrs), geom)) in ds.images.iter().zip(&ds.attributes).zip(&ds.geometry).enumerate() {
            let centre = img.get_pixel(resolution / 2, resolution / 2);
            let width = (0..resolution).filter(|&x| img.get_pixel(x, resolution / 2) == centre).count() as f64;
            assert_eq!(width > 2.0 * 0.31 * r, attrs.face_large, "sample {i} at {resolution}: width {width}");

            // background noise may hit the eye colour, so only look inside the face
            let dark: Vec<f64> = img
                .enumerate_pixels()
                .filter(|&(x, y, p)| p.0 == [20, 20, 40] && geom.contains(x, y))
                .map(|(x, _, _)| x as f64 + 0.5)
                .collect();
            let mid = r / 2.0;
            let side_mean = |left: bool| {
                let v: Vec<f64> = dark.iter().copied().filter(|&x| (x < mid) == left).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let spread = side_mean(false) - side_mean(true);
            assert_eq!(spread > (0.18 + 0.07) * r, attrs.eyes_wide, "sample {i} at {resolution}: eye spread {spread}");
        }
    }
}

#[test]
fn pipeline_is_deterministic() {
    let corpus = toy_corpus(30, 5, 64, 4);
    let cfg = DetectorConfig::default();
    let run = |dir: &std::path::Path| {
        let dets: Vec<_> = corpus.iter().flat_map(|(id, img, _)| heuristic_detector(id, img, &cfg)).collect();
        let images: Vec<_> = corpus.iter().map(|(id, img, _)| CorpusImage::decoded(id.clone(), img.clone())).collect();
        let policy = FilterPolicy { out_size: 16, ..Default::default() };
        let (kept, report) = filter_corpus(&images, &dets, &policy);
        let paths = write_shards(dir, 16, 16, 3, kept.iter().map(|k| k.image.as_raw().as_slice()), 8).unwrap();
        let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        (report, bytes)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}
