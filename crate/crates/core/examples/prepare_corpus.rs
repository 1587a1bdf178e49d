//! Runs face filtering and cropping on a generated corpus with the built-in detector.

use restyle::data::{filter_corpus, heuristic_detector, toy_corpus, CorpusImage, DetectorConfig, FilterPolicy};

fn main() {
    let corpus = toy_corpus(90, 10, 96, 5);
    let cfg = DetectorConfig::default();
    let detections: Vec<_> = corpus.iter().flat_map(|(id, img, _)| heuristic_detector(id, img, &cfg)).collect();
    let images: Vec<_> = corpus.into_iter().map(|(id, img, _)| CorpusImage::decoded(id, img)).collect();

    let policy = FilterPolicy { out_size: 32, ..Default::default() };
    let (kept, report) = filter_corpus(&images, &detections, &policy);
    println!("{}", report.summary());
    if let Some(k) = kept.first() {
        println!("first crop {} from box {:?} -> {}x{}", k.id, k.detection.bbox, k.image.width(), k.image.height());
    }
    for (id, why) in report.rejections.iter().take(3) {
        println!("rejected {id}: {why:?}");
    }
}
