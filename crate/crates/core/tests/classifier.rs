use std::time::Instant;

use ifsynth::classifier::{magnitude_batch, ClassifierConfig, PitchClassifier};
use ifsynth::dataio::{make_dataset, CorpusSpec, MANIFEST_FILE};
use ifsynth::pipeline::encode_dataset;
use ifsynth::spectral::RepresentationConfig;

#[test]
fn learns_four_pitches_on_desk_images() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec::new(vec![48, 60, 72, 84], 24, 6, 11).with_length(1024);
    make_dataset(&spec, dir.path()).unwrap();
    let repr = RepresentationConfig::preset("if_linear_desk").unwrap();
    let data = encode_dataset(&dir.path().join(MANIFEST_FILE), &repr).unwrap();
    assert_eq!((data.train.len(), data.test.len()), (77, 19));

    let [h, w, _] = data.repr.image_shape();
    let cfg = ClassifierConfig::for_images(h, w);
    assert_eq!(cfg.input_pool, 1);
    let mut clf = PitchClassifier::new(cfg, 0).unwrap();
    let x = magnitude_batch(&data.train.images).unwrap();
    let tx = magnitude_batch(&data.test.images).unwrap();
    let mut losses = Vec::new();
    let t = Instant::now();
    let summary = clf.train(&x, &data.train.labels, Some((&tx, &data.test.labels)), 3, |_, l| losses.push(l)).unwrap();
    eprintln!("classifier: {summary:?} in {:.1} s", t.elapsed().as_secs_f64());
    assert!(losses.last().unwrap() < &losses[0]);
    assert!(summary.test_accuracy.unwrap() >= 0.9, "{summary:?}");

    let stem = dir.path().join("clf");
    clf.save(&stem).unwrap();
    let back = PitchClassifier::load(&stem).unwrap();
    assert_eq!(back.predict(&tx).unwrap(), clf.predict(&tx).unwrap());
    assert_eq!(clf.features(&tx).unwrap().shape(), &[19, 64]);
}

#[test]
fn training_is_deterministic() {
    let cfg = ClassifierConfig { epochs: 2, ..ClassifierConfig::for_images(16, 32) };
    let x = ifsynth::tensor::Tensor::from_fn(&[8, 16, 32, 1], |i| ((i * 7919) % 13) as f32 / 13.0 - 0.5);
    let labels = [0, 1, 2, 3, 0, 1, 2, 3];
    let train = || {
        let mut c = PitchClassifier::new(cfg.clone(), 4).unwrap();
        c.train(&x, &labels, None, 9, |_, _| {}).unwrap();
        c.predict(&x).unwrap()
    };
    assert_eq!(train(), train());
}
