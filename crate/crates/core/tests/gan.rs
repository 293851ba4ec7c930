use ifsynth::gan::{
    network, generator_objective, gradient_penalty, sample_latent, GanConfig, GanModel, GanTrainer, RunOptions, TrainingSet,
};
use ifsynth::tensor::{Graph, Tensor};

fn tiny_config() -> GanConfig {
    let mut cfg = GanConfig::scaled((2, 4), 3, 1.0 / 32.0).unwrap();
    cfg.latent_dim = 8;
    cfg.batch_size = 4;
    cfg.blend_examples = 8;
    cfg.stable_examples = 8;
    cfg
}

fn tiny_data(cfg: &GanConfig) -> TrainingSet {
    let [h, w, _] = cfg.output_shape();
    let n = 6;
    let images = Tensor::from_fn(&[n, h, w, 2], |i| (((i * 2654435761) % 1000) as f32 / 1000.0 - 0.5) * 1.6);
    TrainingSet::new(images, (0..n).map(|i| [12, 24, 36][i % 3]).collect()).unwrap()
}

#[test]
fn every_stage_doubles_resolution_and_stays_in_range() {
    let cfg = tiny_config();
    let model = GanModel::new(cfg.clone(), 1).unwrap();
    let z = sample_latent(2, cfg.latent_dim, 4);
    for stage in 0..cfg.stage_count() {
        let out = model.generate_at(&z, &[40, 60], stage, 1.0).unwrap();
        let (h, w) = cfg.resolution(stage);
        assert_eq!(out.shape(), &[2, h, w, 2]);
        assert!(out.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn zero_alpha_reproduces_previous_stage() {
    let cfg = tiny_config();
    let model = GanModel::new(cfg.clone(), 2).unwrap();
    let z = sample_latent(3, cfg.latent_dim, 5);
    let pitches = [30, 50, 70];
    for stage in 1..cfg.stage_count() {
        let faded = model.generate_at(&z, &pitches, stage, 0.0).unwrap();
        let previous = model.generate_at(&z, &pitches, stage - 1, 1.0).unwrap().upsample2x().unwrap();
        assert_eq!(faded, previous);
    }
}

#[test]
fn plain_sampling_matches_the_recorded_generator() {
    for equalized in [false, true] {
        let mut cfg = tiny_config();
        cfg.equalized_lr = equalized;
        let model = GanModel::new(cfg.clone(), 6).unwrap();
        let z = sample_latent(3, cfg.latent_dim, 8);
        let pitches = [30, 50, 70];
        for stage in 0..cfg.stage_count() {
            for alpha in [0.0, 0.3, 1.0] {
                let g = Graph::new();
                let p = model.gen.bind(&g);
                let onehot = g.leaf(model.pitch_onehot(&pitches).unwrap());
                let taped = network::generator(&cfg, &p, g.leaf(z.clone()), onehot, stage, alpha, None).unwrap();
                let plain = model.generate_at(&z, &pitches, stage, alpha).unwrap();
                assert_eq!(plain, *taped.value(), "stage {stage} α {alpha} equalized {equalized}");
            }
        }
    }
}

#[test]
fn desk_generator_emits_desk_images() {
    let model = GanModel::new(GanConfig::desk(), 0).unwrap();
    let z = sample_latent(1, 256, 0);
    let out = model.generate(&[48, 55, 60, 67, 72], &z).unwrap();
    assert_eq!(out.shape(), &[5, 16, 128, 2]);
    assert_eq!(out, model.generate(&[48, 55, 60, 67, 72], &z).unwrap());
}

#[test]
fn table_shapes_at_desk_scale() {
    let model = GanModel::new(GanConfig::desk(), 0).unwrap();
    let (g, d) = model.shape_trace().unwrap();
    assert_eq!(g.first().unwrap().1, vec![1, 1, 317]);
    assert_eq!(g.last().unwrap().1, vec![16, 128, 2]);
    let stddev = d.iter().find(|(n, _)| n.contains("minibatch")).unwrap();
    assert_eq!(stddev.1, vec![2, 16, 33]);
    assert_eq!(d.iter().find(|(n, _)| n == "pitch classifier").unwrap().1, vec![61]);
    assert_eq!(d.iter().find(|(n, _)| n == "discriminator output").unwrap().1, vec![1]);
}

fn linear_penalty(w: [f64; 2], real: &[f64], fake: &[f64], eps: &[f64]) -> f64 {
    let g = Graph::<f64>::new();
    let wv = g.leaf(Tensor::from_f64(&[2, 1], &w).unwrap());
    let n = eps.len();
    let real = Tensor::from_f64(&[n, 2], real).unwrap();
    let fake = Tensor::from_f64(&[n, 2], fake).unwrap();
    let gp = gradient_penalty(&g, |x| x.matmul(wv), &real, &fake, eps).unwrap();
    gp.value().item()
}

#[test]
fn penalty_of_linear_critics() {
    let real = [0.3, -1.0, 2.0, 0.5];
    let fake = [1.0, 1.0, -0.2, 0.1];
    assert!(linear_penalty([0.6, 0.8], &real, &fake, &[0.2, 0.9]).abs() < 1e-9);
    assert!((linear_penalty([1.2, 1.6], &real, &fake, &[0.2, 0.9]) - 1.0).abs() < 1e-9);
    assert!((linear_penalty([1.2, 1.6], &real, &real, &[0.2, 0.9]) - 1.0).abs() < 1e-9);
}

#[test]
fn penalty_symmetric_at_half() {
    let g = Graph::<f64>::new();
    let w = g.leaf(Tensor::from_f64(&[4, 1], &[0.5, -1.0, 0.25, 2.0]).unwrap());
    let a = Tensor::from_fn(&[3, 4], |i| (i as f64 * 0.37).sin());
    let b = Tensor::from_fn(&[3, 4], |i| (i as f64 * 0.91).cos());
    let eps = [0.5; 3];
    let ab = gradient_penalty(&g, |x| x.mul(x)?.matmul(w), &a, &b, &eps).unwrap().value().item();
    let ba = gradient_penalty(&g, |x| x.mul(x)?.matmul(w), &b, &a, &eps).unwrap().value().item();
    assert!((ab - ba).abs() < 1e-12);
}

#[test]
fn zero_acgan_weight_cuts_classifier_gradient() {
    let mut cfg = tiny_config();
    cfg.acgan_weight = 0.0;
    let model = GanModel::new(cfg.clone(), 3).unwrap();
    let g = Graph::new();
    let pg = model.gen.bind(&g);
    let pd = model.disc.bind(&g);
    let z = g.leaf(sample_latent(4, cfg.latent_dim, 1));
    let onehot = g.leaf(model.pitch_onehot(&[30, 40, 50, 60]).unwrap());
    let labels = [6, 16, 26, 36];
    let obj = generator_objective(&cfg, &pg, &pd, z, onehot, &labels, 2, 1.0).unwrap();
    let cls = [pd.get("d/classifier/w").unwrap(), pd.get("d/classifier/b").unwrap()];
    let grads = g.backward(obj.loss, &cls).unwrap();
    assert!(grads.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    let crit = g.backward(obj.loss, &[pd.get("d/critic/w").unwrap()]).unwrap();
    assert!(crit[0].data().iter().any(|&v| v != 0.0));
}

#[test]
fn training_is_deterministic_and_finite() {
    let cfg = tiny_config();
    let data = tiny_data(&cfg);
    let run = || {
        let mut t = GanTrainer::new(GanModel::new(cfg.clone(), 7).unwrap(), 11);
        (0..10).map(|_| t.train_on(&data).unwrap()).collect::<Vec<_>>()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.iter().all(|r| r.d_loss.is_finite() && r.g_loss.is_finite()));
    // 4 examples per step: stage 0 for 2 steps, then a 2-step blend into stage 1
    assert_eq!(a[0].stage, 0);
    assert_eq!(a[2].stage, 1);
    assert_eq!(a[3].alpha, 0.5);
    assert!(a.iter().any(|r| r.stage == 2));
}

#[test]
fn resume_continues_identically() {
    let cfg = tiny_config();
    let data = tiny_data(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let mut straight = GanTrainer::new(GanModel::new(cfg.clone(), 7).unwrap(), 11);
    let expected: Vec<_> = (0..6).map(|_| straight.train_on(&data).unwrap()).collect();

    let mut first = GanTrainer::new(GanModel::new(cfg.clone(), 7).unwrap(), 11);
    let opts = RunOptions { steps: 3, out_dir: dir.path().to_path_buf(), checkpoint_every: 0 };
    first.run(&data, &opts, |_| {}).unwrap();
    let mut resumed = GanTrainer::load(&dir.path().join("latest")).unwrap();
    assert_eq!(resumed.step, 3);
    let rest = resumed.run(&data, &opts, |_| {}).unwrap();
    assert_eq!(rest, expected[3..].to_vec());

    let csv = std::fs::read_to_string(dir.path().join("losses.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("step,d_loss,g_loss,gp,acgan_real,acgan_fake,alpha,stage"));
}

#[test]
fn saved_model_generates_identically() {
    let cfg = tiny_config();
    let model = GanModel::new(cfg.clone(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("m");
    model.save(&stem, serde_json::json!({})).unwrap();
    let (back, _) = GanModel::load(&stem).unwrap();
    let z = sample_latent(2, cfg.latent_dim, 1);
    assert_eq!(model.generate(&[40, 41], &z).unwrap(), back.generate(&[40, 41], &z).unwrap());
}
