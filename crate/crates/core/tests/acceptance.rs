//! End-to-end acceptance checks, one line per criterion.
//!
//! Everything runs inside a single test so the latency measurements are not
//! disturbed by sibling tests sharing the CPU. Result lines go straight to stderr
//! and are visible without `--nocapture`.

mod common;

use std::io::Write;
use std::time::Instant;

use ifsynth::bench::bench;
use ifsynth::classifier::{magnitude_batch, magnitude_of, ClassifierConfig, PitchClassifier};
use ifsynth::dataio::{make_dataset, pitch_index, sine_wave, CorpusSpec, MANIFEST_FILE};
use ifsynth::gan::{gradient_penalty, sample_latent, slerp, GanConfig, GanModel, GanTrainer, StepReport};
use ifsynth::metrics::{fid, fit_ndb, inception_score, pitch_accuracy, pitch_entropy};
use ifsynth::pipeline::encode_dataset;
use ifsynth::spectral::{
    decode, encode, fit_normalization, phase_to_if, snr_db, stft, ChannelMode, FreqScale, RepresentationConfig,
};
use ifsynth::tensor::gradcheck::relative_errors;
use ifsynth::tensor::{nn, Graph, Tensor};
use ifsynth::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SNR_MIN_DB: f64 = 40.0;
const IF_STD_MAX: f64 = 1e-3;
const GRAD_REL_MAX: f64 = 1e-4;
const GRAD_INSTANCES: usize = 100;
const FID_TOL: f64 = 0.5;
const SCORE_TOL: f64 = 1e-9;
const PIXEL_NORM_TOL: f64 = 1e-4;
const GP_TOL: f64 = 1e-9;
const PA_MIN: f64 = 0.5;
const FRAME_SPREAD_MAX: f64 = 1.25;
const SLERP_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let t = Instant::now();
    let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    let status = if o.pass { "PASS" } else { "FAIL" };
    let line = format!("[{status}] {id}. {name}: {} ({:.1} s)\n", o.detail, t.elapsed().as_secs_f64());
    let mut err = std::io::stderr().lock();
    let _ = err.write_all(line.as_bytes());
    let _ = err.flush();
    o.pass
}

fn linear_if(res: &str) -> RepresentationConfig {
    match res {
        "low" => RepresentationConfig::low_res(ChannelMode::If, FreqScale::Linear),
        _ => RepresentationConfig::high_res(ChannelMode::If, FreqScale::Linear),
    }
}

fn round_trip() -> Result<Outcome> {
    let pitches: Vec<i64> = (0..50).map(|i| 24 + (i * 13) % 61).collect();
    let notes: Vec<_> = CorpusSpec::new(pitches, 1, 10, 3).synthesize()?.into_iter().map(|(_, w)| w).collect();
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for res in ["low", "high"] {
        let cfg = linear_if(res);
        let cfg = cfg.clone().with_norm(fit_normalization(&notes, &cfg)?);
        let mut min = f64::INFINITY;
        for w in &notes {
            let back = decode(&encode(w, &cfg)?)?;
            min = min.min(snr_db(&w.samples, &back.samples));
        }
        parts.push(format!("{res}-res min {min:.1} dB"));
        worst = worst.min(min);
    }
    Ok(outcome(worst >= SNR_MIN_DB, format!("{} over 50 notes (need ≥ {SNR_MIN_DB})", parts.join(", "))))
}

fn if_bands() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for res in ["low", "high"] {
        let cfg = linear_if(res);
        let bins = cfg.frame_size / 2;
        for bin in [17, 64, 129, 300, bins - 20] {
            let freq = bin as f64 * cfg.sample_rate as f64 / cfg.frame_size as f64;
            let w = sine_wave(freq, 0.5, cfg.num_samples, cfg.sample_rate);
            let inst = phase_to_if(&stft(&w, &cfg)?.phase)?;
            let track = inst.bin_track(bin);
            // skip frames that overlap the padded edges
            let edge = 4;
            let interior = &track[edge..cfg.num_frames - edge];
            let mean = interior.iter().sum::<f64>() / interior.len() as f64;
            let var = interior.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / interior.len() as f64;
            worst = worst.max(var.sqrt());
            cases += 1;
        }
    }
    Ok(outcome(worst < IF_STD_MAX, format!("max IF std {worst:.2e} over {cases} bin-centred tones (need < {IF_STD_MAX:e})")))
}

/// Per-layer output shapes of the full-size high-resolution networks, batch axis excluded.
fn expected_high_res_rows() -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut g = vec![vec![1, 1, 317], vec![2, 16, 256], vec![2, 16, 256]];
    let chans = [256, 256, 256, 256, 128, 64, 32];
    let (mut h, mut w) = (2, 16);
    for s in 1..7 {
        g.push(vec![h * 2, w * 2, chans[s - 1]]);
        h *= 2;
        w *= 2;
        g.push(vec![h, w, chans[s]]);
        g.push(vec![h, w, chans[s]]);
    }
    g.push(vec![128, 1024, 2]);

    let mut d = vec![vec![128, 1024, 2], vec![128, 1024, 32]];
    let (mut h, mut w) = (128, 1024);
    for s in (1..7).rev() {
        d.push(vec![h, w, chans[s]]);
        d.push(vec![h, w, chans[s]]);
        h /= 2;
        w /= 2;
        d.push(vec![h, w, chans[s]]);
    }
    d.push(vec![2, 16, 257]);
    d.push(vec![2, 16, 256]);
    d.push(vec![2, 16, 256]);
    d.push(vec![61]);
    d.push(vec![1]);
    (g, d)
}

fn shapes() -> Result<Outcome> {
    let note = CorpusSpec::new(vec![60], 1, 1, 0).synthesize()?.remove(0).1;
    let mut images = Vec::new();
    for res in ["low", "high"] {
        let cfg = linear_if(res);
        let cfg = cfg.clone().with_norm(fit_normalization(std::slice::from_ref(&note), &cfg)?);
        images.push(encode(&note, &cfg)?.shape());
    }
    let images_ok = images == [[256, 512, 2], [128, 1024, 2]];

    let model = GanModel::new(GanConfig::high_res(), 0)?;
    let (gt, dt) = model.shape_trace()?;
    let g: Vec<Vec<usize>> = gt.iter().map(|(_, s)| s.clone()).collect();
    let d: Vec<Vec<usize>> = dt.iter().map(|(_, s)| s.clone()).collect();
    let (eg, ed) = expected_high_res_rows();
    let spot = [vec![1, 1, 317], vec![2, 16, 257], vec![128, 1024, 2]];
    let spot_ok = spot.iter().all(|s| g.contains(s) || d.contains(s));
    let low = GanModel::new(GanConfig::low_res(), 0)?.cfg.output_shape();
    let pass = images_ok && g == eg && d == ed && spot_ok && low == [256, 512, 2];
    Ok(outcome(
        pass,
        format!(
            "images {images:?}; generator {}/{} rows, discriminator {}/{} rows match; low-res generator {low:?}",
            g.iter().zip(&eg).filter(|(a, b)| a == b).count(),
            eg.len(),
            d.iter().zip(&ed).filter(|(a, b)| a == b).count(),
            ed.len()
        ),
    ))
}

fn autodiff() -> Result<Outcome> {
    let mut r = common::rng(2024);
    let mut worst = (0.0f64, "");
    let mut failures = 0;
    let catalog = common::catalog();
    for case in &catalog {
        for _ in 0..GRAD_INSTANCES {
            let inputs = (case.inputs)(&mut r);
            let e = relative_errors(case.forward, &inputs, 1e-3)?.into_iter().fold(0.0, f64::max);
            if e >= GRAD_REL_MAX {
                failures += 1;
            }
            if e > worst.0 {
                worst = (e, case.name);
            }
        }
    }
    Ok(outcome(
        failures == 0,
        format!(
            "{} ops × {GRAD_INSTANCES} instances, {failures} above {GRAD_REL_MAX:e}; worst {:.2e} ({})",
            catalog.len(),
            worst.0,
            worst.1
        ),
    ))
}

fn metric_oracles() -> Result<Outcome> {
    let n = 10_000;
    let d = 4;
    let mean = [3.0, 4.0, 0.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draw = |shift: bool| {
        Tensor::from_fn(&[n, d], |i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (z + if shift { mean[i % d] } else { 0.0 }) as f32
        })
    };
    let a = draw(false);
    let b = draw(true);
    let f = fid(&a, &b)?;
    let fid_ok = (f - 25.0).abs() <= FID_TOL;

    let labels: Vec<usize> = (0..61).collect();
    let onehot = Tensor::from_fn(&[61, 61], |i| (labels[i / 61] == i % 61) as u8 as f32);
    let same = Tensor::from_fn(&[61, 61], |i| (i % 61 == 7) as u8 as f32);
    let is_max = inception_score(&onehot)?;
    let is_min = inception_score(&same)?;
    let pe = pitch_entropy(&onehot)?;
    let scores_ok =
        (is_max - 61.0).abs() < SCORE_TOL && (is_min - 1.0).abs() < SCORE_TOL && (pe - 61f64.ln()).abs() < SCORE_TOL;

    let train = Tensor::from_fn(&[600, 3], |_| StandardNormal.sample(&mut rng));
    let ndb = fit_ndb(&train, 50, 0)?.evaluate(&train)?.count;
    Ok(outcome(
        fid_ok && scores_ok && ndb == 0,
        format!("FID {f:.3} (25 ± {FID_TOL}); IS {is_max:.12} / {is_min:.12}; PE − ln 61 = {:.1e}; NDB train-vs-train {ndb}", pe - 61f64.ln()),
    ))
}

fn closed_forms() -> Result<Outcome> {
    let g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_f64(&[1, 1, 1, 2], &[3.0, 4.0])?);
    let y = nn::pixel_norm(x)?.value();
    let (a, b) = (y.data()[0], y.data()[1]);
    let pn_ok = (a - 0.84853).abs() < PIXEL_NORM_TOL && (b - 1.13137).abs() < PIXEL_NORM_TOL;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let n = 5;
        let w = g.leaf(Tensor::from_f64(&[2, 1], &[theta.cos(), theta.sin()])?);
        let real = Tensor::from_fn(&[n, 2], |_| rng.random_range(-2.0..2.0));
        let fake = Tensor::from_fn(&[n, 2], |_| rng.random_range(-2.0..2.0));
        let eps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let gp = gradient_penalty(&g, |v| v.matmul(w), &real, &fake, &eps)?.value().item();
        worst = worst.max(gp.abs());
    }
    Ok(outcome(
        pn_ok && worst < GP_TOL,
        format!("pixel norm (3, 4) → ({a:.5}, {b:.5}); unit-norm linear critic max |GP| {worst:.1e} over 20 draws"),
    ))
}

fn desk_training() -> Result<Outcome> {
    let dir = tempfile::tempdir().map_err(|e| ifsynth::Error::Invalid(e.to_string()))?;
    let pitches = vec![48i64, 60, 72, 84];
    let spec = CorpusSpec::new(pitches.clone(), 32, 8, 21).with_length(1024);
    make_dataset(&spec, dir.path())?;
    let repr = RepresentationConfig::preset("if_linear_desk")?;
    let data = encode_dataset(&dir.path().join(MANIFEST_FILE), &repr)?;
    let [h, w, _] = data.repr.image_shape();

    let mut clf = PitchClassifier::new(ClassifierConfig::for_images(h, w), 0)?;
    let x = magnitude_batch(&data.train.images)?;
    let tx = magnitude_batch(&data.test.images)?;
    let summary = clf.train(&x, &data.train.labels, Some((&tx, &data.test.labels)), 1, |_, _| {})?;

    let cfg = GanConfig::desk();
    let mut trainer = GanTrainer::new(GanModel::new(cfg.clone(), 7)?, 7);
    let set = data.train.training_set()?;
    let steps = trainer.schedule.total().div_ceil(cfg.batch_size as u64);
    let mut reports: Vec<StepReport> = Vec::new();
    for _ in 0..steps {
        reports.push(trainer.train_on(&set)?);
    }
    let finite = reports.iter().all(|r| [r.d_loss, r.g_loss, r.gp, r.acgan_real, r.acgan_fake].iter().all(|v| v.is_finite()));

    // the last step before each stage change, and the final step, train at full strength
    let mut alpha_ok = reports[0].stage == 0 && reports[0].alpha == 1.0;
    let mut boundaries = 0;
    for pair in reports.windows(2) {
        if pair[1].stage != pair[0].stage {
            alpha_ok &= pair[0].alpha == 1.0 && pair[1].stage == pair[0].stage + 1;
            boundaries += 1;
        }
    }
    let last = reports.last().unwrap();
    alpha_ok &= last.alpha == 1.0 && last.stage == cfg.stage_count() - 1 && boundaries == cfg.stage_count() - 1;

    let n = 64;
    let gen_pitches: Vec<i64> = (0..n).map(|i| pitches[i % pitches.len()]).collect();
    let labels: Vec<usize> = gen_pitches.iter().map(|&p| pitch_index(p)).collect::<Result<_>>()?;
    let images = trainer.model.generate(&gen_pitches, &sample_latent(n, cfg.latent_dim, 99))?;
    let finite_out = images.all_finite();
    let pa = pitch_accuracy(&clf.predict(&magnitude_of(&images)?)?, &labels)?;
    Ok(outcome(
        finite && finite_out && alpha_ok && pa >= PA_MIN,
        format!(
            "{steps} steps over {} stages, no NaN: {}, α = 1 at all {boundaries} boundaries: {alpha_ok}; \
             generated PA {pa:.3} on {n} samples (need ≥ {PA_MIN}; real held-out {:.3})",
            cfg.stage_count(),
            finite && finite_out,
            summary.test_accuracy.unwrap_or(f64::NAN)
        ),
    ))
}

fn parallel_generation() -> Result<Outcome> {
    let model = GanModel::new(GanConfig::desk(), 0)?;
    let r = bench(&model, None, 16, 31, 0)?;
    let spread = r.frame_latency_spread();
    let pass = r.batch_n_ms_per_sample < r.batch1_ms_per_sample && spread <= FRAME_SPREAD_MAX;
    let frames: Vec<String> = r.frames_latency_ms.iter().map(|(t, ms)| format!("{t}:{ms:.2}")).collect();
    Ok(outcome(
        pass,
        format!(
            "per sample batch 1 {:.3} ms, batch 16 {:.3} ms; latency by output frames [{}] ms, spread {spread:.2} (≤ {FRAME_SPREAD_MAX})",
            r.batch1_ms_per_sample,
            r.batch_n_ms_per_sample,
            frames.join(", ")
        ),
    ))
}

fn slerp_pairs() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let dim = 256;
    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| (x / n) as f32).collect::<Vec<f32>>()
    };
    let norm = |v: &[f32]| v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let max_diff = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).fold(0.0, f64::max);
    let (mut endpoint, mut drift) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let a = unit(&mut rng);
        let b = unit(&mut rng);
        endpoint = endpoint.max(max_diff(&slerp(&a, &b, 0.0)?, &a)).max(max_diff(&slerp(&a, &b, 1.0)?, &b));
        for _ in 0..4 {
            let t = rng.random_range(0.0..1.0);
            drift = drift.max((norm(&slerp(&a, &b, t)?) - 1.0).abs());
        }
    }
    Ok(outcome(
        endpoint <= SLERP_TOL && drift <= SLERP_TOL,
        format!("1000 unit pairs: max endpoint error {endpoint:.1e}, max norm drift {drift:.1e} (≤ {SLERP_TOL:e})"),
    ))
}

#[test]
fn acceptance() {
    let results = [
        report(1, "representation round trip", round_trip),
        report(2, "IF band property", if_bands),
        report(3, "shape conformance", shapes),
        report(4, "autodiff soundness", autodiff),
        report(5, "metric oracles", metric_oracles),
        report(6, "pixel norm and GP closed forms", closed_forms),
        report(7, "desk training smoke", desk_training),
        report(8, "parallel generation", parallel_generation),
        report(9, "slerp endpoints and norm", slerp_pairs),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &ok)| !ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
