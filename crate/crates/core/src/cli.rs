//! The `ifsynth` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bench::bench;
use crate::classifier::{magnitude_batch, magnitude_of, ClassifierConfig, PitchClassifier};
use crate::dataio::{make_dataset, read_wav, write_wav, CorpusSpec};
use crate::error::{Error, Result};
use crate::gan::{sample_latent, slerp, GanConfig, GanModel, GanTrainer, RunOptions};
use crate::metrics::{EvalOptions, EvalSets, MetricReport};
use crate::pipeline::{encode_dataset, excerpt};
use crate::spectral::{
    read_image, snr_db, write_image, Codec, NormalizationStats, Rainbowgram, RepresentationConfig, SpectralImage,
    Waveform,
};
use crate::tensor::Tensor;

const DEFAULT_REPRESENTATION: &str = "if_linear_desk";
const DEFAULT_GAN: &str = "desk";

#[derive(Parser, Debug)]
#[command(name = "ifsynth", version, about = "Spectral audio codecs, a pitch-conditional GAN and its evaluation")]
pub struct Cli {
    /// Representation preset name or a JSON run-configuration file.
    #[arg(long, global = true)]
    pub config: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic note corpus with a manifest and train/test split.
    MakeDataset(MakeDatasetArgs),
    /// WAV → spectral image file.
    Encode(EncodeArgs),
    /// Spectral image file → WAV.
    Decode(InputArg),
    /// Encode and decode a WAV, writing the result.
    Roundtrip(RoundtripArgs),
    TrainClassifier(TrainClassifierArgs),
    TrainGan(TrainGanArgs),
    /// Generate notes at one pitch.
    Sample(SampleArgs),
    /// Spherical interpolation between two latents at a fixed pitch.
    Interpolate(InterpolateArgs),
    /// Render a list of pitches as consecutive notes in one WAV.
    PitchSequence(PitchSequenceArgs),
    /// PNG with log magnitude as brightness and channel 1 as hue.
    Rainbowgram(InputArg),
    /// Score generated (or real test) notes: NDB, FID, IS, PA, PE.
    Evaluate(EvaluateArgs),
    /// Generation and decode latency.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct MakeDatasetArgs {
    /// Comma-separated MIDI pitches or ranges, e.g. `48,60,72` or `24-84`.
    #[arg(long, default_value = "24-84")]
    pub pitches: String,
    #[arg(long, default_value_t = 10)]
    pub per_pitch: usize,
    #[arg(long, default_value_t = 4)]
    pub timbres: usize,
    /// Note length in samples at 16 kHz.
    #[arg(long, default_value_t = crate::spectral::NOTE_SAMPLES)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct InputArg {
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    pub input: PathBuf,
    /// Normalization stats JSON; fitted on the input when absent.
    #[arg(long)]
    pub norm: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RoundtripArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub report_snr: bool,
}

#[derive(Args, Debug)]
pub struct TrainClassifierArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainGanArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Steps to run; defaults to the rest of the schedule.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub no_progressive: bool,
    /// Checkpoint stem to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub checkpoint_every: u64,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Examples per blend and per stable phase.
    #[arg(long)]
    pub phase_examples: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub acgan_weight: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub pitch: i64,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 60)]
    pub pitch: i64,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
}

#[derive(Args, Debug)]
pub struct PitchSequenceArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Text file of MIDI pitches separated by whitespace or commas.
    #[arg(long)]
    pub pitches: PathBuf,
    /// One latent for every note instead of one per note.
    #[arg(long)]
    pub fixed_latent: bool,
    #[arg(long, default_value_t = 0.5)]
    pub note_seconds: f64,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub classifier: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Score the real test split instead of generated notes.
    #[arg(long)]
    pub real: bool,
    #[arg(long, default_value_t = crate::metrics::NDB_CELLS)]
    pub k: usize,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Trained checkpoint; an untrained network of the configured shape otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
}

/// A preset name or a full inline object.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Named<T> {
    Preset(String),
    Full(T),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub representation: Option<Named<RepresentationConfig>>,
    pub gan: Option<Named<GanConfig>>,
    pub classifier_epochs: Option<usize>,
}

impl RunConfig {
    fn from_flag(flag: Option<&str>) -> Result<Self> {
        let Some(value) = flag else { return Ok(RunConfig::default()) };
        let path = Path::new(value);
        if value.ends_with(".json") || path.is_file() {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return serde_json::from_str(&text).map_err(|e| Error::format(path, e));
        }
        let gan = match value.rsplit('_').next() {
            Some(res @ ("desk" | "lowres" | "hires")) => Some(Named::Preset(res.to_string())),
            _ => None,
        };
        Ok(RunConfig { representation: Some(Named::Preset(value.to_string())), gan, classifier_epochs: None })
    }

    pub fn representation(&self) -> Result<RepresentationConfig> {
        match &self.representation {
            None => RepresentationConfig::preset(DEFAULT_REPRESENTATION),
            Some(Named::Preset(name)) => RepresentationConfig::preset(name),
            Some(Named::Full(cfg)) => Ok(cfg.clone()),
        }
    }

    pub fn gan(&self) -> Result<GanConfig> {
        match &self.gan {
            None => GanConfig::preset(DEFAULT_GAN),
            Some(Named::Preset(name)) => GanConfig::preset(name),
            Some(Named::Full(cfg)) => Ok(cfg.clone()),
        }
    }
}

/// Parse `48,60,72-74` into pitches.
pub fn parse_pitches(text: &str) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for part in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
        let bad = || Error::Invalid(format!("bad pitch '{part}'"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (i64, i64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("pitch list"));
    }
    Ok(out)
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}

/// A checkpoint stem exists when its JSON header does.
fn require_stem(stem: &Path) -> Result<()> {
    require(&crate::tensor::container_paths(stem).1)
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "output".into())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loaded generator plus the fitted representation stored with it.
pub fn load_generator(stem: &Path) -> Result<(GanModel, RepresentationConfig)> {
    require_stem(stem)?;
    let (model, extra) = GanModel::load(stem)?;
    let json_path = crate::tensor::container_paths(stem).1;
    let repr = extra
        .get("notes")
        .and_then(|n| n.get("representation"))
        .cloned()
        .ok_or_else(|| Error::format(&json_path, "checkpoint carries no representation; produce it with train-gan"))?;
    let repr: RepresentationConfig = serde_json::from_value(repr).map_err(|e| Error::format(&json_path, e))?;
    Ok((model, repr))
}

fn render_outputs(out: &Path, name: &str, codec: &Codec, img: &SpectralImage) -> Result<Waveform> {
    let w = codec.decode(img)?;
    write_wav(&out.join(format!("{name}.wav")), &w)?;
    Rainbowgram::from_image(img)?.write_png(&out.join(format!("{name}.png")))?;
    Ok(w)
}

fn fitted_on(repr: RepresentationConfig, w: &Waveform, norm: Option<&Path>) -> Result<RepresentationConfig> {
    let stats = match norm {
        Some(p) => {
            require(p)?;
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<NormalizationStats>(&text).map_err(|e| Error::format(p, e))?
        }
        None => crate::spectral::fit_normalization(std::slice::from_ref(w), &repr)?,
    };
    Ok(repr.with_norm(stats))
}

/// Execute a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::from_flag(cli.config.as_deref())?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::MakeDataset(a) => {
            let pitches = parse_pitches(&a.pitches)?;
            let spec = CorpusSpec::new(pitches, a.per_pitch, a.timbres, cli.seed).with_length(a.samples);
            create_out(out)?;
            let m = make_dataset(&spec, out)?;
            println!(
                "wrote {} notes ({} train / {} test) to {}",
                m.records.len(),
                m.train_ids.len(),
                m.test_ids.len(),
                out.join(crate::dataio::MANIFEST_FILE).display()
            );
        }
        Command::Encode(a) => {
            require(&a.input)?;
            let repr = cfg.representation()?;
            let w = excerpt(read_wav(&a.input)?, repr.num_samples);
            let repr = fitted_on(repr, &w, a.norm.as_deref())?;
            let img = Codec::new(repr)?.encode(&w)?;
            create_out(out)?;
            let path = out.join(format!("{}.img", stem_of(&a.input)));
            write_image(&img, &path)?;
            println!("{} shape {:?}", path.display(), img.shape());
        }
        Command::Decode(a) => {
            require(&a.input)?;
            let img = read_image(&a.input)?;
            let w = Codec::new(img.config.clone())?.decode(&img)?;
            create_out(out)?;
            let path = out.join(format!("{}.wav", stem_of(&a.input)));
            write_wav(&path, &w)?;
            println!("{} ({} samples)", path.display(), w.len());
        }
        Command::Roundtrip(a) => {
            require(&a.input)?;
            let repr = cfg.representation()?;
            let w = excerpt(read_wav(&a.input)?, repr.num_samples);
            let codec = Codec::new(fitted_on(repr, &w, None)?)?;
            let back = codec.decode(&codec.encode(&w)?)?;
            create_out(out)?;
            let path = out.join(format!("{}_roundtrip.wav", stem_of(&a.input)));
            write_wav(&path, &back)?;
            if a.report_snr {
                println!("SNR {:.2} dB", snr_db(&w.samples, &back.samples[..w.len()]));
            }
            println!("{}", path.display());
        }
        Command::TrainClassifier(a) => train_classifier(cli, &cfg, a)?,
        Command::TrainGan(a) => train_gan(cli, &cfg, a)?,
        Command::Sample(a) => {
            let (model, repr) = load_generator(&a.checkpoint)?;
            let z = sample_latent(a.n, model.cfg.latent_dim, cli.seed);
            let images = model.generate_images(&vec![a.pitch; a.n], &z, &repr)?;
            let codec = Codec::new(repr)?;
            create_out(out)?;
            for (i, img) in images.iter().enumerate() {
                render_outputs(out, &format!("sample_p{}_{i:03}", a.pitch), &codec, img)?;
            }
            println!("wrote {} samples at pitch {} to {}", a.n, a.pitch, out.display());
        }
        Command::Interpolate(a) => {
            let (model, repr) = load_generator(&a.checkpoint)?;
            if a.steps == 0 {
                return Err(Error::Invalid("--steps must be at least 1".into()));
            }
            let ends = sample_latent(2, model.cfg.latent_dim, cli.seed);
            let dim = model.cfg.latent_dim;
            let (z1, z2) = (&ends.data()[..dim], &ends.data()[dim..]);
            let mut rows = Vec::with_capacity(a.steps * dim);
            for i in 0..a.steps {
                let t = if a.steps == 1 { 0.0 } else { i as f64 / (a.steps - 1) as f64 };
                rows.extend(slerp(z1, z2, t)?);
            }
            let z = Tensor::new(&[a.steps, dim], rows)?;
            let images = model.generate_images(&vec![a.pitch; a.steps], &z, &repr)?;
            let codec = Codec::new(repr)?;
            create_out(out)?;
            for (i, img) in images.iter().enumerate() {
                render_outputs(out, &format!("interp_{i:03}"), &codec, img)?;
            }
            println!("wrote {} interpolation steps to {}", a.steps, out.display());
        }
        Command::PitchSequence(a) => {
            require(&a.pitches)?;
            let (model, repr) = load_generator(&a.checkpoint)?;
            let text = fs::read_to_string(&a.pitches).map_err(|e| Error::io(&a.pitches, e))?;
            let pitches = parse_pitches(&text)?;
            let z = if a.fixed_latent {
                sample_latent(1, model.cfg.latent_dim, cli.seed)
            } else {
                sample_latent(pitches.len(), model.cfg.latent_dim, cli.seed)
            };
            let images = model.generate_images(&pitches, &z, &repr)?;
            let codec = Codec::new(repr.clone())?;
            let slot = (a.note_seconds * repr.sample_rate as f64).round() as usize;
            if slot == 0 {
                return Err(Error::Invalid("--note-seconds too short".into()));
            }
            let mut samples = vec![0.0f32; slot * pitches.len()];
            for (i, img) in images.iter().enumerate() {
                let w = codec.decode(img)?;
                let n = w.len().min(slot);
                samples[i * slot..i * slot + n].copy_from_slice(&w.samples[..n]);
            }
            create_out(out)?;
            let path = out.join("pitch_sequence.wav");
            write_wav(&path, &Waveform::new(samples, repr.sample_rate))?;
            println!("{} ({} notes of {} samples)", path.display(), pitches.len(), slot);
        }
        Command::Rainbowgram(a) => {
            require(&a.input)?;
            let is_wav = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
            let r = if is_wav {
                let w = read_wav(&a.input)?;
                let repr = cfg.representation()?;
                let repr = if w.len() > repr.num_samples { repr.with_duration(w.len()) } else { repr };
                Rainbowgram::from_waveform(&w, &Codec::new(repr)?)?
            } else {
                Rainbowgram::from_image(&read_image(&a.input)?)?
            };
            create_out(out)?;
            let path = out.join(format!("{}.png", stem_of(&a.input)));
            r.write_png(&path)?;
            println!("{} ({}×{})", path.display(), r.width, r.height);
        }
        Command::Evaluate(a) => evaluate(cli, &cfg, a)?,
        Command::Bench(a) => {
            let (model, repr) = match &a.checkpoint {
                Some(stem) => {
                    let (m, r) = load_generator(stem)?;
                    (m, Some(r))
                }
                None => (GanModel::new(cfg.gan()?, cli.seed)?, None),
            };
            let report = bench(&model, repr.as_ref(), a.batch, a.repeats, cli.seed)?;
            for line in report.lines() {
                println!("{line}");
            }
            create_out(out)?;
            write_json(&out.join("bench.json"), &report)?;
        }
    }
    Ok(())
}

fn train_classifier(cli: &Cli, cfg: &RunConfig, a: &TrainClassifierArgs) -> Result<()> {
    require(&a.data)?;
    let data = encode_dataset(&a.data, &cfg.representation()?)?;
    let [h, w, _] = data.repr.image_shape();
    let mut ccfg = ClassifierConfig::for_images(h, w);
    if let Some(e) = a.epochs.or(cfg.classifier_epochs) {
        ccfg.epochs = e;
    }
    let mut clf = PitchClassifier::new(ccfg, cli.seed)?;
    let x = magnitude_batch(&data.train.images)?;
    let test_x = if data.test.is_empty() { None } else { Some(magnitude_batch(&data.test.images)?) };
    let held_out = test_x.as_ref().map(|t| (t, data.test.labels.as_slice()));
    let mut log = String::from("epoch,loss\n");
    let summary = clf.train(&x, &data.train.labels, held_out, cli.seed, |epoch, loss| {
        println!("epoch {epoch:>3}  loss {loss:.4}");
        log += &format!("{epoch},{loss}\n");
    })?;
    let out = cli.out.as_path();
    create_out(out)?;
    fs::write(out.join("classifier_log.csv"), log).map_err(|e| Error::io(out.join("classifier_log.csv"), e))?;
    clf.save(&out.join("classifier"))?;
    write_json(&out.join("classifier_summary.json"), &json!({ "summary": summary, "representation": data.repr }))?;
    println!(
        "train accuracy {:.3}, held-out accuracy {}",
        summary.train_accuracy,
        summary.test_accuracy.map_or("n/a".into(), |v| format!("{v:.3}"))
    );
    Ok(())
}

fn train_gan(cli: &Cli, cfg: &RunConfig, a: &TrainGanArgs) -> Result<()> {
    require(&a.data)?;
    let mut trainer = match &a.resume {
        Some(stem) => {
            require_stem(stem)?;
            GanTrainer::load(stem)?
        }
        None => {
            let mut g = cfg.gan()?;
            g.progressive &= !a.no_progressive;
            if let Some(b) = a.batch_size {
                g.batch_size = b;
            }
            if let Some(p) = a.phase_examples {
                g.blend_examples = p;
                g.stable_examples = p;
            }
            if let Some(lr) = a.learning_rate {
                g.learning_rate = lr;
            }
            if let Some(w) = a.acgan_weight {
                g.acgan_weight = w;
            }
            g.validate()?;
            GanTrainer::new(GanModel::new(g, cli.seed)?, cli.seed)
        }
    };
    let repr = match trainer.notes.get("representation") {
        Some(r) => {
            let r: RepresentationConfig = serde_json::from_value(r.clone()).map_err(|e| Error::Invalid(e.to_string()))?;
            RepresentationConfig { norm: None, ..r }
        }
        None => cfg.representation()?,
    };
    let data = encode_dataset(&a.data, &repr)?;
    let out_shape = trainer.model.cfg.output_shape();
    if data.repr.image_shape() != out_shape {
        return Err(Error::Config(format!(
            "generator emits {:?} but the representation is {:?}",
            out_shape,
            data.repr.image_shape()
        )));
    }
    trainer.notes = json!({ "representation": data.repr });
    let batch = trainer.model.cfg.batch_size as u64;
    let remaining = trainer.schedule.total().saturating_sub(trainer.seen).div_ceil(batch);
    let steps = a.steps.unwrap_or(remaining);
    let opts = RunOptions { steps, out_dir: cli.out.clone(), checkpoint_every: a.checkpoint_every };
    let set = data.train.training_set()?;
    let every = (steps / 20).max(1);
    let reports = trainer.run(&set, &opts, |r| {
        if r.step % every == 0 {
            println!(
                "step {:>6}  stage {} α {:.3}  d {:.4}  g {:.4}  gp {:.4}",
                r.step, r.stage, r.alpha, r.d_loss, r.g_loss, r.gp
            );
        }
    })?;
    let (stage, alpha) = trainer.position();
    write_json(
        &cli.out.join("gan_summary.json"),
        &json!({
            "steps": trainer.step,
            "examples_seen": trainer.seen,
            "stage": stage,
            "alpha": alpha,
            "last": reports.last().map(|r| json!({
                "d_loss": r.d_loss, "g_loss": r.g_loss, "gp": r.gp,
                "acgan_real": r.acgan_real, "acgan_fake": r.acgan_fake,
            })),
        }),
    )?;
    println!("trained to step {} ({} examples); checkpoint {}", trainer.step, trainer.seen, cli.out.join("latest").display());
    Ok(())
}

fn evaluate(cli: &Cli, cfg: &RunConfig, a: &EvaluateArgs) -> Result<()> {
    require(&a.data)?;
    require_stem(&a.classifier)?;
    let clf = PitchClassifier::load(&a.classifier)?;
    let generator = match (&a.checkpoint, a.real) {
        (Some(stem), false) => Some(load_generator(stem)?),
        (None, false) => return Err(Error::Invalid("evaluate needs --checkpoint or --real".into())),
        (_, true) => None,
    };
    let repr = match &generator {
        Some((_, r)) => RepresentationConfig { norm: None, ..r.clone() },
        None => cfg.representation()?,
    };
    let data = encode_dataset(&a.data, &repr)?;
    if data.test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let train = magnitude_batch(&data.train.images)?;
    let reference = magnitude_batch(&data.test.images)?;
    let generated = match &generator {
        Some((model, _)) => {
            let z = sample_latent(data.test.len(), model.cfg.latent_dim, cli.seed);
            magnitude_of(&model.generate(&data.test.pitches, &z)?)?
        }
        None => reference.clone(),
    };
    let sets = EvalSets { train: &train, reference: &reference, generated: &generated, generated_labels: &data.test.labels };
    let opts = EvalOptions { k: a.k, seed: cli.seed, ..EvalOptions::default() };
    let (report, cells) = MetricReport::compute(&clf, &sets, &opts)?;
    let out = cli.out.as_path();
    create_out(out)?;
    report.save_json(&out.join("metrics.json"))?;
    fs::write(out.join("metrics.txt"), format!("{report}\n")).map_err(|e| Error::io(out.join("metrics.txt"), e))?;
    fs::write(out.join("ndb_cells.csv"), cells.csv()).map_err(|e| Error::io(out.join("ndb_cells.csv"), e))?;
    println!("{report}");
    Ok(())
}

/// Parse and run; returns the process exit code.
///
/// 0 on success, 2 for usage errors and missing input files, 1 for other failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match &e {
                Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{MAX_PITCH, MIN_PITCH};

    #[test]
    fn pitch_lists() {
        assert_eq!(parse_pitches("48, 60,72-74").unwrap(), vec![48, 60, 72, 73, 74]);
        assert_eq!(parse_pitches("60\n62 64").unwrap(), vec![60, 62, 64]);
        assert!(parse_pitches("sixty").is_err());
        assert!(parse_pitches(" ").is_err());
        assert_eq!(parse_pitches(&format!("{MIN_PITCH}-{MAX_PITCH}")).unwrap().len(), 61);
    }

    #[test]
    fn preset_flag_pairs_generator() {
        let c = RunConfig::from_flag(Some("if_mel_hires")).unwrap();
        assert_eq!(c.representation().unwrap().image_shape(), [128, 1024, 2]);
        assert_eq!(c.gan().unwrap().output_shape(), [128, 1024, 2]);
        let d = RunConfig::from_flag(None).unwrap();
        assert_eq!(d.representation().unwrap().image_shape(), d.gan().unwrap().output_shape());
    }

    #[test]
    fn default_training_flags() {
        let g = RunConfig::default().gan().unwrap();
        assert_eq!(g.learning_rate, 8e-4);
        assert_eq!(g.acgan_weight, 10.0);
    }
}
