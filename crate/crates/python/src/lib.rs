use std::path::PathBuf;

use numpy::{PyArray1, PyArrayDyn, PyArrayMethods, PyReadonlyArray1, PyReadonlyArrayDyn, PyUntypedArrayMethods};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ifsynth::gan::{self, GanConfig, GanModel};
use ifsynth::spectral::{Codec, RepresentationConfig, SpectralImage, Waveform, SAMPLE_RATE};
use ifsynth::tensor::Tensor;
use ifsynth::{dataio, metrics, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn tensor_of(a: &PyReadonlyArrayDyn<'_, f32>) -> PyResult<Tensor<f32>> {
    let data = a.as_slice().map(<[f32]>::to_vec).unwrap_or_else(|_| a.as_array().iter().copied().collect());
    Tensor::new(a.shape(), data).map_err(py_err)
}

fn to_numpy<'py>(py: Python<'py>, shape: &[usize], data: Vec<f32>) -> PyResult<Bound<'py, PyArrayDyn<f32>>> {
    PyArray1::from_vec(py, data).reshape(shape.to_vec())
}

fn waveform_of(a: &PyReadonlyArray1<'_, f32>) -> Waveform {
    Waveform::new(a.as_array().to_vec(), SAMPLE_RATE)
}

/// Spectral representation: a preset plus (optionally) fitted normalization.
#[pyclass(name = "Representation", module = "pyifsynth")]
#[derive(Clone)]
struct PyRepresentation {
    cfg: RepresentationConfig,
}

#[pymethods]
impl PyRepresentation {
    #[new]
    fn new(preset: &str) -> PyResult<Self> {
        Ok(PyRepresentation { cfg: RepresentationConfig::preset(preset).map_err(py_err)? })
    }

    #[getter]
    fn image_shape(&self) -> (usize, usize, usize) {
        let [h, w, c] = self.cfg.image_shape();
        (h, w, c)
    }

    #[getter]
    fn num_samples(&self) -> usize {
        self.cfg.num_samples
    }

    #[getter]
    fn fitted(&self) -> bool {
        self.cfg.norm.is_some()
    }

    /// Fit normalization ranges on a list of waveforms; returns a new representation.
    fn fit(&self, waves: Vec<PyReadonlyArray1<'_, f32>>) -> PyResult<Self> {
        let waves: Vec<Waveform> = waves.iter().map(waveform_of).collect();
        let stats = ifsynth::spectral::fit_normalization(&waves, &self.cfg).map_err(py_err)?;
        Ok(PyRepresentation { cfg: self.cfg.clone().with_norm(stats) })
    }

    /// Waveform → (frames, bins, 2) float32 image.
    fn encode<'py>(&self, py: Python<'py>, wave: PyReadonlyArray1<'_, f32>) -> PyResult<Bound<'py, PyArrayDyn<f32>>> {
        let img = Codec::new(self.cfg.clone()).and_then(|c| c.encode(&waveform_of(&wave))).map_err(py_err)?;
        to_numpy(py, &img.shape(), img.data)
    }

    /// (frames, bins, 2) image → waveform.
    fn decode<'py>(&self, py: Python<'py>, image: PyReadonlyArrayDyn<'_, f32>) -> PyResult<Bound<'py, PyArray1<f32>>> {
        let t = tensor_of(&image)?;
        if t.shape() != self.cfg.image_shape() {
            return Err(PyValueError::new_err(format!("expected image {:?}, got {:?}", self.cfg.image_shape(), t.shape())));
        }
        let img = SpectralImage { frames: t.shape()[0], bins: t.shape()[1], data: t.into_data(), config: self.cfg.clone() };
        let w = Codec::new(self.cfg.clone()).and_then(|c| c.decode(&img)).map_err(py_err)?;
        Ok(PyArray1::from_vec(py, w.samples))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.cfg).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Representation({:?}, {:?}, shape={:?}, fitted={})",
            self.cfg.channel1,
            self.cfg.freq_scale,
            self.cfg.image_shape(),
            self.cfg.norm.is_some()
        )
    }
}

/// Pitch-conditional generator, freshly initialized or loaded from a checkpoint.
#[pyclass(name = "Generator", module = "pyifsynth")]
struct PyGenerator {
    model: GanModel,
    repr: Option<RepresentationConfig>,
}

#[pymethods]
impl PyGenerator {
    #[new]
    #[pyo3(signature = (preset = "desk", seed = 0))]
    fn new(preset: &str, seed: u64) -> PyResult<Self> {
        let cfg = GanConfig::preset(preset).map_err(py_err)?;
        Ok(PyGenerator { model: GanModel::new(cfg, seed).map_err(py_err)?, repr: None })
    }

    /// Load a checkpoint written by `ifsynth train-gan` (path without extension).
    #[staticmethod]
    fn load(stem: PathBuf) -> PyResult<Self> {
        let (model, repr) = ifsynth::cli::load_generator(&stem).map_err(py_err)?;
        Ok(PyGenerator { model, repr: Some(repr) })
    }

    #[getter]
    fn output_shape(&self) -> (usize, usize, usize) {
        let [h, w, c] = self.model.cfg.output_shape();
        (h, w, c)
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.model.cfg.latent_dim
    }

    /// Representation stored with a loaded checkpoint.
    #[getter]
    fn representation(&self) -> Option<PyRepresentation> {
        self.repr.clone().map(|cfg| PyRepresentation { cfg })
    }

    /// Images `[n, H, W, 2]` for latents `[n, latent_dim]` (or one shared row) and MIDI pitches.
    fn generate<'py>(
        &self,
        py: Python<'py>,
        pitches: Vec<i64>,
        z: PyReadonlyArrayDyn<'_, f32>,
    ) -> PyResult<Bound<'py, PyArrayDyn<f32>>> {
        let out = self.model.generate(&pitches, &tensor_of(&z)?).map_err(py_err)?;
        let shape = out.shape().to_vec();
        to_numpy(py, &shape, out.into_data())
    }
}

#[pyfunction]
#[pyo3(signature = (n, dim = gan::LATENT_DIM, seed = 0))]
fn sample_latent<'py>(py: Python<'py>, n: usize, dim: usize, seed: u64) -> PyResult<Bound<'py, PyArrayDyn<f32>>> {
    let z = gan::sample_latent(n, dim, seed);
    to_numpy(py, &[n, dim], z.into_data())
}

#[pyfunction]
fn slerp<'py>(
    py: Python<'py>,
    z1: PyReadonlyArray1<'_, f32>,
    z2: PyReadonlyArray1<'_, f32>,
    t: f64,
) -> PyResult<Bound<'py, PyArray1<f32>>> {
    let v = gan::slerp(&z1.as_array().to_vec(), &z2.as_array().to_vec(), t).map_err(py_err)?;
    Ok(PyArray1::from_vec(py, v))
}

/// Harmonic note at a MIDI pitch with a seeded timbre.
#[pyfunction]
#[pyo3(signature = (pitch, timbre_seed = 0, seed = 0, length = ifsynth::spectral::NOTE_SAMPLES))]
fn synth_note<'py>(py: Python<'py>, pitch: i64, timbre_seed: u64, seed: u64, length: usize) -> PyResult<Bound<'py, PyArray1<f32>>> {
    let timbre = dataio::TimbreParams::from_seed(timbre_seed);
    let w = dataio::synth_note(pitch, &timbre, seed, length, SAMPLE_RATE).map_err(py_err)?;
    Ok(PyArray1::from_vec(py, w.samples))
}

#[pyfunction]
fn snr_db(reference: PyReadonlyArray1<'_, f32>, estimate: PyReadonlyArray1<'_, f32>) -> f64 {
    ifsynth::spectral::snr_db(&reference.as_array().to_vec(), &estimate.as_array().to_vec())
}

#[pyfunction]
fn fid(a: PyReadonlyArrayDyn<'_, f32>, b: PyReadonlyArrayDyn<'_, f32>) -> PyResult<f64> {
    metrics::fid(&tensor_of(&a)?, &tensor_of(&b)?).map_err(py_err)
}

#[pyfunction]
fn inception_score(probs: PyReadonlyArrayDyn<'_, f32>) -> PyResult<f64> {
    metrics::inception_score(&tensor_of(&probs)?).map_err(py_err)
}

#[pyfunction]
fn pitch_accuracy(probs: PyReadonlyArrayDyn<'_, f32>, labels: Vec<usize>) -> PyResult<f64> {
    metrics::pitch_accuracy(&tensor_of(&probs)?, &labels).map_err(py_err)
}

#[pyfunction]
fn pitch_entropy(probs: PyReadonlyArrayDyn<'_, f32>) -> PyResult<f64> {
    metrics::pitch_entropy(&tensor_of(&probs)?).map_err(py_err)
}

/// Number of statistically different bins between `train` and `generated` feature rows.
#[pyfunction]
#[pyo3(signature = (train, generated, k = metrics::NDB_CELLS, seed = 0))]
fn ndb(train: PyReadonlyArrayDyn<'_, f32>, generated: PyReadonlyArrayDyn<'_, f32>, k: usize, seed: u64) -> PyResult<usize> {
    let model = metrics::fit_ndb(&tensor_of(&train)?, k, seed).map_err(py_err)?;
    Ok(model.evaluate(&tensor_of(&generated)?).map_err(py_err)?.count)
}

#[pymodule]
fn pyifsynth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRepresentation>()?;
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(sample_latent, m)?)?;
    m.add_function(wrap_pyfunction!(slerp, m)?)?;
    m.add_function(wrap_pyfunction!(synth_note, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(fid, m)?)?;
    m.add_function(wrap_pyfunction!(inception_score, m)?)?;
    m.add_function(wrap_pyfunction!(pitch_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(pitch_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(ndb, m)?)?;
    m.add("SAMPLE_RATE", SAMPLE_RATE)?;
    Ok(())
}
