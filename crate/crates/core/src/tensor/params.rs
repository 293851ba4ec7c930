//! Named parameter sets and the on-disk tensor container.
//!
//! A container `stem` is two files: `stem.bin` with every tensor's values as
//! little-endian f32, back to back, and `stem.json` listing names, shapes and
//! offsets plus free-form metadata.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::array::{numel, Tensor};
use super::graph::{Graph, Var};
use super::scalar::Scalar;
use crate::error::{Error, Result};

const CONTAINER_FORMAT: &str = "named-tensors-f32le";

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    tensors: Vec<Entry>,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn container_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let mut bin = stem.as_os_str().to_owned();
    bin.push(".bin");
    let mut json = stem.as_os_str().to_owned();
    json.push(".json");
    (bin.into(), json.into())
}

/// Write named tensors to `stem.bin` / `stem.json`.
pub fn write_tensors<T: Scalar>(stem: &Path, tensors: &[(&str, &Tensor<T>)], meta: serde_json::Value) -> Result<()> {
    let (bin_path, json_path) = container_paths(stem);
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut bytes = Vec::with_capacity(4 * tensors.iter().map(|(_, t)| t.len()).sum::<usize>());
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0;
    for (name, t) in tensors {
        entries.push(Entry { name: name.to_string(), shape: t.shape().to_vec(), offset });
        for v in t.data() {
            bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        offset += t.len();
    }
    let manifest = Manifest { format: CONTAINER_FORMAT.into(), tensors: entries, meta };
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))?;
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&json_path, e))?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
}

/// Read a container written by [`write_tensors`].
pub fn read_tensors<T: Scalar>(stem: &Path) -> Result<(Vec<(String, Tensor<T>)>, serde_json::Value)> {
    let (bin_path, json_path) = container_paths(stem);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&json_path, e))?;
    if manifest.format != CONTAINER_FORMAT {
        return Err(Error::format(&json_path, format!("unknown container format {:?}", manifest.format)));
    }
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(&bin_path, "length is not a multiple of 4"));
    }
    let values: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for e in manifest.tensors {
        let n = numel(&e.shape);
        let slice = values
            .get(e.offset..e.offset + n)
            .ok_or_else(|| Error::format(&bin_path, format!("tensor {} runs past end of data", e.name)))?;
        let t = Tensor::new(&e.shape, slice.iter().map(|&v| T::lit(v as f64)).collect())?;
        out.push((e.name, t));
    }
    Ok((out, manifest.meta))
}

/// Ordered collection of named trainable tensors.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Arc<Tensor<T>>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { names: Vec::new(), tensors: Vec::new(), index: HashMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate parameter {name}")));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(Arc::new(t));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| self.tensors[i].as_ref())
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter().map(|t| t.as_ref()))
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Mutable access for in-place updates; copies only if a graph still shares a tensor.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.tensors.iter_mut().map(Arc::make_mut).collect()
    }

    /// Record every parameter as a leaf on `graph`.
    pub fn bind<'g>(&self, graph: &'g Graph<T>) -> Bound<'g, '_, T> {
        let vars = self.tensors.iter().map(|t| graph.shared(t.clone())).collect();
        Bound { set: self, vars }
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Arc::new(t.cast())).collect(),
            index: self.index.clone(),
        }
    }

    pub fn save(&self, stem: &Path, meta: serde_json::Value) -> Result<()> {
        let list: Vec<_> = self.tensors().collect();
        write_tensors(stem, &list, meta)
    }

    pub fn load(stem: &Path) -> Result<(Self, serde_json::Value)> {
        let (list, meta) = read_tensors(stem)?;
        let mut set = ParamSet::new();
        for (name, t) in list {
            set.insert(name, t)?;
        }
        Ok((set, meta))
    }

    /// Replace values with those from `other`, requiring identical names and shapes.
    pub fn assign(&mut self, other: &ParamSet<T>) -> Result<()> {
        for (name, t) in other.tensors() {
            let i = *self.index.get(name).ok_or_else(|| Error::Invalid(format!("unknown parameter {name}")))?;
            if self.tensors[i].shape() != t.shape() {
                return Err(Error::shape("assign", format!("{name}: {:?} vs {:?}", self.tensors[i].shape(), t.shape())));
            }
        }
        if other.len() != self.len() {
            return Err(Error::Invalid(format!("expected {} parameters, found {}", self.len(), other.len())));
        }
        for (name, t) in other.tensors() {
            let i = self.index[name];
            self.tensors[i] = Arc::new(t.clone());
        }
        Ok(())
    }
}

/// Parameters recorded on a graph, addressable by name.
pub struct Bound<'g, 's, T> {
    set: &'s ParamSet<T>,
    vars: Vec<Var<'g, T>>,
}

impl<'g, T: Scalar> Bound<'g, '_, T> {
    pub fn get(&self, name: &str) -> Result<Var<'g, T>> {
        self.set
            .index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::Invalid(format!("missing parameter {name}")))
    }

    pub fn vars(&self) -> &[Var<'g, T>] {
        &self.vars
    }
}
