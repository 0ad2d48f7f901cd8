//! On-disk formats: raw tensors, dataset trees and fitted models.
//!
//! A tensor is stored as `<name>.bin` (little-endian `f64`, row-major) next
//! to `<name>.shape.json` (`{"shape": [...], "dtype": "f64", "order":
//! "row-major"}`).
//!
//! A dataset tree looks like
//!
//! ```text
//! <root>/manifest.json
//! <root>/task_<id>/y.csv          header `y,split`, split ∈ {train, test}
//! <root>/task_<id>/z.csv          header `z1,…,zp`, omitted when p = 0
//! <root>/task_<id>/x.bin          per-sample tensors, first axis = sample
//! <root>/task_<id>/x.shape.json
//! ```
//!
//! Every writer builds its output in a sibling temporary directory and
//! renames it into place, so a failed command leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tenmtl::simgen::{GeneratedDataset, ScenarioConfig};
use tenmtl::tenmtl::{
    HyperParams, ScalarSide, TensorSide, TuckerState, VectorParams, VectorState,
};
use tenmtl::{DenseTensor, Family, Matrix, PersonalizedModel, TaskDataset};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorHeader {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub order: String,
}

impl TensorHeader {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            dtype: "f64".into(),
            order: "row-major".into(),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    fs::write(path, to_json(value)).map_err(fs_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(fs_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Writes `<stem>.bin` and `<stem>.shape.json` in `dir`.
pub fn write_tensor(dir: &Path, stem: &str, shape: &[usize], data: &[f64]) -> Result<(), IoError> {
    let bin = dir.join(format!("{stem}.bin"));
    if shape.iter().product::<usize>() != data.len() {
        return Err(format_err(&bin, "shape does not match data length"));
    }
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(fs_err(&bin))?;
    write_json(&dir.join(format!("{stem}.shape.json")), &TensorHeader::new(shape))
}

/// Reads `<stem>.bin` and `<stem>.shape.json` from `dir`.
pub fn read_tensor(dir: &Path, stem: &str) -> Result<(Vec<usize>, Vec<f64>), IoError> {
    let header_path = dir.join(format!("{stem}.shape.json"));
    let header: TensorHeader = read_json(&header_path)?;
    if header.dtype != "f64" || header.order != "row-major" {
        return Err(format_err(
            &header_path,
            format!("unsupported dtype/order {}/{}", header.dtype, header.order),
        ));
    }
    let bin = dir.join(format!("{stem}.bin"));
    let bytes = fs::read(&bin).map_err(fs_err(&bin))?;
    let len: usize = header.shape.iter().product();
    if bytes.len() != len * 8 {
        return Err(format_err(
            &bin,
            format!("expected {} bytes, found {}", len * 8, bytes.len()),
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(format_err(&bin, "non-finite value"));
    }
    Ok((header.shape, data))
}

fn temp_sibling(dest: &Path) -> PathBuf {
    let name = dest
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let parent = dest.parent().filter(|p| !p.as_os_str().is_empty());
    parent
        .unwrap_or_else(|| Path::new("."))
        .join(format!(".{name}.tmp-{}", std::process::id()))
}

/// Builds a directory with `fill` and moves it to `dest`. An existing `dest`
/// is replaced only if it contains `marker` (i.e. it is an earlier output of
/// the same kind).
pub fn write_dir_atomically(
    dest: &Path,
    marker: &str,
    fill: impl FnOnce(&Path) -> Result<(), IoError>,
) -> Result<(), IoError> {
    if dest.exists() {
        let replaceable = dest.join(marker).is_file()
            || fs::read_dir(dest)
                .map(|mut d| d.next().is_none())
                .unwrap_or(false);
        if !replaceable {
            return Err(format_err(
                dest,
                format!("exists and does not contain {marker}; refusing to overwrite"),
            ));
        }
    }
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(fs_err(parent))?;
    }
    let tmp = temp_sibling(dest);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(fs_err(&tmp))?;
    }
    fs::create_dir(&tmp).map_err(fs_err(&tmp))?;
    if let Err(e) = fill(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dest.exists() {
        fs::remove_dir_all(dest).map_err(fs_err(dest))?;
    }
    fs::rename(&tmp, dest).map_err(fs_err(dest))
}

/// Writes a single file through a temporary sibling and a rename.
pub fn write_file_atomically(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(fs_err(parent))?;
    }
    let tmp = temp_sibling(path);
    fs::write(&tmp, contents).map_err(fs_err(&tmp))?;
    fs::rename(&tmp, path).map_err(fs_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_tasks: usize,
    pub n_scalar: usize,
    pub tensor_shape: Option<Vec<usize>>,
    pub family: Family,
    pub task_ids: Vec<String>,
    pub n_train: Vec<usize>,
    pub n_test: Vec<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
}

/// Train/test tasks plus their manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub train: Vec<TaskDataset>,
    pub test: Vec<TaskDataset>,
}

impl Dataset {
    pub fn from_generated(g: &GeneratedDataset) -> Self {
        let t = &g.train_tasks;
        Self {
            manifest: DatasetManifest {
                format_version: FORMAT_VERSION,
                n_tasks: t.len(),
                n_scalar: t[0].n_scalar(),
                tensor_shape: t[0].tensor_shape().map(<[usize]>::to_vec),
                family: Family::Gaussian,
                task_ids: t.iter().map(|x| x.task_id.clone()).collect(),
                n_train: t.iter().map(TaskDataset::n_samples).collect(),
                n_test: g.test_tasks.iter().map(TaskDataset::n_samples).collect(),
                seed: Some(g.config.seed),
                scenario: Some(g.config.clone()),
            },
            train: g.train_tasks.clone(),
            test: g.test_tasks.clone(),
        }
    }
}

fn check_task_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && id != "."
        && id != ".."
}

fn write_task(dir: &Path, train: &TaskDataset, test: &TaskDataset) -> Result<(), IoError> {
    fs::create_dir(dir).map_err(fs_err(dir))?;
    let ypath = dir.join("y.csv");
    let mut y = csv::Writer::from_path(&ypath).map_err(|e| format_err(&ypath, e.to_string()))?;
    let csv_err = |p: &Path, e: csv::Error| format_err(p, e.to_string());
    y.write_record(["y", "split"]).map_err(|e| csv_err(&ypath, e))?;
    for (task, label) in [(train, "train"), (test, "test")] {
        for v in &task.y {
            y.write_record([v.to_string().as_str(), label])
                .map_err(|e| csv_err(&ypath, e))?;
        }
    }
    y.flush().map_err(fs_err(&ypath))?;

    let p = train.n_scalar();
    if p > 0 {
        let zpath = dir.join("z.csv");
        let mut z = csv::Writer::from_path(&zpath).map_err(|e| csv_err(&zpath, e))?;
        z.write_record((1..=p).map(|k| format!("z{k}")))
            .map_err(|e| csv_err(&zpath, e))?;
        for task in [train, test] {
            for j in 0..task.n_samples() {
                z.write_record(task.z.row(j).iter().map(f64::to_string))
                    .map_err(|e| csv_err(&zpath, e))?;
            }
        }
        z.flush().map_err(fs_err(&zpath))?;
    }

    if let Some(dims) = train.tensor_shape() {
        let n = train.n_samples() + test.n_samples();
        let mut shape = vec![n];
        shape.extend_from_slice(dims);
        let data: Vec<f64> = train
            .x
            .iter()
            .chain(&test.x)
            .flat_map(|t| t.data().iter().copied())
            .collect();
        write_tensor(dir, "x", &shape, &data)?;
    }
    Ok(())
}

/// Writes a dataset tree at `root`.
pub fn write_dataset(root: &Path, ds: &Dataset) -> Result<(), IoError> {
    for id in &ds.manifest.task_ids {
        if !check_task_id(id) {
            return Err(format_err(root, format!("invalid task id {id:?}")));
        }
    }
    write_dir_atomically(root, "manifest.json", |tmp| {
        write_json(&tmp.join("manifest.json"), &ds.manifest)?;
        for (train, test) in ds.train.iter().zip(&ds.test) {
            write_task(&tmp.join(format!("task_{}", train.task_id)), train, test)?;
        }
        Ok(())
    })
}

fn parse_f64(path: &Path, s: &str) -> Result<f64, IoError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format_err(path, format!("not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format_err(path, format!("non-finite value {s:?}")))
    }
}

fn read_task(
    dir: &Path,
    id: &str,
    m: &DatasetManifest,
) -> Result<(TaskDataset, TaskDataset), IoError> {
    let ypath = dir.join("y.csv");
    let mut reader = csv::Reader::from_path(&ypath).map_err(|e| format_err(&ypath, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| format_err(&ypath, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["y", "split"] {
        return Err(format_err(&ypath, "header must be `y,split`"));
    }
    let mut y = Vec::new();
    let mut is_train = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| format_err(&ypath, e.to_string()))?;
        y.push(parse_f64(&ypath, &rec[0])?);
        is_train.push(match rec[1].trim() {
            "train" => true,
            "test" => false,
            other => return Err(format_err(&ypath, format!("unknown split {other:?}"))),
        });
    }
    let n = y.len();

    let p = m.n_scalar;
    let z = if p > 0 {
        let zpath = dir.join("z.csv");
        let mut reader =
            csv::Reader::from_path(&zpath).map_err(|e| format_err(&zpath, e.to_string()))?;
        let width = reader
            .headers()
            .map_err(|e| format_err(&zpath, e.to_string()))?
            .len();
        if width != p {
            return Err(format_err(&zpath, format!("expected {p} columns, found {width}")));
        }
        let mut data = Vec::with_capacity(n * p);
        for rec in reader.records() {
            let rec = rec.map_err(|e| format_err(&zpath, e.to_string()))?;
            for field in rec.iter() {
                data.push(parse_f64(&zpath, field)?);
            }
        }
        Matrix::new(data.len() / p, p, data).map_err(|e| format_err(&zpath, e.to_string()))?
    } else {
        Matrix::zeros(n, 0)
    };
    if z.rows() != n {
        return Err(format_err(dir, format!("{} responses but {} z rows", n, z.rows())));
    }

    let x: Vec<DenseTensor> = match &m.tensor_shape {
        Some(dims) => {
            let (shape, data) = read_tensor(dir, "x")?;
            if shape.len() != dims.len() + 1 || shape[0] != n || shape[1..] != dims[..] {
                return Err(format_err(
                    &dir.join("x.shape.json"),
                    format!("shape {shape:?} does not match {n} samples of {dims:?}"),
                ));
            }
            let each: usize = dims.iter().product();
            data.chunks_exact(each.max(1))
                .take(n)
                .map(|c| DenseTensor::new(dims.clone(), c.to_vec()).expect("checked shape"))
                .collect()
        }
        None => Vec::new(),
    };

    let full = TaskDataset::new(id, y, z, x).map_err(|e| format_err(dir, e.to_string()))?;
    let train_idx: Vec<usize> = (0..n).filter(|&j| is_train[j]).collect();
    let test_idx: Vec<usize> = (0..n).filter(|&j| !is_train[j]).collect();
    Ok((full.subset(&train_idx), full.subset(&test_idx)))
}

/// Reads a dataset tree.
pub fn read_dataset(root: &Path) -> Result<Dataset, IoError> {
    let mpath = root.join("manifest.json");
    let m: DatasetManifest = read_json(&mpath)?;
    if m.format_version != FORMAT_VERSION {
        return Err(format_err(&mpath, format!("unsupported format version {}", m.format_version)));
    }
    if m.task_ids.len() != m.n_tasks {
        return Err(format_err(&mpath, "task_ids does not match n_tasks"));
    }
    let mut train = Vec::with_capacity(m.n_tasks);
    let mut test = Vec::with_capacity(m.n_tasks);
    for (i, id) in m.task_ids.iter().enumerate() {
        if !check_task_id(id) {
            return Err(format_err(&mpath, format!("invalid task id {id:?}")));
        }
        let (a, b) = read_task(&root.join(format!("task_{id}")), id, &m)?;
        if m.n_train.get(i) != Some(&a.n_samples()) || m.n_test.get(i) != Some(&b.n_samples()) {
            return Err(format_err(
                &mpath,
                format!("split counts of task {id} disagree with y.csv"),
            ));
        }
        train.push(a);
        test.push(b);
    }
    Ok(Dataset {
        manifest: m,
        train,
        test,
    })
}

/// Serialized estimator output.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelArtifact {
    Tucker {
        state: TuckerState,
        hyper: HyperParams,
    },
    Vector {
        state: VectorState,
        params: VectorParams,
    },
    /// Per-task coefficients of a baseline.
    Personalized {
        method: String,
        models: Vec<PersonalizedModel>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format_version: u32,
    pub method: String,
    pub family: Family,
    pub task_ids: Vec<String>,
    /// Estimator settings as JSON.
    pub settings: serde_json::Value,
    pub blobs: Vec<BlobEntry>,
}

struct BlobWriter<'a> {
    dir: &'a Path,
    entries: Vec<BlobEntry>,
}

impl BlobWriter<'_> {
    fn matrix(&mut self, name: &str, m: &Matrix) -> Result<(), IoError> {
        self.raw(name, &[m.rows(), m.cols()], m.data())
    }

    fn raw(&mut self, name: &str, shape: &[usize], data: &[f64]) -> Result<(), IoError> {
        write_tensor(self.dir, name, shape, data)?;
        self.entries.push(BlobEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
        });
        Ok(())
    }
}

/// Writes the model manifest (`model.json`) and blobs into `dir`, which must
/// exist.
pub fn write_model_files(dir: &Path, artifact: &ModelArtifact, family: Family) -> Result<(), IoError> {
    let mut w = BlobWriter {
        dir,
        entries: Vec::new(),
    };
    let (method, task_ids, settings) = match artifact {
        ModelArtifact::Tucker { state, hyper } => {
            w.matrix("w0", &state.w0)?;
            if let Some(t) = &state.tensor {
                w.raw("g", t.core.shape(), t.core.data())?;
                w.matrix("f0", &t.f0)?;
                for (d, u) in t.factors.iter().enumerate() {
                    w.matrix(&format!("u{}", d + 1), u)?;
                }
            }
            if let Some(s) = &state.scalar {
                w.matrix("h", &s.core)?;
                w.matrix("d0", &s.d0)?;
                w.matrix("v1", &s.v1)?;
            }
            ("tenmtl", state.task_ids.clone(), serde_json::to_value(hyper))
        }
        ModelArtifact::Vector { state, params } => {
            w.matrix("u0", &state.u0)?;
            w.matrix("g", &state.core)?;
            w.matrix("u1", &state.u1)?;
            ("tenmtl-vector", state.task_ids.clone(), serde_json::to_value(params))
        }
        ModelArtifact::Personalized { method, models } => {
            for (i, m) in models.iter().enumerate() {
                w.raw(&format!("gamma_{i}"), &[m.gamma.len()], &m.gamma)?;
                if let Some(b) = &m.b {
                    w.raw(&format!("b_{i}"), b.shape(), b.data())?;
                }
            }
            (
                method.as_str(),
                models.iter().map(|m| m.task_id.clone()).collect(),
                Ok(serde_json::Value::Null),
            )
        }
    };
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        method: method.to_string(),
        family,
        task_ids,
        settings: settings.expect("serializable settings"),
        blobs: w.entries,
    };
    write_json(&dir.join("model.json"), &manifest)
}

fn blob_matrix(dir: &Path, name: &str) -> Result<Matrix, IoError> {
    let (shape, data) = read_tensor(dir, name)?;
    if shape.len() != 2 {
        return Err(format_err(dir, format!("blob {name} is not a matrix")));
    }
    Matrix::new(shape[0], shape[1], data).map_err(|e| format_err(dir, e.to_string()))
}

fn blob_tensor(dir: &Path, name: &str) -> Result<DenseTensor, IoError> {
    let (shape, data) = read_tensor(dir, name)?;
    DenseTensor::new(shape, data).map_err(|e| format_err(dir, e.to_string()))
}

/// Reads a model written by [`write_model_files`].
pub fn read_model_files(dir: &Path) -> Result<(ModelArtifact, Family), IoError> {
    let mpath = dir.join("model.json");
    let m: ModelManifest = read_json(&mpath)?;
    let has = |name: &str| m.blobs.iter().any(|b| b.name == name);
    let settings_err = |e: serde_json::Error| format_err(&mpath, e.to_string());
    let artifact = match m.method.as_str() {
        "tenmtl" => {
            let hyper: HyperParams =
                serde_json::from_value(m.settings.clone()).map_err(settings_err)?;
            let tensor = if has("g") {
                let mut factors = Vec::new();
                let mut d = 1;
                while has(&format!("u{d}")) {
                    factors.push(blob_matrix(dir, &format!("u{d}"))?);
                    d += 1;
                }
                Some(TensorSide {
                    core: blob_tensor(dir, "g")?,
                    f0: blob_matrix(dir, "f0")?,
                    factors,
                })
            } else {
                None
            };
            let scalar = if has("h") {
                Some(ScalarSide {
                    core: blob_matrix(dir, "h")?,
                    d0: blob_matrix(dir, "d0")?,
                    v1: blob_matrix(dir, "v1")?,
                })
            } else {
                None
            };
            ModelArtifact::Tucker {
                state: TuckerState {
                    task_ids: m.task_ids.clone(),
                    w0: blob_matrix(dir, "w0")?,
                    tensor,
                    scalar,
                },
                hyper,
            }
        }
        "tenmtl-vector" => ModelArtifact::Vector {
            params: serde_json::from_value(m.settings.clone()).map_err(settings_err)?,
            state: VectorState {
                task_ids: m.task_ids.clone(),
                u0: blob_matrix(dir, "u0")?,
                core: blob_matrix(dir, "g")?,
                u1: blob_matrix(dir, "u1")?,
            },
        },
        method => {
            let mut models = Vec::with_capacity(m.task_ids.len());
            for (i, id) in m.task_ids.iter().enumerate() {
                let b = if has(&format!("b_{i}")) {
                    Some(blob_tensor(dir, &format!("b_{i}"))?)
                } else {
                    None
                };
                models.push(PersonalizedModel {
                    task_id: id.clone(),
                    gamma: read_tensor(dir, &format!("gamma_{i}"))?.1,
                    b,
                });
            }
            ModelArtifact::Personalized {
                method: method.to_string(),
                models,
            }
        }
    };
    Ok((artifact, m.family))
}
