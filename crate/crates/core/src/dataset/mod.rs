//! Labelled collections of complexes, their JSON file format, preprocessing
//! and cross-validation splits.
//!
//! A dataset file is a JSON array with one record per complex:
//!
//! ```json
//! [{"vertices": 3, "edges": [[0, 1], [1, 2], [0, 2]], "triangles": [[0, 1, 2]],
//!   "x1": [[0.5], [-1.0], [2.0]], "y": 1}]
//! ```
//!
//! `vertices` is a count or a list of integer ids, `triangles` and the
//! row-major attribute matrices `x0`/`x1`/`x2` are optional. Edges and
//! triangles are reoriented canonically unless the record sets
//! `"oriented": true`. Dataset metadata lives next to the file in
//! `<stem>.manifest.json`.

mod preprocess;
mod split;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex;
use crate::datagen::GeneratorInfo;
use crate::error::{Error, Result};

pub use preprocess::{preprocess, subsample, PreprocessOptions};
pub use split::{kfold_split, Fold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Task {
    Binary,
    Multiclass { classes: usize },
    Regression,
}

impl Task {
    pub fn is_classification(&self) -> bool {
        !matches!(self, Self::Regression)
    }

    /// Binary for labels in `{0, 1}`, multiclass for other non-negative
    /// integers, regression otherwise.
    pub fn infer(labels: &[f64]) -> Self {
        let integral = labels.iter().all(|y| *y >= 0.0 && y.fract() == 0.0);
        if !integral {
            return Self::Regression;
        }
        let max = labels.iter().copied().fold(0.0, f64::max) as usize;
        if max <= 1 {
            Self::Binary
        } else {
            Self::Multiclass { classes: max + 1 }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task: Task,
    pub count: usize,
    /// `D_k` shared by every complex.
    pub attribute_dims: [usize; 3],
    #[serde(default)]
    pub preprocessing: Option<PreprocessOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub complexes: Vec<SimplicialComplex>,
    pub manifest: Manifest,
}

impl Dataset {
    /// Checks validity, labels and consistent attribute widths, and builds
    /// the manifest. The task is inferred from the labels unless given.
    pub fn new(complexes: Vec<SimplicialComplex>, task: Option<Task>) -> Result<Self> {
        if complexes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dims = std::array::from_fn(|k| complexes[0].attribute_dim(k));
        let mut labels = Vec::with_capacity(complexes.len());
        for (i, sc) in complexes.iter().enumerate() {
            let report = sc.validate();
            if !report.is_valid() {
                return Err(Error::Record {
                    record: i,
                    message: report.to_string(),
                });
            }
            for k in 0..3 {
                if sc.attribute_dim(k) != dims[k] {
                    return Err(Error::Record {
                        record: i,
                        message: format!("x{k} has {} columns, dataset uses {}", sc.attribute_dim(k), dims[k]),
                    });
                }
            }
            labels.push(sc.label().ok_or_else(|| Error::Record {
                record: i,
                message: "missing label `y`".into(),
            })?);
        }
        let task = task.unwrap_or_else(|| Task::infer(&labels));
        Ok(Self {
            manifest: Manifest {
                task,
                count: complexes.len(),
                attribute_dims: dims,
                preprocessing: None,
                generator: None,
            },
            complexes,
        })
    }

    pub fn len(&self) -> usize {
        self.complexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.complexes.is_empty()
    }

    pub fn task(&self) -> Task {
        self.manifest.task
    }

    pub fn labels(&self) -> Vec<f64> {
        self.complexes.iter().map(|c| c.label().unwrap_or(f64::NAN)).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut ds = Self::new(
            indices.iter().map(|&i| self.complexes[i].clone()).collect(),
            Some(self.task()),
        )?;
        ds.manifest.preprocessing = self.manifest.preprocessing.clone();
        ds.manifest.generator = self.manifest.generator.clone();
        Ok(ds)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Vertices {
    Count(usize),
    Ids(Vec<i64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Record {
    vertices: Vertices,
    edges: Vec<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    triangles: Vec<[i64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x1: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x2: Option<Vec<Vec<f64>>>,
    y: f64,
    #[serde(default)]
    oriented: bool,
}

fn matrix_from_rows(rows: &[Vec<f64>], expected_rows: usize, k: usize) -> std::result::Result<DMatrix<f64>, String> {
    if rows.len() != expected_rows {
        return Err(format!("x{k} has {} rows, expected {expected_rows}", rows.len()));
    }
    let width = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != width) {
        return Err(format!("x{k} rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(format!("x{k} contains a non-finite value"));
    }
    Ok(DMatrix::from_fn(expected_rows, width, |i, j| rows[i][j]))
}

fn rows_of(x: &DMatrix<f64>) -> Option<Vec<Vec<f64>>> {
    (x.ncols() > 0).then(|| x.row_iter().map(|r| r.iter().copied().collect()).collect())
}

impl Record {
    fn into_complex(self) -> std::result::Result<SimplicialComplex, String> {
        let (n, index): (usize, Option<HashMap<i64, usize>>) = match &self.vertices {
            Vertices::Count(n) => (*n, None),
            Vertices::Ids(ids) => {
                let map: HashMap<i64, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                if map.len() != ids.len() {
                    return Err("duplicate vertex id".into());
                }
                (ids.len(), Some(map))
            }
        };
        let vertex = |v: i64| -> std::result::Result<usize, String> {
            match &index {
                Some(map) => map.get(&v).copied().ok_or_else(|| format!("unknown vertex id {v}")),
                None => usize::try_from(v).map_err(|_| format!("negative vertex index {v}")),
            }
        };
        let edges = self
            .edges
            .iter()
            .map(|&[a, b]| Ok([vertex(a)?, vertex(b)?]))
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let triangles = self
            .triangles
            .iter()
            .map(|&[a, b, c]| Ok([vertex(a)?, vertex(b)?, vertex(c)?]))
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let counts = [n, edges.len(), triangles.len()];
        let mut sc = SimplicialComplex::from_parts(n, edges, triangles);
        for (k, x) in [self.x0, self.x1, self.x2].into_iter().enumerate() {
            if let Some(rows) = x {
                sc.set_attributes(k, matrix_from_rows(&rows, counts[k], k)?);
            }
        }
        if !self.y.is_finite() {
            return Err("label is not finite".into());
        }
        sc.set_label(Some(self.y));
        if !self.oriented {
            sc = sc.canonicalized();
        }
        let report = sc.validate();
        if !report.is_valid() {
            return Err(report.to_string());
        }
        Ok(sc)
    }

    fn from_complex(sc: &SimplicialComplex) -> Self {
        let to_i64 = |v: usize| v as i64;
        Self {
            vertices: Vertices::Count(sc.num_vertices()),
            edges: sc.edges().iter().map(|e| e.map(to_i64)).collect(),
            triangles: sc.triangles().iter().map(|t| t.map(to_i64)).collect(),
            x0: rows_of(sc.attributes(0)),
            x1: rows_of(sc.attributes(1)),
            x2: rows_of(sc.attributes(2)),
            y: sc.label().unwrap_or(f64::NAN),
            oriented: true,
        }
    }
}

/// `<dir>/<stem>.manifest.json` next to a dataset file.
pub fn manifest_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}

/// Parses dataset JSON; the manifest, when given, fixes the task.
pub fn parse_dataset(json: &str, manifest: Option<Manifest>) -> Result<Dataset> {
    if json.trim().is_empty() {
        return Err(Error::EmptyDataset);
    }
    let values: Vec<serde_json::Value> = serde_json::from_str(json)?;
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut complexes = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        let rec: Record = serde_json::from_value(v).map_err(|e| Error::Record {
            record: i,
            message: e.to_string(),
        })?;
        complexes.push(
            rec.into_complex()
                .map_err(|message| Error::Record { record: i, message })?,
        );
    }
    let mut ds = Dataset::new(complexes, manifest.as_ref().map(|m| m.task))?;
    if let Some(m) = manifest {
        ds.manifest.preprocessing = m.preprocessing;
        ds.manifest.generator = m.generator;
    }
    Ok(ds)
}

pub fn dataset_to_json(ds: &Dataset) -> Result<String> {
    let records: Vec<Record> = ds.complexes.iter().map(Record::from_complex).collect();
    Ok(serde_json::to_string(&records)?)
}

/// Reads a dataset file and its manifest if one exists.
pub fn load(path: &Path) -> Result<Dataset> {
    let json = fs::read_to_string(path)?;
    let mpath = manifest_path(path);
    let manifest = if mpath.exists() {
        Some(serde_json::from_str(&fs::read_to_string(&mpath)?)?)
    } else {
        None
    };
    parse_dataset(&json, manifest)
}

/// Writes the dataset file and its manifest.
pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, dataset_to_json(ds)?)?;
    fs::write(manifest_path(path), serde_json::to_string_pretty(&ds.manifest)?)?;
    Ok(())
}
