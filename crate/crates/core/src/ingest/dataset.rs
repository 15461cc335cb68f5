use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codec::{self, CodecError, HEADER_LEN, MAGIC};
use crate::matrix::Matrix;

/// Allowed deviation of a probability row's sum from 1 (float32 export roundoff).
pub const PROB_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: u64,
    pub split: Split,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<usize>,
}

impl Instance {
    /// Fills in whitespace-split, lowercased tokens when the record carried none.
    pub fn with_derived_tokens(mut self) -> Self {
        if self.tokens.is_empty() {
            self.tokens = self.text.split_whitespace().map(str::to_lowercase).collect();
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFiles {
    #[serde(default = "default_instances")]
    pub instances: String,
    #[serde(default = "default_probs")]
    pub probs: String,
    #[serde(default = "default_features")]
    pub features: String,
    #[serde(default = "default_activations")]
    pub activations: String,
}

fn default_instances() -> String {
    "instances.jsonl".into()
}
fn default_probs() -> String {
    "probs.dlmx".into()
}
fn default_features() -> String {
    "features.dlmx".into()
}
fn default_activations() -> String {
    "activations".into()
}

impl Default for ManifestFiles {
    fn default() -> Self {
        Self {
            instances: default_instances(),
            probs: default_probs(),
            features: default_features(),
            activations: default_activations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub class_names: Vec<String>,
    pub d: usize,
    pub d_act: usize,
    pub seed: u64,
    #[serde(default)]
    pub files: ManifestFiles,
}

/// Where an instance's activation matrix lives. File-backed entries have had
/// their header and size checked; the payload is read on demand.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivationSource {
    Memory(Matrix<f32>),
    File { path: PathBuf, rows: usize, cols: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Activations {
    entries: BTreeMap<u64, ActivationSource>,
}

impl Activations {
    pub fn insert(&mut self, id: u64, m: Matrix<f32>) {
        self.entries.insert(id, ActivationSource::Memory(m));
    }

    pub fn contains(&self, id: u64) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    /// `Ok(None)` when the instance has no activations.
    pub fn get(&self, id: u64) -> Result<Option<Matrix<f32>>, IngestError> {
        match self.entries.get(&id) {
            None => Ok(None),
            Some(ActivationSource::Memory(m)) => Ok(Some(m.clone())),
            Some(ActivationSource::File { path, .. }) => {
                let m = codec::read_matrix_file(path)?;
                if let Some((row, col)) = m.first_non_finite() {
                    return Err(Violation::NonFinite { file: path.display().to_string(), row, col }.into());
                }
                Ok(Some(m))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub instances: Vec<Instance>,
    pub probs: Matrix<f32>,
    pub features: Matrix<f32>,
    pub activations: Activations,
    pub class_names: Vec<String>,
    pub d_act: usize,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.probs.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.instances.iter().position(|inst| inst.id == id)
    }

    /// Indices (into `instances`) of one split, in file order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Argmax class of row `i`; first index wins ties.
    pub fn prediction(&self, i: usize) -> usize {
        let row = self.probs.row(i);
        let mut best = 0;
        for (k, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = k;
            }
        }
        best
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            name: self.name.clone(),
            class_names: self.class_names.clone(),
            d: self.features.cols(),
            d_act: self.d_act,
            seed: self.seed,
            files: ManifestFiles::default(),
        }
    }

    /// Checks every declared invariant of an in-memory dataset.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_instances(&self.instances, &mut out);
        check_probs(&self.probs, self.instances.len(), self.class_names.len(), "probs", &mut out);
        check_features(&self.features, self.instances.len(), self.features.cols(), "features", &mut out);
        let tokens: HashMap<u64, usize> = self.instances.iter().map(|i| (i.id, i.tokens.len())).collect();
        for (&id, src) in &self.activations.entries {
            let (rows, cols) = match src {
                ActivationSource::Memory(m) => {
                    if let Some((row, col)) = m.first_non_finite() {
                        out.push(Violation::NonFinite { file: format!("activations/{id}"), row, col });
                    }
                    m.shape()
                }
                ActivationSource::File { rows, cols, .. } => (*rows, *cols),
            };
            check_activation_shape(id, rows, cols, self.d_act, &tokens, &mut out);
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), IngestError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| IngestError::Io { path, source }
        };
        let manifest = self.manifest();
        fs::create_dir_all(dir).map_err(io(dir))?;
        let manifest_path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, json + "\n").map_err(io(&manifest_path))?;

        let mut lines = String::new();
        for inst in &self.instances {
            lines.push_str(&serde_json::to_string(inst).expect("instance serializes"));
            lines.push('\n');
        }
        let inst_path = dir.join(&manifest.files.instances);
        fs::write(&inst_path, lines).map_err(io(&inst_path))?;
        codec::write_matrix_file(&dir.join(&manifest.files.probs), &self.probs)?;
        codec::write_matrix_file(&dir.join(&manifest.files.features), &self.features)?;
        if !self.activations.is_empty() {
            let act_dir = dir.join(&manifest.files.activations);
            fs::create_dir_all(&act_dir).map_err(io(&act_dir))?;
            for id in self.activations.ids() {
                if let Some(m) = self.activations.get(id)? {
                    codec::write_matrix_file(&act_dir.join(format!("{id}.dlmx")), &m)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("{file}: malformed: {message}")]
    Malformed { file: String, message: String },
    #[error("{file}: {found} rows but {expected} instances")]
    RowCount { file: String, found: usize, expected: usize },
    #[error("{file}: {found} columns, expected {expected}")]
    ColCount { file: String, found: usize, expected: usize },
    #[error("{file}: non-finite entry at ({row}, {col})")]
    NonFinite { file: String, row: usize, col: usize },
    #[error("probs row {row} sums to {sum}")]
    ProbSum { row: usize, sum: f32 },
    #[error("probs row {row} has entry {value} outside [0, 1]")]
    ProbRange { row: usize, value: f32 },
    #[error("duplicate instance id {0}")]
    DuplicateId(u64),
    #[error("instance {0} has empty text")]
    EmptyText(u64),
    #[error("instance {id}: gold_label {label} out of range for {n_classes} classes")]
    GoldLabel { id: u64, label: usize, n_classes: usize },
    #[error("activations for instance {id}: {cols} columns but {tokens} tokens")]
    ActivationTokens { id: u64, cols: usize, tokens: usize },
    #[error("activations for instance {id}: {rows} rows, expected d_act={expected}")]
    ActivationRows { id: u64, rows: usize, expected: usize },
    #[error("activation file {0} names no known instance")]
    OrphanActivation(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Invalid(#[from] Violation),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Outcome of inspecting a dataset directory: every violation found, and
/// the dataset itself when there were none.
#[derive(Debug)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub dataset: Option<Dataset>,
}

/// Loads and validates a dataset directory, rejecting it on the first violation.
pub fn load_dataset(dir: &Path) -> Result<Dataset, IngestError> {
    let report = inspect(dir, false)?;
    match report.violations.into_iter().next() {
        Some(v) => Err(v.into()),
        None => Ok(report.dataset.expect("dataset present when no violations")),
    }
}

/// Full validation pass; also reads every activation payload to check finiteness.
pub fn validate_dataset(dir: &Path) -> Result<ValidationReport, IngestError> {
    inspect(dir, true)
}

fn inspect(dir: &Path, deep: bool) -> Result<ValidationReport, IngestError> {
    if !dir.is_dir() {
        return Err(IngestError::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a readable directory"),
        });
    }
    let mut v = Vec::new();
    let done = |violations| Ok(ValidationReport { violations, dataset: None });

    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = match fs::read_to_string(&manifest_path) {
        Err(_) => {
            v.push(Violation::MissingFile("manifest.json".into()));
            return done(v);
        }
        Ok(s) => match serde_json::from_str(&s) {
            Ok(m) => m,
            Err(e) => {
                v.push(Violation::Malformed { file: "manifest.json".into(), message: e.to_string() });
                return done(v);
            }
        },
    };

    let instances = read_instances(&dir.join(&manifest.files.instances), &manifest.files.instances, &mut v);
    let probs = read_required(dir, &manifest.files.probs, &mut v);
    let features = read_required(dir, &manifest.files.features, &mut v);
    let Some(instances) = instances else { return done(v) };

    check_instances(&instances, &mut v);
    for inst in &instances {
        if let Some(label) = inst.gold_label {
            if label >= manifest.class_names.len() {
                v.push(Violation::GoldLabel { id: inst.id, label, n_classes: manifest.class_names.len() });
            }
        }
    }
    if let Some(p) = &probs {
        check_probs(p, instances.len(), manifest.class_names.len(), &manifest.files.probs, &mut v);
    }
    if let Some(f) = &features {
        check_features(f, instances.len(), manifest.d, &manifest.files.features, &mut v);
    }

    let activations = scan_activations(dir, &manifest, &instances, deep, &mut v);
    let (Some(probs), Some(features)) = (probs, features) else { return done(v) };
    if !v.is_empty() {
        return done(v);
    }
    Ok(ValidationReport {
        violations: v,
        dataset: Some(Dataset {
            name: manifest.name,
            instances,
            probs,
            features,
            activations,
            class_names: manifest.class_names,
            d_act: manifest.d_act,
            seed: manifest.seed,
        }),
    })
}

fn read_instances(path: &Path, file: &str, v: &mut Vec<Violation>) -> Option<Vec<Instance>> {
    let Ok(handle) = fs::File::open(path) else {
        v.push(Violation::MissingFile(file.into()));
        return None;
    };
    let mut out = Vec::new();
    let mut ok = true;
    for (lineno, line) in BufReader::new(handle).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                v.push(Violation::Malformed { file: file.into(), message: format!("line {}: {e}", lineno + 1) });
                return None;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Instance>(&line) {
            Ok(inst) => out.push(inst.with_derived_tokens()),
            Err(e) => {
                ok = false;
                v.push(Violation::Malformed { file: file.into(), message: format!("line {}: {e}", lineno + 1) });
            }
        }
    }
    ok.then_some(out)
}

fn read_required(dir: &Path, file: &str, v: &mut Vec<Violation>) -> Option<Matrix<f32>> {
    let path = dir.join(file);
    let Ok(bytes) = fs::read(&path) else {
        v.push(Violation::MissingFile(file.into()));
        return None;
    };
    match codec::read_matrix(&bytes) {
        Ok(m) => Some(m),
        Err(e) => {
            v.push(Violation::Malformed { file: file.into(), message: e.to_string() });
            None
        }
    }
}

fn check_instances(instances: &[Instance], v: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    for inst in instances {
        if !seen.insert(inst.id) {
            v.push(Violation::DuplicateId(inst.id));
        }
        if inst.text.is_empty() {
            v.push(Violation::EmptyText(inst.id));
        }
    }
}

fn check_probs(probs: &Matrix<f32>, n: usize, n_classes: usize, file: &str, v: &mut Vec<Violation>) {
    if probs.rows() != n {
        v.push(Violation::RowCount { file: file.into(), found: probs.rows(), expected: n });
    }
    if probs.cols() != n_classes {
        v.push(Violation::ColCount { file: file.into(), found: probs.cols(), expected: n_classes });
    }
    for (row, r) in probs.row_iter().enumerate() {
        if let Some(col) = r.iter().position(|p| !p.is_finite()) {
            v.push(Violation::NonFinite { file: file.into(), row, col });
            continue;
        }
        if let Some(&value) = r.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
            v.push(Violation::ProbRange { row, value });
        }
        let sum: f64 = r.iter().map(|&p| p as f64).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            v.push(Violation::ProbSum { row, sum: r.iter().sum() });
        }
    }
}

fn check_features(features: &Matrix<f32>, n: usize, d: usize, file: &str, v: &mut Vec<Violation>) {
    if features.rows() != n {
        v.push(Violation::RowCount { file: file.into(), found: features.rows(), expected: n });
    }
    if features.cols() != d {
        v.push(Violation::ColCount { file: file.into(), found: features.cols(), expected: d });
    }
    if let Some((row, col)) = features.first_non_finite() {
        v.push(Violation::NonFinite { file: file.into(), row, col });
    }
}

fn check_activation_shape(
    id: u64,
    rows: usize,
    cols: usize,
    d_act: usize,
    tokens: &HashMap<u64, usize>,
    v: &mut Vec<Violation>,
) {
    if rows != d_act {
        v.push(Violation::ActivationRows { id, rows, expected: d_act });
    }
    match tokens.get(&id) {
        Some(&n) if n != cols => v.push(Violation::ActivationTokens { id, cols, tokens: n }),
        Some(_) => {}
        None => v.push(Violation::OrphanActivation(format!("{id}.dlmx"))),
    }
}

fn scan_activations(
    dir: &Path,
    manifest: &Manifest,
    instances: &[Instance],
    deep: bool,
    v: &mut Vec<Violation>,
) -> Activations {
    let mut acts = Activations::default();
    let act_dir = dir.join(&manifest.files.activations);
    let Ok(entries) = fs::read_dir(&act_dir) else { return acts };
    let tokens: HashMap<u64, usize> = instances.iter().map(|i| (i.id, i.tokens.len())).collect();
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let fname = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let file = format!("{}/{}", manifest.files.activations, fname);
        let Some(id) = fname.strip_suffix(".dlmx").and_then(|s| s.parse::<u64>().ok()) else {
            v.push(Violation::OrphanActivation(file));
            continue;
        };
        let header = match read_header(&path) {
            Ok(h) => h,
            Err(message) => {
                v.push(Violation::Malformed { file, message });
                continue;
            }
        };
        let (rows, cols) = header;
        if deep {
            match codec::read_matrix_file(&path) {
                Ok(m) => {
                    if let Some((row, col)) = m.first_non_finite() {
                        v.push(Violation::NonFinite { file: file.clone(), row, col });
                    }
                }
                Err(e) => {
                    v.push(Violation::Malformed { file, message: e.to_string() });
                    continue;
                }
            }
        }
        check_activation_shape(id, rows, cols, manifest.d_act, &tokens, v);
        acts.entries.insert(id, ActivationSource::File { path, rows, cols });
    }
    acts
}

/// Reads and checks a DLMX header plus the file length, without the payload.
fn read_header(path: &Path) -> Result<(usize, usize), String> {
    use std::io::Read;
    let mut f = fs::File::open(path).map_err(|e| e.to_string())?;
    let len = f.metadata().map_err(|e| e.to_string())?.len() as usize;
    let mut header = [0u8; HEADER_LEN];
    f.read_exact(&mut header).map_err(|_| CodecError::Truncated(len).to_string())?;
    if &header[..4] != MAGIC {
        return Err(CodecError::BadMagic(header[..4].try_into().expect("4 bytes")).to_string());
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    let cols = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes"));
    let expected = rows as usize * cols as usize * 4;
    if len - HEADER_LEN != expected {
        return Err(CodecError::SizeMismatch { rows, cols, expected, found: len - HEADER_LEN }.to_string());
    }
    if rows == 0 || cols == 0 {
        return Err(format!("matrix must have positive dimensions, got {rows}x{cols}"));
    }
    Ok((rows as usize, cols as usize))
}
