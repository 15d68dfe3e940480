//! Dataset interchange: a JSON manifest plus CSV trajectory files.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly, so write → read → write is byte-identical.
//!
//! Layout of a dataset directory:
//!
//! - `manifest.json`: dimensions, generation spec, model, costs, file list.
//! - `traj_XXXX.csv`: header `k,x_0..x_{n−1},u_0..u_{m−1}`; the row `k = T`
//!   has empty input fields.
//! - `optimal_controls.csv`: header `traj,k,u_0..u_{m−1}`.
//! - `noise.csv`: header `traj,k,w_0..w_{n−1}`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::Deserializer;
use serde::ser::{Error as _, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::dynamics::{Convention, FoltiModel, Trajectory};
use crate::error::{FoctlError, Result};
use crate::forge::{AlphaMode, Dataset, GenSpec, NoiseFamily, Provenance, StabilityMode};
use crate::gl::FracOrder;
use crate::lqr::CostSpec;

pub const MANIFEST: &str = "manifest.json";
pub const OPTIMAL_CONTROLS: &str = "optimal_controls.csv";
pub const NOISE: &str = "noise.csv";
pub const FORMAT_TAG: &str = "foctl-dataset";

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `f64` that serializes to JSON with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("non-finite value {} in output", self.0)));
        }
        let raw = RawValue::from_string(fmt_f64(self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sig17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Sig17)
    }
}

pub fn vec17(v: &[f64]) -> Vec<Sig17> {
    v.iter().copied().map(Sig17).collect()
}

pub fn dvec17(v: &DVector<f64>) -> Vec<Sig17> {
    vec17(v.as_slice())
}

/// Row-major nested arrays.
pub fn rows17(m: &DMatrix<f64>) -> Vec<Vec<Sig17>> {
    m.row_iter().map(|r| r.iter().copied().map(Sig17).collect()).collect()
}

fn unvec(v: &[Sig17]) -> Vec<f64> {
    v.iter().map(|x| x.0).collect()
}

fn unrows(rows: &[Vec<Sig17>], what: &str) -> Result<DMatrix<f64>> {
    let plain: Vec<Vec<f64>> = rows.iter().map(|r| unvec(r)).collect();
    crate::linalg::from_rows(&plain).map_err(|e| FoctlError::Format(format!("{what}: {e}")))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub a: Vec<Vec<Sig17>>,
    pub b: Vec<Vec<Sig17>>,
    pub alpha: Vec<Sig17>,
    #[serde(default)]
    pub convention: Convention,
}

impl ModelFile {
    pub fn from_model(model: &FoltiModel) -> Self {
        ModelFile {
            a: rows17(model.a()),
            b: rows17(model.b()),
            alpha: vec17(model.alpha().as_slice()),
            convention: model.convention(),
        }
    }

    pub fn to_model(&self) -> Result<FoltiModel> {
        let a = unrows(&self.a, "model.a")?;
        let b = unrows(&self.b, "model.b")?;
        let alpha = FracOrder::new(unvec(&self.alpha))?;
        Ok(FoltiModel::new(a, b, alpha)?.with_convention(self.convention))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostFile {
    pub q: Vec<Vec<Sig17>>,
    pub r: Vec<Vec<Sig17>>,
    /// Defaults to `q` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_f: Option<Vec<Vec<Sig17>>>,
}

impl CostFile {
    pub fn from_cost(cost: &CostSpec) -> Self {
        CostFile {
            q: rows17(cost.q()),
            r: rows17(cost.r()),
            q_f: Some(rows17(cost.q_f())),
        }
    }

    pub fn to_cost(&self) -> Result<CostSpec> {
        let q = unrows(&self.q, "cost.q")?;
        let r = unrows(&self.r, "cost.r")?;
        let q_f = match &self.q_f {
            Some(rows) => unrows(rows, "cost.q_f")?,
            None => q.clone(),
        };
        CostSpec::new(q, r, q_f)
    }
}

pub fn read_model(path: &Path) -> Result<FoltiModel> {
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    file.to_model()
}

pub fn write_model(model: &FoltiModel, path: &Path) -> Result<()> {
    fs::write(path, to_json(&ModelFile::from_model(model))?)?;
    Ok(())
}

pub fn read_cost(path: &Path) -> Result<CostSpec> {
    let file: CostFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    file.to_cost()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AlphaModeFile {
    Fixed(Vec<Sig17>),
    Commensurate,
    Componentwise,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecFile {
    n: usize,
    m: usize,
    horizon: usize,
    n_trajectories: usize,
    alpha_mode: AlphaModeFile,
    noise_family: NoiseFamily,
    noise_scale: Sig17,
    seed: u64,
    stability: StabilityMode,
    convention: Convention,
}

impl SpecFile {
    fn from_spec(s: &GenSpec) -> Self {
        SpecFile {
            n: s.n,
            m: s.m,
            horizon: s.horizon,
            n_trajectories: s.n_trajectories,
            alpha_mode: match &s.alpha_mode {
                AlphaMode::Fixed(a) => AlphaModeFile::Fixed(vec17(a)),
                AlphaMode::Commensurate => AlphaModeFile::Commensurate,
                AlphaMode::Componentwise => AlphaModeFile::Componentwise,
            },
            noise_family: s.noise_family,
            noise_scale: Sig17(s.noise_scale),
            seed: s.seed,
            stability: s.stability,
            convention: s.convention,
        }
    }

    fn to_spec(&self) -> GenSpec {
        GenSpec {
            n: self.n,
            m: self.m,
            horizon: self.horizon,
            n_trajectories: self.n_trajectories,
            alpha_mode: match &self.alpha_mode {
                AlphaModeFile::Fixed(a) => AlphaMode::Fixed(unvec(a)),
                AlphaModeFile::Commensurate => AlphaMode::Commensurate,
                AlphaModeFile::Componentwise => AlphaMode::Componentwise,
            },
            noise_family: self.noise_family,
            noise_scale: self.noise_scale.0,
            seed: self.seed,
            stability: self.stability,
            convention: self.convention,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Dims {
    n: usize,
    m: usize,
    horizon: usize,
    n_trajectories: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Files {
    trajectories: Vec<String>,
    optimal_controls: String,
    noise: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: String,
    dims: Dims,
    spec: SpecFile,
    r_ridge: Sig17,
    sinc_truncation: Sig17,
    model: ModelFile,
    costs: Vec<CostFile>,
    optimal_costs: Vec<Sig17>,
    files: Files,
}

pub fn trajectory_file_name(index: usize) -> String {
    format!("traj_{index:04}.csv")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_path(path)?)
}

fn header(prefix: &[&str], groups: &[(&str, usize)]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for (name, len) in groups {
        h.extend((0..*len).map(|i| format!("{name}_{i}")));
    }
    h
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let n = traj.state_dim();
    let m = traj.input_dim().unwrap_or(0);
    let mut w = csv_writer(path)?;
    w.write_record(header(&["k"], &[("x", n), ("u", m)]))?;
    for (k, x) in traj.states.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(x.iter().map(|&v| fmt_f64(v)));
        match traj.inputs.get(k) {
            Some(u) => rec.extend(u.iter().map(|&v| fmt_f64(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), m)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, path: &Path) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| FoctlError::Format(format!("{}: bad number `{field}`", path.display())))
}

fn read_records(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let head = r.headers()?.clone();
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((head, rows))
}

fn count_prefix(head: &csv::StringRecord, prefix: &str) -> usize {
    head.iter().filter(|h| h.starts_with(prefix)).count()
}

/// Reads a trajectory CSV; `n` and `m` come from the header.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let (head, rows) = read_records(path)?;
    let n = count_prefix(&head, "x_");
    let m = count_prefix(&head, "u_");
    if head.len() != 1 + n + m || head.get(0) != Some("k") {
        return Err(FoctlError::Format(format!("{}: unexpected header", path.display())));
    }
    let mut states = Vec::with_capacity(rows.len());
    let mut inputs = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if parse_f64(&row[0], path)? as usize != k {
            return Err(FoctlError::Format(format!("{}: rows out of order at {k}", path.display())));
        }
        let x: Vec<f64> = (1..=n).map(|c| parse_f64(&row[c], path)).collect::<Result<_>>()?;
        states.push(DVector::from_vec(x));
        if k + 1 < rows.len() {
            let u: Vec<f64> = (1 + n..1 + n + m).map(|c| parse_f64(&row[c], path)).collect::<Result<_>>()?;
            inputs.push(DVector::from_vec(u));
        }
    }
    Trajectory::new(states, inputs)
}

fn write_indexed(path: &Path, symbol: &str, width: usize, seqs: &[Vec<DVector<f64>>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header(&["traj", "k"], &[(symbol, width)]))?;
    for (i, seq) in seqs.iter().enumerate() {
        for (k, v) in seq.iter().enumerate() {
            let mut rec = vec![i.to_string(), k.to_string()];
            rec.extend(v.iter().map(|&x| fmt_f64(x)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_indexed(path: &Path, count: usize) -> Result<Vec<Vec<DVector<f64>>>> {
    let (head, rows) = read_records(path)?;
    let width = head.len().saturating_sub(2);
    let mut out = vec![Vec::new(); count];
    for row in &rows {
        let i: usize = row[0]
            .parse()
            .map_err(|_| FoctlError::Format(format!("{}: bad index", path.display())))?;
        let seq = out
            .get_mut(i)
            .ok_or_else(|| FoctlError::Format(format!("{}: index {i} out of range", path.display())))?;
        let v: Vec<f64> = (2..2 + width).map(|c| parse_f64(&row[c], path)).collect::<Result<_>>()?;
        seq.push(DVector::from_vec(v));
    }
    Ok(out)
}

/// Writes the dataset into `dir` (created if missing) and returns the
/// manifest path.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let spec = &ds.provenance.spec;
    let names: Vec<String> = (0..ds.trajectories.len()).map(trajectory_file_name).collect();
    for (traj, name) in ds.trajectories.iter().zip(&names) {
        write_trajectory_csv(traj, &dir.join(name))?;
    }
    write_indexed(&dir.join(OPTIMAL_CONTROLS), "u", ds.model.m(), &ds.optimal_controls)?;
    write_indexed(&dir.join(NOISE), "w", ds.model.n(), &ds.noise)?;

    let manifest = Manifest {
        format: FORMAT_TAG.to_string(),
        version: ds.provenance.version.clone(),
        dims: Dims {
            n: ds.model.n(),
            m: ds.model.m(),
            horizon: spec.horizon,
            n_trajectories: ds.trajectories.len(),
        },
        spec: SpecFile::from_spec(spec),
        r_ridge: Sig17(ds.provenance.r_ridge),
        sinc_truncation: Sig17(ds.provenance.sinc_truncation),
        model: ModelFile::from_model(&ds.model),
        costs: ds.costs.iter().map(CostFile::from_cost).collect(),
        optimal_costs: vec17(&ds.optimal_costs),
        files: Files {
            trajectories: names,
            optimal_controls: OPTIMAL_CONTROLS.to_string(),
            noise: NOISE.to_string(),
        },
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, to_json(&manifest)?)?;
    Ok(path)
}

/// Reads a dataset from its manifest path or its directory.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    if manifest.format != FORMAT_TAG {
        return Err(FoctlError::Format(format!("unknown format tag `{}`", manifest.format)));
    }
    let count = manifest.dims.n_trajectories;
    if manifest.files.trajectories.len() != count || manifest.costs.len() != count || manifest.optimal_costs.len() != count {
        return Err(FoctlError::Format("manifest lists do not match n_trajectories".into()));
    }
    let model = manifest.model.to_model()?;
    let trajectories = manifest
        .files
        .trajectories
        .iter()
        .map(|f| read_trajectory_csv(&dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    for t in &trajectories {
        if t.state_dim() != model.n() || t.input_dim().is_some_and(|m| m != model.m()) {
            return Err(FoctlError::Format("trajectory dimensions do not match the model".into()));
        }
    }
    let costs = manifest.costs.iter().map(CostFile::to_cost).collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        model,
        trajectories,
        costs,
        optimal_controls: read_indexed(&dir.join(&manifest.files.optimal_controls), count)?,
        optimal_costs: unvec(&manifest.optimal_costs),
        noise: read_indexed(&dir.join(&manifest.files.noise), count)?,
        provenance: Provenance {
            spec: manifest.spec.to_spec(),
            version: manifest.version,
            r_ridge: manifest.r_ridge.0,
            sinc_truncation: manifest.sinc_truncation.0,
        },
    })
}
