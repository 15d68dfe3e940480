//! Command implementations. Each command resolves its effective config,
//! writes its results and `provenance.json` into the output directory, and
//! returns a one-line summary for standard output.

use std::fs;
use std::path::{Path, PathBuf};

use foctl::baseline;
use foctl::complexity::{monte_carlo_gap, trace_kb_closed, BoundInputs};
use foctl::dynamics::{closed_form_state, propagators, simulate_with, Convention, FoltiModel, SimOptions, Trajectory};
use foctl::error::{FoctlError, Result};
use foctl::forge::{self, AlphaMode, GenSpec, NoiseFamily, StabilityMode};
use foctl::gl::FracOrder;
use foctl::io::{self, dvec17, fmt_f64, rows17, to_json, Sig17};
use foctl::linalg::{max_abs_diff, parse_matrix};
use foctl::lqr::{build_lagrange, optimal_control, solve_lagrange, ControlSolution, CostSpec};
use foctl::rng::derive;
use foctl::sysid::{estimate, theta_covariance, build_regression, RegressionData};
use foctl::toeplitz::{SolveMethod, SolveOptions};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{Format, MethodArg, SolverArg};
use crate::config::Resolved;

const STREAM_INPUTS: u64 = 10;
const STREAM_NOISE: u64 = 11;
const STREAM_MODEL: u64 = 20;
const STREAM_COST: u64 = 21;
const STREAM_X0: u64 = 22;

fn parse_vec(text: &str, field: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| FoctlError::config(field, format!("`{x}`: {e}")))
        })
        .collect()
}

fn parse_mat(text: &str, field: &str) -> Result<DMatrix<f64>> {
    parse_matrix(text).map_err(|e| FoctlError::config(field, e))
}

fn parse_list(text: &str, field: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| FoctlError::config(field, format!("`{x}`: {e}")))
        })
        .collect()
}

fn parse_convention(text: &str, field: &str) -> Result<Convention> {
    match text {
        "difference" => Ok(Convention::Difference),
        "reflected-order" | "reflected" => Ok(Convention::ReflectedOrder),
        other => Err(FoctlError::config(field, format!("unknown convention `{other}`"))),
    }
}

fn parse_stability(text: &str, field: &str) -> Result<StabilityMode> {
    match text {
        "spectral-radius" => Ok(StabilityMode::SpectralRadius),
        "memory-bounded" => Ok(StabilityMode::MemoryBounded),
        other => Err(FoctlError::config(field, format!("unknown stability mode `{other}`"))),
    }
}

fn field_err(field: &str) -> impl Fn(FoctlError) -> FoctlError + '_ {
    move |e| match e {
        FoctlError::Config { .. } | FoctlError::Io(_) => e,
        other => FoctlError::config(field, other.to_string()),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn write_provenance<T: Serialize>(run: &Resolved<T>) -> Result<()> {
    write_file(&run.runtime.out, "provenance.json", &to_json(&run.provenance())?)
}

fn solve_options(common: &crate::config::Common) -> SolveOptions {
    SolveOptions {
        method: match common.solver {
            SolverArg::Dense => SolveMethod::Dense,
            SolverArg::Iterative => SolveMethod::Iterative,
        },
        tol: common.tol,
        ..SolveOptions::default()
    }
}

/// Model fields shared by `simulate`, `control` and `complexity`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArgs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

impl ModelArgs {
    fn is_given(&self) -> bool {
        self.model.is_some() || self.a.is_some() || self.b.is_some() || self.alpha.is_some()
    }

    fn load(&self) -> Result<FoltiModel> {
        let model = match (&self.model, &self.a, &self.b, &self.alpha) {
            (Some(path), None, None, None) => io::read_model(path)?,
            (None, Some(a), Some(b), Some(alpha)) => {
                let alpha = FracOrder::new(parse_vec(alpha, "alpha")?).map_err(field_err("alpha"))?;
                FoltiModel::new(parse_mat(a, "a")?, parse_mat(b, "b")?, alpha).map_err(field_err("model"))?
            }
            _ => {
                return Err(FoctlError::config(
                    "model",
                    "give either --model FILE or all of --a, --b and --alpha",
                ))
            }
        };
        Ok(match &self.convention {
            Some(c) => model.with_convention(parse_convention(c, "convention")?),
            None => model,
        })
    }
}

fn x0_or_ones(text: &Option<String>, n: usize) -> Result<DVector<f64>> {
    let x0 = match text {
        Some(t) => DVector::from_vec(parse_vec(t, "x0")?),
        None => DVector::from_element(n, 1.0),
    };
    if x0.len() != n {
        return Err(FoctlError::config("x0", format!("expected {n} entries, got {}", x0.len())));
    }
    Ok(x0)
}

fn positive(value: usize, field: &str) -> Result<usize> {
    if value == 0 {
        return Err(FoctlError::config(field, "must be positive"));
    }
    Ok(value)
}

fn matrix_csv(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------- gen

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenArgs {
    pub n: usize,
    pub m: usize,
    #[serde(alias = "T")]
    pub horizon: usize,
    pub traj: usize,
    pub noise: String,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    pub alpha_mode: String,
    pub stability: String,
    pub convention: String,
}

impl Default for GenArgs {
    fn default() -> Self {
        GenArgs {
            n: 2,
            m: 2,
            horizon: 64,
            traj: 100,
            noise: "gaussian".into(),
            sigma: 0.01,
            alpha: None,
            alpha_mode: "commensurate".into(),
            stability: "spectral-radius".into(),
            convention: "difference".into(),
        }
    }
}

impl GenArgs {
    pub fn to_spec(&self, seed: u64) -> Result<GenSpec> {
        let alpha_mode = match (&self.alpha, self.alpha_mode.as_str()) {
            (Some(a), _) => AlphaMode::Fixed(parse_vec(a, "gen.alpha")?),
            (None, "commensurate") => AlphaMode::Commensurate,
            (None, "componentwise") => AlphaMode::Componentwise,
            (None, other) => return Err(FoctlError::config("gen.alpha_mode", format!("unknown mode `{other}`"))),
        };
        let spec = GenSpec {
            n: self.n,
            m: self.m,
            horizon: self.horizon,
            n_trajectories: self.traj,
            alpha_mode,
            noise_family: self
                .noise
                .parse::<NoiseFamily>()
                .map_err(|e| FoctlError::config("gen.noise", e.to_string()))?,
            noise_scale: self.sigma,
            seed,
            stability: parse_stability(&self.stability, "gen.stability")?,
            convention: parse_convention(&self.convention, "gen.convention")?,
        };
        spec.validate().map_err(|e| match e {
            FoctlError::Config { field, message } => FoctlError::config(format!("gen.{field}"), message),
            other => other,
        })?;
        Ok(spec)
    }
}

pub fn gen(run: &Resolved<GenArgs>) -> Result<Value> {
    let spec = run.args.to_spec(run.common.seed)?;
    let ds = forge::generate(&spec)?;
    io::write_dataset(&ds, &run.runtime.out)?;
    write_provenance(run)?;
    Ok(json!({
        "command": "gen",
        "trajectories": ds.trajectories.len(),
        "manifest": io::MANIFEST,
        "config_hash": run.provenance().config_hash,
    }))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    #[serde(flatten)]
    pub model: ModelArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<String>,
    #[serde(alias = "T")]
    pub horizon: usize,
    pub inputs: String,
    pub noise: String,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        SimulateArgs {
            model: ModelArgs::default(),
            x0: None,
            horizon: 10,
            inputs: "zero".into(),
            noise: "gaussian".into(),
            sigma: 0.0,
            memory: None,
        }
    }
}

fn read_inputs_csv(path: &Path, m: usize, horizon: usize) -> Result<Vec<DVector<f64>>> {
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(FoctlError::from)?;
    let head = r.headers()?.clone();
    let cols: Vec<usize> = (0..m)
        .map(|i| {
            head.iter()
                .position(|h| h == format!("u_{i}"))
                .ok_or_else(|| FoctlError::config("simulate.inputs", format!("missing column u_{i}")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if out.len() == horizon {
            break;
        }
        let u: Vec<f64> = cols
            .iter()
            .map(|&c| {
                rec[c]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| FoctlError::config("simulate.inputs", e.to_string()))
            })
            .collect::<Result<_>>()?;
        out.push(DVector::from_vec(u));
    }
    if out.len() < horizon {
        return Err(FoctlError::config(
            "simulate.inputs",
            format!("file has {} input rows, horizon needs {horizon}", out.len()),
        ));
    }
    Ok(out)
}

fn trajectory_json(traj: &Trajectory) -> Value {
    json!({
        "states": traj.states.iter().map(dvec17).collect::<Vec<_>>(),
        "inputs": traj.inputs.iter().map(dvec17).collect::<Vec<_>>(),
    })
}

pub fn simulate(run: &Resolved<SimulateArgs>) -> Result<Value> {
    let a = &run.args;
    let model = a.model.load()?;
    let (n, m, t) = (model.n(), model.m(), a.horizon);
    let x0 = x0_or_ones(&a.x0, n)?;
    let inputs = match a.inputs.as_str() {
        "zero" => vec![DVector::zeros(m); t],
        "random" => {
            let mut rng = derive(run.common.seed, &[STREAM_INPUTS]);
            (0..t)
                .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
                .collect()
        }
        path => read_inputs_csv(Path::new(path), m, t)?,
    };
    let family = a
        .noise
        .parse::<NoiseFamily>()
        .map_err(|e| FoctlError::config("simulate.noise", e.to_string()))?;
    let noise = forge::sample_noise(family, a.sigma, t, n, &mut derive(run.common.seed, &[STREAM_NOISE]))
        .map_err(field_err("simulate.sigma"))?;
    let traj = simulate_with(&model, &x0, &inputs, Some(&noise), SimOptions { memory: a.memory })?;

    let closed_form_gap = if a.memory.is_none() && a.sigma == 0.0 {
        let props = propagators(&model, t);
        let cf = (0..=t)
            .map(|k| closed_form_state(&props, &model, &x0, &inputs, k))
            .collect::<Result<Vec<_>>>()?;
        Some(max_abs_diff(&cf, &traj.states))
    } else {
        None
    };

    let out = &run.runtime.out;
    let file = match run.common.format {
        Format::Json => {
            let mut v = trajectory_json(&traj);
            v["closed_form_max_diff"] = serde_json::to_value(closed_form_gap.map(Sig17))?;
            write_file(out, "trajectory.json", &to_json(&v)?)?;
            "trajectory.json"
        }
        Format::Csv => {
            fs::create_dir_all(out)?;
            io::write_trajectory_csv(&traj, &out.join("trajectory.csv"))?;
            "trajectory.csv"
        }
    };
    write_provenance(run)?;
    Ok(json!({
        "command": "simulate",
        "horizon": t,
        "output": file,
        "final_state": dvec17(&traj.states[t]),
        "closed_form_max_diff": closed_form_gap.map(Sig17),
    }))
}

// ---------------------------------------------------------------- control

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlArgs {
    #[serde(flatten)]
    pub model: ModelArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qf: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<String>,
    #[serde(alias = "T")]
    pub horizon: usize,
}

impl Default for ControlArgs {
    fn default() -> Self {
        ControlArgs {
            model: ModelArgs::default(),
            cost: None,
            q: None,
            r: None,
            qf: None,
            x0: None,
            horizon: 10,
        }
    }
}

fn load_cost(path: &Option<PathBuf>, q: &Option<String>, r: &Option<String>, qf: &Option<String>, n: usize, m: usize) -> Result<CostSpec> {
    if let Some(p) = path {
        if q.is_some() || r.is_some() || qf.is_some() {
            return Err(FoctlError::config("cost", "give either --cost FILE or inline --q/--r/--qf"));
        }
        return io::read_cost(p);
    }
    let q = match q {
        Some(t) => parse_mat(t, "q")?,
        None => DMatrix::identity(n, n),
    };
    let r = match r {
        Some(t) => parse_mat(t, "r")?,
        None => DMatrix::identity(m, m),
    };
    let q_f = match qf {
        Some(t) => parse_mat(t, "qf")?,
        None => q.clone(),
    };
    CostSpec::new(q, r, q_f).map_err(field_err("cost"))
}

fn method_name(s: &ControlSolution) -> &'static str {
    match s.method {
        foctl::Method::LeastSquares => "least-squares",
        foctl::Method::Lagrange => "lagrange",
        foctl::Method::RiccatiOracle => "riccati-oracle",
    }
}

pub fn control(run: &Resolved<ControlArgs>) -> Result<Value> {
    let a = &run.args;
    let model = a.model.load()?;
    let (n, m, t) = (model.n(), model.m(), positive(a.horizon, "control.horizon")?);
    let cost = load_cost(&a.cost, &a.q, &a.r, &a.qf, n, m)?;
    cost.check_model(&model).map_err(field_err("cost"))?;
    let x0 = x0_or_ones(&a.x0, n)?;

    let mut solutions = Vec::new();
    if matches!(run.common.method, MethodArg::Ls | MethodArg::Both) {
        solutions.push(optimal_control(&model, &cost, &x0, t)?);
    }
    if matches!(run.common.method, MethodArg::Lagrange | MethodArg::Both) {
        let props = propagators(&model, t);
        let lsys = build_lagrange(&model, &props, &cost, t)?;
        solutions.push(solve_lagrange(&lsys, &model, &x0, solve_options(&run.common))?);
    }
    let discrepancy = (solutions.len() == 2).then(|| max_abs_diff(&solutions[0].u_seq, &solutions[1].u_seq));
    let trajs = solutions
        .iter()
        .map(|s| foctl::dynamics::simulate(&model, &x0, &s.u_seq, None))
        .collect::<Result<Vec<_>>>()?;

    let out = &run.runtime.out;
    let file = match run.common.format {
        Format::Json => {
            let sols: Vec<Value> = solutions
                .iter()
                .zip(&trajs)
                .map(|(s, tr)| {
                    json!({
                        "method": method_name(s),
                        "cost": Sig17(s.cost),
                        "u": s.u_seq.iter().map(dvec17).collect::<Vec<_>>(),
                        "states": tr.states.iter().map(dvec17).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let v = json!({
                "horizon": t,
                "solutions": sols,
                "discrepancy_inf": discrepancy.map(Sig17),
            });
            write_file(out, "solution.json", &to_json(&v)?)?;
            "solution.json"
        }
        Format::Csv => {
            let mut head = vec!["method".to_string(), "k".into(), "cost".into()];
            head.extend((0..n).map(|i| format!("x_{i}")));
            head.extend((0..m).map(|i| format!("u_{i}")));
            let rows = solutions.iter().zip(&trajs).flat_map(|(s, tr)| {
                (0..=t).map(move |k| {
                    let mut r = vec![method_name(s).to_string(), k.to_string(), fmt_f64(s.cost)];
                    r.extend(tr.states[k].iter().map(|&v| fmt_f64(v)));
                    match s.u_seq.get(k) {
                        Some(u) => r.extend(u.iter().map(|&v| fmt_f64(v))),
                        None => r.extend(std::iter::repeat_n(String::new(), m)),
                    }
                    r
                })
            });
            write_file(out, "solution.csv", &matrix_csv(&head.join(","), rows))?;
            "solution.csv"
        }
    };
    write_provenance(run)?;
    Ok(json!({
        "command": "control",
        "output": file,
        "costs": solutions.iter().map(|s| json!({"method": method_name(s), "cost": Sig17(s.cost)})).collect::<Vec<_>>(),
        "u0": dvec17(&solutions[0].u_seq[0]),
        "discrepancy_inf": discrepancy.map(Sig17),
    }))
}

// ---------------------------------------------------------------- identify

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyArgs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_diag: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_model: Option<PathBuf>,
    pub truth_from_dataset: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
}

fn known_diag(text: &Option<String>, n: usize, field: &str) -> Result<DVector<f64>> {
    let text = text
        .as_ref()
        .ok_or_else(|| FoctlError::config(field, "the known diagonal of A is required"))?;
    let d = parse_vec(text, field)?;
    if d.len() != n {
        return Err(FoctlError::config(field, format!("expected {n} entries, got {}", d.len())));
    }
    Ok(DVector::from_vec(d))
}

fn load_dataset(path: &Option<PathBuf>, field: &str) -> Result<foctl::forge::Dataset> {
    let path = path.as_ref().ok_or_else(|| FoctlError::config(field, "a dataset path is required"))?;
    io::read_dataset(path)
}

pub fn identify(run: &Resolved<IdentifyArgs>) -> Result<Value> {
    let a = &run.args;
    let ds = load_dataset(&a.data, "identify.data")?;
    if ds.trajectories.is_empty() {
        return Err(FoctlError::config("identify.data", "dataset contains no trajectories"));
    }
    let (n, m) = (ds.model.n(), ds.model.m());
    let diag = known_diag(&a.known_diag, n, "identify.known_diag")?;
    let data = RegressionData::from_trajectories(&ds.trajectories, diag)?;
    let est = estimate(&data)?;

    let predicted_b_error = match a.noise_std {
        Some(s) if s >= 0.0 && s.is_finite() => {
            let (xi, _) = build_regression(&data);
            let cov = theta_covariance(&xi, &(DMatrix::identity(n, n) * (s * s)), 1)?;
            let off = n * n;
            Some((off..off + n * m).map(|i| cov[(i, i)]).sum::<f64>().sqrt())
        }
        Some(_) => return Err(FoctlError::config("identify.noise_std", "must be finite and non-negative")),
        None => None,
    };

    let truth = match (&a.true_model, a.truth_from_dataset) {
        (Some(p), false) => Some(io::read_model(p)?),
        (None, true) => Some(ds.model.clone()),
        (None, false) => None,
        (Some(_), true) => {
            return Err(FoctlError::config("identify.true_model", "conflicts with truth_from_dataset"))
        }
    };
    let errors = truth.as_ref().map(|t| {
        let alpha = DVector::from_column_slice(t.alpha().as_slice());
        json!({
            "b_fro": Sig17((&est.b_hat - t.b()).norm()),
            "alpha_l2": Sig17((&est.alpha_hat - alpha).norm()),
            "a_alpha_fro": Sig17((&est.a_alpha_hat - t.one_step_matrix()).norm()),
        })
    });

    let out = &run.runtime.out;
    let file = match run.common.format {
        Format::Json => {
            let v = json!({
                "samples": data.p(),
                "a_alpha_hat": rows17(&est.a_alpha_hat),
                "b_hat": rows17(&est.b_hat),
                "alpha_hat": dvec17(&est.alpha_hat),
                "residual_norm": Sig17(est.residual_norm),
                "predicted_b_error": predicted_b_error.map(Sig17),
                "errors": errors,
            });
            write_file(out, "identify.json", &to_json(&v)?)?;
            "identify.json"
        }
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = Vec::new();
            let mut push_mat = |name: &str, mat: &DMatrix<f64>| {
                for i in 0..mat.nrows() {
                    for j in 0..mat.ncols() {
                        rows.push(vec![name.into(), i.to_string(), j.to_string(), fmt_f64(mat[(i, j)])]);
                    }
                }
            };
            push_mat("a_alpha_hat", &est.a_alpha_hat);
            push_mat("b_hat", &est.b_hat);
            push_mat("alpha_hat", &DMatrix::from_column_slice(n, 1, est.alpha_hat.as_slice()));
            rows.push(vec!["residual_norm".into(), "0".into(), "0".into(), fmt_f64(est.residual_norm)]);
            if let Some(p) = predicted_b_error {
                rows.push(vec!["predicted_b_error".into(), "0".into(), "0".into(), fmt_f64(p)]);
            }
            if let Some(e) = &errors {
                for key in ["b_fro", "alpha_l2", "a_alpha_fro"] {
                    let v = e[key].as_f64().unwrap_or(f64::NAN);
                    rows.push(vec![key.into(), "0".into(), "0".into(), fmt_f64(v)]);
                }
            }
            write_file(out, "identify.csv", &matrix_csv("quantity,i,j,value", rows.into_iter()))?;
            "identify.csv"
        }
    };
    write_provenance(run)?;
    Ok(json!({
        "command": "identify",
        "output": file,
        "samples": data.p(),
        "alpha_hat": dvec17(&est.alpha_hat),
        "errors": errors,
        "predicted_b_error": predicted_b_error.map(Sig17),
    }))
}

// ---------------------------------------------------------------- complexity

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityArgs {
    #[serde(flatten)]
    pub model: ModelArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<PathBuf>,
    pub n: usize,
    pub m: usize,
    #[serde(alias = "T")]
    pub horizon: usize,
    pub p: usize,
    pub sigma: f64,
    pub n_values: String,
    pub replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<String>,
}

impl Default for ComplexityArgs {
    fn default() -> Self {
        ComplexityArgs {
            model: ModelArgs::default(),
            cost: None,
            n: 2,
            m: 2,
            horizon: 10,
            p: 10,
            sigma: 0.1,
            n_values: "10,20,50,100,200,500,1000".into(),
            replicates: 200,
            x0: None,
        }
    }
}

/// Default experiment instance: a memory-bounded random model, a random cost
/// and a standard normal `x_0`, all drawn from the run seed.
pub fn complexity_instance(a: &ComplexityArgs, seed: u64) -> Result<(FoltiModel, CostSpec, DVector<f64>)> {
    let model = if a.model.is_given() {
        a.model.load()?
    } else {
        let spec = GenSpec {
            n: positive(a.n, "complexity.n")?,
            m: positive(a.m, "complexity.m")?,
            horizon: 1,
            n_trajectories: 0,
            alpha_mode: AlphaMode::Componentwise,
            stability: StabilityMode::MemoryBounded,
            seed,
            ..GenSpec::default()
        };
        forge::random_model(&spec, &mut derive(seed, &[STREAM_MODEL]))?
    };
    let (n, m) = (model.n(), model.m());
    let cost = match &a.cost {
        Some(p) => io::read_cost(p)?,
        None => forge::random_cost(n, m, &mut derive(seed, &[STREAM_COST]))?,
    };
    let x0 = match &a.x0 {
        Some(_) => x0_or_ones(&a.x0, n)?,
        None => {
            let mut rng = derive(seed, &[STREAM_X0]);
            DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
        }
    };
    Ok((model, cost, x0))
}

pub fn complexity(run: &Resolved<ComplexityArgs>) -> Result<Value> {
    let a = &run.args;
    let n_values = parse_list(&a.n_values, "complexity.n_values")?;
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(FoctlError::config("complexity.n_values", "batch counts must be positive"));
    }
    positive(a.replicates, "complexity.replicates")?;
    positive(a.horizon, "complexity.horizon")?;
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(FoctlError::config("complexity.sigma", "must be finite and non-negative"));
    }
    let m_check = if a.model.is_given() { a.model.load()?.m() } else { a.m };
    trace_kb_closed(1, m_check, a.sigma, 1, a.p).map_err(|e| FoctlError::config("complexity.p", e.to_string()))?;

    let (model, cost, x0) = complexity_instance(a, run.common.seed)?;
    let inputs = BoundInputs::new(&model, &cost, &x0, a.horizon, a.sigma, a.p, 1)?;
    let report = monte_carlo_gap(&inputs, &n_values, a.replicates, run.common.seed)?;

    let out = &run.runtime.out;
    write_file(out, "complexity.json", &to_json(&report.to_serializable())?)?;
    write_file(out, "complexity.csv", &report.to_csv())?;
    write_file(out, "plot.csv", &report.plot_csv())?;
    write_provenance(run)?;
    Ok(json!({
        "command": "complexity",
        "loglog_slope": report.loglog_slope.map(Sig17),
        "bound_holds": report
            .empirical_gap
            .iter()
            .zip(&report.gap_std_error)
            .zip(&report.bound_ls)
            .all(|((g, s), b)| g - 2.0 * s <= *b),
        "failures": report.failures.iter().sum::<usize>(),
    }))
}

// ---------------------------------------------------------------- baseline

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineArgs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_diag: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<usize>,
    #[serde(alias = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

pub fn baseline_cmd(run: &Resolved<BaselineArgs>) -> Result<Value> {
    let a = &run.args;
    let ds = load_dataset(&a.data, "baseline.data")?;
    if ds.trajectories.len() < 2 {
        return Err(FoctlError::config("baseline.data", "needs at least two trajectories"));
    }
    let diag = known_diag(&a.known_diag, ds.model.n(), "baseline.known_diag")?;
    let n_train = a.train.unwrap_or(ds.trajectories.len() / 2);
    let r = baseline::compare(&ds.trajectories, &diag, ds.model.convention(), n_train, a.horizon)?;

    let metrics = [
        ("folti_mse", r.folti_mse),
        ("lti_mse", r.lti_mse),
        ("ratio", r.ratio),
        ("reduction", r.reduction),
    ];
    let out = &run.runtime.out;
    let file = match run.common.format {
        Format::Json => {
            let mut v = json!({
                "n_train": r.n_train,
                "n_test": r.n_test,
                "horizon": r.horizon,
                "alpha_hat": dvec17(&r.alpha_hat),
                "lti_a": rows17(&r.lti.a),
                "lti_b": rows17(&r.lti.b),
            });
            for (k, x) in metrics {
                v[k] = serde_json::to_value(Sig17(x))?;
            }
            write_file(out, "baseline.json", &to_json(&v)?)?;
            "baseline.json"
        }
        Format::Csv => {
            let rows = metrics.iter().map(|(k, x)| vec![k.to_string(), fmt_f64(*x)]);
            write_file(out, "baseline.csv", &matrix_csv("metric,value", rows))?;
            "baseline.csv"
        }
    };
    write_provenance(run)?;
    Ok(json!({
        "command": "baseline",
        "output": file,
        "folti_mse": Sig17(r.folti_mse),
        "lti_mse": Sig17(r.lti_mse),
        "ratio": Sig17(r.ratio),
    }))
}
