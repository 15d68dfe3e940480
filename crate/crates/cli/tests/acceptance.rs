//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use foctl::complexity::{loglog_slope, trace_kb_closed};
use foctl::dynamics::{closed_form_state, propagators, simulate};
use foctl::forge::{self, AlphaMode, GenSpec, StabilityMode};
use foctl::gl::psi;
use foctl::linalg::{condition_number, spectral_radius, stack};
use foctl::lqr::{build_lagrange, eval_cost, optimal_control, riccati_oracle, solve_lagrange};
use foctl::rng::{derive, Stream};
use foctl::sysid::{estimate, estimate_input_matrix, RegressionData, Transition};
use foctl::toeplitz::{LinearOperator, SolveOptions};
use foctl::{ControlSolution, CostSpec, FoltiModel, FracOrder};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use statrs::function::gamma::ln_gamma;

const SOLVER_TOL: f64 = 1e-8;
const GRADIENT_TOL: f64 = 1e-5;
const ORACLE_TOL: f64 = 1e-8;
const PATH_TOL: f64 = 1e-9;
const GL_REL_TOL: f64 = 1e-10;
const RECOVERY_TOL: f64 = 1e-10;
const SLOPE_RANGE: (f64, f64) = (-0.6, -0.4);
const TRACE_REL_TOL: f64 = 0.10;
const TOEPLITZ_REL_TOL: f64 = 1e-8;
const WELL_CONDITIONED: f64 = 1e8;

type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn rng(tag: u64, case: u64) -> Stream {
    derive(0xacce, &[tag, case])
}

fn normal(n: usize, r: &mut Stream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal))
}

fn model(n: usize, m: usize, r: &mut Stream) -> FoltiModel {
    let spec = GenSpec {
        n,
        m,
        alpha_mode: AlphaMode::Componentwise,
        stability: StabilityMode::MemoryBounded,
        ..GenSpec::default()
    };
    forge::random_model(&spec, r).unwrap()
}

fn cost(n: usize, m: usize, terminal_equals_stage: bool, r: &mut Stream) -> CostSpec {
    let base = forge::random_cost(n, m, r).unwrap();
    let q = base.q() + DMatrix::identity(n, n) * 0.1;
    let rr = base.r() + DMatrix::identity(m, m) * 0.1;
    let q_f = if terminal_equals_stage { q.clone() } else { base.q_f() + DMatrix::identity(n, n) * 0.1 };
    CostSpec::new(q, rr, q_f).unwrap()
}

struct Instance {
    model: FoltiModel,
    cost: CostSpec,
    x0: DVector<f64>,
    horizon: usize,
}

fn instance(r: &mut Stream, terminal_equals_stage: bool) -> Instance {
    let n = r.random_range(1..=4);
    let m = r.random_range(1..=4);
    let horizon = r.random_range(2..=32);
    Instance {
        model: model(n, m, r),
        cost: cost(n, m, terminal_equals_stage, r),
        x0: normal(n, r),
        horizon,
    }
}

fn lagrange(inst: &Instance) -> ControlSolution {
    let props = propagators(&inst.model, inst.horizon);
    let lsys = build_lagrange(&inst.model, &props, &inst.cost, inst.horizon).unwrap();
    solve_lagrange(&lsys, &inst.model, &inst.x0, SolveOptions::dense()).unwrap()
}

fn cross_solver() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let inst = instance(&mut rng(1, case), true);
        let ls = optimal_control(&inst.model, &inst.cost, &inst.x0, inst.horizon).unwrap();
        let lag = lagrange(&inst);
        let u = stack(&ls.u_seq);
        worst = worst.max((&u - stack(&lag.u_seq)).amax() / (1.0 + u.amax()));
    }
    Outcome {
        pass: worst <= SOLVER_TOL,
        detail: format!("max ‖U_ls − U_lag‖∞/(1+‖U_ls‖∞) = {worst:.2e} over 200 instances"),
    }
}

fn gradient_norm(inst: &Instance, sol: &ControlSolution) -> f64 {
    let eval = |u: &[DVector<f64>]| eval_cost(&simulate(&inst.model, &inst.x0, u, None).unwrap(), &inst.cost).unwrap();
    let mut u = sol.u_seq.clone();
    let mut g: f64 = 0.0;
    for k in 0..u.len() {
        for i in 0..u[k].len() {
            let base = u[k][i];
            let h = 1e-6 * (1.0 + base.abs());
            u[k][i] = base + h;
            let up = eval(&u);
            u[k][i] = base - h;
            let down = eval(&u);
            u[k][i] = base;
            g = g.max(((up - down) / (2.0 * h)).abs());
        }
    }
    g
}

fn optimality() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let inst = instance(&mut rng(2, case), case % 2 == 0);
        for sol in [optimal_control(&inst.model, &inst.cost, &inst.x0, inst.horizon).unwrap(), lagrange(&inst)] {
            worst = worst.max(gradient_norm(&inst, &sol) / (1.0 + sol.cost.abs()));
        }
    }
    Outcome {
        pass: worst <= GRADIENT_TOL,
        detail: format!("max ‖∇J‖∞/(1+|J|) = {worst:.2e} over 100 instances, both solvers"),
    }
}

fn integer_order_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let mut r = rng(3, case);
        let n = r.random_range(1..=4);
        let m = r.random_range(1..=4);
        let horizon = r.random_range(2..=32);
        let raw = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let a = raw.clone() * (0.95 / spectral_radius(&raw).max(1e-12)) - DMatrix::identity(n, n);
        let b = DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0));
        let model = FoltiModel::new(a, b, FracOrder::commensurate(1.0, n).unwrap()).unwrap();
        let inst = Instance {
            cost: cost(n, m, case % 2 == 0, &mut r),
            x0: normal(n, &mut r),
            model,
            horizon,
        };
        let oracle = riccati_oracle(&inst.model.one_step_matrix(), inst.model.b(), &inst.cost, horizon, &inst.x0).unwrap();
        let reference = stack(&oracle.u_seq);
        let ls = optimal_control(&inst.model, &inst.cost, &inst.x0, horizon).unwrap();
        for sol in [ls, lagrange(&inst)] {
            worst = worst.max((stack(&sol.u_seq) - &reference).amax());
            worst = worst.max((sol.cost - oracle.cost).abs());
        }
    }
    Outcome {
        pass: worst <= ORACLE_TOL,
        detail: format!("max |U − U_riccati|∞, |J − J_riccati| = {worst:.2e} over 100 instances"),
    }
}

fn path_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let mut r = rng(4, case);
        let n = r.random_range(1..=4);
        let m = r.random_range(1..=4);
        let horizon = r.random_range(1..=64);
        let model = model(n, m, &mut r);
        let x0 = normal(n, &mut r);
        let u: Vec<_> = (0..horizon)
            .map(|_| DVector::from_fn(m, |_, _| r.random_range(-1.0..=1.0)))
            .collect();
        let sim = simulate(&model, &x0, &u, None).unwrap();
        let props = propagators(&model, horizon);
        for k in 0..=horizon {
            let cf = closed_form_state(&props, &model, &x0, &u, k).unwrap();
            worst = worst.max((cf - &sim.states[k]).amax());
        }
    }
    Outcome {
        pass: worst <= PATH_TOL,
        detail: format!("max |x_sim − x_closed| = {worst:.2e} over 200 instances, T ≤ 64"),
    }
}

fn gl_coefficients() -> Outcome {
    let mut worst: f64 = 0.0;
    for step in 1..=9 {
        let alpha = step as f64 / 10.0;
        for j in 1..=64usize {
            let jf = j as f64;
            // |Γ(−α)| = Γ(1−α)/α and ψ(α, j ≥ 1) < 0
            let oracle = -(ln_gamma(jf - alpha) - ln_gamma(1.0 - alpha) + alpha.ln() - ln_gamma(jf + 1.0)).exp();
            worst = worst.max(((psi(alpha, j).unwrap() - oracle) / oracle).abs());
        }
        worst = worst.max((psi(alpha, 0).unwrap() - 1.0).abs());
    }
    let unit_exact = (2..=64).all(|j| psi(1.0, j).unwrap() == 0.0);
    Outcome {
        pass: worst <= GL_REL_TOL && unit_exact,
        detail: format!("max relative error vs log-gamma = {worst:.2e}; ψ(1, j ≥ 2) exactly 0: {unit_exact}"),
    }
}

fn transitions(model: &FoltiModel, p: usize, sigma: f64, r: &mut Stream) -> RegressionData {
    let a_alpha = model.one_step_matrix();
    let samples = (0..p)
        .map(|_| {
            let x0 = normal(model.n(), r);
            let u0 = DVector::from_fn(model.m(), |_, _| r.random_range(-1.0..=1.0));
            let x1 = &a_alpha * &x0 + model.b() * &u0 + normal(model.n(), r) * sigma;
            Transition { x0, u0, x1 }
        })
        .collect();
    let diag = DVector::from_fn(model.n(), |i, _| model.a()[(i, i)]);
    RegressionData::new(samples, diag).unwrap()
}

fn identification() -> Outcome {
    let mut exact: f64 = 0.0;
    for case in 0..50 {
        let mut r = rng(6, case);
        let (n, m) = (r.random_range(1..=4), r.random_range(1..=4));
        let truth = model(n, m, &mut r);
        let est = estimate(&transitions(&truth, n + m + 4, 0.0, &mut r)).unwrap();
        exact = exact
            .max((&est.a_alpha_hat - truth.one_step_matrix()).amax())
            .max((&est.b_hat - truth.b()).amax());
    }
    let truth = model(2, 1, &mut rng(6, 1000));
    let ps: Vec<usize> = (3..=9).map(|e| 1 << e).collect();
    let means: Vec<f64> = ps
        .iter()
        .map(|&p| {
            (0..1000u64)
                .map(|rep| {
                    let data = transitions(&truth, p, 0.1, &mut rng(60 + p as u64, rep));
                    (estimate(&data).unwrap().b_hat - truth.b()).norm()
                })
                .sum::<f64>()
                / 1000.0
        })
        .collect();
    let xs: Vec<f64> = ps.iter().map(|&p| p as f64).collect();
    let slope = loglog_slope(&xs, &means).unwrap_or(f64::NAN);
    Outcome {
        pass: exact <= RECOVERY_TOL && (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope),
        detail: format!("noiseless max error = {exact:.2e}; slope of mean ‖B̂ − B‖_F vs p = {slope:.3}"),
    }
}

fn closed_form_trace() -> Outcome {
    let (n, m, p, nb, sigma) = (2usize, 2usize, 53usize, 1usize, 0.1);
    let closed = trace_kb_closed(n, m, sigma, nb, p).unwrap();
    let b = DMatrix::from_fn(n, m, |i, j| 0.3 * i as f64 - 0.2 * j as f64 + 0.5);
    let designs = 10_000u64;
    let total: f64 = (0..designs)
        .map(|d| {
            let mut r = rng(7, d);
            let us: Vec<_> = (0..p * nb).map(|_| normal(m, &mut r)).collect();
            let ys: Vec<_> = us.iter().map(|u| &b * u + normal(n, &mut r) * sigma).collect();
            (estimate_input_matrix(&us, &ys).unwrap() - &b).norm_squared()
        })
        .sum();
    let mc = total / designs as f64;
    let rel = (mc / closed - 1.0).abs();
    Outcome {
        pass: rel <= TRACE_REL_TOL,
        detail: format!("Monte-Carlo Tr(K_B) = {mc:.4e}, closed form = {closed:.4e}, relative gap {rel:.3}"),
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_foctl")
}

fn foctl(out: &Path, args: &[&str]) -> Result<Value, String> {
    let res = Command::new(bin())
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FOCTL_WORKERS")
        .output()
        .map_err(|e| e.to_string())?;
    if !res.status.success() {
        return Err(String::from_utf8_lossy(&res.stderr).into_owned());
    }
    serde_json::from_slice(&res.stdout).map_err(|e| e.to_string())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn complexity_sweep(work: &Path) -> Outcome {
    let out = work.join("complexity");
    if let Err(e) = foctl(&out, &["complexity", "--seed", "1"]) {
        return Outcome { pass: false, detail: format!("command failed: {e}") };
    }
    let report = read_json(&out.join("complexity.json"));
    let rows = report["rows"].as_array().unwrap();
    let mut covered = true;
    let mut ratio: f64 = 0.0;
    for row in rows {
        let gap = row["gap"].as_f64().unwrap();
        let se = row["gap_std_error"].as_f64().unwrap();
        let bound = row["bound_ls"].as_f64().unwrap();
        covered &= gap - 2.0 * se <= bound;
        ratio = ratio.max(gap / bound);
    }
    let ns: Vec<u64> = rows.iter().map(|r| r["n_batches"].as_u64().unwrap()).collect();
    let slope = report["loglog_slope"].as_f64().unwrap_or(f64::NAN);
    Outcome {
        pass: covered && ns == [10, 20, 50, 100, 200, 500, 1000] && (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope),
        detail: format!("bound covers gap at every N: {covered} (max gap/bound {ratio:.2e}); slope = {slope:.3}"),
    }
}

fn toeplitz_solvers() -> Outcome {
    let (mut worst, mut checked, mut skipped): (f64, usize, usize) = (0.0, 0, 0);
    let mut case = 0;
    while checked < 100 {
        let inst = instance(&mut rng(9, case), case % 2 == 0);
        case += 1;
        let props = propagators(&inst.model, inst.horizon);
        let lsys = build_lagrange(&inst.model, &props, &inst.cost, inst.horizon).unwrap();
        if condition_number(&lsys.system.to_dense()) > WELL_CONDITIONED {
            skipped += 1;
            continue;
        }
        let dense = lsys.multipliers(&inst.x0, SolveOptions::dense()).unwrap();
        let iter = lsys.multipliers(&inst.x0, SolveOptions::iterative(1e-12)).unwrap();
        worst = worst.max((&iter - &dense).norm() / dense.norm().max(f64::MIN_POSITIVE));
        checked += 1;
    }
    Outcome {
        pass: worst <= TOEPLITZ_REL_TOL,
        detail: format!("max relative gap GMRES vs dense = {worst:.2e} over 100 instances ({skipped} skipped as cond > 1e8)"),
    }
}

fn baseline_direction(work: &Path) -> Outcome {
    let data = work.join("baseline-data");
    let gen = foctl(
        &data,
        &["gen", "--n", "2", "--m", "2", "--T", "64", "--traj", "40", "--alpha", "0.5,0.5", "--sigma", "0.001",
          "--stability", "memory-bounded", "--seed", "10"],
    );
    if let Err(e) = gen {
        return Outcome { pass: false, detail: format!("gen failed: {e}") };
    }
    let manifest = read_json(&data.join("manifest.json"));
    let a = &manifest["model"]["a"];
    let diag = format!("{},{}", a[0][0], a[1][1]);
    match foctl(&work.join("baseline"), &["baseline", "--data", data.to_str().unwrap(), "--known-diag", &diag]) {
        Ok(v) => {
            let (f, l) = (v["folti_mse"].as_f64().unwrap(), v["lti_mse"].as_f64().unwrap());
            Outcome {
                pass: f < l,
                detail: format!("held-out MSE: FOLTI {f:.3e}, LTI {l:.3e}, reduction {:.1}%", 100.0 * (1.0 - f / l)),
            }
        }
        Err(e) => Outcome { pass: false, detail: format!("baseline failed: {e}") },
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
    }
    out
}

fn determinism(work: &Path) -> Outcome {
    let data = work.join("det-data");
    let data_s = data.to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("gen", vec!["gen", "--n", "2", "--m", "2", "--T", "32", "--traj", "30", "--noise", "sinc-squared", "--sigma", "0.05", "--seed", "3"]),
        ("simulate", vec!["simulate", "--a", "0.1,0.2;-0.3,0.1", "--b", "1;0.5", "--alpha", "0.4,0.7", "--T", "40", "--inputs", "random", "--noise", "cauchy", "--sigma", "0.01", "--seed", "4"]),
        ("control", vec!["control", "--a", "0.1,0.2;-0.3,0.1", "--b", "1;0.5", "--alpha", "0.4,0.7", "--T", "20", "--x0", "1,-1", "--method", "both", "--solver", "iterative"]),
        ("control-csv", vec!["control", "--a", "0.3", "--b", "1", "--alpha", "0.5", "--T", "5", "--format", "csv"]),
        ("identify", vec!["identify", "--data", &data_s, "--known-diag", "0,0", "--truth-from-dataset", "--noise-std", "0.05"]),
        ("complexity", vec!["complexity", "--n-values", "10,100", "--replicates", "30", "--seed", "5"]),
        ("baseline", vec!["baseline", "--data", &data_s, "--known-diag", "0,0", "--format", "csv"]),
    ];
    let mut bad = Vec::new();
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for (rep, workers) in [(0, "1"), (1, "4")] {
            let out = if *name == "gen" && rep == 0 { data.clone() } else { work.join(format!("det-{name}-{rep}")) };
            let mut full: Vec<&str> = args.clone();
            full.extend(["--workers", workers]);
            if let Err(e) = foctl(&out, &full) {
                bad.push(format!("{name}: {}", e.trim()));
            }
            outputs.push(dir_bytes(&out));
        }
        if outputs[0] != outputs[1] {
            bad.push(format!("{name}: outputs differ"));
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} command runs repeated with byte-identical outputs", runs.len())
        } else {
            bad.join("; ")
        },
    }
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("1 cross-solver equivalence", Duration::from_secs(60), Box::new(cross_solver)),
        ("2 optimality (finite-difference gradient)", Duration::from_secs(60), Box::new(optimality)),
        ("3 unit-order Riccati oracle", Duration::from_secs(30), Box::new(integer_order_oracle)),
        ("4 recursive vs closed-form paths", Duration::from_secs(30), Box::new(path_equivalence)),
        ("5 GL coefficients vs log-gamma", Duration::from_secs(1), Box::new(gl_coefficients)),
        ("6 identification exactness and rate", Duration::from_secs(300), Box::new(identification)),
        ("7 closed-form Tr(K_B)", Duration::from_secs(120), Box::new(closed_form_trace)),
        ("8 sample-complexity sweep", Duration::from_secs(600), Box::new(|| complexity_sweep(work.path()))),
        ("9 GMRES vs dense Toeplitz solves", Duration::from_secs(60), Box::new(toeplitz_solvers)),
        ("10 FOLTI vs LTI baseline", Duration::from_secs(120), Box::new(|| baseline_direction(work.path()))),
        ("11 CLI determinism", Duration::from_secs(600), Box::new(|| determinism(work.path()))),
    ];
    let mut failed = 0;
    for (name, budget, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = outcome.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} criterion {name}: {} [{:.2}s of {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" },
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
