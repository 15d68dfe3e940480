//! Sample-complexity bounds for LQR with an identified input matrix, and the
//! Monte-Carlo experiment that checks them.
//!
//! With `P = I_T ⊗ B`, `z = G_dᵀ Q̄ H x_0`, `S = G_dᵀ Q̄ G_d` and
//! `b = x_0ᵀ Hᵀ Q̄ H x_0`, the optimal cost as a function of the input matrix is
//!
//! ```text
//! a(B) = b − zᵀ P (Pᵀ S P + R̄)⁻¹ Pᵀ z
//! ```
//!
//! `J = a(B)` and the plug-in estimate is `Ĵ = a(B̂)`. The rollout estimate
//! instead applies the controller computed from `B̂` to the true system.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{propagators, FoltiModel};
use crate::error::{FoctlError, Result};
use crate::io::{fmt_f64, Sig17};
use crate::linalg::{block_diag_repeat, set_block, spd_inverse, spd_solve, spectral_norm};
use crate::lqr::{build_stacked, CostSpec, StackedSystem};
use crate::rng::derive;
use crate::sysid::{estimate_input_matrix, theta_covariance};

/// `Tr(K_B) = n m σ² / (N (p − m − 1))` for Gaussian designs.
pub fn trace_kb_closed(n: usize, m: usize, sigma_w: f64, n_batches: usize, p: usize) -> Result<f64> {
    if p <= m + 1 {
        return Err(FoctlError::Domain(format!(
            "samples per batch p = {p} must exceed m + 1 = {}",
            m + 1
        )));
    }
    if n_batches == 0 {
        return Err(FoctlError::Domain("number of batches must be positive".into()));
    }
    Ok((n * m) as f64 * sigma_w * sigma_w / (n_batches as f64 * (p - m - 1) as f64))
}

/// `Tr((1/N) (φᵀφ)⁻¹ φᵀ (I ⊗ K_w) φ (φᵀφ)⁻¹)`.
pub fn trace_kb_general(phi: &DMatrix<f64>, noise_cov: &DMatrix<f64>, n_batches: usize) -> Result<f64> {
    Ok(theta_covariance(phi, noise_cov, n_batches)?.trace())
}

/// Everything the bounds need for one `(model, cost, x_0, T)` instance.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub model: FoltiModel,
    pub cost: CostSpec,
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub sigma_w: f64,
    pub p: usize,
    pub n_batches: usize,
    pub stacked: StackedSystem,
    pub z: DVector<f64>,
    pub s: DMatrix<f64>,
    /// `x_0ᵀ Hᵀ Q̄ H x_0`.
    pub b_const: f64,
    /// Lower block triangular, block `(i, j)` is `Q_i G_{i−j}`.
    pub l_qg: DMatrix<f64>,
    /// Strictly upper block triangular, block `(i, i+d)` is `A_{d−1}ᵀ`.
    pub l_u: DMatrix<f64>,
    pub h_lambda_x0: DVector<f64>,
}

impl BoundInputs {
    pub fn new(
        model: &FoltiModel,
        cost: &CostSpec,
        x0: &DVector<f64>,
        horizon: usize,
        sigma_w: f64,
        p: usize,
        n_batches: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(FoctlError::Domain("horizon must be positive".into()));
        }
        if x0.len() != model.n() {
            return Err(FoctlError::dim("x0", model.n(), x0.len()));
        }
        if !(sigma_w >= 0.0 && sigma_w.is_finite()) {
            return Err(FoctlError::Domain(format!("noise std must be finite and non-negative, got {sigma_w}")));
        }
        let (n, t) = (model.n(), horizon);
        let props = propagators(model, t);
        let stacked = build_stacked(model, &props, cost, t)?;
        let hx0 = &stacked.h_big * x0;
        let qhx0 = &stacked.q_bar * &hx0;
        let z = stacked.g_d.transpose() * &qhx0;
        let s = stacked.g_d.transpose() * &stacked.q_bar * &stacked.g_d;
        let b_const = hx0.dot(&qhx0);

        let mut l_qg = DMatrix::zeros(t * n, t * n);
        let mut l_u = DMatrix::zeros(t * n, t * n);
        let mut h_lambda_x0 = DVector::zeros(t * n);
        for i in 0..t {
            let qi = if i + 1 == t { cost.q_f() } else { cost.q() };
            for j in 0..=i {
                set_block(&mut l_qg, i * n, j * n, &(qi * &props.g[i - j]));
            }
            for j in i + 1..t {
                set_block(&mut l_u, i * n, j * n, &props.a_seq[j - i - 1].transpose());
            }
            h_lambda_x0
                .rows_mut(i * n, n)
                .copy_from(&(qi * (&props.g[i + 1] * x0)));
        }

        Ok(BoundInputs {
            model: model.clone(),
            cost: cost.clone(),
            x0: x0.clone(),
            horizon: t,
            sigma_w,
            p,
            n_batches,
            stacked,
            z,
            s,
            b_const,
            l_qg,
            l_u,
            h_lambda_x0,
        })
    }

    fn p_of(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        block_diag_repeat(b, self.horizon)
    }

    /// Open-loop `U = −(Pᵀ S P + R̄)⁻¹ Pᵀ z` computed with input matrix `b`.
    pub fn controller(&self, b: &DMatrix<f64>) -> Result<DVector<f64>> {
        let p = self.p_of(b);
        let normal = p.transpose() * &self.s * &p + &self.stacked.r_bar;
        let ptz = p.transpose() * &self.z;
        let u = spd_solve(normal, &DMatrix::from_column_slice(ptz.len(), 1, ptz.as_slice()), "PᵀSP + R̄")?;
        Ok(-u.column(0).into_owned())
    }

    /// `a(b)`; equals `J` at the true `B`.
    pub fn plug_in_cost(&self, b: &DMatrix<f64>) -> Result<f64> {
        let u = self.controller(b)?;
        let p = self.p_of(b);
        // zᵀ P (PᵀSP + R̄)⁻¹ Pᵀ z = −zᵀ P U
        Ok(self.b_const + (p.transpose() * &self.z).dot(&u))
    }

    /// Cost on the true system of the controller computed from `b`.
    pub fn rollout_cost(&self, b: &DMatrix<f64>) -> Result<f64> {
        let u = self.controller(b)?;
        Ok(self.stacked.cost(&u, &self.x0))
    }

    pub fn optimal_cost(&self) -> Result<f64> {
        self.plug_in_cost(self.model.b())
    }

    fn identification_factor(&self, trace_kb: f64) -> f64 {
        trace_kb + 2.0 * spectral_norm(self.model.b()) * trace_kb.max(0.0).sqrt()
    }
}

fn r_inv_norm(cost: &CostSpec) -> Result<f64> {
    Ok(spectral_norm(&spd_inverse(cost.r(), "R")?))
}

/// `‖z‖² ‖R⁻¹‖ (1 + ‖B‖² ‖R⁻¹‖ ‖S‖) (Tr K_B + 2 ‖B‖ √Tr K_B)`.
pub fn bound_least_squares(inputs: &BoundInputs, trace_kb: f64) -> Result<f64> {
    let r_inv = r_inv_norm(&inputs.cost)?;
    let nb = spectral_norm(inputs.model.b());
    let zn = inputs.z.norm();
    Ok(zn * zn * r_inv * (1.0 + nb * nb * r_inv * spectral_norm(&inputs.s)) * inputs.identification_factor(trace_kb))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LagrangeBound {
    Value { bound: f64 },
    /// The symmetric part of `L_QG⁻¹ (I − L_u)` is not PSD.
    AssumptionFailed { min_sym_eigen: f64, min_real_eigen: f64 },
}

impl LagrangeBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            LagrangeBound::Value { bound } => Some(*bound),
            LagrangeBound::AssumptionFailed { .. } => None,
        }
    }
}

/// Smallest eigenvalue of the symmetric part and smallest real part of the
/// eigenvalues of `L_QG⁻¹ (I − L_u)`.
///
/// `I − L_u = L_G⁻ᵀ`, so the product is `L_G⁻¹ D_Q⁻¹ L_G⁻ᵀ` and is PSD for
/// any `Q, Q_f ≻ 0`; with a singular `Q` the matrix `L_QG` is singular.
pub fn lagrange_assumption(inputs: &BoundInputs) -> Result<(DMatrix<f64>, f64, f64)> {
    let dim = inputs.l_qg.nrows();
    let lu = inputs.l_qg.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| FoctlError::Singular {
        context: "L_QG".into(),
        condition: f64::INFINITY,
    })?;
    let cond = spectral_norm(&inv) * spectral_norm(&inputs.l_qg);
    if !cond.is_finite() || cond > crate::toeplitz::MAX_CONDITION {
        return Err(FoctlError::Singular {
            context: "L_QG".into(),
            condition: cond,
        });
    }
    let m = &inv * (DMatrix::identity(dim, dim) - &inputs.l_u);
    let sym = (&m + m.transpose()) * 0.5;
    let min_sym = sym.symmetric_eigenvalues().min();
    let min_real = m
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .fold(f64::INFINITY, f64::min);
    Ok((inv, min_sym, min_real))
}

/// `‖z‖ ‖H_λ x_0‖ ‖R⁻¹‖ ‖𝕃‖ (1 + ‖B‖² ‖R⁻¹‖ ‖𝕃‖ ‖L_QG‖) (Tr K_B + 2 ‖B‖ √Tr K_B)`
/// with `‖𝕃‖ = ‖L_QG⁻¹‖ ‖L_QG‖` and `‖(I − L_u)⁻¹‖` taken as 1.
pub fn bound_lagrange(inputs: &BoundInputs, trace_kb: f64) -> Result<LagrangeBound> {
    let (inv, min_sym, min_real) = lagrange_assumption(inputs)?;
    let scale = 1.0 + inv.amax();
    if min_sym < -1e-12 * scale {
        return Ok(LagrangeBound::AssumptionFailed {
            min_sym_eigen: min_sym,
            min_real_eigen: min_real,
        });
    }
    let r_inv = r_inv_norm(&inputs.cost)?;
    let nb = spectral_norm(inputs.model.b());
    let lqg = spectral_norm(&inputs.l_qg);
    let ll = spectral_norm(&inv) * lqg;
    let bound = inputs.z.norm()
        * inputs.h_lambda_x0.norm()
        * r_inv
        * ll
        * (1.0 + nb * nb * r_inv * ll * lqg)
        * inputs.identification_factor(trace_kb);
    Ok(LagrangeBound::Value { bound })
}

/// Per-`N` results of [`monte_carlo_gap`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub n_values: Vec<usize>,
    /// Mean of `|a(B̂) − J|`.
    pub empirical_gap: Vec<f64>,
    pub gap_std_error: Vec<f64>,
    /// Mean of `|rollout(B̂) − J|`.
    pub rollout_gap: Vec<f64>,
    pub rollout_std_error: Vec<f64>,
    pub bound_ls: Vec<f64>,
    pub bound_lagrange: Vec<Option<f64>>,
    pub trace_kb: Vec<f64>,
    /// Replicates dropped because a solve failed.
    pub failures: Vec<usize>,
    pub replicates: usize,
    pub optimal_cost: f64,
    pub lagrange_assumption: LagrangeBound,
    /// Least-squares slope of `ln(gap)` against `ln(N)`; `None` with fewer
    /// than two positive gaps.
    pub loglog_slope: Option<f64>,
}

/// `(slope, intercept)` of the least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope of `ln(y)` against `ln(x)` over the points with `y > 0`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|(s, _)| s)
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Draws `N p` samples `y = B u + w` with `u ~ N(0, I)`, `w ~ N(0, σ² I)`.
/// With `A` and `α` known, `y` is exactly the regression target
/// `x_1 − A_α x_0`, so `x_0` need not be drawn.
fn identify_b(inputs: &BoundInputs, samples: usize, seed: u64, n_val: usize, rep: usize) -> Result<DMatrix<f64>> {
    let (n, m) = (inputs.model.n(), inputs.model.m());
    let mut rng = derive(seed, &[n_val as u64, rep as u64]);
    let b = inputs.model.b();
    let mut us = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = DVector::from_fn(n, |_, _| inputs.sigma_w * rng.sample::<f64, _>(StandardNormal));
        ys.push(b * &u + w);
        us.push(u);
    }
    estimate_input_matrix(&us, &ys)
}

/// For each `N`, `replicates` independent estimates of `B` from `N p` fresh
/// samples, each scored against the true optimum.
pub fn monte_carlo_gap(inputs: &BoundInputs, n_values: &[usize], replicates: usize, seed: u64) -> Result<ComplexityReport> {
    if replicates == 0 {
        return Err(FoctlError::Domain("replicates must be at least 1".into()));
    }
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(FoctlError::Domain("batch counts must be non-empty and positive".into()));
    }
    let (n, m) = (inputs.model.n(), inputs.model.m());
    let trace_kb = n_values
        .iter()
        .map(|&nb| trace_kb_closed(n, m, inputs.sigma_w, nb, inputs.p))
        .collect::<Result<Vec<_>>>()?;
    let j = inputs.optimal_cost()?;
    let lagrange_assumption = bound_lagrange(inputs, 0.0)?;

    let mut report = ComplexityReport {
        n_values: n_values.to_vec(),
        empirical_gap: Vec::new(),
        gap_std_error: Vec::new(),
        rollout_gap: Vec::new(),
        rollout_std_error: Vec::new(),
        bound_ls: Vec::new(),
        bound_lagrange: Vec::new(),
        trace_kb: trace_kb.clone(),
        failures: Vec::new(),
        replicates,
        optimal_cost: j,
        lagrange_assumption,
        loglog_slope: None,
    };
    for (&nb, &tk) in n_values.iter().zip(&trace_kb) {
        let outcomes: Vec<Result<(f64, f64)>> = (0..replicates)
            .into_par_iter()
            .map(|rep| {
                let b_hat = identify_b(inputs, nb * inputs.p, seed, nb, rep)?;
                Ok((
                    (inputs.plug_in_cost(&b_hat)? - j).abs(),
                    (inputs.rollout_cost(&b_hat)? - j).abs(),
                ))
            })
            .collect();
        let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let (plug, roll): (Vec<f64>, Vec<f64>) = ok.into_iter().unzip();
        let (gm, gs) = mean_se(&plug);
        let (rm, rs) = mean_se(&roll);
        report.empirical_gap.push(gm);
        report.gap_std_error.push(gs);
        report.rollout_gap.push(rm);
        report.rollout_std_error.push(rs);
        report.failures.push(replicates - plug.len());
        report.bound_ls.push(bound_least_squares(inputs, tk)?);
        report.bound_lagrange.push(bound_lagrange(inputs, tk)?.value());
    }
    let xs: Vec<f64> = n_values.iter().map(|&v| v as f64).collect();
    report.loglog_slope = loglog_slope(&xs, &report.empirical_gap);
    Ok(report)
}

#[derive(Serialize)]
struct ReportRow {
    n_batches: usize,
    gap: Sig17,
    gap_std_error: Sig17,
    rollout_gap: Sig17,
    rollout_std_error: Sig17,
    bound_ls: Sig17,
    bound_lagrange: Option<Sig17>,
    trace_kb: Sig17,
    failures: usize,
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum AssumptionOut {
    Holds,
    AssumptionFailed { min_sym_eigen: Sig17, min_real_eigen: Sig17 },
}

#[derive(Serialize)]
struct ReportOut {
    replicates: usize,
    optimal_cost: Sig17,
    lagrange_assumption: AssumptionOut,
    loglog_slope: Option<Sig17>,
    rows: Vec<ReportRow>,
}

fn opt_num(x: f64) -> Option<Sig17> {
    x.is_finite().then_some(Sig17(x))
}

impl ComplexityReport {
    /// Serializable view; non-finite means (all replicates failed) become
    /// zero-valued rows flagged by `failures`.
    pub fn to_serializable(&self) -> impl Serialize {
        let fin = |x: f64| Sig17(if x.is_finite() { x } else { 0.0 });
        ReportOut {
            replicates: self.replicates,
            optimal_cost: fin(self.optimal_cost),
            lagrange_assumption: match self.lagrange_assumption {
                LagrangeBound::Value { .. } => AssumptionOut::Holds,
                LagrangeBound::AssumptionFailed {
                    min_sym_eigen,
                    min_real_eigen,
                } => AssumptionOut::AssumptionFailed {
                    min_sym_eigen: fin(min_sym_eigen),
                    min_real_eigen: fin(min_real_eigen),
                },
            },
            loglog_slope: self.loglog_slope.and_then(opt_num),
            rows: (0..self.n_values.len())
                .map(|i| ReportRow {
                    n_batches: self.n_values[i],
                    gap: fin(self.empirical_gap[i]),
                    gap_std_error: fin(self.gap_std_error[i]),
                    rollout_gap: fin(self.rollout_gap[i]),
                    rollout_std_error: fin(self.rollout_std_error[i]),
                    bound_ls: fin(self.bound_ls[i]),
                    bound_lagrange: self.bound_lagrange[i].and_then(opt_num),
                    trace_kb: fin(self.trace_kb[i]),
                    failures: self.failures[i],
                })
                .collect(),
        }
    }

    /// Long-format CSV: `N,gap,std_error,bound_ls,bound_lagrange,trace_kb`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,gap,std_error,bound_ls,bound_lagrange,trace_kb\n");
        for i in 0..self.n_values.len() {
            let lag = self.bound_lagrange[i].map(fmt_f64).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.n_values[i],
                fmt_f64(self.empirical_gap[i]),
                fmt_f64(self.gap_std_error[i]),
                fmt_f64(self.bound_ls[i]),
                lag,
                fmt_f64(self.trace_kb[i]),
            ));
        }
        out
    }

    /// Plot data with columns `N,gap,bound`.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("N,gap,bound\n");
        for i in 0..self.n_values.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.n_values[i],
                fmt_f64(self.empirical_gap[i]),
                fmt_f64(self.bound_ls[i])
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gl::FracOrder;

    fn scalar(a: f64, alpha: f64, q: f64, q_f: f64) -> (FoltiModel, CostSpec) {
        let model = FoltiModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, 1.0),
            FracOrder::new(vec![alpha]).unwrap(),
        )
        .unwrap();
        let cost = CostSpec::new(
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, q_f),
        )
        .unwrap();
        (model, cost)
    }

    fn unit_inputs(horizon: usize) -> BoundInputs {
        let (model, cost) = scalar(0.0, 1.0, 1.0, 1.0);
        BoundInputs::new(&model, &cost, &DVector::from_element(1, 1.0), horizon, 0.1, 10, 1).unwrap()
    }

    #[test]
    fn closed_trace() {
        assert!((trace_kb_closed(2, 2, 0.1, 100, 53).unwrap() - 8e-6).abs() < 1e-18);
        assert_eq!(trace_kb_closed(2, 2, 0.0, 100, 53).unwrap(), 0.0);
        assert!(trace_kb_closed(2, 2, 0.1, 1, 3).is_err());
        assert!(trace_kb_closed(2, 2, 0.1, 0, 10).is_err());
    }

    #[test]
    fn general_trace() {
        let phi = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let k = DMatrix::identity(1, 1) * 0.04;
        assert!((trace_kb_general(&phi, &k, 1).unwrap() - 0.08).abs() < 1e-15);
        assert_eq!(trace_kb_general(&phi, &DMatrix::zeros(1, 1), 1).unwrap(), 0.0);
    }

    #[test]
    fn scalar_operators_and_costs() {
        let bi = unit_inputs(1);
        assert_eq!(bi.z.as_slice(), &[1.0]);
        assert_eq!(bi.s[(0, 0)], 1.0);
        assert_eq!(bi.b_const, 2.0);
        assert!((bi.optimal_cost().unwrap() - 1.5).abs() < 1e-15);
        assert!((bi.rollout_cost(bi.model.b()).unwrap() - 1.5).abs() < 1e-15);
        // a(b̂) = 2 − b̂²/(b̂² + 1)
        let b_hat = DMatrix::from_element(1, 1, 2.0);
        assert!((bi.plug_in_cost(&b_hat).unwrap() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn scalar_bounds() {
        let bi = unit_inputs(1);
        // (1 + 1)(0.25 + 2·0.5) for both forms
        assert!((bound_least_squares(&bi, 0.25).unwrap() - 2.5).abs() < 1e-14);
        let lag = bound_lagrange(&bi, 0.25).unwrap().value().unwrap();
        assert!((lag - 2.5).abs() < 1e-14);
        assert_eq!(bound_least_squares(&bi, 0.0).unwrap(), 0.0);
        assert_eq!(bound_lagrange(&bi, 0.0).unwrap().value(), Some(0.0));
    }

    #[test]
    fn bound_monotone_in_trace() {
        let bi = unit_inputs(4);
        assert!(bound_least_squares(&bi, 0.01).unwrap() < bound_least_squares(&bi, 0.02).unwrap());
    }

    #[test]
    fn assumption_holds_for_valid_costs() {
        // I − L_u = L_G⁻ᵀ, so L_QG⁻¹ (I − L_u) = L_G⁻¹ D_Q⁻¹ L_G⁻ᵀ
        let (model, cost) = scalar(0.5, 0.5, 1.0, 100.0);
        let bi = BoundInputs::new(&model, &cost, &DVector::from_element(1, 1.0), 3, 0.1, 10, 1).unwrap();
        let (_, min_sym, min_real) = lagrange_assumption(&bi).unwrap();
        assert!(min_sym > 0.0 && min_real > 0.0);
    }

    #[test]
    fn assumption_failure_is_tagged() {
        let mut bi = unit_inputs(3);
        bi.l_qg = -bi.l_qg;
        match bound_lagrange(&bi, 0.1).unwrap() {
            LagrangeBound::AssumptionFailed { min_sym_eigen, .. } => assert!(min_sym_eigen < 0.0),
            other => panic!("expected assumption failure, got {other:?}"),
        }
    }

    #[test]
    fn singular_l_qg() {
        let (model, cost) = scalar(0.0, 1.0, 0.0, 0.0);
        let bi = BoundInputs::new(&model, &cost, &DVector::from_element(1, 1.0), 2, 0.1, 10, 1).unwrap();
        assert!(matches!(bound_lagrange(&bi, 0.1), Err(FoctlError::Singular { .. })));
    }

    #[test]
    fn noiseless_gap_vanishes_and_runs_repeat() {
        let mut bi = unit_inputs(3);
        bi.sigma_w = 0.0;
        let r = monte_carlo_gap(&bi, &[1, 4], 5, 3).unwrap();
        assert!(r.empirical_gap.iter().all(|&g| g <= 1e-12));
        bi.sigma_w = 0.1;
        let a = monte_carlo_gap(&bi, &[1, 4], 5, 3).unwrap();
        let b = monte_carlo_gap(&bi, &[1, 4], 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv().lines().count(), 3);
    }

    #[test]
    fn sweep_validation() {
        let bi = unit_inputs(2);
        assert!(monte_carlo_gap(&bi, &[1], 0, 0).is_err());
        assert!(monte_carlo_gap(&bi, &[], 1, 0).is_err());
        let mut small = bi.clone();
        small.p = 2;
        assert!(monte_carlo_gap(&small, &[1], 1, 0).is_err());
    }

    #[test]
    fn fits() {
        let x = [1.0, 10.0, 100.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
    }
}
