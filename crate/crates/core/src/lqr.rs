//! Finite-horizon LQR for FOLTI systems.
//!
//! Minimizes `J_T = Σ_{k<T} (x_kᵀ Q x_k + u_kᵀ R u_k) + x_Tᵀ Q_f x_T` subject to
//! the FOLTI dynamics, by two independent routes:
//!
//! * **Stacked least squares.** With `X = G U + H x_0` the cost is a quadratic
//!   in `U` and `U* = −(Gᵀ Q̄ G + R̄)⁻¹ Gᵀ Q̄ H x_0`.
//! * **Lagrange multipliers.** Stationarity of the Lagrangian gives
//!   `u_k = −½ R⁻¹ Bᵀ λ_{k+1}` and, after eliminating the states,
//!   `(I − G_λ) λ = 2 H_λ x_0` with a block-Toeplitz `I − G_λ` when `Q_f = Q`.
//!
//! For `k = 1..T` the multiplier rows read
//!
//! ```text
//! λ_k = 2 Q_k G_k x_0 − Σ_{i≤k} Q_k G_{k−i} B R⁻¹ Bᵀ λ_i + Σ_{i>k} A_{i−k−1}ᵀ λ_i
//! ```
//!
//! with `Q_k = Q` for `k < T` and `Q_T = Q_f` (from `λ_T = 2 Q_f x_T`).
//! The block-Toeplitz part is built with `Q` and the terminal difference
//! `Q_f − Q` is carried as a last-block-row correction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagators, simulate, FoltiModel, PropagatorSet, Trajectory};
use crate::error::{FoctlError, Result};
use crate::linalg::{block_diag_repeat, is_symmetric, set_block, spd_inverse, spd_solve, stack, unstack};
use crate::toeplitz::{solve, BlockToeplitz, CorrectedToeplitz, LinearOperator, SolveOptions};

/// LQR weights `(Q, R, Q_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    q_f: DMatrix<f64>,
}

const SYM_TOL: f64 = 1e-10;

impl CostSpec {
    /// Validates symmetry, `Q, Q_f ⪰ 0` and `R ≻ 0`.
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, q_f: DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        if !q.is_square() || q_f.shape() != (n, n) {
            return Err(FoctlError::InvalidCost(format!(
                "Q is {:?} and Q_f is {:?}; both must be the same square size",
                q.shape(),
                q_f.shape()
            )));
        }
        if !r.is_square() || r.nrows() == 0 {
            return Err(FoctlError::InvalidCost(format!("R is {:?}, not square", r.shape())));
        }
        for (name, m) in [("Q", &q), ("R", &r), ("Q_f", &q_f)] {
            if !is_symmetric(m, SYM_TOL) {
                return Err(FoctlError::InvalidCost(format!("{name} is not symmetric")));
            }
        }
        for (name, m) in [("Q", &q), ("Q_f", &q_f)] {
            let lo = m.symmetric_eigenvalues().min();
            if lo < -SYM_TOL * (1.0 + m.amax()) {
                return Err(FoctlError::InvalidCost(format!(
                    "{name} is not positive semidefinite (min eigenvalue {lo:.3e})"
                )));
            }
        }
        let r_min = r.symmetric_eigenvalues().min();
        if r_min <= 0.0 || r.clone().cholesky().is_none() {
            return Err(FoctlError::InvalidCost(format!(
                "R must be positive definite (min eigenvalue {r_min:.3e})"
            )));
        }
        Ok(CostSpec { q, r, q_f })
    }

    /// `Q_f = Q`.
    pub fn uniform(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        CostSpec::new(q.clone(), r, q)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn q_f(&self) -> &DMatrix<f64> {
        &self.q_f
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    /// Same weights multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        CostSpec::new(&self.q * factor, &self.r * factor, &self.q_f * factor)
    }

    pub fn check_model(&self, model: &FoltiModel) -> Result<()> {
        if self.n() != model.n() {
            return Err(FoctlError::dim("Q size vs state dimension", model.n(), self.n()));
        }
        if self.m() != model.m() {
            return Err(FoctlError::dim("R size vs input dimension", model.m(), self.m()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LeastSquares,
    Lagrange,
    RiccatiOracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    pub u_seq: Vec<DVector<f64>>,
    pub cost: f64,
    pub method: Method,
}

impl ControlSolution {
    /// `U = [u_0ᵀ … u_{T−1}ᵀ]ᵀ`.
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.u_seq)
    }
}

/// `X = G U + H x_0` and the block-diagonal weights.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    /// `(T+1)n × Tm`, block `(k, j)` is `G_{k−1−j} B` for `j < k`.
    pub g_big: DMatrix<f64>,
    /// `(T+1)n × n`, blocks `I, G_1, …, G_T`.
    pub h_big: DMatrix<f64>,
    /// `diag(Q, …, Q, Q_f)`.
    pub q_bar: DMatrix<f64>,
    /// `diag(R, …, R)`.
    pub r_bar: DMatrix<f64>,
    /// `g_big` without the `B` factor: block `(k, j)` is `G_{k−1−j}`.
    pub g_d: DMatrix<f64>,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
}

fn check_props(props: &PropagatorSet, horizon: usize) -> Result<()> {
    if props.horizon() < horizon {
        return Err(FoctlError::OutOfRange {
            index: horizon,
            horizon: props.horizon(),
        });
    }
    Ok(())
}

pub fn build_stacked(
    model: &FoltiModel,
    props: &PropagatorSet,
    cost: &CostSpec,
    horizon: usize,
) -> Result<StackedSystem> {
    check_props(props, horizon)?;
    cost.check_model(model)?;
    let (n, m, t) = (model.n(), model.m(), horizon);

    let mut g_d = DMatrix::zeros((t + 1) * n, t * n);
    let mut h_big = DMatrix::zeros((t + 1) * n, n);
    for k in 0..=t {
        set_block(&mut h_big, k * n, 0, &props.g[k]);
        for j in 0..k {
            set_block(&mut g_d, k * n, j * n, &props.g[k - 1 - j]);
        }
    }
    let g_big = &g_d * block_diag_repeat(model.b(), t);

    let mut q_bar = DMatrix::zeros((t + 1) * n, (t + 1) * n);
    for k in 0..t {
        set_block(&mut q_bar, k * n, k * n, cost.q());
    }
    set_block(&mut q_bar, t * n, t * n, cost.q_f());
    let r_bar = block_diag_repeat(cost.r(), t);

    Ok(StackedSystem {
        g_big,
        h_big,
        q_bar,
        r_bar,
        g_d,
        horizon: t,
        n,
        m,
    })
}

impl StackedSystem {
    /// `X = G U + H x_0` as a stacked column.
    pub fn states(&self, u: &DVector<f64>, x0: &DVector<f64>) -> DVector<f64> {
        &self.g_big * u + &self.h_big * x0
    }

    /// `Xᵀ Q̄ X + Uᵀ R̄ U`.
    pub fn cost(&self, u: &DVector<f64>, x0: &DVector<f64>) -> f64 {
        let x = self.states(u, x0);
        x.dot(&(&self.q_bar * &x)) + u.dot(&(&self.r_bar * u))
    }
}

/// `U = −(Gᵀ Q̄ G + R̄)⁻¹ Gᵀ Q̄ H x_0` via Cholesky.
pub fn solve_least_squares(sys: &StackedSystem, x0: &DVector<f64>) -> Result<ControlSolution> {
    if x0.len() != sys.n {
        return Err(FoctlError::dim("x0", sys.n, x0.len()));
    }
    let gtq = sys.g_big.transpose() * &sys.q_bar;
    let normal = &gtq * &sys.g_big + &sys.r_bar;
    let rhs = -(&gtq * (&sys.h_big * x0));
    let u = spd_solve(normal, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), "least-squares normal matrix")?;
    let u = u.column(0).into_owned();
    let cost = sys.cost(&u, x0);
    Ok(ControlSolution {
        u_seq: unstack(&u, sys.m),
        cost,
        method: Method::LeastSquares,
    })
}

/// `(I − G_λ) λ = 2 H_λ x_0` together with what is needed to recover `U`.
#[derive(Debug, Clone)]
pub struct LagrangeSystem {
    /// `Tn × Tn`.
    pub g_lambda: DMatrix<f64>,
    /// `Tn × n`, blocks `Q G_1, …, Q G_{T−1}, Q_f G_T`.
    pub h_lambda: DMatrix<f64>,
    /// `I − G_λ` in structured form.
    pub system: CorrectedToeplitz,
    /// `R⁻¹ Bᵀ`.
    pub r_inv_bt: DMatrix<f64>,
    pub cost: CostSpec,
    pub horizon: usize,
    pub n: usize,
}

pub fn build_lagrange(
    model: &FoltiModel,
    props: &PropagatorSet,
    cost: &CostSpec,
    horizon: usize,
) -> Result<LagrangeSystem> {
    check_props(props, horizon)?;
    cost.check_model(model)?;
    if horizon == 0 {
        return Err(FoctlError::Domain("Lagrange system needs a horizon of at least 1".into()));
    }
    let (n, t) = (model.n(), horizon);
    let r_inv = spd_inverse(cost.r(), "R")?;
    let r_inv_bt = &r_inv * model.b().transpose();
    let brb = model.b() * &r_inv_bt;
    let eye = DMatrix::<f64>::identity(n, n);

    // (I − G_λ) generators with Q in every row
    let mut first_col = Vec::with_capacity(t);
    for d in 0..t {
        let mut blk = cost.q() * &props.g[d] * &brb;
        if d == 0 {
            blk += &eye;
        }
        first_col.push(blk);
    }
    let mut first_row = Vec::with_capacity(t);
    first_row.push(first_col[0].clone());
    for d in 1..t {
        first_row.push(-props.a_seq[d - 1].transpose());
    }
    let base = BlockToeplitz::new(first_col, first_row)?;

    let dq = cost.q_f() - cost.q();
    let last_row = (dq.amax() != 0.0).then(|| {
        (0..t)
            .map(|i| &dq * &props.g[t - 1 - i] * &brb)
            .collect::<Vec<_>>()
    });
    let system = CorrectedToeplitz { base, last_row };

    let g_lambda = DMatrix::identity(t * n, t * n) - system.to_dense();
    let mut h_lambda = DMatrix::zeros(t * n, n);
    for k in 1..=t {
        let qk = if k == t { cost.q_f() } else { cost.q() };
        set_block(&mut h_lambda, (k - 1) * n, 0, &(qk * &props.g[k]));
    }

    Ok(LagrangeSystem {
        g_lambda,
        h_lambda,
        system,
        r_inv_bt,
        cost: cost.clone(),
        horizon: t,
        n,
    })
}

impl LagrangeSystem {
    /// Stacked multipliers `λ_1..λ_T`.
    pub fn multipliers(&self, x0: &DVector<f64>, opts: SolveOptions) -> Result<DVector<f64>> {
        if x0.len() != self.n {
            return Err(FoctlError::dim("x0", self.n, x0.len()));
        }
        let rhs = (&self.h_lambda * x0) * 2.0;
        solve(&self.system, &rhs, opts)
    }
}

/// `u_k = −½ R⁻¹ Bᵀ λ_{k+1}`; the cost comes from simulating the model.
pub fn solve_lagrange(
    lsys: &LagrangeSystem,
    model: &FoltiModel,
    x0: &DVector<f64>,
    opts: SolveOptions,
) -> Result<ControlSolution> {
    let lambda = lsys.multipliers(x0, opts)?;
    let u_seq: Vec<_> = unstack(&lambda, lsys.n)
        .iter()
        .map(|l| (&lsys.r_inv_bt * l) * -0.5)
        .collect();
    let traj = simulate(model, x0, &u_seq, None)?;
    let cost = eval_cost(&traj, &lsys.cost)?;
    Ok(ControlSolution {
        u_seq,
        cost,
        method: Method::Lagrange,
    })
}

/// `Σ_{k<T} (x_kᵀ Q x_k + u_kᵀ R u_k) + x_Tᵀ Q_f x_T`.
pub fn eval_cost(traj: &Trajectory, cost: &CostSpec) -> Result<f64> {
    if traj.state_dim() != cost.n() {
        return Err(FoctlError::dim("state dimension vs Q", cost.n(), traj.state_dim()));
    }
    if let Some(m) = traj.input_dim() {
        if m != cost.m() {
            return Err(FoctlError::dim("input dimension vs R", cost.m(), m));
        }
    }
    let t = traj.horizon();
    let mut j = 0.0;
    for k in 0..t {
        let (x, u) = (&traj.states[k], &traj.inputs[k]);
        j += x.dot(&(cost.q() * x)) + u.dot(&(cost.r() * u));
    }
    let xt = &traj.states[t];
    Ok(j + xt.dot(&(cost.q_f() * xt)))
}

/// Classical backward Riccati recursion for `x_{k+1} = A_eff x_k + B u_k`,
/// unrolled into an open-loop input sequence from `x0`.
pub fn riccati_oracle(
    a_eff: &DMatrix<f64>,
    b: &DMatrix<f64>,
    cost: &CostSpec,
    horizon: usize,
    x0: &DVector<f64>,
) -> Result<ControlSolution> {
    let n = a_eff.nrows();
    if !a_eff.is_square() || b.nrows() != n || cost.n() != n || cost.m() != b.ncols() || x0.len() != n {
        return Err(FoctlError::dim("Riccati oracle operands", n, x0.len()));
    }
    let mut p = cost.q_f().clone();
    let mut gains = vec![DMatrix::zeros(b.ncols(), n); horizon];
    for k in (0..horizon).rev() {
        let bt_p = b.transpose() * &p;
        let s = cost.r() + &bt_p * b;
        let gain = spd_solve(s, &(&bt_p * a_eff), "R + BᵀPB")?;
        let closed = a_eff - b * &gain;
        p = cost.q() + gain.transpose() * cost.r() * &gain + closed.transpose() * &p * &closed;
        p = (&p + p.transpose()) * 0.5;
        gains[k] = gain;
    }
    let mut states = vec![x0.clone()];
    let mut u_seq = Vec::with_capacity(horizon);
    for gain in &gains {
        let x = states.last().unwrap();
        let u = -(gain * x);
        states.push(a_eff * x + b * &u);
        u_seq.push(u);
    }
    let traj = Trajectory::new(states, u_seq.clone())?;
    let cost = eval_cost(&traj, cost)?;
    Ok(ControlSolution {
        u_seq,
        cost,
        method: Method::RiccatiOracle,
    })
}

/// Least-squares optimal control straight from the model.
pub fn optimal_control(
    model: &FoltiModel,
    cost: &CostSpec,
    x0: &DVector<f64>,
    horizon: usize,
) -> Result<ControlSolution> {
    let props = propagators(model, horizon);
    let sys = build_stacked(model, &props, cost, horizon)?;
    solve_least_squares(&sys, x0)
}
