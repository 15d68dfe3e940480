//! FOLTI dynamics `Δ^α x_{k+1} = A x_k + B u_k (+ w_k)`.
//!
//! Both the recursive update and the closed-form propagator solution are
//! written in terms of the memory matrices
//!
//! ```text
//! A_0 = A + diag(α)          (Convention::Difference)
//! A_j = −D(α, j + 1),  j ≥ 1
//! x_{k+1} = Σ_{j=0}^{k} A_j x_{k−j} + B u_k
//! G_0 = I,  G_k = Σ_{j=0}^{k−1} A_j G_{k−1−j}
//! x_k = G_k x_0 + Σ_{j=0}^{k−1} G_{k−1−j} B u_j
//! ```
//!
//! Expanding the difference operator gives `−D(α, 1) = +diag(α)` on the
//! newest state, hence the `+` in `A_0`. [`Convention::ReflectedOrder`]
//! keeps the other sign (`A_0 = A − diag(α)`) for experimentation; every
//! routine here reads `A_0` from the model so the two paths always agree.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FoctlError, Result};
use crate::gl::{FracOrder, GlCoeffTable};

/// Sign used for the `diag(α)` term of the one-step matrix `A_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `A_0 = A + diag(α)`, obtained by expanding `Δ^α x_{k+1}`.
    #[default]
    Difference,
    /// `A_0 = A − diag(α)`.
    ReflectedOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoltiModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    alpha: FracOrder,
    convention: Convention,
}

impl FoltiModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, alpha: FracOrder) -> Result<Self> {
        let n = alpha.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(FoctlError::dim("A (rows/cols vs alpha length)", n, a.nrows().max(a.ncols())));
        }
        if b.nrows() != n {
            return Err(FoctlError::dim("B rows", n, b.nrows()));
        }
        if b.ncols() == 0 {
            return Err(FoctlError::Domain("B has no columns".into()));
        }
        Ok(FoltiModel {
            a,
            b,
            alpha,
            convention: Convention::default(),
        })
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn alpha(&self) -> &FracOrder {
        &self.alpha
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Same dynamics with a different input matrix.
    pub fn with_b(&self, b: DMatrix<f64>) -> Result<Self> {
        Ok(FoltiModel::new(self.a.clone(), b, self.alpha.clone())?.with_convention(self.convention))
    }

    /// `A_0`, the coefficient of the newest state.
    pub fn one_step_matrix(&self) -> DMatrix<f64> {
        match self.convention {
            Convention::Difference => &self.a + self.alpha.diag(),
            Convention::ReflectedOrder => &self.a - self.alpha.diag(),
        }
    }
}

/// States `x_0..x_T` and inputs `u_0..u_{T−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>) -> Result<Self> {
        if states.len() != inputs.len() + 1 {
            return Err(FoctlError::dim("trajectory states (inputs + 1)", inputs.len() + 1, states.len()));
        }
        let n = states[0].len();
        if let Some(bad) = states.iter().find(|x| x.len() != n) {
            return Err(FoctlError::dim("trajectory state", n, bad.len()));
        }
        if let Some(first) = inputs.first() {
            let m = first.len();
            if let Some(bad) = inputs.iter().find(|u| u.len() != m) {
                return Err(FoctlError::dim("trajectory input", m, bad.len()));
            }
        }
        Ok(Trajectory { states, inputs })
    }

    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(|u| u.len())
    }
}

/// Propagators `G_0..G_T` with the memory matrices `A_0..A_{T−1}` that built them.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSet {
    pub g: Vec<DMatrix<f64>>,
    pub a_seq: Vec<DMatrix<f64>>,
}

impl PropagatorSet {
    pub fn horizon(&self) -> usize {
        self.g.len() - 1
    }
}

fn memory_matrices(model: &FoltiModel, count: usize) -> Vec<DMatrix<f64>> {
    if count == 0 {
        return Vec::new();
    }
    let table = GlCoeffTable::new(model.alpha(), count);
    let mut seq = Vec::with_capacity(count);
    seq.push(model.one_step_matrix());
    for j in 1..count {
        seq.push(-table.d_matrix(j + 1));
    }
    seq
}

/// `A_0 = A ± diag(α)`, `A_j = −D(α, j + 1)` for `1 ≤ j ≤ T − 1`.
pub fn a_j_sequence(model: &FoltiModel, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    if horizon == 0 {
        return Err(FoctlError::Domain("A_j sequence needs a horizon of at least 1".into()));
    }
    Ok(memory_matrices(model, horizon))
}

/// `G_0..G_T` by the block convolution recursion, `O(T² n³)`.
pub fn propagators(model: &FoltiModel, horizon: usize) -> PropagatorSet {
    let n = model.n();
    let a_seq = memory_matrices(model, horizon);
    let mut g: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    g.push(DMatrix::identity(n, n));
    for k in 1..=horizon {
        let mut gk = DMatrix::zeros(n, n);
        for (j, aj) in a_seq.iter().take(k).enumerate() {
            gk.gemm(1.0, aj, &g[k - 1 - j], 1.0);
        }
        g.push(gk);
    }
    PropagatorSet { g, a_seq }
}

/// Options for [`simulate_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep only the newest `L` past states in the memory sum. `None` keeps all.
    pub memory: Option<usize>,
}

/// Recursive simulation with full memory.
pub fn simulate(
    model: &FoltiModel,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    noise: Option<&[DVector<f64>]>,
) -> Result<Trajectory> {
    simulate_with(model, x0, inputs, noise, SimOptions::default())
}

pub fn simulate_with(
    model: &FoltiModel,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    noise: Option<&[DVector<f64>]>,
    opts: SimOptions,
) -> Result<Trajectory> {
    let (n, m) = (model.n(), model.m());
    let horizon = inputs.len();
    if x0.len() != n {
        return Err(FoctlError::dim("x0", n, x0.len()));
    }
    if let Some(bad) = inputs.iter().find(|u| u.len() != m) {
        return Err(FoctlError::dim("input", m, bad.len()));
    }
    if let Some(w) = noise {
        if w.len() != horizon {
            return Err(FoctlError::dim("noise sequence length", horizon, w.len()));
        }
        if let Some(bad) = w.iter().find(|w| w.len() != n) {
            return Err(FoctlError::dim("noise vector", n, bad.len()));
        }
    }

    let table = GlCoeffTable::new(model.alpha(), horizon + 1);
    let a0 = model.one_step_matrix();
    let mut states: Vec<DVector<f64>> = Vec::with_capacity(horizon + 1);
    states.push(x0.clone());
    for k in 0..horizon {
        let mut next = &a0 * &states[k] + model.b() * &inputs[k];
        let depth = opts.memory.map_or(k, |l| l.min(k));
        // A_j x_{k−j} = −ψ(α, j + 1) ∘ x_{k−j}
        for j in 1..=depth {
            let past = &states[k - j];
            for i in 0..n {
                next[i] -= table.coeff(i, j + 1) * past[i];
            }
        }
        if let Some(w) = noise {
            next += &w[k];
        }
        states.push(next);
    }
    Trajectory::new(states, inputs.to_vec())
}

/// `x_k = G_k x_0 + Σ_{j=0}^{k−1} G_{k−1−j} B u_j`.
pub fn closed_form_state(
    props: &PropagatorSet,
    model: &FoltiModel,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    k: usize,
) -> Result<DVector<f64>> {
    if k > props.horizon() {
        return Err(FoctlError::OutOfRange {
            index: k,
            horizon: props.horizon(),
        });
    }
    if x0.len() != model.n() {
        return Err(FoctlError::dim("x0", model.n(), x0.len()));
    }
    if inputs.len() < k {
        return Err(FoctlError::dim("inputs available for step", k, inputs.len()));
    }
    let mut x = &props.g[k] * x0;
    for (j, u) in inputs.iter().take(k).enumerate() {
        if u.len() != model.m() {
            return Err(FoctlError::dim("input", model.m(), u.len()));
        }
        x += &props.g[k - 1 - j] * (model.b() * u);
    }
    Ok(x)
}
