//! Grünwald–Letnikov coefficients and the discrete fractional difference.
//!
//! For an order `α` the coefficients are
//!
//! ```text
//! ψ(α, j) = Γ(j − α) / (Γ(−α) Γ(j + 1))
//! ```
//!
//! evaluated through the multiplicative recurrence
//! `ψ(α, 0) = 1`, `ψ(α, j) = ψ(α, j − 1) · (j − 1 − α) / j`, which never
//! touches the gamma function and stays finite for every lag.
//!
//! The difference operator applied to a state history is
//! `Δ^α x_k = Σ_{j=0}^{k} D(α, j) x_{k−j}` with `D(α, j) = diag(ψ(α_i, j))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FoctlError, Result};

/// Per-state fractional orders, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FracOrder(Vec<f64>);

impl FracOrder {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(FoctlError::Domain("fractional order vector is empty".into()));
        }
        for (i, &a) in alpha.iter().enumerate() {
            check_order(a).map_err(|_| {
                FoctlError::Domain(format!("alpha[{i}] = {a} is outside (0, 1]"))
            })?;
        }
        Ok(FracOrder(alpha))
    }

    /// The same order `alpha` repeated for `n` states.
    pub fn commensurate(alpha: f64, n: usize) -> Result<Self> {
        FracOrder::new(vec![alpha; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    /// `diag(α_1, …, α_n)`.
    pub fn diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.0))
    }
}

impl TryFrom<Vec<f64>> for FracOrder {
    type Error = FoctlError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FracOrder::new(v)
    }
}

impl From<FracOrder> for Vec<f64> {
    fn from(a: FracOrder) -> Self {
        a.0
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(FoctlError::Domain(format!(
            "fractional order {alpha} is outside (0, 1]"
        )))
    }
}

/// Fills `out[0..=horizon]` with ψ(α, 0..=horizon).
fn fill_coefficients(alpha: f64, out: &mut [f64]) {
    out[0] = 1.0;
    for j in 1..out.len() {
        out[j] = if alpha == 1.0 && j >= 2 {
            0.0
        } else {
            out[j - 1] * ((j - 1) as f64 - alpha) / j as f64
        };
    }
}

/// Single Grünwald–Letnikov coefficient ψ(α, j).
pub fn psi(alpha: f64, j: usize) -> Result<f64> {
    check_order(alpha)?;
    let mut buf = vec![0.0; j + 1];
    fill_coefficients(alpha, &mut buf);
    Ok(buf[j])
}

/// `D(α, j) = diag(ψ(α_1, j), …, ψ(α_n, j))`.
pub fn d_matrix(alpha: &FracOrder, j: usize) -> Result<DMatrix<f64>> {
    let diag = alpha
        .iter()
        .map(|a| psi(a, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_diagonal(&DVector::from_vec(diag)))
}

/// Coefficients ψ(α_i, j) for every state `i` and lag `0 ≤ j ≤ horizon`.
///
/// Built once per `(α, horizon)` and shared read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct GlCoeffTable {
    alpha: FracOrder,
    horizon: usize,
    psi: Vec<Vec<f64>>,
}

impl GlCoeffTable {
    pub fn new(alpha: &FracOrder, horizon: usize) -> Self {
        let psi = alpha
            .iter()
            .map(|a| {
                let mut row = vec![0.0; horizon + 1];
                fill_coefficients(a, &mut row);
                row
            })
            .collect();
        GlCoeffTable {
            alpha: alpha.clone(),
            horizon,
            psi,
        }
    }

    pub fn alpha(&self) -> &FracOrder {
        &self.alpha
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// ψ(α_i, j). Panics if `i` or `j` is out of the table.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.psi[i][j]
    }

    /// Row of coefficients for state `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.psi[i]
    }

    /// Diagonal of `D(α, j)` as a vector.
    pub fn d_diag(&self, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.psi.iter().map(|row| row[j]))
    }

    pub fn d_matrix(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.d_diag(j))
    }
}

/// `Δ^α x_k = Σ_{j=0}^{k} D(α, j) x_{k−j}` for `history = [x_0, …, x_k]`.
pub fn gl_difference(table: &GlCoeffTable, history: &[DVector<f64>]) -> Result<DVector<f64>> {
    let n = table.dim();
    let Some(k) = history.len().checked_sub(1) else {
        return Err(FoctlError::Domain("empty state history".into()));
    };
    if k > table.horizon() {
        return Err(FoctlError::OutOfRange {
            index: k,
            horizon: table.horizon(),
        });
    }
    let mut out = DVector::zeros(n);
    for (j, x) in history.iter().rev().enumerate() {
        if x.len() != n {
            return Err(FoctlError::dim("state history", n, x.len()));
        }
        for i in 0..n {
            out[i] += table.coeff(i, j) * x[i];
        }
    }
    Ok(out)
}
