//! Block-Toeplitz operators and the dense / GMRES solvers used for the
//! Lagrange-multiplier system `(I − G_λ) λ = 2 H_λ x_0`.
//!
//! A block-Toeplitz matrix with `T × T` blocks of size `n × n` is stored by
//! its first block column and first block row only, `O(T n²)` memory; the
//! matrix-vector product runs block-row-wise in `O(T² n²)`.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FoctlError, Result};
use crate::linalg::condition_number;

/// A square linear map that can be applied and, when needed, materialized.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
    fn to_dense(&self) -> DMatrix<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockToeplitz {
    block_size: usize,
    num_blocks: usize,
    /// Blocks `(i, 0)` for `i = 0..T`.
    first_block_col: Vec<DMatrix<f64>>,
    /// Blocks `(0, j)` for `j = 0..T`; entry 0 equals `first_block_col[0]`.
    first_block_row: Vec<DMatrix<f64>>,
}

impl BlockToeplitz {
    pub fn new(first_block_col: Vec<DMatrix<f64>>, first_block_row: Vec<DMatrix<f64>>) -> Result<Self> {
        let num_blocks = first_block_col.len();
        if num_blocks == 0 {
            return Err(FoctlError::Domain("block Toeplitz matrix needs at least one block".into()));
        }
        if first_block_row.len() != num_blocks {
            return Err(FoctlError::dim("first block row length", num_blocks, first_block_row.len()));
        }
        let block_size = first_block_col[0].nrows();
        for b in first_block_col.iter().chain(&first_block_row) {
            if b.nrows() != block_size || b.ncols() != block_size {
                return Err(FoctlError::dim("Toeplitz block size", block_size, b.nrows().max(b.ncols())));
            }
        }
        if first_block_col[0] != first_block_row[0] {
            return Err(FoctlError::Domain(
                "first block column and row disagree on the diagonal block".into(),
            ));
        }
        Ok(BlockToeplitz {
            block_size,
            num_blocks,
            first_block_col,
            first_block_row,
        })
    }

    pub fn identity(block_size: usize, num_blocks: usize) -> Self {
        let zero = DMatrix::zeros(block_size, block_size);
        let mut col = vec![zero; num_blocks];
        col[0] = DMatrix::identity(block_size, block_size);
        BlockToeplitz {
            block_size,
            num_blocks,
            first_block_row: col.clone(),
            first_block_col: col,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn first_block_col(&self) -> &[DMatrix<f64>] {
        &self.first_block_col
    }

    pub fn first_block_row(&self) -> &[DMatrix<f64>] {
        &self.first_block_row
    }

    /// Block `(i, j)` of the represented matrix.
    pub fn block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        if i >= j {
            &self.first_block_col[i - j]
        } else {
            &self.first_block_row[j - i]
        }
    }

    /// Reads the generators of a dense matrix, failing unless every block
    /// diagonal is exactly constant.
    pub fn from_dense(m: &DMatrix<f64>, block_size: usize) -> Result<Self> {
        if !is_block_toeplitz(m, block_size, 0.0) {
            return Err(FoctlError::Domain("matrix is not block Toeplitz".into()));
        }
        let t = m.nrows() / block_size;
        let blk = |i: usize, j: usize| {
            m.view((i * block_size, j * block_size), (block_size, block_size))
                .into_owned()
        };
        BlockToeplitz::new(
            (0..t).map(|i| blk(i, 0)).collect(),
            (0..t).map(|j| blk(0, j)).collect(),
        )
    }

    pub fn matvec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(FoctlError::dim("block Toeplitz matvec operand", self.dim(), v.len()));
        }
        Ok(self.apply(v))
    }
}

impl LinearOperator for BlockToeplitz {
    fn dim(&self) -> usize {
        self.block_size * self.num_blocks
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.block_size;
        let mut out = DVector::zeros(self.dim());
        for i in 0..self.num_blocks {
            let mut acc = out.rows_mut(i * n, n);
            for j in 0..self.num_blocks {
                acc.gemv(1.0, self.block(i, j), &v.rows(j * n, n), 1.0);
            }
        }
        out
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.block_size;
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.num_blocks {
            for j in 0..self.num_blocks {
                m.view_mut((i * n, j * n), (n, n)).copy_from(self.block(i, j));
            }
        }
        m
    }
}

/// True when `m` is square, divisible into `block_size` blocks, and each
/// block diagonal is constant to within `tol` (absolute, entrywise).
pub fn is_block_toeplitz(m: &DMatrix<f64>, block_size: usize, tol: f64) -> bool {
    if block_size == 0 || !m.is_square() || !m.nrows().is_multiple_of(block_size) {
        return false;
    }
    let n = block_size;
    let t = m.nrows() / n;
    for i in 1..t {
        for j in 1..t {
            let here = m.view((i * n, j * n), (n, n));
            let prev = m.view(((i - 1) * n, (j - 1) * n), (n, n));
            if (here - prev).amax() > tol {
                return false;
            }
        }
    }
    true
}

/// Block-Toeplitz matrix plus an additive correction confined to the last
/// block row (rank at most one block).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedToeplitz {
    pub base: BlockToeplitz,
    /// Blocks `(T−1, j)` added to the base, `j = 0..T`.
    pub last_row: Option<Vec<DMatrix<f64>>>,
}

impl CorrectedToeplitz {
    pub fn is_pure_toeplitz(&self) -> bool {
        self.last_row.is_none()
    }
}

impl LinearOperator for CorrectedToeplitz {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = self.base.apply(v);
        if let Some(row) = &self.last_row {
            let n = self.base.block_size;
            let last = self.base.num_blocks - 1;
            let mut acc = out.rows_mut(last * n, n);
            for (j, blk) in row.iter().enumerate() {
                acc.gemv(1.0, blk, &v.rows(j * n, n), 1.0);
            }
        }
        out
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.base.to_dense();
        if let Some(row) = &self.last_row {
            let n = self.base.block_size;
            let last = self.base.num_blocks - 1;
            for (j, blk) in row.iter().enumerate() {
                let mut view = m.view_mut((last * n, j * n), (n, n));
                view += blk;
            }
        }
        m
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    #[default]
    Dense,
    Iterative,
}

impl FromStr for SolveMethod {
    type Err = FoctlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SolveMethod::Dense),
            "iterative" => Ok(SolveMethod::Iterative),
            other => Err(FoctlError::config("solver", format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual target for the iterative method.
    pub tol: f64,
    /// Inner iterations between GMRES restarts.
    pub restart: usize,
    /// Iteration cap; `None` means `10 · dim`.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Dense,
            tol: 1e-10,
            restart: 50,
            max_iter: None,
        }
    }
}

impl SolveOptions {
    pub fn dense() -> Self {
        SolveOptions::default()
    }

    pub fn iterative(tol: f64) -> Self {
        SolveOptions {
            method: SolveMethod::Iterative,
            tol,
            ..SolveOptions::default()
        }
    }
}

/// Condition estimates above this are reported as singular by the dense path.
pub const MAX_CONDITION: f64 = 1e13;

pub fn solve<O: LinearOperator + ?Sized>(op: &O, rhs: &DVector<f64>, opts: SolveOptions) -> Result<DVector<f64>> {
    if rhs.len() != op.dim() {
        return Err(FoctlError::dim("right-hand side", op.dim(), rhs.len()));
    }
    match opts.method {
        SolveMethod::Dense => dense_solve(&op.to_dense(), rhs),
        SolveMethod::Iterative => {
            let max_iter = opts.max_iter.unwrap_or(10 * op.dim().max(1));
            gmres(op, rhs, opts.tol, opts.restart, max_iter).map(|r| r.solution)
        }
    }
}

/// LU solve with a singular-value condition check.
pub fn dense_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let cond = condition_number(m);
    // NaN counts as singular
    if cond.is_nan() || cond > MAX_CONDITION {
        return Err(FoctlError::Singular {
            context: "dense block system".into(),
            condition: cond,
        });
    }
    m.clone().lu().solve(rhs).ok_or(FoctlError::Singular {
        context: "dense block system".into(),
        condition: cond,
    })
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Restarted GMRES(`restart`) with modified Gram–Schmidt and Givens
/// rotations, started from zero.
pub fn gmres<O: LinearOperator + ?Sized>(
    op: &O,
    rhs: &DVector<f64>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresOutcome> {
    let dim = op.dim();
    let bnorm = rhs.norm();
    let mut x = DVector::zeros(dim);
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let restart = restart.clamp(1, dim.max(1));
    let mut iterations = 0;
    let mut rel: f64;

    while iterations < max_iter {
        let r = rhs - op.apply(&x);
        let beta = r.norm();
        rel = beta / bnorm;
        if rel <= tol {
            break;
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r / beta);
        let mut h = DMatrix::<f64>::zeros(restart + 1, restart);
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = DVector::<f64>::zeros(restart + 1);
        g[0] = beta;
        let mut used = 0;

        for j in 0..restart {
            let mut w = op.apply(&basis[j]);
            iterations += 1;
            // two passes of MGS keep the basis orthogonal on stiff systems
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = w.dot(v);
                    h[(i, j)] += c;
                    w.axpy(-c, v, 1.0);
                }
            }
            let wn = w.norm();
            h[(j + 1, j)] = wn;

            for i in 0..j {
                let t = cs[i] * h[(i, j)] + sn[i] * h[(i + 1, j)];
                h[(i + 1, j)] = -sn[i] * h[(i, j)] + cs[i] * h[(i + 1, j)];
                h[(i, j)] = t;
            }
            let (a, b) = (h[(j, j)], h[(j + 1, j)]);
            let rho = a.hypot(b);
            if rho == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = a / rho;
                sn[j] = b / rho;
            }
            h[(j, j)] = rho;
            h[(j + 1, j)] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;

            let breakdown = wn <= f64::EPSILON * beta;
            if !breakdown {
                basis.push(w / wn);
            }
            if g[j + 1].abs() / bnorm <= tol || breakdown || iterations >= max_iter {
                break;
            }
        }

        // back substitution on the rotated Hessenberg matrix
        let mut y = DVector::<f64>::zeros(used);
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[(i, k)] * y[k];
            }
            if h[(i, i)] == 0.0 {
                return Err(FoctlError::NotConverged {
                    iterations,
                    residual: rel,
                });
            }
            y[i] = s / h[(i, i)];
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i], 1.0);
        }
    }

    rel = (rhs - op.apply(&x)).norm() / bnorm;
    if rel <= tol {
        Ok(GmresOutcome {
            solution: x,
            iterations,
            relative_residual: rel,
        })
    } else {
        Err(FoctlError::NotConverged {
            iterations,
            residual: rel,
        })
    }
}
