//! One-step least-squares identification.
//!
//! The first transition of a FOLTI trajectory is
//! `x_1 = (A + diag(α)) x_0 + B u_0 + w_0 = A_α x_0 + B u_0 + w_0`,
//! which is linear in `θ = [γ_1; …; γ_n; β_1; …; β_n]` where `γ_r`, `β_r` are
//! the `r`-th rows of `A_α` and `B`. Stacking `p` samples gives
//! `X = ξ θ + w` with `ξ = [π, φ]`, and `θ̂ = (ξᵀξ)⁻¹ ξᵀ X`.
//!
//! `A` and `α` only enter through `A_α`; with `diag(A)` known the orders are
//! read off the diagonal, `α̂_i = (Â_α)_{ii} − A_{ii}`.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::Trajectory;
use crate::error::{FoctlError, Result};
use crate::linalg::{spd_inverse, spd_solve};

/// One-step sample `(x_0, u_0, x_1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub x0: DVector<f64>,
    pub u0: DVector<f64>,
    pub x1: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub samples: Vec<Transition>,
    pub known_diag_a: DVector<f64>,
}

impl RegressionData {
    pub fn new(samples: Vec<Transition>, known_diag_a: DVector<f64>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| FoctlError::Domain("regression needs at least one sample".into()))?;
        let (n, m) = (first.x0.len(), first.u0.len());
        if known_diag_a.len() != n {
            return Err(FoctlError::dim("known diag(A)", n, known_diag_a.len()));
        }
        for s in &samples {
            if s.x0.len() != n || s.x1.len() != n {
                return Err(FoctlError::dim("sample state", n, s.x0.len().max(s.x1.len())));
            }
            if s.u0.len() != m {
                return Err(FoctlError::dim("sample input", m, s.u0.len()));
            }
        }
        Ok(RegressionData {
            samples,
            known_diag_a,
        })
    }

    /// Uses only the first transition of each trajectory; later steps carry
    /// memory terms the one-step regression does not model.
    pub fn from_trajectories(trajs: &[Trajectory], known_diag_a: DVector<f64>) -> Result<Self> {
        let samples = trajs
            .iter()
            .filter(|t| t.horizon() >= 1)
            .map(|t| Transition {
                x0: t.states[0].clone(),
                u0: t.inputs[0].clone(),
                x1: t.states[1].clone(),
            })
            .collect();
        RegressionData::new(samples, known_diag_a)
    }

    pub fn n(&self) -> usize {
        self.samples[0].x0.len()
    }

    pub fn m(&self) -> usize {
        self.samples[0].u0.len()
    }

    pub fn p(&self) -> usize {
        self.samples.len()
    }

    /// `n² + nm`.
    pub fn unknowns(&self) -> usize {
        let (n, m) = (self.n(), self.m());
        n * n + n * m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedParams {
    /// Estimate of `A + diag(α)`.
    pub a_alpha_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub alpha_hat: DVector<f64>,
    /// Covariance of `θ̂` when the noise covariance was supplied.
    pub theta_cov: Option<DMatrix<f64>>,
    /// `‖X − ξ θ̂‖₂`.
    pub residual_norm: f64,
}

impl IdentifiedParams {
    /// `Â = Â_α − diag(α̂)`, which has the known diagonal by construction.
    pub fn a_hat(&self) -> DMatrix<f64> {
        &self.a_alpha_hat - DMatrix::from_diagonal(&self.alpha_hat)
    }
}

/// Design matrix `ξ` (`pn × (n² + nm)`) and target `X` (`pn`).
pub fn build_regression(data: &RegressionData) -> (DMatrix<f64>, DVector<f64>) {
    let (n, m, p) = (data.n(), data.m(), data.p());
    let mut xi = DMatrix::zeros(p * n, n * n + n * m);
    let mut target = DVector::zeros(p * n);
    for (i, s) in data.samples.iter().enumerate() {
        for r in 0..n {
            let row = i * n + r;
            for c in 0..n {
                xi[(row, r * n + c)] = s.x0[c];
            }
            for c in 0..m {
                xi[(row, n * n + r * m + c)] = s.u0[c];
            }
            target[row] = s.x1[r];
        }
    }
    (xi, target)
}

fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let tol = sv.max() * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

/// `θ̂` by orthogonal factorization of `ξ`.
pub fn estimate(data: &RegressionData) -> Result<IdentifiedParams> {
    let (n, m) = (data.n(), data.m());
    let unknowns = data.unknowns();
    let (xi, target) = build_regression(data);
    let r = rank(&xi);
    if r < unknowns {
        return Err(FoctlError::Identifiability {
            unknowns,
            rank: r,
            nullity: unknowns - r,
        });
    }
    let qr = xi.clone().qr();
    let qtb = qr.q().transpose() * &target;
    let theta = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(FoctlError::Identifiability {
            unknowns,
            rank: r,
            nullity: 0,
        })?;
    let residual_norm = (&target - &xi * &theta).norm();

    let a_alpha_hat = DMatrix::from_row_slice(n, n, &theta.as_slice()[..n * n]);
    let b_hat = DMatrix::from_row_slice(n, m, &theta.as_slice()[n * n..]);
    let alpha_hat = a_alpha_hat.diagonal() - &data.known_diag_a;
    Ok(IdentifiedParams {
        a_alpha_hat,
        b_hat,
        alpha_hat,
        theta_cov: None,
        residual_norm,
    })
}

/// [`estimate`] plus `theta_cov` for per-sample noise covariance `noise_cov`.
pub fn estimate_with_covariance(
    data: &RegressionData,
    noise_cov: &DMatrix<f64>,
    n_repeats: usize,
) -> Result<IdentifiedParams> {
    let mut est = estimate(data)?;
    let (xi, _) = build_regression(data);
    est.theta_cov = Some(theta_covariance(&xi, noise_cov, n_repeats)?);
    Ok(est)
}

/// `(1/N) (ξᵀξ)⁻¹ ξᵀ (I_p ⊗ K_w) ξ (ξᵀξ)⁻¹`, with `K_w` the `n × n`
/// covariance of one sample's noise and `n` read from its size.
pub fn theta_covariance(xi: &DMatrix<f64>, noise_cov: &DMatrix<f64>, n_repeats: usize) -> Result<DMatrix<f64>> {
    let n = noise_cov.nrows();
    if !noise_cov.is_square() || n == 0 || !xi.nrows().is_multiple_of(n) {
        return Err(FoctlError::dim("design rows (multiple of noise size)", n, xi.nrows()));
    }
    if n_repeats == 0 {
        return Err(FoctlError::Domain("number of repeats must be positive".into()));
    }
    let gram = xi.transpose() * xi;
    let inv = spd_inverse(&gram, "ξᵀξ")?;
    let mut middle = DMatrix::zeros(xi.ncols(), xi.ncols());
    for i in 0..xi.nrows() / n {
        let block = xi.rows(i * n, n);
        middle += block.transpose() * noise_cov * block;
    }
    let cov = &inv * middle * &inv / n_repeats as f64;
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Input-block design `φ` (`pn × nm`) for inputs `u_0^i`.
pub fn input_design(inputs: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let m = inputs.first().map_or(0, |u| u.len());
    let mut phi = DMatrix::zeros(inputs.len() * n, n * m);
    for (i, u) in inputs.iter().enumerate() {
        for r in 0..n {
            for c in 0..m {
                phi[(i * n + r, r * m + c)] = u[c];
            }
        }
    }
    phi
}

/// `B̂` when `A_α` is known: regress `y_i = x_1^i − A_α x_0^i` on `u_0^i`.
///
/// `φᵀφ = I_n ⊗ Σ u uᵀ`, so the regression splits into one `m × m` solve
/// shared by all rows of `B`.
pub fn estimate_input_matrix(inputs: &[DVector<f64>], residual_targets: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = inputs.first() else {
        return Err(FoctlError::Domain("regression needs at least one sample".into()));
    };
    if residual_targets.len() != inputs.len() {
        return Err(FoctlError::dim("regression targets", inputs.len(), residual_targets.len()));
    }
    let (m, n) = (first.len(), residual_targets[0].len());
    let mut uu = DMatrix::zeros(m, m);
    let mut uy = DMatrix::zeros(m, n);
    for (u, y) in inputs.iter().zip(residual_targets) {
        uu.ger(1.0, u, u, 1.0);
        uy.ger(1.0, u, y, 1.0);
    }
    if inputs.len() < m {
        return Err(FoctlError::Identifiability {
            unknowns: n * m,
            rank: inputs.len() * n,
            nullity: (m - inputs.len()) * n,
        });
    }
    let bt = spd_solve(uu, &uy, "Σ u uᵀ")?;
    Ok(bt.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn sample(x0: &[f64], u0: &[f64], x1: &[f64]) -> Transition {
        Transition {
            x0: v(x0),
            u0: v(u0),
            x1: v(x1),
        }
    }

    #[test]
    fn scalar_layouts() {
        let d = RegressionData::new(vec![sample(&[2.0], &[3.0], &[7.0])], v(&[0.0])).unwrap();
        let (xi, x) = build_regression(&d);
        assert_eq!(xi, DMatrix::from_row_slice(1, 2, &[2.0, 3.0]));
        assert_eq!(x, v(&[7.0]));

        let d = RegressionData::new(
            vec![sample(&[1.0], &[1.0], &[0.0]), sample(&[2.0], &[-1.0], &[0.0])],
            v(&[0.0]),
        )
        .unwrap();
        let (xi, _) = build_regression(&d);
        assert_eq!(xi, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, -1.0]));
    }

    #[test]
    fn two_state_layout() {
        let d = RegressionData::new(vec![sample(&[1.0, 2.0], &[3.0], &[0.0, 0.0])], v(&[0.0, 0.0])).unwrap();
        let (xi, _) = build_regression(&d);
        let expect = DMatrix::from_row_slice(2, 6, &[1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 3.0]);
        assert_eq!(xi, expect);
    }

    #[test]
    fn scalar_noiseless_recovery() {
        let d = RegressionData::new(
            vec![sample(&[1.0], &[1.0], &[1.8]), sample(&[2.0], &[-1.0], &[0.6])],
            v(&[0.3]),
        )
        .unwrap();
        let est = estimate(&d).unwrap();
        assert!((est.a_alpha_hat[(0, 0)] - 0.8).abs() < 1e-14);
        assert!((est.b_hat[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((est.alpha_hat[0] - 0.5).abs() < 1e-14);
        assert!((est.a_hat()[(0, 0)] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn underdetermined_is_rejected() {
        let d = RegressionData::new(vec![sample(&[1.0], &[1.0], &[1.8])], v(&[0.3])).unwrap();
        match estimate(&d) {
            Err(FoctlError::Identifiability { unknowns, nullity, .. }) => {
                assert_eq!(unknowns, 2);
                assert_eq!(nullity, 1);
            }
            other => panic!("expected identifiability error, got {other:?}"),
        }
        assert!(RegressionData::new(vec![], v(&[0.0])).is_err());
    }

    #[test]
    fn covariance_trivial_cases() {
        let xi = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let zero = theta_covariance(&xi, &DMatrix::zeros(2, 2), 1).unwrap();
        assert_eq!(zero, DMatrix::zeros(2, 2));
        let s2 = 0.09;
        let cov = theta_covariance(&xi, &(DMatrix::identity(2, 2) * s2), 1).unwrap();
        assert!((cov - DMatrix::identity(2, 2) * s2).amax() < 1e-15);
        let cov = theta_covariance(&xi, &(DMatrix::identity(2, 2) * s2), 3).unwrap();
        assert!((cov - DMatrix::identity(2, 2) * (s2 / 3.0)).amax() < 1e-15);
        assert!(theta_covariance(&DMatrix::zeros(4, 2), &DMatrix::identity(2, 2), 1).is_err());
    }

    #[test]
    fn input_matrix_recovery() {
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 0.25, 2.0]);
        let us: Vec<_> = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]].iter().map(|u| v(u)).collect();
        let ys: Vec<_> = us.iter().map(|u| &b * u).collect();
        let bh = estimate_input_matrix(&us, &ys).unwrap();
        assert!((bh - &b).amax() < 1e-14);
        let phi = input_design(&us, 2);
        assert_eq!(phi.shape(), (6, 4));
        assert_eq!(phi.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
