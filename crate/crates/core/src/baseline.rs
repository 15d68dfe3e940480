//! Integer-order baseline: fit `x_{k+1} = A_L x_k + B_L u_k` by least squares
//! and compare its multi-step predictions with the one-step FOLTI estimator.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{simulate, Convention, FoltiModel, Trajectory};
use crate::error::{FoctlError, Result};
use crate::gl::FracOrder;
use crate::linalg::spd_solve;
use crate::sysid::{estimate, IdentifiedParams, RegressionData};

/// Smallest order used when an estimate falls outside `(0, 1]`.
pub const MIN_ORDER: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LtiModel {
    /// Noise-free prediction of `x_1..x_T` from `x_0` and the inputs.
    pub fn predict(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut x = x0.clone();
        inputs
            .iter()
            .map(|u| {
                x = &self.a * &x + &self.b * u;
                x.clone()
            })
            .collect()
    }
}

/// Least squares over every transition of every trajectory.
pub fn fit_lti(trajs: &[Trajectory]) -> Result<LtiModel> {
    let first = trajs
        .iter()
        .find(|t| t.horizon() > 0)
        .ok_or_else(|| FoctlError::Domain("no transitions to fit".into()))?;
    let n = first.state_dim();
    let m = first.input_dim().unwrap_or(0);
    let d = n + m;
    let mut zz = DMatrix::zeros(d, d);
    let mut zy = DMatrix::zeros(d, n);
    let mut z = DVector::zeros(d);
    let mut count = 0;
    for t in trajs {
        for k in 0..t.horizon() {
            z.rows_mut(0, n).copy_from(&t.states[k]);
            z.rows_mut(n, m).copy_from(&t.inputs[k]);
            zz.ger(1.0, &z, &z, 1.0);
            zy.ger(1.0, &z, &t.states[k + 1], 1.0);
            count += 1;
        }
    }
    if count < d {
        return Err(FoctlError::Identifiability {
            unknowns: n * d,
            rank: count * n,
            nullity: (d - count) * n,
        });
    }
    let theta = spd_solve(zz, &zy, "LTI regression").map_err(|_| FoctlError::Identifiability {
        unknowns: n * d,
        rank: 0,
        nullity: 0,
    })?;
    let theta_t = theta.transpose();
    Ok(LtiModel {
        a: theta_t.columns(0, n).into_owned(),
        b: theta_t.columns(n, m).into_owned(),
    })
}

/// FOLTI model from the one-step estimator. The estimated orders are
/// clamped into `[MIN_ORDER, 1]` and `A` is set so that the one-step
/// matrix equals `Â_α` exactly.
pub fn fit_folti(trajs: &[Trajectory], known_diag_a: &DVector<f64>, convention: Convention) -> Result<(FoltiModel, IdentifiedParams)> {
    let data = RegressionData::from_trajectories(trajs, known_diag_a.clone())?;
    let est = estimate(&data)?;
    let sign = match convention {
        Convention::Difference => 1.0,
        Convention::ReflectedOrder => -1.0,
    };
    let alpha: Vec<f64> = est.alpha_hat.iter().map(|a| (sign * a).clamp(MIN_ORDER, 1.0)).collect();
    let alpha = FracOrder::new(alpha)?;
    let a = &est.a_alpha_hat - alpha.diag() * sign;
    let model = FoltiModel::new(a, est.b_hat.clone(), alpha)?.with_convention(convention);
    Ok((model, est))
}

/// Mean squared error of `predicted` against `x_1..x_T` of `traj`.
pub fn prediction_mse(traj: &Trajectory, predicted: &[DVector<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, x) in predicted.iter().zip(&traj.states[1..]) {
        total += (p - x).norm_squared();
        count += p.len();
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub folti_mse: f64,
    pub lti_mse: f64,
    /// `folti_mse / lti_mse`.
    pub ratio: f64,
    /// `1 − ratio`.
    pub reduction: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub horizon: usize,
    pub folti: FoltiModel,
    pub alpha_hat: DVector<f64>,
    pub lti: LtiModel,
}

/// Fits both estimators on the first `n_train` trajectories and scores
/// multi-step predictions over the first `horizon` steps of the rest.
pub fn compare(
    trajs: &[Trajectory],
    known_diag_a: &DVector<f64>,
    convention: Convention,
    n_train: usize,
    horizon: Option<usize>,
) -> Result<BaselineReport> {
    if trajs.is_empty() {
        return Err(FoctlError::config("dataset", "contains no trajectories"));
    }
    if n_train == 0 || n_train >= trajs.len() {
        return Err(FoctlError::config(
            "train",
            format!("training count {n_train} must be between 1 and {}", trajs.len() - 1),
        ));
    }
    let (train, test) = trajs.split_at(n_train);
    let (folti, est) = fit_folti(train, known_diag_a, convention)?;
    let lti = fit_lti(train)?;

    let mut folti_total = 0.0;
    let mut lti_total = 0.0;
    let mut used = usize::MAX;
    for t in test {
        let steps = horizon.map_or(t.horizon(), |h| h.min(t.horizon()));
        used = used.min(steps);
        let inputs = &t.inputs[..steps];
        let fp = simulate(&folti, &t.states[0], inputs, None)?;
        folti_total += prediction_mse(t, &fp.states[1..]);
        lti_total += prediction_mse(t, &lti.predict(&t.states[0], inputs));
    }
    let folti_mse = folti_total / test.len() as f64;
    let lti_mse = lti_total / test.len() as f64;
    let ratio = folti_mse / lti_mse;
    Ok(BaselineReport {
        folti_mse,
        lti_mse,
        ratio,
        reduction: 1.0 - ratio,
        n_train,
        n_test: test.len(),
        horizon: used,
        folti,
        alpha_hat: est.alpha_hat,
        lti,
    })
}
