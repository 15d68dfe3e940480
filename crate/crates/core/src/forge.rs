//! Seeded synthetic models, costs, noise and trajectory datasets.
//!
//! Every random draw comes from a stream derived from the user seed and the
//! purpose/index of the draw, so a dataset does not depend on thread count.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Gamma, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagators, simulate, Convention, FoltiModel, Trajectory};
use crate::error::{FoctlError, Result};
use crate::gl::FracOrder;
use crate::linalg::spectral_radius;
use crate::lqr::{build_stacked, solve_least_squares, CostSpec};
use crate::rng::{derive, Stream};

/// Target spectral radius of generated `A`.
pub const SPECTRAL_RADIUS_TARGET: f64 = 0.95;
/// Ridge added to `R` so it is strictly positive definite.
pub const R_RIDGE: f64 = 1e-6;
/// Half-width of the sinc² sampling domain.
pub const SINC_TRUNCATION: f64 = 8.0 * PI;

const STREAM_MODEL: u64 = 0;
const STREAM_TRAJECTORY: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Use this vector as is.
    Fixed(Vec<f64>),
    /// One order uniform on `[0.1, 0.9]` shared by all states.
    Commensurate,
    /// Independent orders uniform on `[0.1, 0.9]`.
    Componentwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMode {
    /// `A` uniform on `[−1, 1]` scaled to spectral radius at most 0.95.
    #[default]
    SpectralRadius,
    /// `A_0` has row absolute sums at most `0.95 α_i`, which together with
    /// `Σ_{j≥2} |ψ(α_i, j)| = 1 − α_i` keeps every trajectory bounded.
    /// The spectral radius of `A` itself is not constrained.
    MemoryBounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Cauchy,
    Gamma,
    SincSquared,
    Uniform,
    Poisson,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 6] = [
        NoiseFamily::Gaussian,
        NoiseFamily::Cauchy,
        NoiseFamily::Gamma,
        NoiseFamily::SincSquared,
        NoiseFamily::Uniform,
        NoiseFamily::Poisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Cauchy => "cauchy",
            NoiseFamily::Gamma => "gamma",
            NoiseFamily::SincSquared => "sinc_squared",
            NoiseFamily::Uniform => "uniform",
            NoiseFamily::Poisson => "poisson",
        }
    }

    /// Cauchy has no variance; `σ` is its scale.
    pub fn has_variance(self) -> bool {
        self != NoiseFamily::Cauchy
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseFamily {
    type Err = FoctlError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        NoiseFamily::ALL
            .into_iter()
            .find(|f| f.name() == key || (key == "sinc2" && *f == NoiseFamily::SincSquared))
            .ok_or_else(|| FoctlError::UnknownNoise(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub n_trajectories: usize,
    pub alpha_mode: AlphaMode,
    pub noise_family: NoiseFamily,
    pub noise_scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub stability: StabilityMode,
    #[serde(default)]
    pub convention: Convention,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            n: 2,
            m: 2,
            horizon: 64,
            n_trajectories: 100,
            alpha_mode: AlphaMode::Commensurate,
            noise_family: NoiseFamily::Gaussian,
            noise_scale: 0.01,
            seed: 0,
            stability: StabilityMode::SpectralRadius,
            convention: Convention::Difference,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(FoctlError::config("n", "must be positive"));
        }
        if self.m == 0 {
            return Err(FoctlError::config("m", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(FoctlError::config("horizon", "must be positive"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(FoctlError::config("noise_scale", "must be finite and non-negative"));
        }
        if let AlphaMode::Fixed(a) = &self.alpha_mode {
            if a.len() != self.n {
                return Err(FoctlError::config(
                    "alpha_mode.fixed",
                    format!("expected {} orders, got {}", self.n, a.len()),
                ));
            }
            FracOrder::new(a.clone()).map_err(|e| FoctlError::config("alpha_mode.fixed", e.to_string()))?;
        }
        Ok(())
    }
}

fn uniform_matrix(rows: usize, cols: usize, rng: &mut Stream) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

fn draw_alpha(mode: &AlphaMode, n: usize, rng: &mut Stream) -> Result<FracOrder> {
    match mode {
        AlphaMode::Fixed(a) => FracOrder::new(a.clone()),
        AlphaMode::Commensurate => FracOrder::commensurate(rng.random_range(0.1..=0.9), n),
        AlphaMode::Componentwise => FracOrder::new((0..n).map(|_| rng.random_range(0.1..=0.9)).collect()),
    }
}

pub fn random_model(spec: &GenSpec, rng: &mut Stream) -> Result<FoltiModel> {
    let n = spec.n;
    let raw = uniform_matrix(n, n, rng);
    let b = uniform_matrix(n, spec.m, rng);
    let alpha = draw_alpha(&spec.alpha_mode, n, rng)?;
    let a = match spec.stability {
        StabilityMode::SpectralRadius => {
            let rho = spectral_radius(&raw);
            if rho > 0.0 {
                raw * (SPECTRAL_RADIUS_TARGET / rho)
            } else {
                raw
            }
        }
        StabilityMode::MemoryBounded => {
            let mut e = raw;
            for (i, a_i) in alpha.iter().enumerate() {
                let sum: f64 = e.row(i).iter().map(|v| v.abs()).sum();
                if sum > 0.0 {
                    let s = SPECTRAL_RADIUS_TARGET * a_i / sum;
                    e.row_mut(i).scale_mut(s);
                }
            }
            match spec.convention {
                Convention::Difference => e - alpha.diag(),
                Convention::ReflectedOrder => e + alpha.diag(),
            }
        }
    };
    Ok(FoltiModel::new(a, b, alpha)?.with_convention(spec.convention))
}

fn gram(m: DMatrix<f64>) -> DMatrix<f64> {
    let g = m.tr_mul(&m);
    (&g + g.transpose()) * 0.5
}

/// `Q = MᵀM`, `R = M'ᵀM' + 1e−6 I`, `Q_f = M''ᵀM''`.
pub fn random_cost(n: usize, m: usize, rng: &mut Stream) -> Result<CostSpec> {
    let q = gram(uniform_matrix(n, n, rng));
    let r = gram(uniform_matrix(m, m, rng)) + DMatrix::identity(m, m) * R_RIDGE;
    let q_f = gram(uniform_matrix(n, n, rng));
    CostSpec::new(q, r, q_f)
}

fn sinc_std() -> f64 {
    static STD: OnceLock<f64> = OnceLock::new();
    *STD.get_or_init(|| {
        // Z = ∫ sinc² over the domain by composite Simpson; the second
        // moment is ∫ sin² = L exactly.
        let l = SINC_TRUNCATION;
        let steps = 1 << 16;
        let h = 2.0 * l / steps as f64;
        let f = |x: f64| if x == 0.0 { 1.0 } else { (x.sin() / x).powi(2) };
        let mut z = f(-l) + f(l);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            z += w * f(-l + i as f64 * h);
        }
        z *= h / 3.0;
        (l / z).sqrt()
    })
}

fn sample_sinc_squared(rng: &mut Stream) -> f64 {
    loop {
        let x: f64 = rng.random_range(-SINC_TRUNCATION..=SINC_TRUNCATION);
        let p = if x == 0.0 { 1.0 } else { (x.sin() / x).powi(2) };
        if rng.random::<f64>() < p {
            return x;
        }
    }
}

/// `horizon` noise vectors of size `n`, each entry zero mean with standard
/// deviation `scale` (scale parameter for Cauchy). The sinc² density is
/// symmetric so it needs no centering.
pub fn sample_noise(
    family: NoiseFamily,
    scale: f64,
    horizon: usize,
    n: usize,
    rng: &mut Stream,
) -> Result<Vec<DVector<f64>>> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(FoctlError::Domain(format!("noise scale must be finite and non-negative, got {scale}")));
    }
    if scale == 0.0 {
        return Ok(vec![DVector::zeros(n); horizon]);
    }
    let bad = |e: &dyn fmt::Display| FoctlError::Domain(e.to_string());
    let mut draw: Box<dyn FnMut(&mut Stream) -> f64> = match family {
        NoiseFamily::Gaussian => {
            let d = Normal::new(0.0, scale).map_err(|e| bad(&e))?;
            Box::new(move |r| d.sample(r))
        }
        NoiseFamily::Uniform => {
            let h = scale * 3f64.sqrt();
            Box::new(move |r| r.random_range(-h..=h))
        }
        NoiseFamily::Gamma => {
            let theta = scale / 2f64.sqrt();
            let d = Gamma::new(2.0, theta).map_err(|e| bad(&e))?;
            Box::new(move |r| d.sample(r) - 2.0 * theta)
        }
        NoiseFamily::Poisson => {
            let d = Poisson::new(1.0).map_err(|e| bad(&e))?;
            Box::new(move |r| scale * (d.sample(r) - 1.0))
        }
        NoiseFamily::Cauchy => {
            let d = Cauchy::new(0.0, scale).map_err(|e| bad(&e))?;
            Box::new(move |r| d.sample(r))
        }
        NoiseFamily::SincSquared => {
            let s = scale / sinc_std();
            Box::new(move |r| s * sample_sinc_squared(r))
        }
    };
    Ok((0..horizon)
        .map(|_| DVector::from_fn(n, |_, _| draw(rng)))
        .collect())
}

/// What produced a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: GenSpec,
    pub version: String,
    pub r_ridge: f64,
    pub sinc_truncation: f64,
}

impl Provenance {
    pub fn new(spec: GenSpec) -> Self {
        Provenance {
            spec,
            version: crate::VERSION.to_string(),
            r_ridge: R_RIDGE,
            sinc_truncation: SINC_TRUNCATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub model: FoltiModel,
    pub trajectories: Vec<Trajectory>,
    pub costs: Vec<CostSpec>,
    /// Noise-free optimal inputs for each trajectory's `x_0` and cost.
    pub optimal_controls: Vec<Vec<DVector<f64>>>,
    pub optimal_costs: Vec<f64>,
    /// `w_0..w_{T−1}` actually applied to each trajectory.
    pub noise: Vec<Vec<DVector<f64>>>,
    pub provenance: Provenance,
}

struct Generated {
    trajectory: Trajectory,
    cost: CostSpec,
    controls: Vec<DVector<f64>>,
    optimal_cost: f64,
    noise: Vec<DVector<f64>>,
}

pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let model = random_model(spec, &mut derive(spec.seed, &[STREAM_MODEL]))?;
    let props = propagators(&model, spec.horizon);
    let (n, m, t) = (spec.n, spec.m, spec.horizon);

    let items: Vec<Generated> = (0..spec.n_trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive(spec.seed, &[STREAM_TRAJECTORY, i as u64]);
            let x0 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let inputs: Vec<DVector<f64>> = (0..t)
                .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
                .collect();
            let noise = sample_noise(spec.noise_family, spec.noise_scale, t, n, &mut rng)?;
            let cost = random_cost(n, m, &mut rng)?;
            let trajectory = simulate(&model, &x0, &inputs, Some(&noise))?;
            let sys = build_stacked(&model, &props, &cost, t)?;
            let sol = solve_least_squares(&sys, &x0)?;
            Ok(Generated {
                trajectory,
                cost,
                controls: sol.u_seq,
                optimal_cost: sol.cost,
                noise,
            })
        })
        .collect::<Result<_>>()?;

    let mut ds = Dataset {
        model,
        trajectories: Vec::with_capacity(items.len()),
        costs: Vec::with_capacity(items.len()),
        optimal_controls: Vec::with_capacity(items.len()),
        optimal_costs: Vec::with_capacity(items.len()),
        noise: Vec::with_capacity(items.len()),
        provenance: Provenance::new(spec.clone()),
    };
    for g in items {
        ds.trajectories.push(g.trajectory);
        ds.costs.push(g.cost);
        ds.optimal_controls.push(g.controls);
        ds.optimal_costs.push(g.optimal_cost);
        ds.noise.push(g.noise);
    }
    Ok(ds)
}
