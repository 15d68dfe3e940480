#![allow(dead_code)]

use foctl::forge::{self, AlphaMode, GenSpec, StabilityMode};
use foctl::rng::{derive, Stream};
use foctl::{CostSpec, FoltiModel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn stream(tag: u64, case: u64) -> Stream {
    derive(0x7e57, &[tag, case])
}

pub fn normal_vec(n: usize, rng: &mut Stream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn uniform_vec(n: usize, rng: &mut Stream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0))
}

/// Bounded-memory model with componentwise orders in [0.1, 0.9].
pub fn bounded_model(n: usize, m: usize, rng: &mut Stream) -> FoltiModel {
    let spec = GenSpec {
        n,
        m,
        alpha_mode: AlphaMode::Componentwise,
        stability: StabilityMode::MemoryBounded,
        ..GenSpec::default()
    };
    forge::random_model(&spec, rng).unwrap()
}

/// Cost with `Q, Q_f ⪰ 0` shifted to be well conditioned and `R ≻ 0`.
pub fn cost(n: usize, m: usize, terminal_equals_stage: bool, rng: &mut Stream) -> CostSpec {
    let base = forge::random_cost(n, m, rng).unwrap();
    let q = base.q() + DMatrix::identity(n, n) * 0.1;
    let r = base.r() + DMatrix::identity(m, m) * 0.1;
    let q_f = if terminal_equals_stage {
        q.clone()
    } else {
        base.q_f() + DMatrix::identity(n, n) * 0.1
    };
    CostSpec::new(q, r, q_f).unwrap()
}

pub struct Instance {
    pub model: FoltiModel,
    pub cost: CostSpec,
    pub x0: DVector<f64>,
    pub horizon: usize,
}

pub fn instance(rng: &mut Stream, max_dim: usize, max_horizon: usize, terminal_equals_stage: bool) -> Instance {
    let n = rng.random_range(1..=max_dim);
    let m = rng.random_range(1..=max_dim);
    let horizon = rng.random_range(2..=max_horizon);
    let model = bounded_model(n, m, rng);
    let cost = cost(n, m, terminal_equals_stage, rng);
    let x0 = normal_vec(n, rng);
    Instance { model, cost, x0, horizon }
}

pub fn stack(v: &[DVector<f64>]) -> DVector<f64> {
    foctl::linalg::stack(v)
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}
