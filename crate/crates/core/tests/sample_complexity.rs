mod common;

use common::{bounded_model, normal_vec, stream};
use foctl::complexity::{
    bound_lagrange, bound_least_squares, monte_carlo_gap, trace_kb_closed, trace_kb_general, BoundInputs,
};
use foctl::sysid::input_design;
use nalgebra::DMatrix;

#[test]
fn closed_trace_is_the_gaussian_design_average() {
    for (n, m, p, sigma) in [(2, 2, 7, 0.1), (1, 3, 12, 1.0), (3, 1, 53, 0.5)] {
        let closed = trace_kb_closed(n, m, sigma, 1, p).unwrap();
        let k_w = DMatrix::identity(n, n) * (sigma * sigma);
        let draws = 10_000;
        let mut total = 0.0;
        for d in 0..draws {
            let mut rng = stream(50, d);
            let us: Vec<_> = (0..p).map(|_| normal_vec(m, &mut rng)).collect();
            total += trace_kb_general(&input_design(&us, n), &k_w, 1).unwrap();
        }
        let avg = total / draws as f64;
        assert!((avg / closed - 1.0).abs() <= 0.05, "(n,m,p) = ({n},{m},{p}): {avg} vs {closed}");
    }
}

#[test]
fn closed_trace_rejects_small_batches() {
    assert!(trace_kb_closed(2, 2, 0.1, 1, 3).is_err());
    assert!(trace_kb_closed(2, 2, 0.1, 0, 10).is_err());
    assert!(trace_kb_closed(2, 2, 0.1, 1, 4).is_ok());
}

fn inputs(case: u64, sigma: f64) -> BoundInputs {
    let mut rng = stream(51, case);
    let model = bounded_model(2, 2, &mut rng);
    let cost = common::cost(2, 2, false, &mut rng);
    let x0 = normal_vec(2, &mut rng);
    BoundInputs::new(&model, &cost, &x0, 8, sigma, 10, 1).unwrap()
}

#[test]
fn bounds_cover_the_empirical_gap() {
    for case in 0..4 {
        let inp = inputs(case, 0.1);
        let report = monte_carlo_gap(&inp, &[10, 50, 200], 100, case).unwrap();
        for i in 0..3 {
            let gap = report.empirical_gap[i] - 2.0 * report.gap_std_error[i];
            assert!(gap <= report.bound_ls[i], "case {case} N {}", report.n_values[i]);
            if let Some(b) = report.bound_lagrange[i] {
                assert!(gap <= b);
            }
        }
        assert_eq!(report.failures, vec![0, 0, 0]);
    }
}

#[test]
fn bounds_scale_with_the_trace() {
    let inp = inputs(9, 0.1);
    let a = bound_least_squares(&inp, 0.01).unwrap();
    let b = bound_least_squares(&inp, 0.04).unwrap();
    // TrK + 2‖B‖√TrK is increasing and sub-linear
    assert!(b > a && b < 4.0 * a);
    assert_eq!(bound_least_squares(&inp, 0.0).unwrap(), 0.0);
    assert!(bound_lagrange(&inp, 0.04).unwrap().value().unwrap() > 0.0);
}

#[test]
fn noiseless_gap_vanishes() {
    let report = monte_carlo_gap(&inputs(3, 0.0), &[10, 100], 20, 5).unwrap();
    assert!(report.empirical_gap.iter().all(|&g| g <= 1e-12));
}

#[test]
fn report_is_bit_reproducible() {
    let inp = inputs(4, 0.1);
    let first = monte_carlo_gap(&inp, &[10, 20, 40], 50, 77).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let second = pool.install(|| monte_carlo_gap(&inp, &[10, 20, 40], 50, 77)).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.to_csv(), second.to_csv());
}
