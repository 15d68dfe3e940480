use foctl::gl::{gl_difference, psi, FracOrder, GlCoeffTable};
use nalgebra::DVector;
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

/// Γ(j−α) / (Γ(−α) Γ(j+1)) through log-gamma, using |Γ(−α)| = Γ(1−α)/α.
fn psi_log_gamma(alpha: f64, j: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let j = j as f64;
    let log_mag = ln_gamma(j - alpha) - (ln_gamma(1.0 - alpha) - alpha.ln()) - ln_gamma(j + 1.0);
    -log_mag.exp()
}

#[test]
fn recurrence_matches_log_gamma_on_grid() {
    for step in 1..=9 {
        let alpha = step as f64 / 10.0;
        for j in 0..=64 {
            let rec = psi(alpha, j).unwrap();
            let oracle = psi_log_gamma(alpha, j);
            let rel = (rec - oracle).abs() / oracle.abs();
            assert!(rel <= 1e-10, "α={alpha} j={j}: {rec} vs {oracle} (rel {rel:e})");
        }
    }
}

#[test]
fn first_order_has_no_memory() {
    assert_eq!(psi(1.0, 0).unwrap(), 1.0);
    assert_eq!(psi(1.0, 1).unwrap(), -1.0);
    for j in 2..=64 {
        assert_eq!(psi(1.0, j).unwrap(), 0.0);
    }
}

#[test]
fn half_order_partial_sum_is_small() {
    let table = GlCoeffTable::new(&FracOrder::new(vec![0.5]).unwrap(), 256);
    let s: f64 = table.row(0).iter().sum();
    assert!(s.abs() < 0.1, "{s}");
}

#[test]
fn table_agrees_with_single_coefficients() {
    let alpha = FracOrder::new(vec![0.2, 0.7, 1.0]).unwrap();
    let table = GlCoeffTable::new(&alpha, 20);
    for (i, a) in alpha.iter().enumerate() {
        for j in 0..=20 {
            assert_eq!(table.coeff(i, j), psi(a, j).unwrap());
        }
    }
}

proptest! {
    #[test]
    fn recurrence_matches_log_gamma(alpha in 0.01f64..0.99, j in 0usize..=64) {
        let rec = psi(alpha, j).unwrap();
        let oracle = psi_log_gamma(alpha, j);
        prop_assert!((rec - oracle).abs() <= 1e-10 * oracle.abs());
    }

    #[test]
    fn sign_pattern(alpha in 0.01f64..0.99) {
        let table = GlCoeffTable::new(&FracOrder::new(vec![alpha]).unwrap(), 64);
        prop_assert_eq!(table.coeff(0, 0), 1.0);
        for j in 1..=64 {
            prop_assert!(table.coeff(0, j) < 0.0);
        }
    }

    #[test]
    fn partial_sums_shrink(alpha in 0.05f64..0.95) {
        let table = GlCoeffTable::new(&FracOrder::new(vec![alpha]).unwrap(), 128);
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for &c in table.row(0) {
            sum += c;
            prop_assert!(sum > 0.0 && sum < prev);
            prev = sum;
        }
    }

    #[test]
    fn difference_is_linear(
        alpha in prop::collection::vec(0.05f64..1.0, 2),
        xs in prop::collection::vec(-5.0f64..5.0, 20),
        ys in prop::collection::vec(-5.0f64..5.0, 20),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let table = GlCoeffTable::new(&FracOrder::new(alpha).unwrap(), 9);
        let hist = |v: &[f64]| v.chunks(2).map(DVector::from_column_slice).collect::<Vec<_>>();
        let (hx, hy) = (hist(&xs), hist(&ys));
        let mix: Vec<_> = hx.iter().zip(&hy).map(|(x, y)| x * a + y * b).collect();
        let lhs = gl_difference(&table, &mix).unwrap();
        let rhs = gl_difference(&table, &hx).unwrap() * a + gl_difference(&table, &hy).unwrap() * b;
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }
}
