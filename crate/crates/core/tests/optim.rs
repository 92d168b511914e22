use liftlab::optim::*;
use proptest::prelude::*;

fn rosenbrock(x: &[f64]) -> f64 {
    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

#[test]
fn finds_the_rosenbrock_minimum() {
    let opts = NelderMead { max_evals: 2000, f_tol: 1e-14, x_tol: 1e-10 };
    let dirs = vec![axis_simplex(0.5, &[true, true]); 3];
    let m = minimize(rosenbrock, &[-1.2, 1.0], &dirs, &opts);
    assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    assert!(m.evals <= 2000);
}

#[test]
fn budget_is_respected_and_best_is_monotone() {
    let opts = NelderMead { max_evals: 37, ..NelderMead::default() };
    let dirs = vec![axis_simplex(0.3, &[true, false, true]); 4];
    let m = minimize(|x: &[f64]| x.iter().map(|v| (v - 0.2).powi(2)).sum::<f64>().sqrt(), &[1.0, -1.0, 2.0], &dirs, &opts);
    assert_eq!(m.evals, 37);
    assert_eq!(m.history.len(), 37);
    assert!(m.history.windows(2).all(|w| w[1].best <= w[0].best));
    let min = m.history.iter().map(|e| e.f).fold(f64::INFINITY, f64::min);
    assert_eq!(m.f, min);
}

#[test]
fn zero_and_single_budgets() {
    let dirs = vec![axis_simplex(1.0, &[true])];
    let m = minimize(|x: &[f64]| x[0] * x[0], &[3.0], &dirs, &NelderMead { max_evals: 0, ..NelderMead::default() });
    assert_eq!(m.evals, 0);
    assert_eq!(m.x, vec![3.0]);
    let m = minimize(|x: &[f64]| x[0] * x[0], &[3.0], &dirs, &NelderMead { max_evals: 1, ..NelderMead::default() });
    assert_eq!((m.evals, m.f), (1, 9.0));
}

#[test]
fn nan_is_treated_as_worst() {
    let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) };
    let m = minimize(f, &[0.5], &[vec![vec![-1.0]]], &NelderMead { max_evals: 100, ..NelderMead::default() });
    assert!((m.x[0] - 1.0).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relabeling_coordinates_gives_the_same_trajectory(
        c in proptest::collection::vec(-2.0f64..2.0, 4),
        w in proptest::collection::vec(0.5f64..3.0, 4),
        signs in proptest::collection::vec(any::<bool>(), 4),
    ) {
        let perm = [2usize, 0, 3, 1];
        let f = |x: &[f64]| (0..4).map(|i| w[i] * (x[i] - c[i]).powi(2)).sum::<f64>() + (x[0] * x[1]).sin();
        // the relabelled problem sees coordinate j of the original at slot perm[j]
        let g = |y: &[f64]| {
            let mut x = [0.0; 4];
            for j in 0..4 { x[j] = y[perm[j]]; }
            f(&x)
        };
        let dirs = vec![axis_simplex(0.4, &signs), axis_simplex(0.1, &signs)];
        let pdirs: Vec<Vec<Vec<f64>>> = dirs.iter().map(|s| {
            let mut out = vec![vec![0.0; 4]; 4];
            for j in 0..4 {
                for i in 0..4 { out[j][perm[i]] = s[j][i]; }
            }
            out
        }).collect();
        let x0 = [0.1, 0.2, 0.3, 0.4];
        let mut y0 = [0.0; 4];
        for j in 0..4 { y0[perm[j]] = x0[j]; }
        let opts = NelderMead { max_evals: 120, ..NelderMead::default() };
        let a = minimize(f, &x0, &dirs, &opts);
        let b = minimize(g, &y0, &pdirs, &opts);
        prop_assert_eq!(a.evals, b.evals);
        for (ea, eb) in a.history.iter().zip(&b.history) {
            prop_assert_eq!(ea.f, eb.f);
        }
        for j in 0..4 { prop_assert_eq!(a.x[j], b.x[perm[j]]); }
    }
}
