use std::f64::consts::PI;

use chemolab::elliptic::{constant_ratios, estimate_domain_constants, sample_fields, solve_screened_poisson, DEFAULT_TOL};
use chemolab::grid::{integrate, Grid};

#[test]
fn maximum_principle_on_a_thousand_fields() {
    let g = Grid::new_1d(1.0, 101).unwrap();
    for (k, f) in sample_fields(&g, 1000, 11).iter().enumerate() {
        let sol = solve_screened_poisson(&g, f, DEFAULT_TOL).unwrap();
        assert!(sol.v.min() >= f.min() - 1e-10, "field {k}");
        assert!(sol.v.max() <= f.max() + 1e-10, "field {k}");
        assert!((integrate(&sol.v) - integrate(f)).abs() <= 10.0 * DEFAULT_TOL, "field {k}");
    }
}

#[test]
fn maximum_principle_in_two_dimensions() {
    let g = Grid::new_2d([1.0, 0.5], [21, 13]).unwrap();
    for f in sample_fields(&g, 100, 3) {
        let sol = solve_screened_poisson(&g, &f, DEFAULT_TOL).unwrap();
        assert!(sol.v.min() >= f.min() - 1e-10 && sol.v.max() <= f.max() + 1e-10);
        assert!((integrate(&sol.v) - integrate(&f)).abs() <= 10.0 * DEFAULT_TOL);
    }
}

#[test]
fn estimates_grow_with_sample_count() {
    let g = Grid::new_1d(1.0, 101).unwrap();
    let mut prev = (0.0, 0.0);
    for n in [1, 2, 4, 8, 16, 32, 64] {
        let k = estimate_domain_constants(&g, n, &[4.0], 5).unwrap();
        let cur = (k.c_omega_hat, k.c_p(4.0).unwrap());
        assert!(cur.0 >= prev.0 && cur.1 >= prev.1, "n = {n}: {cur:?} < {prev:?}");
        prev = cur;
    }
}

#[test]
fn estimates_are_reproducible_and_resolution_stable() {
    let coarse = Grid::new_1d(1.0, 101).unwrap();
    let fine = Grid::new_1d(1.0, 201).unwrap();
    let a = estimate_domain_constants(&coarse, 64, &[2.0, 4.0], 9).unwrap();
    assert_eq!(a, estimate_domain_constants(&coarse, 64, &[2.0, 4.0], 9).unwrap());
    let b = estimate_domain_constants(&fine, 64, &[2.0, 4.0], 9).unwrap();
    assert!(a.c_omega_hat > 0.0 && a.c_omega_hat < 1.0);
    assert!((a.c_omega_hat / b.c_omega_hat - 1.0).abs() < 0.05, "{} vs {}", a.c_omega_hat, b.c_omega_hat);
}

/// `c_Ω ≤ |Ω|^{1/(N+1)} c_{N+1}` compared between the two suprema over one
/// sample set. Individual fields can violate the per-field version.
#[test]
fn gradient_constant_below_scaled_lp_constant() {
    for g in [Grid::new_1d(1.0, 101).unwrap(), Grid::new_1d(3.0, 151).unwrap(), Grid::new_2d([1.0, 2.0], [21, 31]).unwrap()] {
        let n = g.dim() as f64;
        let k = estimate_domain_constants(&g, 32, &[n + 1.0], 1).unwrap();
        let rhs = g.volume().powf(1.0 / (n + 1.0)) * k.c_p(n + 1.0).unwrap();
        assert!(k.c_omega_hat <= rhs, "{} > {rhs}", k.c_omega_hat);
    }

    let g = Grid::new_1d(1.0, 101).unwrap();
    let f = g.sample(|x, _| (3.0 * PI * x).cos());
    let (grad, lp) = constant_ratios(&g, &f, &[2.0], DEFAULT_TOL).unwrap();
    assert!(grad > lp[0], "per-field ratio {grad} vs {}", lp[0]);
}
