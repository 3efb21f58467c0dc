mod common;

use common::{anisotropic, frobenius, gaussian};
use nalgebra::DMatrix;
use proptest::prelude::*;
use ssa_core::linalg::{fit_pca, max_dim, solve_alignment};
use ssa_core::rng::rng_from_seed;

fn shape() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (4usize..40, 2usize..9, any::<u64>()).prop_flat_map(|(n, dim, seed)| {
        let max = max_dim(n, dim);
        (Just(n), Just(dim), 1..=max, Just(seed))
    })
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for j in 0..c.ncols() {
        let mean = c.column(j).mean();
        c.column_mut(j).add_scalar_mut(-mean);
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn components_are_orthonormal((n, dim, d, seed) in shape()) {
        let basis = fit_pca(&anisotropic(n, dim, seed), d).unwrap();
        let gram = basis.components.transpose() * &basis.components;
        prop_assert!(frobenius(&(gram - DMatrix::identity(d, d))) < 1e-8);
        for col in basis.components.column_iter() {
            let top = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            prop_assert!(top >= 0.0);
        }
    }

    #[test]
    fn eigenvalues_match_singular_values((n, dim, d, seed) in shape()) {
        let x = anisotropic(n, dim, seed);
        let basis = fit_pca(&x, d).unwrap();
        let mut sv: Vec<f64> = centered(&x).svd(false, false).singular_values.iter().map(|s| s * s / (n - 1) as f64).collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in basis.eigenvalues.iter().zip(&sv) {
            prop_assert!((got - want).abs() < 1e-8 * (1.0 + want));
        }
        prop_assert!(basis.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn full_spectrum_sums_to_total_variance(n in 12usize..40, dim in 2usize..9, seed in any::<u64>()) {
        let x = anisotropic(n, dim, seed);
        let basis = fit_pca(&x, dim).unwrap();
        let c = centered(&x);
        let total = c.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
        prop_assert!((basis.eigenvalues.iter().sum::<f64>() - total).abs() < 1e-9 * (1.0 + total));
    }

    #[test]
    fn subspace_matches_svd_oracle((n, dim, d, seed) in shape()) {
        let x = anisotropic(n, dim, seed);
        let basis = fit_pca(&x, d).unwrap();
        let svd = centered(&x).svd(false, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        let s = |k: usize| order.get(k).map_or(0.0, |&i| svd.singular_values[i]);
        prop_assume!(s(d - 1) - s(d) > 1e-3 * (1.0 + s(0)));
        let v_t = svd.v_t.unwrap();
        let v = DMatrix::from_fn(dim, d, |r, c| v_t[(order[c], r)]);
        let p_ours = &basis.components * basis.components.transpose();
        let p_oracle = &v * v.transpose();
        prop_assert!(frobenius(&(p_ours - p_oracle)) < 1e-6);
    }

    #[test]
    fn alignment_is_least_squares_optimal((n, dim, d, seed) in shape(), scale in 1e-4f64..1.0) {
        let c_s = fit_pca(&anisotropic(n, dim, seed), d).unwrap();
        let c_t = fit_pca(&anisotropic(n, dim, seed.wrapping_add(1)), d).unwrap();
        let m = solve_alignment(&c_s, &c_t).unwrap().m;
        let residual = &c_s.components * &m - &c_t.components;
        prop_assert!(frobenius(&(c_s.components.transpose() * &residual)) < 1e-9);
        let mut rng = rng_from_seed(seed);
        let perturbed = &m + gaussian(d, d, &mut rng) * scale;
        let other = &c_s.components * perturbed - &c_t.components;
        prop_assert!(frobenius(&residual) <= frobenius(&other) + 1e-9);
        let oracle = c_s.components.clone().svd(true, true).solve(&c_t.components, 1e-12).unwrap();
        prop_assert!(frobenius(&(oracle - &m)) < 1e-9);
    }

    #[test]
    fn alignment_is_a_contraction((n, dim, d, seed) in shape()) {
        let c_s = fit_pca(&anisotropic(n, dim, seed), d).unwrap();
        let c_t = fit_pca(&anisotropic(n, dim, seed ^ 0x5a5a), d).unwrap();
        let m = solve_alignment(&c_s, &c_t).unwrap().m;
        for s in m.singular_values().iter() {
            prop_assert!(*s <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn project_and_reconstruct_round_trip((n, dim, d, seed) in shape()) {
        let x = anisotropic(n, dim, seed);
        let basis = fit_pca(&x, d).unwrap();
        let z = basis.project(&x).unwrap();
        let z2 = basis.project(&basis.reconstruct(&z).unwrap()).unwrap();
        prop_assert!(frobenius(&(z2 - &z)) < 1e-8 * (1.0 + frobenius(&z)));
        if d == dim {
            let back = basis.reconstruct(&z).unwrap();
            prop_assert!(frobenius(&(back - &x)) < 1e-8 * (1.0 + frobenius(&x)));
        }
    }

    #[test]
    fn fitting_is_deterministic((n, dim, d, seed) in shape()) {
        let x = anisotropic(n, dim, seed);
        prop_assert_eq!(fit_pca(&x, d).unwrap(), fit_pca(&x, d).unwrap());
    }
}

#[test]
fn rejects_too_large_dimension() {
    let x = anisotropic(5, 3, 1);
    assert!(fit_pca(&x, 4).is_err());
    assert!(fit_pca(&x, 0).is_err());
}
