use proptest::prelude::*;
use scrn_core::linalg::{operator_norm, solve_shifted, sym_eig, SymMatrix};

fn sym_matrix(max_dim: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_dim).prop_flat_map(|d| {
        prop::collection::vec(-5.0f64..5.0, d * d).prop_map(move |raw| {
            let mut data = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    data[i * d + j] = 0.5 * (raw[i * d + j] + raw[j * d + i]);
                }
            }
            SymMatrix::from_row_major(d, data).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigendecomposition_invariants(a in sym_matrix(8)) {
        let eig = sym_eig(&a).unwrap();
        let d = a.dim();
        for w in eig.eigenvalues.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for i in 0..d {
            for j in 0..d {
                let q: f64 = (0..d).map(|k| eig.vector(i)[k] * eig.vector(j)[k]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((q - target).abs() <= 1e-9, "QᵀQ[{i}][{j}] = {q}");
            }
        }
        let back = eig.reconstruct();
        let tol = 1e-8 * a.max_abs().max(1.0);
        for i in 0..d {
            for j in 0..d {
                prop_assert!((back.get(i, j) - a.get(i, j)).abs() <= tol);
            }
        }
    }

    #[test]
    fn operator_norm_is_the_largest_rayleigh_quotient(a in sym_matrix(6), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let norm = operator_norm(&a).unwrap();
        prop_assert!(norm >= 0.0);
        let d = a.dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if n2 < 1e-12 {
                continue;
            }
            prop_assert!(a.quad_form(&v).abs() / n2 <= norm * (1.0 + 1e-6) + 1e-12);
        }
        // attained along an extreme eigenvector
        let eig = sym_eig(&a).unwrap();
        let k = if eig.min_eigenvalue().abs() > eig.max_eigenvalue().abs() { 0 } else { d - 1 };
        let attained = a.quad_form(&eig.vector(k)).abs();
        prop_assert!((attained - norm).abs() <= 1e-6 * norm.max(1e-12));
    }

    #[test]
    fn shifted_solve_residual(a in sym_matrix(6), shift in 0.5f64..5.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let d = a.dim();
        // make A + shift·I comfortably nonsingular
        let lo = sym_eig(&a).unwrap().min_eigenvalue();
        let shift = shift - lo;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
        let x = solve_shifted(&a, shift, &b).unwrap();
        let ax = a.mul_vec(&x);
        let res: f64 = (0..d).map(|i| (ax[i] + shift * x[i] - b[i]).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(res <= 1e-9 * bn.max(1.0), "residual {res}");
    }
}
