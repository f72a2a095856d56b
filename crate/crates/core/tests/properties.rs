mod common;

use common::{mixed_case, partition};
use kaczmarz_krylov::numerics::{
    default_rank_tol, dist, dot, norm, orthonormal_range_basis, sub, sym_eig, Matrix,
};
use kaczmarz_krylov::operator::{assemble, spectral_report, KaczmarzOperator, LinearOperator};
use kaczmarz_krylov::problems::{
    gen_random, gen_rank_deficient, read_matrix_market, read_vector, write_matrix_market, write_vector,
    ProblemSpec,
};
use kaczmarz_krylov::sweep::{apply_block, cycle};
use proptest::prelude::*;

fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-5.0f64..5.0, m * n).prop_map(move |d| Matrix::from_row_major(m, n, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_projection_is_pythagorean(seed in 0u64..10_000, t in -3.0f64..3.0) {
        let case = mixed_case(seed);
        let n = case.n();
        let x: Vec<f64> = (0..n).map(|i| t * ((i as f64) + 1.0).sin()).collect();
        let xs = &case.problem.x_star;
        for proj in &case.projectors {
            let (y, d_sq) = apply_block(proj, &x).unwrap();
            let lhs = dist(&x, xs).powi(2);
            let rhs = dist(&y, xs).powi(2) + d_sq;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs));
            // the block equations hold after projection
            let r = sub(&proj.a.matvec(&y), &proj.b);
            prop_assert!(norm(&r) <= 1e-8 * (1.0 + norm(&proj.b)));
        }
    }

    #[test]
    fn cycle_reduces_error_by_omega(seed in 0u64..10_000, t in -3.0f64..3.0) {
        let case = mixed_case(seed);
        let x: Vec<f64> = (0..case.n()).map(|i| t * ((i as f64) * 0.7).cos()).collect();
        let xs = &case.problem.x_star;
        let out = cycle(&case.projectors, &x).unwrap();
        let before = dist(&x, xs).powi(2);
        let after = dist(&out.y, xs).powi(2);
        prop_assert!((after - (before - out.omega)).abs() <= 1e-9 * (1.0 + before));
        prop_assert!(after <= before * (1.0 + 1e-12) + 1e-20);
        let rho = dist(&out.y, &x).powi(2);
        let inner = dot(&sub(xs, &x), &sub(&out.y, &x));
        prop_assert!((out.omega + rho - 2.0 * inner).abs() <= 1e-9 * (1.0 + before));
    }

    #[test]
    fn cycle_moves_within_row_space(seed in 0u64..10_000) {
        let case = mixed_case(seed);
        let a = &case.problem.a;
        let x: Vec<f64> = (0..case.n()).map(|i| (i as f64 * 1.3).sin()).collect();
        let out = cycle(&case.projectors, &x).unwrap();
        let step = sub(&out.y, &x);
        let basis = orthonormal_range_basis(a, default_rank_tol(a.rows(), a.cols())).unwrap();
        let coords = basis.matvec_t(&step);
        let back = basis.matvec(&coords);
        prop_assert!(dist(&back, &step) <= 1e-8 * (1.0 + norm(&step)));
    }

    #[test]
    fn null_space_is_annihilated(seed in 0u64..10_000) {
        let p = gen_rank_deficient(12, 6, 2, seed).unwrap();
        let case = partition(p, 3, false);
        let a = &case.problem.a;
        let op = KaczmarzOperator::new(&case.projectors).unwrap();
        let basis = orthonormal_range_basis(a, default_rank_tol(a.rows(), a.cols())).unwrap();
        prop_assert_eq!(basis.cols(), 2);
        let mut z: Vec<f64> = (0..6).map(|i| ((i * 7 + seed as usize) as f64).cos()).collect();
        let coords = basis.matvec_t(&z);
        let proj = basis.matvec(&coords);
        z = sub(&z, &proj);
        let cz = op.apply(&z);
        prop_assert!(norm(&cz) <= 1e-9 * (1.0 + norm(&z)));
    }

    #[test]
    fn operator_contracts_on_range(seed in 0u64..10_000) {
        let case = mixed_case(seed);
        let n = case.n();
        let a = &case.problem.a;
        let op = assemble(&case.projectors, n, false).unwrap();
        let rep = spectral_report(&op, a, default_rank_tol(a.rows(), n)).unwrap();
        prop_assert!(rep.t2_norm < 1.0);
        prop_assert!(rep.quasi_opt_factor >= 1.0);
        // affine form agrees with the matrix-free cycle
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        prop_assert!(dist(&op.apply_p(&x), &cycle(&case.projectors, &x).unwrap().y) <= 1e-9 * (1.0 + norm(&x)));
    }

    #[test]
    fn pseudo_inverse_is_moore_penrose(a in matrix_strategy(6, 6)) {
        let s = a.gram_rows();
        let eig = sym_eig(&s).unwrap();
        prop_assert!(eig.reconstruct().sub(&s).unwrap().max_abs() <= 1e-10 * (1.0 + s.max_abs()));
        let tol = default_rank_tol(a.rows(), a.cols()).max(1e-12);
        let m = s.rows();
        // columns of S⁺
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                eig.pseudo_apply(&e, tol).unwrap()
            })
            .collect();
        let pinv = Matrix::from_columns(m, &cols).unwrap();
        let sps = s.matmul(&pinv).unwrap().matmul(&s).unwrap();
        prop_assert!(sps.sub(&s).unwrap().max_abs() <= 1e-8 * (1.0 + s.max_abs()));
        let psp = pinv.matmul(&s).unwrap().matmul(&pinv).unwrap();
        prop_assert!(psp.sub(&pinv).unwrap().max_abs() <= 1e-6 * (1.0 + pinv.max_abs()));
    }

    #[test]
    fn range_basis_is_orthonormal(a in matrix_strategy(7, 7)) {
        let b = orthonormal_range_basis(&a, default_rank_tol(a.rows(), a.cols())).unwrap();
        let g = b.gram_cols();
        prop_assert!(g.sub(&Matrix::identity(b.cols())).unwrap().max_abs() <= 1e-10);
        // every row of A lies in the span
        for i in 0..a.rows() {
            let r = a.row(i);
            let back = b.matvec(&b.matvec_t(r));
            prop_assert!(dist(&back, r) <= 1e-8 * (1.0 + norm(r)));
        }
    }

    #[test]
    fn matrix_market_round_trip(a in matrix_strategy(6, 6)) {
        prop_assert_eq!(read_matrix_market(&write_matrix_market(&a)).unwrap(), a);
    }

    #[test]
    fn vector_round_trip(v in prop::collection::vec(-1e300f64..1e300, 0..20)) {
        prop_assert_eq!(read_vector(&write_vector(&v)).unwrap(), v);
    }

    #[test]
    fn generators_are_consistent_and_deterministic(m in 1usize..30, n in 1usize..30, seed in any::<u64>()) {
        let p = gen_random(m, n, seed).unwrap();
        prop_assert!(p.consistency_residual() <= 1e-12 * (1.0 + norm(&p.b)));
        let q = ProblemSpec::random(m, n, seed).generate().unwrap();
        prop_assert_eq!(p.a.data(), q.a.data());
        prop_assert_eq!(p.b, q.b);
        if m.min(n) >= 2 {
            let r = gen_rank_deficient(m, n, m.min(n) - 1, seed).unwrap();
            prop_assert!(r.consistency_residual() <= 1e-12 * (1.0 + norm(&r.b)));
        }
    }

    #[test]
    fn spec_json_round_trip(m in 1usize..100, n in 1usize..100, seed in any::<u64>()) {
        let spec = ProblemSpec::random(m, n, seed);
        let json = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(serde_json::from_str::<ProblemSpec>(&json).unwrap(), spec);
    }
}
