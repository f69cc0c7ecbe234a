use nalgebra::DMatrix;
use proptest::prelude::*;
use vpal::graph::{
    build_dense_d2, graphtv_adjoint, graphtv_apply, parse_mesh, render_mesh, timediff_gram_apply,
    timediff_norm_sq, GraphTvOperator,
};
use vpal::linalg::io::{decode_csv, decode_dmat, encode_csv, encode_dmat, FormatError};
use vpal::linalg::{
    adjoint_mismatch, kron_left_adjoint, kron_left_apply, kron_right_adjoint, kron_right_apply,
    timediff_gram_matrix, DenseMatrix, KronLeftOperator, LinearOperator, TimeDifferenceOperator,
};
use vpal_testkit as tk;

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphtv_matches_dense(seed in any::<u64>(), n in 2usize..20, t in 1usize..7, extra in 0usize..20) {
        let mut r = tk::rng(seed);
        let g = tk::random_graph(&mut r, n, extra, true);
        let x = tk::gaussian(&mut r, n, t);
        let y = tk::gaussian(&mut r, g.num_edges(), t);
        let d2 = tk::dense_d2(&g);
        let want = &d2 * tk::to_na(&x);
        prop_assert!(rel(&tk::to_na(&graphtv_apply(&g, &x).unwrap()), &want) < 1e-12);
        let want_adj = d2.transpose() * tk::to_na(&y);
        prop_assert!(rel(&tk::to_na(&graphtv_adjoint(&g, &y).unwrap()), &want_adj) < 1e-12);
        prop_assert!(rel(&tk::to_na(&build_dense_d2(&g).to_dense()), &d2) == 0.0);

        // Vectorized form I_T (x) D2.
        let op = GraphTvOperator { graph: &g, t };
        let big = tk::kron(&DMatrix::identity(t, t), &d2);
        let v = tk::vec_of(&x);
        let got = nalgebra::DVector::from_vec(op.apply_vec(v.as_slice()));
        prop_assert!((got - &big * &v).norm() <= 1e-12 * (&big * &v).norm().max(1e-300));
        prop_assert!(adjoint_mismatch(&op, v.as_slice(), tk::vec_of(&y).as_slice()) < 1e-13);
    }

    #[test]
    fn timediff_matches_dense(seed in any::<u64>(), n in 1usize..20, t in 2usize..7) {
        let mut r = tk::rng(seed);
        let x = tk::gaussian(&mut r, n, t);
        let d1 = tk::dense_d1(t);
        let xd1 = tk::to_na(&x) * &d1;
        prop_assert!(rel(&tk::to_na(&kron_right_apply(&x).unwrap()), &xd1) < 1e-12);
        let y = tk::gaussian(&mut r, n, t - 1);
        let want = tk::to_na(&y) * d1.transpose();
        prop_assert!(rel(&tk::to_na(&kron_right_adjoint(&y).unwrap()), &want) < 1e-12);
        let gram = tk::to_na(&x) * &d1 * d1.transpose();
        prop_assert!(rel(&tk::to_na(&timediff_gram_apply(&x).unwrap()), &gram) < 1e-12);
        prop_assert!(rel(&tk::to_na(&timediff_gram_matrix(t)), &(&d1 * d1.transpose())) == 0.0);
        let nsq = xd1.norm_squared();
        prop_assert!((timediff_norm_sq(&x) - nsq).abs() <= 1e-12 * nsq.max(1e-300));

        let op = TimeDifferenceOperator { n, t };
        let big = tk::kron(&d1.transpose(), &DMatrix::identity(n, n));
        let v = tk::vec_of(&x);
        let got = nalgebra::DVector::from_vec(op.apply_vec(v.as_slice()));
        prop_assert!((got - &big * &v).norm() <= 1e-12 * (&big * &v).norm());
    }

    #[test]
    fn kron_left_matches_dense(seed in any::<u64>(), p in 1usize..10, n in 1usize..20, t in 1usize..7) {
        let mut r = tk::rng(seed);
        let l = tk::gaussian(&mut r, p, n);
        let x = tk::gaussian(&mut r, n, t);
        let y = tk::gaussian(&mut r, p, t);
        let lx = tk::to_na(&l) * tk::to_na(&x);
        prop_assert!(rel(&tk::to_na(&kron_left_apply(&l, &x).unwrap()), &lx) < 1e-12);
        let lty = tk::to_na(&l).transpose() * tk::to_na(&y);
        prop_assert!(rel(&tk::to_na(&kron_left_adjoint(&l, &y).unwrap()), &lty) < 1e-12);
        let op = KronLeftOperator { l: &l, t };
        let big = tk::kron(&DMatrix::identity(t, t), &tk::to_na(&l));
        let v = tk::vec_of(&x);
        let got = nalgebra::DVector::from_vec(op.apply_vec(v.as_slice()));
        prop_assert!((got - &big * &v).norm() <= 1e-12 * (&big * &v).norm());
    }

    #[test]
    fn dmat_and_csv_round_trip(seed in any::<u64>(), rows in 0usize..6, cols in 0usize..6) {
        let mut r = tk::rng(seed);
        let m = tk::gaussian(&mut r, rows, cols).scaled(1e3);
        let back = decode_dmat(&encode_dmat(&m)).unwrap();
        prop_assert_eq!(&back, &m);
        if rows > 0 && cols > 0 {
            prop_assert_eq!(decode_csv(&encode_csv(&m)).unwrap(), m);
        }
    }

    #[test]
    fn mesh_text_round_trip(seed in any::<u64>(), n in 1usize..15, extra in 0usize..10) {
        let mut r = tk::rng(seed);
        let g = tk::random_graph(&mut r, n, extra, true);
        prop_assert_eq!(parse_mesh(&render_mesh(&g)).unwrap(), g);
    }
}

#[test]
fn truncated_dmat_reports_offset() {
    let m = DenseMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
    let bytes = encode_dmat(&m);
    match decode_dmat(&bytes[..bytes.len() - 3]) {
        Err(FormatError::Truncated { offset, .. }) => assert!(offset > 0),
        other => panic!("expected truncation error, got {other:?}"),
    }
}

#[test]
fn dense_matrix_operator_adjoint() {
    let mut r = tk::rng(9);
    let a = tk::gaussian(&mut r, 4, 6);
    let v = tk::gaussian(&mut r, 6, 1);
    let u = tk::gaussian(&mut r, 4, 1);
    assert!(adjoint_mismatch(&a, v.as_slice(), u.as_slice()) < 1e-14);
}
