use liebrob::linalg::{
    commutator, embed_local, hermitian_eigen, hermitian_exponential, pauli_string, schatten_norm, spectral_norm, Pauli,
};
use liebrob::{ComplexMatrix, C64};
use proptest::prelude::*;

fn matrix(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), dim * dim)
        .prop_map(move |v| ComplexMatrix::from_fn(dim, |i, j| C64::new(v[i * dim + j].0, v[i * dim + j].1)))
}

fn pair(dim: usize) -> impl Strategy<Value = (ComplexMatrix, ComplexMatrix)> {
    (matrix(dim), matrix(dim))
}

const PS: [f64; 5] = [1.0, 2.0, 3.0, 4.5, f64::INFINITY];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schatten_norm_decreases_in_p(m in (2usize..5).prop_flat_map(matrix)) {
        let norms: Vec<f64> = PS.iter().map(|&p| schatten_norm(&m, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12, "{norms:?}");
        }
    }

    #[test]
    fn schatten_triangle((a, b) in (2usize..5).prop_flat_map(pair)) {
        let s = a.add(&b).unwrap();
        for p in PS {
            let lhs = schatten_norm(&s, p).unwrap();
            let rhs = schatten_norm(&a, p).unwrap() + schatten_norm(&b, p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn schatten_ideal((a, b) in (2usize..5).prop_flat_map(pair)) {
        let a_inf = schatten_norm(&a, f64::INFINITY).unwrap();
        for p in PS {
            let bp = schatten_norm(&b, p).unwrap();
            for prod in [a.matmul(&b).unwrap(), b.matmul(&a).unwrap()] {
                prop_assert!(schatten_norm(&prod, p).unwrap() <= a_inf * bp * (1.0 + 1e-10) + 1e-12);
            }
        }
    }

    #[test]
    fn schatten_unitary_invariance((h, m) in (2usize..5).prop_flat_map(pair), t in -3.0f64..3.0) {
        let herm = h.add(&h.adjoint()).unwrap();
        let u = hermitian_exponential(&herm, t).unwrap();
        let v = u.matmul(&m).unwrap().matmul(&u.adjoint()).unwrap();
        for p in PS {
            let a = schatten_norm(&m, p).unwrap();
            prop_assert!((schatten_norm(&v, p).unwrap() - a).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn hermitian_exponential_group_law(h in (2usize..5).prop_flat_map(matrix), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let herm = h.add(&h.adjoint()).unwrap();
        let lhs = hermitian_exponential(&herm, s + t).unwrap();
        let rhs = hermitian_exponential(&herm, s).unwrap().matmul(&hermitian_exponential(&herm, t).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs_entry() < 1e-9);
        prop_assert!(lhs.unitarity_defect() < 1e-10);
    }

    #[test]
    fn sparse_commutator_matches_dense(m in matrix(8), site in 0usize..3, op in 1usize..4) {
        let a = embed_local(&Pauli::ALL[op].matrix(), &[site], 3, 2).unwrap();
        let got = commutator(&m, &a).unwrap();
        let want = m.matmul(&a).unwrap().sub(&a.matmul(&m).unwrap()).unwrap();
        prop_assert!(got.sub(&want).unwrap().max_abs_entry() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_normal_matrices(h in (2usize..6).prop_flat_map(matrix), anti in any::<bool>()) {
        let m = if anti { h.sub(&h.adjoint()).unwrap() } else { h.add(&h.adjoint()).unwrap() };
        let gram = m.adjoint().matmul(&m).unwrap();
        let want = hermitian_eigen(&gram).unwrap().values.iter().copied().fold(0.0, f64::max).sqrt();
        let got = spectral_norm(&m).unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn pauli_strings_square_to_identity(ops in prop::collection::vec(0usize..4, 1..5)) {
        let ops: Vec<Pauli> = ops.into_iter().map(|i| Pauli::ALL[i]).collect();
        let p = pauli_string(&ops);
        let sq = p.matmul(&p).unwrap();
        prop_assert!(sq.sub(&ComplexMatrix::identity(p.dim())).unwrap().max_abs_entry() < 1e-14);
        prop_assert!(p.is_hermitian());
    }
}

#[test]
fn schatten_of_diagonal() {
    let m = ComplexMatrix::from_real_diagonal(&[3.0, -4.0]);
    assert!((schatten_norm(&m, 1.0).unwrap() - 7.0).abs() < 1e-12);
    assert!((schatten_norm(&m, 2.0).unwrap() - 5.0).abs() < 1e-12);
    assert!((schatten_norm(&m, f64::INFINITY).unwrap() - 4.0).abs() < 1e-12);
}
