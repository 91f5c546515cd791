use kpairs::example::{ball_pair, SymbolPair, COMPACT_BOTT};
use kpairs::group::{ball, GroupElement, GroupSpec};
use kpairs::linalg::{self, c64, CMat};
use kpairs::maps::defect_report;
use kpairs::projections::{p_double_prime_blocks, p_double_prime_factored};
use kpairs::sparse::SparseMatrix;
use proptest::prelude::*;

fn abelian() -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(-6i64..=6, 3).prop_map(GroupElement::Abelian)
}

fn free_word() -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(prop::sample::select(vec![-3i32, -2, -1, 1, 2, 3]), 0..8).prop_map(|letters| {
        letters
            .into_iter()
            .fold(GroupSpec::Free(3).identity(), |acc, l| acc.multiply(&GroupElement::Free(vec![l])))
    })
}

fn matrix(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| CMat::from_fn(n, n, |i, j| c64::new(v[i * n + j].0, v[i * n + j].1)))
}

fn selfadjoint(n: usize) -> impl Strategy<Value = CMat> {
    matrix(n).prop_map(|m| {
        let h = linalg::hermitian_part(&m);
        let s = linalg::op_norm(&h).max(1e-12);
        linalg::scale(&h, 1.0 / s)
    })
}

proptest! {
    #[test]
    fn free_products_are_associative(a in free_word(), b in free_word(), c in free_word()) {
        prop_assert_eq!(a.multiply(&b).multiply(&c), a.multiply(&b.multiply(&c)));
        prop_assert!(a.multiply(&a.inverse()).is_identity());
        prop_assert!(a.multiply(&b).length() <= a.length() + b.length());
    }

    #[test]
    fn abelian_products_are_associative(a in abelian(), b in abelian(), c in abelian()) {
        prop_assert_eq!(a.multiply(&b).multiply(&c), a.multiply(&b.multiply(&c)));
        prop_assert_eq!(a.multiply(&b), b.multiply(&a));
        prop_assert!(a.multiply(&b).length() <= a.length() + b.length());
        prop_assert!(a.is_identity() || a.is_positive() != a.inverse().is_positive());
    }

    #[test]
    fn balls_are_nested_prefixes(r in 0usize..4, free in any::<bool>()) {
        let spec = if free { GroupSpec::Free(2) } else { GroupSpec::FreeAbelian(3) };
        let small = ball(spec, r, None).unwrap();
        let big = ball(spec, r + 1, None).unwrap();
        prop_assert_eq!(small.elements(), &big.elements()[..small.len()]);
        prop_assert_eq!(big.len(), spec.ball_size(r + 1));
    }

    #[test]
    fn p_double_prime_forms_agree((a, b) in (1usize..=8).prop_flat_map(|n| (selfadjoint(n), selfadjoint(n)))) {
        let p = p_double_prime_blocks(&a, &b);
        prop_assert!(linalg::max_abs_diff(&p, &p_double_prime_factored(&a, &b)) < 1e-12);
        prop_assert!(linalg::selfadjoint_defect(&p) < 1e-12);
    }

    #[test]
    fn sparse_products_match_dense(a in matrix(5), b in matrix(5)) {
        let sa = SparseMatrix::from_dense(&a);
        let sb = SparseMatrix::from_dense(&b);
        prop_assert!(linalg::max_abs_diff(&sa.matmul(&sb).to_dense(), &(&a * &b)) < 1e-12);
        prop_assert!(linalg::max_abs_diff(&sa.adjoint().to_dense(), &a.adjoint().to_owned()) == 0.0);
    }
}

#[test]
fn truncated_defects_are_adjoint_symmetric() {
    let symbols = SymbolPair::bott(COMPACT_BOTT);
    let (_, plus, _) = ball_pair(&symbols, 5, 4, None).unwrap();
    let small = ball(GroupSpec::FreeAbelian(2), 2, None).unwrap();
    for g in small.elements() {
        for h in small.elements() {
            let m = plus.defect(g, h).unwrap();
            let swapped = plus.defect(&h.inverse(), &g.inverse()).unwrap();
            assert!(m.adjoint().sub(&swapped).max_abs() < 1e-14, "{g} {h}");
        }
    }
}

#[test]
fn eps_grows_with_the_test_set() {
    let symbols = SymbolPair::bott(COMPACT_BOTT);
    let (_, plus, minus) = ball_pair(&symbols, 6, 4, None).unwrap();
    let spec = GroupSpec::FreeAbelian(2);
    let reps: Vec<_> = (0..=2)
        .map(|r| defect_report(&plus, &minus, ball(spec, r, None).unwrap().elements(), Some(r)).unwrap())
        .collect();
    for w in reps.windows(2) {
        assert!(w[0].eps1 <= w[1].eps1);
        assert!(w[0].eps2 <= w[1].eps2);
        assert!(w[0].eps2prime <= w[1].eps2prime);
    }
}
