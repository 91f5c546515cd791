use std::sync::Arc;

use kpairs::cover::{push_map, CoverData};
use kpairs::example::*;
use kpairs::group::{ball, GroupElement, GroupSpec};
use kpairs::kclass::{chern_number, MatrixField};
use kpairs::linalg::{self, c64, CMat};
use kpairs::maps::{check_k1, check_k2, defect_report};
use kpairs::sparse;

const Z2: GroupSpec = GroupSpec::FreeAbelian(2);

fn small_bott(core_radius: f64, winding: i32) -> BottProfile {
    BottProfile {
        core_radius,
        exponent: 1.0,
        winding,
    }
}

fn gen() -> GroupElement {
    GroupElement::Abelian(vec![1, 0])
}

fn back2() -> GroupElement {
    GroupElement::Abelian(vec![-2, 0])
}

#[test]
fn bott_pair_eps_at_radius_four_is_pinned() {
    let symbols = SymbolPair::bott(WIDE_BOTT);
    let set = ball(Z2, 1, None).unwrap();
    let (_, p4, m4) = ball_pair(&symbols, 4, 2, None).unwrap();
    let (_, p8, m8) = ball_pair(&symbols, 8, 2, None).unwrap();
    let r4 = defect_report(&p4, &m4, set.elements(), Some(1)).unwrap();
    let r8 = defect_report(&p8, &m8, set.elements(), Some(1)).unwrap();
    assert!((r4.eps1 - 0.955127037100720).abs() < 1e-9, "{}", r4.eps1);
    assert!((r4.eps2 - 0.901197136248554).abs() < 1e-9, "{}", r4.eps2);
    assert!((r4.eps2prime - 1.063519155500184).abs() < 1e-9, "{}", r4.eps2prime);
    assert!(r8.eps2 < r4.eps2 && r8.eps2prime < r4.eps2prime);
}

#[test]
fn eps_is_nonincreasing_past_the_core() {
    let profile = small_bott(4.0, 1);
    let symbols = SymbolPair::bott(profile);
    let (ps, ms) = symbols.map_specs();
    let fam = kpairs::truncation::truncate_pair(&ps, &ms, &[6, 8, 16], 2, None).unwrap();
    let set = ball(Z2, 1, None).unwrap();
    let rows: Vec<_> = fam.reports(&set).unwrap().into_iter().map(|(r, _)| r).collect();
    for w in rows.windows(2) {
        assert!(w[1].eps1 <= w[0].eps1 + 1e-12);
        assert!(w[1].eps2 <= w[0].eps2 + 1e-12);
        assert!(w[1].eps2prime <= w[0].eps2prime + 1e-12);
    }
}

#[test]
fn m_values_match_defect_norms() {
    let symbols = SymbolPair::bott(COMPACT_BOTT);
    let (b, plus, minus) = ball_pair(&symbols, 6, 4, None).unwrap();
    let small = ball(Z2, 2, None).unwrap();
    for g in small.elements() {
        for h in small.elements() {
            let m = m1_m2(&symbols, &b, g, h).unwrap();
            let d = plus.defect(g, h).unwrap().sub(&minus.defect(g, h).unwrap());
            assert!((m.m1.max(m.m2) - sparse::op_norm(&d)).abs() < 1e-10, "{g} {h}");
        }
    }
    let m = m1_m2(&symbols, &b, &back2(), &gen()).unwrap();
    assert!(m.m1 > 0.0 && m.m2 > 0.0);
}

#[test]
fn boundary_set_misses_a_small_core() {
    let symbols = SymbolPair::bott(small_bott(2.0, 1));
    assert_eq!(symbols.support_radius, 3);
    let b = ball(Z2, 8, None).unwrap();
    let m = m1_m2(&symbols, &b, &back2(), &gen()).unwrap();
    assert!(!m.m1_empty);
    assert_eq!(m.m1, 0.0);
    assert!(m.m2 > 0.0);
}

#[test]
fn equal_symbols_give_zero_curves() {
    let symbols = SymbolPair::identity(Z2, 2);
    let m = m1_m2(&symbols, &ball(Z2, 4, None).unwrap(), &gen(), &gen()).unwrap();
    assert_eq!((m.m1, m.m2), (0.0, 0.0));
    let rep = convergence_experiment(&symbols, &CoverData::torus(8, 8), &[2, 3], 5, 1, None).unwrap();
    for row in &rep.rows {
        assert_eq!((row.eps2, row.eps2prime, row.sup_norm_gap), (0.0, 0.0, 0.0));
    }
    let set = ball(Z2, 1, None).unwrap();
    let l = lipschitz_balance_check(&symbols, &set, 4, LIPSCHITZ_CONSTANT).unwrap();
    assert_eq!((l.symbol_gap, l.eps_balanced), (0.0, 0.0));
}

#[test]
fn locally_constant_case_matches_exactly() {
    let set = ball(Z2, 0, None).unwrap();
    let blob: kpairs::truncation::SymbolFn = Arc::new(|y: &GroupElement| {
        let l = y.length() as f64;
        linalg::from_real_diag(&[0.3 + 0.1 * l.min(3.0), 0.9])
    });
    let symbols = SymbolPair {
        group: Z2,
        fiber_dim: 2,
        plus: blob,
        minus: Arc::new(|_| linalg::from_real_diag(&[0.6, 0.2])),
        support_radius: 3,
        bott: None,
    };
    let l = lipschitz_balance_check(&symbols, &set, 6, 0.0).unwrap();
    assert_eq!(l.variation, 0.0);
    assert!(l.symbol_gap > 0.01);
    assert!((l.symbol_gap - l.eps_balanced).abs() < 1e-10);
}

#[test]
fn lipschitz_discrepancy_scales_with_variation() {
    let set = ball(Z2, 1, None).unwrap();
    let check = |r0: f64| {
        let p = small_bott(r0, 1);
        let l = lipschitz_balance_check(&SymbolPair::bott(p), &set, p.support_radius() + 3, LIPSCHITZ_CONSTANT).unwrap();
        assert!(l.forward_holds && l.converse_holds);
        l
    };
    let coarse = check(4.0);
    let fine = check(8.0);
    assert!(fine.variation < coarse.variation);
    let disc = |l: &LipschitzReport| (l.symbol_gap - l.eps_balanced).abs();
    let ratio = (disc(&fine) / disc(&coarse)) / (fine.variation / coarse.variation);
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn small_core_differences_stay_off_the_boundary() {
    let symbols = SymbolPair::bott(small_bott(2.0, 1));
    let cover = CoverData::torus(8, 8);
    let rep = convergence_experiment(&symbols, &cover, &[2, 7, 8], 10, 1, None).unwrap();
    assert!(rep.rows[0].sup_norm_gap > 1e-3);
    assert!(rep.rows[1].sup_norm_gap < 1e-13);
    assert!(rep.rows[2].sup_norm_gap < 1e-13);
}

#[test]
fn relation_residuals_obey_the_cover_bound() {
    let symbols = SymbolPair::bott(WIDE_BOTT);
    let cover = CoverData::torus(16, 16);
    let set = ball(Z2, 2, None).unwrap();
    let charts = cover.num_charts() as f64;
    for r in [4, 8] {
        let (_, plus, minus) = ball_pair(&symbols, r, 4, None).unwrap();
        let rep = defect_report(&plus, &minus, set.elements(), Some(2)).unwrap();
        let (distinct, _) = distinct_idempotents(&cover).unwrap();
        for p in &distinct {
            let a = push_map(&plus, p).unwrap();
            let b = push_map(&minus, p).unwrap();
            let (k1a, k1b) = check_k1(&a, &b);
            let (k2a, k2b) = check_k2(&a, &b);
            assert!(k1a.max(k1b) <= charts * rep.eps1);
            assert!(k2a.max(k2b) <= charts * rep.eps2.max(rep.eps2prime));
        }
    }
}

#[test]
fn pushed_field_class_is_constant_zero() {
    let k = pipeline_kclass(&SymbolPair::bott(COMPACT_BOTT), 8, 12).unwrap();
    assert!(k.locally_constant);
    assert_eq!(k.class_rank, 0);
    assert!(k.per_point_ranks.iter().all(|&r| r == 0));
    assert!(k.gap_radius_min > 0.0);
}

#[test]
fn chern_number_is_gauge_invariant() {
    let n = 24;
    let profile = COMPACT_BOTT;
    let l = profile.core_radius;
    let h = linalg::from_rows(&[&[c64::new(0.3, 0.0), c64::new(0.2, -0.7)], &[c64::new(0.2, 0.7), c64::new(-0.5, 0.0)]]);
    let (vals, v) = linalg::hermitian_eigen(&h);
    let mut plain = Vec::new();
    let mut gauged = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let x = -l + 2.0 * l * a as f64 / n as f64;
            let y = -l + 2.0 * l * b as f64 / n as f64;
            let p = profile.plus_at(x, y);
            let angle = (std::f64::consts::TAU * a as f64 / n as f64).sin()
                + 0.5 * (std::f64::consts::TAU * b as f64 / n as f64).cos();
            let phases: Vec<c64> = vals.iter().map(|&t| c64::from_polar(1.0, angle * t)).collect();
            let u = &v * CMat::from_fn(2, 2, |i, j| if i == j { phases[i] } else { c64::new(0.0, 0.0) }) * v.adjoint();
            gauged.push(&u * &p * u.adjoint());
            plain.push(p);
        }
    }
    let c0 = chern_number(&MatrixField { shape: (n, n), matrices: plain }, false).unwrap();
    let c1 = chern_number(&MatrixField { shape: (n, n), matrices: gauged }, false).unwrap();
    assert_eq!(c0.chern, -1);
    assert_eq!(c1.chern, c0.chern);
    assert!((c1.raw - c0.raw).abs() < 1e-9);
}

#[test]
fn patches_agree_with_the_full_grid() {
    let symbols = SymbolPair::bott(small_bott(2.0, 1));
    let full = output_chern(&symbols, 6, 16, false).unwrap();
    let patched = output_chern(&symbols, 6, 16, true).unwrap();
    assert_eq!(full.chern, patched.chern);
    assert!(patched.evaluated_plaquettes < full.evaluated_plaquettes);
    assert!((full.raw - patched.raw).abs() < 1e-9);
}

#[test]
fn opposite_winding_flips_both_signs() {
    let profile = small_bott(2.0, -1);
    let rep = direct_image_check(&profile, 6, &[16, 24]).unwrap();
    assert!(rep.agree);
    assert_eq!(rep.chern_input, 1);
    let rep = direct_image_check(&small_bott(2.0, 1), 6, &[16, 24]).unwrap();
    assert!(rep.agree);
    assert_eq!(rep.chern_output, -1);
}

#[test]
fn casewise_values_on_interior_and_outside_points() {
    let symbols = SymbolPair::bott(small_bott(2.0, 1));
    let b = ball(Z2, 6, None).unwrap();
    let g = gen();
    let far = GroupElement::Abelian(vec![3, 1]);
    let (case, m) = casewise_defect(&symbols, &b, &g, &g, &far, Sign::Plus).unwrap();
    assert_eq!(case, DefectCase::Inside);
    assert!(linalg::max_abs(&m) < 1e-15);
    let edge = GroupElement::Abelian(vec![6, 0]);
    let (case, m) = casewise_defect(&symbols, &b, &g, &g, &edge, Sign::Minus).unwrap();
    assert_eq!(case, DefectCase::Outside);
    assert_eq!(linalg::max_abs(&m), 0.0);
    let back = GroupElement::Abelian(vec![-1, 0]);
    let (case, m) = casewise_defect(&symbols, &b, &back, &g, &edge, Sign::Plus).unwrap();
    assert_eq!(case, DefectCase::Reentering);
    assert!(linalg::max_abs_diff(&m, &(symbols.plus)(&edge)) < 1e-15);
}

#[test]
fn input_matrix_is_unused_outside_the_core() {
    let c = CMat::from_fn(2, 2, |i, j| if i == j && i == 0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
    assert_eq!(COMPACT_BOTT.plus_at(10.0, -3.0), c);
}
