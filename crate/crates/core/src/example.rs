//! The lattice example: `G = Z^2` acting on itself, `X = T^2`, fiber
//! `V = C^2`, and a pair of projection-valued symbols that agree far out.
//!
//! `B-` is the constant projection `e11`; `B+` is a Bott-type projection
//! onto `(cos(theta/2), e^{i w phi} sin(theta/2))` where `phi` is the polar
//! angle and `theta` falls from `pi` at the origin to `0` at the core
//! radius.
//!
//! Truncated maps use the symmetrized convention of
//! [`RegularMapSpec`](crate::truncation::RegularMapSpec): for `g = e` or
//! positive `g`, `pi(g) delta_y = delta_{gy} (x) B(y)`, and for negative `g`,
//! `pi(g) delta_y = delta_{gy} (x) B(gy)`, both only when `gy` stays in the
//! ball.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{push_map, CoverData, FormalMatrix};
use crate::error::{Error, Result};
use crate::group::{ball, Ball, GroupElement, GroupSpec};
use crate::kclass::{chern_number, kclass_report, ChernResult, KClassReport, MatrixField, ProjectionField};
use crate::linalg::{self, c64, CMat};
use crate::maps::{defect_report, FiniteMap};
use crate::projections::{p_double_prime_kernel_sparse, q_matrix, AlmostProjection};
use crate::sparse::{hermitian_op_norm, SparseMatrix};
use crate::truncation::{RegularMapSpec, SymbolFn};

/// Radial profile of the Bott symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottProfile {
    /// `B+ = B-` at Euclidean distance at least this from the origin.
    pub core_radius: f64,
    /// `theta(r) = pi (1 - smoothstep(r / core_radius))^exponent`.
    pub exponent: f64,
    pub winding: i32,
}

impl BottProfile {
    pub fn theta(&self, r: f64) -> f64 {
        let s = (r / self.core_radius).clamp(0.0, 1.0);
        PI * (1.0 - s * s * (3.0 - 2.0 * s)).powf(self.exponent)
    }

    /// `B+` at a point of the plane.
    pub fn plus_at(&self, x: f64, y: f64) -> CMat {
        let th = self.theta(x.hypot(y));
        let (c, s) = ((th / 2.0).cos(), (th / 2.0).sin());
        let phase = c64::from_polar(1.0, self.winding as f64 * y.atan2(x));
        let v = [c64::new(c, 0.0), phase * s];
        CMat::from_fn(2, 2, |i, j| v[i] * v[j].conj())
    }

    pub fn minus() -> CMat {
        linalg::from_real_diag(&[1.0, 0.0])
    }

    /// Smallest word length beyond which `B+ = B-` on the lattice.
    pub fn support_radius(&self) -> usize {
        (self.core_radius * std::f64::consts::SQRT_2).ceil() as usize
    }
}

fn lattice_point(y: &GroupElement) -> (f64, f64) {
    match y {
        GroupElement::Abelian(v) if v.len() == 2 => (v[0] as f64, v[1] as f64),
        _ => panic!("lattice symbols need elements of Z^2"),
    }
}

/// Pair of symbols `B+-` on the group.
#[derive(Clone)]
pub struct SymbolPair {
    pub group: GroupSpec,
    pub fiber_dim: usize,
    pub plus: SymbolFn,
    pub minus: SymbolFn,
    /// Word length from which on `B+ = B-`.
    pub support_radius: usize,
    pub bott: Option<BottProfile>,
}

impl SymbolPair {
    pub fn bott(profile: BottProfile) -> Self {
        Self {
            group: GroupSpec::FreeAbelian(2),
            fiber_dim: 2,
            plus: Arc::new(move |y| {
                let (a, b) = lattice_point(y);
                profile.plus_at(a, b)
            }),
            minus: Arc::new(|_| BottProfile::minus()),
            support_radius: profile.support_radius(),
            bott: Some(profile),
        }
    }

    /// `B+ = B- = b`.
    pub fn equal(group: GroupSpec, fiber_dim: usize, b: SymbolFn) -> Self {
        Self {
            group,
            fiber_dim,
            plus: b.clone(),
            minus: b,
            support_radius: 0,
            bott: None,
        }
    }

    pub fn identity(group: GroupSpec, fiber_dim: usize) -> Self {
        Self::equal(group, fiber_dim, Arc::new(move |_| linalg::identity(fiber_dim)))
    }

    pub fn symbol(&self, sign: Sign) -> &SymbolFn {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    /// `max ||B+-(hy) - B+-(y)||` over `y` in `ball` and `h` in `set`.
    pub fn variation(&self, set: &[GroupElement], ball: &Ball) -> f64 {
        ball.elements()
            .par_iter()
            .map(|y| {
                let mut m = 0.0f64;
                for h in set {
                    let hy = h.multiply(y);
                    for b in [&self.plus, &self.minus] {
                        m = m.max(linalg::op_norm(&(b(&hy) - b(y))));
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn map_specs(&self) -> (RegularMapSpec, RegularMapSpec) {
        (
            RegularMapSpec::twisted(self.group, self.fiber_dim, self.plus.clone()),
            RegularMapSpec::twisted(self.group, self.fiber_dim, self.minus.clone()),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// `(pi+_R, pi-_R)` on the ball of radius `radius`, tabulated on the ball of
/// radius `domain_radius`.
pub fn ball_pair(
    symbols: &SymbolPair,
    radius: usize,
    domain_radius: usize,
    max_dim: Option<usize>,
) -> Result<(Ball, FiniteMap, FiniteMap)> {
    let cap = max_dim.map(|d| d / symbols.fiber_dim);
    let b = ball(symbols.group, radius, cap)?;
    let dom = ball(symbols.group, domain_radius, None)?;
    let (ps, ms) = symbols.map_specs();
    let plus = ps.compressed_map(&b, dom.elements())?;
    let minus = ms.compressed_map(&b, dom.elements())?;
    Ok((b, plus, minus))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectCase {
    /// `hy` and `ghy` in the ball.
    Inside,
    /// `hy` outside, `ghy` inside.
    Reentering,
    /// `ghy` outside.
    Outside,
}

/// Fiber block carried by `pi(g)` from `delta_y` to `delta_{gy}`.
fn carried(b: &SymbolFn, g: &GroupElement, y: &GroupElement) -> CMat {
    if g.is_identity() || g.is_positive() {
        b(y)
    } else {
        b(&g.multiply(y))
    }
}

/// Closed-form column `M(g,h) delta_y`: returns the case and the fiber block
/// landing on `delta_{ghy}` (zero in the outside case).
pub fn casewise_defect(
    symbols: &SymbolPair,
    ball: &Ball,
    g: &GroupElement,
    h: &GroupElement,
    y: &GroupElement,
    sign: Sign,
) -> Result<(DefectCase, CMat)> {
    if !ball.contains(y) {
        return Err(Error::Domain(format!("{y} is not in the ball")));
    }
    let b = symbols.symbol(sign);
    let hy = h.multiply(y);
    let gh = g.multiply(h);
    let ghy = gh.multiply(y);
    let nv = symbols.fiber_dim;
    Ok(match (ball.contains(&hy), ball.contains(&ghy)) {
        (_, false) => (DefectCase::Outside, linalg::zeros(nv, nv)),
        (false, true) => (DefectCase::Reentering, carried(b, &gh, y)),
        (true, true) => (
            DefectCase::Inside,
            carried(b, &gh, y) - carried(b, g, &hy) * carried(b, h, y),
        ),
    })
}

/// The `delta_y` column of a defect matrix, split into the block at row
/// site `target` and the largest entry elsewhere in the column.
pub fn defect_column(
    defect: &SparseMatrix,
    fiber_dim: usize,
    y_index: usize,
    target: Option<usize>,
) -> (CMat, f64) {
    let nv = fiber_dim;
    let mut block = linalg::zeros(nv, nv);
    let mut rest = 0.0f64;
    let cols = y_index * nv..(y_index + 1) * nv;
    for (i, j, v) in defect.iter() {
        if !cols.contains(&j) {
            continue;
        }
        match target {
            Some(t) if i / nv == t => block[(i % nv, j % nv)] = v,
            _ => rest = rest.max(v.norm()),
        }
    }
    (block, rest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M1M2 {
    pub m1: f64,
    pub m2: f64,
    pub m1_empty: bool,
    pub m2_empty: bool,
}

/// Suprema of the fiberwise differences of the two defects over the
/// re-entering set (`m1`) and the inside set (`m2`).
pub fn m1_m2(symbols: &SymbolPair, ball: &Ball, g: &GroupElement, h: &GroupElement) -> Result<M1M2> {
    let mut out = M1M2 {
        m1: 0.0,
        m2: 0.0,
        m1_empty: true,
        m2_empty: true,
    };
    for y in ball.elements() {
        let (case, plus) = casewise_defect(symbols, ball, g, h, y, Sign::Plus)?;
        let (_, minus) = casewise_defect(symbols, ball, g, h, y, Sign::Minus)?;
        let v = linalg::op_norm(&(plus - minus));
        match case {
            DefectCase::Reentering => {
                out.m1 = out.m1.max(v);
                out.m1_empty = false;
            }
            DefectCase::Inside => {
                out.m2 = out.m2.max(v);
                out.m2_empty = false;
            }
            DefectCase::Outside => {}
        }
    }
    Ok(out)
}

/// Pinned constant for the symbol-variation bound. Calibrated on Bott pairs
/// with core radii 2 to 10, exponents 1 to 3 and test sets of radius 0 to 2,
/// where the largest observed ratio was about 1.5.
pub const LIPSCHITZ_CONSTANT: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `max_p sup_y ||p(B+(y)) - p(B-(y))||` for both polynomials.
    pub symbol_gap: f64,
    /// `max(eps2, eps2prime)` of the truncated pair.
    pub eps_balanced: f64,
    pub variation: f64,
    pub constant: f64,
    pub forward_holds: bool,
    pub converse_holds: bool,
}

/// Compares the symbol relations with the balancedness of the pair on the
/// ball of radius `radius`, up to `constant * variation`.
pub fn lipschitz_balance_check(
    symbols: &SymbolPair,
    set: &Ball,
    radius: usize,
    constant: f64,
) -> Result<LipschitzReport> {
    let domain_radius = 2 * set.radius();
    let (b, plus, minus) = ball_pair(symbols, radius, domain_radius, None)?;
    let rep = defect_report(&plus, &minus, set.elements(), Some(set.radius()))?;
    let eps = rep.eps2.max(rep.eps2prime);
    let poly = |m: &CMat| {
        let m2 = m * m;
        let m3 = &m2 * m;
        (m - &m2, &m2 - &m3)
    };
    let symbol_gap = b
        .elements()
        .iter()
        .map(|y| {
            let (p1, p2) = poly(&(symbols.plus)(y));
            let (q1, q2) = poly(&(symbols.minus)(y));
            linalg::op_norm(&(p1 - q1)).max(linalg::op_norm(&(p2 - q2)))
        })
        .fold(0.0, f64::max);
    let variation = symbols.variation(set.elements(), &b);
    let slack = constant * variation + 1e-10;
    Ok(LipschitzReport {
        symbol_gap,
        eps_balanced: eps,
        variation,
        constant,
        forward_holds: symbol_gap <= eps + slack,
        converse_holds: eps <= symbol_gap + slack,
    })
}

/// Formal idempotents of a cover, deduplicated: `(distinct matrices,
/// index of the distinct matrix for each grid point)`.
pub fn distinct_idempotents(cover: &CoverData) -> Result<(Vec<FormalMatrix>, Vec<usize>)> {
    let mut seen: HashMap<Vec<(u64, GroupElement)>, usize> = HashMap::new();
    let mut distinct = Vec::new();
    let mut which = Vec::with_capacity(cover.num_points());
    for k in 0..cover.num_points() {
        let p = cover.mishchenko_idempotent(k)?;
        let id = *seen.entry(p.key()).or_insert_with(|| {
            distinct.push(p.clone());
            distinct.len() - 1
        });
        which.push(id);
    }
    Ok((distinct, which))
}

/// `P''(A+, A-) - Q` at one formal idempotent.
fn kernel_at(plus: &FiniteMap, minus: &FiniteMap, p: &FormalMatrix) -> Result<SparseMatrix> {
    let a = push_map(plus, p)?;
    let b = push_map(minus, p)?;
    Ok(p_double_prime_kernel_sparse(&a, &b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "R")]
    pub radius: usize,
    pub dim: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub eps2prime: f64,
    pub sup_norm_gap: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reference_radius: usize,
    pub grid_shape: Vec<usize>,
    pub distinct_points: usize,
    pub f_radius: usize,
    pub rows: Vec<ConvergenceRow>,
}

/// `sup_x ||P''(A+_R, A-_R)(x) - P''(A+_ref, A-_ref)(x)||` for each radius,
/// with the radius-`R` maps zero-padded into the reference ball.
pub fn convergence_experiment(
    symbols: &SymbolPair,
    cover: &CoverData,
    radii: &[usize],
    reference_radius: usize,
    f_radius: usize,
    max_dim: Option<usize>,
) -> Result<ConvergenceReport> {
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("radii must be nonempty and strictly increasing".into()));
    }
    if radii.last().is_some_and(|&r| r >= reference_radius) {
        return Err(Error::Domain("reference radius must exceed every radius".into()));
    }
    cover.validate()?;
    let domain_radius = (2 * f_radius).max(cover_radius(cover));
    let set = ball(symbols.group, f_radius, None)?;
    let (_, ref_plus, ref_minus) = ball_pair(symbols, reference_radius, domain_radius, max_dim)?;
    let (distinct, _) = distinct_idempotents(cover)?;
    let reference: Vec<SparseMatrix> = distinct
        .par_iter()
        .map(|p| kernel_at(&ref_plus, &ref_minus, p))
        .collect::<Result<_>>()?;
    let full = ref_plus.dim();
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let start = Instant::now();
        let (_, plus, minus) = ball_pair(symbols, r, domain_radius, max_dim)?;
        let rep = defect_report(&plus, &minus, set.elements(), Some(f_radius))?;
        let (pp, mp) = (plus.padded(full)?, minus.padded(full)?);
        let gap = distinct
            .par_iter()
            .zip(&reference)
            .map(|(p, k_ref)| Ok(hermitian_op_norm(&kernel_at(&pp, &mp, p)?.sub(k_ref))))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            radius: r,
            dim: plus.dim(),
            eps1: rep.eps1,
            eps2: rep.eps2,
            eps2prime: rep.eps2prime,
            sup_norm_gap: gap,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceReport {
        reference_radius,
        grid_shape: cover.shape.clone(),
        distinct_points: distinct.len(),
        f_radius,
        rows,
    })
}

/// Smallest ball radius holding every cocycle value of the cover.
fn cover_radius(cover: &CoverData) -> usize {
    cover
        .cocycle
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .map(GroupElement::length)
        .max()
        .unwrap_or(0)
}

/// `x -> P''(A+_R(x), A-_R(x))` on a torus cover.
pub struct PushedField<'a> {
    pub cover: &'a CoverData,
    pub plus: &'a FiniteMap,
    pub minus: &'a FiniteMap,
    keys: Vec<usize>,
}

impl<'a> PushedField<'a> {
    pub fn new(cover: &'a CoverData, plus: &'a FiniteMap, minus: &'a FiniteMap) -> Result<Self> {
        if cover.shape.len() != 2 {
            return Err(Error::Domain("pushed fields need a two-dimensional grid".into()));
        }
        let (_, keys) = distinct_idempotents(cover)?;
        Ok(Self {
            cover,
            plus,
            minus,
            keys,
        })
    }

    pub fn matrix(&self, point: usize) -> Result<SparseMatrix> {
        let p = self.cover.mishchenko_idempotent(point)?;
        let k = kernel_at(self.plus, self.minus, &p)?;
        Ok(q_matrix(k.nrows() / 2).add(&k))
    }
}

impl ProjectionField for PushedField<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.cover.shape[0], self.cover.shape[1])
    }

    fn projection(&self, point: usize) -> Result<SparseMatrix> {
        self.matrix(point)
    }

    fn same_projection(&self, p: usize, q: usize) -> bool {
        self.keys[p] == self.keys[q]
    }
}

/// Class data of the pushed field `P''(A+_R, A-_R)` over an `n x n` torus grid.
pub fn pipeline_kclass(symbols: &SymbolPair, radius: usize, n: usize) -> Result<KClassReport> {
    let cover = CoverData::torus(n, n);
    let (_, plus, minus) = ball_pair(symbols, radius, cover_radius(&cover), None)?;
    let (distinct, which) = distinct_idempotents(&cover)?;
    let reports: Vec<_> = distinct
        .par_iter()
        .map(|p| {
            let k = kernel_at(&plus, &minus, p)?;
            Ok(AlmostProjection::from_sparse(q_matrix(k.nrows() / 2).add(&k)).report)
        })
        .collect::<Result<_>>()?;
    let per_point: Vec<_> = which.iter().map(|&i| reports[i].clone()).collect();
    kclass_report(&cover.shape, &per_point)
}

/// Chern number of `B+` over the square `[-L, L]^2` with `L` the core radius,
/// where `B+` is constant on the boundary, on an `n x n` periodic grid.
pub fn input_chern(profile: &BottProfile, n: usize) -> Result<ChernResult> {
    let l = profile.core_radius;
    let coord = |k: usize| -l + 2.0 * l * k as f64 / n as f64;
    let mut matrices = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            matrices.push(profile.plus_at(coord(a), coord(b)));
        }
    }
    chern_number(
        &MatrixField {
            shape: (n, n),
            matrices,
        },
        true,
    )
}

/// Chern number of `P''(A+_R, A-_R)` over the `n x n` torus grid.
pub fn output_chern(symbols: &SymbolPair, radius: usize, n: usize, skip_trivial: bool) -> Result<ChernResult> {
    let cover = CoverData::torus(n, n);
    let (_, plus, minus) = ball_pair(symbols, radius, cover_radius(&cover), None)?;
    let field = PushedField::new(&cover, &plus, &minus)?;
    chern_number(&field, skip_trivial)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernReport {
    pub chern_input: i64,
    pub chern_output: i64,
    pub agree: bool,
    pub radius: usize,
    pub grids: Vec<usize>,
    pub input_by_grid: Vec<ChernResult>,
    pub output_by_grid: Vec<ChernResult>,
}

/// Input and output Chern numbers on each grid; they agree when all input
/// values coincide, all output values coincide, and the two coincide.
pub fn direct_image_check(profile: &BottProfile, radius: usize, grids: &[usize]) -> Result<ChernReport> {
    let symbols = SymbolPair::bott(*profile);
    let mut input_by_grid = Vec::new();
    let mut output_by_grid = Vec::new();
    for &n in grids {
        input_by_grid.push(input_chern(profile, n)?);
        output_by_grid.push(output_chern(&symbols, radius, n, true)?);
    }
    let chern_input = input_by_grid[0].chern;
    let chern_output = output_by_grid[0].chern;
    let agree = input_by_grid.iter().all(|c| c.chern == chern_input)
        && output_by_grid.iter().all(|c| c.chern == chern_output)
        && chern_input == chern_output;
    Ok(ChernReport {
        chern_input,
        chern_output,
        agree,
        radius,
        grids: grids.to_vec(),
        input_by_grid,
        output_by_grid,
    })
}

/// Bott symbol used for the truncation and convergence curves: wide core so
/// that the symbols differ throughout every ball considered.
pub const WIDE_BOTT: BottProfile = BottProfile {
    core_radius: 14.0,
    exponent: 3.0,
    winding: 1,
};

/// Bott symbol used for K-class and Chern checks: compact core so that the
/// truncated pair is well inside the almost-projection regime.
pub const COMPACT_BOTT: BottProfile = BottProfile {
    core_radius: 4.0,
    exponent: 1.0,
    winding: 1,
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bott_symbol_is_a_projection_equal_to_minus_outside_core() {
        let p = COMPACT_BOTT;
        for (x, y) in [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5), (5.0, 5.0)] {
            let b = p.plus_at(x, y);
            assert!(linalg::max_abs_diff(&(&b * &b), &b) < 1e-15);
        }
        assert_eq!(p.plus_at(4.0, 0.0), BottProfile::minus());
        assert_eq!(p.plus_at(3.0, 3.0), BottProfile::minus());
        assert_eq!(p.support_radius(), 6);
    }

    #[test]
    fn casewise_matches_dense_on_small_ball() {
        let symbols = SymbolPair::bott(COMPACT_BOTT);
        let (b, plus, minus) = ball_pair(&symbols, 4, 4, None).unwrap();
        let g2 = ball(GroupSpec::FreeAbelian(2), 2, None).unwrap();
        for g in g2.elements() {
            for h in g2.elements() {
                for (sign, pi) in [(Sign::Plus, &plus), (Sign::Minus, &minus)] {
                    let d = pi.defect(g, h).unwrap();
                    for (yi, y) in b.elements().iter().enumerate() {
                        let (case, blk) = casewise_defect(&symbols, &b, g, h, y, sign).unwrap();
                        let target = b.position(&g.multiply(h).multiply(y));
                        let (dense, rest) = defect_column(&d, 2, yi, target);
                        assert!(rest < 1e-12);
                        assert!(linalg::max_abs_diff(&dense, &blk) < 1e-12, "{g} {h} {y} {case:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn equal_symbols_give_zero_m() {
        let s = SymbolPair::identity(GroupSpec::FreeAbelian(2), 2);
        let b = ball(GroupSpec::FreeAbelian(2), 3, None).unwrap();
        let g = GroupElement::Abelian(vec![1, 0]);
        let m = m1_m2(&s, &b, &g, &g).unwrap();
        assert_eq!((m.m1, m.m2), (0.0, 0.0));
    }
}
