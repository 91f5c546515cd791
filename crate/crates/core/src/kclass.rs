//! K^0 data of almost projections: rank against `Q = diag(1, 0)`, rank
//! fields over a grid, and first Chern numbers of projection fields on a
//! periodic 2D grid by the link-variable (plaquette) method.
//!
//! Orientation: plaquette `(k1, k2)` is traversed
//! `(k1,k2) -> (k1+1,k2) -> (k1+1,k2+1) -> (k1,k2+1)`, i.e.
//! counterclockwise in the `(first axis, second axis)` plane, and the Chern
//! number is the sum of plaquette phases over `2 pi`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, ONE};
use crate::projections::{AlmostProjection, ProjectionReport};
use crate::sparse::{hermitian_partition, SparseMatrix};

/// Plaquette phases at or beyond this magnitude mean the grid is too coarse.
pub const PHASE_LIMIT: f64 = 0.9 * PI;

/// Integrality tolerance for the total plaquette phase over `2 pi`.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// `rank(P) - dim(P)/2`: the class `[P] - [Q]` with `Q` the same size as
/// `P` and identity in its upper-left half.
pub fn spectral_class(p: &AlmostProjection) -> Result<i64> {
    spectral_class_of(&p.report)
}

pub fn spectral_class_of(report: &ProjectionReport) -> Result<i64> {
    if report.deviation >= 0.25 {
        return Err(Error::GapClosed {
            deviation: report.deviation,
        });
    }
    Ok(report.rank_above_half as i64 - (report.dim / 2) as i64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankField {
    pub shape: Vec<usize>,
    pub ranks: Vec<i64>,
    pub locally_constant: bool,
    /// Neighbouring point pairs with different ranks.
    pub jumps: Vec<(usize, usize)>,
}

/// Compares every grid point with its periodic neighbours.
pub fn rank_field(shape: &[usize], ranks: Vec<i64>) -> RankField {
    let n: usize = shape.iter().product();
    assert_eq!(n, ranks.len(), "rank field does not match the grid");
    let mut jumps = Vec::new();
    for k in 0..n {
        for nb in neighbours(shape, k) {
            if nb > k && ranks[nb] != ranks[k] {
                jumps.push((k, nb));
            }
        }
    }
    RankField {
        shape: shape.to_vec(),
        locally_constant: jumps.is_empty(),
        ranks,
        jumps,
    }
}

fn neighbours(shape: &[usize], k: usize) -> Vec<usize> {
    match shape {
        [n] => vec![(k + 1) % n],
        [n1, n2] => {
            let (a, b) = (k / n2, k % n2);
            vec![((a + 1) % n1) * n2 + b, a * n2 + (b + 1) % n2]
        }
        _ => Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KClassReport {
    pub rank_p: usize,
    pub rank_q: usize,
    pub class_rank: i64,
    pub per_point_ranks: Vec<i64>,
    pub locally_constant: bool,
    pub gap_min: f64,
    /// Smallest `sqrt(1/4 - deviation)` over the grid.
    pub gap_radius_min: f64,
}

/// Class data of a field of almost projections (one per grid point).
pub fn kclass_report(shape: &[usize], reports: &[ProjectionReport]) -> Result<KClassReport> {
    let mut ranks = Vec::with_capacity(reports.len());
    for r in reports {
        ranks.push(spectral_class_of(r)?);
    }
    let field = rank_field(shape, ranks);
    let first = reports
        .first()
        .ok_or_else(|| Error::Domain("empty projection field".into()))?;
    Ok(KClassReport {
        rank_p: first.rank_above_half,
        rank_q: first.dim / 2,
        class_rank: field.ranks[0],
        locally_constant: field.locally_constant,
        per_point_ranks: field.ranks,
        gap_min: reports.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min),
        gap_radius_min: reports
            .iter()
            .map(|r| r.gap_radius().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min),
    })
}

/// Projection-valued function on an `n1 x n2` periodic grid, points
/// numbered row-major.
pub trait ProjectionField: Sync {
    fn shape(&self) -> (usize, usize);

    fn projection(&self, point: usize) -> Result<SparseMatrix>;

    /// Whether two points are known to carry the identical projection.
    /// Plaquettes whose corners pair up this way have zero phase and are
    /// skipped by [`chern_number`].
    fn same_projection(&self, _p: usize, _q: usize) -> bool {
        false
    }
}

/// Field given by explicit matrices.
pub struct MatrixField {
    pub shape: (usize, usize),
    pub matrices: Vec<CMat>,
}

impl ProjectionField for MatrixField {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn projection(&self, point: usize) -> Result<SparseMatrix> {
        Ok(SparseMatrix::from_dense(&self.matrices[point]))
    }

    fn same_projection(&self, p: usize, q: usize) -> bool {
        self.matrices[p] == self.matrices[q]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernResult {
    pub chern: i64,
    /// Sum of plaquette phases over `2 pi` before rounding.
    pub raw: f64,
    pub max_plaquette_phase: f64,
    /// Plaquettes actually evaluated.
    pub evaluated_plaquettes: usize,
    pub patches: usize,
}

/// Per-part frames at one point: eigenvectors with eigenvalue above `1/2`.
type Frames = Vec<CMat>;

fn frames_at(p: &SparseMatrix, parts: &[Vec<usize>]) -> Result<Frames> {
    parts
        .iter()
        .map(|idx| {
            let sub = p.dense_submatrix(idx, idx);
            let (vals, vecs) = linalg::hermitian_eigen(&sub);
            let mut deviation = 0.0f64;
            for &l in &vals {
                deviation = deviation.max((l * l - l).abs());
            }
            if deviation >= 0.25 {
                return Err(Error::GapClosed { deviation });
            }
            let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
            Ok(CMat::from_fn(idx.len(), keep.len(), |i, j| vecs[(i, keep[j])]))
        })
        .collect()
}

/// Unit-modulus link variable `det(F_a* F_b) / |det|` over all parts.
fn link(a: &Frames, b: &Frames) -> Result<c64> {
    let mut out = ONE;
    for (fa, fb) in a.iter().zip(b) {
        if fa.ncols() != fb.ncols() {
            return Err(Error::Domain(format!(
                "frame ranks {} and {} differ across a link",
                fa.ncols(),
                fb.ncols()
            )));
        }
        if fa.ncols() == 0 {
            continue;
        }
        let m = fa.adjoint() * fb;
        let d = if m.nrows() == 1 { m[(0, 0)] } else { m.determinant() };
        let r = d.norm();
        if r.is_nan() || r <= 1e-300 || r.is_infinite() {
            return Err(Error::Domain("degenerate link between neighbouring frames".into()));
        }
        out *= d / r;
    }
    Ok(out)
}

fn plaquette_corners(shape: (usize, usize), k1: usize, k2: usize) -> [usize; 4] {
    let (n1, n2) = shape;
    let (a1, a2) = ((k1 + 1) % n1, (k2 + 1) % n2);
    [k1 * n2 + k2, a1 * n2 + k2, a1 * n2 + a2, k1 * n2 + a2]
}

/// Chern number of a projection field on a periodic grid.
///
/// With `skip_trivial`, plaquettes whose corners pair into identical
/// projections (along either axis) are skipped, the remaining plaquettes
/// are grouped into corner-connected patches, and each patch is
/// diagonalized on the common refinement of the block structure of its
/// points.
pub fn chern_number(field: &dyn ProjectionField, skip_trivial: bool) -> Result<ChernResult> {
    let shape = field.shape();
    let (n1, n2) = shape;
    let mut plaquettes = Vec::new();
    for k1 in 0..n1 {
        for k2 in 0..n2 {
            let [c00, c10, c11, c01] = plaquette_corners(shape, k1, k2);
            let trivial = skip_trivial
                && ((field.same_projection(c00, c10) && field.same_projection(c01, c11))
                    || (field.same_projection(c00, c01) && field.same_projection(c10, c11)));
            if !trivial {
                plaquettes.push((k1, k2));
            }
        }
    }
    let patches = group_patches(shape, &plaquettes);
    let mut total = 0.0;
    let mut max_phase = 0.0f64;
    for patch in &patches {
        let (sum, mx) = patch_phase(field, shape, patch)?;
        total += sum;
        max_phase = max_phase.max(mx);
    }
    if max_phase >= PHASE_LIMIT {
        return Err(Error::PhaseOverflow { phase: max_phase });
    }
    let raw = total / TAU;
    let chern = raw.round();
    if (raw - chern).abs() > INTEGRALITY_TOL {
        return Err(Error::Construction(format!("plaquette sum {raw} is not an integer")));
    }
    Ok(ChernResult {
        chern: chern as i64,
        raw,
        max_plaquette_phase: max_phase,
        evaluated_plaquettes: plaquettes.len(),
        patches: patches.len(),
    })
}

fn group_patches(shape: (usize, usize), plaquettes: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    // plaquettes sharing a corner point belong to the same patch
    let mut owner: HashMap<usize, usize> = HashMap::new();
    let mut parent: Vec<usize> = (0..plaquettes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (idx, &(k1, k2)) in plaquettes.iter().enumerate() {
        for c in plaquette_corners(shape, k1, k2) {
            match owner.get(&c) {
                Some(&o) => {
                    let (ra, rb) = (find(&mut parent, o), find(&mut parent, idx));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
                None => {
                    owner.insert(c, idx);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (idx, &pl) in plaquettes.iter().enumerate() {
        let root = find(&mut parent, idx);
        groups.entry(root).or_default().push(pl);
    }
    groups.into_values().collect()
}

/// Sum and largest magnitude of the plaquette phases in one patch.
fn patch_phase(
    field: &dyn ProjectionField,
    shape: (usize, usize),
    patch: &[(usize, usize)],
) -> Result<(f64, f64)> {
    let points: BTreeSet<usize> = patch
        .iter()
        .flat_map(|&(k1, k2)| plaquette_corners(shape, k1, k2))
        .collect();
    let points: Vec<usize> = points.into_iter().collect();
    let projections: Vec<SparseMatrix> = points
        .par_iter()
        .map(|&p| field.projection(p))
        .collect::<Result<_>>()?;
    let parts = hermitian_partition(&projections);
    let frames: Vec<Frames> = projections
        .par_iter()
        .map(|p| frames_at(p, &parts))
        .collect::<Result<_>>()?;
    drop(projections);
    let slot: HashMap<usize, usize> = points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let phases: Vec<f64> = patch
        .par_iter()
        .map(|&(k1, k2)| {
            let c = plaquette_corners(shape, k1, k2).map(|p| &frames[slot[&p]]);
            let u = link(c[0], c[1])? * link(c[1], c[2])? * link(c[2], c[3])? * link(c[3], c[0])?;
            Ok(u.arg())
        })
        .collect::<Result<_>>()?;
    let sum = phases.iter().sum();
    let mx = phases.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    Ok((sum, mx))
}

/// Two-band lattice model `d(k) = (sin k1, sin k2, m + cos k1 + cos k2)`;
/// returns the projection onto the upper band on an `n x n` grid of the
/// Brillouin torus.
pub fn two_band_field(n: usize, mass: f64) -> MatrixField {
    let mut matrices = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let (k1, k2) = (TAU * a as f64 / n as f64, TAU * b as f64 / n as f64);
            let d = [k1.sin(), k2.sin(), mass + k1.cos() + k2.cos()];
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let (x, y, z) = (d[0] / norm, d[1] / norm, d[2] / norm);
            let h = 0.5;
            matrices.push(linalg::from_rows(&[
                &[c64::new(h * (1.0 + z), 0.0), c64::new(h * x, -h * y)],
                &[c64::new(h * x, h * y), c64::new(h * (1.0 - z), 0.0)],
            ]));
        }
    }
    MatrixField {
        shape: (n, n),
        matrices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projections::{build_p_double_prime, SelfadjointPair};

    #[test]
    fn class_examples() {
        let p = AlmostProjection::from_dense(&linalg::from_real_diag(&[1.0, 0.0, 1.0, 0.0]));
        assert_eq!(spectral_class(&p).unwrap(), 0);
        let pair = SelfadjointPair::new(linalg::from_real_diag(&[1.0]), linalg::from_real_diag(&[0.0])).unwrap();
        assert_eq!(spectral_class(&build_p_double_prime(&pair)).unwrap(), 1);
        let half = AlmostProjection::from_dense(&linalg::from_real_diag(&[0.5, 1.0]));
        assert!(matches!(spectral_class(&half), Err(Error::GapClosed { .. })));
    }

    #[test]
    fn rank_field_detects_jumps() {
        let f = rank_field(&[2, 2], vec![0, 0, 0, 1]);
        assert!(!f.locally_constant);
        assert_eq!(f.jumps.len(), 2);
        assert!(rank_field(&[3], vec![2, 2, 2]).locally_constant);
    }

    #[test]
    fn constant_field_has_zero_chern() {
        let m = linalg::from_real_diag(&[1.0, 0.0]);
        let f = MatrixField {
            shape: (6, 6),
            matrices: vec![m; 36],
        };
        assert_eq!(chern_number(&f, false).unwrap().chern, 0);
        let r = chern_number(&f, true).unwrap();
        assert_eq!((r.chern, r.evaluated_plaquettes), (0, 0));
    }

    #[test]
    fn two_band_model_has_unit_chern() {
        for n in [24, 32] {
            let c = chern_number(&two_band_field(n, 1.0), false).unwrap();
            assert_eq!(c.chern.abs(), 1, "grid {n}");
        }
        assert_eq!(chern_number(&two_band_field(24, 3.0), false).unwrap().chern, 0);
    }
}
