//! Maps from a finite symmetric subset of a group into matrices, their
//! multiplicativity defects, and the admissibility / balancedness numbers of
//! a pair of such maps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Ball, GroupElement, GroupSpec};
use crate::linalg::{c64, CMat};
use crate::sparse::{op_norm, SparseMatrix};

/// Largest tolerated `|pi(g^-1) - pi(g)*|` entry.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// A `*`-symmetric table `g -> pi(g)` on a finite inverse-closed set.
#[derive(Clone, Debug)]
pub struct FiniteMap {
    spec: GroupSpec,
    dim: usize,
    table: BTreeMap<GroupElement, SparseMatrix>,
}

impl FiniteMap {
    pub fn new(
        spec: GroupSpec,
        dim: usize,
        table: BTreeMap<GroupElement, SparseMatrix>,
    ) -> Result<Self> {
        if !table.contains_key(&spec.identity()) {
            return Err(Error::Construction("table has no value at the identity".into()));
        }
        for (g, m) in &table {
            if !spec.contains(g) {
                return Err(Error::Construction(format!("{g} is not in {spec:?}")));
            }
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Construction(format!(
                    "value at {g} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let Some(mi) = table.get(&g.inverse()) else {
                return Err(Error::Construction(format!("domain lacks the inverse of {g}")));
            };
            let asym = mi.sub(&m.adjoint()).max_abs();
            if asym > SYMMETRY_TOL {
                return Err(Error::Construction(format!(
                    "value at {} differs from the adjoint of the value at {g} by {asym:.3e}",
                    g.inverse()
                )));
            }
        }
        Ok(Self { spec, dim, table })
    }

    /// Tabulates `f` on every element of `domain`.
    pub fn from_fn(
        spec: GroupSpec,
        dim: usize,
        domain: &[GroupElement],
        f: impl Fn(&GroupElement) -> SparseMatrix + Sync,
    ) -> Result<Self> {
        let table = domain.par_iter().map(|g| (g.clone(), f(g))).collect();
        Self::new(spec, dim, table)
    }

    pub fn from_dense(
        spec: GroupSpec,
        domain: &[GroupElement],
        f: impl Fn(&GroupElement) -> CMat + Sync,
    ) -> Result<Self> {
        let dim = f(&spec.identity()).nrows();
        Self::from_fn(spec, dim, domain, |g| SparseMatrix::from_dense(&f(g)))
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> impl Iterator<Item = &GroupElement> {
        self.table.keys()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.table.contains_key(g)
    }

    pub fn get(&self, g: &GroupElement) -> Result<&SparseMatrix> {
        self.table
            .get(g)
            .ok_or_else(|| Error::Domain(format!("{g} is outside the table")))
    }

    /// `pi(gh) - pi(g) pi(h)`.
    pub fn defect(&self, g: &GroupElement, h: &GroupElement) -> Result<SparseMatrix> {
        let gh = self.get(&g.multiply(h))?;
        Ok(gh.sub(&self.get(g)?.matmul(self.get(h)?)))
    }

    /// Zero-pads every value into the leading block of a `dim x dim` matrix.
    pub fn padded(&self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::Domain(format!("cannot pad dimension {} down to {dim}", self.dim)));
        }
        let table = self
            .table
            .iter()
            .map(|(g, m)| (g.clone(), m.pad(dim, dim)))
            .collect();
        Ok(Self {
            spec: self.spec,
            dim,
            table,
        })
    }

    /// `(1 - s) self + s other` on the common domain.
    pub fn blend(&self, other: &Self, s: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Domain("blended maps must share a dimension".into()));
        }
        let table = self
            .table
            .iter()
            .filter_map(|(g, m)| {
                other.table.get(g).map(|n| {
                    (g.clone(), m.scale(c64::new(1.0 - s, 0.0)).add_scaled(n, c64::new(s, 0.0)))
                })
            })
            .collect();
        Self::new(self.spec, self.dim, table)
    }

    /// Largest `|pi(g^-1) - pi(g)*|` entry over the table.
    pub fn symmetry_defect(&self) -> f64 {
        self.table
            .iter()
            .map(|(g, m)| self.table[&g.inverse()].sub(&m.adjoint()).max_abs())
            .fold(0.0, f64::max)
    }
}

/// Where a reported maximum is attained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub g: String,
    pub h: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub third: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<char>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub eps1: Witness,
    pub eps2: Witness,
    pub eps2prime: Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    #[serde(rename = "F_radius")]
    pub f_radius: Option<usize>,
    pub eps1: f64,
    pub eps2: f64,
    pub eps2prime: f64,
    pub witnesses: Witnesses,
}

/// Checks that `set` is inverse-closed and that the products needed for
/// the defect conditions stay inside both tables.
fn validate_set(plus: &FiniteMap, minus: &FiniteMap, set: &[GroupElement]) -> Result<()> {
    if plus.dim != minus.dim {
        return Err(Error::Domain("the two maps have different dimensions".into()));
    }
    for g in set {
        if !set.contains(&g.inverse()) {
            return Err(Error::Domain(format!("test set is not symmetric: lacks {}", g.inverse())));
        }
        for h in set {
            let gh = g.multiply(h);
            if !plus.contains(&gh) || !minus.contains(&gh) {
                return Err(Error::Domain(format!("product {gh} escapes the table")));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct Best {
    value: f64,
    witness: Witness,
}

impl Best {
    fn none() -> Self {
        Self {
            value: 0.0,
            witness: Witness::default(),
        }
    }

    fn offer(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        if value > self.value || self.witness.g.is_empty() {
            self.value = value.max(self.value);
            self.witness = witness();
        }
    }

    fn merge(mut self, other: Best) -> Best {
        if other.value > self.value || self.witness.g.is_empty() {
            self = other;
        }
        self
    }
}

struct PairData {
    m_plus: SparseMatrix,
    m_minus: SparseMatrix,
}

fn pair_defects(
    plus: &FiniteMap,
    minus: &FiniteMap,
    set: &[GroupElement],
) -> Result<Vec<(usize, usize, PairData)>> {
    let pairs: Vec<(usize, usize)> = (0..set.len())
        .flat_map(|i| (0..set.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            Ok((
                i,
                j,
                PairData {
                    m_plus: plus.defect(&set[i], &set[j])?,
                    m_minus: minus.defect(&set[i], &set[j])?,
                },
            ))
        })
        .collect()
}

/// `max ||M_{pi+-}(g,h) (pi+(c) - pi-(c))||` over `g, h, c` in `set` and
/// both signs.
pub fn admissibility_eps(
    plus: &FiniteMap,
    minus: &FiniteMap,
    set: &[GroupElement],
) -> Result<(f64, Witness)> {
    validate_set(plus, minus, set)?;
    let defects = pair_defects(plus, minus, set)?;
    admissibility_from(plus, minus, set, &defects)
}

fn admissibility_from(
    plus: &FiniteMap,
    minus: &FiniteMap,
    set: &[GroupElement],
    defects: &[(usize, usize, PairData)],
) -> Result<(f64, Witness)> {
    let diffs: Vec<SparseMatrix> = set
        .iter()
        .map(|c| Ok(plus.get(c)?.sub(minus.get(c)?)))
        .collect::<Result<_>>()?;
    let best = defects
        .par_iter()
        .map(|(i, j, d)| {
            let mut best = Best::none();
            for (sign, m) in [('+', &d.m_plus), ('-', &d.m_minus)] {
                for (k, diff) in diffs.iter().enumerate() {
                    let v = op_norm(&m.matmul(diff));
                    best.offer(v, || Witness {
                        g: set[*i].to_string(),
                        h: set[*j].to_string(),
                        third: Some(set[k].to_string()),
                        sign: Some(sign),
                    });
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Best::none(), Best::merge);
    Ok((best.value, best.witness))
}

/// `(max ||M+ - M-||, max ||pi+(k) M+ - pi-(k) M-||)` over the test set.
pub fn balancedness_eps(
    plus: &FiniteMap,
    minus: &FiniteMap,
    set: &[GroupElement],
) -> Result<((f64, Witness), (f64, Witness))> {
    validate_set(plus, minus, set)?;
    let defects = pair_defects(plus, minus, set)?;
    balancedness_from(plus, minus, set, &defects)
}

fn balancedness_from(
    plus: &FiniteMap,
    minus: &FiniteMap,
    set: &[GroupElement],
    defects: &[(usize, usize, PairData)],
) -> Result<((f64, Witness), (f64, Witness))> {
    let values: Vec<(&SparseMatrix, &SparseMatrix)> = set
        .iter()
        .map(|k| Ok((plus.get(k)?, minus.get(k)?)))
        .collect::<Result<_>>()?;
    let (b2, b2p) = defects
        .par_iter()
        .map(|(i, j, d)| {
            let mut b2 = Best::none();
            let mut b2p = Best::none();
            let wit = |third: Option<String>| Witness {
                g: set[*i].to_string(),
                h: set[*j].to_string(),
                third,
                sign: None,
            };
            b2.offer(op_norm(&d.m_plus.sub(&d.m_minus)), || wit(None));
            for (k, (pk, mk)) in values.iter().enumerate() {
                let v = op_norm(&pk.matmul(&d.m_plus).sub(&mk.matmul(&d.m_minus)));
                b2p.offer(v, || wit(Some(set[k].to_string())));
            }
            (b2, b2p)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((Best::none(), Best::none()), |(a, b), (c, d)| (a.merge(c), b.merge(d)));
    Ok(((b2.value, b2.witness), (b2p.value, b2p.witness)))
}

/// All three numbers of the pair on `set`.
pub fn defect_report(
    plus: &FiniteMap,
    minus: &FiniteMap,
    set: &[GroupElement],
    f_radius: Option<usize>,
) -> Result<DefectReport> {
    validate_set(plus, minus, set)?;
    let defects = pair_defects(plus, minus, set)?;
    let (eps1, w1) = admissibility_from(plus, minus, set, &defects)?;
    let ((eps2, w2), (eps2prime, w2p)) = balancedness_from(plus, minus, set, &defects)?;
    Ok(DefectReport {
        f_radius,
        eps1,
        eps2,
        eps2prime,
        witnesses: Witnesses {
            eps1: w1,
            eps2: w2,
            eps2prime: w2p,
        },
    })
}

/// Report on the ball of radius `radius`.
pub fn defect_report_on_ball(plus: &FiniteMap, minus: &FiniteMap, set: &Ball) -> Result<DefectReport> {
    defect_report(plus, minus, set.elements(), Some(set.radius()))
}

/// `(||(a^2 - a)(a - b)||, ||(b^2 - b)(a - b)||)`.
pub fn check_k1(a: &SparseMatrix, b: &SparseMatrix) -> (f64, f64) {
    let d = a.sub(b);
    let sq = |x: &SparseMatrix| x.matmul(x).sub(x);
    (op_norm(&sq(a).matmul(&d)), op_norm(&sq(b).matmul(&d)))
}

/// `(||f(a) - f(b)||)` for `f(t) = t(1 - t)` and `f(t) = t^2 (1 - t)`.
pub fn check_k2(a: &SparseMatrix, b: &SparseMatrix) -> (f64, f64) {
    let (fa1, fa2) = k2_polys(a);
    let (fb1, fb2) = k2_polys(b);
    (op_norm(&fa1.sub(&fb1)), op_norm(&fa2.sub(&fb2)))
}

fn k2_polys(a: &SparseMatrix) -> (SparseMatrix, SparseMatrix) {
    let a2 = a.matmul(a);
    let a3 = a2.matmul(a);
    (a.sub(&a2), a2.sub(&a3))
}

/// Dense convenience wrappers.
pub fn check_k1_dense(a: &CMat, b: &CMat) -> (f64, f64) {
    check_k1(&SparseMatrix::from_dense(a), &SparseMatrix::from_dense(b))
}

pub fn check_k2_dense(a: &CMat, b: &CMat) -> (f64, f64) {
    check_k2(&SparseMatrix::from_dense(a), &SparseMatrix::from_dense(b))
}

/// Scalar map `g -> exp(i <theta, g>)` on `Z^k`, an exact unitary representation.
pub fn character(theta: &[f64], g: &GroupElement) -> c64 {
    match g {
        GroupElement::Abelian(v) => {
            let phase: f64 = v.iter().zip(theta).map(|(&x, t)| x as f64 * t).sum();
            c64::from_polar(1.0, phase)
        }
        GroupElement::Free(_) => panic!("characters are defined here only on Z^k"),
    }
}

/// Exact representation of `F_k` or `Z^k` sending generator `i` to `gens[i]`;
/// the generator images must be unitary (and commute for `Z^k`).
pub fn unitary_rep(gens: &[CMat], g: &GroupElement) -> CMat {
    let n = gens[0].nrows();
    let mut out = crate::linalg::identity(n);
    let apply = |out: &mut CMat, i: usize, e: i64| {
        let u = if e > 0 { gens[i].clone() } else { gens[i].adjoint().to_owned() };
        for _ in 0..e.unsigned_abs() {
            *out = &*out * &u;
        }
    };
    match g {
        GroupElement::Abelian(v) => {
            for (i, &e) in v.iter().enumerate() {
                apply(&mut out, i, e);
            }
        }
        GroupElement::Free(w) => {
            for &l in w {
                apply(&mut out, l.unsigned_abs() as usize - 1, i64::from(l.signum()));
            }
        }
    }
    out
}

/// Identity-valued map on `domain`.
pub fn constant_identity(spec: GroupSpec, dim: usize, domain: &[GroupElement]) -> Result<FiniteMap> {
    FiniteMap::from_fn(spec, dim, domain, |_| SparseMatrix::identity(dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ball;
    use crate::linalg::{self, cr, random_unitary, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn truncated_shift(n: usize) -> FiniteMap {
        // compression of the regular representation of Z to l^2({0..n-1})
        let spec = GroupSpec::FreeAbelian(1);
        let dom = ball(spec, 2, None).unwrap();
        FiniteMap::from_fn(spec, n, dom.elements(), |g| {
            let GroupElement::Abelian(v) = g else { unreachable!() };
            let s = v[0];
            SparseMatrix::from_triplets(
                n,
                n,
                (0..n as i64)
                    .filter(|j| (0..n as i64).contains(&(j + s)))
                    .map(|j| ((j + s) as usize, j as usize, cr(1.0))),
            )
        })
        .unwrap()
    }

    #[test]
    fn truncated_shift_defect_is_rank_one() {
        let pi = truncated_shift(6);
        let one = GroupElement::Abelian(vec![1]);
        let d = pi.defect(&one, &one.inverse()).unwrap();
        // only the delta_0 column survives
        let dense = d.to_dense();
        assert_eq!(dense[(0, 0)], cr(1.0));
        assert_eq!(d.nnz(), 1);
        assert!((op_norm(&d) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_character_has_zero_defect() {
        let spec = GroupSpec::FreeAbelian(1);
        let dom = ball(spec, 4, None).unwrap();
        let pi = FiniteMap::from_dense(spec, dom.elements(), |g| {
            linalg::from_rows(&[&[character(&[0.7], g)]])
        })
        .unwrap();
        let (m, n) = (GroupElement::Abelian(vec![2]), GroupElement::Abelian(vec![-1]));
        assert!(pi.defect(&m, &n).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn asymmetric_table_is_rejected() {
        let spec = GroupSpec::FreeAbelian(1);
        let dom = ball(spec, 1, None).unwrap();
        let err = FiniteMap::from_dense(spec, dom.elements(), |g| {
            let v = if g.is_positive() { cr(2.0) } else { c64::new(0.0, 1.0) };
            linalg::from_rows(&[&[v]])
        })
        .unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
    }

    #[test]
    fn equal_maps_give_zero_eps() {
        let pi = truncated_shift(5);
        let set = ball(GroupSpec::FreeAbelian(1), 1, None).unwrap();
        let r = defect_report_on_ball(&pi, &pi, &set).unwrap();
        assert_eq!((r.eps1, r.eps2, r.eps2prime), (0.0, 0.0, 0.0));
    }

    #[test]
    fn exact_representations_give_zero_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = GroupSpec::Free(2);
        let dom = ball(spec, 2, None).unwrap();
        let gp = [random_unitary(3, &mut rng), random_unitary(3, &mut rng)];
        let gm = [random_unitary(3, &mut rng), random_unitary(3, &mut rng)];
        let plus = FiniteMap::from_dense(spec, dom.elements(), |g| unitary_rep(&gp, g)).unwrap();
        let minus = FiniteMap::from_dense(spec, dom.elements(), |g| unitary_rep(&gm, g)).unwrap();
        let set = ball(spec, 1, None).unwrap();
        let r = defect_report_on_ball(&plus, &minus, &set).unwrap();
        assert!(r.eps1 < 1e-12 && r.eps2 < 1e-12 && r.eps2prime < 1e-12, "{r:?}");
    }

    #[test]
    fn escaping_product_is_a_domain_error() {
        let pi = truncated_shift(4);
        let set = ball(GroupSpec::FreeAbelian(1), 2, None).unwrap();
        assert!(matches!(
            defect_report_on_ball(&pi, &pi, &set),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn k_checks_vanish_on_trivial_inputs() {
        let p = linalg::from_real_diag(&[1.0, 1.0, 0.0]);
        let q = linalg::from_real_diag(&[1.0, 0.0, 0.0]);
        assert_eq!(check_k1_dense(&p, &p), (0.0, 0.0));
        assert_eq!(check_k1_dense(&p, &q), (0.0, 0.0));
        assert_eq!(check_k2_dense(&p, &p), (0.0, 0.0));
        let z = linalg::zeros(2, 2);
        assert_eq!(z[(0, 0)], ZERO);
    }

    #[test]
    fn report_serializes_with_expected_fields() {
        let pi = truncated_shift(3);
        let set = ball(GroupSpec::FreeAbelian(1), 1, None).unwrap();
        let r = defect_report_on_ball(&pi, &pi, &set).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["F_radius", "eps1", "eps2", "eps2prime", "witnesses"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
