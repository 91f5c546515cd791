//! Compressions of operators on `l^2(G) (x) V` to Cayley balls and the
//! truncated families of pairs they produce.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ball, Ball, GroupElement, GroupSpec};
use crate::linalg::{cr, CMat};
use crate::maps::{defect_report, DefectReport, FiniteMap};
use crate::sparse::SparseMatrix;

/// Pointwise-selfadjoint matrix function on the group.
pub type SymbolFn = Arc<dyn Fn(&GroupElement) -> CMat + Send + Sync>;

#[derive(Clone)]
pub enum OperatorSymbol {
    /// Left translation `lambda(g) (x) id_V`.
    Translation(GroupElement),
    /// Multiplication by `y -> B(y)`.
    Multiplication(SymbolFn),
}

#[derive(Clone)]
pub struct RegularOperatorSpec {
    pub group: GroupSpec,
    pub fiber_dim: usize,
    pub symbol: OperatorSymbol,
}

fn check_cap(ball_len: usize, fiber_dim: usize, max_dim: Option<usize>) -> Result<()> {
    let dim = ball_len * fiber_dim;
    match max_dim {
        Some(cap) if dim > cap => Err(Error::Resource {
            what: "truncated space".into(),
            needed: dim,
            cap,
        }),
        _ => Ok(()),
    }
}

/// `P_R A P_R` in the basis `(y, v)`, `y` in ball order, index `y * n_V + v`.
pub fn compress(op: &RegularOperatorSpec, ball: &Ball) -> Result<SparseMatrix> {
    let nv = op.fiber_dim;
    let n = ball.len() * nv;
    match &op.symbol {
        OperatorSymbol::Translation(g) => Ok(translation(ball, g, nv)),
        OperatorSymbol::Multiplication(b) => {
            let mut trip = Vec::new();
            for (k, y) in ball.elements().iter().enumerate() {
                let m = b(y);
                if m.nrows() != nv || m.ncols() != nv {
                    return Err(Error::Construction(format!("symbol at {y} has the wrong size")));
                }
                if crate::linalg::selfadjoint_defect(&m) > 1e-12 {
                    return Err(Error::Construction(format!("symbol at {y} is not selfadjoint")));
                }
                for i in 0..nv {
                    for j in 0..nv {
                        trip.push((k * nv + i, k * nv + j, m[(i, j)]));
                    }
                }
            }
            Ok(SparseMatrix::from_triplets(n, n, trip))
        }
    }
}

fn translation(ball: &Ball, g: &GroupElement, nv: usize) -> SparseMatrix {
    let n = ball.len() * nv;
    let trip = ball.elements().iter().enumerate().flat_map(|(j, y)| {
        let target = ball.position(&g.multiply(y));
        target
            .into_iter()
            .flat_map(move |i| (0..nv).map(move |v| (i * nv + v, j * nv + v, cr(1.0))))
    });
    SparseMatrix::from_triplets(n, n, trip)
}

/// The map `g -> P lambda(g) M_B P` on the ball, with an optional
/// multiplication symbol.
///
/// `P lambda(g) M_B P` is not `*`-symmetric in general, so it is used as is
/// only for `e` and positive `g`; negative elements get the adjoint of the
/// value at their inverse.
#[derive(Clone)]
pub struct RegularMapSpec {
    pub group: GroupSpec,
    pub fiber_dim: usize,
    pub symbol: Option<SymbolFn>,
}

impl RegularMapSpec {
    pub fn regular(group: GroupSpec, fiber_dim: usize) -> Self {
        Self {
            group,
            fiber_dim,
            symbol: None,
        }
    }

    pub fn twisted(group: GroupSpec, fiber_dim: usize, symbol: SymbolFn) -> Self {
        Self {
            group,
            fiber_dim,
            symbol: Some(symbol),
        }
    }

    fn multiplier(&self, ball: &Ball) -> Result<Option<SparseMatrix>> {
        self.symbol
            .as_ref()
            .map(|b| {
                compress(
                    &RegularOperatorSpec {
                        group: self.group,
                        fiber_dim: self.fiber_dim,
                        symbol: OperatorSymbol::Multiplication(b.clone()),
                    },
                    ball,
                )
            })
            .transpose()
    }

    /// Tabulates the compressed map on `domain`.
    pub fn compressed_map(&self, ball: &Ball, domain: &[GroupElement]) -> Result<FiniteMap> {
        let nv = self.fiber_dim;
        let mult = self.multiplier(ball)?;
        let value = |g: &GroupElement| {
            let positive = g.is_identity() || g.is_positive();
            let base = if positive { g.clone() } else { g.inverse() };
            let s = translation(ball, &base, nv);
            let m = match &mult {
                Some(b) => s.matmul(b),
                None => s,
            };
            if positive {
                m
            } else {
                m.adjoint()
            }
        };
        FiniteMap::from_fn(self.group, ball.len() * nv, domain, value)
    }
}

/// Truncated pairs `(pi+_R, pi-_R)` over increasing radii.
#[derive(Clone, Debug)]
pub struct TruncationFamily {
    pub radii: Vec<usize>,
    pub balls: Vec<Ball>,
    pub pairs: Vec<(FiniteMap, FiniteMap)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    #[serde(rename = "R")]
    pub radius: usize,
    pub dim: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub eps2prime: f64,
    pub wall_time: f64,
}

/// Builds the family on strictly increasing `radii`. Each map is tabulated
/// on the ball of radius `domain_radius`.
pub fn truncate_pair(
    plus: &RegularMapSpec,
    minus: &RegularMapSpec,
    radii: &[usize],
    domain_radius: usize,
    max_dim: Option<usize>,
) -> Result<TruncationFamily> {
    if plus.group != minus.group || plus.fiber_dim != minus.fiber_dim {
        return Err(Error::Domain("the two specs live on different spaces".into()));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("radii must be nonempty and strictly increasing".into()));
    }
    let group = plus.group;
    for &r in radii {
        check_cap(group.ball_size(r), plus.fiber_dim, max_dim)?;
    }
    let domain = ball(group, domain_radius, None)?;
    let built: Vec<(Ball, (FiniteMap, FiniteMap))> = radii
        .par_iter()
        .map(|&r| {
            let b = ball(group, r, None)?;
            let p = plus.compressed_map(&b, domain.elements())?;
            let m = minus.compressed_map(&b, domain.elements())?;
            Ok((b, (p, m)))
        })
        .collect::<Result<_>>()?;
    let (balls, pairs) = built.into_iter().unzip();
    Ok(TruncationFamily {
        radii: radii.to_vec(),
        balls,
        pairs,
    })
}

impl TruncationFamily {
    /// Defect numbers at every radius on the test set `set`.
    pub fn reports(&self, set: &Ball) -> Result<Vec<(TruncationRow, DefectReport)>> {
        self.pairs
            .iter()
            .zip(&self.radii)
            .map(|((p, m), &r)| {
                let start = Instant::now();
                let rep = defect_report(p, m, set.elements(), Some(set.radius()))?;
                let row = TruncationRow {
                    radius: r,
                    dim: p.dim(),
                    eps1: rep.eps1,
                    eps2: rep.eps2,
                    eps2prime: rep.eps2prime,
                    wall_time: start.elapsed().as_secs_f64(),
                };
                Ok((row, rep))
            })
            .collect()
    }

    /// `pi_t = (1 - s) pi_n + s pi_{n+1}` with `n = floor(t)`, `s = t - n`,
    /// where `n` indexes the radii and the smaller map is zero-padded.
    pub fn interpolate(&self, t: f64) -> Result<(FiniteMap, FiniteMap)> {
        let last = (self.radii.len() - 1) as f64;
        if !(0.0..=last).contains(&t) || t.is_nan() {
            return Err(Error::Range(format!("t = {t} is outside [0, {last}]")));
        }
        let n = (t.floor() as usize).min(self.radii.len().saturating_sub(2));
        let s = t - n as f64;
        if self.radii.len() == 1 {
            return Ok(self.pairs[0].clone());
        }
        let (p0, m0) = &self.pairs[n];
        let (p1, m1) = &self.pairs[n + 1];
        let dim = p1.dim();
        Ok((
            p0.padded(dim)?.blend(p1, s)?,
            m0.padded(dim)?.blend(m1, s)?,
        ))
    }
}

/// Writes rows as CSV with a header.
pub fn write_rows<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, ONE, ZERO};

    fn z1(x: i64) -> GroupElement {
        GroupElement::Abelian(vec![x])
    }

    #[test]
    fn shift_on_z_ball_of_radius_one() {
        let b = ball(GroupSpec::FreeAbelian(1), 1, None).unwrap();
        let op = RegularOperatorSpec {
            group: GroupSpec::FreeAbelian(1),
            fiber_dim: 1,
            symbol: OperatorSymbol::Translation(z1(1)),
        };
        let s = compress(&op, &b).unwrap().to_dense();
        // basis [0, -1, 1]: delta_0 -> delta_1, delta_-1 -> delta_0, delta_1 -> 0
        let expected = linalg::from_rows(&[&[ZERO, ONE, ZERO], &[ZERO, ZERO, ZERO], &[ONE, ZERO, ZERO]]);
        assert_eq!(s, expected);
    }

    #[test]
    fn identity_translation_is_identity() {
        let b = ball(GroupSpec::Free(2), 2, None).unwrap();
        let op = RegularOperatorSpec {
            group: GroupSpec::Free(2),
            fiber_dim: 2,
            symbol: OperatorSymbol::Translation(GroupSpec::Free(2).identity()),
        };
        assert_eq!(compress(&op, &b).unwrap(), SparseMatrix::identity(b.len() * 2));
    }

    #[test]
    fn multiplication_is_block_diagonal() {
        let b = ball(GroupSpec::FreeAbelian(2), 2, None).unwrap();
        let sym: SymbolFn = Arc::new(|y: &GroupElement| {
            let l = y.length() as f64;
            linalg::from_rows(&[&[cr(l), cr(1.0)], &[cr(1.0), cr(-l)]])
        });
        let op = RegularOperatorSpec {
            group: GroupSpec::FreeAbelian(2),
            fiber_dim: 2,
            symbol: OperatorSymbol::Multiplication(sym),
        };
        let m = compress(&op, &b).unwrap();
        for (i, j, _) in m.iter() {
            assert_eq!(i / 2, j / 2);
        }
    }

    #[test]
    fn interpolation_range_and_endpoints() {
        let spec = RegularMapSpec::regular(GroupSpec::FreeAbelian(1), 1);
        let fam = truncate_pair(&spec, &spec, &[2, 3, 5], 2, None).unwrap();
        assert!(matches!(fam.interpolate(2.5), Err(Error::Range(_))));
        assert!(matches!(fam.interpolate(-0.1), Err(Error::Range(_))));
        let (p, _) = fam.interpolate(1.0).unwrap();
        let one = z1(1);
        assert_eq!(p.get(&one).unwrap(), &fam.pairs[1].0.get(&one).unwrap().pad(11, 11));
        let (p, _) = fam.interpolate(2.0).unwrap();
        assert_eq!(p.get(&one).unwrap(), fam.pairs[2].0.get(&one).unwrap());
        let (mid, _) = fam.interpolate(0.5).unwrap();
        let a = fam.pairs[0].0.get(&one).unwrap().pad(7, 7);
        let b = fam.pairs[1].0.get(&one).unwrap();
        let avg = a.add(b).scale(cr(0.5));
        assert!(mid.get(&one).unwrap().sub(&avg).max_abs() < 1e-15);
    }
}
