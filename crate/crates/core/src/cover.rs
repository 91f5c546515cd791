//! Finite open covers of `S^1` and `T^2` with a partition of unity
//! `sum_i phi_i^2 = 1`, a group-valued transition cocycle, and the
//! idempotent `p_ij(x) = phi_i(x) phi_j(x) g_ij(x)` over the group ring.
//!
//! The circle `R/Z` is covered by two arcs. Chart 0 is centred at 0 with
//! lifts in `(-1/2, 1/2)`, chart 1 at `1/2` with lifts in `(0, 1)`. They
//! overlap near `1/4` (lifts agree) and near `3/4` (lifts differ by one
//! deck transformation), and `g_ij = s_i - s_j` for lifts `s_i`, `s_j`.
//! The torus uses the four product charts and the product cocycle in `Z^2`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::linalg::cr;
use crate::maps::FiniteMap;
use crate::sparse::SparseMatrix;

/// Half-width of each arc overlap.
pub const OVERLAP_HALF_WIDTH: f64 = 0.0625;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Point,
    Circle,
    Torus2,
}

#[derive(Clone, Debug)]
pub struct CoverData {
    pub space: Space,
    pub group: GroupSpec,
    /// Grid extent along each axis; points are stored row-major.
    pub shape: Vec<usize>,
    pub grid: Vec<Vec<f64>>,
    pub charts: Vec<String>,
    /// `phi[i][k]`: chart `i` at grid point `k`.
    pub phi: Vec<Vec<f64>>,
    /// `cocycle[k][i][j]`, defined when point `k` lies in both charts.
    pub cocycle: Vec<Vec<Vec<Option<GroupElement>>>>,
}

/// One chart of the circle at `t`: the partition value and, for the
/// transition, the relative lift.
#[derive(Clone, Copy, Debug, PartialEq)]
struct ArcSample {
    phi: [f64; 2],
    /// `s_0 - s_1` where both charts contain the point.
    shift: Option<i64>,
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Rotation parameter in `[0, 1]`: 0 on chart 0 only, 1 on chart 1 only.
fn arc_parameter(t: f64) -> f64 {
    let w = OVERLAP_HALF_WIDTH;
    let t = t.rem_euclid(1.0);
    if t <= 0.25 - w {
        0.0
    } else if t < 0.25 + w {
        smoothstep((t - 0.25 + w) / (2.0 * w))
    } else if t <= 0.75 - w {
        1.0
    } else if t < 0.75 + w {
        1.0 - smoothstep((t - 0.75 + w) / (2.0 * w))
    } else {
        0.0
    }
}

fn arc_sample(t: f64) -> ArcSample {
    let u = arc_parameter(t);
    let phi = if u == 0.0 {
        [1.0, 0.0]
    } else if u == 1.0 {
        [0.0, 1.0]
    } else {
        [(FRAC_PI_2 * u).cos(), (FRAC_PI_2 * u).sin()]
    };
    let shift = (phi[0] > 0.0 && phi[1] > 0.0).then(|| {
        // lifts agree on the overlap near 1/4 and differ by one near 3/4
        if t.rem_euclid(1.0) < 0.5 {
            0
        } else {
            -1
        }
    });
    ArcSample { phi, shift }
}

/// Circle transition between charts `i` and `j` at a sample.
fn arc_transition(s: &ArcSample, i: usize, j: usize) -> Option<i64> {
    if s.phi[i] == 0.0 || s.phi[j] == 0.0 {
        return None;
    }
    Some(match (i, j) {
        (0, 1) => s.shift.unwrap_or(0),
        (1, 0) => -s.shift.unwrap_or(0),
        _ => 0,
    })
}

impl CoverData {
    /// One chart, `phi = 1`, trivial cocycle, on `points` abstract samples.
    pub fn single_chart(group: GroupSpec, points: usize) -> Self {
        Self {
            space: Space::Point,
            group,
            shape: vec![points],
            grid: (0..points).map(|k| vec![k as f64]).collect(),
            charts: vec!["U".into()],
            phi: vec![vec![1.0; points]],
            cocycle: vec![vec![vec![Some(group.identity())]]; points],
        }
    }

    /// Two-arc cover of `R/Z` sampled at `k / n`, cocycle in `Z`.
    pub fn circle(n: usize) -> Self {
        let ts: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
        Self::circle_at(&ts)
    }

    /// Two-arc cover sampled at the given parameters.
    pub fn circle_at(ts: &[f64]) -> Self {
        let samples: Vec<ArcSample> = ts.iter().map(|&t| arc_sample(t)).collect();
        let phi = (0..2).map(|i| samples.iter().map(|s| s.phi[i]).collect()).collect();
        let cocycle = samples
            .iter()
            .map(|s| {
                (0..2)
                    .map(|i| {
                        (0..2)
                            .map(|j| arc_transition(s, i, j).map(|v| GroupElement::Abelian(vec![v])))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            space: Space::Circle,
            group: GroupSpec::FreeAbelian(1),
            shape: vec![ts.len()],
            grid: ts.iter().map(|&t| vec![t]).collect(),
            charts: vec!["U0".into(), "U1".into()],
            phi,
            cocycle,
        }
    }

    /// Product cover of `T^2 = R^2/Z^2` on the grid `(k1/n1, k2/n2)`,
    /// row-major in `k1`, cocycle in `Z^2`.
    pub fn torus(n1: usize, n2: usize) -> Self {
        let t1: Vec<f64> = (0..n1).map(|k| k as f64 / n1 as f64).collect();
        let t2: Vec<f64> = (0..n2).map(|k| k as f64 / n2 as f64).collect();
        Self::torus_at(&t1, &t2)
    }

    pub fn torus_at(t1: &[f64], t2: &[f64]) -> Self {
        let s1: Vec<ArcSample> = t1.iter().map(|&t| arc_sample(t)).collect();
        let s2: Vec<ArcSample> = t2.iter().map(|&t| arc_sample(t)).collect();
        let charts: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        let mut grid = Vec::new();
        let mut cocycle = Vec::new();
        let mut phi = vec![Vec::new(); 4];
        for (k1, a) in s1.iter().enumerate() {
            for (k2, b) in s2.iter().enumerate() {
                grid.push(vec![t1[k1], t2[k2]]);
                for (c, &(i1, i2)) in charts.iter().enumerate() {
                    phi[c].push(a.phi[i1] * b.phi[i2]);
                }
                let table = charts
                    .iter()
                    .map(|&(i1, i2)| {
                        charts
                            .iter()
                            .map(|&(j1, j2)| {
                                let x = arc_transition(a, i1, j1)?;
                                let y = arc_transition(b, i2, j2)?;
                                Some(GroupElement::Abelian(vec![x, y]))
                            })
                            .collect()
                    })
                    .collect();
                cocycle.push(table);
            }
        }
        Self {
            space: Space::Torus2,
            group: GroupSpec::FreeAbelian(2),
            shape: vec![t1.len(), t2.len()],
            grid,
            charts: charts.iter().map(|(a, b)| format!("U{a}{b}")).collect(),
            phi,
            cocycle,
        }
    }

    pub fn num_charts(&self) -> usize {
        self.charts.len()
    }

    pub fn num_points(&self) -> usize {
        self.grid.len()
    }

    /// Partition of unity, support, antisymmetry and cocycle identities.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_charts();
        for k in 0..self.num_points() {
            let s: f64 = (0..n).map(|i| self.phi[i][k].powi(2)).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Construction(format!("sum of phi^2 is {s} at point {k}")));
            }
            let c = &self.cocycle[k];
            for i in 0..n {
                let phi = self.phi[i][k];
                if !(0.0..=1.0).contains(&phi) {
                    return Err(Error::Construction(format!("phi_{i} = {phi} at point {k}")));
                }
                if phi > 0.0 && c[i][i] != Some(self.group.identity()) {
                    return Err(Error::Construction(format!("g_ii is not e at point {k}")));
                }
                for j in 0..n {
                    if self.phi[i][k] > 0.0 && self.phi[j][k] > 0.0 && c[i][j].is_none() {
                        return Err(Error::Construction(format!(
                            "cocycle missing on overlap ({i}, {j}) at point {k}"
                        )));
                    }
                    if let Some(g) = &c[i][j] {
                        if c[j][i].as_ref() != Some(&g.inverse()) {
                            return Err(Error::Construction(format!(
                                "g_ji is not the inverse of g_ij for ({i}, {j}) at point {k}"
                            )));
                        }
                        for (l, (jl, il)) in c[j].iter().zip(&c[i]).enumerate() {
                            if let (Some(h), Some(gh)) = (jl, il) {
                                if &g.multiply(h) != gh {
                                    return Err(Error::Construction(format!(
                                        "cocycle identity fails for ({i}, {j}, {l}) at point {k}"
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `p_ij(x) = phi_i(x) phi_j(x) g_ij(x)`; entries with a zero
    /// coefficient carry the identity.
    pub fn mishchenko_idempotent(&self, point: usize) -> Result<FormalMatrix> {
        if point >= self.num_points() {
            return Err(Error::Domain(format!("grid point {point} out of range")));
        }
        let n = self.num_charts();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let c = self.phi[i][point] * self.phi[j][point];
                let g = if c == 0.0 {
                    self.group.identity()
                } else {
                    self.cocycle[point][i][j].clone().ok_or_else(|| {
                        Error::Domain(format!("cocycle undefined on ({i}, {j}) at point {point}"))
                    })?
                };
                entries.push((c, g));
            }
        }
        Ok(FormalMatrix { size: n, entries })
    }
}

/// Square matrix over the real group ring with one group element per entry.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalMatrix {
    pub size: usize,
    /// Row-major `(coefficient, element)` pairs.
    pub entries: Vec<(f64, GroupElement)>,
}

/// Group-ring element as a finite coefficient table.
pub type GroupRingElement = BTreeMap<GroupElement, f64>;

impl FormalMatrix {
    pub fn entry(&self, i: usize, j: usize) -> &(f64, GroupElement) {
        &self.entries[i * self.size + j]
    }

    /// Key identifying the matrix exactly, for caching.
    pub fn key(&self) -> Vec<(u64, GroupElement)> {
        self.entries.iter().map(|(c, g)| (c.to_bits(), g.clone())).collect()
    }

    /// Product in the group ring, entrywise as coefficient tables.
    pub fn square(&self) -> Vec<GroupRingElement> {
        let n = self.size;
        let mut out = vec![GroupRingElement::new(); n * n];
        for i in 0..n {
            for k in 0..n {
                let slot = &mut out[i * n + k];
                for j in 0..n {
                    let (c1, g1) = self.entry(i, j);
                    let (c2, g2) = self.entry(j, k);
                    let c = c1 * c2;
                    if c != 0.0 {
                        *slot.entry(g1.multiply(g2)).or_insert(0.0) += c;
                    }
                }
            }
        }
        out
    }

    /// Largest coefficient of `p^2 - p` in the group ring.
    pub fn idempotence_defect(&self) -> f64 {
        let sq = self.square();
        let mut worst = 0.0f64;
        for (idx, mut ring) in sq.into_iter().enumerate() {
            let (c, g) = &self.entries[idx];
            *ring.entry(g.clone()).or_insert(0.0) -= c;
            worst = ring.values().fold(worst, |m, v| m.max(v.abs()));
        }
        worst
    }
}

/// `A_pi(x) = (phi_i phi_j pi(g_ij))`, chart-major blocks of size `pi.dim()`.
pub fn push_map(pi: &FiniteMap, p: &FormalMatrix) -> Result<SparseMatrix> {
    let d = pi.dim();
    let n = p.size;
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (c, g) = p.entry(i, j);
            if *c == 0.0 {
                continue;
            }
            let m = pi.get(g)?;
            trip.extend(m.iter().map(|(r, s, v)| (i * d + r, j * d + s, v * cr(*c))));
        }
    }
    Ok(SparseMatrix::from_triplets(n * d, n * d, trip))
}
