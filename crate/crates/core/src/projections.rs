//! Almost projections built from a selfadjoint pair `(a, b)`.
//!
//! * `P = [[1 - b, g(a)], [g(a), a]]` with `g(t) = sqrt(t - t^2)`;
//! * `P' = U* P U` with `U = [[(1-a)^{1/2}, -a^{1/2}], [a^{1/2}, (1-a)^{1/2}]]`;
//! * `P''`, the polynomial version, equal to
//!   `Q + [1 - a; -a] (a - b) [1 - a, -a]` with `Q = diag(1, 0)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::sparse::{hermitian_partition, BlockSpectrum, SparseMatrix};

/// Eigenvalues of `a` may leave `[0, 1]` by this much before square roots
/// refuse them.
pub const CLAMP_TOL: f64 = 1e-8;

/// Selfadjoint pairs are accepted up to this entrywise asymmetry.
pub const SELFADJOINT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SelfadjointPair {
    pub a: CMat,
    pub b: CMat,
}

impl SelfadjointPair {
    pub fn new(a: CMat, b: CMat) -> Result<Self> {
        if a.nrows() != b.nrows() || a.nrows() != a.ncols() || b.nrows() != b.ncols() {
            return Err(Error::Domain("pair must consist of square matrices of one size".into()));
        }
        let asym = linalg::selfadjoint_defect(&a).max(linalg::selfadjoint_defect(&b));
        if asym > SELFADJOINT_TOL {
            return Err(Error::Domain(format!("pair is not selfadjoint (defect {asym:.3e})")));
        }
        Ok(Self {
            a: linalg::hermitian_part(&a),
            b: linalg::hermitian_part(&b),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Applies `f` to both members by functional calculus.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            a: linalg::hermitian_fn(&self.a, f),
            b: linalg::hermitian_fn(&self.b, f),
        }
    }

    /// `(u* a u, u* b u)`.
    pub fn conjugate(&self, u: &CMat) -> Self {
        let c = |x: &CMat| linalg::hermitian_part(&(u.adjoint() * x * u));
        Self {
            a: c(&self.a),
            b: c(&self.b),
        }
    }

    pub fn direct_sum(pairs: &[SelfadjointPair]) -> Self {
        let a: Vec<CMat> = pairs.iter().map(|p| p.a.clone()).collect();
        let b: Vec<CMat> = pairs.iter().map(|p| p.b.clone()).collect();
        Self {
            a: linalg::direct_sum(&a),
            b: linalg::direct_sum(&b),
        }
    }
}

/// Spectral summary of a selfadjoint matrix near `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    /// `||P^2 - P||`.
    pub deviation: f64,
    /// Distance from the spectrum to `1/2`.
    pub gap: f64,
    pub rank_above_half: usize,
    pub dim: usize,
}

impl ProjectionReport {
    pub fn from_eigenvalues(values: impl IntoIterator<Item = f64>) -> Self {
        let mut deviation = 0.0f64;
        let mut gap = f64::INFINITY;
        let mut rank = 0;
        let mut dim = 0;
        for l in values {
            deviation = deviation.max((l * l - l).abs());
            gap = gap.min((l - 0.5).abs());
            rank += usize::from(l > 0.5);
            dim += 1;
        }
        Self {
            deviation,
            gap,
            rank_above_half: rank,
            dim,
        }
    }

    /// Radius of the eigenvalue-free window around `1/2` implied by the
    /// deviation alone: `|l^2 - l| <= d` keeps `l` out of
    /// `(1/2 - r, 1/2 + r)` with `r = sqrt(1/4 - d)`.
    pub fn gap_radius(&self) -> Option<f64> {
        (self.deviation < 0.25).then(|| (0.25 - self.deviation).sqrt())
    }
}

/// A selfadjoint matrix together with its spectral summary.
#[derive(Clone, Debug)]
pub struct AlmostProjection {
    pub matrix: SparseMatrix,
    pub report: ProjectionReport,
}

impl AlmostProjection {
    pub fn from_dense(p: &CMat) -> Self {
        let p = linalg::hermitian_part(p);
        let report = ProjectionReport::from_eigenvalues(linalg::hermitian_eigenvalues(&p));
        Self {
            matrix: SparseMatrix::from_dense(&p),
            report,
        }
    }

    /// Diagonalizes along the connected components of the off-diagonal
    /// pattern, which keeps block-sparse inputs cheap.
    pub fn from_sparse(p: SparseMatrix) -> Self {
        let parts = hermitian_partition(std::slice::from_ref(&p));
        let spec = BlockSpectrum::with_partition(&p, &parts);
        let report = ProjectionReport::from_eigenvalues(spec.eigenvalues());
        Self { matrix: p, report }
    }

    pub fn to_dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    pub fn deviation(&self) -> f64 {
        self.report.deviation
    }

    pub fn rank_above_half(&self) -> usize {
        self.report.rank_above_half
    }

    pub fn dim(&self) -> usize {
        self.report.dim
    }
}

/// Rejects spectra outside `[-CLAMP_TOL, 1 + CLAMP_TOL]`.
fn check_unit_spectrum(a: &CMat) -> Result<()> {
    let ev = linalg::hermitian_eigenvalues(a);
    if let (Some(&lo), Some(&hi)) = (ev.first(), ev.last()) {
        if lo < -CLAMP_TOL || hi > 1.0 + CLAMP_TOL {
            return Err(Error::Range(format!(
                "spectrum [{lo:.3e}, {hi:.3e}] leaves [0, 1] beyond the clamp tolerance"
            )));
        }
    }
    Ok(())
}

fn sqrt_clamped(t: f64) -> f64 {
    t.clamp(0.0, 1.0).sqrt()
}

/// `[[1 - b, g(a)], [g(a), a]]`.
pub fn build_p(pair: &SelfadjointPair) -> Result<AlmostProjection> {
    Ok(AlmostProjection::from_dense(&p_matrix(pair)?))
}

fn p_matrix(pair: &SelfadjointPair) -> Result<CMat> {
    check_unit_spectrum(&pair.a)?;
    let n = pair.dim();
    let id = linalg::identity(n);
    let g = linalg::hermitian_fn(&pair.a, |t| (t.clamp(0.0, 1.0) - t.clamp(0.0, 1.0).powi(2)).sqrt());
    Ok(linalg::block2x2(&(&id - &pair.b), &g, &g, &pair.a))
}

/// `U` of the rotation taking `P` to `P'`.
pub fn rotation_unitary(a: &CMat) -> Result<CMat> {
    check_unit_spectrum(a)?;
    let alpha = linalg::hermitian_fn(a, |t| sqrt_clamped(1.0 - t));
    let beta = linalg::hermitian_fn(a, sqrt_clamped);
    Ok(linalg::block2x2(&alpha, &(-&beta), &beta, &alpha))
}

/// Residuals of the unitary equivalence `P' = U* P U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationCheck {
    /// `max |U* U - 1|`.
    pub unitarity: f64,
    /// `max |U* P U - P'|`.
    pub equivalence: f64,
}

/// `P'` from its closed form, together with the check against `U* P U`.
pub fn build_p_prime(pair: &SelfadjointPair) -> Result<(AlmostProjection, RotationCheck)> {
    let pp = p_prime_matrix(pair)?;
    let u = rotation_unitary(&pair.a)?;
    let p = p_matrix(pair)?;
    let n2 = 2 * pair.dim();
    let check = RotationCheck {
        unitarity: linalg::max_abs_diff(&(u.adjoint() * &u), &linalg::identity(n2)),
        equivalence: linalg::max_abs_diff(&(u.adjoint() * &p * &u), &pp),
    };
    if check.unitarity > 1e-12 || check.equivalence > 1e-10 {
        return Err(Error::Construction(format!(
            "rotation check failed: |U*U - 1| = {:.3e}, |U*PU - P'| = {:.3e}",
            check.unitarity, check.equivalence
        )));
    }
    Ok((AlmostProjection::from_dense(&pp), check))
}

fn p_prime_matrix(pair: &SelfadjointPair) -> Result<CMat> {
    check_unit_spectrum(&pair.a)?;
    let alpha = linalg::hermitian_fn(&pair.a, |t| sqrt_clamped(1.0 - t));
    let beta = linalg::hermitian_fn(&pair.a, sqrt_clamped);
    let d = &pair.a - &pair.b;
    let id = linalg::identity(pair.dim());
    Ok(linalg::block2x2(
        &(&id + &alpha * &d * &alpha),
        &(-(&alpha * &d * &beta)),
        &(-(&beta * &d * &alpha)),
        &(&beta * &d * &beta),
    ))
}

/// `P''` from its four blocks.
pub fn p_double_prime_blocks(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let id = linalg::identity(n);
    let c = &id - a;
    let d = a - b;
    let e = b - a;
    linalg::block2x2(&(&id + &c * &d * &c), &(&c * &e * a), &(a * &e * &c), &(a * &d * a))
}

/// `P''` as `Q + X (a - b) X*` with `X = [1 - a; -a]`.
pub fn p_double_prime_factored(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let id = linalg::identity(n);
    let x = CMat::from_fn(2 * n, n, |i, j| if i < n { id[(i, j)] - a[(i, j)] } else { -a[(i - n, j)] });
    let mut q = linalg::zeros(2 * n, 2 * n);
    for i in 0..n {
        q[(i, i)] = cr(1.0);
    }
    q + &x * (a - b) * x.adjoint()
}

pub fn build_p_double_prime(pair: &SelfadjointPair) -> AlmostProjection {
    AlmostProjection::from_dense(&p_double_prime_blocks(&pair.a, &pair.b))
}

/// `diag(1_n, 0_n)` of size `2n`.
pub fn q_matrix(n: usize) -> SparseMatrix {
    SparseMatrix::from_triplets(2 * n, 2 * n, (0..n).map(|i| (i, i, cr(1.0))))
}

/// `P'' - Q = X (a - b) X*` for sparse `a`, `b`.
pub fn p_double_prime_kernel_sparse(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
    let n = a.nrows();
    let d = a.sub(b);
    let c = SparseMatrix::identity(n).sub(a);
    let cd = c.matmul(&d);
    let ad = a.matmul(&d);
    let blocks = [
        (0, 0, cd.matmul(&c)),
        (0, 1, cd.matmul(a).scale(cr(-1.0))),
        (1, 0, ad.matmul(&c).scale(cr(-1.0))),
        (1, 1, ad.matmul(a)),
    ];
    SparseMatrix::from_blocks(2, 2, n, n, &blocks)
}

pub fn p_double_prime_sparse(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
    q_matrix(a.nrows()).add(&p_double_prime_kernel_sparse(a, b))
}

/// The clamp of the real line onto `[0, 1]`.
pub fn cutoff(t: f64) -> f64 {
    t.clamp(0.0, 1.0)
}

/// `h(a)` by functional calculus.
pub fn cutting(a: &CMat) -> CMat {
    linalg::hermitian_fn(a, cutoff)
}

/// `P''(h_s(a), h_s(b))` with `h_s = (1 - s) id + s h`.
pub fn homotopy_path(pair: &SelfadjointPair, s: f64) -> Result<AlmostProjection> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Range(format!("homotopy parameter {s} outside [0, 1]")));
    }
    let hs = pair.map(|t| (1.0 - s) * t + s * cutoff(t));
    Ok(build_p_double_prime(&hs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub s: Vec<f64>,
    pub deviation: Vec<f64>,
    pub rank_above_half: Vec<usize>,
    pub max_deviation: f64,
    pub rank_constant: bool,
}

/// Samples the homotopy at `samples` uniform points of `[0, 1]`; fails if
/// the deviation reaches `1/4` anywhere or the rank jumps.
pub fn homotopy_sweep(pair: &SelfadjointPair, samples: usize) -> Result<HomotopyReport> {
    let ss: Vec<f64> = (0..samples)
        .map(|k| if samples == 1 { 0.0 } else { k as f64 / (samples - 1) as f64 })
        .collect();
    let mut deviation = Vec::with_capacity(samples);
    let mut ranks = Vec::with_capacity(samples);
    for &s in &ss {
        let p = homotopy_path(pair, s)?;
        if p.deviation() >= 0.25 {
            return Err(Error::Homotopy {
                s,
                reason: format!("deviation {:.3e} reached 1/4", p.deviation()),
            });
        }
        deviation.push(p.deviation());
        ranks.push(p.rank_above_half());
    }
    let rank_constant = ranks.windows(2).all(|w| w[0] == w[1]);
    if !rank_constant {
        return Err(Error::Homotopy {
            s: ss[ranks.windows(2).position(|w| w[0] != w[1]).unwrap() + 1],
            reason: "rank above 1/2 jumped".into(),
        });
    }
    Ok(HomotopyReport {
        max_deviation: deviation.iter().copied().fold(0.0, f64::max),
        s: ss,
        deviation,
        rank_above_half: ranks,
        rank_constant,
    })
}

/// The two generators of the universal algebra as `2 x 2` matrix
/// functions of `t` in `[-1, 1]`.
pub fn universal_generators(t: f64) -> Result<SelfadjointPair> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Range(format!("t = {t} outside [-1, 1]")));
    }
    let (c, s) = ((FRAC_PI_2 * t).cos(), (FRAC_PI_2 * t).sin());
    let m = |x: [[f64; 2]; 2]| CMat::from_fn(2, 2, |i, j| cr(x[i][j]));
    let pair = if t <= 0.0 {
        let a = m([[c * c, 0.0], [0.0, 0.0]]);
        (a.clone(), a)
    } else {
        (m([[1.0, 0.0], [0.0, 0.0]]), m([[c * c, c * s], [c * s, s * s]]))
    };
    SelfadjointPair::new(pair.0, pair.1)
}
