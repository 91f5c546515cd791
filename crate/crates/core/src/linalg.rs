//! Dense complex linear algebra on top of `faer`.
//!
//! Everything in this crate that needs a spectrum goes through the helpers
//! here: Hermitian eigendecomposition, functional calculus, operator norms
//! (largest singular value) and a Lanczos routine for matrix-free Hermitian
//! operators that are too large to densify.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use faer::c64;

/// Dense complex matrix.
pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub fn cr(re: f64) -> c64 {
    c64 { re, im: 0.0 }
}

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_real_diag(d: &[f64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { cr(d[i]) } else { ZERO })
}

pub fn from_rows(rows: &[&[c64]]) -> CMat {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

/// `[[a, b], [c, d]]` assembled from four equally shaped blocks.
pub fn block2x2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    let (r1, c1) = (a.nrows(), a.ncols());
    let (r2, c2) = (d.nrows(), d.ncols());
    Mat::from_fn(r1 + r2, c1 + c2, |i, j| match (i < r1, j < c1) {
        (true, true) => a[(i, j)],
        (true, false) => b[(i, j - c1)],
        (false, true) => c[(i - r1, j)],
        (false, false) => d[(i - r1, j - c1)],
    })
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(n, m);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                out[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// `s * a`.
pub fn scale(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Entrywise distance `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// `max |a - a*|` entrywise.
pub fn selfadjoint_defect(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `(a + a*) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    match n {
        0 => (Vec::new(), zeros(0, 0)),
        1 => (vec![a[(0, 0)].re], identity(1)),
        _ => {
            let evd = a
                .self_adjoint_eigen(Side::Lower)
                .expect("self-adjoint eigendecomposition failed to converge");
            let s = evd.S().column_vector();
            let vals = (0..n).map(|i| s[i].re).collect();
            (vals, evd.U().to_owned())
        }
    }
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    match a.nrows() {
        0 => Vec::new(),
        1 => vec![a[(0, 0)].re],
        2 => {
            let (p, q, r) = (a[(0, 0)].re, a[(1, 1)].re, a[(1, 0)]);
            let mean = 0.5 * (p + q);
            let rad = (0.25 * (p - q) * (p - q) + r.norm_sqr()).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => a
            .self_adjoint_eigenvalues(Side::Lower)
            .expect("self-adjoint eigenvalue solver failed to converge"),
    }
}

/// Continuous functional calculus `f(a)` for Hermitian `a`.
pub fn hermitian_fn(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, u) = hermitian_eigen(a);
    let n = vals.len();
    let mut scaled = u.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    hermitian_part(&(&scaled * u.adjoint()))
}

/// Spectral radius of a Hermitian matrix.
pub fn spectral_radius(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)
        .into_iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// Operator norm (largest singular value) of a dense matrix.
///
/// Computed from the Gram matrix on the smaller side; the top singular value
/// is well conditioned under that squaring.
pub fn op_norm(a: &CMat) -> f64 {
    let (r, c) = (a.nrows(), a.ncols());
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r == 1 || c == 1 {
        return a.norm_l2();
    }
    let gram = if c <= r { a.adjoint() * a } else { a * a.adjoint() };
    let top = hermitian_eigenvalues(&hermitian_part(&gram))
        .last()
        .copied()
        .unwrap_or(0.0);
    top.max(0.0).sqrt()
}

/// Random Hermitian matrix with entries drawn from the unit square.
pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMat {
    let m = Mat::from_fn(n, n, |_, _| {
        c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    hermitian_part(&m)
}

/// Haar-ish random unitary: eigenvectors of a random Hermitian matrix.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let h = random_hermitian(n, rng);
    let (_, u) = hermitian_eigen(&h);
    let phases: Vec<c64> = (0..n)
        .map(|_| c64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    Mat::from_fn(n, n, |i, j| u[(i, j)] * phases[j])
}

/// Hermitian operator given only through its action on vectors.
pub trait HermitianOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[c64]) -> Vec<c64>;
}

impl HermitianOperator for CMat {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Extreme eigenvalues `(min, max)` of a Hermitian operator by Lanczos with
/// full reorthogonalization.
///
/// Stops when both extreme Ritz values are stationary to `tol` (relative to
/// the largest magnitude seen) or the Krylov space is exhausted.
pub fn lanczos_extremes(op: &dyn HermitianOperator, tol: f64, max_iter: usize) -> (f64, f64) {
    let n = op.dim();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c61_6e63);
    let mut q: Vec<c64> = (0..n)
        .map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let nq = vnorm(&q);
    q.iter_mut().for_each(|z| *z /= nq);

    let mut basis: Vec<Vec<c64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = (f64::NAN, f64::NAN);
    let steps = max_iter.min(n);
    for k in 0..steps {
        let mut w = op.apply(&q);
        let alpha = dot(&q, &w).re;
        basis.push(q.clone());
        alphas.push(alpha);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let beta = vnorm(&w);

        let m = alphas.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                cr(alphas[i])
            } else if i + 1 == j {
                cr(betas[i])
            } else if j + 1 == i {
                cr(betas[j])
            } else {
                ZERO
            }
        });
        let ev = hermitian_eigenvalues(&t);
        let cur = (ev[0], ev[m - 1]);
        let scale = cur.0.abs().max(cur.1.abs()).max(f64::MIN_POSITIVE);
        let converged = k > 2
            && (cur.0 - last.0).abs() <= tol * scale
            && (cur.1 - last.1).abs() <= tol * scale;
        last = cur;
        if converged || beta <= tol * scale * 1e-3 || k + 1 == steps {
            break;
        }
        betas.push(beta);
        q = w.into_iter().map(|z| z / beta).collect();
    }
    last
}
