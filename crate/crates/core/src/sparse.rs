//! Compressed-row complex sparse matrices.
//!
//! Truncated regular representations are partial permutations tensored with
//! small fiber blocks, so almost every operator in the pipeline is very
//! sparse. Norms and spectra split into connected components of the
//! nonzero pattern before anything is densified.

use std::collections::BTreeMap;

use crate::linalg::{self, c64, CMat, HermitianOperator, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<c64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![linalg::ONE; n])
    }

    pub fn diagonal(d: &[c64]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, c64)>,
    ) -> Self {
        let mut rows: Vec<BTreeMap<usize, c64>> = vec![BTreeMap::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            *rows[i].entry(j).or_insert(ZERO) += v;
        }
        Self::from_row_maps(nrows, ncols, rows)
    }

    fn from_row_maps(nrows: usize, ncols: usize, rows: Vec<BTreeMap<usize, c64>>) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                if v != ZERO {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(a: &CMat) -> Self {
        let mut trip = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != ZERO {
                    trip.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), trip)
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = linalg::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            out[(i, j)] = v;
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |k| (i, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => ZERO,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.iter().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, s: c64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.prune()
    }

    fn prune(self) -> Self {
        if self.values.iter().all(|v| *v != ZERO) {
            return self;
        }
        Self::from_triplets(self.nrows, self.ncols, self.iter())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: c64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            let (mut p, pe) = (self.indptr[i], self.indptr[i + 1]);
            let (mut q, qe) = (other.indptr[i], other.indptr[i + 1]);
            while p < pe || q < qe {
                let jp = if p < pe { self.indices[p] } else { usize::MAX };
                let jq = if q < qe { other.indices[q] } else { usize::MAX };
                if jp < jq {
                    push_nonzero(&mut indices, &mut values, jp, self.values[p]);
                    p += 1;
                } else if jq < jp {
                    push_nonzero(&mut indices, &mut values, jq, other.values[q] * s);
                    q += 1;
                } else {
                    push_nonzero(&mut indices, &mut values, jp, self.values[p] + other.values[q] * s);
                    p += 1;
                    q += 1;
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, linalg::ONE)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -linalg::ONE)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "dimension mismatch in sparse product");
        // dense scratch row with a touched-column list
        let mut acc = vec![ZERO; other.ncols];
        let mut mark = vec![false; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != ZERO {
                    indices.push(j);
                    values.push(acc[j]);
                }
                acc[j] = ZERO;
                mark[j] = false;
            }
            touched.clear();
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn matvec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Embeds into a larger zero matrix with the top-left corner at the origin.
    pub fn pad(&self, nrows: usize, ncols: usize) -> Self {
        assert!(nrows >= self.nrows && ncols >= self.ncols);
        let mut out = self.clone();
        out.nrows = nrows;
        out.ncols = ncols;
        let last = *out.indptr.last().unwrap();
        out.indptr.resize(nrows + 1, last);
        out
    }

    /// Leading principal block (or rectangular top-left corner).
    pub fn corner(&self, nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(
            nrows,
            ncols,
            self.iter().filter(|&(i, j, _)| i < nrows && j < ncols),
        )
    }

    /// Assembles a block matrix from `(block_row, block_col, block)` with
    /// uniform block shape `br x bc` on an `nb_r x nb_c` grid.
    pub fn from_blocks(
        nb_r: usize,
        nb_c: usize,
        br: usize,
        bc: usize,
        blocks: &[(usize, usize, SparseMatrix)],
    ) -> Self {
        let trip = blocks.iter().flat_map(|(bi, bj, m)| {
            assert_eq!((m.nrows, m.ncols), (br, bc));
            m.iter().map(move |(i, j, v)| (bi * br + i, bj * bc + j, v))
        });
        Self::from_triplets(nb_r * br, nb_c * bc, trip)
    }

    /// Dense submatrix on the given rows and columns.
    pub fn dense_submatrix(&self, rows: &[usize], cols: &[usize]) -> CMat {
        let mut col_pos = vec![usize::MAX; self.ncols];
        for (p, &j) in cols.iter().enumerate() {
            col_pos[j] = p;
        }
        let mut out = linalg::zeros(rows.len(), cols.len());
        for (p, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if col_pos[j] != usize::MAX {
                    out[(p, col_pos[j])] = v;
                }
            }
        }
        out
    }

    /// Sparse submatrix on the given rows and columns.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.ncols];
        for (p, &j) in cols.iter().enumerate() {
            pos[j] = p;
        }
        let mut trip = Vec::new();
        for (p, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if pos[j] != usize::MAX {
                    trip.push((p, pos[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), trip)
    }

    /// Sparse principal submatrix on `idx` (in the given order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        self.submatrix(idx, idx)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |a - a*|` entrywise.
    pub fn selfadjoint_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.sub(&self.adjoint()).max_abs()
    }

    /// Connected components of the bipartite row/column graph of the nonzero
    /// pattern, as `(rows, cols)` pairs. Empty rows and columns are dropped.
    pub fn bipartite_components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut uf = UnionFind::new(self.nrows + self.ncols);
        for (i, j, _) in self.iter() {
            uf.union(i, self.nrows + j);
        }
        let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for i in 0..self.nrows {
            if self.indptr[i] < self.indptr[i + 1] {
                groups.entry(uf.find(i)).or_default().0.push(i);
            }
        }
        let mut seen = vec![false; self.ncols];
        for (_, j, _) in self.iter() {
            if !seen[j] {
                seen[j] = true;
                groups.entry(uf.find(self.nrows + j)).or_default().1.push(j);
            }
        }
        groups
            .into_values()
            .map(|(r, mut c)| {
                c.sort_unstable();
                (r, c)
            })
            .collect()
    }
}

/// Operator norm (largest singular value) of a sparse matrix, computed
/// component by component. Components larger than `LANCZOS_THRESHOLD`
/// go through Lanczos on the Gram operator.
pub fn op_norm(a: &SparseMatrix) -> f64 {
    a.bipartite_components()
        .into_iter()
        .map(|(rows, cols)| {
            if rows.len().min(cols.len()) > LANCZOS_THRESHOLD {
                let sub = a.submatrix(&rows, &cols);
                let gram = GramOperator { a: &sub };
                let (_, top) = linalg::lanczos_extremes(&gram, 1e-14, 400);
                top.max(0.0).sqrt()
            } else {
                linalg::op_norm(&a.dense_submatrix(&rows, &cols))
            }
        })
        .fold(0.0, f64::max)
}

const LANCZOS_THRESHOLD: usize = 700;

/// Operator norm of a Hermitian sparse matrix, block by block; large
/// blocks go through Lanczos without being densified.
pub fn hermitian_op_norm(a: &SparseMatrix) -> f64 {
    hermitian_partition(std::slice::from_ref(a))
        .into_iter()
        .map(|idx| {
            if idx.len() > LANCZOS_THRESHOLD {
                let sub = a.principal_submatrix(&idx);
                let (lo, hi) = linalg::lanczos_extremes(&sub, 1e-12, 600);
                lo.abs().max(hi.abs())
            } else {
                linalg::spectral_radius(&a.dense_submatrix(&idx, &idx))
            }
        })
        .fold(0.0, f64::max)
}

struct GramOperator<'a> {
    a: &'a SparseMatrix,
}

impl HermitianOperator for GramOperator<'_> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        let y = self.a.matvec(x);
        let mut out = vec![ZERO; self.a.ncols()];
        for (i, j, v) in self.a.iter() {
            out[j] += v.conj() * y[i];
        }
        out
    }
}

impl HermitianOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        self.matvec(x)
    }
}

/// A Hermitian matrix split along the connected components of its
/// off-diagonal pattern, each component diagonalized densely.
#[derive(Clone, Debug)]
pub struct BlockSpectrum {
    pub blocks: Vec<SpectralBlock>,
}

#[derive(Clone, Debug)]
pub struct SpectralBlock {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl BlockSpectrum {
    /// Diagonalizes `a` on the given partition of its index set. The
    /// partition must not cut any nonzero off-diagonal entry.
    pub fn with_partition(a: &SparseMatrix, partition: &[Vec<usize>]) -> Self {
        let blocks = partition
            .iter()
            .map(|idx| {
                let sub = a.dense_submatrix(idx, idx);
                let (values, vectors) = linalg::hermitian_eigen(&sub);
                SpectralBlock {
                    indices: idx.clone(),
                    values,
                    vectors,
                }
            })
            .collect();
        Self { blocks }
    }

    pub fn new(a: &SparseMatrix) -> Self {
        Self::with_partition(a, &hermitian_partition(std::slice::from_ref(a)))
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.values.iter().copied())
    }
}

/// Common refinement-free partition of the index set such that every
/// off-diagonal nonzero of every matrix in `mats` stays inside one part.
/// Parts are sorted by smallest index; singletons are included.
pub fn hermitian_partition(mats: &[SparseMatrix]) -> Vec<Vec<usize>> {
    let n = mats.first().map_or(0, |m| m.nrows());
    let mut uf = UnionFind::new(n);
    for m in mats {
        assert_eq!(m.nrows(), n);
        for (i, j, _) in m.iter() {
            if i != j {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
    parts.sort_by_key(|p| p[0]);
    parts
}

fn push_nonzero(indices: &mut Vec<usize>, values: &mut Vec<c64>, j: usize, v: c64) {
    if v != ZERO {
        indices.push(j);
        values.push(v);
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cr, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian(7, &mut rng);
        let b = random_hermitian(7, &mut rng);
        let sa = SparseMatrix::from_dense(&a);
        let sb = SparseMatrix::from_dense(&b);
        let p = sa.matmul(&sb).to_dense();
        assert!(linalg::max_abs_diff(&p, &(&a * &b)) < 1e-13);
    }

    #[test]
    fn componentwise_norm_matches_dense_norm() {
        // block diagonal with a permutation scrambling the layout
        let trip = vec![
            (0, 3, cr(2.0)),
            (3, 0, cr(-1.0)),
            (1, 1, c64::new(0.0, 5.0)),
            (2, 4, cr(1.0)),
            (4, 2, cr(1.0)),
            (4, 4, cr(1.0)),
        ];
        let s = SparseMatrix::from_triplets(5, 5, trip);
        assert_eq!(s.bipartite_components().len(), 4);
        let dense = linalg::op_norm(&s.to_dense());
        assert!((op_norm(&s) - dense).abs() < 1e-12);
        assert!((dense - 5.0).abs() < 1e-12);
    }

    #[test]
    fn large_component_uses_lanczos_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hermitian(LANCZOS_THRESHOLD + 5, &mut rng);
        let s = SparseMatrix::from_dense(&a);
        let direct = linalg::spectral_radius(&a);
        assert!((op_norm(&s) - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn hermitian_norm_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_hermitian(LANCZOS_THRESHOLD + 20, &mut rng);
        let s = SparseMatrix::from_dense(&a);
        let direct = linalg::spectral_radius(&a);
        assert!((hermitian_op_norm(&s) - direct).abs() < 1e-9 * direct);
        let small = SparseMatrix::from_triplets(3, 3, vec![(0, 2, cr(2.0)), (2, 0, cr(2.0)), (1, 1, cr(-3.0))]);
        assert!((hermitian_op_norm(&small) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn block_spectrum_collects_all_eigenvalues() {
        let trip = vec![
            (0, 2, cr(1.0)),
            (2, 0, cr(1.0)),
            (1, 1, cr(3.0)),
        ];
        let s = SparseMatrix::from_triplets(3, 3, trip);
        let mut ev: Vec<f64> = BlockSpectrum::new(&s).eigenvalues().collect();
        ev.sort_by(f64::total_cmp);
        assert_eq!(ev.len(), 3);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14 && (ev[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pad_and_corner_round_trip() {
        let s = SparseMatrix::from_triplets(2, 2, vec![(0, 1, cr(1.0)), (1, 0, cr(2.0))]);
        let p = s.pad(4, 4);
        assert_eq!(p.nrows(), 4);
        assert_eq!(p.corner(2, 2), s);
        assert_eq!(p.get(1, 0), cr(2.0));
        assert_eq!(p.get(3, 3), ZERO);
    }
}
