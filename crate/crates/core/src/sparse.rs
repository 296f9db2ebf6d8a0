//! Compressed sparse row storage, Kronecker products and the operator trait
//! shared by the iterative and direct solvers.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per rayon task for matrix-vector products. Below this a product runs serially.
const PAR_ROW_CHUNK: usize = 4096;

/// Square or rectangular matrix in CSR form with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` contributions before compression.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, triplets: impl IntoIterator<Item = (usize, usize, f64)>) {
        self.entries.extend(triplets);
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl CsrMatrix {
    /// Compresses triplets, summing duplicates.
    ///
    /// Duplicates are summed in ascending value order, so the result does not
    /// depend on the order in which contributions were pushed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.par_sort_unstable_by(|a, b| {
            (a.0, a.1)
                .cmp(&(b.0, b.1))
                .then_with(|| a.2.total_cmp(&b.2))
        });
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds from a dense row-major matrix, keeping exact zeros out of the pattern.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense matrix");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, triplets)
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

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn add(&self, other: &CsrMatrix) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let triplets = self.triplets().chain(other.triplets()).collect();
        Ok(Self::from_triplets(self.nrows, self.ncols, triplets))
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, triplets)
    }

    /// `max |A - Aᵀ|` over all entries.
    pub fn symmetry_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// `y = A x`, rows processed in parallel for large matrices. Each row is
    /// summed sequentially, so the result is bitwise independent of the thread count.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let row_dot = |i: usize| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum::<f64>()
        };
        if self.nrows >= 2 * PAR_ROW_CHUNK {
            y.par_chunks_mut(PAR_ROW_CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    let base = c * PAR_ROW_CHUNK;
                    for (o, yi) in chunk.iter_mut().enumerate() {
                        *yi = row_dot(base + o);
                    }
                });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row_dot(i);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            dense[i][j] = v;
        }
        dense
    }

    /// Symmetric permutation `P A Pᵀ` where row `i` of `A` becomes row `perm[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.nrows);
        let triplets = self
            .triplets()
            .map(|(i, j, v)| (perm[i], perm[j], v))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    /// Coordinate-list dump, one `row col value` line per stored entry.
    pub fn write_coordinate_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

/// Kronecker product `A ⊗ B`. Entry `((ia, ib), (ja, jb))` lives at
/// `(ia * B.nrows + ib, ja * B.ncols + jb)`.
pub fn kron(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    let nrows = a.nrows * b.nrows;
    let ncols = a.ncols * b.ncols;
    let mut row_ptr = Vec::with_capacity(nrows + 1);
    let mut col_idx = Vec::with_capacity(a.nnz() * b.nnz());
    let mut values = Vec::with_capacity(a.nnz() * b.nnz());
    row_ptr.push(0);
    for ia in 0..a.nrows {
        let (acols, avals) = a.row(ia);
        for ib in 0..b.nrows {
            let (bcols, bvals) = b.row(ib);
            for (&ja, &va) in acols.iter().zip(avals) {
                for (&jb, &vb) in bcols.iter().zip(bvals) {
                    col_idx.push(ja * b.ncols + jb);
                    values.push(va * vb);
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix {
        nrows,
        ncols,
        row_ptr,
        col_idx,
        values,
    }
}

/// `a ⊗ b` for vectors, with `b` varying fastest.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// A symmetric linear operator usable by the solvers.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`. Must be deterministic for a fixed input.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn diagonal(&self) -> Vec<f64>;

    /// Explicitly assembled form.
    fn to_csr(&self) -> CsrMatrix;

    /// Samples `samples` stored entries and compares them with their transposes.
    fn check_symmetric(&self, samples: usize) -> Result<()>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }

    fn to_csr(&self) -> CsrMatrix {
        self.clone()
    }

    fn check_symmetric(&self, samples: usize) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NotSymmetric(format!(
                "{}x{} matrix is not square",
                self.nrows, self.ncols
            )));
        }
        if self.nnz() == 0 {
            return Ok(());
        }
        let scale = self.max_abs();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..samples {
            let k = rng.gen_range(0..self.nnz());
            let i = self.row_ptr.partition_point(|&p| p <= k) - 1;
            let j = self.col_idx[k];
            let (a, b) = (self.values[k], self.get(j, i));
            if (a - b).abs() > 1e-12 * scale {
                return Err(Error::NotSymmetric(format!(
                    "A[{i},{j}] = {a:e} but A[{j},{i}] = {b:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Dot product with a fixed chunked reduction order, independent of thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    const CHUNK: usize = 8192;
    if a.len() < 2 * CHUNK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CsrMatrix {
        CsrMatrix::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 0.5)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn duplicate_summation_is_order_independent() {
        let vals = [1e16, 1.0, -1e16, 3.0, 1e-3];
        let forward: Vec<_> = vals.iter().map(|&v| (0, 0, v)).collect();
        let backward: Vec<_> = vals.iter().rev().map(|&v| (0, 0, v)).collect();
        let a = CsrMatrix::from_triplets(1, 1, forward);
        let b = CsrMatrix::from_triplets(1, 1, backward);
        assert_eq!(a.get(0, 0).to_bits(), b.get(0, 0).to_bits());
    }

    #[test]
    fn mat_vec_and_symmetry() {
        let m = small();
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![5.0, 3.0, 1.0]);
        assert_eq!(m.symmetry_defect(), 0.0);
        m.check_symmetric(100).unwrap();
        let mut bad = m.to_dense();
        bad[0][1] = 2.0;
        assert!(CsrMatrix::from_dense(&bad).check_symmetric(100).is_err());
    }

    #[test]
    fn kron_matches_definition() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let b = small();
        let k = kron(&a, &b);
        assert_eq!(k.nrows(), 6);
        for ia in 0..2 {
            for ja in 0..2 {
                for ib in 0..3 {
                    for jb in 0..3 {
                        assert_eq!(
                            k.get(ia * 3 + ib, ja * 3 + jb),
                            a.get(ia, ja) * b.get(ib, jb)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_round_trip() {
        let m = small();
        let p = m.permute_symmetric(&[2, 0, 1]);
        assert_eq!(p.get(2, 2), 4.0);
        assert_eq!(p.get(2, 0), 1.0);
        let inverse = [1, 2, 0];
        assert_eq!(p.permute_symmetric(&inverse), m);
    }

    #[test]
    fn parallel_dot_is_reproducible() {
        let a: Vec<f64> = (0..50_000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..50_000).map(|i| (i as f64 * 0.5).cos()).collect();
        let d1 = dot(&a, &b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let d2 = pool.install(|| dot(&a, &b));
        assert_eq!(d1.to_bits(), d2.to_bits());
    }
}
