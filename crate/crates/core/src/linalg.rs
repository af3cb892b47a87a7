//! Thin numerical layer over faer: compressed sparse rows, block-diagonal
//! parameter matrices, a sparse SPD factor and dense mat-vec helpers.

use faer::linalg::solvers::Solve;
use faer::reborrow::ReborrowMut;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{Error, Result};

pub(crate) fn par() -> Par {
    faer::get_global_parallelism()
}

/// Caps the worker count of dense and sparse kernels; `1` runs sequentially.
pub fn set_thread_limit(threads: usize) {
    faer::set_global_parallelism(if threads <= 1 {
        Par::Seq
    } else {
        Par::rayon(threads)
    });
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest entrywise relative difference `|a−b| / max(|b|∞, tiny)`.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// `y = A x` (or `Aᵀ x`) for a dense matrix.
pub fn gemv(a: MatRef<'_, f64>, transpose: bool, x: &[f64]) -> Vec<f64> {
    let a = if transpose { a.transpose() } else { a };
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    let n = y.len();
    faer::linalg::matmul::matmul(
        MatMut::from_column_major_slice_mut(&mut y, n, 1),
        Accum::Replace,
        a,
        MatRef::from_column_major_slice(x, x.len(), 1),
        1.0,
        par(),
    );
    y
}

/// Compressed sparse row matrix. Duplicate triplets are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// A 0×`ncols` matrix to be grown with [`CsrMatrix::push_row`].
    pub fn with_columns(ncols: usize) -> Self {
        CsrMatrix {
            nrows: 0,
            ncols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Append a row given by strictly increasing column indices.
    pub fn push_row(&mut self, cols: &[usize], vals: &[f64]) {
        assert_eq!(cols.len(), vals.len());
        assert!(
            cols.windows(2).all(|w| w[0] < w[1]),
            "row columns must increase"
        );
        assert!(
            cols.last().is_none_or(|&c| c < self.ncols),
            "column out of bounds"
        );
        self.col_idx.extend_from_slice(cols);
        self.vals.extend_from_slice(vals);
        self.row_ptr.push(self.col_idx.len());
        self.nrows += 1;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (idx, v) = self.row(r);
            for (&c, &x) in idx.iter().zip(v) {
                let slot = counts[c];
                col_idx[slot] = r;
                vals[slot] = x;
                counts[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.vals[span])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub(crate) fn to_faer(&self) -> SparseColMat<usize, f64> {
        let entries: Vec<Triplet<usize, usize, f64>> = (0..self.nrows)
            .flat_map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter()
                    .zip(vals)
                    .map(move |(&c, &v)| Triplet::new(r, c, v))
                    .collect::<Vec<_>>()
            })
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &entries)
            .expect("CSR entries are in bounds and unique")
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let t = if c < self.nrows { self.get(c, r) } else { 0.0 };
                worst = worst.max((v - t).abs());
            }
        }
        worst
    }
}

/// Sparse Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        if a.nrows() == 0 {
            return Err(Error::UnstableStructure);
        }
        let llt = a
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|_| Error::UnstableStructure)?;
        Ok(SpdFactor { n: a.nrows(), llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.llt
            .solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        x
    }
}

/// Symmetric positive definite block-diagonal matrix with cached block inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    data_offsets: Vec<usize>,
    data: Vec<f64>,
    inverse: Vec<f64>,
    dim: usize,
}

impl BlockDiagonal {
    pub fn empty() -> Self {
        BlockDiagonal {
            offsets: Vec::new(),
            sizes: Vec::new(),
            data_offsets: Vec::new(),
            data: Vec::new(),
            inverse: Vec::new(),
            dim: 0,
        }
    }

    /// Blocks given row-major; each must be square, symmetric and positive definite.
    pub fn from_blocks<I, B>(blocks: I) -> Result<Self>
    where
        I: IntoIterator<Item = B>,
        B: AsRef<[f64]>,
    {
        let mut out = BlockDiagonal::empty();
        for block in blocks {
            out.push(block.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, block: &[f64]) -> Result<()> {
        let m = (block.len() as f64).sqrt().round() as usize;
        if m * m != block.len() || m == 0 {
            return Err(Error::Internal(format!(
                "block of length {} is not square",
                block.len()
            )));
        }
        let inv = spd_inverse(block, m).ok_or_else(|| {
            Error::InvalidState(format!(
                "parameter block {} is not positive definite",
                self.sizes.len()
            ))
        })?;
        self.offsets.push(self.dim);
        self.sizes.push(m);
        self.data_offsets.push(self.data.len());
        self.data.extend_from_slice(block);
        self.inverse.extend_from_slice(&inv);
        self.dim += m;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn block(&self, k: usize) -> &[f64] {
        let m = self.sizes[k];
        &self.data[self.data_offsets[k]..self.data_offsets[k] + m * m]
    }

    pub fn block_offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    /// Inverse of block `k`, row-major.
    pub fn inverse_block(&self, k: usize) -> &[f64] {
        let m = self.sizes[k];
        &self.inverse[self.data_offsets[k]..self.data_offsets[k] + m * m]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_with(&self.data, x)
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        self.apply_with(&self.inverse, x)
    }

    fn apply_with(&self, store: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for k in 0..self.sizes.len() {
            let (m, off, d) = (self.sizes[k], self.offsets[k], self.data_offsets[k]);
            for r in 0..m {
                y[off + r] = (0..m).map(|c| store[d + r * m + c] * x[off + c]).sum();
            }
        }
        y
    }

    /// Apply the inverse to every column of `a` in place (`a ← B⁻¹ a`).
    pub fn apply_inverse_to_columns(&self, mut a: MatMut<'_, f64>) {
        assert_eq!(a.nrows(), self.dim);
        let mut tmp = [0.0f64; 8];
        for j in 0..a.ncols() {
            let col = a
                .rb_mut()
                .col_mut(j)
                .try_as_col_major_mut()
                .unwrap()
                .as_slice_mut();
            for k in 0..self.sizes.len() {
                let (m, off, d) = (self.sizes[k], self.offsets[k], self.data_offsets[k]);
                if m == 1 {
                    col[off] *= self.inverse[d];
                    continue;
                }
                for (r, t) in tmp.iter_mut().enumerate().take(m) {
                    *t = (0..m)
                        .map(|c| self.inverse[d + r * m + c] * col[off + c])
                        .sum();
                }
                col[off..off + m].copy_from_slice(&tmp[..m]);
            }
        }
    }

    /// Right-multiply every row of `a` by the matrix (`a ← a B`).
    pub fn right_multiply(&self, mut a: MatMut<'_, f64>) {
        assert_eq!(a.ncols(), self.dim);
        let nrows = a.nrows();
        for k in 0..self.sizes.len() {
            let (m, off, d) = (self.sizes[k], self.offsets[k], self.data_offsets[k]);
            let cols: Vec<Vec<f64>> = (0..m)
                .map(|c| (0..nrows).map(|r| a[(r, off + c)]).collect())
                .collect();
            for c in 0..m {
                for r in 0..nrows {
                    a[(r, off + c)] = (0..m).map(|t| cols[t][r] * self.data[d + t * m + c]).sum();
                }
            }
        }
    }

    /// Add the block inverses onto the diagonal blocks of `a`.
    pub fn add_inverse_to(&self, mut a: MatMut<'_, f64>) {
        for k in 0..self.sizes.len() {
            let (m, off, d) = (self.sizes[k], self.offsets[k], self.data_offsets[k]);
            for r in 0..m {
                for c in 0..m {
                    a[(off + r, off + c)] += self.inverse[d + r * m + c];
                }
            }
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for k in 0..self.sizes.len() {
            let (s, off) = (self.sizes[k], self.offsets[k]);
            let block = self.block(k);
            for r in 0..s {
                for c in 0..s {
                    m[(off + r, off + c)] = block[r * s + c];
                }
            }
        }
        m
    }
}

/// Inverse of a small SPD matrix via Cholesky; `None` if not SPD or not symmetric.
fn spd_inverse(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for r in 0..m {
        for c in 0..r {
            if (a[r * m + c] - a[c * m + r]).abs() > 1e-12 * scale {
                return None;
            }
        }
    }
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= l[j * m + k] * l[j * m + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * m + j] = djj;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = s / djj;
        }
    }
    // solve L Lᵀ X = I column by column
    let mut inv = vec![0.0; m * m];
    for col in 0..m {
        let mut y = vec![0.0; m];
        for i in 0..m {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * m + k] * y[k];
            }
            y[i] = s / l[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = y[i];
            for k in i + 1..m {
                s -= l[k * m + i] * inv[k * m + col];
            }
            inv[i * m + col] = s / l[i * m + i];
        }
    }
    Some(inv)
}

/// Dense Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct DenseSpdFactor {
    llt: Option<faer::linalg::solvers::Llt<f64>>,
}

impl DenseSpdFactor {
    pub fn new(a: MatRef<'_, f64>) -> Option<Self> {
        if a.nrows() == 0 {
            return Some(DenseSpdFactor { llt: None });
        }
        a.llt(Side::Lower)
            .ok()
            .map(|llt| DenseSpdFactor { llt: Some(llt) })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        if let Some(llt) = &self.llt {
            let n = x.len();
            llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        }
        x
    }
}

/// Dense LU with partial pivoting; refuses pivots below `1e-10` of the largest.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: Option<faer::linalg::solvers::PartialPivLu<f64>>,
}

impl DenseLu {
    pub const PIVOT_THRESHOLD: f64 = 1e-10;

    pub fn new(a: MatRef<'_, f64>) -> Option<Self> {
        if a.nrows() == 0 {
            return Some(DenseLu { lu: None });
        }
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let pivots: Vec<f64> = (0..u.nrows()).map(|k| u[(k, k)].abs()).collect();
        let largest = pivots.iter().cloned().fold(0.0f64, f64::max);
        if !(largest > 0.0)
            || pivots
                .iter()
                .any(|&p| !p.is_finite() || p < Self::PIVOT_THRESHOLD * largest)
        {
            return None;
        }
        Some(DenseLu { lu: Some(lu) })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        if let Some(lu) = &self.lu {
            let n = x.len();
            lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        }
        x
    }
}

/// Deterministic uniform values in [-1, 1) (splitmix64); used for internal probes.
pub fn probe_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}
