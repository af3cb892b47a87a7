//! Global stiffness, the stacked parameter/transform form `K = Cᵀ K_L C`,
//! and the basis / additional partition with its reduced operators.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::reborrow::{Reborrow, ReborrowMut};
use faer::sparse::linalg::solvers::Lu;
use faer::{Mat, MatMut};
use serde::{Deserialize, Serialize};

use crate::elements::{element_decomposition, element_parameters, ElementDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, BlockDiagonal, CsrMatrix};
use crate::model::{PartitionSpec, StructuralModel};

/// One row of the extended transform `C̃`, restricted to free DOFs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtendedRow {
    pub dofs: Vec<usize>,
    pub vals: Vec<f64>,
}

impl ExtendedRow {
    pub fn dot(&self, d: &[f64]) -> f64 {
        self.dofs
            .iter()
            .zip(&self.vals)
            .map(|(&k, v)| v * d[k])
            .sum()
    }
}

fn extended_rows(
    model: &StructuralModel,
    dec: &ElementDecomposition,
    dofs: &[Option<usize>],
) -> Vec<ExtendedRow> {
    (0..dec.modes())
        .map(|k| {
            let mut row = ExtendedRow::default();
            for (slot, &v) in dec.global_row(k).iter().enumerate() {
                if let Some(g) = dofs[slot] {
                    if v != 0.0 {
                        row.dofs.push(g);
                        row.vals.push(v);
                    }
                }
            }
            let _ = model;
            row
        })
        .collect()
}

/// Global stiffness over the free DOFs, summed element by element.
///
/// Singularity is reported when the matrix is factorized
/// ([`crate::linalg::SpdFactor::new`] → `UnstableStructure`).
pub fn assemble_global(model: &StructuralModel) -> Result<CsrMatrix> {
    let n = model.n_dofs();
    let mut triplets = Vec::new();
    for el in model.elements() {
        let dec = element_decomposition(model, el)?;
        let k = dec.stiffness();
        let dofs = model.element_dofs(el);
        let nd = dofs.len();
        for (r, gr) in dofs.iter().enumerate() {
            let Some(gr) = gr else { continue };
            for (c, gc) in dofs.iter().enumerate() {
                let Some(gc) = gc else { continue };
                let v = k[r * nd + c];
                if v != 0.0 {
                    triplets.push((*gr, *gc, v));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, triplets))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterBlock {
    pub element: usize,
    pub offset: usize,
    pub modes: usize,
}

/// `K_L` (block diagonal) and `C` (stacked extended rows) for all elements.
#[derive(Debug, Clone)]
pub struct GlobalDecomposition {
    pub blocks: Vec<ParameterBlock>,
    pub params: BlockDiagonal,
    pub transform: CsrMatrix,
}

impl GlobalDecomposition {
    pub fn parameter_count(&self) -> usize {
        self.params.dim()
    }

    /// `Cᵀ K_L C` as a sparse matrix.
    pub fn reconstruct(&self) -> CsrMatrix {
        let n = self.transform.ncols();
        let mut triplets = Vec::new();
        for (k, blk) in self.blocks.iter().enumerate() {
            let m = blk.modes;
            let kl = self.params.block(k);
            for a in 0..m {
                let (ca_idx, ca_val) = self.transform.row(blk.offset + a);
                for b in 0..m {
                    let kab = kl[a * m + b];
                    if kab == 0.0 {
                        continue;
                    }
                    let (cb_idx, cb_val) = self.transform.row(blk.offset + b);
                    for (&i, &vi) in ca_idx.iter().zip(ca_val) {
                        for (&j, &vj) in cb_idx.iter().zip(cb_val) {
                            triplets.push((i, j, vi * kab * vj));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n, n, triplets)
    }
}

pub fn assemble_parameters(model: &StructuralModel) -> Result<GlobalDecomposition> {
    let n = model.n_dofs();
    let mut blocks = Vec::with_capacity(model.elements().len());
    let mut params = BlockDiagonal::empty();
    let mut triplets = Vec::new();
    let mut offset = 0;
    for el in model.elements() {
        let dec = element_decomposition(model, el)?;
        params.push(dec.params())?;
        let rows = extended_rows(model, &dec, &model.element_dofs(el));
        for (k, row) in rows.iter().enumerate() {
            for (&g, &v) in row.dofs.iter().zip(&row.vals) {
                triplets.push((offset + k, g, v));
            }
        }
        blocks.push(ParameterBlock {
            element: el.id,
            offset,
            modes: dec.modes(),
        });
        offset += dec.modes();
    }
    Ok(GlobalDecomposition {
        blocks,
        params,
        transform: CsrMatrix::from_triplets(offset, n, triplets),
    })
}

/// Sparse LU of the square basis transform `C_b`, for solves with `C_b` and `C_bᵀ`.
#[derive(Debug, Clone)]
pub struct BasisFactorization {
    n: usize,
    lu: Option<Lu<usize, f64>>,
}

impl BasisFactorization {
    /// Accept the factorization only if a probe solve reproduces its input to
    /// this relative accuracy.
    pub const PROBE_TOLERANCE: f64 = 1e-10;

    pub fn new(cb: &CsrMatrix) -> Result<Self> {
        let n = cb.nrows();
        assert_eq!(n, cb.ncols());
        if n == 0 {
            return Ok(BasisFactorization { n, lu: None });
        }
        let lu = cb.to_faer().sp_lu().map_err(|_| Error::BasisUnstable)?;
        let f = BasisFactorization { n, lu: Some(lu) };
        let v = linalg::probe_vector(n, 0x5EED);
        let back = f.solve(&cb.mul_vec(&v));
        let back_t = f.solve_transpose(&cb.mul_transpose_vec(&v));
        let ok = |x: &[f64]| {
            x.iter().all(|t| t.is_finite())
                && linalg::relative_difference(x, &v) < Self::PROBE_TOLERANCE
        };
        if !(ok(&back) && ok(&back_t)) {
            return Err(Error::BasisUnstable);
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `C_b⁻¹ v`
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let mut x = v.to_vec();
        if let Some(lu) = &self.lu {
            lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        }
        x
    }

    /// `C_b⁻ᵀ v`
    pub fn solve_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut x = v.to_vec();
        if let Some(lu) = &self.lu {
            lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        }
        x
    }

    fn solve_transpose_columns(&self, rhs: MatMut<'_, f64>) {
        if let Some(lu) = &self.lu {
            lu.solve_transpose_in_place(rhs);
        }
    }
}

/// Storage of `C_s = C_a C_b⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsStorage {
    /// Dense n×q `C_sᵀ`.
    Dense,
    /// Row-compressed `C_s`. Entries at or below machine epsilon times the
    /// largest magnitude in their row are solve roundoff and are dropped.
    Sparse,
    /// Sparse while the fill stays below [`AUTO_SPARSE_FILL`], dense otherwise.
    #[default]
    Auto,
}

/// Fill fraction above which `Auto` storage switches to dense.
pub const AUTO_SPARSE_FILL: f64 = 0.3;

#[derive(Debug)]
enum CsOperator {
    /// `C_sᵀ`, n×q column-major.
    Dense(Mat<f64>),
    /// `C_s`, q×n.
    Sparse(CsrMatrix),
}

/// Parts of a partition fixed by topology: reused when only stiffness
/// parameters change.
#[derive(Debug)]
pub struct PartitionTopology {
    n: usize,
    q: usize,
    basis_ids: Vec<usize>,
    additional_ids: Vec<usize>,
    cb: BasisFactorization,
    ca: CsrMatrix,
    cs: CsOperator,
}

/// Basis / additional split of a structure with its reduced-system operators.
#[derive(Debug, Clone)]
pub struct SystemPartition {
    topology: Arc<PartitionTopology>,
    klb: BlockDiagonal,
    kla: BlockDiagonal,
}

/// Right-hand side of the reduced system plus the cached basis term
/// `B_s = K_Lb⁻¹ C_b⁻ᵀ R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRhs {
    pub b: Vec<f64>,
    pub b_s: Vec<f64>,
}

const SOLVE_BLOCK: usize = 256;

pub fn make_partition(model: &StructuralModel, spec: &PartitionSpec) -> Result<SystemPartition> {
    make_partition_with(model, spec, CsStorage::Auto)
}

pub fn make_partition_with(
    model: &StructuralModel,
    spec: &PartitionSpec,
    storage: CsStorage,
) -> Result<SystemPartition> {
    let elements = model.elements();
    if let Some(&bad) = spec.additional_ids.iter().find(|&&id| id >= elements.len()) {
        return Err(Error::InvalidParameter(format!(
            "additional element {bad} does not exist"
        )));
    }
    let n = model.n_dofs();
    let basis_params: usize = elements
        .iter()
        .filter(|e| !spec.is_additional(e.id))
        .map(|e| e.kind.mode_count())
        .sum();
    if basis_params != n {
        return Err(Error::NotDeterminate {
            basis_params,
            dofs: n,
        });
    }

    let mut basis_ids = Vec::new();
    let mut additional_ids = Vec::new();
    let mut klb = BlockDiagonal::empty();
    let mut kla = BlockDiagonal::empty();
    let mut cb_triplets = Vec::new();
    let mut ca_triplets = Vec::new();
    let (mut nb, mut na) = (0, 0);
    for el in elements {
        let dec = element_decomposition(model, el)?;
        let rows = extended_rows(model, &dec, &model.element_dofs(el));
        let additional = spec.is_additional(el.id);
        let (ids, params, triplets, offset) = if additional {
            (&mut additional_ids, &mut kla, &mut ca_triplets, &mut na)
        } else {
            (&mut basis_ids, &mut klb, &mut cb_triplets, &mut nb)
        };
        ids.push(el.id);
        params.push(dec.params())?;
        for (k, row) in rows.iter().enumerate() {
            for (&g, &v) in row.dofs.iter().zip(&row.vals) {
                triplets.push((*offset + k, g, v));
            }
        }
        *offset += dec.modes();
    }
    let q = na;
    let cb = CsrMatrix::from_triplets(n, n, cb_triplets);
    let ca = CsrMatrix::from_triplets(q, n, ca_triplets);
    let cb = BasisFactorization::new(&cb)?;

    let cs = build_cs(&cb, &ca, n, storage);
    Ok(SystemPartition {
        topology: Arc::new(PartitionTopology {
            n,
            q,
            basis_ids,
            additional_ids,
            cb,
            ca,
            cs,
        }),
        klb,
        kla,
    })
}

/// `C_sᵀ = C_b⁻ᵀ C_aᵀ`, solved one block of columns at a time.
fn build_cs(cb: &BasisFactorization, ca: &CsrMatrix, n: usize, storage: CsStorage) -> CsOperator {
    let q = ca.nrows();
    let mut dense = match storage {
        CsStorage::Dense => Some(Mat::<f64>::zeros(n, q)),
        _ => None,
    };
    let mut sparse = CsrMatrix::with_columns(n);
    let mut block = Mat::<f64>::zeros(n, SOLVE_BLOCK.min(q));
    let (mut cols, mut vals) = (Vec::new(), Vec::new());
    let mut start = 0;
    while start < q {
        let width = SOLVE_BLOCK.min(q - start);
        let mut w = block.as_mut().subcols_mut(0, width);
        w.fill(0.0);
        for j in 0..width {
            let (idx, v) = ca.row(start + j);
            for (&c, &x) in idx.iter().zip(v) {
                w[(c, j)] += x;
            }
        }
        cb.solve_transpose_columns(w.rb_mut());
        if let Some(d) = dense.as_mut() {
            d.as_mut().subcols_mut(start, width).copy_from(w.rb());
        } else {
            for j in 0..width {
                cols.clear();
                vals.clear();
                let col = w.rb().col(j);
                let cutoff = f64::EPSILON * (0..n).map(|i| col[i].abs()).fold(0.0, f64::max);
                for i in 0..n {
                    let x = col[i];
                    if x.abs() > cutoff {
                        cols.push(i);
                        vals.push(x);
                    }
                }
                sparse.push_row(&cols, &vals);
            }
            let filled = (start + width) as f64 * n as f64;
            if storage == CsStorage::Auto && sparse.nnz() as f64 > AUTO_SPARSE_FILL * filled {
                let mut d = Mat::<f64>::zeros(n, q);
                for r in 0..sparse.nrows() {
                    let (idx, v) = sparse.row(r);
                    for (&c, &x) in idx.iter().zip(v) {
                        d[(c, r)] = x;
                    }
                }
                dense = Some(d);
                sparse = CsrMatrix::with_columns(n);
            }
        }
        start += width;
    }
    match dense {
        Some(d) => CsOperator::Dense(d),
        None => CsOperator::Sparse(sparse),
    }
}

impl SystemPartition {
    pub fn n(&self) -> usize {
        self.topology.n
    }

    pub fn q(&self) -> usize {
        self.topology.q
    }

    pub fn basis_ids(&self) -> &[usize] {
        &self.topology.basis_ids
    }

    pub fn additional_ids(&self) -> &[usize] {
        &self.topology.additional_ids
    }

    pub fn basis_parameters(&self) -> &BlockDiagonal {
        &self.klb
    }

    pub fn additional_parameters(&self) -> &BlockDiagonal {
        &self.kla
    }

    pub fn basis_factorization(&self) -> &BasisFactorization {
        &self.topology.cb
    }

    pub fn additional_transform(&self) -> &CsrMatrix {
        &self.topology.ca
    }

    /// Storage actually used for `C_s` (never `Auto`).
    pub fn cs_storage(&self) -> CsStorage {
        match self.topology.cs {
            CsOperator::Dense(_) => CsStorage::Dense,
            CsOperator::Sparse(_) => CsStorage::Sparse,
        }
    }

    /// Stored entries of `C_s`.
    pub fn cs_stored_entries(&self) -> usize {
        match &self.topology.cs {
            CsOperator::Dense(d) => d.nrows() * d.ncols(),
            CsOperator::Sparse(s) => s.nnz(),
        }
    }

    /// Dense copy of `C_sᵀ` (n×q).
    pub fn cs_transpose_dense(&self) -> Mat<f64> {
        match &self.topology.cs {
            CsOperator::Dense(d) => d.clone(),
            CsOperator::Sparse(s) => s.to_dense().transpose().to_owned(),
        }
    }

    /// Copy columns `start..start + w.ncols()` of `C_sᵀ` into `w`.
    fn cs_transpose_columns(&self, start: usize, mut w: MatMut<'_, f64>) {
        match &self.topology.cs {
            CsOperator::Dense(d) => w.copy_from(d.as_ref().subcols(start, w.ncols())),
            CsOperator::Sparse(s) => {
                w.fill(0.0);
                for j in 0..w.ncols() {
                    let (idx, v) = s.row(start + j);
                    for (&c, &x) in idx.iter().zip(v) {
                        w[(c, j)] = x;
                    }
                }
            }
        }
    }

    /// True if both partitions share the same factorized topology.
    pub fn shares_topology(&self, other: &SystemPartition) -> bool {
        Arc::ptr_eq(&self.topology, &other.topology)
    }

    /// Same topology (C_b factorization, C_s) with new parameter blocks, in
    /// basis / additional element order.
    pub fn with_parameters(
        &self,
        klb: BlockDiagonal,
        kla: BlockDiagonal,
    ) -> Result<SystemPartition> {
        if klb.dim() != self.n() || kla.dim() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.n() + self.q(),
                got: klb.dim() + kla.dim(),
            });
        }
        Ok(SystemPartition {
            topology: Arc::clone(&self.topology),
            klb,
            kla,
        })
    }

    /// Rebuild the parameter blocks from `model` (same topology) and reuse
    /// the factorized transforms.
    pub fn reparameterize(&self, model: &StructuralModel) -> Result<SystemPartition> {
        let elements = model.elements();
        let mut klb = BlockDiagonal::empty();
        let mut kla = BlockDiagonal::empty();
        for &id in self.basis_ids() {
            klb.push(&element_parameters(model, &elements[id])?)?;
        }
        for &id in self.additional_ids() {
            kla.push(&element_parameters(model, &elements[id])?)?;
        }
        self.with_parameters(klb, kla)
    }

    /// `C_s x` for x of length n.
    pub fn cs_apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.topology.cs {
            CsOperator::Dense(d) => linalg::gemv(d.as_ref(), true, x),
            CsOperator::Sparse(s) => s.mul_vec(x),
        }
    }

    /// `C_sᵀ y` for y of length q.
    pub fn cs_transpose_apply(&self, y: &[f64]) -> Vec<f64> {
        match &self.topology.cs {
            CsOperator::Dense(d) => linalg::gemv(d.as_ref(), false, y),
            CsOperator::Sparse(s) => s.mul_transpose_vec(y),
        }
    }

    /// `B = C_s K_Lb⁻¹ C_b⁻ᵀ R`, evaluated right to left.
    pub fn reduced_rhs(&self, r: &[f64]) -> Result<ReducedRhs> {
        self.check_len(r.len(), self.n())?;
        let pr = self.topology.cb.solve_transpose(r);
        let b_s = self.klb.apply_inverse(&pr);
        let b = if self.q() == 0 {
            Vec::new()
        } else {
            self.cs_apply(&b_s)
        };
        Ok(ReducedRhs { b, b_s })
    }

    /// `(K_La⁻¹ + C_s K_Lb⁻¹ C_sᵀ) x` through mat-vec chains only.
    pub fn reduced_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len(), self.q())?;
        if self.q() == 0 {
            return Ok(Vec::new());
        }
        let mut y = self.kla.apply_inverse(x);
        let t = self.cs_transpose_apply(x);
        let t = self.klb.apply_inverse(&t);
        for (yi, si) in y.iter_mut().zip(self.cs_apply(&t)) {
            *yi += si;
        }
        Ok(y)
    }

    /// `d = C_b⁻¹ (B_s − K_Lb⁻¹ C_sᵀ F_a)`.
    pub fn recover_displacements(&self, b_s: &[f64], forces: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b_s.len(), self.n())?;
        self.check_len(forces.len(), self.q())?;
        let mut rhs = b_s.to_vec();
        if self.q() > 0 {
            let t = self.klb.apply_inverse(&self.cs_transpose_apply(forces));
            for (r, ti) in rhs.iter_mut().zip(t) {
                *r -= ti;
            }
        }
        Ok(self.topology.cb.solve(&rhs))
    }

    /// Deformations `u_a = C_a d` of the additional elements, stacked in id order.
    pub fn additional_deformations(&self, d: &[f64]) -> Vec<f64> {
        self.topology.ca.mul_vec(d)
    }

    /// Dense `C_s K_Lb⁻¹ C_sᵀ` (q×q), one block of columns at a time.
    pub fn reduced_gram(&self) -> Mat<f64> {
        match &self.topology.cs {
            CsOperator::Dense(d) => self.dense_gram(d),
            CsOperator::Sparse(s) => self.sparse_gram(s),
        }
    }

    fn dense_gram(&self, cs: &Mat<f64>) -> Mat<f64> {
        let (n, q) = (self.n(), self.q());
        let mut out = Mat::<f64>::zeros(q, q);
        let mut w = Mat::<f64>::zeros(n, SOLVE_BLOCK.min(q));
        let mut start = 0;
        while start < q {
            let width = SOLVE_BLOCK.min(q - start);
            let mut wb = w.as_mut().subcols_mut(0, width);
            self.cs_transpose_columns(start, wb.rb_mut());
            self.klb.apply_inverse_to_columns(wb.rb_mut());
            faer::linalg::matmul::matmul(
                out.as_mut().subcols_mut(start, width),
                faer::Accum::Replace,
                cs.as_ref().transpose(),
                wb.rb(),
                1.0,
                linalg::par(),
            );
            start += width;
        }
        // symmetrize roundoff
        for i in 0..q {
            for j in 0..i {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// Sum of `V_k D_k V_kᵀ` over basis blocks, where `V_k` holds the
    /// columns of `C_s` belonging to block `k`. Only the upper triangle is
    /// accumulated, then mirrored.
    fn sparse_gram(&self, cs: &CsrMatrix) -> Mat<f64> {
        let q = self.q();
        let cols = cs.transpose();
        let mut out = Mat::<f64>::zeros(q, q);
        let mut rows: Vec<usize> = Vec::new();
        // maximal runs of consecutive row indices, as (position in rows, length)
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut v: Vec<f64> = Vec::new();
        let mut w: Vec<f64> = Vec::new();
        for k in 0..self.klb.block_count() {
            let (off, m) = (self.klb.block_offset(k), self.klb.block(k).len().isqrt());
            let inv = self.klb.inverse_block(k);
            rows.clear();
            for c in off..off + m {
                rows.extend_from_slice(cols.row(c).0);
            }
            rows.sort_unstable();
            rows.dedup();
            let u = rows.len();
            if u == 0 {
                continue;
            }
            runs.clear();
            for (a, &r) in rows.iter().enumerate() {
                match runs.last_mut() {
                    Some((p, len)) if rows[*p] + *len == r => *len += 1,
                    _ => runs.push((a, 1)),
                }
            }
            // V and W = V D_k stored column by column (m columns of length u)
            v.clear();
            v.resize(u * m, 0.0);
            for t in 0..m {
                let (idx, x) = cols.row(off + t);
                for (&r, &val) in idx.iter().zip(x) {
                    v[t * u + rows.binary_search(&r).unwrap()] = val;
                }
            }
            w.clear();
            w.resize(u * m, 0.0);
            for t in 0..m {
                for s in 0..m {
                    let d = inv[s * m + t];
                    if d != 0.0 {
                        for a in 0..u {
                            w[t * u + a] += v[s * u + a] * d;
                        }
                    }
                }
            }
            for b in 0..u {
                let rb = rows[b];
                let col = out
                    .col_mut(rb)
                    .try_as_col_major_mut()
                    .unwrap()
                    .as_slice_mut();
                for t in 0..m {
                    let vb = v[t * u + b];
                    if vb == 0.0 {
                        continue;
                    }
                    let wt = &w[t * u..(t + 1) * u];
                    for &(p, len) in &runs {
                        if p > b {
                            break;
                        }
                        let len = len.min(b + 1 - p);
                        let r0 = rows[p];
                        for (o, x) in col[r0..r0 + len].iter_mut().zip(&wt[p..p + len]) {
                            *o += x * vb;
                        }
                    }
                }
            }
        }
        for j in 0..q {
            for i in 0..j {
                out[(j, i)] = out[(i, j)];
            }
        }
        out
    }

    /// Dense reduced coefficient matrix `K_La⁻¹ + C_s K_Lb⁻¹ C_sᵀ`.
    pub fn reduced_matrix(&self) -> Mat<f64> {
        let mut a = self.reduced_gram();
        self.kla.add_inverse_to(a.as_mut());
        a
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
