//! Dense kernels shared by the sampler and the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Result, TrpError};

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Smallest admissible eigenvalue of `I + Delta` in the structured sampler.
pub const PD_TOL: f64 = 1e-12;

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    let m = v.abs() - t;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// Cholesky factor of a block-diagonal SPD matrix, one factor per block.
#[derive(Clone, Debug)]
pub struct BlockCholesky {
    blocks: Vec<DMatrix<f64>>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockCholesky {
    pub fn new(spd_blocks: &[DMatrix<f64>]) -> Result<Self> {
        if spd_blocks.is_empty() {
            return Err(TrpError::InvalidInput("no blocks".into()));
        }
        let mut blocks = Vec::with_capacity(spd_blocks.len());
        let mut offsets = Vec::with_capacity(spd_blocks.len());
        let mut dim = 0;
        for (i, b) in spd_blocks.iter().enumerate() {
            if !b.is_square() || b.nrows() == 0 {
                return Err(TrpError::Dimension(format!("block {i} is not square")));
            }
            let chol = Cholesky::new(b.clone())
                .ok_or_else(|| TrpError::NotPositiveDefinite(format!("diagonal block {i}")))?;
            offsets.push(dim);
            dim += b.nrows();
            blocks.push(chol.l());
        }
        Ok(BlockCholesky {
            blocks,
            offsets,
            dim,
        })
    }

    /// Factor of `blockdiag(G_k) + shift * I`.
    pub fn from_grams<'a, I>(grams: I, shift: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DMatrix<f64>>,
    {
        let shifted: Vec<DMatrix<f64>> = grams
            .into_iter()
            .map(|g| g + DMatrix::identity(g.nrows(), g.ncols()) * shift)
            .collect();
        Self::new(&shifted)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    /// `L^{-1} b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = b.clone();
        for (l, &off) in self.blocks.iter().zip(&self.offsets) {
            let n = l.nrows();
            let mut seg = out.rows(off, n).into_owned();
            l.solve_lower_triangular_mut(&mut seg);
            out.rows_mut(off, n).copy_from(&seg);
        }
        out
    }

    /// `L^{-T} b`.
    pub fn solve_upper(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = b.clone();
        for (l, &off) in self.blocks.iter().zip(&self.offsets) {
            let n = l.nrows();
            let mut seg = out.rows(off, n).into_owned();
            l.tr_solve_lower_triangular_mut(&mut seg);
            out.rows_mut(off, n).copy_from(&seg);
        }
        out
    }

    /// `L^{-1} M`, columnwise.
    pub fn solve_lower_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (l, &off) in self.blocks.iter().zip(&self.offsets) {
            let n = l.nrows();
            let mut seg = out.rows(off, n).into_owned();
            l.solve_lower_triangular_mut(&mut seg);
            out.rows_mut(off, n).copy_from(&seg);
        }
        out
    }

    /// `L x`.
    pub fn mul_lower(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (l, &off) in self.blocks.iter().zip(&self.offsets) {
            let n = l.nrows();
            out.rows_mut(off, n).copy_from(&(l * x.rows(off, n)));
        }
        out
    }

    /// `L^T x`.
    pub fn mul_upper(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (l, &off) in self.blocks.iter().zip(&self.offsets) {
            let n = l.nrows();
            out.rows_mut(off, n)
                .copy_from(&(l.transpose() * x.rows(off, n)));
        }
        out
    }

    /// The assembled lower-triangular factor.
    pub fn dense_factor(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (l, &off) in self.blocks.iter().zip(&self.offsets) {
            let n = l.nrows();
            out.view_mut((off, off), (n, n)).copy_from(l);
        }
        out
    }

    /// The assembled matrix `L L^T`.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let l = self.dense_factor();
        &l * l.transpose()
    }
}

/// Precision `Lambda = L L^T + C^T A C` with block-diagonal `L L^T` and a
/// rank-`R` symmetric (possibly indefinite) update.
#[derive(Clone, Debug)]
pub struct StructuredPrecision {
    pub base: BlockCholesky,
    /// `C`, shape `R x N`.
    pub rows: DMatrix<f64>,
    /// `A`, shape `R x R`.
    pub core: DMatrix<f64>,
}

impl StructuredPrecision {
    pub fn new(base: BlockCholesky, rows: DMatrix<f64>, core: DMatrix<f64>) -> Result<Self> {
        if rows.ncols() != base.dim() {
            return Err(TrpError::Dimension(format!(
                "update rows have {} columns, base has dimension {}",
                rows.ncols(),
                base.dim()
            )));
        }
        if !core.is_square() || core.nrows() != rows.nrows() {
            return Err(TrpError::Dimension(format!(
                "core is {}x{}, expected {r}x{r}",
                core.nrows(),
                core.ncols(),
                r = rows.nrows()
            )));
        }
        Ok(StructuredPrecision { base, rows, core })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn rank(&self) -> usize {
        self.rows.nrows()
    }

    /// Dense `Lambda`, for checks at small scale only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.base.dense_matrix() + self.rows.transpose() * &self.core * &self.rows
    }

    pub fn factor(&self) -> Result<StructuredFactor<'_>> {
        let m1 = self.base.solve_lower_mat(&self.rows.transpose());
        let svd = SVD::new(m1, true, true);
        let u_tilde = svd.u.expect("u requested");
        let v_tilde = svd.v_t.expect("v requested").transpose();
        let s = &svd.singular_values;
        let scaled_v = &v_tilde * DMatrix::from_diagonal(s);
        let delta = scaled_v.transpose() * &self.core * &scaled_v;
        let delta = (&delta + delta.transpose()) * 0.5;
        let eig = SymmetricEigen::new(delta);
        let phi = eig.eigenvalues;
        if let Some(bad) = phi.iter().find(|&&f| 1.0 + f < PD_TOL) {
            return Err(TrpError::NotPositiveDefinite(format!(
                "structured precision: eigenvalue of I + Delta is {:e}",
                1.0 + bad
            )));
        }
        let u1 = u_tilde * eig.eigenvectors;
        Ok(StructuredFactor { sp: self, u1, phi })
    }
}

/// Factorization `Lambda = L (I + U1 Phi U1^T) L^T`.
#[derive(Clone, Debug)]
pub struct StructuredFactor<'a> {
    sp: &'a StructuredPrecision,
    u1: DMatrix<f64>,
    phi: DVector<f64>,
}

impl StructuredFactor<'_> {
    pub fn u1(&self) -> &DMatrix<f64> {
        &self.u1
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    /// `L^{-T}(U1 (1+Phi)^{-1/2} xi1 + xi2 - U1 U1^T xi2)`; covariance `Lambda^{-1}`.
    pub fn sample(&self, xi1: &DVector<f64>, xi2: &DVector<f64>) -> Result<DVector<f64>> {
        let r = self.phi.len();
        if xi1.len() < r || xi2.len() != self.sp.dim() {
            return Err(TrpError::Dimension(format!(
                "noise lengths ({}, {}) do not match ({}, {})",
                xi1.len(),
                xi2.len(),
                self.sp.rank(),
                self.sp.dim()
            )));
        }
        let mut w = DVector::zeros(r);
        for i in 0..r {
            w[i] = xi1[i] / (1.0 + self.phi[i]).sqrt();
        }
        w -= self.u1.tr_mul(xi2);
        let v = &self.u1 * w + xi2;
        Ok(self.sp.base.solve_upper(&v))
    }

    /// `Lambda^{-1} b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let w = self.sp.base.solve_lower(b);
        let mut c = self.u1.tr_mul(&w);
        for i in 0..c.len() {
            c[i] *= 1.0 / (1.0 + self.phi[i]) - 1.0;
        }
        let w = w + &self.u1 * c;
        self.sp.base.solve_upper(&w)
    }
}

pub fn sample_structured_precision(
    sp: &StructuredPrecision,
    xi1: &DVector<f64>,
    xi2: &DVector<f64>,
) -> Result<DVector<f64>> {
    sp.factor()?.sample(xi1, xi2)
}

/// Row space of a full-row-rank `P x M` matrix, held as a thin SVD of its
/// transpose so both the pseudodeterminant and the kernel projection can
/// reuse one decomposition.
#[derive(Clone, Debug)]
pub struct RowSpace {
    b: DMatrix<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl RowSpace {
    pub fn new(b: &DMatrix<f64>) -> Result<Self> {
        let p = b.nrows();
        if p == 0 || b.ncols() < p {
            return Err(TrpError::Dimension(format!(
                "expected a wide matrix, got {}x{}",
                p,
                b.ncols()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(TrpError::InvalidInput("non-finite entry in B".into()));
        }
        let svd = SVD::new(b.transpose(), true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smax > 0.0) || smin < RANK_TOL * smax {
            return Err(TrpError::RankDeficient {
                context: "B".into(),
                ratio: if smax > 0.0 { smin / smax } else { 0.0 },
            });
        }
        Ok(RowSpace { b: b.clone(), svd })
    }

    pub fn log_singular_product(&self) -> f64 {
        self.svd.singular_values.iter().map(|s| s.ln()).sum()
    }

    pub fn pseudo_det_log(&self, omega_inv: &DVector<f64>) -> Result<f64> {
        let p = self.b.nrows();
        if omega_inv.len() != p {
            return Err(TrpError::Dimension(format!(
                "omega_inv has length {}, expected {p}",
                omega_inv.len()
            )));
        }
        if omega_inv.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(TrpError::InvalidInput(
                "omega_inv entries must be positive and finite".into(),
            ));
        }
        let root = omega_inv.map(f64::sqrt);
        let mut s = &self.b * self.b.transpose();
        for i in 0..p {
            for j in 0..p {
                s[(i, j)] *= root[i] * root[j];
            }
        }
        let chol = Cholesky::new(s).ok_or_else(|| {
            TrpError::NotPositiveDefinite("conjugated B B^T in pseudodeterminant".into())
        })?;
        Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// `v - B^T w` with `w` the least-squares coefficients of `v` on `B^T`.
    pub fn kernel_project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.b.ncols() {
            return Err(TrpError::Dimension(format!(
                "vector has length {}, expected {}",
                v.len(),
                self.b.ncols()
            )));
        }
        let w = self
            .svd
            .solve(v, 0.0)
            .map_err(|e| TrpError::Singular(e.to_string()))?;
        Ok(v - self.b.tr_mul(&w))
    }
}

/// `log |B^T Omega^{-1} B|^dagger` via the `P x P` conjugated form.
pub fn pseudo_det_log(b: &DMatrix<f64>, omega_inv: &DVector<f64>) -> Result<f64> {
    RowSpace::new(b)?.pseudo_det_log(omega_inv)
}

/// Orthogonal projection of `v` onto the kernel of `B`.
pub fn kernel_project(b: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    RowSpace::new(b)?.kernel_project(v)
}

/// Solves `M X = R` for symmetric PSD `M`: Cholesky first, then a
/// symmetric eigendecomposition under the rank rule.
pub fn solve_spd(m: &DMatrix<f64>, rhs: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        let x = chol.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    let emax = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let emin = eig.eigenvalues.min();
    if !(emax > 0.0) || emin <= RANK_TOL * emax {
        return Err(TrpError::Singular(format!(
            "{context}: eigenvalue ratio {:e}",
            if emax > 0.0 { emin / emax } else { 0.0 }
        )));
    }
    let q = &eig.eigenvectors;
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e));
    Ok(q * inv_diag * q.tr_mul(rhs))
}

pub fn solve_spd_vec(m: &DMatrix<f64>, rhs: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let r = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let x = solve_spd(m, &r, context)?;
    Ok(x.column(0).into_owned())
}

pub fn inverse_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    solve_spd(m, &DMatrix::identity(m.nrows(), m.ncols()), context)
}

/// Outcome of [`l1_quadratic_cd`].
#[derive(Clone, Debug)]
pub struct CdOutcome {
    pub x: DVector<f64>,
    pub sweeps: usize,
}

/// Cyclic coordinate descent for `min 1/2 x^T H x - c^T x + lambda ||x||_1`
/// with `H` symmetric PSD. Coordinates with a zero diagonal are set to zero.
pub fn l1_quadratic_cd(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    x0: &DVector<f64>,
    tol: f64,
    max_sweeps: usize,
    what: &str,
) -> Result<CdOutcome> {
    let n = c.len();
    let mut x = x0.clone();
    let mut hx = h * &x;
    for sweep in 1..=max_sweeps {
        let mut max_change = 0.0_f64;
        for j in 0..n {
            let hjj = h[(j, j)];
            let old = x[j];
            let new = if hjj > 0.0 {
                let r = c[j] - hx[j] + hjj * old;
                soft_threshold(r, lambda) / hjj
            } else {
                0.0
            };
            let d = new - old;
            if d != 0.0 {
                x[j] = new;
                hx.axpy(d, &h.column(j), 1.0);
                max_change = max_change.max(d.abs());
            }
        }
        if max_change < tol {
            return Ok(CdOutcome { x, sweeps: sweep });
        }
    }
    Err(TrpError::NonConvergence {
        what: what.to_string(),
        iterations: max_sweeps,
    })
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn power_iteration(m: &DMatrix<f64>, max_iter: usize, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64) * 1e-3);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..max_iter {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - est).abs() <= tol * next.abs() {
            return next;
        }
        est = next;
    }
    est
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, m);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn stack_vectors(parts: &[DVector<f64>]) -> DVector<f64> {
    let n: usize = parts.iter().map(|v| v.len()).sum();
    let mut out = DVector::zeros(n);
    let mut off = 0;
    for v in parts {
        out.rows_mut(off, v.len()).copy_from(v);
        off += v.len();
    }
    out
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
