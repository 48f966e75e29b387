//! Datasets, transfer problems and the transfer matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TrpError};
use crate::linalg::{self, l1_quadratic_cd, solve_spd, solve_spd_vec};

/// One regression dataset with its sufficient statistics cached.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(TrpError::InvalidInput(format!(
                "design must be nonempty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.nrows() != y.len() {
            return Err(TrpError::Dimension(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(TrpError::InvalidInput("non-finite entry in dataset".into()));
        }
        let gram = x.tr_mul(&x);
        let gram = (&gram + gram.transpose()) * 0.5;
        let xty = x.tr_mul(&y);
        Ok(Dataset { x, y, gram, xty })
    }

    /// Same design, new response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.x.nrows() {
            return Err(TrpError::Dimension(format!(
                "response has {} entries, design has {} rows",
                y.len(),
                self.x.nrows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TrpError::InvalidInput("non-finite response".into()));
        }
        let xty = self.x.tr_mul(&y);
        Ok(Dataset {
            x: self.x.clone(),
            y,
            gram: self.gram.clone(),
            xty,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn residual_sq(&self, beta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * beta).norm_squared()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(TrpError::Dimension(format!(
                "row {r} out of range for {} rows",
                self.n()
            )));
        }
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r]));
        Dataset::new(x, y)
    }

    /// Row-wise concatenation.
    pub fn concat<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Dataset>,
    {
        let parts: Vec<&Dataset> = parts.into_iter().collect();
        let first = parts
            .first()
            .ok_or_else(|| TrpError::InvalidInput("nothing to concatenate".into()))?;
        let p = first.p();
        if parts.iter().any(|d| d.p() != p) {
            return Err(TrpError::Dimension("column counts differ".into()));
        }
        let n: usize = parts.iter().map(|d| d.n()).sum();
        let mut x = DMatrix::zeros(n, p);
        let mut y = DVector::zeros(n);
        let mut off = 0;
        for d in parts {
            x.view_mut((off, 0), (d.n(), p)).copy_from(&d.x);
            y.rows_mut(off, d.n()).copy_from(&d.y);
            off += d.n();
        }
        Dataset::new(x, y)
    }
}

/// A target dataset plus `K >= 1` ordered sources sharing `P` columns.
#[derive(Clone, Debug)]
pub struct TransferProblem {
    target: Dataset,
    sources: Vec<Dataset>,
}

impl TransferProblem {
    pub fn new(target: Dataset, sources: Vec<Dataset>) -> Result<Self> {
        if sources.is_empty() {
            return Err(TrpError::InvalidInput(
                "at least one source dataset is required".into(),
            ));
        }
        let p = target.p();
        for (k, s) in sources.iter().enumerate() {
            if s.p() != p {
                return Err(TrpError::Dimension(format!(
                    "source {} has {} columns, target has {p}",
                    k + 1,
                    s.p()
                )));
            }
        }
        Ok(TransferProblem { target, sources })
    }

    pub fn target(&self) -> &Dataset {
        &self.target
    }

    pub fn sources(&self) -> &[Dataset] {
        &self.sources
    }

    /// Dataset `k`, with `0` the target.
    pub fn dataset(&self, k: usize) -> &Dataset {
        if k == 0 {
            &self.target
        } else {
            &self.sources[k - 1]
        }
    }

    pub fn datasets(&self) -> impl Iterator<Item = &Dataset> {
        std::iter::once(&self.target).chain(self.sources.iter())
    }

    pub fn p(&self) -> usize {
        self.target.p()
    }

    pub fn k(&self) -> usize {
        self.sources.len()
    }

    /// Total number of observations over all datasets.
    pub fn n_total(&self) -> usize {
        self.datasets().map(Dataset::n).sum()
    }

    pub fn with_target(&self, target: Dataset) -> Result<Self> {
        TransferProblem::new(target, self.sources.clone())
    }

    /// Replaces every response, keeping the designs.
    pub fn with_responses(&self, ys: &[DVector<f64>]) -> Result<Self> {
        if ys.len() != self.k() + 1 {
            return Err(TrpError::Dimension(
                "one response per dataset required".into(),
            ));
        }
        let target = self.target.with_response(ys[0].clone())?;
        let sources = self
            .sources
            .iter()
            .zip(&ys[1..])
            .map(|(d, y)| d.with_response(y.clone()))
            .collect::<Result<Vec<_>>>()?;
        TransferProblem::new(target, sources)
    }

    /// `X_A^T y_A`, stacked over datasets.
    pub fn stacked_xty(&self) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = self.datasets().map(|d| d.xty().clone()).collect();
        linalg::stack_vectors(&parts)
    }

    /// `sum_k ||y_k - X_k beta_k||^2`.
    pub fn residual_sq(&self, beta_a: &DVector<f64>) -> f64 {
        let p = self.p();
        self.datasets()
            .enumerate()
            .map(|(k, d)| d.residual_sq(&beta_a.rows(k * p, p).into_owned()))
            .sum()
    }

    fn check_eta(&self, eta: &[bool]) -> Result<()> {
        if eta.len() != self.k() {
            return Err(TrpError::Dimension(format!(
                "eta has length {}, expected K = {}",
                eta.len(),
                self.k()
            )));
        }
        Ok(())
    }
}

/// `T = (sum eta_k G_k + tau I)^{-1} [eta_1 G_1 ... eta_K G_K]` and `B = [I | -T]`.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub t: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub eta: Vec<bool>,
    pub tau: f64,
}

impl TransferMatrix {
    pub fn p(&self) -> usize {
        self.t.nrows()
    }

    /// `B beta_A = beta_0 - T beta_S`.
    pub fn apply_b(&self, beta_a: &DVector<f64>) -> DVector<f64> {
        let p = self.p();
        let beta0 = beta_a.rows(0, p);
        let beta_s = beta_a.rows(p, beta_a.len() - p);
        beta0 - &self.t * beta_s
    }

    pub fn apply_t(&self, beta_s: &DVector<f64>) -> DVector<f64> {
        &self.t * beta_s
    }
}

pub fn build_transfer_matrix(
    problem: &TransferProblem,
    eta: &[bool],
    tau: f64,
) -> Result<TransferMatrix> {
    problem.check_eta(eta)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(TrpError::InvalidInput(format!(
            "tau must be nonnegative, got {tau}"
        )));
    }
    let (p, k) = (problem.p(), problem.k());
    let mut t = DMatrix::zeros(p, k * p);
    if eta.iter().any(|&e| e) {
        let mut m = DMatrix::identity(p, p) * tau;
        let mut rhs = DMatrix::zeros(p, k * p);
        for (j, s) in problem.sources().iter().enumerate() {
            if eta[j] {
                m += s.gram();
                rhs.view_mut((0, j * p), (p, p)).copy_from(s.gram());
            }
        }
        t = solve_spd(
            &m,
            &rhs,
            if tau > 0.0 {
                "sum of included source Grams plus tau I"
            } else {
                "sum of included source Grams (tau = 0)"
            },
        )?;
    }
    let mut b = DMatrix::zeros(p, (k + 1) * p);
    b.view_mut((0, 0), (p, p)).fill_with_identity();
    b.view_mut((0, p), (p, k * p)).copy_from(&(-&t));
    Ok(TransferMatrix {
        t,
        b,
        eta: eta.to_vec(),
        tau,
    })
}

/// Minimizer of `sum_k eta_k (beta_k - b)^T G_k (beta_k - b) / 2 + tau ||b||_1`.
pub fn transfer_operator_l1(
    problem: &TransferProblem,
    beta_s: &DVector<f64>,
    eta: &[bool],
    tau: f64,
) -> Result<DVector<f64>> {
    problem.check_eta(eta)?;
    let (p, k) = (problem.p(), problem.k());
    if beta_s.len() != k * p {
        return Err(TrpError::Dimension(format!(
            "beta_S has length {}, expected {}",
            beta_s.len(),
            k * p
        )));
    }
    if !(tau > 0.0) {
        return Err(TrpError::InvalidInput(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let mut h = DMatrix::zeros(p, p);
    let mut c = DVector::zeros(p);
    for (j, s) in problem.sources().iter().enumerate() {
        if eta[j] {
            h += s.gram();
            c += s.gram() * beta_s.rows(j * p, p);
        }
    }
    let out = l1_quadratic_cd(
        &h,
        &c,
        tau,
        &DVector::zeros(p),
        1e-10,
        100_000,
        "l1 transfer operator",
    )?;
    Ok(out.x)
}

/// `T^dagger = stack(G_k) (sum G_k^2)^{-1} (sum G_k)` for the `tau = 0`, all-included matrix.
pub fn transfer_pseudoinverse(problem: &TransferProblem) -> Result<DMatrix<f64>> {
    let (p, k) = (problem.p(), problem.k());
    let mut sum_sq = DMatrix::zeros(p, p);
    let mut sum = DMatrix::zeros(p, p);
    for s in problem.sources() {
        sum_sq += s.gram() * s.gram();
        sum += s.gram();
    }
    let right = solve_spd(&sum_sq, &sum, "sum of squared source Grams")?;
    let mut out = DMatrix::zeros(k * p, p);
    for (j, s) in problem.sources().iter().enumerate() {
        out.view_mut((j * p, 0), (p, p))
            .copy_from(&(s.gram() * &right));
    }
    Ok(out)
}

pub fn per_source_ols(problem: &TransferProblem) -> Result<DVector<f64>> {
    let parts = problem
        .sources()
        .iter()
        .enumerate()
        .map(|(j, s)| solve_spd_vec(s.gram(), s.xty(), &format!("Gram of source {}", j + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(linalg::stack_vectors(&parts))
}

/// `T` (with `tau = 0`, all sources) applied to the stacked per-source OLS fits.
pub fn pooled_minimizer_via_t(problem: &TransferProblem) -> Result<DVector<f64>> {
    let beta_s = per_source_ols(problem)?;
    let tm = build_transfer_matrix(problem, &vec![true; problem.k()], 0.0)?;
    Ok(tm.apply_t(&beta_s))
}

/// `(sum G_k)^{-1} sum X_k^T y_k` over the sources.
pub fn pooled_minimizer_direct(problem: &TransferProblem) -> Result<DVector<f64>> {
    let p = problem.p();
    let mut g = DMatrix::zeros(p, p);
    let mut c = DVector::zeros(p);
    for s in problem.sources() {
        g += s.gram();
        c += s.xty();
    }
    solve_spd_vec(&g, &c, "sum of source Grams")
}
