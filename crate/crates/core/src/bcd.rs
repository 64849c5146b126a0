//! Block coordinate descent on the dual problem.
//!
//! Each sweep visits the columns in ascending order. Updating column `j`
//! solves the box-constrained QP
//!
//! ```text
//! ŷ = argmin { yᵀ W₁₁⁻¹ y : ‖y − S_j‖_∞ ≤ λ }
//! ```
//!
//! where `W₁₁` is `W` with row and column `j` removed. The QP is solved
//! through its lasso dual `min xᵀW₁₁x − S_jᵀx + λ‖x‖₁` by cyclic coordinate
//! descent, and the column is recovered as `ŷ = 2·W₁₁·x̂`. The precision
//! column is `−2·x̂·X_jj`, so the lasso zeros are exactly the zeros of the
//! estimate.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovselError, Result};
use crate::linalg;
use crate::model::{duality_gap, Estimate, Problem, SolverKind};

#[derive(Debug, Clone, Copy)]
pub struct BcdOptions {
    pub max_sweeps: usize,
    /// Inner stopping rule: largest coordinate change in a pass.
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    /// Sweeps between duality-gap evaluations.
    pub check_every: usize,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            qp_tol: 1e-10,
            qp_max_iter: 10_000,
            check_every: 1,
        }
    }
}

impl BcdOptions {
    pub fn qp(&self) -> QpOptions {
        QpOptions {
            tol: self.qp_tol,
            max_iter: self.qp_max_iter,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 || self.qp_max_iter == 0 || self.check_every == 0 || !(self.qp_tol > 0.0) {
            return Err(CovselError::Parameter("BCD options must all be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        BcdOptions::default().qp()
    }
}

/// Data of one column update.
#[derive(Debug, Clone)]
pub struct ColumnWorkspace {
    /// `W` without row and column `j`.
    pub minor: DMatrix<f64>,
    /// Column `j` of `S` without its diagonal entry; the box center.
    pub rhs: DVector<f64>,
    /// Box radius.
    pub lambda: f64,
}

impl ColumnWorkspace {
    pub fn new(w: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64, j: usize) -> Self {
        Self {
            minor: linalg::minor(w, j),
            rhs: linalg::column_without_diag(s, j),
            lambda,
        }
    }

    /// QP objective `yᵀ W₁₁⁻¹ y`.
    pub fn qp_value(&self, y: &DVector<f64>) -> Result<f64> {
        let chol = linalg::cholesky(&self.minor, "column minor")?;
        Ok(y.dot(&chol.solve(y)))
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub x: DVector<f64>,
    /// `Q·x`, kept in sync by the coordinate updates.
    pub qx: DVector<f64>,
    pub passes: usize,
}

/// Minimizes `xᵀQx − sᵀx + λ‖x‖₁` by cyclic coordinate descent.
pub fn lasso_dual_solve(q: &DMatrix<f64>, s: &DVector<f64>, lambda: f64, opts: &QpOptions) -> Result<DVector<f64>> {
    Ok(lasso_dual_solve_warm(q, s, lambda, opts, DVector::zeros(s.len()))?.x)
}

pub fn lasso_dual_solve_warm(
    q: &DMatrix<f64>,
    s: &DVector<f64>,
    lambda: f64,
    opts: &QpOptions,
    start: DVector<f64>,
) -> Result<LassoSolution> {
    let m = s.len();
    if q.nrows() != m || q.ncols() != m || start.len() != m {
        return Err(CovselError::Dimension(format!(
            "lasso: Q is {}x{}, s has {m} entries, start has {}",
            q.nrows(),
            q.ncols(),
            start.len()
        )));
    }
    let mut x = start;
    for i in 0..m {
        if !(q[(i, i)] > 0.0) {
            x[i] = 0.0;
        }
    }
    let mut qx = q * &x;
    let mut change = f64::INFINITY;
    for pass in 1..=opts.max_iter {
        change = 0.0;
        for i in 0..m {
            let qii = q[(i, i)];
            if !(qii > 0.0) {
                continue;
            }
            let rest = qx[i] - qii * x[i];
            let updated = linalg::soft_threshold(s[i] - 2.0 * rest, lambda) / (2.0 * qii);
            let delta = updated - x[i];
            if delta != 0.0 {
                qx.axpy(delta, &q.column(i), 1.0);
                x[i] = updated;
                change = change.max(delta.abs());
            }
        }
        if change <= opts.tol {
            // Re-sync Q·x to drop accumulated drift.
            qx = q * &x;
            return Ok(LassoSolution { x, qx, passes: pass });
        }
    }
    Err(CovselError::InnerConvergence {
        iterations: opts.max_iter,
        change,
    })
}

/// Maps a lasso solution back to the QP column: `ŷ = 2·Q·x̂`, snapped to
/// the box face selected by the sign of each nonzero coordinate.
pub fn recover_column(qx: &DVector<f64>, x: &DVector<f64>, s: &DVector<f64>, lambda: f64) -> DVector<f64> {
    DVector::from_iterator(
        s.len(),
        (0..s.len()).map(|i| {
            if x[i] > 0.0 {
                s[i] - lambda
            } else if x[i] < 0.0 {
                s[i] + lambda
            } else {
                (2.0 * qx[i]).clamp(s[i] - lambda, s[i] + lambda)
            }
        }),
    )
}

/// Solves the column QP and returns `ŷ`.
pub fn column_qp(ws: &ColumnWorkspace, opts: &QpOptions) -> Result<DVector<f64>> {
    let sol = lasso_dual_solve_warm(&ws.minor, &ws.rhs, ws.lambda, opts, DVector::zeros(ws.rhs.len()))?;
    Ok(recover_column(&sol.qx, &sol.x, &ws.rhs, ws.lambda))
}

/// Mutable BCD state for one problem.
#[derive(Debug, Clone)]
pub struct BcdSolver<'a> {
    prob: &'a Problem,
    opts: BcdOptions,
    w: DMatrix<f64>,
    diag: DVector<f64>,
    coef: Vec<DVector<f64>>,
    /// Whether the lasso that last wrote `W_ij` selected the pair.
    active: DMatrix<bool>,
    sweeps: usize,
    column_updates: usize,
}

impl<'a> BcdSolver<'a> {
    /// Starts from `W⁰ = S + λI` (or `S` with the override diagonal).
    pub fn new(prob: &'a Problem, opts: BcdOptions) -> Result<Self> {
        let w = prob.initial_dual();
        Self::from_dual(prob, opts, w, None)
    }

    /// Starts from a previous solution, e.g. the previous point of a
    /// regularization path. The off-diagonal entries are clipped into the
    /// current box and the diagonal reset to the fixed values.
    pub fn warm_start(
        prob: &'a Problem,
        opts: BcdOptions,
        w0: &DMatrix<f64>,
        coef: Option<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        let p = prob.p();
        if w0.shape() != (p, p) {
            return Err(CovselError::Dimension("warm start has the wrong shape".into()));
        }
        let s = prob.s();
        let lambda = prob.lambda();
        let mut w = linalg::symmetrize(w0);
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    w[(i, j)] = w[(i, j)].clamp(s[(i, j)] - lambda, s[(i, j)] + lambda);
                }
            }
        }
        let diag = prob.dual_diagonal();
        for k in 0..p {
            w[(k, k)] = diag[k];
        }
        if !linalg::is_positive_definite(&w) {
            log::debug!("warm start is not positive definite; falling back to the cold start");
            return Self::new(prob, opts);
        }
        Self::from_dual(prob, opts, w, coef)
    }

    fn from_dual(
        prob: &'a Problem,
        opts: BcdOptions,
        w: DMatrix<f64>,
        coef: Option<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        opts.validate()?;
        let p = prob.p();
        let diag = prob.dual_diagonal();
        let coef = match coef {
            Some(c) if c.len() == p && c.iter().all(|v| v.len() + 1 == p) => c,
            _ => vec![DVector::zeros(p.saturating_sub(1)); p],
        };
        if !linalg::is_positive_definite(&w) {
            return Err(CovselError::Domain(
                "initial dual point is not positive definite".into(),
            ));
        }
        Ok(Self {
            prob,
            opts,
            w,
            diag,
            coef,
            active: DMatrix::from_element(p, p, true),
            sweeps: 0,
            column_updates: 0,
        })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn coefficients(&self) -> &[DVector<f64>] {
        &self.coef
    }

    /// Replaces column and row `j` of `W` by the QP solution.
    pub fn update_column(&mut self, j: usize) -> Result<()> {
        let p = self.prob.p();
        if p < 2 {
            return Ok(());
        }
        let lambda = self.prob.lambda();
        let ws = ColumnWorkspace::new(&self.w, self.prob.s(), lambda, j);
        let start = self.coef[j].clone();
        let sol = lasso_dual_solve_warm(&ws.minor, &ws.rhs, lambda, &self.opts.qp(), start)?;
        let y = recover_column(&sol.qx, &sol.x, &ws.rhs, lambda);

        // The new Schur complement d_j − yᵀW₁₁⁻¹y must stay positive. Checked
        // with a fresh factorization in debug builds and once per sweep
        // otherwise.
        if cfg!(debug_assertions) || j == 0 {
            let beta = linalg::cholesky(&ws.minor, "column minor")?.solve(&y);
            let schur = self.diag[j] - y.dot(&beta);
            if !(schur > 0.0) {
                return Err(CovselError::Numeric(format!(
                    "column {j} update lost positive definiteness (Schur complement {schur:.3e})"
                )));
            }
        }

        for (k, i) in (0..p).filter(|&i| i != j).enumerate() {
            self.w[(i, j)] = y[k];
            self.w[(j, i)] = y[k];
            let selected = sol.x[k] != 0.0;
            self.active[(i, j)] = selected;
            self.active[(j, i)] = selected;
        }
        self.coef[j] = sol.x;
        self.column_updates += 1;
        Ok(())
    }

    pub fn sweep(&mut self) -> Result<()> {
        for j in 0..self.prob.p() {
            self.update_column(j)?;
        }
        self.sweeps += 1;
        Ok(())
    }

    pub fn gap(&self) -> Result<f64> {
        duality_gap(&self.w, self.prob)
    }

    /// Current iterate as an estimate. `X = W⁻¹` with the pairs the last
    /// column lasso left unselected set to exactly zero.
    pub fn estimate(&self, gap: f64) -> Result<Estimate> {
        let mut x = linalg::inverse_spd(&self.w, "W")?;
        let p = self.prob.p();
        for j in 0..p {
            for i in 0..p {
                if i != j && !self.active[(i, j)] {
                    x[(i, j)] = 0.0;
                }
            }
        }
        Ok(Estimate {
            w: self.w.clone(),
            x,
            gap,
            iterations: self.sweeps,
            solver: SolverKind::Bcd,
        })
    }

    /// Sweeps until the duality gap drops to `ε` or the sweep budget runs out.
    pub fn run(&mut self) -> Result<Estimate> {
        let mut gap = self.gap()?;
        if self.prob.p() < 2 {
            return self.estimate(gap);
        }
        while self.sweeps < self.opts.max_sweeps {
            self.sweep()?;
            if self.sweeps.is_multiple_of(self.opts.check_every) || self.sweeps == self.opts.max_sweeps {
                gap = self.gap()?;
                log::trace!("bcd sweep {} gap {gap:.3e}", self.sweeps);
                if gap <= self.prob.epsilon() {
                    return self.estimate(gap);
                }
            }
        }
        let estimate = self.estimate(gap)?;
        Err(CovselError::Convergence {
            estimate: Box::new(estimate),
            gap,
            iterations: self.sweeps,
        })
    }
}

/// Solves the problem by block coordinate descent from `W⁰ = S + λI`.
pub fn solve_bcd(prob: &Problem, opts: &BcdOptions) -> Result<Estimate> {
    BcdSolver::new(prob, *opts)?.run()
}
