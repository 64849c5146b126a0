//! Approximate sparse maximum likelihood for ±1 data.
//!
//! Replacing the log partition function by its log-determinant upper bound
//! turns the binary problem into the Gaussian dual with the diagonal fixed
//! at `S_kk + 1/3`. The pairwise parameters are read off the inverse of the
//! solution and the linear ones are the sample means.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovselError, Result};
use crate::linalg;
use crate::model::{DataKind, Estimate, Problem, SampleMatrix, SecondMoment, SolverKind};
use crate::solver::Solver;

/// Extra diagonal mass added to the binary second moment.
pub const BINARY_DIAGONAL_SHIFT: f64 = 1.0 / 3.0;

/// Largest `p` accepted by the exact enumeration.
pub const MAX_ENUMERATION_P: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub theta_linear: DVector<f64>,
    /// Symmetric, zero diagonal.
    pub theta_pair: DMatrix<f64>,
}

impl LogisticParams {
    pub fn new(theta_linear: DVector<f64>, theta_pair: DMatrix<f64>) -> Result<Self> {
        let p = theta_linear.len();
        if theta_pair.shape() != (p, p) {
            return Err(CovselError::Dimension(format!(
                "pair parameters are {}x{}, expected {p}x{p}",
                theta_pair.nrows(),
                theta_pair.ncols()
            )));
        }
        for i in 0..p {
            if theta_pair[(i, i)] != 0.0 {
                return Err(CovselError::Parameter(
                    "pair parameters must have a zero diagonal".into(),
                ));
            }
            for j in 0..i {
                if theta_pair[(i, j)] != theta_pair[(j, i)] {
                    return Err(CovselError::Parameter("pair parameters must be symmetric".into()));
                }
            }
        }
        Ok(Self {
            theta_linear,
            theta_pair,
        })
    }

    pub fn p(&self) -> usize {
        self.theta_linear.len()
    }

    /// The `(p+1)×(p+1)` matrix with zero diagonal, `θᵢ` in the first row
    /// and column, and `θᵢⱼ` in the remaining block.
    pub fn assemble(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut r = DMatrix::zeros(p + 1, p + 1);
        for i in 0..p {
            r[(0, i + 1)] = self.theta_linear[i];
            r[(i + 1, 0)] = self.theta_linear[i];
            for j in 0..p {
                if i != j {
                    r[(i + 1, j + 1)] = self.theta_pair[(i, j)];
                }
            }
        }
        r
    }

    /// `Σᵢ θᵢxᵢ + Σ_{i<j} θᵢⱼxᵢxⱼ`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let p = self.p();
        let mut e = 0.0;
        for i in 0..p {
            e += self.theta_linear[i] * x[i];
            for j in (i + 1)..p {
                e += self.theta_pair[(i, j)] * x[i] * x[j];
            }
        }
        e
    }
}

#[derive(Debug, Clone)]
pub struct BinaryEstimate {
    /// Dual solution `Γ̂`.
    pub gamma: DMatrix<f64>,
    /// `Γ̂⁻¹` as returned by the solver.
    pub precision: DMatrix<f64>,
    pub params: LogisticParams,
    pub mu_bar: DVector<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub solver: SolverKind,
}

impl BinaryEstimate {
    pub fn from_estimate(est: Estimate, mu_bar: DVector<f64>) -> Result<Self> {
        let p = est.x.nrows();
        let mut pair = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    pair[(i, j)] = -0.5 * (est.x[(i, j)] + est.x[(j, i)]);
                }
            }
        }
        let params = LogisticParams::new(mu_bar.clone(), pair)?;
        Ok(Self {
            gamma: est.w,
            precision: est.x,
            params,
            mu_bar,
            gap: est.gap,
            iterations: est.iterations,
            solver: est.solver,
        })
    }

    /// The underlying Gaussian-form estimate.
    pub fn as_estimate(&self) -> Estimate {
        Estimate {
            w: self.gamma.clone(),
            x: self.precision.clone(),
            gap: self.gap,
            iterations: self.iterations,
            solver: self.solver,
        }
    }
}

/// Replaces 0 by −1 when every entry is 0 or 1. Returns whether a remap
/// happened.
pub fn remap_zero_one(data: &mut DMatrix<f64>) -> bool {
    let zero_one = data.iter().all(|&v| v == 0.0 || v == 1.0);
    let has_zero = data.iter().any(|&v| v == 0.0);
    if zero_one && has_zero {
        data.apply(|v| *v = 2.0 * *v - 1.0);
        log::warn!("binary data coded as 0/1 was remapped to -1/+1");
        true
    } else {
        false
    }
}

/// The modified dual problem: second moment of the ±1 data with the dual
/// diagonal fixed at `S_kk + 1/3`.
pub fn binary_problem(samples: &SampleMatrix, lambda: f64, epsilon: f64) -> Result<Problem> {
    if samples.kind() != DataKind::Binary {
        return Err(CovselError::Data("binary estimation needs data of kind binary".into()));
    }
    let moment = SecondMoment::from_samples(samples)?;
    if let Some(column) = moment.sigma_hat().iter().position(|s| !(*s > 0.0)) {
        return Err(CovselError::DegenerateVariance { column });
    }
    let diag = moment.s().diagonal().add_scalar(BINARY_DIAGONAL_SHIFT);
    Problem::new(moment, lambda, epsilon)?.with_diag_override(diag)
}

pub fn solve_binary(samples: &SampleMatrix, lambda: f64, epsilon: f64, solver: &Solver) -> Result<BinaryEstimate> {
    let prob = binary_problem(samples, lambda, epsilon)?;
    let est = solver.solve(&prob)?;
    BinaryEstimate::from_estimate(est, prob.moment().mu_bar().clone())
}

/// `A(θ) = log Σ_{x ∈ {−1,+1}^p} exp(energy(x))` by enumeration.
pub fn exact_log_partition(params: &LogisticParams) -> Result<f64> {
    let p = params.p();
    if p > MAX_ENUMERATION_P {
        return Err(CovselError::Size(format!(
            "exact log partition enumerates 2^p states; p = {p} exceeds {MAX_ENUMERATION_P}"
        )));
    }
    let mut x = vec![0.0; p];
    let energies: Vec<f64> = (0u64..1 << p)
        .map(|mask| {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            }
            params.energy(&x)
        })
        .collect();
    let top = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(top + energies.iter().map(|e| (e - top).exp()).sum::<f64>().ln())
}

/// Log-determinant upper bound on the log partition function,
///
/// ```text
/// B(θ) = (p/2)·log(eπ/2) − (p+1)/2 − ½·max_ν { νᵀm + log det(−(R(θ) + diag ν)) }
/// ```
///
/// with `m = (1, 4/3, …, 4/3)`. The inner concave maximization is solved by
/// damped Newton.
pub fn relaxed_log_partition_bound(params: &LogisticParams) -> Result<f64> {
    let p = params.p();
    let r = params.assemble();
    let dim = p + 1;
    let m = DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 4.0 / 3.0 });
    let value = |nu: &DVector<f64>| -> Option<f64> {
        let y = -(&r + DMatrix::from_diagonal(nu));
        linalg::log_det_spd(&y, "Y").ok().map(|ld| nu.dot(&m) + ld)
    };

    let mut nu = DVector::from_element(dim, -(linalg::spectral_norm(&r) + 1.0));
    let mut current = value(&nu).ok_or_else(|| CovselError::Numeric("initial point is infeasible".into()))?;
    let mut converged = false;
    for _ in 0..500 {
        let y = -(&r + DMatrix::from_diagonal(&nu));
        let yinv = linalg::inverse_spd(&y, "Y")?;
        let grad = &m - yinv.diagonal();
        let hess = yinv.component_mul(&yinv);
        let dir = linalg::cholesky(&hess, "Hessian")
            .map_err(|_| CovselError::Numeric("bound Hessian is singular".into()))?
            .solve(&grad);
        let decrement = grad.dot(&dir);
        // Half the decrement bounds the remaining suboptimality.
        if decrement <= 1e-14 {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-20 {
            let cand = &nu + &dir * t;
            if let Some(v) = value(&cand) {
                if v >= current + 0.25 * t * decrement {
                    nu = cand;
                    current = v;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent left at working precision.
            converged = decrement < 1e-10;
            break;
        }
    }
    if !converged {
        return Err(CovselError::Numeric(
            "log partition bound maximization did not converge".into(),
        ));
    }
    let pf = p as f64;
    Ok(pf / 2.0 * (std::f64::consts::E * std::f64::consts::PI / 2.0).ln() - (pf + 1.0) / 2.0 - 0.5 * current)
}
