//! Problem data, objectives and optimality certificates.
//!
//! The estimator maximizes `log det X − trace(S·X) − λ‖X‖₁` over positive
//! definite `X`; its dual maximizes `log det W` over the box
//! `‖W − S‖_∞ ≤ λ`, and the two are linked by `X = W⁻¹` at the optimum.
//! The dual diagonal is pinned to `S_kk + λ`, or to an explicit override
//! (the binary reduction fixes it at `S_kk + 1/3`).
//!
//! All matrix inputs are symmetrized on entry.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CovselError, Result};
use crate::linalg;

/// Relative tolerance on negative eigenvalues of `S` that are clamped to zero.
pub const PSD_CLAMP_REL: f64 = 1e-10;

/// Relative widening applied when the eigenvalue bounds coincide.
pub const BOUNDS_WIDEN_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Gaussian,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Bcd,
    Nesterov,
    Analytic,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Bcd => "bcd",
            SolverKind::Nesterov => "nesterov",
            SolverKind::Analytic => "analytic",
        })
    }
}

/// Raw observations: `n` rows (samples) by `p` columns (variables).
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    data: DMatrix<f64>,
    kind: DataKind,
    names: Option<Vec<String>>,
}

impl SampleMatrix {
    pub fn new(data: DMatrix<f64>, kind: DataKind) -> Result<Self> {
        let (n, p) = data.shape();
        if n < 2 {
            return Err(CovselError::Dimension(format!("need at least 2 samples, got {n}")));
        }
        if p < 1 {
            return Err(CovselError::Dimension("need at least one variable".into()));
        }
        for j in 0..p {
            for i in 0..n {
                let v = data[(i, j)];
                if !v.is_finite() {
                    return Err(CovselError::Data(format!("non-finite value at row {i}, column {j}")));
                }
                if kind == DataKind::Binary && v != 1.0 && v != -1.0 {
                    return Err(CovselError::Data(format!(
                        "binary data must be ±1, found {v} at row {i}, column {j}"
                    )));
                }
            }
        }
        Ok(Self {
            data,
            kind,
            names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(CovselError::Dimension(format!(
                "{} variable names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn kind(&self) -> DataKind {
        self.kind
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }
}

/// Second moment about the mean, `S = (1/n)·Σ (y−μ̄)(y−μ̄)ᵀ`.
#[derive(Debug, Clone)]
pub struct SecondMoment {
    s: DMatrix<f64>,
    n: usize,
    sigma_hat: DVector<f64>,
    mu_bar: DVector<f64>,
}

impl SecondMoment {
    /// Builds `S` from samples. Identical to [`second_moment`].
    pub fn from_samples(samples: &SampleMatrix) -> Result<Self> {
        let data = samples.data();
        let (n, p) = data.shape();
        if n < 2 {
            return Err(CovselError::Dimension(format!("need at least 2 samples, got {n}")));
        }
        let mu_bar = DVector::from_iterator(p, (0..p).map(|j| data.column(j).mean()));
        let mut centered = data.clone();
        for j in 0..p {
            let m = mu_bar[j];
            centered.column_mut(j).add_scalar_mut(-m);
        }
        let s = (centered.transpose() * &centered) / n as f64;
        Self::assemble(s, n, mu_bar)
    }

    /// Wraps a precomputed second-moment matrix. The mean is unknown and
    /// recorded as zero.
    pub fn from_matrix(s: DMatrix<f64>, n: usize) -> Result<Self> {
        let p = linalg::check_square(&s, "second moment")?;
        if p < 1 {
            return Err(CovselError::Dimension("empty second moment".into()));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(CovselError::Data("second moment has non-finite entries".into()));
        }
        Self::assemble(s, n, DVector::zeros(p))
    }

    fn assemble(s: DMatrix<f64>, n: usize, mu_bar: DVector<f64>) -> Result<Self> {
        let mut s = linalg::symmetrize(&s);
        let (vals, vecs) = linalg::sym_eigen(&s);
        let norm = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let smallest = vals[0];
        if smallest < -PSD_CLAMP_REL * norm {
            return Err(CovselError::Data(format!(
                "second moment is not positive semidefinite (smallest eigenvalue {smallest:.3e})"
            )));
        }
        if smallest < 0.0 {
            let clamped = vals.map(|v| v.max(0.0));
            s = linalg::from_eigen(&vecs, &clamped);
        }
        let sigma_hat = DVector::from_iterator(s.nrows(), (0..s.nrows()).map(|i| s[(i, i)].max(0.0).sqrt()));
        Ok(Self {
            s,
            n,
            sigma_hat,
            mu_bar,
        })
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn p(&self) -> usize {
        self.s.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_hat(&self) -> &DVector<f64> {
        &self.sigma_hat
    }

    pub fn mu_bar(&self) -> &DVector<f64> {
        &self.mu_bar
    }
}

/// Second moment of a sample matrix about its column means.
pub fn second_moment(samples: &SampleMatrix) -> Result<SecondMoment> {
    SecondMoment::from_samples(samples)
}

/// One penalized estimation instance.
#[derive(Debug, Clone)]
pub struct Problem {
    moment: SecondMoment,
    lambda: f64,
    epsilon: f64,
    diag_override: Option<DVector<f64>>,
}

impl Problem {
    pub fn new(moment: SecondMoment, lambda: f64, epsilon: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("epsilon", epsilon)?;
        Ok(Self {
            moment,
            lambda,
            epsilon,
            diag_override: None,
        })
    }

    /// Fixes the dual diagonal at `diag` instead of `S_kk + λ`.
    pub fn with_diag_override(mut self, diag: DVector<f64>) -> Result<Self> {
        let p = self.p();
        if diag.len() != p {
            return Err(CovselError::Dimension(format!(
                "diagonal override has {} entries for p = {p}",
                diag.len()
            )));
        }
        for k in 0..p {
            let d = diag[k];
            if !(d > 0.0) || !(d >= self.moment.s[(k, k)]) {
                return Err(CovselError::Parameter(format!(
                    "diagonal override {d} at {k} must be positive and at least S_kk = {}",
                    self.moment.s[(k, k)]
                )));
            }
        }
        self.diag_override = Some(diag);
        Ok(self)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self { lambda, ..self.clone() })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    pub fn moment(&self) -> &SecondMoment {
        &self.moment
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.moment.s
    }

    pub fn p(&self) -> usize {
        self.moment.p()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn diag_override(&self) -> Option<&DVector<f64>> {
        self.diag_override.as_ref()
    }

    /// The fixed diagonal of every dual-feasible `W`.
    pub fn dual_diagonal(&self) -> DVector<f64> {
        match &self.diag_override {
            Some(d) => d.clone(),
            None => DVector::from_iterator(self.p(), (0..self.p()).map(|k| self.moment.s[(k, k)] + self.lambda)),
        }
    }

    /// `S` with its diagonal replaced by the dual diagonal.
    pub(crate) fn shifted_moment(&self) -> DMatrix<f64> {
        let mut out = self.moment.s.clone();
        let d = self.dual_diagonal();
        for k in 0..self.p() {
            out[(k, k)] = d[k];
        }
        out
    }

    /// The dual starting point `W⁰`: `S` with the fixed diagonal.
    pub fn initial_dual(&self) -> DMatrix<f64> {
        self.shifted_moment()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(CovselError::Parameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// A solved instance: dual `W` (covariance estimate) and primal `X`
/// (precision estimate) with the duality gap that certifies them.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub w: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub solver: SolverKind,
}

/// `log det X − trace(S̃·X) − λ·Σ_{i≠j}|X_ij|`, where `S̃` carries the dual
/// diagonal. Without an override this equals `log det X − trace(S·X) − λ‖X‖₁`
/// because the diagonal of a positive definite `X` is positive.
pub fn primal_objective(x: &DMatrix<f64>, prob: &Problem) -> Result<f64> {
    check_dims(x, prob)?;
    let x = linalg::symmetrize(x);
    let logdet = linalg::log_det_spd(&x, "X")?;
    match prob.diag_override() {
        None => Ok(logdet - trace_product(prob.s(), &x) - prob.lambda() * linalg::l1_norm(&x)),
        Some(_) => {
            let shifted = prob.shifted_moment();
            Ok(logdet - trace_product(&shifted, &x) - prob.lambda() * off_diagonal_l1(&x))
        }
    }
}

/// `log det W`.
pub fn dual_objective(w: &DMatrix<f64>) -> Result<f64> {
    linalg::check_square(w, "W")?;
    linalg::log_det_spd(&linalg::symmetrize(w), "W")
}

/// `trace(W⁻¹S) − p + λ‖W⁻¹‖₁`, generalized to a fixed dual diagonal as
/// `trace(W⁻¹S̃) − p + λ·Σ_{i≠j}|(W⁻¹)_ij|`.
pub fn duality_gap(w: &DMatrix<f64>, prob: &Problem) -> Result<f64> {
    check_dims(w, prob)?;
    let x = linalg::inverse_spd(&linalg::symmetrize(w), "W")?;
    Ok(gap_from_inverse(&x, prob))
}

pub(crate) fn gap_from_inverse(x: &DMatrix<f64>, prob: &Problem) -> f64 {
    let p = prob.p() as f64;
    match prob.diag_override() {
        None => trace_product(prob.s(), x) - p + prob.lambda() * linalg::l1_norm(x),
        Some(_) => trace_product(&prob.shifted_moment(), x) - p + prob.lambda() * off_diagonal_l1(x),
    }
}

/// Largest violation of the primal optimality conditions
/// `0 ∈ −X⁻¹ + S + λ·∂‖X‖₁`, with the diagonal condition expressed through
/// the dual diagonal.
pub fn kkt_residual(x: &DMatrix<f64>, prob: &Problem) -> Result<f64> {
    check_dims(x, prob)?;
    let x = linalg::symmetrize(x);
    let inv = linalg::inverse_spd(&x, "X")?;
    let s = prob.s();
    let lambda = prob.lambda();
    let diag = prob.dual_diagonal();
    let zero = linalg::zero_threshold(&x);
    let p = prob.p();
    let mut worst = 0.0_f64;
    for j in 0..p {
        for i in 0..p {
            let r = if i == j {
                (diag[i] - inv[(i, i)]).abs()
            } else {
                let g = s[(i, j)] - inv[(i, j)];
                let xij = x[(i, j)];
                if xij.abs() <= zero {
                    (g.abs() - lambda).max(0.0)
                } else if xij > 0.0 {
                    (g + lambda).abs()
                } else {
                    (g - lambda).abs()
                }
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Lower and upper bounds `(a, b)` on the eigenvalues of the optimal `X`.
///
/// Without an override these are `a = (‖S‖₂ + λp)⁻¹` and `b = p/λ`. With a
/// fixed diagonal `d`, write `δ_k = d_k − S_kk`; then `‖W‖₂ ≤ ‖S‖₂ +
/// λ(p−1) + max δ` and `trace(X) ≤ p / min δ` give the analogous pair.
pub fn eigenvalue_bounds(prob: &Problem) -> Result<(f64, f64)> {
    let lambda = prob.lambda();
    check_positive("lambda", lambda)?;
    let p = prob.p() as f64;
    let s_norm = linalg::spectral_norm(prob.s());
    let (mut a, mut b) = match prob.diag_override() {
        None => (1.0 / (s_norm + lambda * p), p / lambda),
        Some(d) => {
            let deltas: Vec<f64> = (0..prob.p()).map(|k| d[k] - prob.s()[(k, k)]).collect();
            let dmin = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
            let dmax = deltas.iter().cloned().fold(0.0_f64, f64::max);
            if !(dmin > 0.0) {
                return Err(CovselError::Parameter(
                    "diagonal override equal to S_kk leaves the spectrum unbounded".into(),
                ));
            }
            (1.0 / (s_norm + lambda * (p - 1.0) + dmax), p / dmin)
        }
    };
    if a >= b {
        a *= 1.0 - BOUNDS_WIDEN_REL;
        b *= 1.0 + BOUNDS_WIDEN_REL;
    }
    Ok((a, b))
}

/// Columns `k` with `λ ≥ |S_kj|` for every `j ≠ k`; the solution isolates
/// each of these variables.
pub fn screening_diagonal_columns(prob: &Problem) -> Vec<usize> {
    let s = prob.s();
    let p = prob.p();
    (0..p)
        .filter(|&k| (0..p).filter(|&j| j != k).all(|j| prob.lambda() >= s[(k, j)].abs()))
        .collect()
}

/// Largest violation of `‖W − S‖_∞ ≤ λ` off the diagonal and of the fixed
/// diagonal on it.
pub fn dual_infeasibility(w: &DMatrix<f64>, prob: &Problem) -> f64 {
    let s = prob.s();
    let d = prob.dual_diagonal();
    let p = prob.p();
    let mut worst = 0.0_f64;
    for j in 0..p {
        for i in 0..p {
            let v = if i == j {
                (w[(i, i)] - d[i]).abs()
            } else {
                ((w[(i, j)] - s[(i, j)]).abs() - prob.lambda()).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

pub(crate) fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub(crate) fn off_diagonal_l1(x: &DMatrix<f64>) -> f64 {
    let p = x.nrows();
    let mut total = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                total += x[(i, j)].abs();
            }
        }
    }
    total
}

fn check_dims(m: &DMatrix<f64>, prob: &Problem) -> Result<()> {
    let p = linalg::check_square(m, "matrix")?;
    if p != prob.p() {
        return Err(CovselError::Dimension(format!(
            "matrix is {p}x{p} but the problem has p = {}",
            prob.p()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn moment(s: DMatrix<f64>) -> SecondMoment {
        SecondMoment::from_matrix(s, 100).unwrap()
    }

    fn random_spd(p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() / p as f64 + DMatrix::identity(p, p) * 0.5
    }

    #[test]
    fn second_moment_two_samples() {
        let data = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let sm = second_moment(&SampleMatrix::new(data, DataKind::Gaussian).unwrap()).unwrap();
        assert_eq!(sm.s(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(sm.mu_bar().as_slice(), &[0.0, 0.0]);
        assert_eq!(sm.sigma_hat().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn identical_rows_give_zero_moment() {
        let data = DMatrix::from_row_slice(3, 2, &[2.0, -1.0, 2.0, -1.0, 2.0, -1.0]);
        let sm = second_moment(&SampleMatrix::new(data, DataKind::Gaussian).unwrap()).unwrap();
        assert_eq!(sm.s(), &DMatrix::zeros(2, 2));
    }

    #[test]
    fn second_moment_matches_elementwise_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let mix = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.5, 1.0, 0.0, -0.3, 0.2, 1.0]);
        let z = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = z * mix.transpose();
        let sm = second_moment(&SampleMatrix::new(data.clone(), DataKind::Gaussian).unwrap()).unwrap();

        let mut mean = [0.0; 3];
        for i in 0..n {
            for (j, m) in mean.iter_mut().enumerate() {
                *m += data[(i, j)];
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += (data[(i, a)] - mean[a]) * (data[(i, b)] - mean[b]);
                }
                acc /= n as f64;
                assert!((sm.s()[(a, b)] - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
            assert!((sm.sigma_hat()[a].powi(2) - sm.s()[(a, a)]).abs() <= 1e-10 * sm.s()[(a, a)]);
        }
    }

    #[test]
    fn too_few_rows_or_bad_values_are_rejected() {
        let one = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(
            SampleMatrix::new(one, DataKind::Gaussian),
            Err(CovselError::Dimension(_))
        ));
        let nan = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert!(matches!(
            SampleMatrix::new(nan, DataKind::Gaussian),
            Err(CovselError::Data(_))
        ));
        let not_spin = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(
            SampleMatrix::new(not_spin, DataKind::Binary),
            Err(CovselError::Data(_))
        ));
    }

    #[test]
    fn clearly_indefinite_moment_is_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(SecondMoment::from_matrix(s, 10).is_err());
    }

    #[test]
    fn moment_is_symmetrized() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.4, 1.0]);
        let sm = SecondMoment::from_matrix(s, 10).unwrap();
        assert_eq!(sm.s()[(0, 1)], 0.5 * (0.2 + 0.4));
        assert_eq!(sm.s()[(0, 1)], sm.s()[(1, 0)]);
    }

    #[test]
    fn primal_objective_identity_and_scalar() {
        let prob = Problem::new(moment(DMatrix::identity(2, 2)), 0.1, 1e-6).unwrap();
        assert_relative_eq!(
            primal_objective(&DMatrix::identity(2, 2), &prob).unwrap(),
            -2.2,
            epsilon = 1e-14
        );
        let prob = Problem::new(moment(DMatrix::zeros(1, 1)), 1.0, 1e-6).unwrap();
        let x = DMatrix::from_element(1, 1, 2.0);
        assert_relative_eq!(
            primal_objective(&x, &prob).unwrap(),
            2.0_f64.ln() - 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn primal_objective_matches_eigenvalue_logdet() {
        let x = random_spd(4, 11);
        let s = random_spd(4, 12);
        let prob = Problem::new(moment(s.clone()), 0.3, 1e-6).unwrap();
        let logdet: f64 = linalg::sym_eigenvalues(&x).iter().map(|v| v.ln()).sum();
        let mut tr = 0.0;
        let mut l1 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                tr += s[(i, j)] * x[(j, i)];
                l1 += x[(i, j)].abs();
            }
        }
        let expected = logdet - tr - 0.3 * l1;
        assert_relative_eq!(primal_objective(&x, &prob).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn primal_objective_rejects_non_pd() {
        let prob = Problem::new(moment(DMatrix::identity(2, 2)), 0.1, 1e-6).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(matches!(primal_objective(&bad, &prob), Err(CovselError::Domain(_))));
    }

    #[test]
    fn dual_objective_examples() {
        assert_eq!(dual_objective(&DMatrix::identity(3, 3)).unwrap(), 0.0);
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert_relative_eq!(dual_objective(&w).unwrap(), 6.0_f64.ln(), epsilon = 1e-14);
        let w = random_spd(5, 3);
        let chol = nalgebra::Cholesky::new(w.clone()).unwrap();
        let l = chol.l();
        let oracle: f64 = 2.0 * (0..5).map(|i| l[(i, i)].ln()).sum::<f64>();
        assert_relative_eq!(dual_objective(&w).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn gap_is_zero_at_diagonal_optima() {
        let prob = Problem::new(moment(DMatrix::zeros(2, 2)), 1.0, 1e-6).unwrap();
        assert_relative_eq!(
            duality_gap(&DMatrix::identity(2, 2), &prob).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let prob = Problem::new(moment(DMatrix::identity(2, 2)), 0.5, 1e-6).unwrap();
        let w = DMatrix::identity(2, 2) * 1.5;
        assert_relative_eq!(duality_gap(&w, &prob).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gap_equals_objective_difference() {
        // gap(W) = (−log det W − p) − primal(W⁻¹)
        let s = random_spd(3, 21);
        let prob = Problem::new(moment(s.clone()), 0.2, 1e-6).unwrap();
        let mut w = prob.initial_dual();
        w[(0, 1)] += 0.05;
        w[(1, 0)] += 0.05;
        let gap = duality_gap(&w, &prob).unwrap();
        let x = w.clone().try_inverse().unwrap();
        let diff = -dual_objective(&w).unwrap() - 3.0 - primal_objective(&x, &prob).unwrap();
        assert!((gap - diff).abs() <= 1e-10, "{gap} vs {diff}");
        assert!(gap > 0.0);
    }

    #[test]
    fn kkt_scalar_optimum() {
        let prob = Problem::new(moment(DMatrix::from_element(1, 1, 2.0)), 0.5, 1e-6).unwrap();
        let x = DMatrix::from_element(1, 1, 1.0 / 2.5);
        assert!(kkt_residual(&x, &prob).unwrap() < 1e-15);
    }

    #[test]
    fn kkt_detects_non_optimum() {
        let s = random_spd(3, 5);
        let prob = Problem::new(moment(s), 0.1, 1e-6).unwrap();
        let x = DMatrix::identity(3, 3);
        assert!(kkt_residual(&x, &prob).unwrap() > 1e-3);
    }

    #[test]
    fn eigenvalue_bound_examples() {
        let prob = Problem::new(moment(DMatrix::identity(2, 2)), 1.0, 1e-6).unwrap();
        let (a, b) = eigenvalue_bounds(&prob).unwrap();
        assert_relative_eq!(a, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(b, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_bounds_are_widened() {
        let prob = Problem::new(moment(DMatrix::zeros(1, 1)), 2.0, 1e-6).unwrap();
        let (a, b) = eigenvalue_bounds(&prob).unwrap();
        assert!(a < b);
        assert_relative_eq!(a, 0.5 * (1.0 - 1e-6), epsilon = 1e-15);
        assert_relative_eq!(b, 0.5 * (1.0 + 1e-6), epsilon = 1e-15);
    }

    #[test]
    fn screening_is_inclusive() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 1.0]);
        let prob = Problem::new(moment(s.clone()), 0.3, 1e-6).unwrap();
        assert_eq!(screening_diagonal_columns(&prob), vec![0, 1, 2]);
        let prob = Problem::new(moment(s), 0.25, 1e-6).unwrap();
        assert_eq!(screening_diagonal_columns(&prob), vec![2]);
        let prob = Problem::new(moment(DMatrix::identity(4, 4)), 1e-3, 1e-6).unwrap();
        assert_eq!(screening_diagonal_columns(&prob), vec![0, 1, 2, 3]);
    }

    #[test]
    fn problem_parameter_errors() {
        assert!(Problem::new(moment(DMatrix::identity(2, 2)), 0.0, 1e-6).is_err());
        assert!(Problem::new(moment(DMatrix::identity(2, 2)), 0.1, -1.0).is_err());
        let prob = Problem::new(moment(DMatrix::identity(2, 2)), 0.1, 1e-6).unwrap();
        assert!(prob
            .clone()
            .with_diag_override(DVector::from_vec(vec![0.5, 2.0]))
            .is_err());
        assert!(prob.with_diag_override(DVector::from_vec(vec![1.5, 2.0])).is_ok());
    }
}
