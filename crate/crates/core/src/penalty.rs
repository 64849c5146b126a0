//! Penalty parameters that bound the probability of falsely joining two
//! connectivity components, for Gaussian and binary data.

use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, gamma::gamma_ur, gamma::ln_gamma};

use crate::error::{CovselError, Result};
use crate::model::SecondMoment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyFamily {
    GaussianT,
    BinaryChi2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyChoice {
    pub alpha: f64,
    pub lambda: f64,
    pub family: PenaltyFamily,
    /// The t or χ² point the formula used.
    pub quantile_value: f64,
    /// When set, `α` replaces `α/2p²` as the tail probability.
    pub relaxed_bonferroni: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn check_probability(q: f64, what: &str) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(CovselError::Parameter(format!("{what} must lie in (0, 1), got {q}")))
    }
}

/// `P(T > t)` for Student's t with `dof` degrees of freedom.
pub fn student_t_upper(t: f64, dof: f64) -> f64 {
    let half = 0.5 * beta_reg(dof / 2.0, 0.5, dof / (dof + t * t));
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

pub fn student_t_pdf(t: f64, dof: f64) -> f64 {
    (ln_gamma((dof + 1.0) / 2.0)
        - ln_gamma(dof / 2.0)
        - 0.5 * (dof * std::f64::consts::PI).ln()
        - (dof + 1.0) / 2.0 * (t * t / dof).ln_1p())
    .exp()
}

/// `P(χ²₁ > c)`.
pub fn chi2_upper_1dof(c: f64) -> f64 {
    if c <= 0.0 {
        1.0
    } else {
        gamma_ur(0.5, c / 2.0)
    }
}

pub fn chi2_pdf_1dof(c: f64) -> f64 {
    (-0.5 * c).exp() / (2.0 * std::f64::consts::PI * c).sqrt()
}

/// Inverts a decreasing tail function on `[0, ∞)` by bracketed bisection
/// followed by one Newton step that is kept only if it stays in the bracket.
fn invert_upper_tail(q: f64, upper: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while upper(hi) > q {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
        if upper(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let d = pdf(x);
    if d > 0.0 && d.is_finite() {
        let refined = x + (upper(x) - q) / d;
        if refined >= lo && refined <= hi {
            return refined;
        }
    }
    x
}

/// `t` with `P(T_dof > t) = prob_upper`.
pub fn student_t_quantile(prob_upper: f64, dof: usize) -> Result<f64> {
    check_probability(prob_upper, "tail probability")?;
    if dof == 0 {
        return Err(CovselError::Parameter("degrees of freedom must be positive".into()));
    }
    let nu = dof as f64;
    if prob_upper == 0.5 {
        return Ok(0.0);
    }
    if prob_upper > 0.5 {
        return Ok(-student_t_quantile(1.0 - prob_upper, dof)?);
    }
    Ok(invert_upper_tail(
        prob_upper,
        |t| student_t_upper(t, nu),
        |t| student_t_pdf(t, nu),
    ))
}

/// `c` with `P(χ²₁ > c) = prob_upper`.
pub fn chi2_quantile_1dof(prob_upper: f64) -> Result<f64> {
    check_probability(prob_upper, "tail probability")?;
    Ok(invert_upper_tail(prob_upper, chi2_upper_1dof, chi2_pdf_1dof))
}

fn tail_level(alpha: f64, p: usize, relaxed: bool) -> f64 {
    if relaxed {
        alpha
    } else {
        alpha / (2.0 * (p * p) as f64)
    }
}

/// `λ(α) = m·t/√(n − 2 + t²)` with `t = t_{n−2}(level)`. Returns `(λ, t)`.
pub fn gaussian_penalty_value(max_pair: f64, n: usize, p: usize, alpha: f64, relaxed: bool) -> Result<(f64, f64)> {
    check_probability(alpha, "alpha")?;
    if n < 3 {
        return Err(CovselError::InsufficientSamples { needed: 3, got: n });
    }
    let t = student_t_quantile(tail_level(alpha, p, relaxed), n - 2)?;
    Ok((max_pair * t / ((n - 2) as f64 + t * t).sqrt(), t))
}

/// `λ_bin(α) = √c/(m·√n)` with `c = χ²₁(level)`. Returns `(λ, c)`.
pub fn binary_penalty_value(min_pair: f64, n: usize, p: usize, alpha: f64, relaxed: bool) -> Result<(f64, f64)> {
    check_probability(alpha, "alpha")?;
    if n < 1 {
        return Err(CovselError::InsufficientSamples { needed: 1, got: n });
    }
    let c = chi2_quantile_1dof(tail_level(alpha, p, relaxed))?;
    Ok((c.sqrt() / (min_pair * (n as f64).sqrt()), c))
}

fn pair_products(sigma: &[f64]) -> impl Iterator<Item = f64> + '_ {
    (0..sigma.len()).flat_map(move |i| (0..i).map(move |j| sigma[i] * sigma[j]))
}

/// Gaussian penalty from the largest pairwise product of standard deviations.
pub fn gaussian_lambda(moment: &SecondMoment, alpha: f64, relaxed: bool) -> Result<PenaltyChoice> {
    let p = moment.p();
    if p < 2 {
        return Err(CovselError::Parameter(
            "penalty selection needs at least two variables".into(),
        ));
    }
    let sigma = moment.sigma_hat().as_slice();
    let mut warnings = Vec::new();
    for (k, s) in sigma.iter().enumerate() {
        if !s.is_finite() {
            return Err(CovselError::Data(format!(
                "column {k} has a non-finite standard deviation"
            )));
        }
        if *s == 0.0 {
            let msg = format!("column {k} has zero variance");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let max_pair = pair_products(sigma).fold(0.0, f64::max);
    if max_pair <= 0.0 {
        return Err(CovselError::DegenerateVariance { column: 0 });
    }
    let (lambda, t) = gaussian_penalty_value(max_pair, moment.n(), p, alpha, relaxed)?;
    Ok(PenaltyChoice {
        alpha,
        lambda,
        family: PenaltyFamily::GaussianT,
        quantile_value: t,
        relaxed_bonferroni: relaxed,
        warnings,
    })
}

/// Binary penalty from the smallest pairwise product of standard deviations.
pub fn binary_lambda(moment: &SecondMoment, alpha: f64, relaxed: bool) -> Result<PenaltyChoice> {
    let p = moment.p();
    if p < 2 {
        return Err(CovselError::Parameter(
            "penalty selection needs at least two variables".into(),
        ));
    }
    let sigma = moment.sigma_hat().as_slice();
    if let Some(column) = sigma.iter().position(|s| !(*s > 0.0)) {
        return Err(CovselError::DegenerateVariance { column });
    }
    let min_pair = pair_products(sigma).fold(f64::INFINITY, f64::min);
    let (lambda, c) = binary_penalty_value(min_pair, moment.n(), p, alpha, relaxed)?;
    Ok(PenaltyChoice {
        alpha,
        lambda,
        family: PenaltyFamily::BinaryChi2,
        quantile_value: c,
        relaxed_bonferroni: relaxed,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DataKind, SampleMatrix};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    /// Γ((ν+1)/2)/Γ(ν/2) for integer ν by the half-integer recurrence.
    fn gamma_ratio(nu: usize) -> f64 {
        // r(ν) = Γ((ν+1)/2)/Γ(ν/2); r(1) = 1/√π, r(2) = √π/2, r(ν+2) = r(ν)·(ν+1)/ν.
        let (mut r, mut k) = if nu % 2 == 1 {
            (1.0 / PI.sqrt(), 1)
        } else {
            (PI.sqrt() / 2.0, 2)
        };
        while k < nu {
            r *= (k + 1) as f64 / k as f64;
            k += 2;
        }
        r
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut sum = f(a) + f(b);
        for i in 1..n {
            sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    /// Upper tail of t by integrating the density from 0, in the variable
    /// `w = x/(1+x)` so heavy tails stay on a bounded interval.
    fn oracle_t_upper(t: f64, nu: usize) -> f64 {
        let c = gamma_ratio(nu) / (nu as f64 * PI).sqrt();
        let nuf = nu as f64;
        let pdf = |w: f64| {
            let x = w / (1.0 - w);
            c * (1.0 + x * x / nuf).powf(-(nuf + 1.0) / 2.0) / ((1.0 - w) * (1.0 - w))
        };
        0.5 - simpson(pdf, 0.0, t / (1.0 + t), 200_000)
    }

    fn oracle_t_quantile(q: f64, nu: usize) -> f64 {
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if oracle_t_upper(mid, nu) > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Standard normal upper tail by integration.
    fn oracle_normal_upper(z: f64) -> f64 {
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        0.5 - simpson(pdf, 0.0, z, 200_000)
    }

    fn oracle_chi2_quantile(q: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 40.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if oracle_normal_upper(mid) > q / 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = 0.5 * (lo + hi);
        z * z
    }

    #[test]
    fn t_quantile_symmetry_and_cauchy() {
        assert_eq!(student_t_quantile(0.5, 7).unwrap(), 0.0);
        assert!((student_t_quantile(0.25, 1).unwrap() - 1.0).abs() < 1e-10);
        assert!((student_t_quantile(0.75, 1).unwrap() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn t_quantile_matches_integration_oracle() {
        let t = student_t_quantile(0.025, 10).unwrap();
        assert!((t - oracle_t_quantile(0.025, 10)).abs() < 1e-9);
        assert!((t - 2.228_138_851_986).abs() < 1e-9);
    }

    #[test]
    fn t_quantile_round_trip() {
        for &nu in &[1usize, 3, 10, 251] {
            for &q in &[1e-6, 0.01, 0.5, 0.99] {
                let t = student_t_quantile(q, nu).unwrap();
                let back = if t >= 0.0 {
                    oracle_t_upper(t, nu)
                } else {
                    1.0 - oracle_t_upper(-t, nu)
                };
                assert!((back - q).abs() < 1e-9, "nu={nu} q={q}: {back}");
            }
        }
    }

    #[test]
    fn chi2_quantile_cases() {
        let c = chi2_quantile_1dof(0.05).unwrap();
        assert!((c - oracle_chi2_quantile(0.05)).abs() < 1e-9);
        assert!((c - 3.841_458_820_694_124).abs() < 1e-9);
        // P(χ²₁ > 1) = 2(1 − Φ(1)) ≈ 0.31731
        assert!((chi2_quantile_1dof(0.3173).unwrap() - 1.0).abs() < 1e-3);
        assert!(chi2_quantile_1dof(1.0 - 1e-12).unwrap() < 1e-20);
        for &q in &[1e-6, 0.01, 0.5, 0.99] {
            let c = chi2_quantile_1dof(q).unwrap();
            assert!((2.0 * oracle_normal_upper(c.sqrt()) - q).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_range_probabilities_are_rejected() {
        for q in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(student_t_quantile(q, 3), Err(CovselError::Parameter(_))));
            assert!(matches!(chi2_quantile_1dof(q), Err(CovselError::Parameter(_))));
        }
    }

    #[test]
    fn gaussian_formula_hand_tuple() {
        // n = 12, p = 3, α = 0.1, max σσ = 2.
        let t = oracle_t_quantile(0.1 / 18.0, 10);
        let expected = 2.0 * t / (10.0 + t * t).sqrt();
        let (lambda, _) = gaussian_penalty_value(2.0, 12, 3, 0.1, false).unwrap();
        assert!((lambda - expected).abs() < 1e-9);
    }

    #[test]
    fn gaussian_relaxed_unit_scale_factor() {
        // With max σσ = 1 the formula reduces to the t-ratio.
        let (lambda, t) = gaussian_penalty_value(1.0, 253, 6136, 0.05, true).unwrap();
        let t_oracle = oracle_t_quantile(0.05, 251);
        assert!((t - t_oracle).abs() < 1e-9);
        assert_relative_eq!(lambda, t / (251.0 + t * t).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn gaussian_lambda_decreases_in_n_and_alpha() {
        let mut last = f64::INFINITY;
        for n in [10, 100, 1000] {
            let (l, _) = gaussian_penalty_value(1.5, n, 8, 0.05, false).unwrap();
            assert!(l < last);
            last = l;
        }
        let mut last = f64::INFINITY;
        for alpha in [0.01, 0.05, 0.2, 0.5] {
            let (l, _) = gaussian_penalty_value(1.5, 50, 8, alpha, false).unwrap();
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn bonferroni_consistency() {
        let (a, _) = gaussian_penalty_value(1.0, 40, 2, 0.05, false).unwrap();
        let (b, _) = gaussian_penalty_value(1.0, 40, 2, 0.05 / 8.0, true).unwrap();
        assert_eq!(a, b);
        let (a, _) = binary_penalty_value(1.0, 40, 2, 0.05, false).unwrap();
        let (b, _) = binary_penalty_value(1.0, 40, 2, 0.05 / 8.0, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_needs_three_samples() {
        assert!(matches!(
            gaussian_penalty_value(1.0, 2, 3, 0.05, false),
            Err(CovselError::InsufficientSamples { needed: 3, got: 2 })
        ));
    }

    fn balanced_binary(n: usize) -> SecondMoment {
        let data = DMatrix::from_fn(n, 2, |i, j| if (i >> j) % 2 == 0 { 1.0 } else { -1.0 });
        SecondMoment::from_samples(&SampleMatrix::new(data, DataKind::Binary).unwrap()).unwrap()
    }

    #[test]
    fn binary_balanced_votes() {
        let sm = balanced_binary(100);
        assert!(sm.mu_bar().amax() < 1e-15);
        let choice = binary_lambda(&sm, 0.05, false).unwrap();
        let expected = oracle_chi2_quantile(0.00625).sqrt() / 10.0;
        assert!((choice.lambda - expected).abs() < 1e-9);
        assert_eq!(choice.family, PenaltyFamily::BinaryChi2);
    }

    #[test]
    fn binary_lambda_halves_when_n_quadruples() {
        let (a, _) = binary_penalty_value(0.8, 50, 5, 0.05, false).unwrap();
        let (b, _) = binary_penalty_value(0.8, 200, 5, 0.05, false).unwrap();
        assert_relative_eq!(a / b, 2.0, epsilon = 1e-14);
        let (tiny, _) = binary_penalty_value(0.8, 50, 5, 1.0 - 1e-12, true).unwrap();
        assert!(tiny < 1e-10);
    }

    #[test]
    fn binary_variance_identity() {
        let data = DMatrix::from_row_slice(5, 2, &[1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
        let sm = SecondMoment::from_samples(&SampleMatrix::new(data, DataKind::Binary).unwrap()).unwrap();
        for k in 0..2 {
            let mu = sm.mu_bar()[k];
            assert!((sm.sigma_hat()[k].powi(2) - (1.0 - mu * mu)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_binary_column_is_degenerate() {
        let data = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 1.0, 1.0, 1.0]);
        let sm = SecondMoment::from_samples(&SampleMatrix::new(data, DataKind::Binary).unwrap()).unwrap();
        assert!(matches!(
            binary_lambda(&sm, 0.05, false),
            Err(CovselError::DegenerateVariance { column: 1 })
        ));
    }

    #[test]
    fn gaussian_zero_variance_warns() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let sm = SecondMoment::from_matrix(s, 20).unwrap();
        let choice = gaussian_lambda(&sm, 0.05, false).unwrap();
        assert_eq!(choice.warnings.len(), 1);
        assert!(choice.lambda > 0.0);
    }
}
