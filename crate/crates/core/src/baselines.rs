//! Comparison estimators and edge-classification metrics.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bcd::{lasso_dual_solve, QpOptions};
use crate::error::{CovselError, Result};
use crate::linalg;
use crate::model::SecondMoment;

/// Undirected edge set over `p` vertices, pairs stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityPattern {
    pub p: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl SparsityPattern {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Self::empty(p);
        for (i, j) in edges {
            out.insert(i, j)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        if i == j || i >= self.p || j >= self.p {
            return Err(CovselError::Parameter(format!(
                "invalid edge ({i}, {j}) for p = {}",
                self.p
            )));
        }
        Ok(self.edges.insert((i.min(j), i.max(j))))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.edges.is_subset(&other.edges)
    }

    /// Relabels vertex `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| (perm[i].min(perm[j]), perm[i].max(perm[j])))
            .collect();
        Self { p: self.p, edges }
    }

    /// Vertices with no incident edge.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.p)
            .filter(|&k| !self.edges.iter().any(|&(i, j)| i == k || j == k))
            .collect()
    }
}

/// Off-diagonal entries with `|X_kj| > threshold`.
pub fn pattern_of(x: &DMatrix<f64>, zero_threshold: f64) -> SparsityPattern {
    let p = x.nrows();
    let mut out = SparsityPattern::empty(p);
    for j in 0..p {
        for i in 0..j {
            if x[(i, j)].abs() > zero_threshold {
                out.edges.insert((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub power: f64,
    pub ppv: f64,
    pub density: f64,
    /// Misclassified ordered off-diagonal entries over `p²`.
    pub error_pct: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

pub fn classification_report(estimated: &SparsityPattern, truth: &SparsityPattern) -> Result<ClassificationReport> {
    if estimated.p != truth.p {
        return Err(CovselError::Dimension(format!(
            "patterns have p = {} and p = {}",
            estimated.p, truth.p
        )));
    }
    let p = truth.p;
    let tp = estimated.edges.intersection(&truth.edges).count();
    let fp = estimated.len() - tp;
    let fn_ = truth.len() - tp;
    let pairs = p * p.saturating_sub(1) / 2;
    Ok(ClassificationReport {
        power: if truth.is_empty() {
            1.0
        } else {
            tp as f64 / truth.len() as f64
        },
        ppv: if estimated.is_empty() {
            1.0
        } else {
            tp as f64 / estimated.len() as f64
        },
        density: if pairs == 0 {
            0.0
        } else {
            estimated.len() as f64 / pairs as f64
        },
        error_pct: if p == 0 {
            0.0
        } else {
            2.0 * (fp + fn_) as f64 / (p * p) as f64
        },
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}

/// Outcome of thresholding `S⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub pattern: SparsityPattern,
    /// `S⁻¹` with off-diagonal entries at or below the threshold zeroed.
    pub thresholded: DMatrix<f64>,
    /// Minimum of `vᵀS⁻¹v` over the `ℓ₁`-sphere points `±eᵢ` and
    /// `(±eᵢ ± eⱼ)/2`. An upper bound on the sphere minimum.
    pub vertex_bound: f64,
    /// `λ_min(S⁻¹)/p`, a lower bound on the sphere minimum. Thresholds at or
    /// below it provably keep the matrix positive definite.
    pub spectral_bound: f64,
    pub within_spectral_bound: bool,
    pub within_vertex_bound: bool,
    /// Whether the thresholded matrix actually is positive definite.
    pub positive_definite: bool,
}

pub fn threshold_inverse(moment: &SecondMoment, t: f64) -> Result<ThresholdReport> {
    if !(t >= 0.0) {
        return Err(CovselError::Parameter(format!(
            "threshold must be nonnegative, got {t}"
        )));
    }
    let s = moment.s();
    let p = s.nrows();
    let inv = linalg::inverse_spd(s, "S").map_err(|_| CovselError::Singular("S is not invertible".into()))?;
    let pattern = pattern_of(&inv, t);
    let mut thresholded = inv.clone();
    for j in 0..p {
        for i in 0..p {
            if i != j && inv[(i, j)].abs() <= t {
                thresholded[(i, j)] = 0.0;
            }
        }
    }
    let mut vertex_bound = (0..p).map(|i| inv[(i, i)]).fold(f64::INFINITY, f64::min);
    for j in 0..p {
        for i in 0..j {
            let pair = (inv[(i, i)] + inv[(j, j)] - 2.0 * inv[(i, j)].abs()) / 4.0;
            vertex_bound = vertex_bound.min(pair);
        }
    }
    let spectral_bound = linalg::sym_eigenvalues(&inv)[0] / p as f64;
    Ok(ThresholdReport {
        pattern,
        positive_definite: linalg::is_positive_definite(&thresholded),
        thresholded,
        vertex_bound,
        spectral_bound,
        within_spectral_bound: t <= spectral_bound,
        within_vertex_bound: t <= vertex_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRule {
    Or,
    And,
}

/// Lasso coefficients of each variable regressed on the others,
/// `argmin ½βᵀS₋ₖβ − s₋ₖᵀβ + λ‖β‖₁`, on raw second moments. Entry `k` has
/// length `p − 1`, indexed over the other variables in order.
pub fn neighborhood_coefficients(s: &DMatrix<f64>, lambda: f64, opts: &QpOptions) -> Result<Vec<DVector<f64>>> {
    let p = linalg::check_square(s, "S")?;
    if p < 2 {
        return Err(CovselError::Parameter("neighborhood selection needs p >= 2".into()));
    }
    if !(lambda > 0.0) {
        return Err(CovselError::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    for k in 0..p {
        if !(s[(k, k)] > 0.0) {
            log::warn!("column {k} has zero variance; its coefficients are zero");
        }
    }
    (0..p)
        .into_par_iter()
        .map(|k| {
            let q = linalg::minor(s, k) * 0.5;
            let rhs = linalg::column_without_diag(s, k);
            if !(s[(k, k)] > 0.0) {
                return Ok(DVector::zeros(p - 1));
            }
            lasso_dual_solve(&q, &rhs, lambda, opts)
        })
        .collect()
}

fn others(p: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..p).filter(move |&i| i != k)
}

/// Combines per-node selections into an edge set.
pub fn combine_neighborhoods(coefs: &[DVector<f64>], rule: EdgeRule) -> SparsityPattern {
    let p = coefs.len();
    let selected = |k: usize, j: usize| {
        let idx = if j < k { j } else { j - 1 };
        coefs[k][idx] != 0.0
    };
    let mut out = SparsityPattern::empty(p);
    for k in 0..p {
        for j in others(p, k).filter(|&j| j > k) {
            let keep = match rule {
                EdgeRule::Or => selected(k, j) || selected(j, k),
                EdgeRule::And => selected(k, j) && selected(j, k),
            };
            if keep {
                out.edges.insert((k, j));
            }
        }
    }
    out
}

pub fn neighborhood_select(s: &DMatrix<f64>, lambda: f64, rule: EdgeRule) -> Result<SparsityPattern> {
    let coefs = neighborhood_coefficients(s, lambda, &QpOptions::default())?;
    Ok(combine_neighborhoods(&coefs, rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcd::{solve_bcd, BcdOptions};
    use crate::model::{screening_diagonal_columns, Problem};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn moment_from(s: DMatrix<f64>) -> SecondMoment {
        SecondMoment::from_matrix(s, 100).unwrap()
    }

    fn chain_samples(p: usize, n: usize, seed: u64) -> DMatrix<f64> {
        // AR(1): each variable depends on its predecessor only.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = DMatrix::zeros(n, p);
        for r in 0..n {
            let mut prev = 0.0;
            for c in 0..p {
                let v = 0.7 * prev + rng.sample::<f64, _>(StandardNormal);
                y[(r, c)] = v;
                prev = v;
            }
        }
        let mean = DVector::from_iterator(p, (0..p).map(|j| y.column(j).mean()));
        for j in 0..p {
            y.column_mut(j).add_scalar_mut(-mean[j]);
        }
        y.transpose() * y / n as f64
    }

    #[test]
    fn patterns_of_simple_matrices() {
        assert!(pattern_of(&DMatrix::identity(4, 4), 1e-8).is_empty());
        assert_eq!(pattern_of(&DMatrix::from_element(5, 5, 1.0), 1e-8).len(), 10);
    }

    #[test]
    fn screened_columns_are_isolated() {
        let mut s = chain_samples(6, 200, 1);
        for j in 0..6 {
            if j != 3 {
                s[(3, j)] *= 0.01;
                s[(j, 3)] *= 0.01;
            }
        }
        let lambda = (0..6).filter(|&j| j != 3).map(|j| s[(3, j)].abs()).fold(0.0, f64::max) * 1.5;
        let prob = Problem::new(moment_from(s), lambda, 1e-8).unwrap();
        let est = solve_bcd(&prob, &BcdOptions::default()).unwrap();
        let pattern = pattern_of(&est.x, linalg::zero_threshold(&est.x));
        let isolated = pattern.isolated();
        for k in screening_diagonal_columns(&prob) {
            assert!(isolated.contains(&k));
        }
        assert!(isolated.contains(&3));
    }

    #[test]
    fn threshold_of_identity_and_diagonal() {
        let r = threshold_inverse(&moment_from(DMatrix::identity(3, 3)), 0.5).unwrap();
        assert!(r.pattern.is_empty());
        assert!(r.positive_definite);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        assert!(threshold_inverse(&moment_from(d), 1e-3).unwrap().pattern.is_empty());
    }

    #[test]
    fn threshold_matches_elementwise_comparison() {
        let s = chain_samples(10, 60, 3);
        let inv = s.clone().try_inverse().unwrap();
        let t = 0.3;
        let r = threshold_inverse(&moment_from(s), t).unwrap();
        for i in 0..10 {
            for j in (i + 1)..10 {
                let expected = inv[(i, j)].abs().max(inv[(j, i)].abs()) > t;
                assert_eq!(r.pattern.contains(i, j), expected);
            }
        }
        assert!(r.spectral_bound <= r.vertex_bound);
    }

    #[test]
    fn zero_threshold_gives_full_support() {
        let s = chain_samples(6, 40, 9);
        let r = threshold_inverse(&moment_from(s), 0.0).unwrap();
        assert_eq!(r.pattern.len(), 15);
        assert!(r.positive_definite);
    }

    #[test]
    fn thresholds_inside_the_spectral_bound_stay_pd() {
        for seed in 0..20 {
            let s = chain_samples(8, 30, seed);
            let r0 = threshold_inverse(&moment_from(s.clone()), 0.0).unwrap();
            let r = threshold_inverse(&moment_from(s), r0.spectral_bound).unwrap();
            assert!(r.within_spectral_bound);
            assert!(r.positive_definite);
        }
    }

    #[test]
    fn singular_moment_is_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            threshold_inverse(&moment_from(s), 0.1),
            Err(CovselError::Singular(_))
        ));
    }

    #[test]
    fn independent_variables_have_no_neighbors() {
        let s = DMatrix::identity(5, 5);
        for rule in [EdgeRule::Or, EdgeRule::And] {
            assert!(neighborhood_select(&s, 0.1, rule).unwrap().is_empty());
        }
    }

    #[test]
    fn chain_is_recovered_and_each_regression_is_optimal() {
        let p = 8;
        let s = chain_samples(p, 2000, 5);
        let lambda = 0.2;
        let opts = QpOptions {
            tol: 1e-13,
            max_iter: 100_000,
        };
        let coefs = neighborhood_coefficients(&s, lambda, &opts).unwrap();
        for (k, beta) in coefs.iter().enumerate() {
            let q = linalg::minor(&s, k);
            let rhs = linalg::column_without_diag(&s, k);
            let grad = &q * beta - &rhs;
            for i in 0..p - 1 {
                if beta[i] != 0.0 {
                    assert!((grad[i] + lambda * beta[i].signum()).abs() < 1e-9);
                } else {
                    assert!(grad[i].abs() <= lambda + 1e-9);
                }
            }
        }
        let or = combine_neighborhoods(&coefs, EdgeRule::Or);
        let chain = SparsityPattern::from_edges(p, (0..p - 1).map(|i| (i, i + 1))).unwrap();
        assert_eq!(or, chain);
    }

    #[test]
    fn degenerate_column_gets_no_neighbors() {
        let mut s = chain_samples(4, 100, 2);
        for j in 0..4 {
            s[(2, j)] = 0.0;
            s[(j, 2)] = 0.0;
        }
        let coefs = neighborhood_coefficients(&s, 0.05, &QpOptions::default()).unwrap();
        assert!(coefs[2].amax() == 0.0);
    }

    #[test]
    fn report_cases() {
        let truth = SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let r = classification_report(&truth, &truth).unwrap();
        assert_eq!((r.power, r.ppv, r.error_pct), (1.0, 1.0, 0.0));

        let r = classification_report(&SparsityPattern::empty(4), &truth).unwrap();
        assert_eq!((r.power, r.ppv), (0.0, 1.0));
        assert_eq!(r.error_pct, 6.0 / 16.0);

        // One false positive (0,3) and one false negative (2,3).
        let est = SparsityPattern::from_edges(4, [(0, 1), (1, 2), (0, 3)]).unwrap();
        let r = classification_report(&est, &truth).unwrap();
        assert!((r.power - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.ppv - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.error_pct, 4.0 / 16.0);
        assert_eq!(r.density, 0.5);

        assert!(classification_report(&SparsityPattern::empty(3), &truth).is_err());
    }

    #[test]
    fn self_loops_are_rejected() {
        assert!(SparsityPattern::from_edges(3, [(1, 1)]).is_err());
        assert!(SparsityPattern::from_edges(3, [(0, 3)]).is_err());
    }

    fn random_pattern(p: usize, rng: &mut ChaCha8Rng) -> SparsityPattern {
        let mut out = SparsityPattern::empty(p);
        for j in 0..p {
            for i in 0..j {
                if rng.random_bool(0.3) {
                    out.edges.insert((i, j));
                }
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn and_is_contained_in_or(seed in 0u64..10_000, lambda in 0.01f64..0.3) {
            let s = chain_samples(6, 20, seed);
            let coefs = neighborhood_coefficients(&s, lambda, &QpOptions::default()).unwrap();
            let or = combine_neighborhoods(&coefs, EdgeRule::Or);
            let and = combine_neighborhoods(&coefs, EdgeRule::And);
            prop_assert!(and.is_subset(&or));
        }

        #[test]
        fn report_is_permutation_invariant(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = 7;
            let est = random_pattern(p, &mut rng);
            let truth = random_pattern(p, &mut rng);
            let mut perm: Vec<usize> = (0..p).collect();
            for i in (1..p).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let a = classification_report(&est, &truth).unwrap();
            let b = classification_report(&est.permuted(&perm), &truth.permuted(&perm)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
