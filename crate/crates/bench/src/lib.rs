//! Seeded fixtures shared by the benchmarks.

use covsel_core::synthetic::{generate_ground_truth, sample_gaussian};
use covsel_core::{linalg, Problem, SecondMoment};
use nalgebra::{DMatrix, DVector};

/// Second moment of `n = factor·p` samples from a seeded sparse truth.
pub fn moment(p: usize, delta: f64, factor: usize, seed: u64) -> SecondMoment {
    let truth = generate_ground_truth(p, delta, seed).expect("valid generator parameters");
    let samples = sample_gaussian(&truth, factor * p, seed).expect("valid sample size");
    SecondMoment::from_samples(&samples).expect("non-degenerate samples")
}

pub fn problem(p: usize, lambda: f64, epsilon: f64, seed: u64) -> Problem {
    Problem::new(moment(p, 0.1, 3, seed), lambda, epsilon).expect("valid problem")
}

/// The column-0 lasso subproblem `(Q, s)` of the first BCD sweep, where
/// `Q` is the trailing block of `S + λI`.
pub fn lasso_fixture(p: usize, lambda: f64, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let prob = problem(p, lambda, 1e-6, seed);
    let w = prob.initial_dual();
    (linalg::minor(&w, 0), linalg::column_without_diag(prob.s(), 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_shape() {
        assert_eq!(problem(12, 0.1, 1e-6, 0).p(), 12);
        let (q, s) = lasso_fixture(12, 0.1, 0);
        assert_eq!((q.nrows(), s.len()), (11, 11));
        assert!(linalg::is_positive_definite(&q));
    }
}
