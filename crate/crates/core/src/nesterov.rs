//! Smoothed first-order method on the primal problem.
//!
//! The primal is written as `min f(X) = −log det X + ⟨C, X⟩ + λ‖X‖₁` over
//! the spectral box `Q₁ = {aI ⪯ X ⪯ bI}`, with `C = S̃ − λI` (`S̃` the second
//! moment with the fixed dual diagonal). The `ℓ₁` term is the support
//! function `max_{‖U‖_∞ ≤ 1} ⟨λX, U⟩` and is replaced by its Moreau smoothing
//! with parameter `μ`, which turns the problem into one with a Lipschitz
//! gradient. Each step costs one Cholesky inverse plus, when an iterate
//! leaves the interior of the box, a symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovselError, Result};
use crate::linalg;
use crate::model::{eigenvalue_bounds, gap_from_inverse, Estimate, Problem, SolverKind};

#[derive(Debug, Clone, Copy)]
pub struct NesterovOptions {
    /// Lower spectral bound; `None` uses the problem's eigenvalue bounds.
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Step cap; `None` means `4·N(ε)`.
    pub max_steps: Option<usize>,
    pub gap_check_every: usize,
}

impl Default for NesterovOptions {
    fn default() -> Self {
        Self {
            a: None,
            b: None,
            max_steps: None,
            gap_check_every: 50,
        }
    }
}

impl NesterovOptions {
    /// Resolves the spectral box, filling in defaults.
    pub fn bounds(&self, prob: &Problem) -> Result<(f64, f64)> {
        let (da, db) = eigenvalue_bounds(prob)?;
        let a = self.a.unwrap_or(da);
        let b = self.b.unwrap_or(db);
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(CovselError::Parameter(format!(
                "spectral bounds need 0 < a < b, got a={a}, b={b}"
            )));
        }
        Ok((a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub d1: f64,
    pub d2: f64,
    pub m: f64,
    pub a_norm: f64,
}

impl SmoothingConstants {
    pub fn new(p: usize, a: f64, b: f64, lambda: f64, epsilon: f64) -> Self {
        let pf = p as f64;
        let sigma1 = 1.0 / (b * b);
        let sigma2 = 1.0;
        let d1 = pf * (b / a).ln();
        let d2 = pf * pf / 2.0;
        let m = 1.0 / (a * a);
        let a_norm = lambda;
        let mu = epsilon / (2.0 * d2);
        // Gradient of the smoothed term is ‖A‖²/(μσ₂)-Lipschitz.
        let lipschitz = m + a_norm * a_norm / (mu * sigma2);
        Self {
            mu,
            lipschitz,
            sigma1,
            sigma2,
            d1,
            d2,
            m,
            a_norm,
        }
    }
}

/// A-priori step bound `⌈4‖A‖√(D₁D₂/(σ₁σ₂))/ε + √(M·D₁/(σ₁ε))⌉`, saturating.
pub fn iteration_bound(p: usize, a: f64, b: f64, lambda: f64, epsilon: f64) -> u64 {
    let c = SmoothingConstants::new(p, a, b, lambda, epsilon);
    let first = 4.0 * c.a_norm * (c.d1 * c.d2 / (c.sigma1 * c.sigma2)).sqrt() / epsilon;
    let second = (c.m * c.d1 / (c.sigma1 * epsilon)).sqrt();
    let n = (first + second).ceil();
    if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    }
}

/// Moreau smoothing of `|t|`: `max_{|u| ≤ 1} t·u − μu²/2`.
#[inline]
pub fn smoothed_abs(t: f64, mu: f64) -> f64 {
    if t.abs() <= mu {
        t * t / (2.0 * mu)
    } else {
        t.abs() - mu / 2.0
    }
}

/// The linear term `C = S̃ − λI` of the primal objective.
pub fn linear_term(prob: &Problem) -> DMatrix<f64> {
    let mut c = prob.shifted_moment();
    for k in 0..prob.p() {
        c[(k, k)] -= prob.lambda();
    }
    c
}

/// `−log det X + ⟨C, X⟩ + λ‖X‖₁`.
pub fn primal_value(x: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    Ok(-linalg::log_det_spd(x, "X")? + c.dot(x) + lambda * linalg::l1_norm(x))
}

/// `−log det X + ⟨C, X⟩ + Σᵢⱼ ψ_μ(λXᵢⱼ)`.
pub fn smoothed_value(x: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64, mu: f64) -> Result<f64> {
    let penalty: f64 = x.iter().map(|&v| smoothed_abs(lambda * v, mu)).sum();
    Ok(-linalg::log_det_spd(x, "X")? + c.dot(x) + penalty)
}

/// Maximizer of `⟨λX, U⟩ − μ‖U‖²_F/2` over `‖U‖_∞ ≤ 1`: `clip(λX/μ, [−1, 1])`.
pub fn smoothed_maximizer(x: &DMatrix<f64>, lambda: f64, mu: f64) -> DMatrix<f64> {
    x.map(|v| (lambda * v / mu).clamp(-1.0, 1.0))
}

/// Gradient of the smoothed objective, `−X⁻¹ + C + λ·U*(X)`.
pub fn smoothed_gradient(x: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64, mu: f64) -> Result<DMatrix<f64>> {
    gradient_with(x, c, lambda, &smoothed_maximizer(x, lambda, mu))
}

fn gradient_with(x: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = linalg::inverse_spd(x, "X")?;
    let mut g = c - inv + u * lambda;
    linalg::symmetrize_in_place(&mut g);
    Ok(g)
}

/// Frobenius projection onto `{aI ⪯ X ⪯ bI}` by clamping eigenvalues.
pub fn project_spectral_box(g: &DMatrix<f64>, a: f64, b: f64) -> DMatrix<f64> {
    if linalg::strictly_within_spectrum(g, a, b) {
        return linalg::symmetrize(g);
    }
    linalg::eigen_map(g, |v| v.clamp(a, b))
}

/// Minimizes `(L/σ₁)·(−log det X + p·log b) + ⟨G, X⟩` over the spectral box.
pub fn prox_center_step(acc: &DMatrix<f64>, lipschitz: f64, sigma1: f64, a: f64, b: f64) -> DMatrix<f64> {
    let scale = lipschitz / sigma1;
    // Interior case: no eigenvalue gets clamped, so the minimizer is scale·acc⁻¹.
    if linalg::strictly_within_spectrum(acc, scale / b, scale / a) {
        if let Ok(inv) = linalg::inverse_spd(acc, "accumulated gradient") {
            return inv * scale;
        }
    }
    linalg::eigen_map(acc, |v| if v > 0.0 { (scale / v).clamp(a, b) } else { b })
}

/// Dual point from a primal iterate: `X⁻¹` clipped into the feasible box
/// with the diagonal fixed. When clipping breaks definiteness the point is
/// pulled toward the always-feasible `S̃` along the shortest PD segment.
pub fn dual_from_primal(x: &DMatrix<f64>, prob: &Problem) -> Result<DMatrix<f64>> {
    let inv = linalg::inverse_spd(x, "X")?;
    let s = prob.s();
    let lambda = prob.lambda();
    let diag = prob.dual_diagonal();
    let p = prob.p();
    let mut w = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            diag[i]
        } else {
            inv[(i, j)].clamp(s[(i, j)] - lambda, s[(i, j)] + lambda)
        }
    });
    linalg::symmetrize_in_place(&mut w);
    if linalg::is_positive_definite(&w) {
        return Ok(w);
    }
    let anchor = prob.initial_dual();
    let blend = |t: f64| &w * (1.0 - t) + &anchor * t;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if linalg::is_positive_definite(&blend(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    log::debug!("clipped dual point was indefinite; blended toward S̃ with weight {hi:.3e}");
    let mut out = blend(hi);
    for k in 0..p {
        out[(k, k)] = diag[k];
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub w: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub gap: f64,
}

/// Dual point `S + λ·Ū` off the diagonal, fixed diagonal on it. Any `Ū`
/// in the unit `ℓ∞` ball gives a feasible point.
pub fn dual_from_maximizer(u: &DMatrix<f64>, prob: &Problem) -> DMatrix<f64> {
    let s = prob.s();
    let diag = prob.dual_diagonal();
    let lambda = prob.lambda();
    let p = prob.p();
    let mut w = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            diag[i]
        } else {
            s[(i, j)] + lambda * u[(i, j)].clamp(-1.0, 1.0)
        }
    });
    linalg::symmetrize_in_place(&mut w);
    w
}

/// Step-by-step state, exposed for tests and diagnostics.
#[derive(Debug, Clone)]
pub struct NesterovState {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub acc: DMatrix<f64>,
    /// Weighted sum of the smoothed maximizers, same weights as `acc`.
    pub u_acc: DMatrix<f64>,
    pub weight: f64,
    pub k: usize,
}

pub struct NesterovSolver<'a> {
    prob: &'a Problem,
    c: DMatrix<f64>,
    a: f64,
    b: f64,
    consts: SmoothingConstants,
    max_steps: usize,
    gap_check_every: usize,
    state: NesterovState,
}

impl<'a> NesterovSolver<'a> {
    pub fn new(prob: &'a Problem, opts: &NesterovOptions) -> Result<Self> {
        if opts.gap_check_every == 0 {
            return Err(CovselError::Parameter("gap_check_every must be positive".into()));
        }
        let (a, b) = opts.bounds(prob)?;
        let p = prob.p();
        let consts = SmoothingConstants::new(p, a, b, prob.lambda(), prob.epsilon());
        let max_steps = match opts.max_steps {
            Some(m) => m,
            None => usize::try_from(iteration_bound(p, a, b, prob.lambda(), prob.epsilon()))
                .unwrap_or(usize::MAX)
                .saturating_mul(4),
        };
        let x0 = DMatrix::identity(p, p) * b;
        Ok(Self {
            prob,
            c: linear_term(prob),
            a,
            b,
            consts,
            max_steps,
            gap_check_every: opts.gap_check_every,
            state: NesterovState {
                y: x0.clone(),
                z: x0.clone(),
                x: x0,
                acc: DMatrix::zeros(p, p),
                u_acc: DMatrix::zeros(p, p),
                weight: 0.0,
                k: 0,
            },
        })
    }

    pub fn constants(&self) -> &SmoothingConstants {
        &self.consts
    }

    pub fn state(&self) -> &NesterovState {
        &self.state
    }

    pub fn linear_term(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn step(&mut self) -> Result<()> {
        let st = &mut self.state;
        let k = st.k as f64;
        let u = smoothed_maximizer(&st.x, self.prob.lambda(), self.consts.mu);
        let g = gradient_with(&st.x, &self.c, self.prob.lambda(), &u)?;
        st.u_acc += u * ((k + 1.0) / 2.0);
        st.weight += (k + 1.0) / 2.0;
        st.y = project_spectral_box(&(&st.x - &g / self.consts.lipschitz), self.a, self.b);
        st.acc += &g * ((k + 1.0) / 2.0);
        st.z = prox_center_step(&st.acc, self.consts.lipschitz, self.consts.sigma1, self.a, self.b);
        st.x = &st.z * (2.0 / (k + 3.0)) + &st.y * ((k + 1.0) / (k + 3.0));
        st.k += 1;
        Ok(())
    }

    /// Best of two dual points: `y⁻¹` clipped into the box, and the
    /// weighted average of the smoothed maximizers. The gap certifies the
    /// pair `(W⁻¹, W)`, so `W⁻¹` is what gets reported.
    pub fn certificate(&self) -> Result<Certificate> {
        let w = dual_from_primal(&self.state.y, self.prob)?;
        let x = linalg::inverse_spd(&w, "W")?;
        let gap = gap_from_inverse(&x, self.prob);
        let mut best = Certificate { w, x, gap };
        if self.state.weight > 0.0 {
            let w = dual_from_maximizer(&(&self.state.u_acc / self.state.weight), self.prob);
            if let Ok(x) = linalg::inverse_spd(&w, "W") {
                let gap = gap_from_inverse(&x, self.prob);
                if gap < best.gap {
                    best = Certificate { w, x, gap };
                }
            }
        }
        Ok(best)
    }

    fn estimate(&self, cert: Certificate) -> Estimate {
        Estimate {
            w: cert.w,
            x: cert.x,
            gap: cert.gap,
            iterations: self.state.k,
            solver: SolverKind::Nesterov,
        }
    }

    pub fn run(&mut self) -> Result<Estimate> {
        let mut last = None;
        while self.state.k < self.max_steps {
            self.step()?;
            if self.state.k.is_multiple_of(self.gap_check_every) || self.state.k == self.max_steps {
                let cert = self.certificate()?;
                log::trace!("nesterov step {} gap {:.3e}", self.state.k, cert.gap);
                if cert.gap <= self.prob.epsilon() {
                    return Ok(self.estimate(cert));
                }
                last = Some(cert);
            }
        }
        let cert = match last {
            Some(c) => c,
            None => self.certificate()?,
        };
        let gap = cert.gap;
        let iterations = self.state.k;
        Err(CovselError::Convergence {
            estimate: Box::new(self.estimate(cert)),
            gap,
            iterations,
        })
    }
}

pub fn solve_nesterov(prob: &Problem, opts: &NesterovOptions) -> Result<Estimate> {
    NesterovSolver::new(prob, opts)?.run()
}

/// Eigenvalues of `x`, for feasibility checks.
pub fn spectrum(x: &DMatrix<f64>) -> DVector<f64> {
    linalg::sym_eigenvalues(x)
}
