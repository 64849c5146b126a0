use crate::bcd::{solve_bcd, BcdOptions};
use crate::error::Result;
use crate::model::{Estimate, Problem, SolverKind};
use crate::nesterov::{solve_nesterov, NesterovOptions};

/// A solver together with its options.
#[derive(Debug, Clone, Copy)]
pub enum Solver {
    Bcd(BcdOptions),
    Nesterov(NesterovOptions),
}

impl Solver {
    pub fn kind(&self) -> SolverKind {
        match self {
            Solver::Bcd(_) => SolverKind::Bcd,
            Solver::Nesterov(_) => SolverKind::Nesterov,
        }
    }

    pub fn solve(&self, prob: &Problem) -> Result<Estimate> {
        match self {
            Solver::Bcd(opts) => solve_bcd(prob, opts),
            Solver::Nesterov(opts) => solve_nesterov(prob, opts),
        }
    }
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Bcd(BcdOptions::default())
    }
}

impl From<SolverKind> for Solver {
    /// `Analytic` has no iterative counterpart and maps to BCD.
    fn from(kind: SolverKind) -> Self {
        match kind {
            SolverKind::Nesterov => Solver::Nesterov(NesterovOptions::default()),
            SolverKind::Bcd | SolverKind::Analytic => Solver::Bcd(BcdOptions::default()),
        }
    }
}
