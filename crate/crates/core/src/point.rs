use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::numeric::Tolerances;
use crate::problem::{Bipartition, BranchProblem, Constraint, IndexSets, MpscProblem, ProblemError};

/// A feasible point with its index sets, bipartitions and constraint
/// gradients evaluated once.
#[derive(Debug, Clone)]
pub struct ActivePoint<'a> {
    pub problem: &'a MpscProblem,
    pub x: Vec<f64>,
    pub tol: Tolerances,
    pub sets: IndexSets,
    pub bipartitions: Vec<Bipartition>,
    pub grad_f: DVector<f64>,
    grads: HashMap<Constraint, DVector<f64>>,
}

impl<'a> ActivePoint<'a> {
    pub fn new(problem: &'a MpscProblem, x: &[f64], tol: &Tolerances) -> Result<Self, ProblemError> {
        let sets = problem.index_sets(x, tol)?;
        let bipartitions = sets.bipartitions()?;
        let mut grads = HashMap::new();
        let all = (0..problem.m())
            .map(Constraint::G)
            .chain((0..problem.p()).map(Constraint::H))
            .chain((0..problem.l()).flat_map(|k| [Constraint::SwitchG(k), Constraint::SwitchH(k)]));
        for c in all {
            grads.insert(c, problem.constraint(c).gradient(x)?);
        }
        Ok(ActivePoint {
            problem,
            x: x.to_vec(),
            tol: *tol,
            grad_f: problem.f.gradient(x)?,
            sets,
            bipartitions,
            grads,
        })
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn grad(&self, c: Constraint) -> &DVector<f64> {
        &self.grads[&c]
    }

    /// Gradients of `cs` stacked as rows.
    pub fn rows(&self, cs: &[Constraint]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(cs.len(), self.n());
        for (r, c) in cs.iter().enumerate() {
            m.row_mut(r).copy_from(&self.grad(*c).transpose());
        }
        m
    }

    pub fn branch(&self, b: &Bipartition) -> BranchProblem<'a> {
        BranchProblem::local(self.problem, &self.sets, b)
    }

    /// Equality-type constraints of the local branch for `b`.
    pub fn branch_equalities(&self, b: &Bipartition) -> Vec<Constraint> {
        self.branch(b).equalities()
    }

    pub fn active_inequalities(&self) -> Vec<Constraint> {
        self.sets.i_g.iter().map(|&i| Constraint::G(i)).collect()
    }
}
