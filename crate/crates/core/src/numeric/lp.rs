use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::Polyhedron;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Free,
    Nonneg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Infeasible,
    Optimal { x: DVector<f64>, value: f64 },
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }

    pub fn point(&self) -> Option<&DVector<f64>> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

/// A linear program over variables that are each free or nonnegative.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n: usize,
    kinds: Vec<VarKind>,
    c: DVector<f64>,
    eq: Vec<(DVector<f64>, f64)>,
    le: Vec<(DVector<f64>, f64)>,
}

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        LinearProgram {
            n,
            kinds: vec![VarKind::Free; n],
            c: DVector::zeros(n),
            eq: Vec::new(),
            le: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn set_kind(&mut self, i: usize, kind: VarKind) -> &mut Self {
        self.kinds[i] = kind;
        self
    }

    pub fn set_objective(&mut self, c: DVector<f64>) -> &mut Self {
        self.c = c;
        self
    }

    pub fn add_eq(&mut self, row: DVector<f64>, rhs: f64) -> &mut Self {
        self.eq.push((row, rhs));
        self
    }

    pub fn add_le(&mut self, row: DVector<f64>, rhs: f64) -> &mut Self {
        self.le.push((row, rhs));
        self
    }

    /// Solve with `tau_feas` as the phase-one acceptance threshold.
    pub fn solve(&self, sense: Sense, tau_feas: f64) -> Result<LpOutcome, LpError> {
        if self.c.len() != self.n {
            return Err(LpError::Dimension(format!("objective has {} entries, expected {}", self.c.len(), self.n)));
        }
        for (row, _) in self.eq.iter().chain(&self.le) {
            if row.len() != self.n {
                return Err(LpError::Dimension(format!("row has {} entries, expected {}", row.len(), self.n)));
            }
        }
        // Column layout: one or two columns per variable, then one slack per `le` row.
        let mut col_of = Vec::with_capacity(self.n);
        let mut ncols = 0;
        for k in &self.kinds {
            col_of.push(ncols);
            ncols += if *k == VarKind::Free { 2 } else { 1 };
        }
        let nvar_cols = ncols;
        ncols += self.le.len();
        let m = self.eq.len() + self.le.len();
        let mut a = DMatrix::zeros(m, ncols);
        let mut b = DVector::zeros(m);
        for (i, (row, rhs)) in self.eq.iter().chain(&self.le).enumerate() {
            for j in 0..self.n {
                a[(i, col_of[j])] = row[j];
                if self.kinds[j] == VarKind::Free {
                    a[(i, col_of[j] + 1)] = -row[j];
                }
            }
            b[i] = *rhs;
        }
        for k in 0..self.le.len() {
            a[(self.eq.len() + k, nvar_cols + k)] = 1.0;
        }
        let sign = match sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
            Sense::Feasibility => 0.0,
        };
        let mut c = DVector::zeros(ncols);
        for j in 0..self.n {
            c[col_of[j]] = sign * self.c[j];
            if self.kinds[j] == VarKind::Free {
                c[col_of[j] + 1] = -sign * self.c[j];
            }
        }
        Ok(match simplex_standard(a, b, &c, tau_feas)? {
            Standard::Infeasible => LpOutcome::Infeasible,
            Standard::Unbounded => LpOutcome::Unbounded,
            Standard::Optimal(y) => {
                let x = DVector::from_iterator(
                    self.n,
                    (0..self.n).map(|j| match self.kinds[j] {
                        VarKind::Free => y[col_of[j]] - y[col_of[j] + 1],
                        VarKind::Nonneg => y[col_of[j]],
                    }),
                );
                let value = if sense == Sense::Feasibility { 0.0 } else { self.c.dot(&x) };
                LpOutcome::Optimal { x, value }
            }
        })
    }
}

/// Optimize `c` over the polyhedron `p` (all variables free).
pub fn lp_solve(c: &DVector<f64>, p: &Polyhedron, sense: Sense, tau_feas: f64) -> Result<LpOutcome, LpError> {
    if c.len() != p.dim() {
        return Err(LpError::Dimension(format!("objective has {} entries, polyhedron dimension {}", c.len(), p.dim())));
    }
    let mut lp = LinearProgram::new(p.dim());
    lp.set_objective(c.clone());
    for i in 0..p.a_eq.nrows() {
        lp.add_eq(p.a_eq.row(i).transpose(), p.b_eq[i]);
    }
    for i in 0..p.a_le.nrows() {
        lp.add_le(p.a_le.row(i).transpose(), p.b_le[i]);
    }
    lp.solve(sense, tau_feas)
}

enum Standard {
    Infeasible,
    Unbounded,
    Optimal(DVector<f64>),
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-11;
const MAX_ITER: usize = 200_000;

struct Tableau {
    /// Constraint rows followed by the objective row; last column is the rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.t.nrows() - 1
    }

    fn rhs(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.t[(r, col)];
        let mut row = self.t.row(r).into_owned();
        row /= p;
        self.t.row_mut(r).copy_from(&row);
        for i in 0..self.t.nrows() {
            if i != r {
                let f = self.t[(i, col)];
                if f != 0.0 {
                    for j in 0..self.t.ncols() {
                        self.t[(i, j)] -= f * row[j];
                    }
                    self.t[(i, col)] = 0.0;
                }
            }
        }
        self.basis[r] = col;
    }

    /// Bland's rule on columns `0..limit`. Returns false if unbounded.
    fn run(&mut self, limit: usize) -> Result<bool, LpError> {
        let obj = self.rows();
        let rhs = self.rhs();
        for _ in 0..MAX_ITER {
            let scale = (0..limit).map(|j| self.t[(obj, j)].abs()).fold(1.0, f64::max);
            let Some(enter) = (0..limit).find(|&j| self.t[(obj, j)] < -COST_EPS * scale) else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..obj {
                let a = self.t[(i, enter)];
                if a > PIVOT_EPS {
                    let ratio = self.t[(i, rhs)].max(0.0) / a;
                    best = match best {
                        None => Some((ratio, i)),
                        Some((br, bi)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((ratio, i))
                            } else {
                                Some((br, bi))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(false),
                Some((_, r)) => self.pivot(r, enter),
            }
        }
        Err(LpError::IterationLimit)
    }
}

/// min cᵀx subject to Ax = b, x ≥ 0, by two-phase simplex with Bland's rule.
fn simplex_standard(mut a: DMatrix<f64>, mut b: DVector<f64>, c: &DVector<f64>, tau_feas: f64) -> Result<Standard, LpError> {
    let (m, n) = a.shape();
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            a.row_mut(i).neg_mut();
        }
    }
    let bscale = b.amax().max(1.0);

    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    t.view_mut((0, 0), (m, n)).copy_from(&a);
    for i in 0..m {
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = b[i];
    }
    for j in 0..n {
        t[(m, j)] = -a.column(j).sum();
    }
    t[(m, n + m)] = -b.sum();
    let mut tab = Tableau { t, basis: (n..n + m).collect() };
    tab.run(n + m)?;
    if -tab.t[(m, n + m)] > tau_feas * bscale {
        return Ok(Standard::Infeasible);
    }

    // Drive artificials out of the basis; drop rows that cannot pivot.
    let mut keep = Vec::with_capacity(m);
    for i in 0..m {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.t[(i, j)].abs() > PIVOT_EPS) {
                Some(j) => {
                    tab.pivot(i, j);
                    keep.push(i);
                }
                None => {}
            }
        } else {
            keep.push(i);
        }
    }
    let m2 = keep.len();
    let mut t2 = DMatrix::zeros(m2 + 1, n + 1);
    let mut basis = Vec::with_capacity(m2);
    for (r, &i) in keep.iter().enumerate() {
        for j in 0..n {
            t2[(r, j)] = tab.t[(i, j)];
        }
        t2[(r, n)] = tab.t[(i, n + m)];
        basis.push(tab.basis[i]);
    }
    for j in 0..n {
        t2[(m2, j)] = c[j];
    }
    for (r, &bj) in basis.iter().enumerate() {
        let cb = c[bj];
        if cb != 0.0 {
            for j in 0..=n {
                t2[(m2, j)] -= cb * t2[(r, j)];
            }
        }
    }
    let mut tab = Tableau { t: t2, basis };
    if !tab.run(n)? {
        return Ok(Standard::Unbounded);
    }
    let mut x = DVector::zeros(n);
    for (r, &bj) in tab.basis.iter().enumerate() {
        x[bj] = tab.t[(r, n)].max(0.0);
    }
    Ok(Standard::Optimal(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn single_multiplier_feasibility() {
        let mut lp = LinearProgram::new(1);
        lp.set_kind(0, VarKind::Nonneg).add_eq(v(&[-1.0]), -1.0);
        let out = lp.solve(Sense::Feasibility, 1e-8).unwrap();
        assert!((out.point().unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_multiplier_system() {
        let mut lp = LinearProgram::new(1);
        lp.set_kind(0, VarKind::Nonneg).add_eq(v(&[-1.0]), -1.0).add_eq(v(&[1.0]), 3.0);
        assert_eq!(lp.solve(Sense::Feasibility, 1e-8).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn min_over_simplex() {
        let p = Polyhedron::new(2)
            .with_le(v(&[-1.0, 0.0]), 0.0)
            .with_le(v(&[0.0, -1.0]), 0.0)
            .with_eq(v(&[1.0, 1.0]), 1.0);
        match lp_solve(&v(&[1.0, 0.0]), &p, Sense::Min, 1e-8).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!(value.abs() < 1e-12);
                assert!((x - v(&[0.0, 1.0])).norm() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        match lp_solve(&v(&[1.0, 0.0]), &p, Sense::Max, 1e-8).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_and_free() {
        let p = Polyhedron::new(1);
        assert_eq!(lp_solve(&v(&[1.0]), &p, Sense::Min, 1e-8).unwrap(), LpOutcome::Unbounded);
        let p = Polyhedron::new(1).with_le(v(&[-1.0]), 3.0);
        match lp_solve(&v(&[1.0]), &p, Sense::Min, 1e-8).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value + 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.add_eq(v(&[1.0, 1.0]), 1.0).add_eq(v(&[2.0, 2.0]), 2.0).set_objective(v(&[1.0, 2.0]));
        lp.set_kind(0, VarKind::Nonneg).set_kind(1, VarKind::Nonneg);
        match lp.solve(Sense::Min, 1e-8).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 1.0).abs() < 1e-12);
                assert!((x - v(&[1.0, 0.0])).norm() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut lp = LinearProgram::new(2);
        lp.add_eq(v(&[1.0]), 1.0);
        assert!(matches!(lp.solve(Sense::Feasibility, 1e-8), Err(LpError::Dimension(_))));
    }
}
