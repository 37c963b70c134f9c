use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{nullspace, rank, Tolerances};

/// `{x : A_eq x = b_eq, A_le x <= b_le}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_le: DMatrix<f64>,
    pub b_le: DVector<f64>,
}

fn append_row(m: &DMatrix<f64>, row: &DVector<f64>) -> DMatrix<f64> {
    let r = m.nrows();
    let mut out = m.clone().insert_row(r, 0.0);
    out.row_mut(r).copy_from(&row.transpose());
    out
}

fn append_entry(v: &DVector<f64>, x: f64) -> DVector<f64> {
    let n = v.len();
    v.clone().insert_row(n, x)
}

impl Polyhedron {
    /// All of ℝⁿ.
    pub fn new(n: usize) -> Self {
        Polyhedron {
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_le: DMatrix::zeros(0, n),
            b_le: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.a_eq.ncols()
    }

    pub fn n_constraints(&self) -> usize {
        self.a_eq.nrows() + self.a_le.nrows()
    }

    pub fn push_eq(&mut self, row: DVector<f64>, rhs: f64) {
        assert_eq!(row.len(), self.dim(), "row length");
        self.a_eq = append_row(&self.a_eq, &row);
        self.b_eq = append_entry(&self.b_eq, rhs);
    }

    pub fn push_le(&mut self, row: DVector<f64>, rhs: f64) {
        assert_eq!(row.len(), self.dim(), "row length");
        self.a_le = append_row(&self.a_le, &row);
        self.b_le = append_entry(&self.b_le, rhs);
    }

    pub fn with_eq(mut self, row: DVector<f64>, rhs: f64) -> Self {
        self.push_eq(row, rhs);
        self
    }

    pub fn with_le(mut self, row: DVector<f64>, rhs: f64) -> Self {
        self.push_le(row, rhs);
        self
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let eq = (&self.a_eq * x - &self.b_eq).amax();
        let le = (&self.a_le * x - &self.b_le).iter().fold(0.0f64, |m, &v| m.max(v));
        eq.max(le)
    }

    /// Feasible within `slack`.
    pub fn contains(&self, x: &DVector<f64>, slack: f64) -> bool {
        self.violation(x) <= slack
    }

    /// True when the polyhedron is a linear subspace (homogeneous with no
    /// inequalities).
    pub fn is_subspace(&self) -> bool {
        self.a_le.nrows() == 0 && self.b_eq.iter().all(|&b| b == 0.0)
    }
}

/// `P = conv(vertices) + cone(rays) + span(lines)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Generators {
    pub vertices: Vec<DVector<f64>>,
    /// Unit-norm extreme rays of the pointed part.
    pub rays: Vec<DVector<f64>>,
    /// Orthonormal basis of the lineality space.
    pub lines: Vec<DVector<f64>>,
}

impl Generators {
    /// Rays together with both signs of every line: a conic generating set
    /// of the recession cone.
    pub fn conic_directions(&self) -> Vec<DVector<f64>> {
        let mut out = self.rays.clone();
        for l in &self.lines {
            out.push(l.clone());
            out.push(-l);
        }
        out
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.is_empty() && self.lines.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("polyhedron too large for exhaustive enumeration ({constraints} constraints, dimension {dim})")]
    TooLarge { constraints: usize, dim: usize },
    #[error("polyhedron is empty")]
    Infeasible,
}

pub const MAX_CONSTRAINTS: usize = 24;
pub const MAX_DIM: usize = 12;

fn push_unique(list: &mut Vec<DVector<f64>>, v: DVector<f64>, tol: f64) {
    if !list.iter().any(|w| (w - &v).norm() <= tol * (1.0 + v.norm())) {
        list.push(v);
    }
}

fn solve_least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>, tau_rank: f64) -> Option<DVector<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(rhs, (tau_rank * smax).max(f64::MIN_POSITIVE)).ok()
}

/// Exhaustive basis-subset enumeration of vertices, extreme rays and the
/// lineality space.
pub fn enumerate_generators(p: &Polyhedron, tol: &Tolerances) -> Result<Generators, GeneratorError> {
    let n = p.dim();
    let total = p.n_constraints();
    if total > MAX_CONSTRAINTS || n > MAX_DIM {
        return Err(GeneratorError::TooLarge { constraints: total, dim: n });
    }
    let lineality = if total == 0 {
        DMatrix::identity(n, n)
    } else {
        let all = DMatrix::from_rows(
            &(0..p.a_eq.nrows())
                .map(|i| p.a_eq.row(i).into_owned())
                .chain((0..p.a_le.nrows()).map(|i| p.a_le.row(i).into_owned()))
                .collect::<Vec<_>>(),
        );
        nullspace(&all, tol.tau_rank)
    };
    let lines: Vec<DVector<f64>> = lineality.column_iter().map(|c| c.into_owned()).collect();

    // Restrict to the orthogonal complement of the lineality space.
    let mut eq_rows: Vec<_> = (0..p.a_eq.nrows()).map(|i| p.a_eq.row(i).into_owned()).collect();
    let mut eq_rhs: Vec<f64> = p.b_eq.iter().copied().collect();
    for l in &lines {
        eq_rows.push(l.transpose());
        eq_rhs.push(0.0);
    }
    let eq_m = if eq_rows.is_empty() { DMatrix::zeros(0, n) } else { DMatrix::from_rows(&eq_rows) };
    let r_eq = rank(&eq_m, tol.tau_rank);
    let need = n - r_eq.min(n);
    let n_le = p.a_le.nrows();
    let le_rows: Vec<_> = (0..n_le).map(|i| p.a_le.row(i).into_owned()).collect();

    let mut vertices = Vec::new();
    if need <= n_le {
        for subset in (0..n_le).combinations(need) {
            let mut rows = eq_rows.clone();
            let mut rhs = eq_rhs.clone();
            for &i in &subset {
                rows.push(le_rows[i].clone());
                rhs.push(p.b_le[i]);
            }
            if rows.is_empty() {
                // n = 0.
                vertices.push(DVector::zeros(n));
                continue;
            }
            let m = DMatrix::from_rows(&rows);
            if rank(&m, tol.tau_rank) != n {
                continue;
            }
            let rhs = DVector::from_vec(rhs);
            let Some(x) = solve_least_squares(&m, &rhs, tol.tau_rank) else { continue };
            let scale = 1.0 + x.amax() + rhs.amax();
            if (&m * &x - &rhs).amax() > tol.tau_feas * scale {
                continue;
            }
            if p.contains(&x, tol.tau_feas * scale) {
                push_unique(&mut vertices, x, tol.tau_rank);
            }
        }
    }
    if vertices.is_empty() {
        return Err(GeneratorError::Infeasible);
    }

    let mut rays = Vec::new();
    if need >= 1 && need - 1 <= n_le {
        for subset in (0..n_le).combinations(need - 1) {
            let mut rows = eq_rows.clone();
            for &i in &subset {
                rows.push(le_rows[i].clone());
            }
            let m = if rows.is_empty() { DMatrix::zeros(0, n) } else { DMatrix::from_rows(&rows) };
            let ns = nullspace(&m, tol.tau_rank);
            if ns.ncols() != 1 {
                continue;
            }
            let d = ns.column(0).normalize();
            for cand in [d.clone(), -d] {
                let worst = (&p.a_le * &cand).iter().fold(0.0f64, |acc, &v| acc.max(v));
                if worst <= tol.tau_feas {
                    push_unique(&mut rays, cand, tol.tau_rank);
                }
            }
        }
    }
    Ok(Generators { vertices, rays, lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn nonneg_quadrant() -> Polyhedron {
        Polyhedron::new(2).with_le(v(&[-1.0, 0.0]), 0.0).with_le(v(&[0.0, -1.0]), 0.0)
    }

    fn contains_vec(list: &[DVector<f64>], x: &[f64]) -> bool {
        list.iter().any(|w| (w - v(x)).norm() < 1e-10)
    }

    #[test]
    fn simplex_vertices() {
        let p = nonneg_quadrant().with_eq(v(&[1.0, 1.0]), 1.0);
        let g = enumerate_generators(&p, &Tolerances::default()).unwrap();
        assert_eq!(g.vertices.len(), 2);
        assert!(contains_vec(&g.vertices, &[1.0, 0.0]) && contains_vec(&g.vertices, &[0.0, 1.0]));
        assert!(g.is_bounded());
    }

    #[test]
    fn quadrant_rays() {
        let g = enumerate_generators(&nonneg_quadrant(), &Tolerances::default()).unwrap();
        assert_eq!(g.vertices.len(), 1);
        assert!(contains_vec(&g.vertices, &[0.0, 0.0]));
        assert_eq!(g.rays.len(), 2);
        assert!(contains_vec(&g.rays, &[1.0, 0.0]) && contains_vec(&g.rays, &[0.0, 1.0]));
        assert!(g.lines.is_empty());
    }

    #[test]
    fn diagonal_ray() {
        let p = Polyhedron::new(2).with_eq(v(&[1.0, -1.0]), 0.0).with_le(v(&[-1.0, 0.0]), 0.0);
        let g = enumerate_generators(&p, &Tolerances::default()).unwrap();
        assert_eq!(g.vertices.len(), 1);
        let s = 0.5f64.sqrt();
        assert_eq!(g.rays.len(), 1);
        assert!(contains_vec(&g.rays, &[s, s]));
    }

    #[test]
    fn halfspace_has_lines() {
        let p = Polyhedron::new(3).with_le(v(&[-1.0, 0.0, 0.0]), 0.0);
        let g = enumerate_generators(&p, &Tolerances::default()).unwrap();
        assert_eq!(g.lines.len(), 2);
        assert_eq!(g.rays.len(), 1);
        assert!(contains_vec(&g.rays, &[1.0, 0.0, 0.0]));
        let whole = enumerate_generators(&Polyhedron::new(2), &Tolerances::default()).unwrap();
        assert_eq!(whole.lines.len(), 2);
    }

    #[test]
    fn empty_and_too_large() {
        let p = Polyhedron::new(1).with_le(v(&[1.0]), -1.0).with_le(v(&[-1.0]), -1.0);
        assert_eq!(enumerate_generators(&p, &Tolerances::default()), Err(GeneratorError::Infeasible));
        let mut p = Polyhedron::new(2);
        for _ in 0..25 {
            p.push_le(v(&[1.0, 0.0]), 1.0);
        }
        assert!(matches!(enumerate_generators(&p, &Tolerances::default()), Err(GeneratorError::TooLarge { .. })));
    }
}
