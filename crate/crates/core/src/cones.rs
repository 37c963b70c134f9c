//! Cross-set cones, piecewise-polyhedral linearization and critical cones,
//! the critical subspace, and sampled tangent directions.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{enumerate_generators, nullspace, LinearProgram, LpOutcome, Polyhedron, Sense, VarKind};
use crate::par;
use crate::point::ActivePoint;
use crate::problem::{Bipartition, Constraint};
use crate::solver::{project_branch, SolveConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("({a}, {b}) is not in the cross set")]
    NotInCross { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossCase {
    AZeroBNonzero,
    ANonzeroBZero,
    BothZero,
}

/// Closed cones in ℝ² that occur for the cross set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneCone {
    /// {0}×ℝ
    VerticalAxis,
    /// ℝ×{0}
    HorizontalAxis,
    /// The cross set itself.
    Cross,
    Origin,
}

impl PlaneCone {
    pub fn contains(self, v: (f64, f64), tol: f64) -> bool {
        let (a, b) = v;
        match self {
            PlaneCone::VerticalAxis => a.abs() <= tol,
            PlaneCone::HorizontalAxis => b.abs() <= tol,
            PlaneCone::Cross => a.abs() <= tol || b.abs() <= tol,
            PlaneCone::Origin => a.abs() <= tol && b.abs() <= tol,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PlaneCone::VerticalAxis => "{0}xR",
            PlaneCone::HorizontalAxis => "Rx{0}",
            PlaneCone::Cross => "S",
            PlaneCone::Origin => "{(0,0)}",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossConeKind {
    pub case: CrossCase,
    pub tangent: PlaneCone,
    pub frechet_normal: PlaneCone,
    pub limiting_normal: PlaneCone,
}

/// Tangent, Fréchet normal and limiting normal cones of the cross set at
/// (a, b); zero tests use `tau_act`.
pub fn cross_cones(a: f64, b: f64, tau_act: f64, tau_feas: f64) -> Result<CrossConeKind, ConeError> {
    if (a * b).abs() > tau_feas {
        return Err(ConeError::NotInCross { a, b });
    }
    let (za, zb) = (a.abs() <= tau_act, b.abs() <= tau_act);
    Ok(match (za, zb) {
        (true, false) => CrossConeKind {
            case: CrossCase::AZeroBNonzero,
            tangent: PlaneCone::VerticalAxis,
            frechet_normal: PlaneCone::HorizontalAxis,
            limiting_normal: PlaneCone::HorizontalAxis,
        },
        (false, true) => CrossConeKind {
            case: CrossCase::ANonzeroBZero,
            tangent: PlaneCone::HorizontalAxis,
            frechet_normal: PlaneCone::VerticalAxis,
            limiting_normal: PlaneCone::VerticalAxis,
        },
        (true, true) => CrossConeKind {
            case: CrossCase::BothZero,
            tangent: PlaneCone::Cross,
            frechet_normal: PlaneCone::Origin,
            limiting_normal: PlaneCone::Cross,
        },
        (false, false) => return Err(ConeError::NotInCross { a, b }),
    })
}

/// One polyhedral cone of a union, tagged with the bipartition that
/// produced it.
#[derive(Debug, Clone)]
pub struct ConePiece {
    pub cone: Polyhedron,
    pub tag: String,
}

#[derive(Debug, Clone)]
pub struct ConeUnion {
    pub dim: usize,
    pub pieces: Vec<ConePiece>,
}

impl ConeUnion {
    /// Index of the first piece containing `d` within
    /// `tau_feas·(1 + ‖d‖)`.
    pub fn member(&self, d: &DVector<f64>, tau_feas: f64) -> Option<usize> {
        let slack = tau_feas * (1.0 + d.norm());
        self.pieces.iter().position(|p| p.cone.contains(d, slack))
    }

    /// Index of the first piece whose ∞-norm distance to the unit vector
    /// along `d` is at most `sin(angle)`.
    pub fn angular_member(&self, d: &DVector<f64>, angle: f64, tau_feas: f64) -> Option<usize> {
        let norm = d.norm();
        if norm == 0.0 {
            return self.member(d, tau_feas);
        }
        let u = d / norm;
        let limit = angle.sin();
        self.pieces.iter().position(|p| distance_inf(&p.cone, &u, tau_feas) <= limit)
    }
}

/// ∞-norm distance from `d` to a polyhedral cone, by LP.
pub fn distance_inf(cone: &Polyhedron, d: &DVector<f64>, tau_feas: f64) -> f64 {
    let n = cone.dim();
    if cone.contains(d, tau_feas * (1.0 + d.norm())) {
        return 0.0;
    }
    // Variables (e, t): min t s.t. |d - e| ≤ t, e in the cone.
    let mut lp = LinearProgram::new(n + 1);
    lp.set_kind(n, VarKind::Nonneg);
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    lp.set_objective(c);
    for j in 0..n {
        let mut row = DVector::zeros(n + 1);
        row[j] = -1.0;
        row[n] = -1.0;
        lp.add_le(row.clone(), -d[j]);
        row[j] = 1.0;
        lp.add_le(row, d[j]);
    }
    let pad = |r: DVector<f64>| DVector::from_iterator(n + 1, r.iter().copied().chain([0.0]));
    for i in 0..cone.a_eq.nrows() {
        lp.add_eq(pad(cone.a_eq.row(i).transpose()), cone.b_eq[i]);
    }
    for i in 0..cone.a_le.nrows() {
        lp.add_le(pad(cone.a_le.row(i).transpose()), cone.b_le[i]);
    }
    match lp.solve(Sense::Min, tau_feas) {
        Ok(LpOutcome::Optimal { value, .. }) => value,
        _ => f64::INFINITY,
    }
}

fn piece(pt: &ActivePoint<'_>, le: &[Constraint], eq: &[Constraint]) -> Polyhedron {
    let mut cone = Polyhedron::new(pt.n());
    for c in eq {
        cone.push_eq(pt.grad(*c).clone(), 0.0);
    }
    for c in le {
        cone.push_le(pt.grad(*c).clone(), 0.0);
    }
    cone
}

/// Linearization cone of the local branch for `b`.
pub fn branch_linearization(pt: &ActivePoint<'_>, b: &Bipartition) -> Polyhedron {
    piece(pt, &pt.active_inequalities(), &pt.branch_equalities(b))
}

/// One piece per bipartition: ∇g d ≤ 0 on I_g, ∇h d = 0, ∇G d = 0 on
/// I_G ∪ β1, ∇H d = 0 on I_H ∪ β2.
pub fn linearization_cone(pt: &ActivePoint<'_>) -> ConeUnion {
    let le = pt.active_inequalities();
    ConeUnion {
        dim: pt.n(),
        pieces: pt
            .bipartitions
            .iter()
            .map(|b| ConePiece { cone: piece(pt, &le, &pt.branch_equalities(b)), tag: b.label() })
            .collect(),
    }
}

/// Linearization pieces cut by ∇f d ≤ 0, or, given inequality
/// multipliers, with ∇g_i d = 0 wherever λ_i > 0.
pub fn critical_cone(pt: &ActivePoint<'_>, lambda: Option<&[f64]>) -> ConeUnion {
    let mut le = Vec::new();
    let mut eq_extra = Vec::new();
    for &i in &pt.sets.i_g {
        match lambda {
            Some(l) if l[i] > pt.tol.tau_feas => eq_extra.push(Constraint::G(i)),
            _ => le.push(Constraint::G(i)),
        }
    }
    ConeUnion {
        dim: pt.n(),
        pieces: pt
            .bipartitions
            .iter()
            .map(|b| {
                let mut eq = pt.branch_equalities(b);
                eq.extend(eq_extra.iter().copied());
                let mut cone = piece(pt, &le, &eq);
                if lambda.is_none() {
                    cone.push_le(pt.grad_f.clone(), 0.0);
                }
                ConePiece { cone, tag: b.label() }
            })
            .collect(),
    }
}

/// Orthonormal basis of {d : ∇g d = 0 on I_g, ∇h d = 0, ∇G d = 0 on
/// I_G ∪ I_GH, ∇H d = 0 on I_H ∪ I_GH}.
pub fn critical_subspace(pt: &ActivePoint<'_>) -> DMatrix<f64> {
    let rows = pt.rows(&pt.sets.full_family());
    nullspace(&rows, pt.tol.tau_rank)
}

/// Generator lists for every piece (vertices, rays, lines) for printing.
pub fn describe_union(u: &ConeUnion, tol: &crate::numeric::Tolerances) -> Vec<PieceDescription> {
    u.pieces
        .iter()
        .map(|p| match enumerate_generators(&p.cone, tol) {
            Ok(g) => PieceDescription {
                tag: p.tag.clone(),
                rays: g.rays.iter().map(|r| r.iter().copied().collect()).collect(),
                lines: g.lines.iter().map(|r| r.iter().copied().collect()).collect(),
                note: None,
            },
            Err(e) => PieceDescription { tag: p.tag.clone(), rays: vec![], lines: vec![], note: Some(e.to_string()) },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceDescription {
    pub tag: String,
    pub rays: Vec<Vec<f64>>,
    pub lines: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl PieceDescription {
    pub fn is_origin(&self) -> bool {
        self.note.is_none() && self.rays.is_empty() && self.lines.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TangentSample {
    pub dir: DVector<f64>,
    /// Index into the point's bipartition list.
    pub branch: usize,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct TangentCloud {
    pub samples: Vec<TangentSample>,
    pub attempts: usize,
}

impl TangentCloud {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Random unit vector in ℝⁿ.
pub fn random_unit(rng: &mut impl rand::Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        let norm: f64 = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Per branch, project perturbed points x̄ + r·u onto the branch feasible
/// set and keep the unit directions of feasible projections. Radii cycle
/// through the three sampling radii.
pub fn sample_tangent_directions(pt: &ActivePoint<'_>) -> TangentCloud {
    let tol = pt.tol;
    let n = pt.n();
    let cfg = SolveConfig { tau_feas: tol.tau_feas, seed: tol.seed, ..SolveConfig::default() };
    let radii = tol.radii();
    let nb = pt.bipartitions.len();
    let tasks = nb * tol.n_samples;
    let xbar = DVector::from_column_slice(&pt.x);
    let branches: Vec<_> = pt.bipartitions.iter().map(|b| pt.branch(b)).collect();
    let out = par::map_range(tasks, |task| {
        let (bi, si) = (task / tol.n_samples, task % tol.n_samples);
        let mut rng = par::rng(tol.seed, par::stream(10, task as u32));
        let r = radii[si % 3];
        let u = random_unit(&mut rng, n);
        let start = &xbar + u * r;
        let proj = project_branch(&branches[bi], start.as_slice(), &cfg).ok()?;
        if !proj.feasible {
            return None;
        }
        let step = DVector::from_column_slice(&proj.y) - &xbar;
        let len = step.norm();
        if len <= 0.05 * r {
            return None;
        }
        Some(TangentSample { dir: step / len, branch: bi, radius: r })
    });
    TangentCloud { samples: out.into_iter().flatten().collect(), attempts: tasks }
}
