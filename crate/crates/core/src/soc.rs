//! Second-order necessary conditions at S-stationary points.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::cones::{critical_cone, critical_subspace, random_unit};
use crate::numeric::{eig_sym, enumerate_generators, Polyhedron, Tolerances};
use crate::par;
use crate::point::ActivePoint;
use crate::stationarity::{lagrangian_hessian_parts, s_multiplier_polyhedron, Multipliers, StationarityError};
use crate::verdict::{Mode, Status};

/// Pieces with fewer admitted directions than this give UNKNOWN.
pub const MIN_ADMITTED: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SocKind {
    Ssonc,
    Wsonc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceMethod {
    SubspaceEig,
    GeneratorSweep,
    SphereSampling,
}

/// Smallest observed value of dᵀQd over unit directions of a cone.
#[derive(Debug, Clone)]
pub struct QuadMin {
    /// Attained by `direction`; +∞ when the cone is {0}.
    pub value: f64,
    pub direction: Option<DVector<f64>>,
    pub admitted: usize,
    /// The cone is a subspace and the value is its exact minimum.
    pub exact: bool,
    pub method: PieceMethod,
}

fn quad(q: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    d.dot(&(q * d))
}

fn subspace_min(q: &DMatrix<f64>, basis: &DMatrix<f64>) -> Option<(f64, DVector<f64>)> {
    if basis.ncols() == 0 {
        return None;
    }
    let (vals, vecs) = eig_sym(&(basis.transpose() * q * basis)).ok()?;
    let d = basis * vecs.column(0);
    let d = &d / d.norm();
    Some((vals[0], d))
}

/// Estimate min{dᵀQd : d in the cone, ‖d‖ = 1}. Exact for subspaces;
/// otherwise an attained upper bound from the lineality eigencheck,
/// generators and their pairwise midpoints, random conic combinations, and
/// sphere samples filtered by membership when n ≤ 4.
pub fn quadform_min_over_cone(q: &DMatrix<f64>, cone: &Polyhedron, tol: &Tolerances, stream: u32) -> QuadMin {
    let n = cone.dim();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let consider = |v: f64, d: DVector<f64>, best: &mut Option<(f64, DVector<f64>)>| {
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            *best = Some((v, d));
        }
    };
    let mut admitted = 0;
    let gens = enumerate_generators(cone, tol).ok();
    if let Some(g) = &gens {
        let lines = if g.lines.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&g.lines) };
        if g.rays.is_empty() {
            let m = subspace_min(q, &lines);
            let admitted = lines.ncols();
            return match m {
                Some((v, d)) => QuadMin { value: v, direction: Some(d), admitted, exact: true, method: PieceMethod::SubspaceEig },
                None => QuadMin { value: f64::INFINITY, direction: None, admitted: 0, exact: true, method: PieceMethod::SubspaceEig },
            };
        }
        if let Some((v, d)) = subspace_min(q, &lines) {
            consider(v, d, &mut best);
            admitted += 1;
        }
        let dirs = g.conic_directions();
        let mut rng = par::rng(tol.seed, par::stream(40, stream));
        let mut candidates: Vec<DVector<f64>> = dirs.clone();
        for i in 0..dirs.len() {
            for j in i + 1..dirs.len() {
                candidates.push(&dirs[i] + &dirs[j]);
            }
        }
        for _ in 0..tol.n_samples {
            let mut d = DVector::zeros(n);
            for r in &g.rays {
                let w: f64 = Exp1.sample(&mut rng);
                d += r * w;
            }
            for l in &g.lines {
                let w: f64 = rand_distr::StandardNormal.sample(&mut rng);
                d += l * w;
            }
            candidates.push(d);
        }
        for d in candidates {
            let norm = d.norm();
            if norm > 1e-9 {
                let d = d / norm;
                consider(quad(q, &d), d, &mut best);
                admitted += 1;
            }
        }
    }
    let mut method = PieceMethod::GeneratorSweep;
    if n <= 4 {
        let mut rng = par::rng(tol.seed, par::stream(41, stream));
        for _ in 0..tol.n_samples {
            let d = random_unit(&mut rng, n);
            if cone.contains(&d, tol.tau_feas * 2.0) {
                consider(quad(q, &d), d, &mut best);
                admitted += 1;
            }
        }
        if gens.is_none() {
            method = PieceMethod::SphereSampling;
        }
    }
    match best {
        Some((v, d)) => QuadMin { value: v, direction: Some(d), admitted, exact: false, method },
        None => QuadMin { value: f64::INFINITY, direction: None, admitted, exact: false, method },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocWitness {
    pub multiplier: Multipliers,
    pub direction: Vec<f64>,
    pub value: f64,
    pub piece: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceLog {
    pub generator: String,
    pub piece: String,
    pub method: PieceMethod,
    pub value: Option<f64>,
    pub admitted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocVerdict {
    pub kind: SocKind,
    pub status: Status,
    pub mode: Mode,
    pub seed: u64,
    pub witness: Option<SocWitness>,
    pub pieces: Vec<PieceLog>,
    pub notes: Vec<String>,
}

/// A multiplier generator with the Hessian it contributes: the full
/// Lagrangian Hessian at vertices, constraint Hessians only on recession
/// directions.
struct MultGen {
    label: String,
    mult: Multipliers,
    q: DMatrix<f64>,
    vertex: bool,
}

const SWEEP_NOTE: &str =
    "the form is affine in the multiplier; vertices and recession directions cover every S-multiplier";

fn multiplier_generators(pt: &ActivePoint<'_>) -> Result<Result<Vec<MultGen>, String>, StationarityError> {
    let set = s_multiplier_polyhedron(pt)?;
    let p = pt.problem;
    let (vertices, recession) = if set.coords.is_empty() {
        (vec![DVector::zeros(0)], Vec::new())
    } else {
        match enumerate_generators(&set.poly, &pt.tol) {
            Ok(g) => {
                let rec = g.conic_directions();
                (g.vertices, rec)
            }
            Err(e) => return Ok(Err(e.to_string())),
        }
    };
    let mut out = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        let mult = set.to_multipliers(p, v);
        let q = lagrangian_hessian_parts(p, &pt.x, &mult, true)?;
        out.push(MultGen { label: format!("vertex {}", i + 1), mult, q, vertex: true });
    }
    for (i, r) in recession.iter().enumerate() {
        let mult = set.to_multipliers(p, r);
        let q = lagrangian_hessian_parts(p, &pt.x, &mult, false)?;
        out.push(MultGen { label: format!("direction {}", i + 1), mult, q, vertex: false });
    }
    Ok(Ok(out))
}

fn unknown(kind: SocKind, pt: &ActivePoint<'_>, note: String) -> SocVerdict {
    SocVerdict { kind, status: Status::Unknown, mode: Mode::Sampled, seed: pt.tol.seed, witness: None, pieces: vec![], notes: vec![note] }
}

pub fn check_wsonc(pt: &ActivePoint<'_>) -> Result<SocVerdict, StationarityError> {
    let gens = match multiplier_generators(pt)? {
        Ok(g) => g,
        Err(e) => return Ok(unknown(SocKind::Wsonc, pt, e)),
    };
    let basis = critical_subspace(pt);
    let mut v = SocVerdict {
        kind: SocKind::Wsonc,
        status: Status::Holds,
        mode: Mode::Exact,
        seed: pt.tol.seed,
        witness: None,
        pieces: vec![],
        notes: vec![SWEEP_NOTE.into()],
    };
    if basis.ncols() == 0 {
        v.notes.push("critical subspace is {0}".into());
        return Ok(v);
    }
    for g in gens {
        let (val, d) = subspace_min(&g.q, &basis).expect("nonempty basis");
        v.pieces.push(PieceLog {
            generator: g.label.clone(),
            piece: "subspace".into(),
            method: PieceMethod::SubspaceEig,
            value: Some(val),
            admitted: basis.ncols(),
        });
        if val < -pt.tol.tau_psd && v.witness.is_none() {
            v.status = Status::Fails;
            v.witness = Some(SocWitness { multiplier: g.mult, direction: d.iter().copied().collect(), value: val, piece: "subspace".into() });
        }
    }
    Ok(v)
}

pub fn check_ssonc(pt: &ActivePoint<'_>) -> Result<SocVerdict, StationarityError> {
    let gens = match multiplier_generators(pt)? {
        Ok(g) => g,
        Err(e) => return Ok(unknown(SocKind::Ssonc, pt, e)),
    };
    let mut tasks = Vec::new();
    for (gi, g) in gens.iter().enumerate() {
        let cone = if g.vertex { critical_cone(pt, Some(&g.mult.lambda)) } else { critical_cone(pt, None) };
        for piece in cone.pieces {
            tasks.push((gi, piece));
        }
    }
    let results = par::map_range(tasks.len(), |t| quadform_min_over_cone(&gens[tasks[t].0].q, &tasks[t].1.cone, &pt.tol, t as u32));
    let mut v = SocVerdict {
        kind: SocKind::Ssonc,
        status: Status::Holds,
        mode: Mode::Exact,
        seed: pt.tol.seed,
        witness: None,
        pieces: vec![],
        notes: vec![SWEEP_NOTE.into()],
    };
    let mut thin = false;
    for ((gi, piece), r) in tasks.iter().zip(results) {
        let g = &gens[*gi];
        v.pieces.push(PieceLog {
            generator: g.label.clone(),
            piece: piece.tag.clone(),
            method: r.method,
            value: r.value.is_finite().then_some(r.value),
            admitted: r.admitted,
        });
        if !r.exact {
            v.mode = Mode::Sampled;
            if r.admitted < MIN_ADMITTED {
                thin = true;
            }
        }
        if r.value < -pt.tol.tau_psd && v.witness.is_none() {
            let d = r.direction.expect("finite value has a direction");
            v.witness = Some(SocWitness {
                multiplier: g.mult.clone(),
                direction: d.iter().copied().collect(),
                value: r.value,
                piece: piece.tag.clone(),
            });
        }
    }
    if v.witness.is_some() {
        v.status = Status::Fails;
    } else if thin {
        v.status = Status::Unknown;
        v.notes.push(format!("a piece admitted fewer than {MIN_ADMITTED} directions"));
    }
    Ok(v)
}

/// Re-check a witness: the direction lies in some critical-cone piece and
/// the form is below −tau_psd.
pub fn verify_witness(pt: &ActivePoint<'_>, kind: SocKind, w: &SocWitness) -> bool {
    let d = DVector::from_column_slice(&w.direction);
    let member = match kind {
        SocKind::Ssonc => critical_cone(pt, Some(&w.multiplier.lambda)).member(&d, pt.tol.tau_feas).is_some(),
        SocKind::Wsonc => (pt.rows(&pt.sets.full_family()) * &d).amax() <= pt.tol.tau_feas * (1.0 + d.norm()),
    };
    let q = match lagrangian_hessian_parts(pt.problem, &pt.x, &w.multiplier, true) {
        Ok(q) => q,
        Err(_) => return false,
    };
    member && quad(&q, &d) < -pt.tol.tau_psd * d.norm_squared()
}
