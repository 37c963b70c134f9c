//! Constraint-qualification checkers with three-valued verdicts and the
//! implication lattice.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{branch_linearization, linearization_cone, random_unit, sample_tangent_directions};
use crate::numeric::{eig_sym, enumerate_generators, nullspace, rank_tol, LinearProgram, Polyhedron, Sense, VarKind};
use crate::par;
use crate::point::ActivePoint;
use crate::problem::{Bipartition, BranchProblem, Constraint};
use crate::solver::{nearest_feasible, project_branch_from, SolveConfig};
use crate::stationarity::Multipliers;
use crate::verdict::{Mode, Status};

/// Cap on subset triples examined by the relaxed constant-rank check.
pub const MAX_RCRCQ_TRIPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CqName {
    Licq,
    Wcr,
    Pwcr,
    Rcrcq,
    Pcrsc,
    Acq,
    Gcq,
    Ssocq,
    Wsocq,
    Psoqn,
}

impl CqName {
    pub const ALL: [CqName; 10] = [
        CqName::Licq,
        CqName::Wcr,
        CqName::Pwcr,
        CqName::Rcrcq,
        CqName::Pcrsc,
        CqName::Acq,
        CqName::Gcq,
        CqName::Ssocq,
        CqName::Wsocq,
        CqName::Psoqn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CqName::Licq => "LICQ",
            CqName::Wcr => "WCR",
            CqName::Pwcr => "PWCR",
            CqName::Rcrcq => "RCRCQ",
            CqName::Pcrsc => "PCRSC",
            CqName::Acq => "ACQ",
            CqName::Gcq => "GCQ",
            CqName::Ssocq => "SSOCQ",
            CqName::Wsocq => "WSOCQ",
            CqName::Psoqn => "PSOQN",
        }
    }
}

impl std::fmt::Display for CqName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point where a gradient family has a different rank than at x̄.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankWitness {
    pub context: String,
    pub family: Vec<String>,
    #[serde(skip)]
    pub members: Vec<Constraint>,
    pub point: Vec<f64>,
    pub center_rank: usize,
    pub point_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub context: String,
    pub family: Vec<String>,
    pub center_rank: usize,
    pub constant: bool,
}

/// A linearization generator that tangent sampling could not reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcqWitness {
    pub piece: String,
    pub direction: Vec<f64>,
    /// (radius, residual at x̄ + r·u, estimated distance / r).
    pub probes: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub ranks: Vec<RankRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank_witness: Option<RankWitness>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub acq_witness: Option<AcqWitness>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub multiplier: Option<Multipliers>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqVerdict {
    pub name: CqName,
    pub status: Status,
    pub mode: Mode,
    pub evidence: Evidence,
}

impl CqVerdict {
    fn new(name: CqName, status: Status, mode: Mode, evidence: Evidence) -> Self {
        CqVerdict { name, status, mode, evidence }
    }

    fn sampled(name: CqName, status: Status, pt: &ActivePoint<'_>, mut evidence: Evidence) -> Self {
        evidence.samples = Some(pt.tol.n_samples);
        evidence.seed = Some(pt.tol.seed);
        CqVerdict::new(name, status, Mode::Sampled, evidence)
    }
}

fn labels(cs: &[Constraint]) -> Vec<String> {
    cs.iter().map(|c| c.label()).collect()
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Gradient family: g over `gs`, all h, G over `gk`, H over `hk`.
fn family(pt: &ActivePoint<'_>, gs: &[usize], gk: &[usize], hk: &[usize]) -> Vec<Constraint> {
    let mut out: Vec<Constraint> = gs.iter().map(|&i| Constraint::G(i)).collect();
    out.extend(pt.sets.i_h.iter().map(|&j| Constraint::H(j)));
    out.extend(gk.iter().map(|&k| Constraint::SwitchG(k)));
    out.extend(hk.iter().map(|&k| Constraint::SwitchH(k)));
    out
}

fn branch_family(pt: &ActivePoint<'_>, gs: &[usize], b: &Bipartition) -> Vec<Constraint> {
    family(pt, gs, &union_sorted(&pt.sets.i_g0, &b.beta1), &union_sorted(&pt.sets.i_h0, &b.beta2))
}

/// Uniform point in the ball of radius `r` around `center`.
fn ball_point(rng: &mut impl rand::Rng, center: &DVector<f64>, r: f64) -> DVector<f64> {
    let n = center.len();
    let u = random_unit(rng, n);
    let s: f64 = rng.random::<f64>().powf(1.0 / n as f64);
    center + u * (r * s)
}

/// Rank of `family` evaluated at `x`.
pub fn family_rank(pt: &ActivePoint<'_>, members: &[Constraint], x: &[f64]) -> Result<usize, crate::expr::EvalError> {
    let m = pt.problem.gradients(members, x)?;
    Ok(rank_tol(&m, pt.tol.tau_rank).rank)
}

/// Re-evaluate a rank witness with the rank oracle.
pub fn verify_rank_witness(pt: &ActivePoint<'_>, w: &RankWitness) -> bool {
    let at_center = rank_tol(&pt.rows(&w.members), pt.tol.tau_rank).rank;
    let at_point = family_rank(pt, &w.members, &w.point).ok();
    at_center == w.center_rank && at_point == Some(w.point_rank) && w.point_rank != w.center_rank
}

/// Gradients of every constraint at shared sample points in the three
/// sampling balls.
pub struct RankSampler<'p, 'a> {
    pt: &'p ActivePoint<'a>,
    points: Vec<(DVector<f64>, HashMap<Constraint, DVector<f64>>)>,
}

impl<'p, 'a> RankSampler<'p, 'a> {
    pub fn new(pt: &'p ActivePoint<'a>) -> Self {
        let tol = pt.tol;
        let center = DVector::from_column_slice(&pt.x);
        let radii = tol.radii();
        let p = pt.problem;
        let all: Vec<Constraint> = (0..p.m())
            .map(Constraint::G)
            .chain((0..p.p()).map(Constraint::H))
            .chain((0..p.l()).flat_map(|k| [Constraint::SwitchG(k), Constraint::SwitchH(k)]))
            .collect();
        let points = par::map_range(tol.n_samples, |i| {
            let mut rng = par::rng(tol.seed, par::stream(20, i as u32));
            let x = ball_point(&mut rng, &center, radii[i % 3]);
            let mut grads = HashMap::new();
            for &c in &all {
                grads.insert(c, p.constraint(c).gradient(x.as_slice()).ok()?);
            }
            Some((x, grads))
        });
        RankSampler { pt, points: points.into_iter().flatten().collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rank at x̄ and the first sample with a different rank.
    pub fn check(&self, context: &str, members: &[Constraint]) -> (RankRow, Option<RankWitness>) {
        let tau = self.pt.tol.tau_rank;
        let n = self.pt.n();
        let center_rank = rank_tol(&self.pt.rows(members), tau).rank;
        let mut witness = None;
        for (x, grads) in &self.points {
            let mut m = DMatrix::zeros(members.len(), n);
            for (r, c) in members.iter().enumerate() {
                m.row_mut(r).copy_from(&grads[c].transpose());
            }
            let rank = rank_tol(&m, tau).rank;
            if rank != center_rank {
                witness = Some(RankWitness {
                    context: context.to_string(),
                    family: labels(members),
                    members: members.to_vec(),
                    point: x.iter().copied().collect(),
                    center_rank,
                    point_rank: rank,
                });
                break;
            }
        }
        let row = RankRow { context: context.to_string(), family: labels(members), center_rank, constant: witness.is_none() };
        (row, witness)
    }
}

/// Sampled rank constancy over several families; FAILS carries the first
/// witness.
fn rank_verdict(name: CqName, pt: &ActivePoint<'_>, families: Vec<(String, Vec<Constraint>)>) -> CqVerdict {
    let sampler = RankSampler::new(pt);
    let results = par::map(&families, |(ctx, fam)| sampler.check(ctx, fam));
    let mut ev = Evidence::default();
    let mut status = Status::Holds;
    for (row, w) in results {
        ev.ranks.push(row);
        if let Some(w) = w {
            if status == Status::Holds {
                status = Status::Fails;
                ev.rank_witness = Some(w);
            }
        }
    }
    if sampler.len() < pt.tol.n_samples {
        ev.notes.push(format!("{} samples skipped by evaluation errors", pt.tol.n_samples - sampler.len()));
    }
    CqVerdict::sampled(name, status, pt, ev)
}

pub fn check_licq(pt: &ActivePoint<'_>) -> CqVerdict {
    let fam = pt.sets.full_family();
    let rank = rank_tol(&pt.rows(&fam), pt.tol.tau_rank);
    let ev = Evidence {
        ranks: vec![RankRow { context: "x̄".into(), family: labels(&fam), center_rank: rank.rank, constant: true }],
        notes: if rank.near_tie { vec!["singular value near the rank threshold".into()] } else { vec![] },
        ..Evidence::default()
    };
    CqVerdict::new(CqName::Licq, Status::from_bool(rank.rank == fam.len()), Mode::Exact, ev)
}

pub fn check_wcr(pt: &ActivePoint<'_>) -> CqVerdict {
    rank_verdict(CqName::Wcr, pt, vec![("full".into(), pt.sets.full_family())])
}

pub fn check_pwcr(pt: &ActivePoint<'_>) -> CqVerdict {
    let fams = pt.bipartitions.iter().map(|b| (b.label(), branch_family(pt, &pt.sets.i_g, b))).collect();
    rank_verdict(CqName::Pwcr, pt, fams)
}

fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0..1usize << items.len())
        .map(|mask| items.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}

fn set_label(s: &[usize]) -> String {
    format!("{{{}}}", s.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(","))
}

pub fn check_rcrcq(pt: &ActivePoint<'_>) -> CqVerdict {
    let s = &pt.sets;
    let count = 1usize.checked_shl(s.i_g.len() as u32 + 2 * s.i_gh.len() as u32).unwrap_or(usize::MAX);
    if s.i_g.len() + 2 * s.i_gh.len() > 12 || count > MAX_RCRCQ_TRIPLES {
        let ev = Evidence { notes: vec![format!("{count} subset triples exceed the cap {MAX_RCRCQ_TRIPLES}")], ..Evidence::default() };
        return CqVerdict::new(CqName::Rcrcq, Status::Unknown, Mode::Sampled, ev);
    }
    let gsubs = subsets(&s.i_g);
    let hsubs = subsets(&s.i_gh);
    let mut triples = Vec::with_capacity(count);
    for i1 in &gsubs {
        for i3 in &hsubs {
            for i4 in &hsubs {
                triples.push((i1.clone(), i3.clone(), i4.clone()));
            }
        }
    }
    check_rcrcq_triples(pt, &triples)
}

/// Rank constancy restricted to the given (I1 ⊆ I_g, I3 ⊆ I_GH, I4 ⊆ I_GH)
/// subset triples.
pub fn check_rcrcq_triples(pt: &ActivePoint<'_>, triples: &[(Vec<usize>, Vec<usize>, Vec<usize>)]) -> CqVerdict {
    let s = &pt.sets;
    let fams = triples
        .iter()
        .map(|(i1, i3, i4)| {
            let ctx = format!("I1={} I3={} I4={}", set_label(i1), set_label(i3), set_label(i4));
            (ctx, family(pt, i1, &union_sorted(&s.i_g0, i3), &union_sorted(&s.i_h0, i4)))
        })
        .collect();
    let mut v = rank_verdict(CqName::Rcrcq, pt, fams);
    // Keep the report readable: only non-constant rows.
    if v.evidence.ranks.len() > 16 {
        let total = v.evidence.ranks.len();
        v.evidence.ranks.retain(|r| !r.constant);
        v.evidence.notes.push(format!("{total} subset triples checked"));
    }
    v
}

/// I_g^- for one bipartition from the cone-membership LP, and the I₀
/// cross-check from linearization-cone generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgMinus {
    pub partition: Bipartition,
    pub indices: Vec<usize>,
    pub cross_check: Option<Vec<usize>>,
}

impl IgMinus {
    pub fn agrees(&self) -> bool {
        self.cross_check.as_ref() == Some(&self.indices)
    }
}

pub fn i_g_minus(pt: &ActivePoint<'_>, b: &Bipartition) -> IgMinus {
    let gk = union_sorted(&pt.sets.i_g0, &b.beta1);
    let hk = union_sorted(&pt.sets.i_h0, &b.beta2);
    let mut indices = Vec::new();
    for &l in &pt.sets.i_g {
        let mut cols: Vec<(Constraint, VarKind)> =
            pt.sets.i_g.iter().filter(|&&i| i != l).map(|&i| (Constraint::G(i), VarKind::Nonneg)).collect();
        cols.extend(pt.sets.i_h.iter().map(|&j| (Constraint::H(j), VarKind::Free)));
        cols.extend(gk.iter().map(|&k| (Constraint::SwitchG(k), VarKind::Free)));
        cols.extend(hk.iter().map(|&k| (Constraint::SwitchH(k), VarKind::Free)));
        let mut lp = LinearProgram::new(cols.len());
        for (i, (_, kind)) in cols.iter().enumerate() {
            lp.set_kind(i, *kind);
        }
        let target = -pt.grad(Constraint::G(l));
        for j in 0..pt.n() {
            lp.add_eq(DVector::from_iterator(cols.len(), cols.iter().map(|(c, _)| pt.grad(*c)[j])), target[j]);
        }
        if matches!(lp.solve(Sense::Feasibility, pt.tol.tau_feas), Ok(o) if o.is_feasible()) {
            indices.push(l);
        }
    }
    let cross_check = enumerate_generators(&branch_linearization(pt, b), &pt.tol).ok().map(|gens| {
        let dirs = gens.conic_directions();
        pt.sets
            .i_g
            .iter()
            .copied()
            .filter(|&i| {
                let g = pt.grad(Constraint::G(i));
                dirs.iter().all(|d| g.dot(d).abs() <= pt.tol.tau_feas * (1.0 + g.norm()))
            })
            .collect()
    });
    IgMinus { partition: b.clone(), indices, cross_check }
}

pub fn check_pcrsc(pt: &ActivePoint<'_>) -> CqVerdict {
    let minus: Vec<IgMinus> = pt.bipartitions.iter().map(|b| i_g_minus(pt, b)).collect();
    let fams = minus.iter().map(|m| (m.partition.label(), branch_family(pt, &m.indices, &m.partition))).collect();
    let mut v = rank_verdict(CqName::Pcrsc, pt, fams);
    for m in &minus {
        v.evidence.notes.push(format!(
            "{}: I_g^- = {}",
            m.partition.label(),
            set_label(&m.indices)
        ));
    }
    if minus.iter().any(|m| !m.agrees()) && v.status == Status::Holds {
        v.status = Status::Unknown;
        v.evidence.notes.push("I_g^- differs from the cross-check".into());
    }
    v
}

/// Probe directions for one piece: generators, and normalized pairwise sums.
fn probe_directions(dirs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = dirs.to_vec();
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let s = &dirs[i] + &dirs[j];
            let norm = s.norm();
            if norm > 1e-6 {
                out.push(s / norm);
            }
        }
    }
    out
}

pub fn check_acq(pt: &ActivePoint<'_>) -> CqVerdict {
    let tol = pt.tol;
    let lin = linearization_cone(pt);
    let cloud = sample_tangent_directions(pt);
    let mut ev = Evidence::default();
    ev.notes.push(format!("{} tangent directions from {} projections", cloud.samples.len(), cloud.attempts));
    let outside = cloud
        .samples
        .iter()
        .filter(|s| lin.angular_member(&s.dir, tol.angular_tol, tol.tau_feas).is_none())
        .count();
    if outside > 0 {
        ev.notes.push(format!("{outside} tangent directions outside the linearization cone"));
        return CqVerdict::sampled(CqName::Acq, Status::Unknown, pt, ev);
    }
    let cos_tol = tol.angular_tol.cos();
    let cfg = SolveConfig { tau_feas: tol.tau_feas, seed: tol.seed, ..SolveConfig::default() };
    let branches: Vec<BranchProblem<'_>> = pt.bipartitions.iter().map(|b| pt.branch(b)).collect();
    let xbar = DVector::from_column_slice(&pt.x);
    let radii = [tol.eps_ball / 2.0, tol.eps_ball / 8.0];

    // A probe is matched by the cloud, or by projecting x̄ + r·u directly.
    let targeted = |u: &DVector<f64>| -> bool {
        radii.iter().any(|&r| {
            let x = &xbar + u * r;
            branches.iter().any(|br| match project_branch_from(br, x.as_slice(), x.as_slice(), &cfg) {
                Ok(p) if p.feasible => {
                    let step = DVector::from_column_slice(&p.y) - &xbar;
                    let len = step.norm();
                    len > 0.05 * r && step.dot(u) / len >= cos_tol
                }
                _ => false,
            })
        })
    };
    let leaves = |u: &DVector<f64>| -> Option<Vec<(f64, f64, f64)>> {
        let mut out = Vec::new();
        for &r in &radii {
            let x = &xbar + u * r;
            let res = pt.problem.residual(x.as_slice()).ok()?;
            let near = nearest_feasible(&branches, x.as_slice(), std::slice::from_ref(&pt.x), &cfg).ok()?;
            let ratio = match near {
                Some(p) => (DVector::from_column_slice(&p.y) - &x).norm() / r,
                None => f64::INFINITY,
            };
            if res <= 10.0 * tol.tau_feas || ratio < tol.angular_tol.sin() {
                return None;
            }
            out.push((r, res, ratio));
        }
        Some(out)
    };

    let mut probes_total = 0;
    let mut unresolved = 0;
    for piece in &lin.pieces {
        let gens = match enumerate_generators(&piece.cone, &tol) {
            Ok(g) => g,
            Err(e) => {
                ev.notes.push(format!("{}: {e}", piece.tag));
                unresolved += 1;
                continue;
            }
        };
        for u in probe_directions(&gens.conic_directions()) {
            probes_total += 1;
            if cloud.samples.iter().any(|s| s.dir.dot(&u) >= cos_tol) || targeted(&u) {
                continue;
            }
            match leaves(&u) {
                Some(probes) => {
                    ev.acq_witness = Some(AcqWitness { piece: piece.tag.clone(), direction: u.iter().copied().collect(), probes });
                    return CqVerdict::sampled(CqName::Acq, Status::Fails, pt, ev);
                }
                None => unresolved += 1,
            }
        }
    }
    ev.notes.push(format!("{probes_total} generator probes, {unresolved} unresolved"));
    let status = if unresolved == 0 { Status::Holds } else { Status::Unknown };
    CqVerdict::sampled(CqName::Acq, status, pt, ev)
}

/// Searches nonzero homogeneous multipliers per branch among the generators
/// of their cone, then tests the curvature and sign-sequence conditions.
pub fn check_psoqn(pt: &ActivePoint<'_>) -> CqVerdict {
    let tol = pt.tol;
    let p = pt.problem;
    let mut ev = Evidence::default();
    let mut found_any = false;
    let center = DVector::from_column_slice(&pt.x);
    for b in &pt.bipartitions {
        let fam = branch_family(pt, &pt.sets.i_g, b);
        let k = fam.len();
        if k == 0 {
            continue;
        }
        let mut cone = Polyhedron::new(k);
        for j in 0..pt.n() {
            cone.push_eq(DVector::from_iterator(k, fam.iter().map(|c| pt.grad(*c)[j])), 0.0);
        }
        for (i, c) in fam.iter().enumerate() {
            if matches!(c, Constraint::G(_)) {
                let mut row = DVector::zeros(k);
                row[i] = -1.0;
                cone.push_le(row, 0.0);
            }
        }
        let gens = match enumerate_generators(&cone, &tol) {
            Ok(g) => g,
            Err(e) => {
                ev.notes.push(format!("{}: {e}", b.label()));
                return CqVerdict::new(CqName::Psoqn, Status::Unknown, Mode::Exact, ev);
            }
        };
        let dirs = gens.conic_directions();
        if dirs.is_empty() {
            continue;
        }
        found_any = true;
        let basis = nullspace(&pt.rows(&fam), tol.tau_rank);
        for v in dirs {
            let mut mult = Multipliers::zeros(p);
            let mut q = DMatrix::zeros(pt.n(), pt.n());
            let mut active = Vec::new();
            for (c, &coef) in fam.iter().zip(v.iter()) {
                if coef.abs() <= tol.tau_feas {
                    continue;
                }
                match *c {
                    Constraint::G(i) => mult.lambda[i] = coef,
                    Constraint::H(j) => mult.rho[j] = coef,
                    Constraint::SwitchG(k) => mult.mu[k] = coef,
                    Constraint::SwitchH(k) => mult.nu[k] = coef,
                }
                if let Ok(h) = p.constraint(*c).hessian(&pt.x) {
                    q += h * coef;
                }
                active.push((*c, coef));
            }
            let curvature = basis.ncols() == 0
                || eig_sym(&(basis.transpose() * &q * &basis)).map(|(e, _)| e[0] >= -tol.tau_psd).unwrap_or(false);
            let radii = tol.radii();
            let per = (tol.n_samples / 3).max(1);
            let sequence = radii.iter().enumerate().all(|(ri, &r)| {
                (0..per).any(|s| {
                    let mut rng = par::rng(tol.seed, par::stream(30 + ri as u32, s as u32));
                    let x = ball_point(&mut rng, &center, r);
                    active.iter().all(|(c, coef)| p.constraint(*c).value(x.as_slice()).map(|val| coef * val > 0.0).unwrap_or(false))
                })
            });
            if curvature && sequence {
                ev.multiplier = Some(mult);
                ev.notes.push(format!("{}: multiplier meets all conditions", b.label()));
                return CqVerdict::sampled(CqName::Psoqn, Status::Fails, pt, ev);
            }
            ev.notes.push(format!(
                "{}: multiplier ray found (curvature {}, sign sequence {})",
                b.label(),
                if curvature { "met" } else { "not met" },
                if sequence { "found" } else { "not found" }
            ));
        }
    }
    if found_any {
        CqVerdict::sampled(CqName::Psoqn, Status::Unknown, pt, ev)
    } else {
        ev.notes.push("no nonzero multiplier for any branch".into());
        CqVerdict::new(CqName::Psoqn, Status::Holds, Mode::Exact, ev)
    }
}

/// Implication edges of the lattice, with their source.
pub const LATTICE_EDGES: [(CqName, CqName); 12] = [
    (CqName::Licq, CqName::Rcrcq),
    (CqName::Rcrcq, CqName::Acq),
    (CqName::Acq, CqName::Gcq),
    (CqName::Rcrcq, CqName::Pcrsc),
    (CqName::Rcrcq, CqName::Wcr),
    (CqName::Rcrcq, CqName::Ssocq),
    (CqName::Pcrsc, CqName::Ssocq),
    (CqName::Pcrsc, CqName::Acq),
    (CqName::Ssocq, CqName::Acq),
    (CqName::Ssocq, CqName::Wsocq),
    (CqName::Wcr, CqName::Wsocq),
    (CqName::Pwcr, CqName::Wsocq),
];

#[derive(Debug, Clone, PartialEq, Error)]
#[error("lattice contradiction at {node}: {via}")]
pub struct LatticeError {
    pub node: CqName,
    pub via: String,
}

/// Complete a verdict table: HOLDS flows along edges, FAILS against them.
/// Every name appears once in the output, in `CqName::ALL` order.
pub fn lattice_closure(verdicts: &[CqVerdict]) -> Result<Vec<CqVerdict>, LatticeError> {
    let mut table: HashMap<CqName, CqVerdict> = verdicts.iter().map(|v| (v.name, v.clone())).collect();
    for name in CqName::ALL {
        table.entry(name).or_insert_with(|| CqVerdict::new(name, Status::Unknown, Mode::Inferred, Evidence::default()));
    }
    loop {
        let mut changed = false;
        for (from, to) in LATTICE_EDGES {
            let edge = format!("{from}→{to}");
            let (a, b) = (table[&from].status, table[&to].status);
            if a == Status::Holds {
                match b {
                    Status::Unknown => {
                        set_inferred(&mut table, to, Status::Holds, edge.clone());
                        changed = true;
                    }
                    Status::Fails => return Err(LatticeError { node: to, via: edge.clone() }),
                    Status::Holds => {}
                }
            }
            if b == Status::Fails {
                match a {
                    Status::Unknown => {
                        set_inferred(&mut table, from, Status::Fails, edge);
                        changed = true;
                    }
                    Status::Holds => return Err(LatticeError { node: from, via: edge }),
                    Status::Fails => {}
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(CqName::ALL.iter().map(|n| table.remove(n).unwrap()).collect())
}

fn set_inferred(table: &mut HashMap<CqName, CqVerdict>, name: CqName, status: Status, edge: String) {
    let v = table.get_mut(&name).unwrap();
    v.status = status;
    v.mode = Mode::Inferred;
    v.evidence.edge = Some(edge);
}

/// All direct checks in a fixed order.
pub fn check_all(pt: &ActivePoint<'_>) -> Vec<CqVerdict> {
    vec![
        check_licq(pt),
        check_wcr(pt),
        check_pwcr(pt),
        check_rcrcq(pt),
        check_pcrsc(pt),
        check_acq(pt),
        check_psoqn(pt),
    ]
}
