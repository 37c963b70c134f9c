//! Full point analysis and its text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cones::{critical_cone, critical_subspace, describe_union, linearization_cone, PieceDescription};
use crate::cq::{check_all, i_g_minus, lattice_closure, CqVerdict, IgMinus};
use crate::numeric::Tolerances;
use crate::penalty::{error_bound_probe, exact_penalty_probe, ErrorBoundReport, PenaltyReport};
use crate::point::ActivePoint;
use crate::problem::{IndexSets, MpscProblem};
use crate::soc::{check_ssonc, check_wsonc, SocVerdict};
use crate::stationarity::{
    check_m_stationary, check_s_stationary, check_w_stationary, m_to_s_bridge, normal_cone_oracle, BridgeReport, NormalKind,
    StationarityVerdict,
};
use crate::verdict::Status;

pub const SCHEMA_VERSION: &str = "1";

/// Index sets with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSetsView {
    pub i_g: Vec<usize>,
    pub i_h: Vec<usize>,
    pub i_g0: Vec<usize>,
    pub i_h0: Vec<usize>,
    pub i_gh: Vec<usize>,
}

impl From<&IndexSets> for IndexSetsView {
    fn from(s: &IndexSets) -> Self {
        let one = |v: &[usize]| v.iter().map(|i| i + 1).collect();
        IndexSetsView { i_g: one(&s.i_g), i_h: one(&s.i_h), i_g0: one(&s.i_g0), i_h0: one(&s.i_h0), i_gh: one(&s.i_gh) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConesReport {
    pub linearization: Vec<PieceDescription>,
    pub critical: Vec<PieceDescription>,
    /// Orthonormal basis vectors of the critical subspace.
    pub critical_subspace: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdicts {
    pub stationarity: Vec<StationarityVerdict>,
    pub cq: Vec<CqVerdict>,
    pub soc: Vec<SocVerdict>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soc_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bridge: Option<BridgeReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub i_g_minus: Vec<IgMinus>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub version: String,
    pub problem: String,
    pub point: Vec<f64>,
    pub feasible: bool,
    /// Absent when the point could not be evaluated.
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub index_sets: Option<IndexSetsView>,
    pub bipartitions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cones: Option<ConesReport>,
    pub verdicts: Verdicts,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub penalty: Option<PenaltyReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub errorbound: Option<ErrorBoundReport>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOptions {
    pub penalty: bool,
}

pub fn cones_report(pt: &ActivePoint<'_>) -> ConesReport {
    let basis = critical_subspace(pt);
    ConesReport {
        linearization: describe_union(&linearization_cone(pt), &pt.tol),
        critical: describe_union(&critical_cone(pt, None), &pt.tol),
        critical_subspace: basis.column_iter().map(|c| c.iter().copied().collect()).collect(),
    }
}

/// Index sets, cones, stationarity, CQs with lattice closure, and SOC in
/// that order. Component failures become error entries; later stages still
/// run where they can.
pub fn analyze(p: &MpscProblem, x: &[f64], tol: &Tolerances, opts: AnalyzeOptions) -> AnalysisReport {
    let mut report = AnalysisReport {
        version: SCHEMA_VERSION.into(),
        problem: p.to_text(),
        point: x.to_vec(),
        feasible: false,
        residual: None,
        index_sets: None,
        bipartitions: vec![],
        cones: None,
        verdicts: Verdicts { stationarity: vec![], cq: vec![], soc: vec![], soc_note: None, bridge: None, i_g_minus: vec![] },
        penalty: None,
        errorbound: None,
        seed: tol.seed,
        tolerances: *tol,
        errors: vec![],
    };
    if let Err(e) = p.check_point(x) {
        report.errors.push(e.to_string());
        return report;
    }
    match p.residual(x) {
        Ok(r) => report.residual = Some(r),
        Err(e) => {
            report.errors.push(e.to_string());
            return report;
        }
    }
    let residual = report.residual.unwrap_or(f64::INFINITY);
    report.feasible = residual <= tol.tau_feas;
    if !report.feasible {
        report.errors.push(format!("infeasible point: residual {residual:.6e}"));
        return report;
    }
    let pt = match ActivePoint::new(p, x, tol) {
        Ok(pt) => pt,
        Err(e) => {
            report.errors.push(e.to_string());
            return report;
        }
    };
    report.index_sets = Some((&pt.sets).into());
    report.bipartitions = pt.bipartitions.iter().map(|b| b.label()).collect();
    report.cones = Some(cones_report(&pt));

    let mut s_holds = false;
    let checks = [check_w_stationary, check_m_stationary, check_s_stationary];
    for check in checks {
        match check(&pt) {
            Ok(v) => report.verdicts.stationarity.push(v),
            Err(e) => report.errors.push(format!("stationarity: {e}")),
        }
    }
    let status_of = |k| report.verdicts.stationarity.iter().find(|v: &&StationarityVerdict| v.kind == k).map(|v| v.status);
    use crate::stationarity::StationarityKind as K;
    for (kind, normal) in [(K::M, NormalKind::Limiting), (K::S, NormalKind::Frechet)] {
        if let (Some(st), Ok(oracle)) = (status_of(kind), normal_cone_oracle(&pt, normal)) {
            if (st == Status::Holds) != oracle {
                report.errors.push(format!("stationarity: {kind:?} verdict disagrees with the normal-cone oracle"));
            }
        }
    }
    if status_of(K::S) == Some(Status::Holds) {
        s_holds = true;
    }
    if let Some(m) = report.verdicts.stationarity.iter().find(|v| v.kind == K::M).and_then(|v| v.witness.clone()) {
        if !s_holds {
            match m_to_s_bridge(&pt, &m) {
                Ok(b) => report.verdicts.bridge = Some(b),
                Err(e) => report.errors.push(format!("bridge: {e}")),
            }
        }
    }

    report.verdicts.i_g_minus = pt.bipartitions.iter().map(|b| i_g_minus(&pt, b)).collect();
    let direct = check_all(&pt);
    match lattice_closure(&direct) {
        Ok(closed) => report.verdicts.cq = closed,
        Err(e) => {
            report.errors.push(format!("cq: {e}"));
            report.verdicts.cq = direct;
        }
    }

    if s_holds {
        for check in [check_ssonc, check_wsonc] {
            match check(&pt) {
                Ok(v) => report.verdicts.soc.push(v),
                Err(e) => report.errors.push(format!("soc: {e}")),
            }
        }
    } else {
        report.verdicts.soc_note = Some("skipped: second-order conditions presuppose an S-stationary point".into());
    }

    if opts.penalty {
        match error_bound_probe(p, x, tol) {
            Ok(r) => report.errorbound = Some(r),
            Err(e) => report.errors.push(format!("errorbound: {e}")),
        }
        match exact_penalty_probe(p, x, tol, None) {
            Ok(r) => report.penalty = Some(r),
            Err(e) => report.errors.push(format!("penalty: {e}")),
        }
    }
    report
}

fn fmt_vec(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| format!("{}", round(*x))).collect::<Vec<_>>().join(", "))
}

/// Round to 10 significant decimals for display and clear negative zero.
fn round(x: f64) -> f64 {
    let r = (x * 1e10).round() / 1e10;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn set(v: &[usize]) -> String {
    if v.is_empty() {
        "∅".into()
    } else {
        format!("{{{}}}", v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
    }
}

pub fn render_pieces(out: &mut String, title: &str, pieces: &[PieceDescription]) {
    let _ = writeln!(out, "{title}:");
    for p in pieces {
        if let Some(note) = &p.note {
            let _ = writeln!(out, "  {}: {}", p.tag, note);
        } else if p.is_origin() {
            let _ = writeln!(out, "  {}: {{0}}", p.tag);
        } else {
            let rays: Vec<String> = p.rays.iter().map(|r| fmt_vec(r)).collect();
            let lines: Vec<String> = p.lines.iter().map(|r| fmt_vec(r)).collect();
            let _ = writeln!(out, "  {}: rays [{}] lines [{}]", p.tag, rays.join(" "), lines.join(" "));
        }
    }
}

/// Human-readable report. Verdict lines have the form
/// `<section> <NAME>: <STATUS> (<mode>)`.
pub fn render_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "point {}", fmt_vec(&r.point));
    match r.residual {
        Some(res) => {
            let _ = writeln!(out, "residual {:.6e} ({})", res, if r.feasible { "feasible" } else { "infeasible" });
        }
        None => {
            let _ = writeln!(out, "residual unavailable");
        }
    }
    let _ = writeln!(out, "seed {} samples {}", r.seed, r.tolerances.n_samples);
    if let Some(s) = &r.index_sets {
        let _ = writeln!(
            out,
            "index sets: I_g={} I_h={} I_G={} I_H={} I_GH={}",
            set(&s.i_g),
            set(&s.i_h),
            set(&s.i_g0),
            set(&s.i_h0),
            set(&s.i_gh)
        );
        let _ = writeln!(out, "bipartitions: {}", r.bipartitions.join(" "));
    }
    if let Some(c) = &r.cones {
        render_pieces(&mut out, "linearization cone", &c.linearization);
        render_pieces(&mut out, "critical cone", &c.critical);
        if c.critical_subspace.is_empty() {
            let _ = writeln!(out, "critical subspace: {{0}}");
        } else {
            let b: Vec<String> = c.critical_subspace.iter().map(|v| fmt_vec(v)).collect();
            let _ = writeln!(out, "critical subspace: span {}", b.join(" "));
        }
    }
    for v in &r.verdicts.stationarity {
        let _ = writeln!(out, "stationarity {:?}: {} (exact)", v.kind, v.status);
        if let Some(w) = &v.witness {
            let _ = writeln!(
                out,
                "  multiplier λ={} ρ={} μ={} ν={}",
                fmt_vec(&w.lambda),
                fmt_vec(&w.rho),
                fmt_vec(&w.mu),
                fmt_vec(&w.nu)
            );
        }
    }
    if let Some(b) = &r.verdicts.bridge {
        for p in &b.partitions {
            let _ = writeln!(out, "  partition {}: branch KKT {}", p.partition.label(), if p.kkt { "holds" } else { "fails" });
        }
        match &b.s_certificate {
            Some(_) => {
                let _ = writeln!(out, "  reconstruction gives an S-multiplier");
            }
            None => {
                let _ = writeln!(out, "  reconstruction fails: residual {}", fmt_vec(&b.reconstructed_residual));
            }
        }
    }
    for m in &r.verdicts.i_g_minus {
        let one: Vec<usize> = m.indices.iter().map(|i| i + 1).collect();
        let _ = writeln!(
            out,
            "I_g^- {}: {}{}",
            m.partition.label(),
            set(&one),
            if m.agrees() { "" } else { " (cross-check differs)" }
        );
    }
    for v in &r.verdicts.cq {
        let _ = write!(out, "cq {}: {} ({})", v.name, v.status, v.mode);
        if let Some(e) = &v.evidence.edge {
            let _ = write!(out, " via {e}");
        }
        if let (Some(n), Some(s)) = (v.evidence.samples, v.evidence.seed) {
            let _ = write!(out, " [{n} samples, seed {s}]");
        }
        out.push('\n');
        if let Some(w) = &v.evidence.rank_witness {
            let _ = writeln!(
                out,
                "  {}: rank {} at x̄, {} at {}",
                w.context,
                w.center_rank,
                w.point_rank,
                fmt_vec(&w.point)
            );
        }
        if let Some(w) = &v.evidence.acq_witness {
            let _ = writeln!(out, "  {}: generator {} leaves the feasible set", w.piece, fmt_vec(&w.direction));
        }
    }
    for v in &r.verdicts.soc {
        let _ = writeln!(out, "soc {}: {} ({})", format!("{:?}", v.kind).to_uppercase(), v.status, v.mode);
        if let Some(w) = &v.witness {
            let _ = writeln!(out, "  direction {} value {}", fmt_vec(&w.direction), round(w.value));
        }
    }
    if let Some(n) = &r.verdicts.soc_note {
        let _ = writeln!(out, "soc {n}");
    }
    if let Some(e) = &r.errorbound {
        render_error_bound(&mut out, e);
    }
    if let Some(p) = &r.penalty {
        render_penalty(&mut out, p);
    }
    for e in &r.errors {
        let _ = writeln!(out, "error: {e}");
    }
    out
}

pub fn render_error_bound(out: &mut String, e: &ErrorBoundReport) {
    let _ = writeln!(out, "errorbound: {} ({}) alpha_hat {:.6e} [{} directions, seed {}]", e.status, e.mode, e.alpha_hat, e.directions, e.seed);
    for c in &e.curve {
        let _ = writeln!(out, "  radius {:.4e}: max ratio {:.6e} over {} samples", c.radius, c.max_ratio, c.infeasible_samples);
    }
    for s in &e.witness {
        let _ = writeln!(out, "  witness {} ratio {:.6e}", fmt_vec(&s.point), s.ratio);
    }
}

pub fn render_penalty(out: &mut String, p: &PenaltyReport) {
    let kb = p.kappa_bar_hat.map(|k| format!("{k:.6e}")).unwrap_or_else(|| "not claimed".into());
    let _ = writeln!(out, "penalty: L_f_hat {:.6e} kappa_bar_hat {} [{} samples, seed {}]", p.l_f_hat, kb, p.samples, p.seed);
    for k in &p.kappas {
        let _ = writeln!(out, "  kappa {:.6e}: local min {} (worst gap {:.3e})", k.kappa, k.local_min, k.worst_gap);
    }
}
