//! Weak, M- and S-stationarity by linear programming, the S-multiplier
//! polyhedron, the M-to-S reconstruction, and a normal-cone oracle built
//! from the cross-set tables.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{cross_cones, PlaneCone};
use crate::numeric::{LinearProgram, LpError, LpOutcome, Polyhedron, Sense, VarKind};
use crate::par;
use crate::point::ActivePoint;
use crate::problem::{Bipartition, Constraint, MpscProblem};
use crate::verdict::Status;

#[derive(Debug, Error)]
pub enum StationarityError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Eval(#[from] crate::expr::EvalError),
    #[error("point is not S-stationary")]
    NotStrong,
}

/// (λ, ρ, μ, ν) over all m, p, l indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(p: &MpscProblem) -> Self {
        Multipliers { lambda: vec![0.0; p.m()], rho: vec![0.0; p.p()], mu: vec![0.0; p.l()], nu: vec![0.0; p.l()] }
    }

    fn get_mut(&mut self, c: Constraint) -> &mut f64 {
        match c {
            Constraint::G(i) => &mut self.lambda[i],
            Constraint::H(j) => &mut self.rho[j],
            Constraint::SwitchG(k) => &mut self.mu[k],
            Constraint::SwitchH(k) => &mut self.nu[k],
        }
    }

    fn terms(&self) -> impl Iterator<Item = (Constraint, f64)> + '_ {
        let g = self.lambda.iter().enumerate().map(|(i, &v)| (Constraint::G(i), v));
        let h = self.rho.iter().enumerate().map(|(j, &v)| (Constraint::H(j), v));
        let mu = self.mu.iter().enumerate().map(|(k, &v)| (Constraint::SwitchG(k), v));
        let nu = self.nu.iter().enumerate().map(|(k, &v)| (Constraint::SwitchH(k), v));
        g.chain(h).chain(mu).chain(nu)
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms().map(|(_, v)| v.abs()).sum()
    }
}

/// ∇f + Σλ∇g + Σρ∇h + Σμ∇G + Σν∇H.
pub fn lagrangian_gradient(p: &MpscProblem, x: &[f64], mult: &Multipliers) -> Result<DVector<f64>, crate::expr::EvalError> {
    let mut g = p.f.gradient(x)?;
    for (c, v) in mult.terms() {
        if v != 0.0 {
            g += p.constraint(c).gradient(x)? * v;
        }
    }
    Ok(g)
}

/// Hessian of the Lagrangian, with or without the objective term.
pub fn lagrangian_hessian_parts(
    p: &MpscProblem,
    x: &[f64],
    mult: &Multipliers,
    with_objective: bool,
) -> Result<DMatrix<f64>, crate::expr::EvalError> {
    let mut h = if with_objective { p.f.hessian(x)? } else { DMatrix::zeros(p.n(), p.n()) };
    for (c, v) in mult.terms() {
        if v != 0.0 {
            h += p.constraint(c).hessian(x)? * v;
        }
    }
    Ok(h)
}

pub fn lagrangian_hessian(p: &MpscProblem, x: &[f64], mult: &Multipliers) -> Result<DMatrix<f64>, crate::expr::EvalError> {
    lagrangian_hessian_parts(p, x, mult, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationarityKind {
    W,
    M,
    S,
}

/// One zero pattern of the M-stationarity enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternResult {
    /// Biactive indices with μ_k = 0; the rest have ν_k = 0.
    pub mu_zero: Vec<usize>,
    pub feasible: bool,
    pub witness: Option<Multipliers>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityVerdict {
    pub kind: StationarityKind,
    pub status: Status,
    pub witness: Option<Multipliers>,
    /// ‖∇ℓ‖∞ at the witness.
    pub residual: Option<f64>,
    pub patterns: Vec<PatternResult>,
}

/// Gradient-residual threshold used to accept stationarity.
pub fn stationarity_threshold(pt: &ActivePoint<'_>) -> f64 {
    pt.tol.tau_feas * (1.0 + pt.grad_f.amax())
}

/// Variables admitted into a multiplier LP.
struct MultLayout {
    vars: Vec<(Constraint, VarKind)>,
}

impl MultLayout {
    fn new(pt: &ActivePoint<'_>, mu_on: &[usize], nu_on: &[usize]) -> Self {
        let mut vars: Vec<(Constraint, VarKind)> = pt.sets.i_g.iter().map(|&i| (Constraint::G(i), VarKind::Nonneg)).collect();
        vars.extend(pt.sets.i_h.iter().map(|&j| (Constraint::H(j), VarKind::Free)));
        vars.extend(mu_on.iter().map(|&k| (Constraint::SwitchG(k), VarKind::Free)));
        vars.extend(nu_on.iter().map(|&k| (Constraint::SwitchH(k), VarKind::Free)));
        MultLayout { vars }
    }

    fn to_multipliers(&self, p: &MpscProblem, v: &[f64]) -> Multipliers {
        let mut m = Multipliers::zeros(p);
        for ((c, _), &x) in self.vars.iter().zip(v) {
            *m.get_mut(*c) = x;
        }
        m
    }
}

/// Two LPs: minimize the gradient residual, then the ℓ1 norm of the
/// multipliers at that residual. Returns the witness when the residual is
/// within the threshold.
fn solve_multiplier_lp(pt: &ActivePoint<'_>, layout: &MultLayout) -> Result<Option<(Multipliers, f64)>, StationarityError> {
    let n = pt.n();
    let k = layout.vars.len();
    let thr = stationarity_threshold(pt);
    let tau = pt.tol.tau_feas;
    let cols: Vec<&DVector<f64>> = layout.vars.iter().map(|(c, _)| pt.grad(*c)).collect();
    // Variables: multipliers (k), t, then k absolute-value bounds.
    let total = 2 * k + 1;
    let build = |lp: &mut LinearProgram| {
        for (i, (_, kind)) in layout.vars.iter().enumerate() {
            lp.set_kind(i, *kind);
        }
        lp.set_kind(k, VarKind::Nonneg);
        for j in 0..n {
            let mut row = DVector::zeros(total);
            for (i, c) in cols.iter().enumerate() {
                row[i] = c[j];
            }
            row[k] = -1.0;
            lp.add_le(row.clone(), -pt.grad_f[j]);
            for i in 0..k {
                row[i] = -row[i];
            }
            lp.add_le(row, pt.grad_f[j]);
        }
    };
    let mut lp = LinearProgram::new(total);
    build(&mut lp);
    let mut c = DVector::zeros(total);
    c[k] = 1.0;
    lp.set_objective(c);
    let tstar = match lp.solve(Sense::Min, tau)? {
        LpOutcome::Optimal { value, .. } => value,
        _ => return Ok(None),
    };
    if tstar > thr {
        return Ok(None);
    }
    let mut lp = LinearProgram::new(total);
    build(&mut lp);
    let mut cap = DVector::zeros(total);
    cap[k] = 1.0;
    lp.add_le(cap, tstar.max(0.0) * (1.0 + 1e-9) + 1e-15);
    let mut c = DVector::zeros(total);
    for i in 0..k {
        lp.set_kind(k + 1 + i, VarKind::Nonneg);
        c[k + 1 + i] = 1.0;
        let mut row = DVector::zeros(total);
        row[i] = 1.0;
        row[k + 1 + i] = -1.0;
        lp.add_le(row.clone(), 0.0);
        row[i] = -1.0;
        lp.add_le(row, 0.0);
    }
    lp.set_objective(c);
    let x = match lp.solve(Sense::Min, tau)? {
        LpOutcome::Optimal { x, .. } => x,
        _ => return Ok(None),
    };
    let mut mult = layout.to_multipliers(pt.problem, &x.as_slice()[..k]);
    // Nonnegative variables come back from the simplex as exact zeros or
    // positives; clean tiny noise on the free ones.
    for v in mult.rho.iter_mut().chain(mult.mu.iter_mut()).chain(mult.nu.iter_mut()) {
        if v.abs() < 1e-14 {
            *v = 0.0;
        }
    }
    let res = lagrangian_gradient(pt.problem, &pt.x, &mult)?.amax();
    Ok(Some((mult, res)))
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// μ free on I_G ∪ I_GH, ν free on I_H ∪ I_GH, no complementarity.
pub fn check_w_stationary(pt: &ActivePoint<'_>) -> Result<StationarityVerdict, StationarityError> {
    let s = &pt.sets;
    let layout = MultLayout::new(pt, &union_sorted(&s.i_g0, &s.i_gh), &union_sorted(&s.i_h0, &s.i_gh));
    let found = solve_multiplier_lp(pt, &layout)?;
    Ok(verdict(StationarityKind::W, found, Vec::new()))
}

/// μ free on I_G only, ν free on I_H only.
pub fn check_s_stationary(pt: &ActivePoint<'_>) -> Result<StationarityVerdict, StationarityError> {
    let layout = MultLayout::new(pt, &pt.sets.i_g0, &pt.sets.i_h0);
    let found = solve_multiplier_lp(pt, &layout)?;
    Ok(verdict(StationarityKind::S, found, Vec::new()))
}

/// One LP per zero pattern on I_GH (μ_k = 0 or ν_k = 0).
pub fn check_m_stationary(pt: &ActivePoint<'_>) -> Result<StationarityVerdict, StationarityError> {
    let s = &pt.sets;
    let k = s.i_gh.len();
    let masks: Vec<usize> = (0..1usize << k).collect();
    let results = par::map(&masks, |&mask| {
        let mu_zero: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 0).map(|j| s.i_gh[j]).collect();
        let nu_zero: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| s.i_gh[j]).collect();
        let layout = MultLayout::new(pt, &union_sorted(&s.i_g0, &nu_zero), &union_sorted(&s.i_h0, &mu_zero));
        solve_multiplier_lp(pt, &layout).map(|found| (mu_zero, found))
    });
    let mut patterns = Vec::new();
    let mut best: Option<(Multipliers, f64)> = None;
    for r in results {
        let (mu_zero, found) = r?;
        patterns.push(PatternResult { mu_zero, feasible: found.is_some(), witness: found.as_ref().map(|f| f.0.clone()) });
        if best.is_none() {
            best = found;
        }
    }
    Ok(verdict(StationarityKind::M, best, patterns))
}

fn verdict(kind: StationarityKind, found: Option<(Multipliers, f64)>, patterns: Vec<PatternResult>) -> StationarityVerdict {
    StationarityVerdict {
        kind,
        status: Status::from_bool(found.is_some()),
        residual: found.as_ref().map(|f| f.1),
        witness: found.map(|f| f.0),
        patterns,
    }
}

/// The polyhedron of all S-multipliers in the coordinates
/// (λ on I_g, ρ, μ on I_G, ν on I_H).
#[derive(Debug, Clone)]
pub struct SMultiplierSet {
    pub poly: Polyhedron,
    pub coords: Vec<Constraint>,
}

impl SMultiplierSet {
    pub fn to_multipliers(&self, p: &MpscProblem, v: &DVector<f64>) -> Multipliers {
        let mut m = Multipliers::zeros(p);
        for (c, &x) in self.coords.iter().zip(v.iter()) {
            *m.get_mut(*c) = x;
        }
        m
    }
}

pub fn s_multiplier_polyhedron(pt: &ActivePoint<'_>) -> Result<SMultiplierSet, StationarityError> {
    if check_s_stationary(pt)?.status != Status::Holds {
        return Err(StationarityError::NotStrong);
    }
    let layout = MultLayout::new(pt, &pt.sets.i_g0, &pt.sets.i_h0);
    let k = layout.vars.len();
    let mut poly = Polyhedron::new(k);
    for j in 0..pt.n() {
        let row = DVector::from_iterator(k, layout.vars.iter().map(|(c, _)| pt.grad(*c)[j]));
        poly.push_eq(row, -pt.grad_f[j]);
    }
    for (i, (_, kind)) in layout.vars.iter().enumerate() {
        if *kind == VarKind::Nonneg {
            let mut row = DVector::zeros(k);
            row[i] = -1.0;
            poly.push_le(row, 0.0);
        }
    }
    Ok(SMultiplierSet { poly, coords: layout.vars.iter().map(|(c, _)| *c).collect() })
}

/// Whether the point is a KKT point of the local branch for `b`.
pub fn branch_kkt(pt: &ActivePoint<'_>, b: &Bipartition) -> Result<Option<Multipliers>, StationarityError> {
    let mu_on = union_sorted(&pt.sets.i_g0, &b.beta1);
    let nu_on = union_sorted(&pt.sets.i_h0, &b.beta2);
    Ok(solve_multiplier_lp(pt, &MultLayout::new(pt, &mu_on, &nu_on))?.map(|f| f.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgePartition {
    pub partition: Bipartition,
    pub kkt: bool,
    pub kkt_multiplier: Option<Multipliers>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgeReport {
    /// From the zero pattern of μ (first) and of ν (second).
    pub partitions: [BridgePartition; 2],
    /// Input with μ zeroed off I_G and ν zeroed off I_H.
    pub reconstructed: Multipliers,
    pub reconstructed_residual: Vec<f64>,
    pub s_certificate: Option<Multipliers>,
    /// The KKT statement is checked for each partition; whether one or both
    /// are intended is left open and both are reported.
    pub note: String,
}

/// Build the two partitions from the zero pattern of an M-multiplier,
/// test the branch KKT conditions, and try the zeroing reconstruction.
pub fn m_to_s_bridge(pt: &ActivePoint<'_>, mult: &Multipliers) -> Result<BridgeReport, StationarityError> {
    let gh = &pt.sets.i_gh;
    let zero = |v: f64| v.abs() <= pt.tol.tau_feas;
    let first = Bipartition {
        beta1: gh.iter().copied().filter(|&k| zero(mult.mu[k])).collect(),
        beta2: gh.iter().copied().filter(|&k| !zero(mult.mu[k])).collect(),
    };
    let second = Bipartition {
        beta1: gh.iter().copied().filter(|&k| !zero(mult.nu[k])).collect(),
        beta2: gh.iter().copied().filter(|&k| zero(mult.nu[k])).collect(),
    };
    let make = |b: Bipartition| -> Result<BridgePartition, StationarityError> {
        let kkt_multiplier = branch_kkt(pt, &b)?;
        Ok(BridgePartition { partition: b, kkt: kkt_multiplier.is_some(), kkt_multiplier })
    };
    let partitions = [make(first)?, make(second)?];
    let mut rec = mult.clone();
    for k in 0..pt.problem.l() {
        if !pt.sets.i_g0.contains(&k) {
            rec.mu[k] = 0.0;
        }
        if !pt.sets.i_h0.contains(&k) {
            rec.nu[k] = 0.0;
        }
    }
    let res = lagrangian_gradient(pt.problem, &pt.x, &rec)?;
    let ok = res.amax() <= stationarity_threshold(pt) && rec.lambda.iter().all(|&l| l >= 0.0);
    Ok(BridgeReport {
        partitions,
        reconstructed_residual: res.iter().copied().collect(),
        s_certificate: ok.then(|| rec.clone()),
        reconstructed: rec,
        note: "branch KKT reported for both partitions".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalKind {
    /// Limiting normal cone (M).
    Limiting,
    /// Fréchet normal cone (S).
    Frechet,
}

/// Decide 0 ∈ ∇f + ∇F·N_D(F(x̄)) with N assembled per switching pair
/// from the cross-set normal cones. Pairs whose cone is the cross set
/// itself are split into both axes and every combination is tried.
pub fn normal_cone_oracle(pt: &ActivePoint<'_>, kind: NormalKind) -> Result<bool, StationarityError> {
    let p = pt.problem;
    let x = &pt.x;
    let mut fixed_mu = Vec::new();
    let mut fixed_nu = Vec::new();
    let mut crosses = Vec::new();
    for (k, (a, b)) in p.switch_values(x)?.into_iter().enumerate() {
        let cone = cross_cones(a, b, pt.tol.tau_act, pt.tol.tau_feas).map_err(|_| StationarityError::NotStrong)?;
        let normal = match kind {
            NormalKind::Limiting => cone.limiting_normal,
            NormalKind::Frechet => cone.frechet_normal,
        };
        match normal {
            PlaneCone::HorizontalAxis => fixed_mu.push(k),
            PlaneCone::VerticalAxis => fixed_nu.push(k),
            PlaneCone::Origin => {}
            PlaneCone::Cross => crosses.push(k),
        }
    }
    let n = p.n();
    let gvals = p.g_values(x)?;
    for mask in 0..1usize << crosses.len() {
        let mut mu_on = fixed_mu.clone();
        let mut nu_on = fixed_nu.clone();
        for (j, &k) in crosses.iter().enumerate() {
            if mask >> j & 1 == 1 {
                mu_on.push(k);
            } else {
                nu_on.push(k);
            }
        }
        // Columns: ∇g scaled by nonnegative weights where g is active.
        let mut cols: Vec<(DVector<f64>, VarKind)> = Vec::new();
        for (i, &gv) in gvals.iter().enumerate() {
            if gv.abs() <= pt.tol.tau_act {
                cols.push((p.g[i].gradient(x)?, VarKind::Nonneg));
            }
        }
        for h in &p.h {
            cols.push((h.gradient(x)?, VarKind::Free));
        }
        for &k in &mu_on {
            cols.push((p.switches[k].0.gradient(x)?, VarKind::Free));
        }
        for &k in &nu_on {
            cols.push((p.switches[k].1.gradient(x)?, VarKind::Free));
        }
        let mut lp = LinearProgram::new(cols.len());
        for (i, (_, kind)) in cols.iter().enumerate() {
            lp.set_kind(i, *kind);
        }
        let gf = p.f.gradient(x)?;
        for j in 0..n {
            lp.add_eq(DVector::from_iterator(cols.len(), cols.iter().map(|(c, _)| c[j])), -gf[j]);
        }
        if lp.solve(Sense::Feasibility, pt.tol.tau_feas)?.is_feasible() {
            return Ok(true);
        }
    }
    Ok(false)
}
