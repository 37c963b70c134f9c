//! Local solvers for branch problems and the penalized objective.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::par;
use crate::problem::{BranchProblem, Constraint, MpscProblem, ProblemError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_growth: f64,
    /// Armijo sufficient-decrease constant; steps are halved.
    pub armijo_c: f64,
    /// Extra user-supplied start points.
    pub starts: Vec<Vec<f64>>,
    /// Latin-hypercube starts added around the first start.
    pub lhs_starts: usize,
    pub tau_kkt: f64,
    pub tau_feas: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_outer: 50,
            max_inner: 200,
            penalty_growth: 10.0,
            armijo_c: 1e-4,
            starts: Vec::new(),
            lhs_starts: 8,
            tau_kkt: 1e-6,
            tau_feas: 1e-8,
            seed: 42,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("every start stalled infeasible (best residual {best_residual:e})")]
    Stalled { best_residual: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Feasible,
    InfeasibleStall,
    Failure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchRow {
    pub branch: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub status: SolveStatus,
    pub branch: Option<String>,
    /// Stationarity kinds confirmed at the solution (filled by callers).
    pub stationarity: Vec<String>,
    pub kappa: Option<f64>,
    pub branches: Vec<BranchRow>,
    pub log: Vec<String>,
}

// ---------------------------------------------------------------------------
// Damped Newton with Armijo backtracking.

type Model<'a> = dyn Fn(&DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>), EvalError> + 'a;

struct Minimized {
    x: DVector<f64>,
    value: f64,
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let n = g.len();
    let scale = h.amax().max(1e-300);
    let mut delta = 0.0;
    for _ in 0..40 {
        let reg = h + DMatrix::identity(n, n) * delta;
        if let Some(ch) = Cholesky::new(reg) {
            let d = -ch.solve(g);
            if d.iter().all(|v| v.is_finite()) && g.dot(&d) < 0.0 {
                return d;
            }
        }
        delta = if delta == 0.0 { 1e-10 * scale.max(1.0) } else { delta * 10.0 };
    }
    -g
}

fn minimize(model: &Model<'_>, x0: DVector<f64>, max_iter: usize, gtol: f64, armijo_c: f64) -> Result<Minimized, EvalError> {
    let mut x = x0;
    let (mut fx, mut g, mut h) = model(&x)?;
    for _ in 0..max_iter {
        let gn = g.amax();
        if gn <= gtol || !fx.is_finite() {
            break;
        }
        let mut moved = false;
        for dir in [newton_direction(&g, &h), -g.clone()] {
            let slope = g.dot(&dir);
            let mut t = 1.0;
            for _ in 0..60 {
                let trial = &x + &dir * t;
                if let Ok((ft, gt, ht)) = model(&trial) {
                    if ft.is_finite() && ft <= fx + armijo_c * t * slope {
                        let progress = fx - ft;
                        x = trial;
                        fx = ft;
                        g = gt;
                        h = ht;
                        moved = progress > 0.0 || t * dir.amax() > 0.0;
                        break;
                    }
                }
                t *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved || x.amax() > 1e12 {
            break;
        }
    }
    Ok(Minimized { x, value: fx })
}

// ---------------------------------------------------------------------------
// Branch feasibility.

struct Terms {
    values: Vec<f64>,
    grads: Vec<DVector<f64>>,
    hessians: Vec<DMatrix<f64>>,
}

fn eval_terms(p: &MpscProblem, cs: &[Constraint], x: &[f64], hessians: bool) -> Result<Terms, EvalError> {
    let mut t = Terms { values: Vec::new(), grads: Vec::new(), hessians: Vec::new() };
    for c in cs {
        let f = p.constraint(*c);
        t.values.push(f.value(x)?);
        t.grads.push(f.gradient(x)?);
        if hessians {
            t.hessians.push(f.hessian(x)?);
        }
    }
    Ok(t)
}

/// Least-squares Gauss-Newton on equalities plus violated inequalities.
fn gauss_newton_polish(br: &BranchProblem<'_>, x: DVector<f64>, target: f64) -> Result<DVector<f64>, EvalError> {
    let p = br.base;
    let eqs = br.equalities();
    let ineqs = br.inequalities();
    let mut x = x;
    let mut r = br.residual(x.as_slice())?;
    for _ in 0..120 {
        if r <= target {
            break;
        }
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for c in &eqs {
            let f = p.constraint(*c);
            rows.push(f.gradient(x.as_slice())?.transpose());
            rhs.push(-f.value(x.as_slice())?);
        }
        for c in &ineqs {
            let f = p.constraint(*c);
            let v = f.value(x.as_slice())?;
            if v > 0.0 {
                rows.push(f.gradient(x.as_slice())?.transpose());
                rhs.push(-v);
            }
        }
        if rows.is_empty() {
            break;
        }
        let j = DMatrix::from_rows(&rows);
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        let Ok(step) = svd.solve(&DVector::from_vec(rhs), (1e-12 * smax).max(f64::MIN_POSITIVE)) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = &x + &step * t;
            if let Ok(rt) = br.residual(trial.as_slice()) {
                if rt < r {
                    x = trial;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(x)
}

/// Outcome of a projection onto a branch feasible set.
#[derive(Debug, Clone)]
pub struct Projection {
    pub y: Vec<f64>,
    pub residual: f64,
    pub feasible: bool,
}

/// Nearest point of the branch feasible set to `x0`, estimated by a
/// quadratic penalty with growing weight followed by Gauss-Newton polishing.
pub fn project_branch(br: &BranchProblem<'_>, x0: &[f64], cfg: &SolveConfig) -> Result<Projection, EvalError> {
    project_branch_from(br, x0, x0, cfg)
}

/// As [`project_branch`], starting the iteration at `start`.
pub fn project_branch_from(br: &BranchProblem<'_>, x0: &[f64], start: &[f64], cfg: &SolveConfig) -> Result<Projection, EvalError> {
    let p = br.base;
    let n = p.n();
    let anchor = DVector::from_column_slice(x0);
    let mut x = DVector::from_column_slice(start);
    if br.residual(start)? <= cfg.tau_feas && start == x0 {
        return Ok(Projection { y: x0.to_vec(), residual: br.residual(x0)?, feasible: true });
    }
    let eqs = br.equalities();
    let ineqs = br.inequalities();
    let mut rho = 1.0;
    while rho <= 1e12 {
        let model = |y: &DVector<f64>| -> Result<(f64, DVector<f64>, DMatrix<f64>), EvalError> {
            let d = y - &anchor;
            let mut val = d.norm_squared();
            let mut grad = &d * 2.0;
            let mut hess = DMatrix::identity(n, n) * 2.0;
            let te = eval_terms(p, &eqs, y.as_slice(), true)?;
            for i in 0..te.values.len() {
                let c = te.values[i];
                val += rho * c * c;
                grad += &te.grads[i] * (2.0 * rho * c);
                hess += (&te.grads[i] * te.grads[i].transpose()) * (2.0 * rho) + &te.hessians[i] * (2.0 * rho * c);
            }
            let ti = eval_terms(p, &ineqs, y.as_slice(), true)?;
            for i in 0..ti.values.len() {
                let c = ti.values[i];
                if c > 0.0 {
                    val += rho * c * c;
                    grad += &ti.grads[i] * (2.0 * rho * c);
                    hess += (&ti.grads[i] * ti.grads[i].transpose()) * (2.0 * rho) + &ti.hessians[i] * (2.0 * rho * c);
                }
            }
            Ok((val, grad, hess))
        };
        let out = minimize(&model, x.clone(), cfg.max_inner, 1e-13 * (1.0 + rho), cfg.armijo_c)?;
        x = out.x;
        if br.residual(x.as_slice())? <= cfg.tau_feas * 0.1 {
            break;
        }
        rho *= cfg.penalty_growth;
    }
    // Polish until no further progress, so degenerate sets are not
    // accepted at the first tolerance-feasible point.
    let x = gauss_newton_polish(br, x, 0.0)?;
    let residual = br.residual(x.as_slice())?;
    Ok(Projection { y: x.iter().copied().collect(), residual, feasible: residual <= cfg.tau_feas })
}

/// Nearest feasible point over several branches: each branch is projected
/// from `x` and from every extra start, and the closest feasible result wins.
pub fn nearest_feasible(
    branches: &[BranchProblem<'_>],
    x: &[f64],
    extra_starts: &[Vec<f64>],
    cfg: &SolveConfig,
) -> Result<Option<Projection>, EvalError> {
    let mut starts = vec![x.to_vec()];
    starts.extend(extra_starts.iter().cloned());
    let tasks: Vec<(usize, usize)> = (0..branches.len()).flat_map(|b| (0..starts.len()).map(move |s| (b, s))).collect();
    let results = par::map(&tasks, |&(b, s)| project_branch_from(&branches[b], x, &starts[s], cfg));
    let anchor = DVector::from_column_slice(x);
    let mut best: Option<(f64, Projection)> = None;
    for r in results {
        let proj = r?;
        if !proj.feasible {
            continue;
        }
        let d = (DVector::from_column_slice(&proj.y) - &anchor).norm();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, proj));
        }
    }
    Ok(best.map(|b| b.1))
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian on a branch.

/// Start points: the given start, user starts, then Latin-hypercube points
/// in the box x0 ± (1 + ‖x0‖∞).
pub fn start_points(x0: &[f64], cfg: &SolveConfig) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    out.extend(cfg.starts.iter().filter(|s| s.len() == x0.len()).cloned());
    let k = cfg.lhs_starts;
    if k == 0 {
        return out;
    }
    let half = 1.0 + x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = par::rng(cfg.seed, par::stream(1, 0));
    let mut cols: Vec<Vec<usize>> = Vec::new();
    for _ in 0..x0.len() {
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        cols.push(perm);
    }
    for i in 0..k {
        out.push(
            (0..x0.len())
                .map(|d| {
                    let u: f64 = rng.random();
                    x0[d] - half + 2.0 * half * (cols[d][i] as f64 + u) / k as f64
                })
                .collect(),
        );
    }
    out
}

fn solve_branch_single(br: &BranchProblem<'_>, x0: &[f64], cfg: &SolveConfig) -> Result<LocalSolution, EvalError> {
    let p = br.base;
    let eqs = br.equalities();
    let ineqs = br.inequalities();
    let mut lam = vec![0.0; eqs.len()];
    let mut mu = vec![0.0; ineqs.len()];
    let mut rho = 10.0;
    let mut x = DVector::from_column_slice(x0);
    let mut log = Vec::new();
    let mut last_viol = f64::INFINITY;
    for outer in 0..cfg.max_outer {
        let model = |y: &DVector<f64>| -> Result<(f64, DVector<f64>, DMatrix<f64>), EvalError> {
            let ys = y.as_slice();
            let mut val = p.f.value(ys)?;
            let mut grad = p.f.gradient(ys)?;
            let mut hess = p.f.hessian(ys)?;
            let te = eval_terms(p, &eqs, ys, true)?;
            for i in 0..te.values.len() {
                let c = te.values[i];
                val += lam[i] * c + 0.5 * rho * c * c;
                grad += &te.grads[i] * (lam[i] + rho * c);
                hess += (&te.grads[i] * te.grads[i].transpose()) * rho + &te.hessians[i] * (lam[i] + rho * c);
            }
            let ti = eval_terms(p, &ineqs, ys, true)?;
            for i in 0..ti.values.len() {
                let s = mu[i] + rho * ti.values[i];
                if s > 0.0 {
                    val += (s * s - mu[i] * mu[i]) / (2.0 * rho);
                    grad += &ti.grads[i] * s;
                    hess += (&ti.grads[i] * ti.grads[i].transpose()) * rho + &ti.hessians[i] * s;
                } else {
                    val -= mu[i] * mu[i] / (2.0 * rho);
                }
            }
            Ok((val, grad, hess))
        };
        let out = minimize(&model, x.clone(), cfg.max_inner, cfg.tau_kkt * 1e-2, cfg.armijo_c)?;
        x = out.x;
        if x.amax() > 1e10 || !out.value.is_finite() {
            log.push(format!("outer {outer}: diverged"));
            return Ok(LocalSolution {
                objective: f64::NEG_INFINITY,
                residual: br.residual(x.as_slice()).unwrap_or(f64::INFINITY),
                x: x.iter().copied().collect(),
                status: SolveStatus::Failure,
                branch: Some(br.tag.clone()),
                stationarity: Vec::new(),
                kappa: None,
                branches: Vec::new(),
                log,
            });
        }
        let xs = x.as_slice();
        let te = eval_terms(p, &eqs, xs, false)?;
        let ti = eval_terms(p, &ineqs, xs, false)?;
        let mut viol = 0.0f64;
        for i in 0..lam.len() {
            lam[i] += rho * te.values[i];
            viol = viol.max(te.values[i].abs());
        }
        for i in 0..mu.len() {
            mu[i] = (mu[i] + rho * ti.values[i]).max(0.0);
            viol = viol.max(ti.values[i].max(0.0));
        }
        // Lagrangian gradient with the updated multipliers.
        let mut kkt = p.f.gradient(xs)?;
        for i in 0..lam.len() {
            kkt += &te.grads[i] * lam[i];
        }
        for i in 0..mu.len() {
            kkt += &ti.grads[i] * mu[i];
        }
        let kkt = kkt.amax();
        log.push(format!("outer {outer}: rho={rho:.1e} viol={viol:.2e} kkt={kkt:.2e}"));
        if viol <= cfg.tau_feas * 0.1 && kkt <= cfg.tau_kkt {
            break;
        }
        if viol > 0.25 * last_viol {
            rho = (rho * cfg.penalty_growth).min(1e12);
        }
        last_viol = viol;
    }
    let mut residual = br.residual(x.as_slice())?;
    if residual > cfg.tau_feas && residual < 1e-3 {
        x = gauss_newton_polish(br, x, cfg.tau_feas * 1e-3)?;
        residual = br.residual(x.as_slice())?;
    }
    let status = if residual <= cfg.tau_feas { SolveStatus::Feasible } else { SolveStatus::InfeasibleStall };
    Ok(LocalSolution {
        objective: p.f.value(x.as_slice())?,
        residual,
        x: x.iter().copied().collect(),
        status,
        branch: Some(br.tag.clone()),
        stationarity: Vec::new(),
        kappa: None,
        branches: Vec::new(),
        log,
    })
}

fn better(a: &LocalSolution, b: &LocalSolution) -> bool {
    let rank = |s: &LocalSolution| match s.status {
        SolveStatus::Feasible => 0,
        SolveStatus::InfeasibleStall => 1,
        SolveStatus::Failure => 2,
    };
    match rank(a).cmp(&rank(b)) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => match a.status {
            SolveStatus::Feasible => a.objective < b.objective - 1e-12,
            _ => a.residual < b.residual,
        },
    }
}

fn pick_best(candidates: Vec<LocalSolution>) -> Option<LocalSolution> {
    let mut best: Option<LocalSolution> = None;
    for c in candidates {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            best = Some(c);
        }
    }
    best
}

/// Augmented-Lagrangian solve of one branch from every start point; the
/// best feasible result wins, ties going to the earlier start.
pub fn solve_branch(br: &BranchProblem<'_>, x0: &[f64], cfg: &SolveConfig) -> Result<LocalSolution, SolveError> {
    br.base.check_point(x0)?;
    let starts = start_points(x0, cfg);
    let results = par::map(&starts, |s| solve_branch_single(br, s, cfg));
    let ok: Vec<LocalSolution> = results.into_iter().filter_map(Result::ok).collect();
    Ok(pick_best(ok).unwrap_or(LocalSolution {
        x: x0.to_vec(),
        objective: f64::NAN,
        residual: f64::INFINITY,
        status: SolveStatus::Failure,
        branch: Some(br.tag.clone()),
        stationarity: Vec::new(),
        kappa: None,
        branches: Vec::new(),
        log: vec!["every start hit a domain error".into()],
    }))
}

/// Solve every global branch (per switching pair, G = 0 or H = 0) and keep
/// the feasible solution of least objective.
pub fn solve_enumerative(p: &MpscProblem, x0: &[f64], cfg: &SolveConfig) -> Result<LocalSolution, SolveError> {
    p.check_point(x0)?;
    let branches = BranchProblem::all_global(p)?;
    let sols = par::map(&branches, |br| solve_branch(br, x0, cfg));
    let mut table = Vec::new();
    let mut candidates = Vec::new();
    for s in sols {
        let s = s?;
        table.push(BranchRow {
            branch: s.branch.clone().unwrap_or_default(),
            status: s.status,
            objective: s.objective,
            residual: s.residual,
        });
        candidates.push(s);
    }
    let mut best = pick_best(candidates).expect("at least one branch");
    if best.status != SolveStatus::Feasible {
        return Err(SolveError::Stalled { best_residual: best.residual });
    }
    best.residual = p.residual(&best.x)?;
    best.branches = table;
    Ok(best)
}

/// Minimize f + κ·residual for a growing κ schedule. The min{G², H²} term
/// follows the currently smaller piece, ties taking G; the square root is
/// smoothed with a shrinking offset.
pub fn solve_penalty_descent(p: &MpscProblem, x0: &[f64], cfg: &SolveConfig) -> Result<LocalSolution, SolveError> {
    p.check_point(x0)?;
    let n = p.n();
    let mut x = DVector::from_column_slice(x0);
    let mut kappa = 1.0;
    let mut log = Vec::new();
    let all_g: Vec<Constraint> = (0..p.m()).map(Constraint::G).collect();
    let all_h: Vec<Constraint> = (0..p.p()).map(Constraint::H).collect();
    loop {
        let stage_start = x.clone();
        for sigma in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
            let model = |y: &DVector<f64>| -> Result<(f64, DVector<f64>, DMatrix<f64>), EvalError> {
                let ys = y.as_slice();
                let mut sq = 0.0;
                let mut gsq = DVector::zeros(n);
                let mut hsq = DMatrix::zeros(n, n);
                let mut add = |v: f64, g: DVector<f64>, h: DMatrix<f64>| {
                    sq += v * v;
                    hsq += (&g * g.transpose()) * 2.0 + &h * (2.0 * v);
                    gsq += g * (2.0 * v);
                };
                for c in &all_g {
                    let f = p.constraint(*c);
                    let v = f.value(ys)?;
                    if v > 0.0 {
                        add(v, f.gradient(ys)?, f.hessian(ys)?);
                    }
                }
                for c in &all_h {
                    let f = p.constraint(*c);
                    add(f.value(ys)?, f.gradient(ys)?, f.hessian(ys)?);
                }
                for (a, b) in &p.switches {
                    let (va, vb) = (a.value(ys)?, b.value(ys)?);
                    let piece = if va * va <= vb * vb { a } else { b };
                    add(piece.value(ys)?, piece.gradient(ys)?, piece.hessian(ys)?);
                }
                let s = (sq + sigma * sigma).sqrt();
                let val = p.f.value(ys)? + kappa * s;
                let grad = p.f.gradient(ys)? + &gsq * (kappa / (2.0 * s));
                let hess = p.f.hessian(ys)? + &hsq * (kappa / (2.0 * s))
                    - (&gsq * gsq.transpose()) * (kappa / (4.0 * s * s * s));
                Ok((val, grad, hess))
            };
            let out = minimize(&model, x.clone(), cfg.max_inner, 1e-12 * (1.0 + kappa), cfg.armijo_c)?;
            x = out.x;
            if x.amax() > 1e10 {
                break;
            }
        }
        if x.amax() > 1e10 {
            // Penalty too weak: the model is unbounded below. Retry the stage.
            log.push(format!("kappa={kappa:.1e} diverged"));
            x = stage_start;
            kappa *= cfg.penalty_growth;
            if kappa > 1e12 {
                return Err(SolveError::Stalled { best_residual: f64::INFINITY });
            }
            continue;
        }
        let residual = p.residual(x.as_slice())?;
        log.push(format!("kappa={kappa:.1e} residual={residual:.2e} f={:.6e}", p.f.value(x.as_slice())?));
        if residual <= cfg.tau_feas {
            return Ok(LocalSolution {
                objective: p.f.value(x.as_slice())?,
                residual,
                x: x.iter().copied().collect(),
                status: SolveStatus::Feasible,
                branch: None,
                stationarity: Vec::new(),
                kappa: Some(kappa),
                branches: Vec::new(),
                log,
            });
        }
        kappa *= cfg.penalty_growth;
        if kappa > 1e12 {
            return Ok(LocalSolution {
                objective: p.f.value(x.as_slice()).unwrap_or(f64::NAN),
                residual,
                x: x.iter().copied().collect(),
                status: SolveStatus::Failure,
                branch: None,
                stationarity: Vec::new(),
                kappa: Some(kappa),
                branches: Vec::new(),
                log,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Tolerances;
    use crate::problem::Bipartition;

    fn prob(text: &str) -> MpscProblem {
        MpscProblem::parse(text).unwrap()
    }

    #[test]
    fn projection_onto_line() {
        let p = prob("vars x1 x2\nmin x1\nswitch x1 | x2\n");
        let br = BranchProblem::global(&p, 1);
        let cfg = SolveConfig::default();
        let pr = project_branch(&br, &[0.3, 0.7], &cfg).unwrap();
        assert!(pr.feasible);
        assert!((pr.y[0]).abs() < 1e-9 && (pr.y[1] - 0.7).abs() < 1e-9, "{:?}", pr.y);
        let pr = project_branch(&br, &[0.0, 0.7], &cfg).unwrap();
        assert_eq!(pr.y, vec![0.0, 0.7]);
    }

    #[test]
    fn projection_onto_parabola() {
        let p = prob("vars x1 x2\nmin -x1\nineq -x1\nineq x2\nswitch x1 | x2 - x1^2\n");
        let sets = p.index_sets(&[0.0, 0.0], &Tolerances::default()).unwrap();
        let br = BranchProblem::local(&p, &sets, &Bipartition { beta1: vec![], beta2: vec![0] });
        let pr = project_branch(&br, &[0.2, 0.1], &SolveConfig::default()).unwrap();
        assert!(pr.residual <= 1e-8, "{pr:?}");
        // Grid oracle on the feasible arc x2 = x1², x1 ≥ 0, x2 ≤ 0: only the origin.
        assert!((pr.y[0]).abs() < 1e-4 && pr.y[1].abs() < 1e-8);
    }

    #[test]
    fn equality_constrained_minimum() {
        let p = prob("vars x1\nmin x1^2\neq x1 - 1\n");
        let br = BranchProblem::global(&p, 0);
        let s = solve_branch(&br, &[0.0], &SolveConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Feasible);
        assert!((s.x[0] - 1.0).abs() < 1e-7 && (s.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contradictory_branch_stalls() {
        let p = prob("vars x1\nmin x1\neq x1\neq x1 - 1\n");
        let br = BranchProblem::global(&p, 0);
        let s = solve_branch(&br, &[0.3], &SolveConfig::default()).unwrap();
        assert_ne!(s.status, SolveStatus::Feasible);
        assert!(solve_enumerative(&p, &[0.3], &SolveConfig::default()).is_err());
        let s = solve_penalty_descent(&p, &[0.3], &SolveConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Failure);
    }

    #[test]
    fn enumerative_on_two_branches() {
        // {x2 ≤ x1} ∩ ({x1 = 0} ∪ {x2 = 0}); hand case analysis gives the origin, value 0.
        let p = prob("vars x1 x2\nmin x1 - 3*x2\nineq x2 - x1\nswitch x1 | x2\n");
        let s = solve_enumerative(&p, &[1.0, 1.0], &SolveConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Feasible);
        assert!(s.objective.abs() < 1e-6, "{s:?}");
        assert!(s.x[0].abs() < 1e-5 && s.x[1].abs() < 1e-5);
        assert_eq!(s.branches.len(), 2);
    }

    #[test]
    fn penalty_descent_matches() {
        let p = prob("vars x1 x2\nmin x1 - 3*x2\nineq x2 - x1\nswitch x1 | x2\n");
        let s = solve_penalty_descent(&p, &[1.0, 1.0], &SolveConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Feasible);
        assert!(s.objective >= -1e-6, "{s:?}");
        let q = prob("vars x1 x2\nmin (x1 - 1)^2 + (x2 + 2)^2\n");
        let a = solve_penalty_descent(&q, &[0.0, 0.0], &SolveConfig::default()).unwrap();
        let b = solve_enumerative(&q, &[0.0, 0.0], &SolveConfig::default()).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-6);
        assert!((b.x[0] - 1.0).abs() < 1e-6 && (b.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let p = prob("vars x1 x2\nmin x1 - 3*x2\nineq x2 - x1\nswitch x1 | x2\n");
        let a = solve_enumerative(&p, &[1.0, 1.0], &SolveConfig::default()).unwrap();
        let b = solve_enumerative(&p, &[1.0, 1.0], &SolveConfig::default()).unwrap();
        assert_eq!(a.x, b.x);
    }
}
