//! Exact penalty function, distance to the feasible set, and sampled
//! probes for the local error bound and local exact penalization.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::random_unit;
use crate::expr::EvalError;
use crate::numeric::Tolerances;
use crate::par;
use crate::problem::{BranchProblem, MpscProblem, ProblemError};
use crate::solver::{nearest_feasible, start_points, SolveConfig};
use crate::verdict::{Mode, Status};

/// Growth of the ratio curve that counts as unbounded.
pub const EXPLODE_FACTOR: f64 = 16.0;
/// Growth still accepted as bounded.
pub const BOUNDED_FACTOR: f64 = 4.0;
/// Relative slack on the ratio comparisons.
pub const RATIO_SLACK: f64 = 1e-6;
/// Radius of the ball used for the Lipschitz estimate and the minimality test.
pub const PROBE_RADIUS: f64 = 0.05;
/// Samples in the minimality test.
pub const PROBE_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum PenaltyError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("point is infeasible (residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("no feasible point found near the query point")]
    NoWitness,
    #[error("penalty parameter must be positive, got {0}")]
    Kappa(f64),
}

/// sqrt(Σ max(g,0)² + Σ h² + Σ min(G², H²)).
pub fn residual(p: &MpscProblem, x: &[f64]) -> Result<f64, EvalError> {
    p.residual(x)
}

/// f(x) + κ·residual(x).
pub fn penalized_objective(p: &MpscProblem, x: &[f64], kappa: f64) -> Result<f64, PenaltyError> {
    if kappa <= 0.0 || kappa.is_nan() {
        return Err(PenaltyError::Kappa(kappa));
    }
    Ok(p.f.value(x)? + kappa * residual(p, x)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub distance: f64,
    pub witness: Vec<f64>,
    /// Distance from the grid fallback when it improved on the local solver.
    pub grid_gap: Option<f64>,
}

fn solve_cfg(tol: &Tolerances) -> SolveConfig {
    SolveConfig { tau_feas: tol.tau_feas, seed: tol.seed, lhs_starts: 4, ..SolveConfig::default() }
}

fn grid_starts(p: &MpscProblem, x: &[f64], half: f64) -> Result<Vec<Vec<f64>>, EvalError> {
    let n = x.len();
    let k = match n {
        1 => 401,
        2 => 81,
        _ => 31,
    };
    let total = (k as usize).pow(n as u32);
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(total);
    for idx in 0..total {
        let mut y = x.to_vec();
        let mut rem = idx;
        for yi in y.iter_mut() {
            let step = rem % k;
            rem /= k;
            *yi += half * (2.0 * step as f64 / (k - 1) as f64 - 1.0);
        }
        let r = p.residual(&y)?;
        scored.push((r, y));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(scored.into_iter().take(8).map(|s| s.1).collect())
}

/// Distance from `x` to the feasible set: nearest point over all global
/// branches by multistart projection, with a grid of starts for n ≤ 3 when
/// the local solver finds nothing.
pub fn distance_to_feasible(p: &MpscProblem, x: &[f64], tol: &Tolerances) -> Result<DistanceEstimate, PenaltyError> {
    distance_with_starts(p, x, &[], tol, true)
}

fn distance_with_starts(
    p: &MpscProblem,
    x: &[f64],
    extra: &[Vec<f64>],
    tol: &Tolerances,
    multistart: bool,
) -> Result<DistanceEstimate, PenaltyError> {
    if residual(p, x)? <= tol.tau_feas {
        return Ok(DistanceEstimate { distance: 0.0, witness: x.to_vec(), grid_gap: None });
    }
    let cfg = solve_cfg(tol);
    let branches = BranchProblem::all_global(p)?;
    let mut starts: Vec<Vec<f64>> = extra.to_vec();
    if multistart {
        starts.extend(start_points(x, &cfg).into_iter().skip(1));
    }
    let xv = DVector::from_column_slice(x);
    let found = nearest_feasible(&branches, x, &starts, &cfg)?;
    let local = found.map(|f| ((DVector::from_column_slice(&f.y) - &xv).norm(), f.y));
    if !multistart || x.len() > 3 {
        return local.map(|(d, y)| DistanceEstimate { distance: d, witness: y, grid_gap: None }).ok_or(PenaltyError::NoWitness);
    }
    let half = local.as_ref().map(|l| l.0.max(1e-3)).unwrap_or(1.0);
    let grid = grid_starts(p, x, half)?;
    let refined = nearest_feasible(&branches, x, &grid, &cfg)?.map(|f| ((DVector::from_column_slice(&f.y) - &xv).norm(), f.y));
    match (local, refined) {
        (Some(l), Some(g)) if g.0 < l.0 - 1e-6 => Ok(DistanceEstimate { distance: g.0, witness: g.1, grid_gap: Some(l.0 - g.0) }),
        (Some(l), _) => Ok(DistanceEstimate { distance: l.0, witness: l.1, grid_gap: None }),
        (None, Some(g)) => Ok(DistanceEstimate { distance: g.0, witness: g.1, grid_gap: None }),
        (None, None) => Err(PenaltyError::NoWitness),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusRow {
    pub radius: f64,
    pub max_ratio: f64,
    pub infeasible_samples: usize,
    pub failed_estimates: usize,
}

/// One sample along a probe ray.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioSample {
    pub point: Vec<f64>,
    pub distance: f64,
    pub residual: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub status: Status,
    pub mode: Mode,
    pub alpha_hat: f64,
    pub curve: Vec<RadiusRow>,
    /// Samples along the ray whose ratio grows fastest.
    pub witness: Vec<RatioSample>,
    pub directions: usize,
    pub seed: u64,
}

fn require_feasible(p: &MpscProblem, x: &[f64], tol: &Tolerances) -> Result<(), PenaltyError> {
    p.check_point(x)?;
    let r = residual(p, x)?;
    if r > tol.tau_feas {
        return Err(PenaltyError::Infeasible { residual: r });
    }
    Ok(())
}

/// Ratio dist/residual at x̄ + r·u for fixed directions u at the three
/// sampling radii. The same directions are used at every radius so growth
/// along a ray is visible.
pub fn error_bound_probe(p: &MpscProblem, xbar: &[f64], tol: &Tolerances) -> Result<ErrorBoundReport, PenaltyError> {
    require_feasible(p, xbar, tol)?;
    let n = p.n();
    let center = DVector::from_column_slice(xbar);
    let mut dirs = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(n);
            e[i] = s;
            dirs.push(e);
        }
    }
    for i in 0..tol.n_samples {
        let mut rng = par::rng(tol.seed, par::stream(50, i as u32));
        dirs.push(random_unit(&mut rng, n));
    }
    let radii = tol.radii();
    let tasks: Vec<(usize, usize)> = (0..dirs.len()).flat_map(|d| (0..3).map(move |r| (d, r))).collect();
    let anchor = [xbar.to_vec()];
    let results = par::map(&tasks, |&(d, r)| -> Option<Result<RatioSample, ()>> {
        let x = &center + &dirs[d] * radii[r];
        let res = residual(p, x.as_slice()).ok()?;
        if res <= tol.tau_feas {
            return None;
        }
        let est = distance_with_starts(p, x.as_slice(), &anchor, tol, false);
        Some(match est {
            Ok(e) => Ok(RatioSample { point: x.iter().copied().collect(), distance: e.distance, residual: res, ratio: e.distance / res }),
            Err(_) => Err(()),
        })
    });
    let mut table: Vec<[Option<RatioSample>; 3]> = vec![[None, None, None]; dirs.len()];
    let mut curve: Vec<RadiusRow> =
        radii.iter().map(|&r| RadiusRow { radius: r, max_ratio: 0.0, infeasible_samples: 0, failed_estimates: 0 }).collect();
    for (&(d, r), out) in tasks.iter().zip(results) {
        match out {
            None => {}
            Some(Err(())) => {
                curve[r].infeasible_samples += 1;
                curve[r].failed_estimates += 1;
            }
            Some(Ok(s)) => {
                curve[r].infeasible_samples += 1;
                curve[r].max_ratio = curve[r].max_ratio.max(s.ratio);
                table[d][r] = Some(s);
            }
        }
    }
    let alpha_hat = curve.iter().map(|c| c.max_ratio).fold(0.0, f64::max);
    // Fastest monotone growth along a single ray.
    let mut best: Option<(f64, usize)> = None;
    for (d, row) in table.iter().enumerate() {
        if let [Some(a), Some(b), Some(c)] = row {
            let slack = 1.0 + RATIO_SLACK;
            if a.ratio <= b.ratio * slack && b.ratio <= c.ratio * slack && a.ratio > 0.0 {
                let growth = c.ratio / a.ratio;
                if best.is_none_or(|(g, _)| growth > g) {
                    best = Some((growth, d));
                }
            }
        }
    }
    let (status, witness) = match best {
        Some((g, d)) if g * (1.0 + RATIO_SLACK) >= EXPLODE_FACTOR => {
            (Status::Fails, table[d].iter().flatten().cloned().collect())
        }
        _ if curve[2].max_ratio <= BOUNDED_FACTOR * curve[0].max_ratio * (1.0 + RATIO_SLACK) || alpha_hat == 0.0 => {
            (Status::Holds, Vec::new())
        }
        _ => (Status::Unknown, Vec::new()),
    };
    Ok(ErrorBoundReport { status, mode: Mode::Sampled, alpha_hat, curve, witness, directions: dirs.len(), seed: tol.seed })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaRow {
    pub kappa: f64,
    pub local_min: bool,
    /// min over samples of φ_κ(x) − φ_κ(x̄).
    pub worst_gap: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub error_bound: ErrorBoundReport,
    pub alpha_hat: f64,
    pub l_f_hat: f64,
    /// α̂·L̂_f, only when the error bound is not refuted.
    pub kappa_bar_hat: Option<f64>,
    pub kappas: Vec<KappaRow>,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

/// Sample points in the probe ball: uniform in the ball, plus points on
/// the coordinate rays at geometrically shrinking radii.
fn probe_points(center: &DVector<f64>, seed: u64) -> Vec<DVector<f64>> {
    let n = center.len();
    let mut out = Vec::with_capacity(PROBE_SAMPLES + 2 * n * 12);
    for i in 0..PROBE_SAMPLES {
        let mut rng = par::rng(seed, par::stream(60, i as u32));
        let u = random_unit(&mut rng, n);
        let s: f64 = rand::Rng::random::<f64>(&mut rng).powf(1.0 / n as f64);
        out.push(center + u * (PROBE_RADIUS * s));
    }
    for i in 0..n {
        for sign in [1.0, -1.0] {
            for j in 0..12 {
                let mut x = center.clone();
                x[i] += sign * PROBE_RADIUS * 0.5f64.powi(j);
                out.push(x);
            }
        }
    }
    out
}

/// Lipschitz estimate of f, error-bound constant, and sampled local
/// minimality of f + κ·residual at x̄ over a κ grid.
pub fn exact_penalty_probe(
    p: &MpscProblem,
    xbar: &[f64],
    tol: &Tolerances,
    kappas: Option<&[f64]>,
) -> Result<PenaltyReport, PenaltyError> {
    require_feasible(p, xbar, tol)?;
    let eb = error_bound_probe(p, xbar, tol)?;
    let center = DVector::from_column_slice(xbar);
    let points = probe_points(&center, tol.seed);
    let mut l_f_hat = p.f.gradient(xbar)?.norm();
    for x in &points {
        l_f_hat = l_f_hat.max(p.f.gradient(x.as_slice())?.norm());
    }
    let mut notes = vec![format!("Lipschitz estimate and minimality test over the ball of radius {PROBE_RADIUS}")];
    let kappa_bar_hat = match eb.status {
        Status::Fails => {
            notes.push("error bound refuted; threshold not claimed".into());
            None
        }
        _ => Some(eb.alpha_hat * l_f_hat),
    };
    let grid: Vec<f64> = match (kappas, kappa_bar_hat) {
        (Some(k), _) if !k.is_empty() => k.to_vec(),
        (_, Some(kb)) if kb > 0.0 => [0.5, 1.0, 2.0, 4.0].iter().map(|s| s * kb).collect(),
        _ => vec![1.0, 10.0, 100.0, 1000.0],
    };
    let values: Vec<(f64, f64)> = par::map(&points, |x| {
        let f = p.f.value(x.as_slice()).unwrap_or(f64::NAN);
        let r = residual(p, x.as_slice()).unwrap_or(f64::NAN);
        (f, r)
    });
    let f0 = p.f.value(xbar)?;
    let r0 = residual(p, xbar)?;
    let mut rows = Vec::new();
    for &kappa in &grid {
        if kappa <= 0.0 || kappa.is_nan() {
            return Err(PenaltyError::Kappa(kappa));
        }
        let phi0 = f0 + kappa * r0;
        let mut worst = (f64::INFINITY, 0usize);
        for (i, &(f, r)) in values.iter().enumerate() {
            let gap = f + kappa * r - phi0;
            if gap < worst.0 {
                worst = (gap, i);
            }
        }
        rows.push(KappaRow {
            kappa,
            local_min: worst.0 >= -tol.tau_feas,
            worst_gap: worst.0,
            worst_point: points[worst.1].iter().copied().collect(),
        });
    }
    Ok(PenaltyReport {
        alpha_hat: eb.alpha_hat,
        error_bound: eb,
        l_f_hat,
        kappa_bar_hat,
        kappas: rows,
        radius: PROBE_RADIUS,
        samples: points.len(),
        seed: tol.seed,
        notes,
    })
}
