//! Property suites shared by the test targets and the acceptance runner.
//! Every suite runs a fixed number of cases from a pinned seed.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use mpsc_core::cones::{linearization_cone, sample_tangent_directions};
use mpsc_core::cq::{lattice_closure, CqName, CqVerdict, Evidence, LATTICE_EDGES};
use mpsc_core::expr::{Expr, SmoothFn};
use mpsc_core::numeric::Tolerances;
use mpsc_core::penalty::{distance_to_feasible, penalized_objective};
use mpsc_core::point::ActivePoint;
use mpsc_core::problem::{BranchProblem, MpscProblem};
use mpsc_core::solver::{solve_enumerative, solve_penalty_descent, SolveConfig, SolveStatus};
use mpsc_core::stationarity::{check_m_stationary, check_s_stationary, check_w_stationary, normal_cone_oracle, NormalKind};
use mpsc_core::verdict::{Mode, Status};

pub const CASES: u32 = 200;
pub const PENALTY_CASES: u32 = 20;
const SEED: [u8; 32] = *b"mpsc-property-suites-seed-000042";

pub const GRAD_REL_TOL: f64 = 1e-5;
pub const HESS_REL_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;
pub const DESCENT_SLACK: f64 = 1e-6;

/// Problem files and the point each is analyzed at.
pub const CORPUS: &[(&str, &[f64])] = &[
    ("pwcr_fails", &[0.0, 0.0, 0.0]),
    ("wcr_fails", &[0.0, 0.0, 0.0]),
    ("pcrsc_fails", &[0.0, 0.0]),
    ("squared_singleton", &[0.0, 0.0]),
    ("m_not_s", &[0.0, 0.0]),
    ("acq_fails", &[0.0, 0.0, 0.0]),
    ("acq_holds", &[0.0, 0.0, 0.0]),
    ("ssonc_fails", &[0.0, 0.0]),
    ("trivial_critical", &[0.0, 0.0]),
];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn load(name: &str) -> MpscProblem {
    MpscProblem::load(corpus_dir().join(format!("{name}.mpsc"))).unwrap()
}

pub fn corpus() -> Vec<(&'static str, MpscProblem, Vec<f64>)> {
    CORPUS.iter().map(|(n, x)| (*n, load(n), x.to_vec())).collect()
}

pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, rng_algorithm: RngAlgorithm::ChaCha, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &SEED))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Derivatives

fn monomial(n: usize) -> impl Strategy<Value = Expr> {
    (-3.0..3.0f64, prop::collection::vec((0..n, 1..=4i32), 0..=4)).prop_map(|(c, factors)| {
        let mut e = Expr::Const(c);
        let mut degree = 0;
        for (v, p) in factors {
            let p = p.min(4 - degree);
            if p == 0 {
                break;
            }
            degree += p;
            e = Expr::Mul(Box::new(e), Box::new(Expr::Pow(Box::new(Expr::Var(v)), p)));
        }
        e
    })
}

fn polynomial() -> impl Strategy<Value = (usize, Expr, Vec<f64>)> {
    (1..=4usize).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(monomial(n), 1..=5).prop_map(|ms| {
                ms.into_iter().reduce(|a, b| Expr::Add(Box::new(a), Box::new(b))).unwrap()
            }),
            prop::collection::vec(-2.0..2.0f64, n),
        )
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Symbolic gradient and Hessian against central differences.
pub fn derivatives_match_finite_differences() -> Result<(), String> {
    run(CASES, polynomial(), |(n, e, x)| {
        let f = SmoothFn::new(e, n);
        let g = f.gradient(&x).unwrap();
        let h = f.hessian(&x).unwrap();
        for i in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += FD_STEP;
            xm[i] -= FD_STEP;
            let fd = (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * FD_STEP);
            prop_assert!(rel_err(g[i], fd) <= GRAD_REL_TOL, "d/dx{i}: {} vs {fd}", g[i]);
            let gp = f.gradient(&xp).unwrap();
            let gm = f.gradient(&xm).unwrap();
            for j in 0..n {
                let fd = (gp[j] - gm[j]) / (2.0 * FD_STEP);
                prop_assert!(rel_err(h[(j, i)], fd) <= HESS_REL_TOL, "H[{j},{i}]: {} vs {fd}", h[(j, i)]);
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Feasibility

/// Coordinates snapped to zero, tiny, or spread, so feasible and
/// infeasible points both occur.
fn coordinate() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), -1e-10..1e-10f64, -1.0..1.0f64]
}

fn corpus_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (0..CORPUS.len()).prop_flat_map(|i| (Just(i), prop::collection::vec(coordinate(), CORPUS[i].1.len())))
}

/// residual ≤ tau_feas exactly when some global branch is feasible.
pub fn branch_union_law() -> Result<(), String> {
    let problems = corpus();
    let tau = Tolerances::default().tau_feas;
    let feasible = AtomicUsize::new(0);
    run(CASES, corpus_point(), |(i, x)| {
        let p = &problems[i].1;
        let by_residual = p.residual(&x).unwrap() <= tau;
        let by_branch = BranchProblem::all_global(p).unwrap().iter().any(|b| b.is_feasible(&x, tau).unwrap());
        prop_assert_eq!(by_residual, by_branch, "{} at {:?}", problems[i].0, x);
        feasible.fetch_add(by_residual as usize, Ordering::Relaxed);
        Ok(())
    })?;
    let feasible = feasible.into_inner();
    if feasible == 0 || feasible == CASES as usize {
        return Err(format!("{feasible} of {CASES} points feasible; both sides not exercised"));
    }
    Ok(())
}

/// Problems cheap enough for the distance and tangent suites.
const LIGHT: &[usize] = &[0, 1, 2, 4, 5, 6, 8];

/// distance = 0 exactly when residual ≤ tau_feas.
pub fn residual_distance_zero_sets() -> Result<(), String> {
    let problems = corpus();
    let tol = Tolerances::default();
    let strategy = prop::sample::select(LIGHT).prop_flat_map(|i| (Just(i), prop::collection::vec(coordinate(), CORPUS[i].1.len())));
    run(CASES, strategy, |(i, x)| {
        let p = &problems[i].1;
        let feasible = p.residual(&x).unwrap() <= tol.tau_feas;
        let d = distance_to_feasible(p, &x, &tol).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(feasible, d.distance == 0.0, "{} at {:?}: distance {}", problems[i].0, x, d.distance);
        prop_assert!(p.residual(&d.witness).unwrap() <= tol.tau_feas);
        Ok(())
    })
}

/// Swapping G and H leaves the residual unchanged; φ_κ is nondecreasing in κ.
pub fn residual_symmetry_and_penalty_monotonicity() -> Result<(), String> {
    let problems = corpus();
    let strategy = (corpus_point(), 0.1..10.0f64, 0.0..10.0f64);
    run(CASES, strategy, |((i, x), k, dk)| {
        let p = &problems[i].1;
        let mut swapped = p.clone();
        for s in swapped.switches.iter_mut() {
            *s = (s.1.clone(), s.0.clone());
        }
        prop_assert_eq!(p.residual(&x).unwrap(), swapped.residual(&x).unwrap());
        let lo = penalized_objective(p, &x, k).unwrap();
        let hi = penalized_objective(p, &x, k + dk).unwrap();
        prop_assert!(hi >= lo);
        // Strictness is only observable above rounding.
        if dk * p.residual(&x).unwrap() > 1e-12 * (1.0 + lo.abs()) {
            prop_assert!(hi > lo);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Tangent cloud

/// Every sampled tangent direction lies in the linearization cone union.
pub fn tangent_cloud_in_linearization_cone() -> Result<(), String> {
    let problems = corpus();
    let strategy = (prop::sample::select(LIGHT), any::<u64>());
    run(CASES, strategy, |(i, seed)| {
        let (name, p, x) = &problems[i];
        let tol = Tolerances { seed, n_samples: 24, ..Tolerances::default() };
        let pt = ActivePoint::new(p, x, &tol).unwrap();
        let lin = linearization_cone(&pt);
        for s in sample_tangent_directions(&pt).samples {
            prop_assert!(lin.angular_member(&s.dir, tol.angular_tol, tol.tau_feas).is_some(), "{name}: {:?}", s.dir);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Stationarity chain

/// Linear switching instance at the origin whose objective gradient is a
/// random signed combination of the constraint gradients.
#[derive(Debug, Clone)]
pub struct LinearInstance {
    pub text: String,
    pub n: usize,
}

fn form(coeffs: &[i32]) -> String {
    let terms: Vec<String> = coeffs.iter().enumerate().filter(|(_, c)| **c != 0).map(|(j, c)| format!("({c})*x{}", j + 1)).collect();
    if terms.is_empty() {
        "0*x1".into()
    } else {
        terms.join(" + ")
    }
}

fn linear_instance() -> impl Strategy<Value = LinearInstance> {
    (2..=3usize, 0..=2usize, 1..=2usize).prop_flat_map(|(n, m, l)| {
        let row = move || prop::collection::vec(-2..=2i32, n);
        (
            prop::collection::vec(row(), m),
            prop::collection::vec((row(), row()), l),
            prop::collection::vec(-2..=2i32, m + 2 * l),
            prop::collection::vec(-1..=1i32, n),
        )
            .prop_map(move |(ineqs, switches, weights, noise)| {
                let mut grad = vec![0i32; n];
                let rows: Vec<&Vec<i32>> = ineqs.iter().chain(switches.iter().flat_map(|(a, b)| [a, b])).collect();
                for (w, r) in weights.iter().zip(&rows) {
                    for j in 0..n {
                        grad[j] -= w * r[j];
                    }
                }
                for j in 0..n {
                    if noise[j] == 1 {
                        grad[j] += 1;
                    }
                }
                let mut text = format!("vars {}\nmin {}\n", (1..=n).map(|j| format!("x{j}")).collect::<Vec<_>>().join(" "), form(&grad));
                for r in &ineqs {
                    text.push_str(&format!("ineq {}\n", form(r)));
                }
                for (a, b) in &switches {
                    text.push_str(&format!("switch {} | {}\n", form(a), form(b)));
                }
                LinearInstance { text, n }
            })
    })
}

/// S ⟹ M ⟹ W, and M and S agree with the normal-cone oracle.
pub fn stationarity_chain() -> Result<(), String> {
    let tol = Tolerances::default();
    let counts: [AtomicUsize; 4] = Default::default();
    run(CASES, linear_instance(), |inst| {
        let p = MpscProblem::parse(&inst.text).unwrap();
        let x = vec![0.0; inst.n];
        let pt = ActivePoint::new(&p, &x, &tol).unwrap();
        let w = check_w_stationary(&pt).unwrap().status == Status::Holds;
        let m = check_m_stationary(&pt).unwrap().status == Status::Holds;
        let s = check_s_stationary(&pt).unwrap().status == Status::Holds;
        prop_assert!(!s || m, "S without M:\n{}", inst.text);
        prop_assert!(!m || w, "M without W:\n{}", inst.text);
        prop_assert_eq!(m, normal_cone_oracle(&pt, NormalKind::Limiting).unwrap(), "M oracle:\n{}", inst.text);
        prop_assert_eq!(s, normal_cone_oracle(&pt, NormalKind::Frechet).unwrap(), "S oracle:\n{}", inst.text);
        counts[w as usize + m as usize + s as usize].fetch_add(1, Ordering::Relaxed);
        Ok(())
    })?;
    let seen: Vec<usize> = counts.iter().map(|c| c.load(Ordering::Relaxed)).collect();
    if seen.iter().any(|&c| c == 0) {
        return Err(format!("verdict levels not all exercised: {seen:?}"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Lattice

fn verdict(name: CqName, status: Status) -> CqVerdict {
    CqVerdict { name, status, mode: Mode::Exact, evidence: Evidence::default() }
}

/// A truth table closed under the implication edges, partially observed:
/// closure never contradicts and every inference matches the truth.
pub fn lattice_closure_sound() -> Result<(), String> {
    let strategy = (prop::collection::vec(any::<bool>(), CqName::ALL.len()), prop::collection::vec(0..3u8, CqName::ALL.len()));
    run(CASES, strategy, |(seed_truth, observe)| {
        let mut truth: Vec<bool> = seed_truth;
        let idx = |n: CqName| CqName::ALL.iter().position(|m| *m == n).unwrap();
        loop {
            let mut changed = false;
            for (a, b) in LATTICE_EDGES {
                if truth[idx(a)] && !truth[idx(b)] {
                    truth[idx(b)] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let observed: Vec<CqVerdict> = CqName::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| observe[*i] > 0)
            .map(|(i, n)| verdict(*n, Status::from_bool(truth[i])))
            .collect();
        let closed = lattice_closure(&observed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for (i, v) in closed.iter().enumerate() {
            prop_assert_eq!(v.name, CqName::ALL[i]);
            if v.status != Status::Unknown {
                prop_assert_eq!(v.status, Status::from_bool(truth[i]), "{}", v.name);
            }
        }
        Ok(())
    })
}

/// Direct CQ checks on every corpus problem close without contradiction.
pub fn lattice_on_corpus() -> Result<(), String> {
    for (name, p, x) in corpus() {
        let pt = ActivePoint::new(&p, &x, &Tolerances::default()).map_err(|e| format!("{name}: {e}"))?;
        lattice_closure(&mpsc_core::cq::check_all(&pt)).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Solvers

fn small_instance() -> impl Strategy<Value = (String, Vec<f64>)> {
    (1..=3usize, 1..=2usize).prop_flat_map(|(n, l)| {
        let lin = move || (prop::collection::vec(-2..=2i32, n), -2..=2i32);
        (
            prop::collection::vec(-1.5..1.5f64, n),
            prop::collection::vec((lin(), lin()), l),
            prop::option::of(lin()),
            prop::collection::vec(-2.0..2.0f64, n),
        )
            .prop_map(move |(center, switches, ineq, x0)| {
                let vars: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
                let obj: Vec<String> = center.iter().enumerate().map(|(j, c)| format!("(x{} - ({c:.6}))^2", j + 1)).collect();
                let affine = |(c, b): &(Vec<i32>, i32)| format!("{} + ({b})", form(c));
                let mut text = format!("vars {}\nmin {}\n", vars.join(" "), obj.join(" + "));
                if let Some(g) = &ineq {
                    text.push_str(&format!("ineq {}\n", affine(g)));
                }
                for (a, b) in &switches {
                    text.push_str(&format!("switch {} | {}\n", affine(a), affine(b)));
                }
                (text, x0)
            })
    })
}

/// Penalty descent never beats branch enumeration on small instances.
pub fn penalty_descent_not_below_enumerative() -> Result<(), String> {
    let cfg = SolveConfig::default();
    let compared = AtomicUsize::new(0);
    run(PENALTY_CASES, small_instance(), |(text, x0)| {
        let p = MpscProblem::parse(&text).unwrap();
        let Ok(enumerative) = solve_enumerative(&p, &x0, &cfg) else {
            return Ok(());
        };
        let penalty = solve_penalty_descent(&p, &x0, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        if penalty.status == SolveStatus::Feasible {
            prop_assert!(
                penalty.objective >= enumerative.objective - DESCENT_SLACK,
                "penalty {} < enumerative {}\n{}",
                penalty.objective,
                enumerative.objective,
                text
            );
            compared.fetch_add(1, Ordering::Relaxed);
        }
        Ok(())
    })?;
    let compared = compared.into_inner();
    if compared < PENALTY_CASES as usize * 3 / 4 {
        return Err(format!("only {compared} of {PENALTY_CASES} instances compared"));
    }
    Ok(())
}
