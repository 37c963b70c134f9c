//! Acceptance gate: one pass/fail line per criterion.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DVector;

use mpsc_core::cones::{
    critical_cone, critical_subspace, cross_cones, describe_union, linearization_cone, sample_tangent_directions,
    CrossCase, CrossConeKind, PlaneCone,
};
use mpsc_core::cq::{check_acq, check_pcrsc, check_pwcr, check_rcrcq, check_wcr, i_g_minus, verify_rank_witness, CqVerdict};
use mpsc_core::numeric::{enumerate_generators, Tolerances};
use mpsc_core::penalty::{error_bound_probe, exact_penalty_probe, PROBE_RADIUS};
use mpsc_core::point::ActivePoint;
use mpsc_core::problem::Bipartition;
use mpsc_core::soc::{check_ssonc, check_wsonc, verify_witness};
use mpsc_core::stationarity::{
    check_m_stationary, check_s_stationary, lagrangian_gradient, normal_cone_oracle, NormalKind,
};
use mpsc_core::verdict::{Mode, Status};

use common::load;

/// Wall-clock budget per run.
const BUDGET: Duration = Duration::from_secs(5);
/// Multiplier identity and Lagrangian residual in the M-stationarity check.
const MULTIPLIER_TOL: f64 = 1e-8;
/// SSONC witness value.
const SSONC_VALUE: f64 = -2.0;
const SSONC_TOL: f64 = 1e-8;
/// Ratio growth demanded along the error-bound witness ray.
const GROWTH: f64 = 16.0;
/// Radius of the tangent sampling for the cross-set oracle.
const CROSS_RADIUS: f64 = 1e-3;
/// Unit vectors on the circle for the polar test.
const CIRCLE_POINTS: usize = 720;
const POLAR_SLACK: f64 = 1e-9;

type Outcome = Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn status_of(v: &CqVerdict, want: Status, label: &str) -> Outcome {
    ensure(v.status == want, format!("{label} {}: {} (expected {want})", v.name, v.status))?;
    ensure(v.mode == Mode::Sampled, format!("{label} {}: mode {}", v.name, v.mode))?;
    if want == Status::Fails {
        ensure(v.evidence.rank_witness.is_some(), format!("{label} {}: FAILS without witness", v.name))?;
    }
    Ok(())
}

fn witness_reverifies(pt: &ActivePoint<'_>, v: &CqVerdict, label: &str) -> Outcome {
    if let Some(w) = &v.evidence.rank_witness {
        ensure(verify_rank_witness(pt, w), format!("{label} {}: witness does not re-verify", v.name))?;
    }
    Ok(())
}

fn golden_cq_triples() -> Outcome {
    let t = tol();
    type Expect = [(fn(&ActivePoint<'_>) -> CqVerdict, Option<Status>); 3];
    let cases: [(&str, Vec<f64>, Expect); 3] = [
        (
            "pwcr_fails",
            vec![0.0; 3],
            [(check_wcr, Some(Status::Holds)), (check_pwcr, Some(Status::Fails)), (check_pcrsc, Some(Status::Holds))],
        ),
        ("wcr_fails", vec![0.0; 3], [(check_wcr, Some(Status::Fails)), (check_pwcr, Some(Status::Holds)), (check_pcrsc, None)]),
        (
            "pcrsc_fails",
            vec![0.0; 2],
            [(check_wcr, Some(Status::Holds)), (check_pwcr, Some(Status::Holds)), (check_pcrsc, Some(Status::Fails))],
        ),
    ];
    for (name, x, expect) in cases {
        let p = load(name);
        let pt = ActivePoint::new(&p, &x, &t).map_err(|e| e.to_string())?;
        for (check, want) in expect {
            let v = check(&pt);
            if let Some(want) = want {
                status_of(&v, want, name)?;
            }
            witness_reverifies(&pt, &v, name)?;
        }
    }
    Ok(())
}

fn m_not_s_stationarity() -> Outcome {
    let p = load("m_not_s");
    let x = [0.0, 0.0];
    let pt = ActivePoint::new(&p, &x, &tol()).map_err(|e| e.to_string())?;
    let m = check_m_stationary(&pt).map_err(|e| e.to_string())?;
    ensure(m.status == Status::Holds, format!("M: {}", m.status))?;
    let witnesses: Vec<_> = m.witness.iter().chain(m.patterns.iter().filter_map(|r| r.witness.as_ref())).collect();
    ensure(!witnesses.is_empty(), "M holds without a witness")?;
    for w in witnesses {
        let sum = w.mu[0] + w.nu[0];
        ensure((sum - 2.0).abs() <= MULTIPLIER_TOL, format!("mu+nu = {sum}"))?;
        let r = lagrangian_gradient(&p, &x, w).map_err(|e| e.to_string())?.amax();
        ensure(r <= MULTIPLIER_TOL, format!("Lagrangian gradient {r}"))?;
    }
    let s = check_s_stationary(&pt).map_err(|e| e.to_string())?;
    ensure(s.status == Status::Fails, format!("S: {}", s.status))?;
    ensure(normal_cone_oracle(&pt, NormalKind::Limiting).map_err(|e| e.to_string())?, "oracle rejects M")?;
    ensure(!normal_cone_oracle(&pt, NormalKind::Frechet).map_err(|e| e.to_string())?, "oracle accepts S")
}

fn i_g_minus_golden() -> Outcome {
    let t = tol();
    let cases: [(&str, Vec<f64>, Bipartition, Vec<usize>); 3] = [
        ("pwcr_fails", vec![0.0; 3], Bipartition { beta1: vec![0], beta2: vec![] }, vec![0]),
        ("pwcr_fails", vec![0.0; 3], Bipartition { beta1: vec![], beta2: vec![0] }, vec![]),
        ("pcrsc_fails", vec![0.0; 2], Bipartition { beta1: vec![], beta2: vec![0] }, vec![1]),
    ];
    for (name, x, b, want) in cases {
        let p = load(name);
        let pt = ActivePoint::new(&p, &x, &t).map_err(|e| e.to_string())?;
        let m = i_g_minus(&pt, &b);
        ensure(m.indices == want, format!("{name} {}: {:?} (expected {want:?}, 0-based)", b.label(), m.indices))?;
        ensure(m.agrees(), format!("{name} {}: cross-check {:?}", b.label(), m.cross_check))?;
    }
    Ok(())
}

fn acq_verdicts() -> Outcome {
    let t = tol();
    let x = [0.0; 3];

    let p = load("acq_fails");
    let pt = ActivePoint::new(&p, &x, &t).map_err(|e| e.to_string())?;
    let v = check_acq(&pt);
    ensure(v.status == Status::Fails, format!("acq_fails: ACQ {}", v.status))?;
    let w = v.evidence.acq_witness.as_ref().ok_or("FAILS without witness")?;
    let d = DVector::from_column_slice(&w.direction);
    ensure(linearization_cone(&pt).member(&d, t.tau_feas).is_some(), "witness outside the linearization cone")?;
    ensure(d[0] >= -t.tau_feas, "witness outside R+ x R x R")?;
    for r in [t.eps_ball / 2.0, t.eps_ball / 8.0] {
        let y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + r * b).collect();
        let res = p.residual(&y).map_err(|e| e.to_string())?;
        ensure(res > 10.0 * t.tau_feas, format!("residual {res:e} at radius {r} does not leave the feasible set"))?;
    }

    let p = load("acq_holds");
    let pt = ActivePoint::new(&p, &x, &t).map_err(|e| e.to_string())?;
    let v = check_acq(&pt);
    ensure(v.status == Status::Holds, format!("acq_holds: ACQ {}", v.status))?;
    let cloud = sample_tangent_directions(&pt);
    let cos_tol = t.angular_tol.cos();
    for piece in &linearization_cone(&pt).pieces {
        let gens = enumerate_generators(&piece.cone, &t).map_err(|e| e.to_string())?;
        for g in gens.conic_directions() {
            let best = cloud.samples.iter().map(|s| s.dir.dot(&g) / (s.dir.norm() * g.norm())).fold(f64::MIN, f64::max);
            ensure(best >= cos_tol, format!("generator {:?} of {} unmatched (best cos {best})", g.as_slice(), piece.tag))?;
        }
    }
    Ok(())
}

fn sonc_examples() -> Outcome {
    let t = tol();
    let x = [0.0, 0.0];

    let p = load("ssonc_fails");
    let pt = ActivePoint::new(&p, &x, &t).map_err(|e| e.to_string())?;
    let s = check_ssonc(&pt).map_err(|e| e.to_string())?;
    ensure(s.status == Status::Fails, format!("SSONC {}", s.status))?;
    let w = s.witness.as_ref().ok_or("SSONC FAILS without witness")?;
    ensure((w.value - SSONC_VALUE).abs() <= SSONC_TOL, format!("witness value {}", w.value))?;
    let d = DVector::from_column_slice(&w.direction);
    ensure((d.norm() - 1.0).abs() <= SSONC_TOL && d[1].abs() <= SSONC_TOL, format!("witness direction {:?}", w.direction))?;
    ensure(verify_witness(&pt, s.kind, w), "SSONC witness does not re-verify")?;
    let weak = check_wsonc(&pt).map_err(|e| e.to_string())?;
    ensure(weak.status == Status::Holds, format!("WSONC {}", weak.status))?;
    ensure(critical_subspace(&pt).ncols() == 0, "critical subspace is not {0}")?;

    let p = load("trivial_critical");
    let pt = ActivePoint::new(&p, &x, &t).map_err(|e| e.to_string())?;
    let r = check_rcrcq(&pt);
    ensure(r.status == Status::Holds, format!("trivial_critical: RCRCQ {}", r.status))?;
    let pieces = describe_union(&critical_cone(&pt, None), &t);
    ensure(pieces.iter().all(|p| p.is_origin()), "trivial_critical: critical cone is not {0}")?;
    let s = check_ssonc(&pt).map_err(|e| e.to_string())?;
    ensure(s.status == Status::Holds && s.mode == Mode::Exact, format!("trivial_critical: SSONC {} ({})", s.status, s.mode))
}

// ---------------------------------------------------------------------------
// Cross-set oracle by brute force

fn on_axis(v: (f64, f64), horizontal: bool) -> bool {
    if horizontal {
        v.1.abs() <= 1e-9
    } else {
        v.0.abs() <= 1e-9
    }
}

/// Cone tag of a finite set of unit directions of the plane.
fn classify(dirs: &[(f64, f64)]) -> Result<PlaneCone, String> {
    if dirs.is_empty() {
        return Ok(PlaneCone::Origin);
    }
    let has = |target: (f64, f64)| dirs.iter().any(|d| (d.0 - target.0).abs() + (d.1 - target.1).abs() <= 1e-9);
    let horiz = has((1.0, 0.0)) && has((-1.0, 0.0));
    let vert = has((0.0, 1.0)) && has((0.0, -1.0));
    let off_axis = dirs.iter().any(|d| !on_axis(*d, true) && !on_axis(*d, false));
    if off_axis {
        return Err(format!("directions off both axes: {:?}", dirs.iter().find(|d| !on_axis(**d, true) && !on_axis(**d, false))));
    }
    match (horiz, vert) {
        (true, true) => Ok(PlaneCone::Cross),
        (true, false) if dirs.iter().all(|d| on_axis(*d, true)) => Ok(PlaneCone::HorizontalAxis),
        (false, true) if dirs.iter().all(|d| on_axis(*d, false)) => Ok(PlaneCone::VerticalAxis),
        _ => Err(format!("unclassifiable direction set of {} elements", dirs.len())),
    }
}

/// Unit directions from (a, b) to points of the cross set within `r`.
fn tangent_directions(a: f64, b: f64, r: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let steps = 50;
    for k in 1..=steps {
        let s = r * k as f64 / steps as f64;
        for sign in [-1.0, 1.0] {
            for y in [(a + sign * s, 0.0), (0.0, b + sign * s)] {
                if y.0 * y.1 != 0.0 {
                    continue;
                }
                let d = (y.0 - a, y.1 - b);
                let n = (d.0 * d.0 + d.1 * d.1).sqrt();
                if n > 0.0 && n <= r {
                    out.push((d.0 / n, d.1 / n));
                }
            }
        }
    }
    out
}

fn circle() -> Vec<(f64, f64)> {
    (0..CIRCLE_POINTS)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / CIRCLE_POINTS as f64;
            let (s, c) = th.sin_cos();
            (if c.abs() < 1e-12 { 0.0 } else { c }, if s.abs() < 1e-12 { 0.0 } else { s })
        })
        .collect()
}

fn frechet_normal(a: f64, b: f64) -> Vec<(f64, f64)> {
    let tangents = tangent_directions(a, b, CROSS_RADIUS);
    circle().into_iter().filter(|v| tangents.iter().all(|d| v.0 * d.0 + v.1 * d.1 <= POLAR_SLACK)).collect()
}

/// Union of Fréchet normals at (a, b) and at cross-set points converging to it.
fn limiting_normal(a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = frechet_normal(a, b);
    for k in 1..=4 {
        let s = 10f64.powi(-k);
        for y in [(a + s, 0.0), (a - s, 0.0), (0.0, b + s), (0.0, b - s)] {
            if y.0 * y.1 == 0.0 && ((y.0 - a).powi(2) + (y.1 - b).powi(2)).sqrt() <= 1e-1 {
                out.extend(frechet_normal(y.0, y.1));
            }
        }
    }
    out
}

fn brute_force_cross(a: f64, b: f64) -> Result<CrossConeKind, String> {
    let tangent = classify(&tangent_directions(a, b, CROSS_RADIUS))?;
    let frechet_normal = classify(&frechet_normal(a, b))?;
    let limiting_normal = classify(&limiting_normal(a, b))?;
    let case = match tangent {
        PlaneCone::VerticalAxis => CrossCase::AZeroBNonzero,
        PlaneCone::HorizontalAxis => CrossCase::ANonzeroBZero,
        PlaneCone::Cross => CrossCase::BothZero,
        PlaneCone::Origin => return Err(format!("isolated point ({a}, {b})")),
    };
    Ok(CrossConeKind { case, tangent, frechet_normal, limiting_normal })
}

fn cross_set_oracle() -> Outcome {
    let t = tol();
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut checked = 0;
    for a in grid {
        for b in grid {
            if a * b != 0.0 {
                continue;
            }
            let got = cross_cones(a, b, t.tau_act, t.tau_feas).map_err(|e| e.to_string())?;
            let want = brute_force_cross(a, b).map_err(|e| format!("({a}, {b}): {e}"))?;
            ensure(got == want, format!("({a}, {b}): {got:?} vs brute force {want:?}"))?;
            checked += 1;
        }
    }
    ensure(checked == 9, format!("{checked} grid points"))
}

fn error_bound_and_penalty() -> Outcome {
    let t = tol();
    let p = load("pcrsc_fails");
    let eb = error_bound_probe(&p, &[0.0, 0.0], &t).map_err(|e| e.to_string())?;
    ensure(eb.status == Status::Fails, format!("pcrsc_fails: error bound {}", eb.status))?;
    ensure(eb.witness.len() >= 2, "no witness sequence")?;
    for s in &eb.witness {
        ensure(s.point[1].abs() <= 1e-12 && s.point[0] > 0.0, format!("witness {:?} off the (t, 0) ray", s.point))?;
    }
    let first = eb.witness.first().unwrap().ratio;
    let last = eb.witness.last().unwrap().ratio;
    ensure(last >= GROWTH * first * (1.0 - 1e-6), format!("growth {} < {GROWTH}", last / first))?;

    let p = load("trivial_critical");
    let x = [0.0, 0.0];
    let eb = error_bound_probe(&p, &x, &t).map_err(|e| e.to_string())?;
    ensure(eb.status == Status::Holds, format!("trivial_critical: error bound {}", eb.status))?;
    let report = exact_penalty_probe(&p, &x, &t, None).map_err(|e| e.to_string())?;
    let kappa_bar = report.kappa_bar_hat.ok_or("no kappa estimate")?;
    ensure(report.samples >= 1000 && report.radius == PROBE_RADIUS, format!("{} samples at radius {}", report.samples, report.radius))?;
    let row = report
        .kappas
        .iter()
        .find(|k| (k.kappa - 2.0 * kappa_bar).abs() <= 1e-12 * kappa_bar)
        .ok_or("kappa grid lacks 2·kappa_bar")?;
    ensure(row.local_min, format!("not a sampled local minimizer at kappa {} (gap {})", row.kappa, row.worst_gap))
}

// ---------------------------------------------------------------------------

struct Gate {
    failed: usize,
}

impl Gate {
    fn run(&mut self, label: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let result = result.and_then(|_| ensure(elapsed < BUDGET, format!("took {:.2}s, budget {}s", elapsed.as_secs_f64(), BUDGET.as_secs())));
        match result {
            Ok(()) => println!("[PASS] {label} ({:.2}s)", elapsed.as_secs_f64()),
            Err(e) => {
                self.failed += 1;
                println!("[FAIL] {label} ({:.2}s): {e}", elapsed.as_secs_f64());
            }
        }
    }

    /// A criterion made of several runs, each held to the budget.
    fn run_all(&mut self, label: &str, parts: &[(&str, fn() -> Outcome)]) {
        let mut lines = Vec::new();
        let mut errors = Vec::new();
        let start = Instant::now();
        for (name, f) in parts {
            let t0 = Instant::now();
            let r = f();
            let dt = t0.elapsed();
            lines.push(format!("{name} {:.2}s", dt.as_secs_f64()));
            match r {
                Err(e) => errors.push(format!("{name}: {e}")),
                Ok(()) if dt >= BUDGET => errors.push(format!("{name}: took {:.2}s", dt.as_secs_f64())),
                Ok(()) => {}
            }
        }
        let total = start.elapsed().as_secs_f64();
        if errors.is_empty() {
            println!("[PASS] {label} ({total:.2}s: {})", lines.join(", "));
        } else {
            self.failed += 1;
            println!("[FAIL] {label} ({total:.2}s): {}", errors.join("; "));
        }
    }
}

fn main() {
    let mut gate = Gate { failed: 0 };
    gate.run("1 golden CQ triples", golden_cq_triples);
    gate.run("2 M holds, S fails", m_not_s_stationarity);
    gate.run("3 I_g^- golden values", i_g_minus_golden);
    gate.run("4 ACQ verdicts", acq_verdicts);
    gate.run("5 second-order conditions", sonc_examples);
    gate.run("6 cross-set cone oracle", cross_set_oracle);
    gate.run("7 error bound and exact penalty", error_bound_and_penalty);
    gate.run_all(
        "8 property suites",
        &[
            ("derivatives", common::derivatives_match_finite_differences),
            ("branch union", common::branch_union_law),
            ("tangent cloud", common::tangent_cloud_in_linearization_cone),
            ("stationarity chain", common::stationarity_chain),
            ("zero sets", common::residual_distance_zero_sets),
            ("lattice", common::lattice_closure_sound),
            ("lattice on corpus", common::lattice_on_corpus),
            ("penalty descent", common::penalty_descent_not_below_enumerative),
        ],
    );
    if gate.failed > 0 {
        println!("{} criteria failed", gate.failed);
        std::process::exit(1);
    }
}
