use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mpsc_core::numeric::Tolerances;
use mpsc_core::penalty::{error_bound_probe, exact_penalty_probe, penalized_objective};
use mpsc_core::point::ActivePoint;
use mpsc_core::problem::{parse_point, MpscProblem};
use mpsc_core::report::{analyze, cones_report, render_error_bound, render_penalty, render_pieces, AnalyzeOptions};
use mpsc_core::solver::{solve_enumerative, solve_penalty_descent, SolveConfig, SolveStatus};
use mpsc_core::stationarity::check_w_stationary;
use mpsc_core::verdict::Status;

#[derive(Parser)]
#[command(name = "mpsc", version, about = "Analyze programs with switching constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full report at a point: index sets, cones, stationarity, CQs, SOC.
    Analyze {
        #[command(flatten)]
        at: PointArgs,
        /// Also run the error-bound and exact-penalty probes.
        #[arg(long)]
        penalty: bool,
    },
    /// Local solve by branch enumeration or penalty descent.
    Solve {
        file: PathBuf,
        /// Start point; repeatable.
        #[arg(long = "from", value_parser = point_arg, allow_hyphen_values = true)]
        from: Vec<Point>,
        #[arg(long, value_enum, default_value_t = SolveMode::Enumerative)]
        mode: SolveMode,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Exact-penalty probe over a grid of penalty parameters.
    Penalty {
        #[command(flatten)]
        at: PointArgs,
        /// Penalty parameter; repeatable.
        #[arg(long = "kappa", allow_hyphen_values = true)]
        kappa: Vec<f64>,
    },
    /// Sampled local error-bound probe.
    Errorbound {
        #[command(flatten)]
        at: PointArgs,
    },
    /// Linearization and critical cones in generator form.
    Cones {
        #[command(flatten)]
        at: PointArgs,
    },
    /// Parse a problem file and print its normalized form.
    Parse { file: PathBuf },
}

#[derive(Args)]
struct PointArgs {
    file: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long, value_parser = point_arg, allow_hyphen_values = true)]
    point: Point,
    /// Sets tau_rank, tau_act, tau_feas and tau_psd together.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the JSON report here ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMode {
    Enumerative,
    Penalty,
}

#[derive(Clone, Debug)]
struct Point(Vec<f64>);

fn point_arg(s: &str) -> Result<Point, String> {
    parse_point(s).map(Point)
}

impl PointArgs {
    fn tolerances(&self) -> Result<Tolerances> {
        let mut t = Tolerances { seed: self.seed, ..Tolerances::default() };
        if let Some(v) = self.tol {
            t.tau_rank = v;
            t.tau_act = v;
            t.tau_feas = v;
            t.tau_psd = v;
        }
        if let Some(n) = self.samples {
            t.n_samples = n;
        }
        if let Some(e) = self.eps {
            t.eps_ball = e;
        }
        t.validate().map_err(anyhow::Error::msg)?;
        Ok(t)
    }

    fn load(&self) -> Result<(MpscProblem, Tolerances)> {
        let p = load_problem(&self.file)?;
        p.check_point(&self.point.0)?;
        Ok((p, self.tolerances()?))
    }
}

fn load_problem(path: &Path) -> Result<MpscProblem> {
    MpscProblem::load(path).with_context(|| format!("reading {}", path.display()))
}

/// Text to stdout unless the JSON goes there.
fn emit<T: Serialize>(text: &str, value: &T, json: Option<&Path>) -> Result<()> {
    match json {
        Some(p) if p == Path::new("-") => println!("{}", serde_json::to_string_pretty(value)?),
        Some(p) => {
            print!("{text}");
            std::fs::write(p, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", p.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveReport {
    version: &'static str,
    mode: &'static str,
    seed: u64,
    solution: Option<mpsc_core::solver::LocalSolution>,
    errors: Vec<String>,
}

#[derive(Serialize)]
struct ConesOutput {
    version: &'static str,
    point: Vec<f64>,
    seed: u64,
    cones: mpsc_core::report::ConesReport,
}

/// Returns whether every component ran without error.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Parse { file } => {
            let p = load_problem(&file)?;
            print!("{}", p.to_text());
            Ok(true)
        }
        Command::Analyze { at, penalty } => {
            let (p, tol) = at.load()?;
            let r = analyze(&p, &at.point.0, &tol, AnalyzeOptions { penalty });
            emit(&mpsc_core::report::render_text(&r), &r, at.json.as_deref())?;
            Ok(r.errors.is_empty())
        }
        Command::Cones { at } => {
            let (p, tol) = at.load()?;
            let pt = ActivePoint::new(&p, &at.point.0, &tol)?;
            let cones = cones_report(&pt);
            let mut text = String::new();
            render_pieces(&mut text, "linearization cone", &cones.linearization);
            render_pieces(&mut text, "critical cone", &cones.critical);
            let out = ConesOutput { version: mpsc_core::report::SCHEMA_VERSION, point: at.point.0.clone(), seed: tol.seed, cones };
            emit(&text, &out, at.json.as_deref())?;
            Ok(true)
        }
        Command::Errorbound { at } => {
            let (p, tol) = at.load()?;
            let r = error_bound_probe(&p, &at.point.0, &tol)?;
            let mut text = String::new();
            render_error_bound(&mut text, &r);
            emit(&text, &r, at.json.as_deref())?;
            Ok(true)
        }
        Command::Penalty { at, kappa } => {
            let (p, tol) = at.load()?;
            if let Some(k) = kappa.iter().find(|k| !(**k > 0.0)) {
                bail!("penalty parameter must be positive, got {k}");
            }
            let grid = (!kappa.is_empty()).then_some(kappa.as_slice());
            let r = exact_penalty_probe(&p, &at.point.0, &tol, grid)?;
            let mut text = String::new();
            let f = p.f.value(&at.point.0)?;
            for k in &r.kappas {
                let phi = penalized_objective(&p, &at.point.0, k.kappa)?;
                let _ = writeln!(text, "phi_kappa({:.6e}) = {phi:.10} (f = {f:.10})", k.kappa);
            }
            render_penalty(&mut text, &r);
            render_error_bound(&mut text, &r.error_bound);
            emit(&text, &r, at.json.as_deref())?;
            Ok(true)
        }
        Command::Solve { file, from, mode, seed, json } => {
            let p = load_problem(&file)?;
            let mut starts: Vec<Vec<f64>> = from.into_iter().map(|p| p.0).collect();
            if starts.is_empty() {
                starts.push(vec![0.0; p.n()]);
            }
            for s in &starts {
                p.check_point(s)?;
            }
            let cfg = SolveConfig { starts: starts[1..].to_vec(), seed, ..SolveConfig::default() };
            let result = match mode {
                SolveMode::Enumerative => solve_enumerative(&p, &starts[0], &cfg),
                SolveMode::Penalty => solve_penalty_descent(&p, &starts[0], &cfg),
            };
            let mode_name = match mode {
                SolveMode::Enumerative => "enumerative",
                SolveMode::Penalty => "penalty",
            };
            let mut report = SolveReport { version: mpsc_core::report::SCHEMA_VERSION, mode: mode_name, seed, solution: None, errors: vec![] };
            let mut text = String::new();
            match result {
                Ok(mut sol) => {
                    if sol.status == SolveStatus::Feasible {
                        let tol = Tolerances { seed, ..Tolerances::default() };
                        if let Ok(pt) = ActivePoint::new(&p, &sol.x, &tol) {
                            if check_w_stationary(&pt).map(|v| v.status == Status::Holds).unwrap_or(false) {
                                sol.stationarity.push("W".into());
                            }
                        }
                    } else {
                        report.errors.push(format!("solve ended with status {:?}", sol.status));
                    }
                    render_solution(&mut text, &sol);
                    report.solution = Some(sol);
                }
                Err(e) => {
                    let _ = writeln!(text, "status: failure");
                    report.errors.push(e.to_string());
                }
            }
            for e in &report.errors {
                let _ = writeln!(text, "error: {e}");
            }
            emit(&text, &report, json.as_deref())?;
            Ok(report.errors.is_empty())
        }
    }
}

fn render_solution(out: &mut String, s: &mpsc_core::solver::LocalSolution) {
    let xs: Vec<String> = s.x.iter().map(|v| format!("{v:.8}")).collect();
    let _ = writeln!(out, "status: {:?}", s.status);
    let _ = writeln!(out, "x* = ({})", xs.join(", "));
    let _ = writeln!(out, "objective {:.10} residual {:.3e}", s.objective, s.residual);
    if let Some(b) = &s.branch {
        let _ = writeln!(out, "branch {b}");
    }
    if let Some(k) = s.kappa {
        let _ = writeln!(out, "final kappa {k:.3e}");
    }
    if !s.stationarity.is_empty() {
        let _ = writeln!(out, "stationarity verified: {}", s.stationarity.join(" "));
    }
    if !s.branches.is_empty() {
        let _ = writeln!(out, "{:<24} {:<18} {:>16} {:>12}", "branch", "status", "objective", "residual");
        for row in &s.branches {
            let _ = writeln!(out, "{:<24} {:<18} {:>16.10} {:>12.3e}", row.branch, format!("{:?}", row.status), row.objective, row.residual);
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
