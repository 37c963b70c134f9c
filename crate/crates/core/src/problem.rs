//! Switching-constraint program instances, active index sets and branches.
//!
//! Indices are 0-based in memory. Reports and labels show them 1-based.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, EvalError, Expr, SmoothFn};
use crate::numeric::Tolerances;

pub const MAX_BIACTIVE: usize = 16;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing `{0}` directive")]
    Missing(&'static str),
    #[error("point has {got} coordinates, problem has {expected} variables")]
    Dimension { got: usize, expected: usize },
    #[error("point is infeasible (residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("{count} biactive switching indices exceed the cap of {cap}")]
    TooManyBiactive { count: usize, cap: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// min f(x) s.t. g(x) ≤ 0, h(x) = 0, G_k(x)·H_k(x) = 0.
#[derive(Debug, Clone)]
pub struct MpscProblem {
    pub var_names: Vec<String>,
    pub f: SmoothFn,
    pub g: Vec<SmoothFn>,
    pub h: Vec<SmoothFn>,
    pub switches: Vec<(SmoothFn, SmoothFn)>,
}

fn line_err(line: usize, message: impl Into<String>) -> ProblemError {
    ProblemError::Line { line, message: message.into() }
}

impl MpscProblem {
    pub fn n(&self) -> usize {
        self.var_names.len()
    }

    pub fn m(&self) -> usize {
        self.g.len()
    }

    pub fn p(&self) -> usize {
        self.h.len()
    }

    pub fn l(&self) -> usize {
        self.switches.len()
    }

    /// Parse the line-oriented problem format.
    pub fn parse(text: &str) -> Result<Self, ProblemError> {
        let mut vars: Option<Vec<String>> = None;
        let mut objective: Option<Expr> = None;
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut switches = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
            let rest = rest.trim();
            if keyword == "vars" {
                if vars.is_some() {
                    return Err(line_err(line, "`vars` declared twice"));
                }
                let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
                if names.is_empty() {
                    return Err(line_err(line, "`vars` needs at least one name"));
                }
                for (i, name) in names.iter().enumerate() {
                    let valid = name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
                        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                    if !valid || matches!(name.as_str(), "sin" | "cos" | "exp" | "log" | "sqrt") {
                        return Err(line_err(line, format!("invalid variable name `{name}`")));
                    }
                    if names[..i].contains(name) {
                        return Err(line_err(line, format!("duplicate variable name `{name}`")));
                    }
                }
                vars = Some(names);
                continue;
            }
            let Some(names) = vars.as_ref() else {
                return Err(line_err(line, "`vars` must come before any expression"));
            };
            let parse = |text: &str| parse_expr(text, names).map_err(|e| line_err(line, e.to_string()));
            match keyword {
                "min" => {
                    if objective.is_some() {
                        return Err(line_err(line, "`min` declared twice"));
                    }
                    objective = Some(parse(rest)?);
                }
                "ineq" => g.push(parse(rest)?),
                "eq" => h.push(parse(rest)?),
                "switch" => {
                    let Some((a, b)) = rest.split_once('|') else {
                        return Err(line_err(line, "`switch` needs two expressions separated by `|`"));
                    };
                    switches.push((parse(a)?, parse(b)?));
                }
                other => return Err(line_err(line, format!("unknown directive `{other}`"))),
            }
        }
        let vars = vars.ok_or(ProblemError::Missing("vars"))?;
        let f = objective.ok_or(ProblemError::Missing("min"))?;
        let n = vars.len();
        let smooth = |e: Expr| SmoothFn::new(e, n);
        Ok(MpscProblem {
            f: smooth(f),
            g: g.into_iter().map(smooth).collect(),
            h: h.into_iter().map(smooth).collect(),
            switches: switches.into_iter().map(|(a, b)| (smooth(a), smooth(b))).collect(),
            var_names: vars,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProblemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProblemError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Normalized text form; parsing it yields the same instance.
    pub fn to_text(&self) -> String {
        let v = &self.var_names;
        let mut out = format!("vars {}\nmin {}\n", v.join(" "), self.f.expr.display(v));
        for g in &self.g {
            let _ = writeln!(out, "ineq {}", g.expr.display(v));
        }
        for h in &self.h {
            let _ = writeln!(out, "eq {}", h.expr.display(v));
        }
        for (a, b) in &self.switches {
            let _ = writeln!(out, "switch {} | {}", a.expr.display(v), b.expr.display(v));
        }
        out
    }

    pub fn check_point(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.n() {
            return Err(ProblemError::Dimension { got: x.len(), expected: self.n() });
        }
        Ok(())
    }

    pub fn g_values(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.g.iter().map(|g| g.value(x)).collect()
    }

    pub fn h_values(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.h.iter().map(|h| h.value(x)).collect()
    }

    pub fn switch_values(&self, x: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
        self.switches.iter().map(|(a, b)| Ok((a.value(x)?, b.value(x)?))).collect()
    }

    /// sqrt(Σ max(g,0)² + Σ h² + Σ min(G², H²)).
    pub fn residual(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut s = 0.0;
        for g in self.g_values(x)? {
            s += g.max(0.0).powi(2);
        }
        for h in self.h_values(x)? {
            s += h * h;
        }
        for (a, b) in self.switch_values(x)? {
            s += (a * a).min(b * b);
        }
        Ok(s.sqrt())
    }

    /// Active index sets at a point feasible within `tau_feas`.
    pub fn index_sets(&self, x: &[f64], tol: &Tolerances) -> Result<IndexSets, ProblemError> {
        self.check_point(x)?;
        let residual = self.residual(x)?;
        if residual > tol.tau_feas {
            return Err(ProblemError::Infeasible { residual });
        }
        let mut sets = IndexSets::default();
        for (i, v) in self.g_values(x)?.into_iter().enumerate() {
            if v.abs() <= tol.tau_act {
                sets.i_g.push(i);
            }
        }
        sets.i_h = (0..self.p()).collect();
        for (k, (a, b)) in self.switch_values(x)?.into_iter().enumerate() {
            match (a.abs() <= tol.tau_act, b.abs() <= tol.tau_act) {
                (true, true) => sets.i_gh.push(k),
                (true, false) => sets.i_g0.push(k),
                (false, true) => sets.i_h0.push(k),
                (false, false) => return Err(ProblemError::Infeasible { residual }),
            }
        }
        Ok(sets)
    }

    pub fn grad_f(&self, x: &[f64]) -> Result<DVector<f64>, EvalError> {
        self.f.gradient(x)
    }

    /// Function handle by constraint reference.
    pub fn constraint(&self, c: Constraint) -> &SmoothFn {
        match c {
            Constraint::G(i) => &self.g[i],
            Constraint::H(j) => &self.h[j],
            Constraint::SwitchG(k) => &self.switches[k].0,
            Constraint::SwitchH(k) => &self.switches[k].1,
        }
    }

    pub fn gradients(&self, cs: &[Constraint], x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let mut m = DMatrix::zeros(cs.len(), self.n());
        for (r, c) in cs.iter().enumerate() {
            m.row_mut(r).copy_from(&self.constraint(*c).gradient(x)?.transpose());
        }
        Ok(m)
    }
}

/// A single constraint function of the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    /// Inequality g_i.
    G(usize),
    /// Equality h_j.
    H(usize),
    /// First switching function of pair k.
    SwitchG(usize),
    /// Second switching function of pair k.
    SwitchH(usize),
}

impl Constraint {
    pub fn label(&self) -> String {
        match self {
            Constraint::G(i) => format!("g{}", i + 1),
            Constraint::H(j) => format!("h{}", j + 1),
            Constraint::SwitchG(k) => format!("G{}", k + 1),
            Constraint::SwitchH(k) => format!("H{}", k + 1),
        }
    }
}

/// Active-set partition at a feasible point.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSets {
    /// Active inequalities.
    pub i_g: Vec<usize>,
    /// All equalities.
    pub i_h: Vec<usize>,
    /// G_k = 0, H_k ≠ 0.
    pub i_g0: Vec<usize>,
    /// G_k ≠ 0, H_k = 0.
    pub i_h0: Vec<usize>,
    /// Biactive: G_k = H_k = 0.
    pub i_gh: Vec<usize>,
}

impl IndexSets {
    /// All 2^|I_GH| bipartitions; mask bit j places the j-th biactive
    /// index in `beta1`.
    pub fn bipartitions(&self) -> Result<Vec<Bipartition>, ProblemError> {
        let k = self.i_gh.len();
        if k > MAX_BIACTIVE {
            return Err(ProblemError::TooManyBiactive { count: k, cap: MAX_BIACTIVE });
        }
        Ok((0..1usize << k)
            .map(|mask| {
                let (mut beta1, mut beta2) = (Vec::new(), Vec::new());
                for (j, &idx) in self.i_gh.iter().enumerate() {
                    if mask >> j & 1 == 1 {
                        beta1.push(idx);
                    } else {
                        beta2.push(idx);
                    }
                }
                Bipartition { beta1, beta2 }
            })
            .collect())
    }

    /// Active inequalities, all equalities, G over I_G ∪ I_GH and H over
    /// I_H ∪ I_GH.
    pub fn full_family(&self) -> Vec<Constraint> {
        let mut out: Vec<Constraint> = self.i_g.iter().map(|&i| Constraint::G(i)).collect();
        out.extend(self.i_h.iter().map(|&j| Constraint::H(j)));
        let mut gk: Vec<usize> = self.i_g0.iter().chain(&self.i_gh).copied().collect();
        gk.sort_unstable();
        out.extend(gk.into_iter().map(Constraint::SwitchG));
        let mut hk: Vec<usize> = self.i_h0.iter().chain(&self.i_gh).copied().collect();
        hk.sort_unstable();
        out.extend(hk.into_iter().map(Constraint::SwitchH));
        out
    }
}

/// Disjoint split of the biactive set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    pub beta1: Vec<usize>,
    pub beta2: Vec<usize>,
}

impl Bipartition {
    pub fn label(&self) -> String {
        let set = |s: &[usize]| {
            if s.is_empty() {
                "∅".to_string()
            } else {
                format!("{{{}}}", s.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(","))
            }
        };
        format!("({}, {})", set(&self.beta1), set(&self.beta2))
    }
}

/// A standard nonlinear program obtained by pinning one function of some
/// switching pairs to zero.
#[derive(Debug, Clone)]
pub struct BranchProblem<'a> {
    pub base: &'a MpscProblem,
    /// Switching indices with G_k = 0 imposed.
    pub pinned_g: Vec<usize>,
    /// Switching indices with H_k = 0 imposed.
    pub pinned_h: Vec<usize>,
    pub tag: String,
}

impl<'a> BranchProblem<'a> {
    /// Local branch at a point: G over I_G ∪ β1, H over I_H ∪ β2.
    pub fn local(base: &'a MpscProblem, sets: &IndexSets, b: &Bipartition) -> Self {
        let mut pinned_g: Vec<usize> = sets.i_g0.iter().chain(&b.beta1).copied().collect();
        let mut pinned_h: Vec<usize> = sets.i_h0.iter().chain(&b.beta2).copied().collect();
        pinned_g.sort_unstable();
        pinned_h.sort_unstable();
        BranchProblem { base, pinned_g, pinned_h, tag: b.label() }
    }

    /// Global branch: bit k of `mask` set pins G_k, clear pins H_k.
    pub fn global(base: &'a MpscProblem, mask: usize) -> Self {
        let (mut pinned_g, mut pinned_h) = (Vec::new(), Vec::new());
        for k in 0..base.l() {
            if mask >> k & 1 == 1 {
                pinned_g.push(k);
            } else {
                pinned_h.push(k);
            }
        }
        let tag = (0..base.l()).map(|k| if mask >> k & 1 == 1 { 'G' } else { 'H' }).collect();
        BranchProblem { base, pinned_g, pinned_h, tag }
    }

    /// Every global branch in mask order.
    pub fn all_global(base: &'a MpscProblem) -> Result<Vec<Self>, ProblemError> {
        if base.l() > MAX_BIACTIVE {
            return Err(ProblemError::TooManyBiactive { count: base.l(), cap: MAX_BIACTIVE });
        }
        Ok((0..1usize << base.l()).map(|mask| Self::global(base, mask)).collect())
    }

    pub fn inequalities(&self) -> Vec<Constraint> {
        (0..self.base.m()).map(Constraint::G).collect()
    }

    pub fn equalities(&self) -> Vec<Constraint> {
        let mut out: Vec<Constraint> = (0..self.base.p()).map(Constraint::H).collect();
        out.extend(self.pinned_g.iter().map(|&k| Constraint::SwitchG(k)));
        out.extend(self.pinned_h.iter().map(|&k| Constraint::SwitchH(k)));
        out
    }

    /// sqrt(Σ max(g,0)² + Σ eq²).
    pub fn residual(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut s = 0.0;
        for c in self.inequalities() {
            s += self.base.constraint(c).value(x)?.max(0.0).powi(2);
        }
        for c in self.equalities() {
            s += self.base.constraint(c).value(x)?.powi(2);
        }
        Ok(s.sqrt())
    }

    /// Every equality within `tau` in magnitude and every inequality ≤ `tau`.
    pub fn is_feasible(&self, x: &[f64], tau: f64) -> Result<bool, EvalError> {
        for c in self.inequalities() {
            if self.base.constraint(c).value(x)? > tau {
                return Ok(false);
            }
        }
        for c in self.equalities() {
            if self.base.constraint(c).value(x)?.abs() > tau {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Parse a comma-separated point.
pub fn parse_point(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad coordinate `{}`: {e}", s.trim())))
        .collect()
}
