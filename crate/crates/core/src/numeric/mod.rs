//! Dense small-scale kernels: tolerant rank, nullspaces, symmetric
//! eigensolves, a two-phase simplex and polyhedral generator enumeration.

mod linalg;
mod lp;
mod polyhedron;

pub use linalg::{eig_sym, nullspace, rank, rank_tol, stack_rows, LinalgError, RankInfo};
pub use lp::{lp_solve, LinearProgram, LpError, LpOutcome, Sense, VarKind};
pub use polyhedron::{enumerate_generators, GeneratorError, Generators, Polyhedron};

use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every checker.
///
/// `tau_act` is an absolute threshold: constraint functions are taken as
/// the user scaled them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tau_rank: f64,
    pub tau_act: f64,
    pub tau_feas: f64,
    pub tau_psd: f64,
    pub angular_tol: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub eps_ball: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tau_rank: 1e-8,
            tau_act: 1e-8,
            tau_feas: 1e-8,
            tau_psd: 1e-8,
            angular_tol: 0.05,
            seed: 42,
            n_samples: 512,
            eps_ball: 1e-2,
        }
    }
}

impl Tolerances {
    /// Rejects non-positive thresholds.
    pub fn validate(&self) -> Result<(), String> {
        let reals = [
            ("tau_rank", self.tau_rank),
            ("tau_act", self.tau_act),
            ("tau_feas", self.tau_feas),
            ("tau_psd", self.tau_psd),
            ("angular_tol", self.angular_tol),
            ("eps_ball", self.eps_ball),
        ];
        for (name, v) in reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.n_samples == 0 {
            return Err("n_samples must be positive".into());
        }
        Ok(())
    }

    /// Sampling radii used for every neighborhood quantifier.
    pub fn radii(&self) -> [f64; 3] {
        [self.eps_ball, self.eps_ball / 4.0, self.eps_ball / 16.0]
    }
}
