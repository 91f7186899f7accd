//! Newton iteration on the Galerkin coefficients.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::{residual_and_jacobian, CoefficientBlock, GalerkinOperators, Jacobian};
use crate::error::{Error, Result};
use crate::linalg::{block_tridiagonal_solve, lu_solve, pinv_solve};
use crate::problem::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    DenseLu,
    Pseudoinverse,
    BlockTridiagonal,
    Auto,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::DenseLu => "dense_lu",
            Backend::Pseudoinverse => "pseudoinverse",
            Backend::BlockTridiagonal => "block_tridiagonal",
            Backend::Auto => "auto",
        })
    }
}

/// Steps after which pseudoinverse updates that fail to reduce `‖F‖_1` are
/// declared a singular-Jacobian failure.
const PINV_STALL_LIMIT: usize = 5;

/// Dense fallback for a failed block elimination is attempted only up to this size.
const DENSE_FALLBACK_MAX: usize = 4000;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol_f_l1: f64,
    pub max_iter: usize,
    pub backend: Backend,
    pub rank_cutoff: f64,
    /// Newton step scaling; 1.0 is plain Newton.
    pub damping: f64,
    /// Abort when `‖F‖_1` exceeds this multiple of its initial value. The
    /// default only stops on a non-finite residual.
    pub divergence_factor: f64,
    pub initial_guess: Option<CoefficientBlock>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_f_l1: 1e-7,
            max_iter: 300,
            backend: Backend::Auto,
            rank_cutoff: 1e-10,
            damping: 1.0,
            divergence_factor: f64::INFINITY,
            initial_guess: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_f_l1 > 0.0) {
            return Err(Error::config("solver.tol_f_l1", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "must be at least 1"));
        }
        if !(self.rank_cutoff > 0.0 && self.rank_cutoff < 1.0) {
            return Err(Error::config("solver.rank_cutoff", "must lie in (0, 1)"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("solver.damping", "must lie in (0, 1]"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::config("solver.divergence_factor", "must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub c: CoefficientBlock,
    /// Newton updates applied.
    pub iterations: usize,
    /// `‖F‖_1` at each iterate, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Backend that produced the last update.
    pub backend_used: Backend,
    pub pseudoinverse_steps: usize,
    pub elapsed_seconds: f64,
}

impl Solution {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Solve `JF δ = F` with the requested backend.
pub fn newton_step(
    jac: &Jacobian,
    f: &DVector<f64>,
    backend: Backend,
    rank_cutoff: f64,
) -> Result<DVector<f64>> {
    match (backend, jac) {
        (Backend::BlockTridiagonal, Jacobian::BlockTridiagonal(b)) => block_tridiagonal_solve(b, f),
        (Backend::BlockTridiagonal, Jacobian::Dense(_)) => Err(Error::invalid(
            "block_tridiagonal backend requires a block-structured Jacobian",
        )),
        (Backend::DenseLu, j) => lu_solve(&j.to_dense(), f),
        (Backend::Pseudoinverse, j) => pinv_solve(&j.to_dense(), f, rank_cutoff),
        (Backend::Auto, _) => Err(Error::invalid("auto backend must be resolved before stepping")),
    }
}

/// Step with automatic backend choice and the singular-pivot fallback.
fn auto_step(
    jac: &Jacobian,
    f: &DVector<f64>,
    rank_cutoff: f64,
) -> Result<(DVector<f64>, Backend)> {
    let first = match jac {
        Jacobian::BlockTridiagonal(_) => Backend::BlockTridiagonal,
        Jacobian::Dense(_) => Backend::DenseLu,
    };
    match newton_step(jac, f, first, rank_cutoff) {
        Ok(d) => Ok((d, first)),
        Err(Error::Singular(msg)) => {
            if jac.dim() > DENSE_FALLBACK_MAX {
                return Err(Error::SingularJacobian(format!(
                    "{msg}; system of size {} too large for the pseudoinverse fallback",
                    jac.dim()
                )));
            }
            log::debug!("{first} failed ({msg}); falling back to pseudoinverse");
            Ok((
                newton_step(jac, f, Backend::Pseudoinverse, rank_cutoff)?,
                Backend::Pseudoinverse,
            ))
        }
        Err(e) => Err(e),
    }
}

pub fn solve_invariance(
    problem: &Problem,
    ops: &GalerkinOperators,
    options: &SolverOptions,
) -> Result<Solution> {
    options.validate()?;
    let start = Instant::now();
    let nb = ops.basis_len();
    let n = problem.state_dim();
    let mut c = match &options.initial_guess {
        Some(c0) => {
            if c0.basis_len() != nb || c0.blocks() != n {
                return Err(Error::DimensionMismatch {
                    expected: nb * n,
                    got: c0.len(),
                    context: "initial guess",
                });
            }
            c0.clone()
        }
        None => CoefficientBlock::zeros(nb, n),
    };
    let mut history: Vec<f64> = Vec::new();
    let mut backend_used = options.backend;
    let mut pinv_steps = 0;
    let mut stalled = 0;
    let mut last_was_pinv = false;

    let finish = |c: CoefficientBlock,
                  history: Vec<f64>,
                  converged: bool,
                  backend_used: Backend,
                  pinv_steps: usize| {
        Solution {
            c,
            iterations: history.len().saturating_sub(1),
            residual_history: history,
            converged,
            backend_used,
            pseudoinverse_steps: pinv_steps,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        }
    };

    loop {
        let (f, jac) = residual_and_jacobian(problem, ops, &c)?;
        let r = f.lp_norm(1);
        let prev = history.last().copied();
        history.push(r);
        log::debug!("newton iter {}: |F|_1 = {r:.6e}", history.len() - 1);

        if r <= options.tol_f_l1 {
            return Ok(finish(c, history, true, backend_used, pinv_steps));
        }
        let not_converged = |reason: String, c, history, backend_used, pinv_steps| {
            Err(Error::NotConverged {
                solution: Box::new(finish(c, history, false, backend_used, pinv_steps)),
                reason,
            })
        };
        if !r.is_finite() {
            return not_converged("residual became non-finite".into(), c, history, backend_used, pinv_steps);
        }
        if history.len() > options.max_iter {
            return not_converged(
                format!("iteration cap of {} reached", options.max_iter),
                c,
                history,
                backend_used,
                pinv_steps,
            );
        }
        if r > options.divergence_factor * history[0] {
            return not_converged(
                format!("residual grew beyond {:e} times its initial value", options.divergence_factor),
                c,
                history,
                backend_used,
                pinv_steps,
            );
        }
        if last_was_pinv {
            if prev.is_some_and(|p| r >= p) {
                stalled += 1;
            } else {
                stalled = 0;
            }
            if stalled >= PINV_STALL_LIMIT {
                return Err(Error::SingularJacobian(format!(
                    "pseudoinverse steps failed to reduce |F|_1 for {PINV_STALL_LIMIT} consecutive iterations"
                )));
            }
        }

        let (delta, used) = match options.backend {
            Backend::Auto => auto_step(&jac, &f, options.rank_cutoff)?,
            b => (newton_step(&jac, &f, b, options.rank_cutoff)?, b),
        };
        backend_used = used;
        last_was_pinv = used == Backend::Pseudoinverse;
        if last_was_pinv {
            pinv_steps += 1;
        }
        for (ci, di) in c.as_mut_slice().iter_mut().zip(delta.iter()) {
            *ci -= options.damping * di;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_operators, default_quadrature_order, residual};
    use crate::basis::Basis;
    use crate::problem::{make_rl_linear, make_test1, test1_exact_terms};
    use crate::quadrature::{BoxDomain, QuadratureRule};

    fn ops_for(problem: &Problem, degree: u32, half: f64) -> GalerkinOperators {
        let basis = Basis::new(problem.generator_dim(), degree).unwrap();
        let dom = BoxDomain::symmetric(2, half).unwrap();
        let rule = QuadratureRule::tensor(&dom, default_quadrature_order(problem, degree)).unwrap();
        assemble_operators(problem, &basis, &dom, &rule).unwrap()
    }

    #[test]
    fn test1_recovers_closed_form() {
        let p = make_test1(2.0).unwrap();
        let ops = ops_for(&p, 2, 1.0);
        let sol = solve_invariance(&p, &ops, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        for (i, terms) in test1_exact_terms(2.0).iter().enumerate() {
            for (e, v) in terms {
                let k = ops.basis.position(e).unwrap();
                assert!((sol.c.block(i)[k] - v).abs() < 1e-12);
            }
        }
        let f = residual(&p, &ops, &sol.c).unwrap();
        assert!(f.lp_norm(1) <= 1e-7);
    }

    #[test]
    fn backends_agree_on_chain_problem() {
        let p = make_rl_linear(3, 1.1, 2.0).unwrap();
        let ops = ops_for(&p, 3, 1.0);
        let mut opts = SolverOptions {
            tol_f_l1: 1e-12,
            ..Default::default()
        };
        opts.backend = Backend::BlockTridiagonal;
        let a = solve_invariance(&p, &ops, &opts).unwrap();
        opts.backend = Backend::DenseLu;
        let b = solve_invariance(&p, &ops, &opts).unwrap();
        let diff = a.c.to_vector() - b.c.to_vector();
        assert!(diff.norm() <= 1e-9 * b.c.to_vector().norm());
        let h = &a.residual_history;
        let k = h.len();
        assert!(k >= 3 && h[k - 1] < h[k - 2] && h[k - 2] < h[k - 3]);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let p = make_rl_linear(2, 1.1, 2.0).unwrap();
        let ops = ops_for(&p, 2, 1.0);
        let opts = SolverOptions {
            max_iter: 1,
            tol_f_l1: 1e-300,
            ..Default::default()
        };
        match solve_invariance(&p, &ops, &opts) {
            Err(Error::NotConverged { solution, .. }) => {
                assert!(!solution.converged);
                assert_eq!(solution.iterations, 1);
                assert_eq!(solution.residual_history.len(), 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let bad = SolverOptions {
            rank_cutoff: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverOptions {
            max_iter: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identity_newton_step() {
        let f = DVector::from_vec(vec![0.5, -1.0]);
        let j = Jacobian::Dense(nalgebra::DMatrix::identity(2, 2));
        assert_eq!(newton_step(&j, &f, Backend::DenseLu, 1e-10).unwrap(), f);
        assert!(newton_step(&j, &f, Backend::BlockTridiagonal, 1e-10).is_err());
    }
}
