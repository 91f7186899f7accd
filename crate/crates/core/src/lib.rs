//! Galerkin/Newton solver for invariance equations arising in nonlinear
//! moment matching, with reduced-order model construction and simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod basis;
pub mod bench;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod newton;
pub mod poly;
pub mod problem;
pub mod quadrature;
pub mod residual;
pub mod rom;
pub mod sim;

pub use assembly::{assemble_operators, CoefficientBlock, GalerkinOperators};
pub use basis::{basis_count, Basis, MultiIndex};
pub use error::{Error, Result};
pub use newton::{solve_invariance, Backend, Solution, SolverOptions};
pub use problem::Problem;
pub use quadrature::{BoxDomain, QuadratureRule};
pub use residual::{residual_at, residual_norm, ResidualReport};
pub use rom::{build_rom, stabilizing_gain, verify_rom_stability, GainSpec, ReducedOrderModel};
pub use sim::{simulate_fom, simulate_rom, steady_state_rms, SimConfig, Trajectory};
