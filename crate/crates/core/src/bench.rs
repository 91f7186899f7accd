//! Table reproduction harness: runs grids of `(Ω, M)` cells and compares them
//! with published reference values.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{assemble_operators, default_quadrature_order, GalerkinOperators};
use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::newton::{solve_invariance, Backend, Solution, SolverOptions};
use crate::problem::{make_cart_pendulum, make_rl_linear, make_rl_vdp, make_test1, Problem};
use crate::quadrature::{BoxDomain, QuadratureRule};
use crate::residual::{default_subdomain, residual_norm, DEFAULT_NORM_ORDER};
use crate::rom::{build_rom, GainSpec};
use crate::sim::{simulate_fom, simulate_rom, steady_state_rms, SimConfig};

/// Reproduced values must lie within this factor of the reference.
pub const REPRODUCTION_FACTOR: f64 = 3.0;
pub const EXACT_RECOVERY_T1: f64 = 1e-10;
pub const EXACT_RECOVERY_T2: f64 = 1e-6;

pub const DEGREES: [u32; 3] = [2, 4, 6];
pub const HALF_WIDTHS: [f64; 3] = [1.0, 2.0, 3.0];

type Grid = [[Option<f64>; 3]; 3];

const T3_RES_N2: Grid = [
    [Some(1.3626e-3), Some(1.9130e-5), Some(7.0587e-7)],
    [Some(8.2881e-3), Some(4.7759e-4), Some(7.9316e-5)],
    [Some(2.1234e-2), Some(1.3698e-3), Some(7.1681e-4)],
];
const T3_RES_N100: Grid = [
    [Some(1.0617e-3), Some(2.2500e-5), Some(7.0723e-7)],
    [Some(6.5405e-3), Some(5.8132e-4), Some(8.1913e-5)],
    [Some(1.7266e-2), Some(1.7815e-3), Some(7.6927e-4)],
];
const T3_RES_N1000: Grid = T3_RES_N100;
const T3_ROM_N2: Grid = [
    [Some(3.2250e-3), Some(3.5399e-4), Some(3.4580e-4)],
    [Some(1.4806e-2), Some(9.6175e-4), Some(3.9628e-4)],
    [Some(3.6235e-2), Some(1.7328e-3), Some(1.4298e-3)],
];
const T3_ROM_N100: Grid = [
    [Some(3.2222e-3), Some(1.5413e-3), Some(1.5371e-3)],
    [Some(1.3348e-2), Some(1.9930e-3), Some(1.5520e-3)],
    [Some(3.5621e-2), Some(3.2516e-3), Some(2.2785e-3)],
];
const T3_ROM_N1000: Grid = [
    [Some(5.3946e-3), Some(4.4702e-3), Some(4.4676e-3)],
    [Some(1.4154e-2), Some(4.6679e-3), Some(4.4713e-3)],
    [Some(3.3966e-2), Some(5.4216e-3), Some(4.7748e-3)],
];
const T4_RES_N2: Grid = [
    [Some(8.0711e-3), Some(4.1311e-4), Some(2.8741e-5)],
    [Some(3.9200e-2), Some(2.6989e-2), Some(7.0562e-2)],
    [Some(1.0014e-1), Some(3.2736e-1), Some(1.5181e-1)],
];
const T4_RES_N100: Grid = [
    [Some(6.0786e-3), Some(2.9373e-4), Some(2.0639e-5)],
    [Some(5.0803e-2), Some(9.7273e-3), Some(1.1899e-2)],
    [Some(4.0017e-2), None, None],
];
const T4_RES_N1000: Grid = [
    [Some(6.0786e-3), Some(2.9373e-4), Some(2.0639e-5)],
    [Some(5.0662e-2), Some(4.0561e-2), Some(9.0314e-3)],
    [Some(3.8131e-2), None, None],
];
const T4_ROM_N2: Grid = [
    [Some(4.5723e-2), Some(7.7093e-3), Some(1.6723e-3)],
    [Some(5.1643e-2), Some(1.9637e-2), Some(4.9413e-2)],
    [Some(1.2946e-1), Some(2.0774e-1), Some(5.7344e-2)],
];
const T4_ROM_N100: Grid = [
    [Some(4.3206e-2), Some(7.1173e-3), Some(3.4599e-3)],
    [Some(3.0439e-1), Some(1.5848e-2), Some(5.5036e-3)],
    [Some(3.2542e-1), None, None],
];
const T4_ROM_N1000: Grid = [
    [Some(4.3949e-2), Some(8.1825e-3), Some(5.7352e-3)],
    [Some(3.0441e-1), Some(1.6432e-2), Some(6.9633e-3)],
    [Some(3.2592e-1), None, None],
];
const T1_RES: [f64; 3] = [1.1048e-16, 1.0940e-15, 5.7176e-14];
const T2_RES: [f64; 3] = [9.3256e-10, 8.6338e-10, 9.4227e-10];
/// Seconds for `Ω = [-1,1]²`, `M = 6`, `n = 2, 100, 1000`.
const T3_TIME: [f64; 3] = [7.1, 447.0, 6935.0];
const T4_TIME: [f64; 3] = [10.6, 438.0, 6955.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::config("--scale", format!("expected desk or full, got `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// RL ladder driven by the linear oscillator.
    Linear,
    /// RL ladder driven by the Van der Pol oscillator.
    VanDerPol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Residual,
    Rom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableId {
    T1,
    T2,
    Grid { family: Family, metric: Metric, n: usize },
    Time { family: Family },
}

pub const TABLE_IDS: [&str; 16] = [
    "T1",
    "T2",
    "T3-res-n2",
    "T3-res-n100",
    "T3-res-n1000",
    "T3-time",
    "T3-rom-n2",
    "T3-rom-n100",
    "T3-rom-n1000",
    "T4-res-n2",
    "T4-res-n100",
    "T4-res-n1000",
    "T4-time",
    "T4-rom-n2",
    "T4-rom-n100",
    "T4-rom-n1000",
];

impl FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("table", format!("unknown table `{s}` (expected one of {TABLE_IDS:?})"));
        match s {
            "T1" => return Ok(TableId::T1),
            "T2" => return Ok(TableId::T2),
            _ => {}
        }
        let parts: Vec<&str> = s.split('-').collect();
        let family = match parts.first() {
            Some(&"T3") => Family::Linear,
            Some(&"T4") => Family::VanDerPol,
            _ => return Err(bad()),
        };
        match parts.as_slice() {
            [_, "time"] => Ok(TableId::Time { family }),
            [_, metric, n] => {
                let metric = match *metric {
                    "res" => Metric::Residual,
                    "rom" => Metric::Rom,
                    _ => return Err(bad()),
                };
                let n = match *n {
                    "n2" => 2,
                    "n100" => 100,
                    "n1000" => 1000,
                    _ => return Err(bad()),
                };
                Ok(TableId::Grid { family, metric, n })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fam = |family: &Family| match family {
            Family::Linear => "T3",
            Family::VanDerPol => "T4",
        };
        match self {
            TableId::T1 => f.write_str("T1"),
            TableId::T2 => f.write_str("T2"),
            TableId::Time { family } => write!(f, "{}-time", fam(family)),
            TableId::Grid { family, metric, n } => {
                let m = match metric {
                    Metric::Residual => "res",
                    Metric::Rom => "rom",
                };
                write!(f, "{}-{m}-n{n}", fam(family))
            }
        }
    }
}

fn reference_grid(family: Family, metric: Metric, n: usize) -> Option<&'static Grid> {
    Some(match (family, metric, n) {
        (Family::Linear, Metric::Residual, 2) => &T3_RES_N2,
        (Family::Linear, Metric::Residual, 100) => &T3_RES_N100,
        (Family::Linear, Metric::Residual, 1000) => &T3_RES_N1000,
        (Family::Linear, Metric::Rom, 2) => &T3_ROM_N2,
        (Family::Linear, Metric::Rom, 100) => &T3_ROM_N100,
        (Family::Linear, Metric::Rom, 1000) => &T3_ROM_N1000,
        (Family::VanDerPol, Metric::Residual, 2) => &T4_RES_N2,
        (Family::VanDerPol, Metric::Residual, 100) => &T4_RES_N100,
        (Family::VanDerPol, Metric::Residual, 1000) => &T4_RES_N1000,
        (Family::VanDerPol, Metric::Rom, 2) => &T4_ROM_N2,
        (Family::VanDerPol, Metric::Rom, 100) => &T4_ROM_N100,
        (Family::VanDerPol, Metric::Rom, 1000) => &T4_ROM_N1000,
        _ => return None,
    })
}

/// Published value for a grid cell; `None` marks a reported non-convergence.
pub fn reference_value(family: Family, metric: Metric, n: usize, half_width: f64, degree: u32) -> Option<f64> {
    let row = HALF_WIDTHS.iter().position(|h| *h == half_width)?;
    let col = DEGREES.iter().position(|m| *m == degree)?;
    reference_grid(family, metric, n)?[row][col]
}

pub fn within_factor(value: f64, reference: f64, factor: f64) -> bool {
    value.is_finite() && value >= reference / factor && value <= reference * factor
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Measured without a pass/fail verdict.
    Measured,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Measured => "measured",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub table: String,
    pub domain: String,
    pub degree: u32,
    pub n: usize,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub status: Status,
    pub detail: String,
}

impl CellResult {
    pub const CSV_HEADER: &'static str = "table,domain,M,n,value,reference,status,detail";

    pub fn csv_row(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), crate::io::fmt_f64);
        format!(
            "{},{},{},{},{},{},{},{}",
            self.table,
            crate::io::csv_field(&self.domain),
            self.degree,
            self.n,
            num(self.value),
            num(self.reference),
            self.status,
            crate::io::csv_field(&self.detail)
        )
    }
}

/// A solved cell: problem, basis and Newton result.
pub struct SolvedCell {
    pub problem: Problem,
    pub basis: Basis,
    pub domain: BoxDomain,
    pub operators: GalerkinOperators,
    pub solution: Result<Solution>,
    pub seconds: f64,
}

pub fn solve_cell(problem: Problem, domain: BoxDomain, degree: u32, options: &SolverOptions) -> Result<SolvedCell> {
    let start = Instant::now();
    let basis = Basis::new(domain.dim(), degree)?;
    let rule = QuadratureRule::tensor(&domain, default_quadrature_order(&problem, degree))?;
    let operators = assemble_operators(&problem, &basis, &domain, &rule)?;
    let solution = solve_invariance(&problem, &operators, options);
    Ok(SolvedCell {
        problem,
        basis,
        domain,
        operators,
        solution,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn family_problem(family: Family, n: usize) -> Result<Problem> {
    match family {
        Family::Linear => make_rl_linear(n, crate::problem::DEFAULT_KAPPA, crate::problem::DEFAULT_A),
        Family::VanDerPol => make_rl_vdp(n, crate::problem::DEFAULT_KAPPA, crate::problem::DEFAULT_MU),
    }
}

pub fn family_gain(family: Family) -> GainSpec {
    match family {
        Family::Linear => GainSpec::Oscillator {
            c: crate::problem::DEFAULT_C,
        },
        Family::VanDerPol => GainSpec::VanDerPol {
            mu: crate::problem::DEFAULT_MU,
            c: crate::problem::DEFAULT_C,
        },
    }
}

/// Weighted residual over `W = [-0.7, 0.7]²`.
pub fn cell_residual(cell: &SolvedCell) -> Result<f64> {
    let sol = cell.solution.as_ref().map_err(clone_err)?;
    Ok(residual_norm(
        &cell.problem,
        &cell.basis,
        &sol.c,
        &default_subdomain(cell.domain.dim()),
        DEFAULT_NORM_ORDER,
    )?
    .weighted_norm)
}

/// Relative steady-state RMS of the ROM built with `gain`, under the default
/// initial conditions.
pub fn cell_rom_rms(cell: &SolvedCell, gain: &GainSpec, sim: &SimConfig) -> Result<f64> {
    let sol = cell.solution.as_ref().map_err(clone_err)?;
    let rom = build_rom(&cell.problem, &cell.basis, &cell.domain, sol, gain)?;
    let w0 = [0.1, 0.2];
    let x0 = vec![0.0; cell.problem.state_dim()];
    let (y, y_r) = rayon::join(
        || simulate_fom(&cell.problem, &w0, &x0, sim),
        || simulate_rom(&rom, &w0, &[0.0, 1.0], sim),
    );
    Ok(steady_state_rms(&y?, &y_r?, sim)?.relative_rms)
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::NotConverged { solution, reason } => Error::NotConverged {
            solution: solution.clone(),
            reason: reason.clone(),
        },
        other => Error::invalid(other.to_string()),
    }
}

fn grid_cell(family: Family, metric: Metric, n: usize, half_width: f64, degree: u32, table: &str) -> CellResult {
    let domain = BoxDomain::symmetric(2, half_width).expect("valid box");
    let reference = reference_value(family, metric, n, half_width, degree);
    let mut out = CellResult {
        table: table.to_string(),
        domain: domain.to_string(),
        degree,
        n,
        value: None,
        reference,
        status: Status::Fail,
        detail: String::new(),
    };
    let cell = match family_problem(family, n)
        .and_then(|p| solve_cell(p, domain, degree, &SolverOptions::default()))
    {
        Ok(c) => c,
        Err(e) => {
            out.detail = e.to_string();
            return out;
        }
    };
    let value = match metric {
        Metric::Residual => cell_residual(&cell),
        Metric::Rom => cell_rom_rms(&cell, &family_gain(family), &SimConfig::default()),
    };
    match (value, reference) {
        (Ok(v), Some(r)) => {
            out.value = Some(v);
            out.status = if within_factor(v, r, REPRODUCTION_FACTOR) { Status::Pass } else { Status::Fail };
            out.detail = format!("ratio {:.3}", v / r);
        }
        (Ok(v), None) => {
            out.value = Some(v);
            out.detail = "reference reports non-convergence but the solve converged".into();
        }
        (Err(e @ Error::NotConverged { .. }), None) => {
            out.status = if e.to_string().contains("iteration cap") { Status::Pass } else { Status::Fail };
            out.detail = e.to_string();
        }
        (Err(e), _) => out.detail = e.to_string(),
    }
    out
}

fn exact_cell(table: &str, degree: u32, reference: f64, threshold: f64) -> CellResult {
    let domain = BoxDomain::symmetric(2, 1.0).expect("valid box");
    let mut out = CellResult {
        table: table.to_string(),
        domain: domain.to_string(),
        degree,
        n: 2,
        value: None,
        reference: Some(reference),
        status: Status::Fail,
        detail: String::new(),
    };
    let (problem, options) = if table == "T1" {
        (make_test1(crate::problem::DEFAULT_A), SolverOptions::default())
    } else {
        (
            make_cart_pendulum(2.0, 3.0, -2.0 / 3.0),
            SolverOptions {
                backend: Backend::Pseudoinverse,
                ..Default::default()
            },
        )
    };
    match problem
        .and_then(|p| solve_cell(p, domain, degree, &options))
        .and_then(|c| cell_residual(&c).map(|r| (r, c.seconds)))
    {
        Ok((v, secs)) => {
            out.value = Some(v);
            out.status = if v <= threshold { Status::Pass } else { Status::Fail };
            out.detail = format!("threshold {threshold:e}; {secs:.2} s");
        }
        Err(e) => out.detail = e.to_string(),
    }
    out
}

fn time_cell(family: Family, n: usize, reference: f64, table: &str) -> CellResult {
    let domain = BoxDomain::symmetric(2, 1.0).expect("valid box");
    let mut out = CellResult {
        table: table.to_string(),
        domain: domain.to_string(),
        degree: 6,
        n,
        value: None,
        reference: Some(reference),
        status: Status::Measured,
        detail: "seconds; hardware differs from the reference".into(),
    };
    match family_problem(family, n).and_then(|p| solve_cell(p, domain, 6, &SolverOptions::default())) {
        Ok(cell) => match cell.solution {
            Ok(_) => out.value = Some(cell.seconds),
            Err(e) => {
                out.status = Status::Fail;
                out.detail = e.to_string();
            }
        },
        Err(e) => {
            out.status = Status::Fail;
            out.detail = e.to_string();
        }
    }
    out
}

/// Run every cell of a table. Extended-scale tables require `Scale::Full`.
pub fn reproduce(table: TableId, scale: Scale) -> Result<Vec<CellResult>> {
    let name = table.to_string();
    match table {
        TableId::T1 => Ok(DEGREES
            .par_iter()
            .zip(T1_RES.par_iter())
            .map(|(m, r)| exact_cell(&name, *m, *r, EXACT_RECOVERY_T1))
            .collect()),
        TableId::T2 => Ok(DEGREES
            .par_iter()
            .zip(T2_RES.par_iter())
            .map(|(m, r)| exact_cell(&name, *m, *r, EXACT_RECOVERY_T2))
            .collect()),
        TableId::Grid { family, metric, n } => {
            if n == 1000 && scale == Scale::Desk {
                return Err(Error::config(
                    "--scale",
                    format!("{name} is extended-scale; run it with --scale full"),
                ));
            }
            let cells: Vec<(f64, u32)> = HALF_WIDTHS
                .iter()
                .flat_map(|h| DEGREES.iter().map(move |m| (*h, *m)))
                .collect();
            Ok(cells
                .par_iter()
                .map(|(h, m)| grid_cell(family, metric, n, *h, *m, &name))
                .collect())
        }
        TableId::Time { family } => {
            let refs = match family {
                Family::Linear => T3_TIME,
                Family::VanDerPol => T4_TIME,
            };
            let sizes: &[usize] = if scale == Scale::Full { &[2, 100, 1000] } else { &[2, 100] };
            // sequential so timings do not compete for cores
            Ok(sizes
                .iter()
                .zip(refs)
                .map(|(n, r)| time_cell(family, *n, r, &name))
                .collect())
        }
    }
}

pub fn write_cells_csv<W: std::io::Write>(mut w: W, cells: &[CellResult]) -> Result<()> {
    writeln!(w, "{}", CellResult::CSV_HEADER)?;
    for c in cells {
        writeln!(w, "{}", c.csv_row())?;
    }
    Ok(())
}
