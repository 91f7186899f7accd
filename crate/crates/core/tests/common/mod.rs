//! Oracle checks shared by the integration suites and the acceptance runner.
//! Each check returns the worst observed discrepancy or a description of what
//! went wrong.

#![allow(dead_code)]

use std::collections::BTreeMap;

use mm_galerkin::assembly::{
    chain_jacobian, chain_residual, jacobian, jacobian_generic, residual, residual_generic,
    default_quadrature_order, Jacobian,
};
use mm_galerkin::basis::{basis_count, Basis};
use mm_galerkin::io::CoefficientFile;
use mm_galerkin::linalg::solve_sylvester;
use mm_galerkin::newton::newton_step;
use mm_galerkin::poly::{PolyMap, PolyTerm};
use mm_galerkin::problem::{builtin, linearize, FullOrderSystem, SignalGenerator, BUILTIN_NAMES};
use mm_galerkin::quadrature::{monomial_integral_exact, BoxDomain, QuadratureRule};
use mm_galerkin::{
    assemble_operators, solve_invariance, Backend, CoefficientBlock, GalerkinOperators, Problem,
    SolverOptions,
};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type Check = Result<f64, String>;

pub fn operators(problem: &Problem, degree: u32, half: f64) -> GalerkinOperators {
    let d = problem.generator_dim();
    let basis = Basis::new(d, degree).unwrap();
    let dom = BoxDomain::symmetric(d, half).unwrap();
    let rule = QuadratureRule::tensor(&dom, default_quadrature_order(problem, degree)).unwrap();
    assemble_operators(problem, &basis, &dom, &rule).unwrap()
}

pub fn random_block(rng: &mut StdRng, nb: usize, n: usize, scale: f64) -> CoefficientBlock {
    CoefficientBlock::from_vec(nb, n, (0..nb * n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
        .unwrap()
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}

/// `ẇ = S w` with skew `S`, `u = L w`, `ẋ = A x + B u`, `y = x_1`.
pub struct LinearCase {
    pub problem: Problem,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

fn linear_map(nvars: usize, rows: &[Vec<f64>]) -> PolyMap {
    let comps = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| {
                    let mut e = vec![0; nvars];
                    e[j] = 1;
                    PolyTerm::new(e, *v)
                })
                .collect()
        })
        .collect();
    PolyMap::new(nvars, comps).unwrap()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn random_linear_case(rng: &mut StdRng, n: usize, m: usize) -> LinearCase {
    let freq = rng.gen_range(0.5..3.0);
    let s = DMatrix::from_row_slice(2, 2, &[0.0, freq, -freq, 0.0]);
    let l = DMatrix::from_fn(m, 2, |_, _| rng.gen_range(-1.0..1.0));
    let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let shift = r.norm() + rng.gen_range(0.2..1.0);
    let a = r - DMatrix::identity(n, n) * shift;
    let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let gen = SignalGenerator::polynomial(linear_map(2, &rows(&s)), linear_map(2, &rows(&l))).unwrap();
    let mut ab = DMatrix::zeros(n, n + m);
    ab.view_mut((0, 0), (n, n)).copy_from(&a);
    ab.view_mut((0, n), (n, m)).copy_from(&b);
    let mut h = vec![0.0; n];
    h[0] = 1.0;
    let sys = FullOrderSystem::polynomial(linear_map(n + m, &rows(&ab)), linear_map(n, &[h]), m).unwrap();
    let problem = Problem::new("linear", gen, sys, BTreeMap::new()).unwrap();
    LinearCase { problem, s, l, a, b }
}

/// Solve a linear case by Galerkin and compare against the Sylvester solution.
/// Returns `(relative error of the linear part, largest higher-degree coefficient)`.
pub fn sylvester_discrepancy(case: &LinearCase, degree: u32) -> Result<(f64, f64), String> {
    let pi = solve_sylvester(&case.s, &case.l, &case.a, &case.b).map_err(|e| e.to_string())?;
    let lin = linearize(&case.problem);
    if rel_diff(&lin.a_sys, &case.a) > 1e-14 || rel_diff(&lin.s, &case.s) > 1e-14 {
        return Err("linearization does not reproduce the generated matrices".into());
    }
    let ops = operators(&case.problem, degree, 1.0);
    let sol = solve_invariance(&case.problem, &ops, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let basis = &ops.basis;
    let (p1, p2) = (basis.position(&[1, 0]).unwrap(), basis.position(&[0, 1]).unwrap());
    let mut lin_err: f64 = 0.0;
    let mut higher: f64 = 0.0;
    for i in 0..pi.nrows() {
        let c = sol.c.block(i);
        lin_err = lin_err.max((c[p1] - pi[(i, 0)]).abs()).max((c[p2] - pi[(i, 1)]).abs());
        for (k, v) in c.iter().enumerate() {
            if k != p1 && k != p2 {
                higher = higher.max(v.abs());
            }
        }
    }
    Ok((lin_err / pi.amax().max(1e-300), higher))
}

/// Random sizes for `count` linear cases, seeded.
pub fn sylvester_suite(seed: u64, count: usize) -> Result<(f64, f64), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut lin, mut hi) = (0.0f64, 0.0f64);
    for k in 0..count {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=2);
        let degree = rng.gen_range(1..=3);
        let case = random_linear_case(&mut rng, n, m);
        let (l, h) = sylvester_discrepancy(&case, degree).map_err(|e| format!("case {k} (n={n}): {e}"))?;
        lin = lin.max(l);
        hi = hi.max(h);
    }
    Ok((lin, hi))
}

/// Worst relative gap between chain-cubic and generic residual/Jacobian.
pub fn chain_vs_generic(seed: u64, trials: usize) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.gen_range(2..=4);
        let degree = rng.gen_range(1..=3);
        let half = [1.0, 2.0][rng.gen_range(0..2)];
        let name = ["rl-linear", "rl-vdp"][rng.gen_range(0..2)];
        let params: BTreeMap<String, f64> = [("n".to_string(), n as f64)].into();
        let p = builtin(name, &params).map_err(|e| e.to_string())?;
        let ops = operators(&p, degree, half);
        if !ops.has_tensors() || !p.is_chain_cubic() {
            return Err(format!("{name} n={n} did not take the chain path"));
        }
        let c = random_block(&mut rng, ops.basis_len(), n, 0.5);
        let fc = chain_residual(&p, &ops, &c).map_err(|e| e.to_string())?;
        let fg = residual_generic(&p, &ops, &c).map_err(|e| e.to_string())?;
        let jc = chain_jacobian(&p, &ops, &c).map_err(|e| e.to_string())?.to_dense();
        let jg = jacobian_generic(&p, &ops, &c).map_err(|e| e.to_string())?;
        let fd = (&fc - &fg).amax() / fg.amax().max(1e-300);
        worst = worst.max(fd).max(rel_diff(&jc, &jg));
    }
    Ok(worst)
}

/// Worst relative gap between block-tridiagonal and dense LU Newton steps.
pub fn block_vs_dense(seed: u64, trials: usize) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.gen_range(2..=6);
        let degree = rng.gen_range(1..=4);
        let params: BTreeMap<String, f64> = [("n".to_string(), n as f64)].into();
        let name = ["rl-linear", "rl-vdp"][rng.gen_range(0..2)];
        let p = builtin(name, &params).map_err(|e| e.to_string())?;
        let ops = operators(&p, degree, 1.0);
        let c = random_block(&mut rng, ops.basis_len(), n, 0.3);
        let jac = jacobian(&p, &ops, &c).map_err(|e| e.to_string())?;
        if !matches!(jac, Jacobian::BlockTridiagonal(_)) {
            return Err("chain problem produced a dense Jacobian".into());
        }
        let f = residual(&p, &ops, &c).map_err(|e| e.to_string())?;
        let a = newton_step(&jac, &f, Backend::BlockTridiagonal, 1e-10).map_err(|e| e.to_string())?;
        let b = newton_step(&jac, &f, Backend::DenseLu, 1e-10).map_err(|e| e.to_string())?;
        worst = worst.max((&a - &b).amax() / b.amax().max(1e-300));
    }
    Ok(worst)
}

/// Central-difference check of the Galerkin Jacobian and of `∂f/∂x`, for
/// every built-in. Returns the worst relative error.
pub fn fd_jacobians(seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for name in BUILTIN_NAMES {
        let p = builtin(name, &BTreeMap::new()).map_err(|e| e.to_string())?;
        let n = p.state_dim();
        let ops = operators(&p, 3, 1.0);
        let c = random_block(&mut rng, ops.basis_len(), n, 0.3);
        let j = jacobian(&p, &ops, &c).map_err(|e| e.to_string())?.to_dense();
        let len = c.len();
        let mut fd = DMatrix::zeros(len, len);
        for k in 0..len {
            let h = 1e-6 * c.as_slice()[k].abs().max(1.0);
            let mut cp = c.clone();
            cp.as_mut_slice()[k] += h;
            let mut cm = c.clone();
            cm.as_mut_slice()[k] -= h;
            let fp = residual(&p, &ops, &cp).map_err(|e| e.to_string())?;
            let fm = residual(&p, &ops, &cm).map_err(|e| e.to_string())?;
            fd.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        worst = worst.max(rel_diff(&fd, &j));

        let m = p.system.input_dim();
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let jx = p.system.f_jacobian_x(&x, &u);
            let mut fdx = DMatrix::zeros(n, n);
            for k in 0..n {
                let h = 1e-6;
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += h;
                xm[k] -= h;
                let col = (DVector::from_vec(p.system.f(&xp, &u)) - DVector::from_vec(p.system.f(&xm, &u)))
                    / (2.0 * h);
                fdx.set_column(k, &col);
            }
            worst = worst.max(rel_diff(&fdx, &jx));
        }
    }
    Ok(worst)
}

/// Tensor Gauss–Legendre rules against exact monomial integrals up to degree
/// `2q - 1` per coordinate.
pub fn quadrature_exactness(seed: u64, trials: usize) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let d = rng.gen_range(1..=3);
        let q = rng.gen_range(1..=12);
        let lo: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..0.5)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.2..3.0)).collect();
        let dom = BoxDomain::new(lo, hi).map_err(|e| e.to_string())?;
        let rule = QuadratureRule::tensor(&dom, q).map_err(|e| e.to_string())?;
        let e: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=(2 * q as u32 - 1))).collect();
        let exact = monomial_integral_exact(&dom, &e);
        let approx = rule
            .integrate(|x| x.iter().zip(&e).map(|(v, k)| v.powi(*k as i32)).product())
            .map_err(|e| e.to_string())?;
        // scale by the integral of |monomial| so sign cancellation is not penalised
        let abs_scale = rule
            .integrate(|x| x.iter().zip(&e).map(|(v, k)| v.abs().powi(*k as i32)).product())
            .map_err(|e| e.to_string())?;
        worst = worst.max((approx - exact).abs() / abs_scale.max(1e-300));
    }
    Ok(worst)
}

fn enumerate_count(d: usize, m: u32) -> usize {
    fn rec(d: usize, budget: u32) -> usize {
        if d == 0 {
            return 1;
        }
        (0..=budget).map(|k| rec(d - 1, budget - k)).sum()
    }
    rec(d, m) - 1
}

/// `basis_count`, `Basis::new` and brute-force enumeration for `d ≤ 4, M ≤ 8`.
pub fn basis_counts() -> Result<usize, String> {
    let mut checked = 0;
    for d in 1..=4 {
        for m in 1..=8u32 {
            let formula = basis_count(d, m).map_err(|e| e.to_string())?;
            let built = Basis::new(d, m).map_err(|e| e.to_string())?;
            let brute = enumerate_count(d, m);
            if formula != brute || built.len() != brute {
                return Err(format!("d={d} M={m}: formula {formula}, basis {}, enumeration {brute}", built.len()));
            }
            let mut seen = std::collections::BTreeSet::new();
            for idx in built.indices() {
                if idx.degree() == 0 || idx.degree() > m || !seen.insert(idx.exponents().to_vec()) {
                    return Err(format!("d={d} M={m}: bad or repeated index {:?}", idx.exponents()));
                }
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Bit-exact text round-trip of random finite coefficients.
pub fn coefficient_round_trip(seed: u64, trials: usize) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    for t in 0..trials {
        let d = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=5);
        let nb = basis_count(d, m).unwrap();
        let vals: Vec<f64> = (0..nb * n)
            .map(|_| loop {
                let v = f64::from_bits(rng.gen());
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        let dom = BoxDomain::symmetric(d, rng.gen_range(0.1..5.0)).unwrap();
        let c = CoefficientBlock::from_vec(nb, n, vals).unwrap();
        let f = CoefficientFile::new(&dom, m, "fp", &c).map_err(|e| e.to_string())?;
        let back = CoefficientFile::parse(&f.to_text()).map_err(|e| e.to_string())?;
        let same = back.domain == dom
            && back
                .coefficients
                .as_slice()
                .iter()
                .zip(c.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(format!("trial {t} changed on round-trip"));
        }
    }
    Ok(trials)
}
