//! Galerkin residual `F(c)` and Jacobian `JF(c)`.
//!
//! Two evaluation paths exist. The generic path integrates `f(π^N, ℓ)`
//! against the basis with the tensor quadrature rule and works for any
//! problem. The chain path applies to RL-ladder style systems and contracts
//! the exactly integrated tensors `N_{ijk} = ∫φ_iφ_jφ_k` and
//! `O_{ijkl} = ∫φ_iφ_jφ_kφ_l` instead, yielding a block-tridiagonal Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::problem::{Problem, StructureTag};
use crate::quadrature::{BoxDomain, MonomialIntegrator, QuadratureRule};

/// Coefficients `c_1 … c_n`, each of length `N`, stored block-major.
///
/// Backed by an `N × n` column-major matrix, so column `i` is block `c_i`
/// and the raw slice is the block-major vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientBlock {
    mat: DMatrix<f64>,
}

impl CoefficientBlock {
    pub fn zeros(basis_len: usize, blocks: usize) -> Self {
        CoefficientBlock {
            mat: DMatrix::zeros(basis_len, blocks),
        }
    }

    pub fn from_vec(basis_len: usize, blocks: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != basis_len * blocks {
            return Err(Error::DimensionMismatch {
                expected: basis_len * blocks,
                got: data.len(),
                context: "coefficient vector length N*n",
            });
        }
        Ok(CoefficientBlock {
            mat: DMatrix::from_vec(basis_len, blocks, data),
        })
    }

    pub fn from_matrix(mat: DMatrix<f64>) -> Self {
        CoefficientBlock { mat }
    }

    pub fn basis_len(&self) -> usize {
        self.mat.nrows()
    }

    pub fn blocks(&self) -> usize {
        self.mat.ncols()
    }

    pub fn len(&self) -> usize {
        self.mat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mat.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let n = self.basis_len();
        &self.mat.as_slice()[i * n..(i + 1) * n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.basis_len();
        &mut self.mat.as_mut_slice()[i * n..(i + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.mat.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.mat.as_mut_slice()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.mat.iter().all(|v| v.is_finite())
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.mat.column_iter().map(|c| c.norm()).collect()
    }
}

/// Dense symmetric third-order tensor, `n³` entries.
#[derive(Clone, Debug)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Ñ(v)_{ij} = Σ_k v_k N_{ijk}`.
    pub fn contract(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let row = &self.data[(i * n + j) * n..(i * n + j + 1) * n];
            row.iter().zip(v).map(|(t, v)| t * v).sum()
        })
    }
}

/// Dense symmetric fourth-order tensor, `n⁴` entries.
#[derive(Clone, Debug)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Õ(v)_{ij} = Σ_{k,l} v_k v_l O_{ijkl}`.
    pub fn contract(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let n2 = n * n;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let slab = &self.data[(i * n + j) * n2..(i * n + j + 1) * n2];
                let mut acc = 0.0;
                for (k, vk) in v.iter().enumerate() {
                    let row = &slab[k * n..(k + 1) * n];
                    let inner: f64 = row.iter().zip(v).map(|(t, v)| t * v).sum();
                    acc += vk * inner;
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Precomputed inner products over the domain for one basis.
#[derive(Clone, Debug)]
pub struct GalerkinOperators {
    pub basis: Basis,
    pub domain: BoxDomain,
    pub rule: QuadratureRule,
    /// `A_{ij} = ⟨∇φ_j · s, φ_i⟩`.
    pub a: DMatrix<f64>,
    /// Mass matrix `⟨φ_i, φ_j⟩`.
    pub mass: DMatrix<f64>,
    /// `⟨φ_i ω_1, φ_j⟩`.
    pub p: DMatrix<f64>,
    /// `⟨ℓ_r, Φ⟩`, one vector per generator output.
    pub gamma: Vec<DVector<f64>>,
    pub n_tensor: Option<Tensor3>,
    pub o_tensor: Option<Tensor4>,
    /// Whether `A` and `γ` were integrated exactly.
    pub exact_generator: bool,
    /// Basis values at the quadrature nodes, `nodes × N`.
    phi_nodes: DMatrix<f64>,
    /// Generator output at the nodes, `nodes × m`.
    ell_nodes: DMatrix<f64>,
}

impl GalerkinOperators {
    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma[0]
    }

    pub fn has_tensors(&self) -> bool {
        self.n_tensor.is_some() && self.o_tensor.is_some()
    }
}

/// Default points per dimension: exact for polynomial integrands of the
/// generic path, 32 otherwise.
pub fn default_quadrature_order(problem: &Problem, degree: u32) -> usize {
    let gen = problem.generator.polynomial_form();
    let sys = problem.system.polynomial_form();
    match (gen, sys) {
        (Some((s, ell)), Some((f, _))) => {
            let m = degree as usize;
            let field = m.max(ell.max_degree() as usize);
            let f_deg = f.max_degree() as usize;
            // φ_j · f(π, ℓ) and ∂f/∂x φ_k φ_l, and ∇φ·s φ for A
            let integrand = (m + f_deg * field).max(2 * m + s.max_degree() as usize);
            ((integrand + 2) / 2).max(2 * m + 1).max(10)
        }
        _ => 32,
    }
}

pub fn assemble_operators(
    problem: &Problem,
    basis: &Basis,
    domain: &BoxDomain,
    rule: &QuadratureRule,
) -> Result<GalerkinOperators> {
    let d = problem.generator_dim();
    if basis.dim() != d || domain.dim() != d || rule.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: basis.dim().min(domain.dim()).min(rule.dim()),
            context: "basis/domain/rule dimension vs generator dimension",
        });
    }
    let nb = basis.len();
    let m = problem.generator.output_dim();
    let deg = basis.degree();
    let gen_poly = problem.generator.polynomial_form();
    let extra = gen_poly
        .as_ref()
        .map(|(s, ell)| s.max_degree().max(ell.max_degree()))
        .unwrap_or(0);
    let integ = MonomialIntegrator::new(domain, 4 * deg + extra + 2);
    let idx = basis.indices();

    let mass = DMatrix::from_fn(nb, nb, |i, j| {
        integ.product_integral(&[idx[i].exponents(), idx[j].exponents()])
    });
    let mut e1 = vec![0u32; d];
    e1[0] = 1;
    let p = DMatrix::from_fn(nb, nb, |i, j| {
        integ.product_integral(&[idx[i].exponents(), idx[j].exponents(), &e1])
    });

    let q = rule.len();
    let mut phi_nodes = DMatrix::zeros(q, nb);
    let mut ell_nodes = DMatrix::zeros(q, m);
    let mut phi = vec![0.0; nb];
    let mut ell = vec![0.0; m];
    for (k, (x, _)) in rule.iter().enumerate() {
        basis.eval_into(x, &mut phi);
        for (j, v) in phi.iter().enumerate() {
            phi_nodes[(k, j)] = *v;
        }
        problem.generator.ell_into(x, &mut ell);
        for (r, v) in ell.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    value: *v,
                    point: x.to_vec(),
                    context: "generator output",
                });
            }
            ell_nodes[(k, r)] = *v;
        }
    }

    let (a, gamma, exact_generator) = match &gen_poly {
        Some((s, ell_map)) => {
            let mut a = DMatrix::zeros(nb, nb);
            let mut scratch = vec![0u32; d];
            for j in 0..nb {
                for k in 0..d {
                    let nu = idx[j].exponents()[k];
                    if nu == 0 {
                        continue;
                    }
                    for t in &s.components[k] {
                        for (r, s_r) in scratch.iter_mut().enumerate() {
                            *s_r = idx[j].exponents()[r] + t.exponents[r];
                        }
                        scratch[k] -= 1;
                        let coef = nu as f64 * t.coeff;
                        for i in 0..nb {
                            a[(i, j)] += coef
                                * integ.product_integral(&[&scratch, idx[i].exponents()]);
                        }
                    }
                }
            }
            let gamma = (0..m)
                .map(|r| {
                    DVector::from_fn(nb, |j, _| {
                        ell_map.components[r]
                            .iter()
                            .map(|t| {
                                t.coeff
                                    * integ.product_integral(&[&t.exponents, idx[j].exponents()])
                            })
                            .sum()
                    })
                })
                .collect();
            (a, gamma, true)
        }
        None => {
            let mut dir = DMatrix::zeros(q, nb);
            let mut s = vec![0.0; d];
            for (k, (x, _)) in rule.iter().enumerate() {
                problem.generator.s_into(x, &mut s);
                if let Some(v) = s.iter().find(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        value: *v,
                        point: x.to_vec(),
                        context: "generator vector field",
                    });
                }
                let grad = basis.eval_gradient(x);
                for j in 0..nb {
                    dir[(k, j)] = (0..d).map(|r| grad[(j, r)] * s[r]).sum::<f64>();
                }
            }
            let weighted = weighted_rows(&phi_nodes, rule.weights());
            let a = weighted.transpose() * dir;
            let gamma = (0..m)
                .map(|r| weighted.transpose() * ell_nodes.column(r))
                .collect();
            (a, gamma, false)
        }
    };

    let (n_tensor, o_tensor) = match problem.system.structure() {
        StructureTag::ChainCubic { .. } => {
            let (n3, n4) = build_tensors(basis, &integ);
            (Some(n3), Some(n4))
        }
        StructureTag::Generic => (None, None),
    };

    if let Some(v) = a.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            value: *v,
            point: vec![],
            context: "advection matrix A",
        });
    }

    Ok(GalerkinOperators {
        basis: basis.clone(),
        domain: domain.clone(),
        rule: rule.clone(),
        a,
        mass,
        p,
        gamma,
        n_tensor,
        o_tensor,
        exact_generator,
        phi_nodes,
        ell_nodes,
    })
}

fn weighted_rows(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (k, wk) in w.iter().enumerate() {
        out.row_mut(k).scale_mut(*wk);
    }
    out
}

/// Exact tensors. Entries depend only on the summed exponent vector, so each
/// is a product of cached one-dimensional integrals.
fn build_tensors(basis: &Basis, integ: &MonomialIntegrator) -> (Tensor3, Tensor4) {
    let n = basis.len();
    let idx = basis.indices();
    let d = basis.dim();
    let mut n3 = vec![0.0; n * n * n];
    n3.par_chunks_mut(n * n).enumerate().for_each(|(i, chunk)| {
        let mut e = vec![0u32; d];
        for j in 0..n {
            for k in 0..n {
                for (r, er) in e.iter_mut().enumerate() {
                    *er = idx[i].0[r] + idx[j].0[r] + idx[k].0[r];
                }
                chunk[j * n + k] = integ.integral(&e);
            }
        }
    });
    let mut n4 = vec![0.0; n * n * n * n];
    n4.par_chunks_mut(n * n * n).enumerate().for_each(|(i, chunk)| {
        let mut e = vec![0u32; d];
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for (r, er) in e.iter_mut().enumerate() {
                        *er = idx[i].0[r] + idx[j].0[r] + idx[k].0[r] + idx[l].0[r];
                    }
                    chunk[(j * n + k) * n + l] = integ.integral(&e);
                }
            }
        }
    });
    (Tensor3 { n, data: n3 }, Tensor4 { n, data: n4 })
}

/// Block-tridiagonal matrix with square blocks of equal size.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    /// `lower[i]` is block `(i+1, i)`.
    pub lower: Vec<DMatrix<f64>>,
    pub diag: Vec<DMatrix<f64>>,
    /// `upper[i]` is block `(i, i+1)`.
    pub upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.diag.first().map(|b| b.nrows()).unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let nb = self.block_size();
        let n = self.blocks();
        let mut m = DMatrix::zeros(nb * n, nb * n);
        for i in 0..n {
            m.view_mut((i * nb, i * nb), (nb, nb)).copy_from(&self.diag[i]);
            if i + 1 < n {
                m.view_mut((i * nb, (i + 1) * nb), (nb, nb))
                    .copy_from(&self.upper[i]);
                m.view_mut(((i + 1) * nb, i * nb), (nb, nb))
                    .copy_from(&self.lower[i]);
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let nb = self.block_size();
        let n = self.blocks();
        let mut y = DVector::zeros(nb * n);
        for i in 0..n {
            let mut yi = &self.diag[i] * x.rows(i * nb, nb);
            if i > 0 {
                yi += &self.lower[i - 1] * x.rows((i - 1) * nb, nb);
            }
            if i + 1 < n {
                yi += &self.upper[i] * x.rows((i + 1) * nb, nb);
            }
            y.rows_mut(i * nb, nb).copy_from(&yi);
        }
        y
    }
}

#[derive(Clone, Debug)]
pub enum Jacobian {
    Dense(DMatrix<f64>),
    BlockTridiagonal(BlockTridiagonal),
}

impl Jacobian {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Jacobian::Dense(m) => m.clone(),
            Jacobian::BlockTridiagonal(b) => b.to_dense(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Jacobian::Dense(m) => m.nrows(),
            Jacobian::BlockTridiagonal(b) => b.blocks() * b.block_size(),
        }
    }
}

fn check_shapes(problem: &Problem, ops: &GalerkinOperators, c: &CoefficientBlock) -> Result<()> {
    if c.basis_len() != ops.basis_len() || c.blocks() != problem.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: ops.basis_len() * problem.state_dim(),
            got: c.len(),
            context: "coefficient block shape (N, n)",
        });
    }
    if !c.is_finite() {
        return Err(Error::invalid("coefficients must be finite"));
    }
    Ok(())
}

/// `π^N` at every quadrature node, `nodes × n`.
fn pi_at_nodes(ops: &GalerkinOperators, c: &CoefficientBlock) -> DMatrix<f64> {
    &ops.phi_nodes * c.matrix()
}

/// `F(c)` by quadrature of `f(π^N, ℓ)` against the basis.
pub fn residual_generic(
    problem: &Problem,
    ops: &GalerkinOperators,
    c: &CoefficientBlock,
) -> Result<DVector<f64>> {
    check_shapes(problem, ops, c)?;
    let n = problem.state_dim();
    let pi = pi_at_nodes(ops, c);
    let q = ops.rule.len();
    let mut fw = DMatrix::zeros(q, n);
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; ops.ell_nodes.ncols()];
    let mut fx = vec![0.0; n];
    for k in 0..q {
        for i in 0..n {
            x[i] = pi[(k, i)];
        }
        for (r, ur) in u.iter_mut().enumerate() {
            *ur = ops.ell_nodes[(k, r)];
        }
        problem.system.f_into(&x, &u, &mut fx);
        let w = ops.rule.weight(k);
        for i in 0..n {
            if !fx[i].is_finite() {
                return Err(Error::NonFinite {
                    value: fx[i],
                    point: ops.rule.node(k).to_vec(),
                    context: "system dynamics in residual",
                });
            }
            fw[(k, i)] = w * fx[i];
        }
    }
    // F = A C - Φᵀ W f
    let f = &ops.a * c.matrix() - ops.phi_nodes.transpose() * fw;
    Ok(DVector::from_column_slice(f.as_slice()))
}

/// Dense `JF(c)` by quadrature of `∂f_i/∂x_j (π^N, ℓ) φ_k φ_l`.
pub fn jacobian_generic(
    problem: &Problem,
    ops: &GalerkinOperators,
    c: &CoefficientBlock,
) -> Result<DMatrix<f64>> {
    check_shapes(problem, ops, c)?;
    let n = problem.state_dim();
    let nb = ops.basis_len();
    let pi = pi_at_nodes(ops, c);
    let q = ops.rule.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| problem.system.couples(i, j))
        .collect();
    // weighted partial derivative per node for each coupled pair
    let mut dfw = DMatrix::zeros(q, pairs.len());
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; ops.ell_nodes.ncols()];
    for k in 0..q {
        for i in 0..n {
            x[i] = pi[(k, i)];
        }
        for (r, ur) in u.iter_mut().enumerate() {
            *ur = ops.ell_nodes[(k, r)];
        }
        let jx = problem.system.f_jacobian_x(&x, &u);
        let w = ops.rule.weight(k);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let v = jx[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    value: v,
                    point: ops.rule.node(k).to_vec(),
                    context: "system Jacobian",
                });
            }
            dfw[(k, p)] = w * v;
        }
    }
    let mut jac = DMatrix::zeros(nb * n, nb * n);
    let phi_t = ops.phi_nodes.transpose();
    let blocks: Vec<DMatrix<f64>> = (0..pairs.len())
        .into_par_iter()
        .map(|p| {
            let mut scaled = ops.phi_nodes.clone();
            for k in 0..q {
                scaled.row_mut(k).scale_mut(dfw[(k, p)]);
            }
            -(&phi_t * scaled)
        })
        .collect();
    for (&(i, j), block) in pairs.iter().zip(blocks) {
        jac.view_mut((i * nb, j * nb), (nb, nb)).copy_from(&block);
    }
    for i in 0..n {
        let mut view = jac.view_mut((i * nb, i * nb), (nb, nb));
        view += &ops.a;
    }
    Ok(jac)
}

fn chain_kappa(problem: &Problem) -> Result<f64> {
    match problem.system.structure() {
        StructureTag::ChainCubic { kappa } => Ok(kappa),
        StructureTag::Generic => Err(Error::invalid("problem does not have chain-cubic structure")),
    }
}

fn tensors(ops: &GalerkinOperators) -> Result<(&Tensor3, &Tensor4)> {
    match (&ops.n_tensor, &ops.o_tensor) {
        (Some(n), Some(o)) => Ok((n, o)),
        _ => Err(Error::invalid("operators were assembled without N/O tensors")),
    }
}

/// `A + 2κM`, shared by [`chain_p`] and [`chain_q`].
fn chain_linear(ops: &GalerkinOperators, kappa: f64) -> DMatrix<f64> {
    &ops.a + &ops.mass * (2.0 * kappa)
}

/// `P(v) = (A + 2κM + ½Ñ(v) + ⅓Õ(v)) v`.
pub fn chain_p(ops: &GalerkinOperators, v: &[f64], kappa: f64) -> Result<DVector<f64>> {
    let (n3, n4) = tensors(ops)?;
    let mat = chain_linear(ops, kappa) + n3.contract(v) * 0.5 + n4.contract(v) * (1.0 / 3.0);
    Ok(mat * DVector::from_column_slice(v))
}

/// `Q(v) = A + 2κM + Ñ(v) + Õ(v)`.
pub fn chain_q(ops: &GalerkinOperators, v: &[f64], kappa: f64) -> Result<DMatrix<f64>> {
    let (n3, n4) = tensors(ops)?;
    Ok(chain_linear(ops, kappa) + n3.contract(v) + n4.contract(v))
}

/// Residual and Jacobian of a chain-cubic problem, sharing the tensor
/// contractions of each block.
pub fn chain_evaluate(
    problem: &Problem,
    ops: &GalerkinOperators,
    c: &CoefficientBlock,
    want_jacobian: bool,
) -> Result<(DVector<f64>, Option<BlockTridiagonal>)> {
    check_shapes(problem, ops, c)?;
    let kappa = chain_kappa(problem)?;
    let (n3, n4) = tensors(ops)?;
    let n = c.blocks();
    let nb = c.basis_len();
    let lin = chain_linear(ops, kappa);
    let per_block: Vec<(DVector<f64>, Option<DMatrix<f64>>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = c.block(i);
            let nt = n3.contract(v);
            let ot = n4.contract(v);
            let vv = DVector::from_column_slice(v);
            let pv = (&lin + &nt * 0.5 + &ot * (1.0 / 3.0)) * &vv;
            let qv = want_jacobian.then(|| &lin + nt + ot);
            (pv, qv)
        })
        .collect();
    let mut f = DVector::zeros(nb * n);
    let mut diag = Vec::with_capacity(if want_jacobian { n } else { 0 });
    for (i, (pv, qv)) in per_block.into_iter().enumerate() {
        let mut fi = pv;
        if i > 0 {
            fi -= &ops.mass * DVector::from_column_slice(c.block(i - 1));
        }
        if i + 1 < n {
            fi -= &ops.mass * DVector::from_column_slice(c.block(i + 1));
        }
        if i == 0 {
            fi -= ops.gamma();
        }
        f.rows_mut(i * nb, nb).copy_from(&fi);
        if let Some(q) = qv {
            diag.push(q);
        }
    }
    let jac = want_jacobian.then(|| {
        let off = -&ops.mass;
        BlockTridiagonal {
            lower: vec![off.clone(); n.saturating_sub(1)],
            diag,
            upper: vec![off; n.saturating_sub(1)],
        }
    });
    Ok((f, jac))
}

pub fn chain_residual(
    problem: &Problem,
    ops: &GalerkinOperators,
    c: &CoefficientBlock,
) -> Result<DVector<f64>> {
    Ok(chain_evaluate(problem, ops, c, false)?.0)
}

pub fn chain_jacobian(
    problem: &Problem,
    ops: &GalerkinOperators,
    c: &CoefficientBlock,
) -> Result<BlockTridiagonal> {
    Ok(chain_evaluate(problem, ops, c, true)?
        .1
        .expect("jacobian requested"))
}

fn use_chain(problem: &Problem, ops: &GalerkinOperators) -> bool {
    problem.is_chain_cubic() && ops.has_tensors()
}

/// `F(c)`, using the chain path when available.
pub fn residual(
    problem: &Problem,
    ops: &GalerkinOperators,
    c: &CoefficientBlock,
) -> Result<DVector<f64>> {
    if use_chain(problem, ops) {
        chain_residual(problem, ops, c)
    } else {
        residual_generic(problem, ops, c)
    }
}

/// `JF(c)`: block-tridiagonal on the chain path, dense otherwise.
pub fn jacobian(problem: &Problem, ops: &GalerkinOperators, c: &CoefficientBlock) -> Result<Jacobian> {
    if use_chain(problem, ops) {
        Ok(Jacobian::BlockTridiagonal(chain_jacobian(problem, ops, c)?))
    } else {
        Ok(Jacobian::Dense(jacobian_generic(problem, ops, c)?))
    }
}

/// `F(c)` and `JF(c)` together.
pub fn residual_and_jacobian(
    problem: &Problem,
    ops: &GalerkinOperators,
    c: &CoefficientBlock,
) -> Result<(DVector<f64>, Jacobian)> {
    if use_chain(problem, ops) {
        let (f, j) = chain_evaluate(problem, ops, c, true)?;
        Ok((f, Jacobian::BlockTridiagonal(j.expect("jacobian requested"))))
    } else {
        Ok((
            residual_generic(problem, ops, c)?,
            Jacobian::Dense(jacobian_generic(problem, ops, c)?),
        ))
    }
}
