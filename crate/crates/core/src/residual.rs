//! Pointwise PDE residual and its coefficient-weighted L2 norm over a subdomain.

use crate::assembly::CoefficientBlock;
use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::quadrature::{BoxDomain, QuadratureRule};

/// Points per dimension for residual norms unless overridden.
pub const DEFAULT_NORM_ORDER: usize = 20;

pub fn default_subdomain(dim: usize) -> BoxDomain {
    BoxDomain::symmetric(dim, 0.7).expect("valid box")
}

/// `R_i(c, ω) = ∇π_i^N(ω) · s(ω) - f_i(π^N(ω), ℓ(ω))`.
pub fn residual_at(
    problem: &Problem,
    basis: &Basis,
    c: &CoefficientBlock,
    point: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; problem.state_dim()];
    let mut scratch = Scratch::new(problem, basis);
    scratch.residual_into(problem, basis, c, point, &mut out)?;
    Ok(out)
}

struct Scratch {
    phi: Vec<f64>,
    s: Vec<f64>,
    ell: Vec<f64>,
    pi: Vec<f64>,
    dpi: Vec<f64>,
    f: Vec<f64>,
}

impl Scratch {
    fn new(problem: &Problem, basis: &Basis) -> Self {
        let n = problem.state_dim();
        Scratch {
            phi: vec![0.0; basis.len()],
            s: vec![0.0; problem.generator_dim()],
            ell: vec![0.0; problem.generator.output_dim()],
            pi: vec![0.0; n],
            dpi: vec![0.0; n],
            f: vec![0.0; n],
        }
    }

    fn residual_into(
        &mut self,
        problem: &Problem,
        basis: &Basis,
        c: &CoefficientBlock,
        point: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        if c.basis_len() != basis.len() || c.blocks() != problem.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.len() * problem.state_dim(),
                got: c.len(),
                context: "coefficients vs basis and state dimension",
            });
        }
        basis.eval_into(point, &mut self.phi);
        let grad = basis.eval_gradient(point);
        problem.generator.s_into(point, &mut self.s);
        problem.generator.ell_into(point, &mut self.ell);
        // directional derivative of each basis function along s
        let dir: Vec<f64> = (0..basis.len())
            .map(|k| (0..basis.dim()).map(|j| grad[(k, j)] * self.s[j]).sum())
            .collect();
        for i in 0..problem.state_dim() {
            let ci = c.block(i);
            self.pi[i] = ci.iter().zip(&self.phi).map(|(a, b)| a * b).sum();
            self.dpi[i] = ci.iter().zip(&dir).map(|(a, b)| a * b).sum();
        }
        problem.system.f_into(&self.pi, &self.ell, &mut self.f);
        for ((o, dp), f) in out.iter_mut().zip(&self.dpi).zip(&self.f) {
            *o = dp - f;
            if !o.is_finite() {
                return Err(Error::NonFinite {
                    value: *o,
                    point: point.to_vec(),
                    context: "PDE residual",
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// `‖R_i‖_{(2,W)}` per component.
    pub per_component_norms: Vec<f64>,
    /// `Σ ‖c_i‖ ‖R_i‖ / Σ ‖c_i‖`.
    pub weighted_norm: f64,
    pub subdomain: BoxDomain,
    pub quadrature_order: usize,
}

/// Weights `‖c_i‖_2 / Σ_j ‖c_j‖_2`.
pub fn component_weights(c: &CoefficientBlock) -> Result<Vec<f64>> {
    let norms = c.block_norms();
    let total: f64 = norms.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate(
            "all coefficient blocks are zero; weighted residual norm is undefined".into(),
        ));
    }
    Ok(norms.iter().map(|v| v / total).collect())
}

pub fn residual_norm(
    problem: &Problem,
    basis: &Basis,
    c: &CoefficientBlock,
    subdomain: &BoxDomain,
    q: usize,
) -> Result<ResidualReport> {
    let weights = component_weights(c)?;
    let rule = QuadratureRule::tensor(subdomain, q)?;
    let n = problem.state_dim();
    let mut sq = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut scratch = Scratch::new(problem, basis);
    for (x, w) in rule.iter() {
        scratch.residual_into(problem, basis, c, x, &mut r)?;
        for i in 0..n {
            sq[i] += w * r[i] * r[i];
        }
    }
    let per_component_norms: Vec<f64> = sq.iter().map(|v| v.max(0.0).sqrt()).collect();
    let weighted_norm = weights
        .iter()
        .zip(&per_component_norms)
        .map(|(w, r)| w * r)
        .sum();
    Ok(ResidualReport {
        per_component_norms,
        weighted_norm,
        subdomain: subdomain.clone(),
        quadrature_order: q,
    })
}

impl ResidualReport {
    /// CSV row `domain,M,n,weighted_norm`.
    pub fn csv_row(&self, domain: &BoxDomain, degree: u32) -> String {
        format!(
            "{},{},{},{:.16e}",
            crate::io::csv_field(&domain.to_string()),
            degree,
            self.per_component_norms.len(),
            self.weighted_norm
        )
    }
}
