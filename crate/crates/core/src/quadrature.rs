//! Rectangular domains, Gauss-Legendre tensor rules and closed-form monomial
//! integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_POINTS_PER_DIM: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let dom = BoxDomain { lo, hi };
        dom.validate()?;
        Ok(dom)
    }

    /// `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lo.len(),
                got: self.hi.len(),
                context: "domain upper bounds",
            });
        }
        if self.lo.is_empty() {
            return Err(Error::invalid("domain must have at least one dimension"));
        }
        for (j, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::invalid(format!(
                    "domain bounds in dimension {j} must satisfy lo < hi (got [{l}, {h}])"
                )));
            }
        }
        if !self.contains_origin() {
            log::warn!("domain {self} does not contain the origin");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains_origin(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| *l <= 0.0 && 0.0 <= *h)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// True if `other` lies inside `self`.
    pub fn covers(&self, other: &BoxDomain) -> bool {
        self.dim() == other.dim()
            && self
                .lo
                .iter()
                .zip(&other.lo)
                .all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }
}

impl std::fmt::Display for BoxDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sym = self.lo.iter().zip(&self.hi).all(|(l, h)| *l == -*h)
            && self.hi.windows(2).all(|w| w[0] == w[1]);
        if sym {
            write!(f, "[-{0},{0}]^{1}", self.hi[0], self.dim())
        } else {
            let parts: Vec<String> = self
                .lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| format!("[{l},{h}]"))
                .collect();
            write!(f, "{}", parts.join("x"))
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_1d(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 0 || q > MAX_POINTS_PER_DIM {
        return Err(Error::invalid(format!(
            "points per dimension must be in 1..={MAX_POINTS_PER_DIM}, got {q}"
        )));
    }
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tensor-product Gauss-Legendre rule mapped onto a box.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    dim: usize,
    points_per_dim: usize,
    /// Row-major `len × dim`.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn tensor(domain: &BoxDomain, q: usize) -> Result<Self> {
        domain.validate()?;
        let (x1, w1) = gauss_legendre_1d(q)?;
        let dim = domain.dim();
        let total = q
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::invalid("quadrature grid too large"))?;
        let half: Vec<f64> = (0..dim).map(|j| 0.5 * (domain.hi[j] - domain.lo[j])).collect();
        let mid: Vec<f64> = (0..dim).map(|j| 0.5 * (domain.hi[j] + domain.lo[j])).collect();
        let jac: f64 = half.iter().product();
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut counter = vec![0usize; dim];
        for _ in 0..total {
            let mut w = jac;
            for j in 0..dim {
                nodes.push(mid[j] + half[j] * x1[counter[j]]);
                w *= w1[counter[j]];
            }
            weights.push(w);
            // last coordinate varies fastest
            for j in (0..dim).rev() {
                counter[j] += 1;
                if counter[j] < q {
                    break;
                }
                counter[j] = 0;
            }
        }
        Ok(QuadratureRule {
            dim,
            points_per_dim: q,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// `Σ_k w_k g(node_k)`; a non-finite integrand value is an error.
    pub fn integrate<G>(&self, mut g: G) -> Result<f64>
    where
        G: FnMut(&[f64]) -> f64,
    {
        let mut sum = 0.0;
        for (x, w) in self.iter() {
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    value: v,
                    point: x.to_vec(),
                    context: "quadrature integrand",
                });
            }
            sum += w * v;
        }
        Ok(sum)
    }
}

/// `∫_lo^hi x^e dx`.
pub fn power_integral(lo: f64, hi: f64, e: u32) -> f64 {
    let p = e as i32 + 1;
    (hi.powi(p) - lo.powi(p)) / p as f64
}

/// Closed-form integral of `Π_j ω_j^{e_j}` over the box; zero exponents allowed.
pub fn monomial_integral_exact(domain: &BoxDomain, exponents: &[u32]) -> f64 {
    assert_eq!(exponents.len(), domain.dim(), "exponent dimension");
    exponents
        .iter()
        .enumerate()
        .map(|(j, &e)| power_integral(domain.lo[j], domain.hi[j], e))
        .product()
}

/// Cached one-dimensional power integrals for repeated exact monomial integration.
#[derive(Clone, Debug)]
pub struct MonomialIntegrator {
    table: Vec<Vec<f64>>,
}

impl MonomialIntegrator {
    pub fn new(domain: &BoxDomain, max_exponent: u32) -> Self {
        let table = (0..domain.dim())
            .map(|j| {
                (0..=max_exponent)
                    .map(|e| power_integral(domain.lo[j], domain.hi[j], e))
                    .collect()
            })
            .collect();
        MonomialIntegrator { table }
    }

    pub fn integral(&self, exponents: &[u32]) -> f64 {
        exponents
            .iter()
            .zip(&self.table)
            .map(|(&e, t)| t[e as usize])
            .product()
    }

    /// Integral of the product of several monomials.
    pub fn product_integral(&self, factors: &[&[u32]]) -> f64 {
        let mut prod = 1.0;
        for (j, t) in self.table.iter().enumerate() {
            let e: u32 = factors.iter().map(|f| f[j]).sum();
            prod *= t[e as usize];
        }
        prod
    }
}
