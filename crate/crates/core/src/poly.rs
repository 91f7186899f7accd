//! Sparse multivariate polynomial maps given as coefficient tables.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    #[serde(rename = "exp")]
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl PolyTerm {
    pub fn new(exponents: Vec<u32>, coeff: f64) -> Self {
        PolyTerm { exponents, coeff }
    }
}

/// Vector-valued polynomial `R^nvars -> R^components`, one term list per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyMap {
    pub nvars: usize,
    pub components: Vec<Vec<PolyTerm>>,
}

impl PolyMap {
    pub fn new(nvars: usize, components: Vec<Vec<PolyTerm>>) -> Result<Self> {
        let map = PolyMap { nvars, components };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, comp) in self.components.iter().enumerate() {
            for t in comp {
                if t.exponents.len() != self.nvars {
                    return Err(Error::invalid(format!(
                        "term in component {i} has {} exponents, expected {}",
                        t.exponents.len(),
                        self.nvars
                    )));
                }
                if !t.coeff.is_finite() {
                    return Err(Error::invalid(format!("non-finite coefficient in component {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        self.components
            .iter()
            .flatten()
            .map(|t| t.exponents.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// True if every term has total degree at most one.
    pub fn is_affine(&self) -> bool {
        self.max_degree() <= 1
    }

    fn monomial(exponents: &[u32], vars: &[f64]) -> f64 {
        let mut v = 1.0;
        for (&e, &x) in exponents.iter().zip(vars) {
            for _ in 0..e {
                v *= x;
            }
        }
        v
    }

    pub fn eval_component(&self, i: usize, vars: &[f64]) -> f64 {
        self.components[i]
            .iter()
            .map(|t| t.coeff * Self::monomial(&t.exponents, vars))
            .sum()
    }

    pub fn eval_into(&self, vars: &[f64], out: &mut [f64]) {
        debug_assert_eq!(vars.len(), self.nvars);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(i, vars);
        }
    }

    pub fn eval(&self, vars: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(vars, &mut out);
        out
    }

    /// `∂ component_i / ∂ var_j`.
    pub fn partial(&self, i: usize, j: usize, vars: &[f64]) -> f64 {
        let mut sum = 0.0;
        for t in &self.components[i] {
            let ej = t.exponents[j];
            if ej == 0 {
                continue;
            }
            let mut e = t.exponents.clone();
            e[j] -= 1;
            sum += t.coeff * ej as f64 * Self::monomial(&e, vars);
        }
        sum
    }

    /// Jacobian restricted to the variable range `cols`.
    pub fn jacobian_cols(&self, vars: &[f64], cols: std::ops::Range<usize>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.len(), cols.len());
        for i in 0..self.len() {
            for (c, j) in cols.clone().enumerate() {
                jac[(i, c)] = self.partial(i, j, vars);
            }
        }
        jac
    }

    pub fn jacobian(&self, vars: &[f64]) -> DMatrix<f64> {
        self.jacobian_cols(vars, 0..self.nvars)
    }

    /// Does component `i` depend on variable `j` at all.
    pub fn depends_on(&self, i: usize, j: usize) -> bool {
        self.components[i].iter().any(|t| t.exponents[j] > 0 && t.coeff != 0.0)
    }

    /// Sum of coefficients of constant terms, per component.
    pub fn constant_terms(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .filter(|t| t.exponents.iter().all(|&e| e == 0))
                    .map(|t| t.coeff)
                    .sum()
            })
            .collect()
    }

    /// Canonical textual form used for fingerprints.
    pub fn canonical(&self) -> String {
        let mut s = format!("nvars={};", self.nvars);
        for comp in &self.components {
            let mut terms: Vec<String> = comp
                .iter()
                .map(|t| format!("{:?}:{:e}", t.exponents, t.coeff))
                .collect();
            terms.sort();
            s.push_str(&terms.join(","));
            s.push(';');
        }
        s
    }
}
