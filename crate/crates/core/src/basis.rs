//! Multivariate monomial basis without a constant term.
//!
//! The basis holds every monomial `ω_1^{ν_1} ⋯ ω_d^{ν_d}` with total degree in
//! `1..=M`, ordered by ascending total degree and, within a degree, by
//! descending lexicographic order of the exponent vector (so `ω_1` precedes
//! `ω_2`). Coefficient files and the Jacobian block layout depend on this
//! ordering.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Exponent vector of a single monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Componentwise sum; the exponent vector of the product monomial.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
}

/// Number of monomials with total degree in `1..=degree` in `dim` variables.
pub fn basis_count(dim: usize, degree: u32) -> Result<usize> {
    if dim == 0 || degree == 0 {
        return Err(Error::invalid(format!(
            "basis requires d >= 1 and M >= 1 (got d={dim}, M={degree})"
        )));
    }
    let overflow = || Error::CountOverflow { dim, degree };
    let mut total: usize = 0;
    for m in 1..=degree as usize {
        // C(d+m-1, m) built incrementally; each partial product is itself a binomial.
        let mut binom: usize = 1;
        for k in 1..=m {
            binom = binom
                .checked_mul(dim + k - 1)
                .ok_or_else(overflow)?
                / k;
        }
        total = total.checked_add(binom).ok_or_else(overflow)?;
    }
    Ok(total)
}

fn push_degree(dim: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == dim {
        prefix.push(remaining);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for e in (0..=remaining).rev() {
        prefix.push(e);
        push_degree(dim, remaining - e, prefix, out);
        prefix.pop();
    }
}

impl Basis {
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        let count = basis_count(dim, degree)?;
        let mut indices = Vec::with_capacity(count);
        let mut prefix = Vec::with_capacity(dim);
        for m in 1..=degree {
            push_degree(dim, m, &mut prefix, &mut indices);
        }
        debug_assert_eq!(indices.len(), count);
        Ok(Basis {
            dim,
            degree,
            indices,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Position of a multi-index in the ordering, if present.
    pub fn position(&self, exponents: &[u32]) -> Option<usize> {
        self.indices.iter().position(|m| m.0 == exponents)
    }

    /// `powers[j][e] = ω_j^e` for `e <= M`, by repeated multiplication.
    fn powers(&self, point: &[f64]) -> Vec<Vec<f64>> {
        point
            .iter()
            .map(|&x| {
                let mut p = Vec::with_capacity(self.degree as usize + 1);
                let mut acc = 1.0;
                p.push(acc);
                for _ in 0..self.degree {
                    acc *= x;
                    p.push(acc);
                }
                p
            })
            .collect()
    }

    /// Values of every basis function at `point`.
    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(point, &mut out);
        out
    }

    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        assert_eq!(point.len(), self.dim, "point dimension");
        let pw = self.powers(point);
        for (o, idx) in out.iter_mut().zip(&self.indices) {
            *o = idx
                .0
                .iter()
                .enumerate()
                .map(|(j, &e)| pw[j][e as usize])
                .product();
        }
    }

    /// `N × d` matrix of partial derivatives `∂φ_k/∂ω_j`.
    pub fn eval_gradient(&self, point: &[f64]) -> DMatrix<f64> {
        assert_eq!(point.len(), self.dim, "point dimension");
        let pw = self.powers(point);
        let mut grad = DMatrix::zeros(self.len(), self.dim);
        for (k, idx) in self.indices.iter().enumerate() {
            for j in 0..self.dim {
                let ej = idx.0[j];
                if ej == 0 {
                    continue;
                }
                let mut v = ej as f64 * pw[j][ej as usize - 1];
                for (i, &ei) in idx.0.iter().enumerate() {
                    if i != j {
                        v *= pw[i][ei as usize];
                    }
                }
                grad[(k, j)] = v;
            }
        }
        grad
    }

    /// `π_i^N(ω) = Φ^N(ω) · c_i`.
    pub fn eval_expansion(&self, coeffs: &[f64], point: &[f64]) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
                context: "expansion coefficients",
            });
        }
        let phi = self.eval(point);
        Ok(phi.iter().zip(coeffs).map(|(p, c)| p * c).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn graded_lex_order_d2_m2() {
        let b = Basis::new(2, 2).unwrap();
        assert_eq!(
            b.indices(),
            &[idx(&[1, 0]), idx(&[0, 1]), idx(&[2, 0]), idx(&[1, 1]), idx(&[0, 2])]
        );
    }

    #[test]
    fn one_dimensional_basis() {
        let b = Basis::new(1, 3).unwrap();
        assert_eq!(b.indices(), &[idx(&[1]), idx(&[2]), idx(&[3])]);
    }

    #[test]
    fn counts() {
        assert_eq!(basis_count(2, 2).unwrap(), 5);
        assert_eq!(basis_count(2, 4).unwrap(), 14);
        assert_eq!(basis_count(2, 6).unwrap(), 27);
        assert_eq!(Basis::new(2, 6).unwrap().len(), 27);
    }

    #[test]
    fn rejects_zero_arguments() {
        assert!(Basis::new(0, 2).is_err());
        assert!(Basis::new(2, 0).is_err());
        assert!(basis_count(0, 1).is_err());
    }

    #[test]
    fn count_overflow_is_reported() {
        assert!(matches!(
            basis_count(1 << 40, 8),
            Err(Error::CountOverflow { .. })
        ));
    }

    #[test]
    fn count_matches_enumeration_small() {
        for d in 1..=4 {
            for m in 1..=8 {
                let b = Basis::new(d, m).unwrap();
                assert_eq!(b.len(), basis_count(d, m).unwrap());
                let mut sorted = b.indices().to_vec();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), b.len(), "duplicates for d={d} M={m}");
                assert!(b.indices().iter().all(|i| (1..=m).contains(&i.degree())));
                assert!(b
                    .indices()
                    .windows(2)
                    .all(|w| w[0].degree() <= w[1].degree()));
            }
        }
    }

    #[test]
    fn evaluation_examples() {
        let b = Basis::new(2, 2).unwrap();
        assert_eq!(b.eval(&[0.0, 0.0]), vec![0.0; 5]);
        assert_eq!(b.eval(&[1.0, 1.0]), vec![1.0; 5]);
        assert_eq!(b.eval(&[2.0, 3.0]), vec![2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn gradient_examples() {
        let b = Basis::new(2, 2).unwrap();
        let g = b.eval_gradient(&[2.0, 3.0]);
        let k11 = b.position(&[1, 1]).unwrap();
        let k20 = b.position(&[2, 0]).unwrap();
        assert_eq!((g[(k11, 0)], g[(k11, 1)]), (3.0, 2.0));
        assert_eq!((g[(k20, 0)], g[(k20, 1)]), (4.0, 0.0));
    }

    #[test]
    fn expansion_examples() {
        let b = Basis::new(2, 2).unwrap();
        assert_eq!(b.eval_expansion(&[0.0; 5], &[0.3, -0.4]).unwrap(), 0.0);
        let mut unit = vec![0.0; 5];
        unit[b.position(&[1, 0]).unwrap()] = 1.0;
        assert_eq!(b.eval_expansion(&unit, &[0.5, 0.7]).unwrap(), 0.5);
        assert!(b.eval_expansion(&[1.0; 4], &[0.5, 0.7]).is_err());
    }

    #[test]
    fn deterministic_ordering() {
        assert_eq!(Basis::new(3, 5).unwrap(), Basis::new(3, 5).unwrap());
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            d in 1usize..=3,
            m in 1u32..=6,
            pt in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let b = Basis::new(d, m).unwrap();
            let p = &pt[..d];
            let g = b.eval_gradient(p);
            let h = 1e-6;
            for j in 0..d {
                let mut fwd = p.to_vec();
                let mut bwd = p.to_vec();
                fwd[j] += h;
                bwd[j] -= h;
                let (vf, vb) = (b.eval(&fwd), b.eval(&bwd));
                for k in 0..b.len() {
                    let fd = (vf[k] - vb[k]) / (2.0 * h);
                    let scale = g[(k, j)].abs().max(1e-3);
                    prop_assert!((fd - g[(k, j)]).abs() / scale < 1e-5);
                }
            }
        }

        #[test]
        fn no_constant_term(d in 1usize..=4, m in 1u32..=6) {
            let b = Basis::new(d, m).unwrap();
            prop_assert!(b.eval(&vec![0.0; d]).iter().all(|&v| v == 0.0));
        }
    }
}
