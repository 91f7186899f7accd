//! Dense and block linear solves used by the Newton iteration, plus the
//! Sylvester equation `ΠS = AΠ + BL`.

use nalgebra::{DMatrix, DVector};

use crate::assembly::BlockTridiagonal;
use crate::error::{Error, Result};

/// Pivots below this fraction of the largest pivot count as singular.
pub const PIVOT_RATIO: f64 = 1e-12;

fn pivot_ratio(u_diag: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in u_diag {
        lo = lo.min(p.abs());
        hi = hi.max(p.abs());
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Partial-pivoting LU that refuses near-singular matrices.
pub struct CheckedLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CheckedLu {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("LU of a non-square matrix"));
        }
        let lu = m.clone().lu();
        let ratio = pivot_ratio(lu.u().diagonal().iter().copied());
        if !(ratio >= PIVOT_RATIO) {
            return Err(Error::Singular(format!(
                "pivot ratio {ratio:.3e} below {PIVOT_RATIO:.0e}"
            )));
        }
        Ok(CheckedLu { lu })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("non-singular by construction")
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.lu.solve(b).expect("non-singular by construction")
    }
}

pub fn lu_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(CheckedLu::new(m)?.solve(b))
}

/// `m⁺ b`, zeroing singular values below `rank_cutoff · σ_max`.
pub fn pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>, rank_cutoff: f64) -> Result<DVector<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::Singular("matrix has no nonzero singular values".into()));
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut utb = u.transpose() * b;
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > rank_cutoff * smax {
            utb[k] /= s;
        } else {
            utb[k] = 0.0;
        }
    }
    Ok(vt.transpose() * utb)
}

/// Block Thomas elimination for `J x = b`.
pub fn block_tridiagonal_solve(jac: &BlockTridiagonal, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = jac.blocks();
    let nb = jac.block_size();
    if b.len() != n * nb {
        return Err(Error::DimensionMismatch {
            expected: n * nb,
            got: b.len(),
            context: "block tridiagonal right-hand side",
        });
    }
    let mut factors: Vec<CheckedLu> = Vec::with_capacity(n);
    let mut rhs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut modified_diag = jac.diag[0].clone();
    let mut rhs_i = b.rows(0, nb).into_owned();
    for i in 0..n {
        let lu = CheckedLu::new(&modified_diag)
            .map_err(|e| Error::Singular(format!("diagonal block {i}: {e}")))?;
        if i + 1 < n {
            // W = L_i D'_i^{-1}; D'_{i+1} = D_{i+1} - W U_i; b'_{i+1} = b_{i+1} - W b'_i
            let dinv_u = lu.solve_mat(&jac.upper[i]);
            let dinv_b = lu.solve(&rhs_i);
            let next_diag = &jac.diag[i + 1] - &jac.lower[i] * dinv_u;
            let next_rhs = b.rows((i + 1) * nb, nb) - &jac.lower[i] * dinv_b;
            factors.push(lu);
            rhs.push(rhs_i);
            modified_diag = next_diag;
            rhs_i = next_rhs;
        } else {
            factors.push(lu);
            rhs.push(rhs_i.clone());
        }
    }
    let mut x = DVector::zeros(n * nb);
    let mut next: Option<DVector<f64>> = None;
    for i in (0..n).rev() {
        let mut r = rhs[i].clone();
        if let Some(xn) = &next {
            r -= &jac.upper[i] * xn;
        }
        let xi = factors[i].solve(&r);
        x.rows_mut(i * nb, nb).copy_from(&xi);
        next = Some(xi);
    }
    Ok(x)
}

/// Solve `A X + X B = C` through the vectorized `(I ⊗ A + Bᵀ ⊗ I)` system.
pub fn solve_ax_plus_xb(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = (a.nrows(), b.nrows());
    if !a.is_square() || !b.is_square() || c.shape() != (n, d) {
        return Err(Error::invalid("incompatible shapes for A X + X B = C"));
    }
    let kron = DMatrix::<f64>::identity(d, d).kronecker(a) + b.transpose().kronecker(&DMatrix::identity(n, n));
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = lu_solve(&kron, &rhs)
        .map_err(|_| Error::Singular("spectra of the coefficient matrices overlap".into()))?;
    Ok(DMatrix::from_column_slice(n, d, x.as_slice()))
}

/// `Π` with `Π S = A_sys Π + B_sys L`.
pub fn solve_sylvester(
    s: &DMatrix<f64>,
    l: &DMatrix<f64>,
    a_sys: &DMatrix<f64>,
    b_sys: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if b_sys.ncols() != l.nrows() || l.ncols() != s.nrows() || b_sys.nrows() != a_sys.nrows() {
        return Err(Error::invalid("incompatible shapes for the Sylvester equation"));
    }
    // -A Π + Π S = B L
    solve_ax_plus_xb(&(-a_sys), s, &(b_sys * l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_step() {
        let f = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let i = DMatrix::identity(3, 3);
        assert_eq!(lu_solve(&i, &f).unwrap(), f);
        assert!((pinv_solve(&i, &f, 1e-10).unwrap() - &f).amax() < 1e-15);
    }

    #[test]
    fn lu_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(CheckedLu::new(&m), Err(Error::Singular(_))));
        // the pseudoinverse returns the minimum-norm least-squares solution
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = pinv_solve(&m, &b, 1e-10).unwrap();
        assert!((&m * &x - &b).amax() < 1e-12);
        assert!((x - DVector::from_vec(vec![0.2, 0.4])).amax() < 1e-12);
    }

    #[test]
    fn block_thomas_matches_dense() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for (n, nb) in [(1usize, 4usize), (5, 5), (7, 3)] {
            let off = random_matrix(&mut rng, nb, nb) * 0.3;
            let jac = BlockTridiagonal {
                lower: vec![off.clone(); n - 1],
                diag: (0..n)
                    .map(|_| random_matrix(&mut rng, nb, nb) + DMatrix::identity(nb, nb) * 4.0)
                    .collect(),
                upper: (0..n - 1).map(|_| random_matrix(&mut rng, nb, nb) * 0.3).collect(),
            };
            let b = DVector::from_fn(n * nb, |_, _| rng.gen_range(-1.0..1.0));
            let xb = block_tridiagonal_solve(&jac, &b).unwrap();
            let xd = lu_solve(&jac.to_dense(), &b).unwrap();
            assert!((&xb - &xd).norm() < 1e-10 * xd.norm().max(1.0));
            assert!((jac.mul_vec(&xb) - &b).amax() < 1e-10);
        }
    }

    #[test]
    fn block_thomas_rejects_singular_block() {
        let z = DMatrix::zeros(2, 2);
        let jac = BlockTridiagonal {
            lower: vec![],
            diag: vec![z],
            upper: vec![],
        };
        assert!(block_tridiagonal_solve(&jac, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn sylvester_test1_linear_part() {
        let a = 2.0;
        let s = DMatrix::from_row_slice(2, 2, &[0.0, a, -a, 0.0]);
        let l = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let a_sys = -DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let pi = solve_sylvester(&s, &l, &a_sys, &b).unwrap();
        assert!((pi[(0, 0)] - 0.2).abs() < 1e-14);
        assert!((pi[(0, 1)] + 0.4).abs() < 1e-14);
        assert!(pi.row(1).amax() < 1e-14);
        let zero = solve_sylvester(&s, &l, &a_sys, &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn sylvester_random_residual() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(1..=6);
            let w = rng.gen_range(0.5..3.0);
            let s = DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]);
            let a_sys = random_matrix(&mut rng, n, n) - DMatrix::identity(n, n) * (n as f64 + 1.0);
            let b = random_matrix(&mut rng, n, 1);
            let l = random_matrix(&mut rng, 1, 2);
            let pi = solve_sylvester(&s, &l, &a_sys, &b).unwrap();
            let res = &pi * &s - &a_sys * &pi - &b * &l;
            assert!(res.amax() < 1e-10);
        }
    }

    #[test]
    fn sylvester_overlapping_spectra() {
        let s = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let one = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(solve_sylvester(&s, &one, &a, &one).is_err());
    }
}
