//! Moment-matching reduced-order models `ṙ = s(r) - g(r)ℓ(r) + g(r)u`,
//! `y_r = h(π^N(r))`, with `p(ω) = ω`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::assembly::CoefficientBlock;
use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::linalg::solve_ax_plus_xb;
use crate::newton::Solution;
use crate::problem::{eigenvalues, linearize, max_real_part, FullOrderSystem, Problem, SignalGenerator};
use crate::quadrature::BoxDomain;

pub const DEFAULT_GAIN_MARGIN: f64 = 0.5;
/// Finite-difference step for the ROM linearization.
pub const STABILITY_FD_STEP: f64 = 1e-6;
/// Eigenvalues must have real part below this to count as stable. Slightly
/// negative so that finite-difference noise on a marginal linearization fails.
pub const STABILITY_TOL: f64 = -1e-7;

/// Input gain `g(r)` (a `d × m` matrix) of the reduced model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GainSpec {
    /// Constant gain, rows of `G`.
    Constant { g: Vec<Vec<f64>> },
    /// `g = (0, c)ᵀ`.
    Oscillator { c: f64 },
    /// `g(r) = (0, μ(1 - r_1²) + c)ᵀ`.
    VanDerPol { mu: f64, c: f64 },
    /// Constant gain from [`stabilizing_gain`] applied to the generator linearization.
    Designed {
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn default_margin() -> f64 {
    DEFAULT_GAIN_MARGIN
}

impl GainSpec {
    pub fn constant(g: &DMatrix<f64>) -> Self {
        GainSpec::Constant {
            g: g.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    /// `g(r)` as a `d × m` matrix. `Designed` must be resolved first.
    pub fn eval(&self, r: &[f64], d: usize, m: usize) -> Result<DMatrix<f64>> {
        match self {
            GainSpec::Constant { g } => {
                if g.len() != d || g.iter().any(|row| row.len() != m) {
                    return Err(Error::DimensionMismatch {
                        expected: d * m,
                        got: g.iter().map(Vec::len).sum(),
                        context: "constant gain matrix",
                    });
                }
                Ok(DMatrix::from_fn(d, m, |i, j| g[i][j]))
            }
            GainSpec::Oscillator { c } => two_by_one(d, m, *c),
            GainSpec::VanDerPol { mu, c } => two_by_one(d, m, mu * (1.0 - r[0] * r[0]) + c),
            GainSpec::Designed { .. } => Err(Error::invalid("designed gain has not been resolved")),
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            GainSpec::Constant { g } => format!("constant:{g:?}"),
            GainSpec::Oscillator { c } => format!("oscillator:c={c:e}"),
            GainSpec::VanDerPol { mu, c } => format!("van-der-pol:mu={mu:e},c={c:e}"),
            GainSpec::Designed { margin } => format!("designed:margin={margin:e}"),
        }
    }
}

fn two_by_one(d: usize, m: usize, v: f64) -> Result<DMatrix<f64>> {
    if d != 2 || m != 1 {
        return Err(Error::invalid(format!(
            "this gain needs a 2-dimensional generator with scalar output, got d={d}, m={m}"
        )));
    }
    Ok(DMatrix::from_column_slice(2, 1, &[0.0, v]))
}

/// Orthonormal basis split `[observable | unobservable]` of `(S, L)`.
fn observability_split(s: &DMatrix<f64>, l: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let d = s.nrows();
    let m = l.nrows();
    let mut obs = DMatrix::zeros(m * d, d);
    let mut block = l.clone();
    for k in 0..d {
        obs.view_mut((k * m, 0), (m, d)).copy_from(&block);
        block = &block * s;
    }
    // pad so the SVD yields a full d × d right factor
    let rows = obs.nrows().max(d);
    let mut padded = DMatrix::zeros(rows, d);
    padded.view_mut((0, 0), (obs.nrows(), d)).copy_from(&obs);
    let svd = padded.svd(false, true);
    let smax = svd.singular_values.max();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let rank = order
        .iter()
        .filter(|&&k| smax > 0.0 && svd.singular_values[k] > 1e-10 * smax)
        .count();
    let vt = svd.v_t.expect("v_t requested");
    let v = DMatrix::from_fn(d, d, |i, j| vt[(order[j], i)]);
    (v, rank)
}

/// A constant `G` with `max Re λ(S - G L) ≤ -margin`, found by Bass's
/// algorithm on the observable part of `(S, L)`.
pub fn stabilizing_gain(s: &DMatrix<f64>, l: &DMatrix<f64>, margin: f64) -> Result<DMatrix<f64>> {
    let d = s.nrows();
    let m = l.nrows();
    if !s.is_square() || l.ncols() != d || m == 0 {
        return Err(Error::invalid("stabilizing_gain needs square S and L with d columns"));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::invalid("gain margin must be positive"));
    }
    let (v, r) = observability_split(s, l);
    let st = v.transpose() * s * &v;
    let lt = l * &v;
    if r < d {
        let s22 = st.view((r, r), (d - r, d - r)).into_owned();
        let worst = max_real_part(&eigenvalues(&s22));
        if worst >= 0.0 {
            return Err(Error::NotDetectable(format!(
                "unobservable mode with real part {worst:.3e}"
            )));
        }
        if worst > -margin {
            log::warn!("unobservable modes limit the achievable margin to {:.3e}", -worst);
        }
    }
    let mut g = DMatrix::zeros(d, m);
    if r > 0 {
        // dual pair (A, B) = (S11ᵀ, L1ᵀ)
        let a = st.view((0, 0), (r, r)).transpose();
        let b = lt.view((0, 0), (m, r)).transpose();
        let min_re = eigenvalues(&a).iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let beta = margin.max(margin - min_re);
        let shifted = &a + DMatrix::identity(r, r) * beta;
        let rhs = &b * b.transpose() * 2.0;
        let p = solve_ax_plus_xb(&shifted, &shifted.transpose(), &rhs)?;
        let p = (&p + p.transpose()) * 0.5;
        let p_inv = p
            .try_inverse()
            .ok_or_else(|| Error::Singular("Lyapunov solution in gain design".into()))?;
        let k = b.transpose() * p_inv * 2.0;
        g.view_mut((0, 0), (r, m)).copy_from(&k.transpose());
    }
    Ok(&v * g)
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_real_part: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct ReducedOrderModel {
    generator: SignalGenerator,
    system: FullOrderSystem,
    basis: Basis,
    coefficients: CoefficientBlock,
    domain: BoxDomain,
    gain: GainSpec,
    stability: StabilityReport,
}

impl ReducedOrderModel {
    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.generator.output_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.system.output_dim()
    }

    pub fn gain(&self) -> &GainSpec {
        &self.gain
    }

    pub fn generator(&self) -> &SignalGenerator {
        &self.generator
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn coefficients(&self) -> &CoefficientBlock {
        &self.coefficients
    }

    pub fn stability(&self) -> &StabilityReport {
        &self.stability
    }

    /// `s(r) - g(r)ℓ(r) + g(r)u`.
    pub fn dynamics_into(&self, r: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let (d, m) = (self.dim(), self.input_dim());
        self.generator.s_into(r, out);
        let ell = self.generator.ell(r);
        let g = self.gain.eval(r, d, m)?;
        for i in 0..d {
            for j in 0..m {
                out[i] += g[(i, j)] * (u[j] - ell[j]);
            }
        }
        Ok(())
    }

    pub fn dynamics(&self, r: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.dynamics_into(r, u, &mut out)?;
        Ok(out)
    }

    /// `π^N(r)`.
    pub fn pi(&self, r: &[f64]) -> Vec<f64> {
        let phi = self.basis.eval(r);
        (0..self.coefficients.blocks())
            .map(|i| self.coefficients.block(i).iter().zip(&phi).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn output(&self, r: &[f64]) -> Vec<f64> {
        self.system.h(&self.pi(r))
    }
}

fn linearization_at_origin(
    generator: &SignalGenerator,
    gain: &GainSpec,
) -> Result<DMatrix<f64>> {
    let (d, m) = (generator.dim(), generator.output_dim());
    let field = |r: &[f64]| -> Result<Vec<f64>> {
        let mut out = generator.s(r);
        let ell = generator.ell(r);
        let g = gain.eval(r, d, m)?;
        for i in 0..d {
            for j in 0..m {
                out[i] -= g[(i, j)] * ell[j];
            }
        }
        Ok(out)
    };
    let h = STABILITY_FD_STEP;
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        plus[j] = h;
        minus[j] = -h;
        let (fp, fm) = (field(&plus)?, field(&minus)?);
        for i in 0..d {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn stability_report(generator: &SignalGenerator, gain: &GainSpec) -> Result<StabilityReport> {
    let jacobian = linearization_at_origin(generator, gain)?;
    let ev = eigenvalues(&jacobian);
    let worst = max_real_part(&ev);
    Ok(StabilityReport {
        jacobian,
        eigenvalues: ev,
        max_real_part: worst,
        passed: worst < STABILITY_TOL,
    })
}

pub fn verify_rom_stability(rom: &ReducedOrderModel) -> StabilityReport {
    rom.stability.clone()
}

/// Replace `Designed` by the constant gain it stands for.
pub fn resolve_gain(problem: &Problem, gain: &GainSpec) -> Result<GainSpec> {
    match gain {
        GainSpec::Designed { margin } => {
            let lin = linearize(problem);
            Ok(GainSpec::constant(&stabilizing_gain(&lin.s, &lin.l, *margin)?))
        }
        other => Ok(other.clone()),
    }
}

/// Build from raw coefficients, as loaded from a coefficient file.
pub fn build_rom_from_coefficients(
    problem: &Problem,
    basis: &Basis,
    domain: &BoxDomain,
    coefficients: &CoefficientBlock,
    gain: &GainSpec,
) -> Result<ReducedOrderModel> {
    if coefficients.basis_len() != basis.len() || coefficients.blocks() != problem.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.len() * problem.state_dim(),
            got: coefficients.len(),
            context: "ROM coefficients",
        });
    }
    if basis.dim() != problem.generator_dim() {
        return Err(Error::invalid("basis dimension differs from generator dimension"));
    }
    let gain = resolve_gain(problem, gain)?;
    let stability = stability_report(&problem.generator, &gain)?;
    if !stability.passed {
        return Err(Error::UnstableGain {
            max_real_part: stability.max_real_part,
        });
    }
    Ok(ReducedOrderModel {
        generator: problem.generator.clone(),
        system: problem.system.clone(),
        basis: basis.clone(),
        coefficients: coefficients.clone(),
        domain: domain.clone(),
        gain,
        stability,
    })
}

pub fn build_rom(
    problem: &Problem,
    basis: &Basis,
    domain: &BoxDomain,
    solution: &Solution,
    gain: &GainSpec,
) -> Result<ReducedOrderModel> {
    if !solution.converged {
        return Err(Error::invalid("ROM requires a converged solution"));
    }
    build_rom_from_coefficients(problem, basis, domain, &solution.c, gain)
}
