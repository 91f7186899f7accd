//! Problem data: the signal generator `(s, ℓ)` and the full-order system
//! `(f, h)`, built-in benchmark constructors, linearization and the
//! stability assumption checks.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::poly::{PolyMap, PolyTerm};

pub const DEFAULT_KAPPA: f64 = 1.1;
pub const DEFAULT_A: f64 = 2.0;
pub const DEFAULT_MU: f64 = 0.25;
pub const DEFAULT_C: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorDynamics {
    /// `s(ω) = a (ω_2, -ω_1)`, `ℓ(ω) = ω_{output_index}`.
    Rotation { a: f64, output_index: usize },
    /// `s(ω) = (ω_2, -ω_1 + μ (1 - ω_1²) ω_2)`, `ℓ(ω) = ω_2`.
    VanDerPol { mu: f64 },
    /// Target dynamics of the cart-pendulum position controller.
    CartPendulum { a1: f64, a2: f64, k: f64 },
    Polynomial { s: PolyMap, ell: PolyMap },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalGenerator {
    dynamics: GeneratorDynamics,
}

impl SignalGenerator {
    pub fn dynamics(&self) -> &GeneratorDynamics {
        &self.dynamics
    }

    pub fn polynomial(s: PolyMap, ell: PolyMap) -> Result<Self> {
        s.validate()?;
        ell.validate()?;
        if s.nvars != s.len() {
            return Err(Error::invalid(format!(
                "generator vector field must map R^d to R^d (got {} vars, {} components)",
                s.nvars,
                s.len()
            )));
        }
        if ell.nvars != s.nvars {
            return Err(Error::DimensionMismatch {
                expected: s.nvars,
                got: ell.nvars,
                context: "generator output variables",
            });
        }
        if s.constant_terms().iter().chain(&ell.constant_terms()).any(|&c| c != 0.0) {
            return Err(Error::invalid("generator must have an equilibrium at the origin"));
        }
        Ok(SignalGenerator {
            dynamics: GeneratorDynamics::Polynomial { s, ell },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.dynamics {
            GeneratorDynamics::Polynomial { s, .. } => s.len(),
            _ => 2,
        }
    }

    /// Dimension `m` of `ℓ`.
    pub fn output_dim(&self) -> usize {
        match &self.dynamics {
            GeneratorDynamics::Polynomial { ell, .. } => ell.len(),
            _ => 1,
        }
    }

    pub fn s_into(&self, w: &[f64], out: &mut [f64]) {
        match &self.dynamics {
            GeneratorDynamics::Rotation { a, .. } => {
                out[0] = a * w[1];
                out[1] = -a * w[0];
            }
            GeneratorDynamics::VanDerPol { mu } => {
                out[0] = w[1];
                out[1] = -w[0] + mu * (1.0 - w[0] * w[0]) * w[1];
            }
            GeneratorDynamics::CartPendulum { a1, a2, k } => {
                out[0] = w[1];
                out[1] = a1 * w[0].sin() / (1.0 + k * a2 * w[0].cos());
            }
            GeneratorDynamics::Polynomial { s, .. } => s.eval_into(w, out),
        }
    }

    pub fn s(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.s_into(w, &mut out);
        out
    }

    pub fn ell_into(&self, w: &[f64], out: &mut [f64]) {
        match &self.dynamics {
            GeneratorDynamics::Rotation { output_index, .. } => out[0] = w[*output_index],
            GeneratorDynamics::VanDerPol { .. } => out[0] = w[1],
            GeneratorDynamics::CartPendulum { a1, a2, k } => {
                out[0] = k * a1 * w[0].sin() / (1.0 + k * a2 * w[0].cos());
            }
            GeneratorDynamics::Polynomial { ell, .. } => ell.eval_into(w, out),
        }
    }

    pub fn ell(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.ell_into(w, &mut out);
        out
    }

    pub fn s_jacobian(&self, w: &[f64]) -> DMatrix<f64> {
        match &self.dynamics {
            GeneratorDynamics::Rotation { a, .. } => {
                DMatrix::from_row_slice(2, 2, &[0.0, *a, -*a, 0.0])
            }
            GeneratorDynamics::VanDerPol { mu } => DMatrix::from_row_slice(
                2,
                2,
                &[
                    0.0,
                    1.0,
                    -1.0 - 2.0 * mu * w[0] * w[1],
                    mu * (1.0 - w[0] * w[0]),
                ],
            ),
            GeneratorDynamics::CartPendulum { a1, a2, k } => {
                let den = 1.0 + k * a2 * w[0].cos();
                let d = a1 * (w[0].cos() + k * a2) / (den * den);
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, d, 0.0])
            }
            GeneratorDynamics::Polynomial { s, .. } => s.jacobian(w),
        }
    }

    pub fn ell_jacobian(&self, w: &[f64]) -> DMatrix<f64> {
        match &self.dynamics {
            GeneratorDynamics::Rotation { output_index, .. } => {
                let mut j = DMatrix::zeros(1, 2);
                j[(0, *output_index)] = 1.0;
                j
            }
            GeneratorDynamics::VanDerPol { .. } => DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            GeneratorDynamics::CartPendulum { a1, a2, k } => {
                let den = 1.0 + k * a2 * w[0].cos();
                let d = k * a1 * (w[0].cos() + k * a2) / (den * den);
                DMatrix::from_row_slice(1, 2, &[d, 0.0])
            }
            GeneratorDynamics::Polynomial { ell, .. } => ell.jacobian(w),
        }
    }

    /// Coefficient tables for `(s, ℓ)` when both are polynomial.
    pub fn polynomial_form(&self) -> Option<(PolyMap, PolyMap)> {
        let t = PolyTerm::new;
        match &self.dynamics {
            GeneratorDynamics::Rotation { a, output_index } => {
                let mut e = vec![0, 0];
                e[*output_index] = 1;
                Some((
                    PolyMap {
                        nvars: 2,
                        components: vec![vec![t(vec![0, 1], *a)], vec![t(vec![1, 0], -*a)]],
                    },
                    PolyMap {
                        nvars: 2,
                        components: vec![vec![t(e, 1.0)]],
                    },
                ))
            }
            GeneratorDynamics::VanDerPol { mu } => Some((
                PolyMap {
                    nvars: 2,
                    components: vec![
                        vec![t(vec![0, 1], 1.0)],
                        vec![t(vec![1, 0], -1.0), t(vec![0, 1], *mu), t(vec![2, 1], -*mu)],
                    ],
                },
                PolyMap {
                    nvars: 2,
                    components: vec![vec![t(vec![0, 1], 1.0)]],
                },
            )),
            GeneratorDynamics::CartPendulum { .. } => None,
            GeneratorDynamics::Polynomial { s, ell } => Some((s.clone(), ell.clone())),
        }
    }

    fn canonical(&self) -> String {
        match &self.dynamics {
            GeneratorDynamics::CartPendulum { a1, a2, k } => {
                format!("cart-pendulum-generator(a1={a1:e},a2={a2:e},k={k:e})")
            }
            _ => {
                let (s, ell) = self.polynomial_form().expect("polynomial generator");
                format!("poly-generator(s={};ell={})", s.canonical(), ell.canonical())
            }
        }
    }
}

/// Linear oscillator `s(ω) = (aω_2, -aω_1)` with output `ℓ(ω) = ω_2`.
pub fn make_linear_oscillator(a: f64) -> Result<SignalGenerator> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::invalid("oscillator frequency a must be nonzero"));
    }
    Ok(SignalGenerator {
        dynamics: GeneratorDynamics::Rotation { a, output_index: 1 },
    })
}

pub fn make_van_der_pol(mu: f64) -> Result<SignalGenerator> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid("Van der Pol parameter mu must be positive"));
    }
    Ok(SignalGenerator {
        dynamics: GeneratorDynamics::VanDerPol { mu },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StructureTag {
    Generic,
    /// Tridiagonal coupling with componentwise `x²/2 + x³/3` damping, input on
    /// the first state only.
    ChainCubic { kappa: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SystemDynamics {
    /// `f = (-x_1 + u, -x_2 + x_1 u)`, `h = x_1`.
    Isidori,
    /// `f = (x_3, x_4, a_1 sin x_1 - a_2 cos x_1 u, u)`, `h = x_1`.
    CartPendulum { a1: f64, a2: f64 },
    RlLadder { n: usize, kappa: f64 },
    /// `f` over the variables `(x_1..x_n, u_1..u_m)`, `h` over `x`.
    Polynomial { f: PolyMap, h: PolyMap, inputs: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullOrderSystem {
    dynamics: SystemDynamics,
}

impl FullOrderSystem {
    pub fn dynamics(&self) -> &SystemDynamics {
        &self.dynamics
    }

    pub fn polynomial(f: PolyMap, h: PolyMap, inputs: usize) -> Result<Self> {
        f.validate()?;
        h.validate()?;
        let n = f.len();
        if f.nvars != n + inputs {
            return Err(Error::DimensionMismatch {
                expected: n + inputs,
                got: f.nvars,
                context: "system vector field variables (n + m)",
            });
        }
        if h.nvars != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h.nvars,
                context: "system output variables",
            });
        }
        if f.constant_terms().iter().chain(&h.constant_terms()).any(|&c| c != 0.0) {
            return Err(Error::invalid("system must have an equilibrium at the origin"));
        }
        Ok(FullOrderSystem {
            dynamics: SystemDynamics::Polynomial { f, h, inputs },
        })
    }

    pub fn state_dim(&self) -> usize {
        match &self.dynamics {
            SystemDynamics::Isidori => 2,
            SystemDynamics::CartPendulum { .. } => 4,
            SystemDynamics::RlLadder { n, .. } => *n,
            SystemDynamics::Polynomial { f, .. } => f.len(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.dynamics {
            SystemDynamics::Polynomial { inputs, .. } => *inputs,
            _ => 1,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.dynamics {
            SystemDynamics::Polynomial { h, .. } => h.len(),
            _ => 1,
        }
    }

    pub fn structure(&self) -> StructureTag {
        match &self.dynamics {
            SystemDynamics::RlLadder { kappa, .. } => StructureTag::ChainCubic { kappa: *kappa },
            _ => StructureTag::Generic,
        }
    }

    pub fn f_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match &self.dynamics {
            SystemDynamics::Isidori => {
                out[0] = -x[0] + u[0];
                out[1] = -x[1] + x[0] * u[0];
            }
            SystemDynamics::CartPendulum { a1, a2 } => {
                out[0] = x[2];
                out[1] = x[3];
                out[2] = a1 * x[0].sin() - a2 * x[0].cos() * u[0];
                out[3] = u[0];
            }
            SystemDynamics::RlLadder { n, kappa } => {
                let n = *n;
                for i in 0..n {
                    let xi = x[i];
                    let mut v = -2.0 * kappa * xi - xi * xi / 2.0 - xi * xi * xi / 3.0;
                    if i > 0 {
                        v += x[i - 1];
                    }
                    if i + 1 < n {
                        v += x[i + 1];
                    }
                    out[i] = v;
                }
                out[0] += u[0];
            }
            SystemDynamics::Polynomial { f, .. } => {
                let vars: Vec<f64> = x.iter().chain(u).copied().collect();
                f.eval_into(&vars, out);
            }
        }
    }

    pub fn f(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim()];
        self.f_into(x, u, &mut out);
        out
    }

    /// Single component `f_i(x, u)`.
    pub fn f_component(&self, i: usize, x: &[f64], u: &[f64]) -> f64 {
        match &self.dynamics {
            SystemDynamics::RlLadder { n, kappa } => {
                let xi = x[i];
                let mut v = -2.0 * kappa * xi - xi * xi / 2.0 - xi * xi * xi / 3.0;
                if i > 0 {
                    v += x[i - 1];
                }
                if i + 1 < *n {
                    v += x[i + 1];
                }
                if i == 0 {
                    v += u[0];
                }
                v
            }
            _ => self.f(x, u)[i],
        }
    }

    pub fn h_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.dynamics {
            SystemDynamics::Polynomial { h, .. } => h.eval_into(x, out),
            _ => out[0] = x[0],
        }
    }

    pub fn h(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.h_into(x, &mut out);
        out
    }

    pub fn f_jacobian_x(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        match &self.dynamics {
            SystemDynamics::Isidori => {
                DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, u[0], -1.0])
            }
            SystemDynamics::CartPendulum { a1, a2 } => {
                let mut j = DMatrix::zeros(4, 4);
                j[(0, 2)] = 1.0;
                j[(1, 3)] = 1.0;
                j[(2, 0)] = a1 * x[0].cos() + a2 * x[0].sin() * u[0];
                j
            }
            SystemDynamics::RlLadder { n, kappa } => {
                let n = *n;
                let mut j = DMatrix::zeros(n, n);
                for i in 0..n {
                    j[(i, i)] = -2.0 * kappa - x[i] - x[i] * x[i];
                    if i > 0 {
                        j[(i, i - 1)] = 1.0;
                    }
                    if i + 1 < n {
                        j[(i, i + 1)] = 1.0;
                    }
                }
                j
            }
            SystemDynamics::Polynomial { f, .. } => {
                let n = f.len();
                let vars: Vec<f64> = x.iter().chain(u).copied().collect();
                f.jacobian_cols(&vars, 0..n)
            }
        }
    }

    pub fn f_jacobian_u(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        match &self.dynamics {
            SystemDynamics::Isidori => DMatrix::from_row_slice(2, 1, &[1.0, x[0]]),
            SystemDynamics::CartPendulum { a2, .. } => {
                DMatrix::from_row_slice(4, 1, &[0.0, 0.0, -a2 * x[0].cos(), 1.0])
            }
            SystemDynamics::RlLadder { n, .. } => {
                let mut j = DMatrix::zeros(*n, 1);
                j[(0, 0)] = 1.0;
                j
            }
            SystemDynamics::Polynomial { f, inputs, .. } => {
                let n = f.len();
                let vars: Vec<f64> = x.iter().chain(u).copied().collect();
                f.jacobian_cols(&vars, n..n + inputs)
            }
        }
    }

    /// Sparsity of `∂f_i/∂x_j`: false only where the entry is identically zero.
    pub fn couples(&self, i: usize, j: usize) -> bool {
        match &self.dynamics {
            SystemDynamics::Isidori => !(i == 0 && j == 1),
            SystemDynamics::CartPendulum { .. } => {
                matches!((i, j), (0, 2) | (1, 3) | (2, 0))
            }
            SystemDynamics::RlLadder { .. } => i.abs_diff(j) <= 1,
            SystemDynamics::Polynomial { f, .. } => f.depends_on(i, j),
        }
    }

    /// Coefficient tables for `(f, h)` when both are polynomial.
    pub fn polynomial_form(&self) -> Option<(PolyMap, PolyMap)> {
        let t = PolyTerm::new;
        match &self.dynamics {
            SystemDynamics::Isidori => Some((
                PolyMap {
                    nvars: 3,
                    components: vec![
                        vec![t(vec![1, 0, 0], -1.0), t(vec![0, 0, 1], 1.0)],
                        vec![t(vec![0, 1, 0], -1.0), t(vec![1, 0, 1], 1.0)],
                    ],
                },
                PolyMap {
                    nvars: 2,
                    components: vec![vec![t(vec![1, 0], 1.0)]],
                },
            )),
            SystemDynamics::CartPendulum { .. } => None,
            SystemDynamics::RlLadder { n, kappa } => {
                let n = *n;
                let unit = |j: usize, e: u32| {
                    let mut v = vec![0; n + 1];
                    v[j] = e;
                    v
                };
                let components = (0..n)
                    .map(|i| {
                        let mut c = vec![
                            t(unit(i, 1), -2.0 * kappa),
                            t(unit(i, 2), -0.5),
                            t(unit(i, 3), -1.0 / 3.0),
                        ];
                        if i > 0 {
                            c.push(t(unit(i - 1, 1), 1.0));
                        }
                        if i + 1 < n {
                            c.push(t(unit(i + 1, 1), 1.0));
                        }
                        if i == 0 {
                            c.push(t(unit(n, 1), 1.0));
                        }
                        c
                    })
                    .collect();
                let mut hx = vec![0; n];
                hx[0] = 1;
                Some((
                    PolyMap {
                        nvars: n + 1,
                        components,
                    },
                    PolyMap {
                        nvars: n,
                        components: vec![vec![t(hx, 1.0)]],
                    },
                ))
            }
            SystemDynamics::Polynomial { f, h, .. } => Some((f.clone(), h.clone())),
        }
    }

    fn canonical(&self) -> String {
        match &self.dynamics {
            SystemDynamics::CartPendulum { a1, a2 } => {
                format!("cart-pendulum(a1={a1:e},a2={a2:e})")
            }
            SystemDynamics::RlLadder { n, kappa } => format!("rl-ladder(n={n},kappa={kappa:e})"),
            SystemDynamics::Isidori => "isidori".to_string(),
            SystemDynamics::Polynomial { f, h, inputs } => {
                format!("poly-system(m={inputs};f={};h={})", f.canonical(), h.canonical())
            }
        }
    }
}

/// RL ladder of `n` sections with coupling parameter `kappa`.
pub fn make_rl_ladder(n: usize, kappa: f64) -> Result<FullOrderSystem> {
    if n < 2 {
        return Err(Error::invalid(format!("RL ladder requires n >= 2, got {n}")));
    }
    if !kappa.is_finite() {
        return Err(Error::invalid("kappa must be finite"));
    }
    Ok(FullOrderSystem {
        dynamics: SystemDynamics::RlLadder { n, kappa },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub name: String,
    pub generator: SignalGenerator,
    pub system: FullOrderSystem,
    pub params: BTreeMap<String, f64>,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        generator: SignalGenerator,
        system: FullOrderSystem,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if generator.output_dim() != system.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: system.input_dim(),
                got: generator.output_dim(),
                context: "generator output vs system input (u = v)",
            });
        }
        Ok(Problem {
            name: name.into(),
            generator,
            system,
            params,
        })
    }

    /// `d`.
    pub fn generator_dim(&self) -> usize {
        self.generator.dim()
    }

    /// `n`.
    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn is_chain_cubic(&self) -> bool {
        matches!(self.system.structure(), StructureTag::ChainCubic { .. })
    }

    /// Stable 64-bit FNV-1a hash of the problem definition, as 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let text = format!(
            "{}|{}|{}",
            self.name,
            self.generator.canonical(),
            self.system.canonical()
        );
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Two-state system driven by a rotation generator with `ℓ = ω_1`.
pub fn make_test1(a: f64) -> Result<Problem> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::invalid("parameter a must be nonzero"));
    }
    let generator = SignalGenerator {
        dynamics: GeneratorDynamics::Rotation { a, output_index: 0 },
    };
    let system = FullOrderSystem {
        dynamics: SystemDynamics::Isidori,
    };
    Problem::new("test1", generator, system, params(&[("a", a)]))
}

/// Closed-form invariant mapping of [`make_test1`], as monomial coefficients
/// `(exponents, coefficient)` for each of the two components.
pub fn test1_exact_terms(a: f64) -> [Vec<([u32; 2], f64)>; 2] {
    let a2 = a * a;
    let d1 = 1.0 + a2;
    let d2 = 1.0 + 5.0 * a2 + 4.0 * a2 * a2;
    [
        vec![([1, 0], 1.0 / d1), ([0, 1], -a / d1)],
        vec![
            ([2, 0], d1 / d2),
            ([1, 1], -3.0 * a / d2),
            ([0, 2], 3.0 * a2 / d2),
        ],
    ]
}

pub fn make_cart_pendulum(a1: f64, a2: f64, k: f64) -> Result<Problem> {
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::invalid("cart pendulum requires a1 > 0 and a2 > 0"));
    }
    if !(k < -1.0 / a2) {
        return Err(Error::invalid(format!(
            "cart pendulum requires k < -1/a2 = {}, got {k}",
            -1.0 / a2
        )));
    }
    let generator = SignalGenerator {
        dynamics: GeneratorDynamics::CartPendulum { a1, a2, k },
    };
    let system = FullOrderSystem {
        dynamics: SystemDynamics::CartPendulum { a1, a2 },
    };
    Problem::new(
        "cart-pendulum",
        generator,
        system,
        params(&[("a1", a1), ("a2", a2), ("k", k)]),
    )
}

/// RL ladder driven by the linear oscillator.
pub fn make_rl_linear(n: usize, kappa: f64, a: f64) -> Result<Problem> {
    Problem::new(
        "rl-linear",
        make_linear_oscillator(a)?,
        make_rl_ladder(n, kappa)?,
        params(&[("a", a), ("kappa", kappa), ("n", n as f64)]),
    )
}

/// RL ladder driven by the Van der Pol oscillator.
pub fn make_rl_vdp(n: usize, kappa: f64, mu: f64) -> Result<Problem> {
    Problem::new(
        "rl-vdp",
        make_van_der_pol(mu)?,
        make_rl_ladder(n, kappa)?,
        params(&[("kappa", kappa), ("mu", mu), ("n", n as f64)]),
    )
}

pub const BUILTIN_NAMES: [&str; 4] = ["test1", "cart-pendulum", "rl-linear", "rl-vdp"];

/// Construct a built-in problem from a name and a parameter map; missing
/// parameters take their defaults.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Problem> {
    let allowed: &[&str] = match name {
        "test1" => &["a"],
        "cart-pendulum" => &["a1", "a2", "k"],
        "rl-linear" => &["a", "kappa", "n"],
        "rl-vdp" => &["mu", "kappa", "n"],
        _ => {
            return Err(Error::config(
                "problem.name",
                format!("unknown built-in `{name}` (expected one of {BUILTIN_NAMES:?})"),
            ))
        }
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::config(
            format!("problem.params.{bad}"),
            format!("not a parameter of `{name}` (allowed: {allowed:?})"),
        ));
    }
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    let n = || -> Result<usize> {
        let v = get("n", 2.0);
        if v.fract() != 0.0 || v < 2.0 {
            return Err(Error::config("problem.params.n", "must be an integer >= 2"));
        }
        Ok(v as usize)
    };
    match name {
        "test1" => make_test1(get("a", DEFAULT_A)),
        "cart-pendulum" => make_cart_pendulum(get("a1", 2.0), get("a2", 3.0), get("k", -2.0 / 3.0)),
        "rl-linear" => make_rl_linear(n()?, get("kappa", DEFAULT_KAPPA), get("a", DEFAULT_A)),
        "rl-vdp" => make_rl_vdp(n()?, get("kappa", DEFAULT_KAPPA), get("mu", DEFAULT_MU)),
        _ => unreachable!(),
    }
}

#[derive(Clone, Debug)]
pub struct Linearization {
    /// `∂s/∂ω` at the origin, `d × d`.
    pub s: DMatrix<f64>,
    /// `∂ℓ/∂ω` at the origin, `m × d`.
    pub l: DMatrix<f64>,
    /// `∂f/∂x` at the origin, `n × n`.
    pub a_sys: DMatrix<f64>,
    /// `∂f/∂u` at the origin, `n × m`.
    pub b_sys: DMatrix<f64>,
}

pub fn linearize(problem: &Problem) -> Linearization {
    let d = problem.generator_dim();
    let n = problem.state_dim();
    let m = problem.system.input_dim();
    let w0 = vec![0.0; d];
    let x0 = vec![0.0; n];
    let u0 = vec![0.0; m];
    Linearization {
        s: problem.generator.s_jacobian(&w0),
        l: problem.generator.ell_jacobian(&w0),
        a_sys: problem.system.f_jacobian_x(&x0, &u0),
        b_sys: problem.system.f_jacobian_u(&x0, &u0),
    }
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

pub fn max_real_part(ev: &[Complex<f64>]) -> f64 {
    ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    /// Eigenvalues of the generator linearization are purely imaginary and simple.
    pub a1_necessary: bool,
    /// The system linearization is Hurwitz.
    pub a2: bool,
    pub generator_eigenvalues: Vec<Complex<f64>>,
    pub system_eigenvalues: Vec<Complex<f64>>,
    pub details: Vec<String>,
}

const IMAGINARY_TOL: f64 = 1e-9;

pub fn check_assumptions(problem: &Problem) -> AssumptionReport {
    let lin = linearize(problem);
    let gen_ev = eigenvalues(&lin.s);
    let sys_ev = eigenvalues(&lin.a_sys);
    let mut details = Vec::new();

    let imaginary = gen_ev.iter().all(|z| z.re.abs() <= IMAGINARY_TOL);
    let simple = gen_ev.iter().enumerate().all(|(i, a)| {
        gen_ev[i + 1..]
            .iter()
            .all(|b| (a - b).norm() > IMAGINARY_TOL)
    });
    if !imaginary {
        details.push(format!(
            "generator linearization has eigenvalue real part {:.6e}; neutral stability fails at the linear level",
            max_real_part(&gen_ev)
        ));
    }
    if !simple {
        details.push("generator linearization has repeated eigenvalues".to_string());
    }
    let a2 = max_real_part(&sys_ev) < 0.0;
    if !a2 {
        details.push(format!(
            "system linearization is not Hurwitz (max real part {:.6e})",
            max_real_part(&sys_ev)
        ));
    }
    if matches!(problem.generator.dynamics(), GeneratorDynamics::VanDerPol { .. }) && !imaginary {
        details.push(
            "note: the Van der Pol generator's persistent regime is its limit cycle, not its equilibrium; \
             the solver can still be run"
                .to_string(),
        );
    }
    AssumptionReport {
        a1_necessary: imaginary && simple,
        a2,
        generator_eigenvalues: gen_ev,
        system_eigenvalues: sys_ev,
        details,
    }
}
