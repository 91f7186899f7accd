//! TOML run configuration. One file describes one run.
//!
//! ```toml
//! output_dir = "out"
//!
//! [problem]
//! kind = "builtin"
//! name = "rl-linear"
//! params = { n = 2, kappa = 1.1, a = 2.0 }
//!
//! [domain]
//! lo = [-1.0, -1.0]
//! hi = [1.0, 1.0]
//!
//! [galerkin]
//! degree = 6
//!
//! [rom.gain]
//! kind = "oscillator"
//! c = 10.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::default_quadrature_order;
use crate::error::{Error, Result};
use crate::newton::{Backend, SolverOptions};
use crate::poly::PolyMap;
use crate::problem::{builtin, FullOrderSystem, Problem, SignalGenerator};
use crate::quadrature::BoxDomain;
use crate::residual::{default_subdomain, DEFAULT_NORM_ORDER};
use crate::rom::GainSpec;
use crate::sim::SimConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    /// `s`, `ℓ` in the generator state; `f` in `(x, u)`; `h` in `x`.
    Polynomial {
        #[serde(default = "default_poly_name")]
        name: String,
        s: PolyMap,
        ell: PolyMap,
        f: PolyMap,
        h: PolyMap,
    },
}

fn default_poly_name() -> String {
    "polynomial".into()
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemConfig::Builtin { name, params } => builtin(name, params),
            ProblemConfig::Polynomial { name, s, ell, f, h } => {
                let gen = SignalGenerator::polynomial(s.clone(), ell.clone())
                    .map_err(|e| Error::config("problem.s/ell", e.to_string()))?;
                let sys = FullOrderSystem::polynomial(f.clone(), h.clone(), ell.len())
                    .map_err(|e| Error::config("problem.f/h", e.to_string()))?;
                Problem::new(name, gen, sys, BTreeMap::new())
                    .map_err(|e| Error::config("problem", e.to_string()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalerkinConfig {
    pub degree: u32,
    /// Points per dimension; chosen from the problem when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_f_l1: f64,
    pub max_iter: usize,
    pub backend: Backend,
    pub rank_cutoff: f64,
    pub damping: f64,
    pub divergence_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            tol_f_l1: o.tol_f_l1,
            max_iter: o.max_iter,
            backend: o.backend,
            rank_cutoff: o.rank_cutoff,
            damping: o.damping,
            divergence_factor: o.divergence_factor,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol_f_l1: self.tol_f_l1,
            max_iter: self.max_iter,
            backend: self.backend,
            rank_cutoff: self.rank_cutoff,
            damping: self.damping,
            divergence_factor: self.divergence_factor,
            initial_guess: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdomain: Option<BoxDomain>,
    #[serde(default = "default_norm_order")]
    pub quadrature: usize,
}

fn default_norm_order() -> usize {
    DEFAULT_NORM_ORDER
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig {
            subdomain: None,
            quadrature: DEFAULT_NORM_ORDER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomConfig {
    #[serde(default = "default_gain")]
    pub gain: GainSpec,
    #[serde(default = "default_w0")]
    pub w0: Vec<f64>,
    #[serde(default = "default_r0")]
    pub r0: Vec<f64>,
    /// FOM initial state; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

fn default_gain() -> GainSpec {
    GainSpec::Designed {
        margin: crate::rom::DEFAULT_GAIN_MARGIN,
    }
}

fn default_w0() -> Vec<f64> {
    vec![0.1, 0.2]
}

fn default_r0() -> Vec<f64> {
    vec![0.0, 1.0]
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig {
            gain: default_gain(),
            w0: default_w0(),
            r0: default_r0(),
            x0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub domain: BoxDomain,
    pub galerkin: GalerkinConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub residual: ResidualConfig,
    #[serde(default)]
    pub rom: RomConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Check everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        let problem = self.problem.build()?;
        let d = problem.generator_dim();
        self.domain
            .validate()
            .map_err(|e| Error::config("domain", e.to_string()))?;
        if self.domain.dim() != d {
            return Err(Error::config(
                "domain",
                format!("dimension {} does not match generator dimension {d}", self.domain.dim()),
            ));
        }
        if self.galerkin.degree == 0 {
            return Err(Error::config("galerkin.degree", "must be at least 1"));
        }
        if let Some(q) = self.galerkin.quadrature {
            if q == 0 || q > crate::quadrature::MAX_POINTS_PER_DIM {
                return Err(Error::config("galerkin.quadrature", "must lie in 1..=256"));
            }
        }
        self.solver.options().validate()?;
        if let Some(w) = &self.residual.subdomain {
            w.validate().map_err(|e| Error::config("residual.subdomain", e.to_string()))?;
            if w.dim() != d {
                return Err(Error::config("residual.subdomain", "dimension mismatch"));
            }
        }
        if self.residual.quadrature == 0 || self.residual.quadrature > crate::quadrature::MAX_POINTS_PER_DIM {
            return Err(Error::config("residual.quadrature", "must lie in 1..=256"));
        }
        if self.rom.w0.len() != d || self.rom.r0.len() != d {
            return Err(Error::config("rom.w0/r0", format!("need {d} entries")));
        }
        if let Some(x0) = &self.rom.x0 {
            if x0.len() != problem.state_dim() {
                return Err(Error::config("rom.x0", format!("need {} entries", problem.state_dim())));
            }
        }
        self.sim.validate()?;
        Ok(())
    }

    pub fn quadrature_order(&self, problem: &Problem) -> usize {
        self.galerkin
            .quadrature
            .unwrap_or_else(|| default_quadrature_order(problem, self.galerkin.degree))
    }

    pub fn residual_subdomain(&self) -> BoxDomain {
        self.residual
            .subdomain
            .clone()
            .unwrap_or_else(|| default_subdomain(self.domain.dim()))
    }
}
