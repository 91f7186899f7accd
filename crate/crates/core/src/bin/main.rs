use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mm_galerkin::bench::{reproduce, write_cells_csv, Scale, Status, TableId};
use mm_galerkin::config::RunConfig;
use mm_galerkin::io::{write_csv, CoefficientFile};
use mm_galerkin::problem::check_assumptions;
use mm_galerkin::rom::build_rom_from_coefficients;
use mm_galerkin::{
    assemble_operators, residual_norm, simulate_fom, simulate_rom, solve_invariance, steady_state_rms, Basis,
    Error, QuadratureRule, Result,
};

#[derive(Parser)]
#[command(name = "mm-galerkin", version, about = "Galerkin solver for moment-matching invariance equations")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel assembly and table cells.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed recorded with the run. The solver itself is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the invariance equation and write the coefficient file.
    Solve,
    /// Residual norms of a coefficient file over the configured subdomain.
    Residual {
        #[arg(long)]
        coefficients: Option<PathBuf>,
        /// Half-width of a symmetric subdomain, overriding the config.
        #[arg(long)]
        half_width: Option<f64>,
        /// Quadrature points per dimension, overriding the config.
        #[arg(long)]
        q: Option<usize>,
    },
    /// Build the reduced model, simulate it against the full model and report the RMS error.
    Rom {
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Reproduce published tables.
    Reproduce {
        /// Table ids, e.g. T1 T3-res-n2 T4-rom-n2.
        #[arg(required = true)]
        tables: Vec<String>,
        #[arg(long, default_value = "desk")]
        scale: String,
    },
    /// Report the linear-level assumption checks for the configured problem.
    Validate,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Format(_) | Error::DimensionMismatch { .. } => {
            EXIT_CONFIG
        }
        _ => EXIT_FAILURE,
    }
}

struct Ctx {
    out: Option<PathBuf>,
    config: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn load(&self) -> Result<RunConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::config("--config", "this command needs a configuration file"))?;
        RunConfig::load(path)
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.map(|c| c.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn coefficients_path(arg: Option<PathBuf>, dir: &Path) -> PathBuf {
    arg.unwrap_or_else(|| dir.join("coefficients.txt"))
}

fn cmd_solve(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.load()?;
    let dir = ctx.out_dir(Some(&cfg))?;
    let problem = cfg.problem.build()?;
    let basis = Basis::new(cfg.domain.dim(), cfg.galerkin.degree)?;
    let q = cfg.quadrature_order(&problem);
    let rule = QuadratureRule::tensor(&cfg.domain, q)?;
    let ops = assemble_operators(&problem, &basis, &cfg.domain, &rule)?;
    ctx.say(format!(
        "solving {} on {} with M = {}, N = {}, n = {}, q = {q}",
        problem.name,
        cfg.domain,
        cfg.galerkin.degree,
        basis.len(),
        problem.state_dim()
    ));
    let result = solve_invariance(&problem, &ops, &cfg.solver.options());
    let history = match &result {
        Ok(s) => s.residual_history.clone(),
        Err(Error::NotConverged { solution, .. }) => solution.residual_history.clone(),
        Err(_) => Vec::new(),
    };
    let rows: Vec<Vec<f64>> = history.iter().enumerate().map(|(k, r)| vec![k as f64, *r]).collect();
    write_csv(&dir.join("convergence.csv"), &["iteration", "residual_l1"], &rows)?;
    let sol = result?;
    let file = CoefficientFile::new(&cfg.domain, cfg.galerkin.degree, &problem.fingerprint(), &sol.c)?;
    file.write(&dir.join("coefficients.txt"))?;
    let w = cfg.residual_subdomain();
    let report = residual_norm(&problem, &basis, &sol.c, &w, cfg.residual.quadrature)?;
    ctx.say(format!(
        "converged in {} iterations ({}, {:.3} s); |F|_1 = {:.3e}; weighted residual on {w} = {:.4e}",
        sol.iterations,
        sol.backend_used,
        sol.elapsed_seconds,
        sol.final_residual(),
        report.weighted_norm
    ));
    ctx.say(format!("wrote {}", dir.join("coefficients.txt").display()));
    Ok(())
}

fn load_checked(cfg: &RunConfig, path: &Path) -> Result<(mm_galerkin::Problem, CoefficientFile)> {
    let problem = cfg.problem.build()?;
    let file = CoefficientFile::read(path)?;
    if file.fingerprint != problem.fingerprint() {
        return Err(Error::config(
            "coefficients",
            format!(
                "file fingerprint {} does not match the configured problem ({})",
                file.fingerprint,
                problem.fingerprint()
            ),
        ));
    }
    if file.n != problem.state_dim() || file.d != problem.generator_dim() {
        return Err(Error::config("coefficients", "file dimensions do not match the problem"));
    }
    Ok((problem, file))
}

fn cmd_residual(ctx: &Ctx, coefficients: Option<PathBuf>, half_width: Option<f64>, q: Option<usize>) -> Result<()> {
    let cfg = ctx.load()?;
    let dir = ctx.out_dir(Some(&cfg))?;
    let (problem, file) = load_checked(&cfg, &coefficients_path(coefficients, &dir))?;
    let basis = Basis::new(file.d, file.degree)?;
    let w = match half_width {
        Some(h) => mm_galerkin::BoxDomain::symmetric(file.d, h)?,
        None => cfg.residual_subdomain(),
    };
    let q = q.unwrap_or(cfg.residual.quadrature);
    let report = residual_norm(&problem, &basis, &file.coefficients, &w, q)?;
    let mut text = String::from("domain,M,n,weighted_norm\n");
    text.push_str(&report.csv_row(&file.domain, file.degree));
    text.push('\n');
    fs::write(dir.join("residual.csv"), &text)?;
    let per: Vec<Vec<f64>> = report
        .per_component_norms
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1) as f64, *v])
        .collect();
    write_csv(&dir.join("residual_components.csv"), &["component", "norm"], &per)?;
    ctx.say(format!("weighted residual on {w} (q = {q}): {:.6e}", report.weighted_norm));
    Ok(())
}

fn cmd_rom(ctx: &Ctx, coefficients: Option<PathBuf>) -> Result<()> {
    let cfg = ctx.load()?;
    let dir = ctx.out_dir(Some(&cfg))?;
    let (problem, file) = load_checked(&cfg, &coefficients_path(coefficients, &dir))?;
    let basis = Basis::new(file.d, file.degree)?;
    let rom = build_rom_from_coefficients(&problem, &basis, &file.domain, &file.coefficients, &cfg.rom.gain)?;
    ctx.say(format!(
        "gain {}: linearization eigenvalue max real part {:.4e}",
        rom.gain().canonical(),
        rom.stability().max_real_part
    ));
    let x0 = cfg.rom.x0.clone().unwrap_or_else(|| vec![0.0; problem.state_dim()]);
    let (y, y_r) = rayon::join(
        || simulate_fom(&problem, &cfg.rom.w0, &x0, &cfg.sim),
        || simulate_rom(&rom, &cfg.rom.w0, &cfg.rom.r0, &cfg.sim),
    );
    let (y, y_r) = (y?, y_r?);
    y.write_csv(fs::File::create(dir.join("fom.csv"))?, "y")?;
    y_r.write_csv(fs::File::create(dir.join("rom.csv"))?, "yr")?;
    let err_rows: Vec<Vec<f64>> = y
        .times
        .iter()
        .zip(&y.outputs)
        .map(|(t, yo)| vec![*t, (yo[0] - y_r.output_at(*t, 0)).abs()])
        .collect();
    write_csv(&dir.join("error.csv"), &["t", "abs_error_1"], &err_rows)?;
    let rms = steady_state_rms(&y, &y_r, &cfg.sim)?;
    write_csv(
        &dir.join("rms.csv"),
        &["rms_error", "amplitude", "relative_rms"],
        &[vec![rms.rms_error, rms.amplitude, rms.relative_rms]],
    )?;
    ctx.say(format!(
        "steady-state RMS {:.4e}, amplitude {:.4e}, relative {:.4e}",
        rms.rms_error, rms.amplitude, rms.relative_rms
    ));
    Ok(())
}

fn cmd_reproduce(ctx: &Ctx, tables: &[String], scale: &str) -> Result<bool> {
    let scale: Scale = scale.parse()?;
    let ids: Vec<TableId> = tables.iter().map(|t| t.parse()).collect::<Result<_>>()?;
    let dir = ctx.out_dir(None)?;
    let mut all_ok = true;
    for id in ids {
        let cells = reproduce(id, scale)?;
        let path = dir.join(format!("{id}.csv"));
        write_cells_csv(fs::File::create(&path)?, &cells)?;
        for c in &cells {
            ctx.say(format!(
                "{id} {} M={} n={}: {} (ref {}) {} {}",
                c.domain,
                c.degree,
                c.n,
                c.value.map_or("-".into(), |v| format!("{v:.4e}")),
                c.reference.map_or("-".into(), |v| format!("{v:.4e}")),
                c.status,
                c.detail
            ));
        }
        all_ok &= cells.iter().all(|c| c.status != Status::Fail);
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(all_ok)
}

fn cmd_validate(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.load()?;
    let problem = cfg.problem.build()?;
    let rep = check_assumptions(&problem);
    let fmt = |ev: &[nalgebra::Complex<f64>]| {
        ev.iter()
            .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let verdict = |b: bool| if b { "pass" } else { "fail" };
    // validation output is the point of this command, so it ignores --quiet
    println!("problem {} (fingerprint {})", problem.name, problem.fingerprint());
    println!("generator eigenvalues: {}", fmt(&rep.generator_eigenvalues));
    println!("system eigenvalues: {}", fmt(&rep.system_eigenvalues));
    println!("A1 (necessary, linear level): {}", verdict(rep.a1_necessary));
    println!("A2: {}", verdict(rep.a2));
    for d in &rep.details {
        println!("  {d}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "warn"
    }))
    .init();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    log::debug!("seed {}", cli.seed);
    let ctx = Ctx {
        out: cli.out,
        config: cli.config,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Solve => cmd_solve(&ctx).map(|_| true),
        Command::Residual {
            coefficients,
            half_width,
            q,
        } => cmd_residual(&ctx, coefficients, half_width, q).map(|_| true),
        Command::Rom { coefficients } => cmd_rom(&ctx, coefficients).map(|_| true),
        Command::Reproduce { tables, scale } => cmd_reproduce(&ctx, &tables, &scale),
        Command::Validate => cmd_validate(&ctx).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NotConverged { solution, .. } = &e {
                eprintln!(
                    "  {} iterations, last |F|_1 = {:.3e}",
                    solution.iterations,
                    solution.final_residual()
                );
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
