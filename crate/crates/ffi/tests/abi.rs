use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mm_galerkin_ffi::*;

fn last_error() -> String {
    let p = mmg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn problem(name: &str, params: &[(&str, f64)]) -> *mut MmgProblem {
    let name = CString::new(name).unwrap();
    let keys: Vec<CString> = params.iter().map(|(k, _)| CString::new(*k).unwrap()).collect();
    let key_ptrs: Vec<_> = keys.iter().map(|k| k.as_ptr()).collect();
    let vals: Vec<f64> = params.iter().map(|(_, v)| *v).collect();
    let mut out = ptr::null_mut();
    let s = unsafe {
        mmg_problem_builtin(name.as_ptr(), key_ptrs.as_ptr(), vals.as_ptr(), params.len(), &mut out)
    };
    assert_eq!(s, MmgStatus::Ok, "{}", last_error());
    out
}

fn solve(p: *const MmgProblem, half: f64, degree: u32, opts: Option<&MmgSolverOptions>) -> (MmgStatus, *mut MmgSolution) {
    let lo = [-half; 2];
    let hi = [half; 2];
    let mut out = ptr::null_mut();
    let o = opts.map_or(ptr::null(), |o| o as *const _);
    let s = unsafe { mmg_solve(p, lo.as_ptr(), hi.as_ptr(), 2, degree, 0, o, &mut out) };
    (s, out)
}

#[test]
fn test1_solve_residual_rom() {
    let p = problem("test1", &[("a", 2.0)]);
    assert_eq!(unsafe { mmg_problem_state_dim(p) }, 2);
    assert_eq!(unsafe { mmg_problem_generator_dim(p) }, 2);
    let (s, sol) = solve(p, 1.0, 4, None);
    assert_eq!(s, MmgStatus::Ok);
    assert!(unsafe { mmg_solution_converged(sol) });
    assert!(unsafe { mmg_solution_final_residual(sol) } < 1e-7);

    let n = unsafe { mmg_solution_coefficient_count(sol) };
    assert_eq!(n, 2 * 14);
    let mut c = vec![0.0; n];
    assert_eq!(unsafe { mmg_solution_coefficients(sol, c.as_mut_ptr(), n) }, MmgStatus::Ok);
    // π_1 = (ω_1 - a ω_2) / (1 + a²)
    assert!((c[0] - 0.2).abs() < 1e-9 && (c[1] + 0.4).abs() < 1e-9, "{c:?}");

    let mut short = vec![0.0; 3];
    assert_eq!(
        unsafe { mmg_solution_coefficients(sol, short.as_mut_ptr(), 3) },
        MmgStatus::BufferTooSmall
    );
    assert!(last_error().contains("needed"));

    let (lo, hi) = ([-0.7; 2], [0.7; 2]);
    let mut res = f64::NAN;
    assert_eq!(
        unsafe { mmg_solution_residual_norm(sol, lo.as_ptr(), hi.as_ptr(), 2, 20, &mut res) },
        MmgStatus::Ok
    );
    assert!(res < 1e-10, "{res}");

    let mut rom = ptr::null_mut();
    assert_eq!(unsafe { mmg_rom_build(sol, 0.5, &mut rom) }, MmgStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { mmg_rom_dim(rom) }, 2);
    assert!(unsafe { mmg_rom_max_real_part(rom) } < -0.4);
    let r = [0.2, -0.1];
    let u = [0.0];
    let mut dr = [0.0; 2];
    assert_eq!(unsafe { mmg_rom_dynamics(rom, r.as_ptr(), u.as_ptr(), dr.as_mut_ptr()) }, MmgStatus::Ok);
    assert!(dr.iter().all(|v| v.is_finite()));
    let mut y = [0.0; 1];
    assert_eq!(unsafe { mmg_rom_output(rom, r.as_ptr(), y.as_mut_ptr(), 1) }, MmgStatus::Ok);
    assert!((y[0] - 0.08).abs() < 1e-9, "{y:?}");

    unsafe {
        mmg_rom_free(rom);
        mmg_solution_free(sol);
        mmg_problem_free(p);
    }
}

#[test]
fn write_read_round_trip_and_fingerprint() {
    let p = problem("rl-linear", &[("n", 2.0)]);
    let (s, sol) = solve(p, 1.0, 2, None);
    assert_eq!(s, MmgStatus::Ok);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("c.txt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mmg_solution_write(sol, path.as_ptr()) }, MmgStatus::Ok);

    let mut back = ptr::null_mut();
    assert_eq!(unsafe { mmg_solution_read(p, path.as_ptr(), &mut back) }, MmgStatus::Ok);
    let n = unsafe { mmg_solution_coefficient_count(sol) };
    let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        mmg_solution_coefficients(sol, a.as_mut_ptr(), n);
        mmg_solution_coefficients(back, b.as_mut_ptr(), n);
    }
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));

    let other = problem("rl-linear", &[("n", 2.0), ("kappa", 1.5)]);
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { mmg_solution_read(other, path.as_ptr(), &mut bad) }, MmgStatus::Format);
    assert!(bad.is_null());

    let mut rom = ptr::null_mut();
    assert_eq!(unsafe { mmg_rom_build(back, 0.5, &mut rom) }, MmgStatus::Ok);
    let (w0, r0) = ([0.1, 0.2], [0.0, 1.0]);
    let mut rms = f64::NAN;
    assert_eq!(
        unsafe { mmg_rom_relative_rms(rom, w0.as_ptr(), r0.as_ptr(), 50.0, &mut rms) },
        MmgStatus::Ok,
        "{}",
        last_error()
    );
    assert!(rms < 0.05, "{rms}");

    unsafe {
        mmg_rom_free(rom);
        mmg_solution_free(back);
        mmg_solution_free(sol);
        mmg_problem_free(other);
        mmg_problem_free(p);
    }
}

#[test]
fn non_convergence_returns_handle() {
    let p = problem("test1", &[]);
    let mut opts = mmg_solver_options_default();
    opts.max_iter = 1;
    opts.tol_f_l1 = 1e-300;
    let (s, sol) = solve(p, 1.0, 3, Some(&opts));
    assert_eq!(s, MmgStatus::NotConverged);
    assert!(!sol.is_null());
    assert!(!unsafe { mmg_solution_converged(sol) });
    assert!(last_error().contains("did not converge"));
    let mut rom = ptr::null_mut();
    assert_eq!(unsafe { mmg_rom_build(sol, 0.5, &mut rom) }, MmgStatus::NotConverged);
    unsafe {
        mmg_solution_free(sol);
        mmg_problem_free(p);
    }
}

#[test]
fn argument_errors() {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { mmg_problem_builtin(ptr::null(), ptr::null(), ptr::null(), 0, &mut out) },
        MmgStatus::NullPointer
    );
    let bad = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { mmg_problem_builtin(bad.as_ptr(), ptr::null(), ptr::null(), 0, &mut out) },
        MmgStatus::Config
    );
    assert!(last_error().contains("nope"));
    assert!(out.is_null());

    let p = problem("test1", &[]);
    let (lo, hi) = ([1.0, -1.0], [-1.0, 1.0]);
    let mut sol = ptr::null_mut();
    let s = unsafe { mmg_solve(p, lo.as_ptr(), hi.as_ptr(), 2, 2, 0, ptr::null(), &mut sol) };
    assert_ne!(s, MmgStatus::Ok);
    assert!(sol.is_null());
    let (lo, hi) = ([-1.0], [1.0]);
    assert_eq!(
        unsafe { mmg_solve(p, lo.as_ptr(), hi.as_ptr(), 1, 2, 0, ptr::null(), &mut sol) },
        MmgStatus::DimensionMismatch
    );

    assert_eq!(unsafe { mmg_problem_state_dim(ptr::null()) }, 0);
    assert!(unsafe { mmg_solution_final_residual(ptr::null()) }.is_nan());
    unsafe {
        mmg_problem_free(ptr::null_mut());
        mmg_solution_free(ptr::null_mut());
        mmg_rom_free(ptr::null_mut());
        mmg_problem_free(p);
    }

    let toml = CString::new("[problem]\nkind = \"builtin\"\nname = \"test1\"\n").unwrap();
    assert_eq!(unsafe { mmg_problem_from_toml(toml.as_ptr(), &mut out) }, MmgStatus::Config);
}

#[test]
fn problem_from_toml() {
    let text = r#"
[problem]
kind = "builtin"
name = "rl-vdp"
params = { n = 3 }

[domain]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]

[galerkin]
degree = 2
"#;
    let c = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mmg_problem_from_toml(c.as_ptr(), &mut p) }, MmgStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { mmg_problem_state_dim(p) }, 3);
    unsafe { mmg_problem_free(p) };
}

#[test]
fn success_clears_last_error() {
    let mut out = ptr::null_mut();
    let bad = CString::new("nope").unwrap();
    unsafe { mmg_problem_builtin(bad.as_ptr(), ptr::null(), ptr::null(), 0, &mut out) };
    assert!(!mmg_last_error_message().is_null());
    let p = problem("test1", &[]);
    assert!(mmg_last_error_message().is_null());
    unsafe { mmg_problem_free(p) };
    assert!(!unsafe { CStr::from_ptr(mmg_version()) }.to_str().unwrap().is_empty());
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/mm_galerkin.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|r| r.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

/// Compile and run the C example against the static library when a C compiler
/// is available.
#[test]
fn c_example_links_and_runs() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = target.join("libmm_galerkin_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("examples/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("rom_dim 2"), "{stdout}");
}
