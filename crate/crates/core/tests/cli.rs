use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mm_galerkin::io::CoefficientFile;

const RL_LINEAR: &str = r#"
[problem]
kind = "builtin"
name = "rl-linear"
params = { n = 2 }

[domain]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]

[galerkin]
degree = 4

[rom.gain]
kind = "oscillator"
c = 10.0
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mm-galerkin"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn solve_residual_rom_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(dir, RL_LINEAR, &["solve"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let coeffs = CoefficientFile::read(&dir.join("out/coefficients.txt")).unwrap();
    assert_eq!((coeffs.n, coeffs.d, coeffs.degree), (2, 2, 4));
    let conv = fs::read_to_string(dir.join("out/convergence.csv")).unwrap();
    assert!(conv.starts_with("iteration,residual_l1\n"));
    let last: f64 = conv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last <= 1e-7);

    let out = run(dir, RL_LINEAR, &["residual", "--half-width", "0.7", "--q", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let res = fs::read_to_string(dir.join("out/residual.csv")).unwrap();
    let row = res.lines().nth(1).unwrap();
    assert!(row.starts_with("\"[-1,1]^2\",4,2,"), "{row}");
    let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(value > 0.0 && value < 1e-3, "{value}");
    assert_eq!(fs::read_to_string(dir.join("out/residual_components.csv")).unwrap().lines().count(), 3);

    let out = run(dir, RL_LINEAR, &["--quiet", "rom"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    for f in ["fom.csv", "rom.csv", "error.csv", "rms.csv"] {
        assert!(dir.join("out").join(f).exists(), "{f} missing");
    }
    let fom = fs::read_to_string(dir.join("out/fom.csv")).unwrap();
    let rom = fs::read_to_string(dir.join("out/rom.csv")).unwrap();
    assert!(fom.starts_with("t,y_1"));
    assert!(rom.starts_with("t,yr_1"));
    assert_eq!(fom.lines().count(), rom.lines().count());
}

#[test]
fn validate_reports_assumptions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), RL_LINEAR, &["validate"]);
    assert_eq!(out.status.code(), Some(0));
    let s = text(&out);
    assert!(s.contains("A1 (necessary, linear level): pass"), "{s}");
    assert!(s.contains("A2: pass"), "{s}");
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let bad = RL_LINEAR.replace("degree = 4", "degree = 4\ncolour = 1");
    let out = run(dir, &bad, &["solve"]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));

    let bad = RL_LINEAR.replace("n = 2", "n = 1");
    let out = run(dir, &bad, &["solve"]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
    assert!(text(&out).contains("problem.params.n"));

    let out = Command::new(env!("CARGO_BIN_EXE_mm-galerkin")).arg("solve").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = run(dir, RL_LINEAR, &["reproduce", "T3-res-n1000"]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
    let out = run(dir, RL_LINEAR, &["reproduce", "T9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fingerprint_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(run(dir, RL_LINEAR, &["solve"]).status.code(), Some(0));
    let other = RL_LINEAR.replace("params = { n = 2 }", "params = { n = 2, kappa = 1.5 }");
    let out = run(dir, &other, &["residual"]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
    assert!(text(&out).contains("fingerprint"));
}

#[test]
fn non_convergence_exits_1_and_keeps_history() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = format!("{RL_LINEAR}\n[solver]\nmax_iter = 1\ntol_f_l1 = 1e-300\n");
    let out = run(dir, &cfg, &["solve"]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
    assert!(text(&out).contains("did not converge"));
    let conv = fs::read_to_string(dir.join("out/convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 3);
    assert!(!dir.join("out/coefficients.txt").exists());
}

#[test]
fn reproduce_writes_table_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(dir, RL_LINEAR, &["--quiet", "reproduce", "T1", "T3-res-n2"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    for t in ["T1", "T3-res-n2"] {
        let csv = fs::read_to_string(dir.join("out").join(format!("{t}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("table,domain,M,n,value,reference,status,detail"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), if t == "T1" { 3 } else { 9 });
        assert!(rows.iter().all(|r| r.contains(",pass,")), "{csv}");
    }
}
