use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use covlab::grid_kernel::{build_grid, KernelSpec};
use covlab::io::{read_matrix, write_matrix};

fn covlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covlab"))
        .args(args)
        .env_remove("COVLAB_SEED")
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("sweep.cfg");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "kernel.list = se, shuffled\nsweep.lambda_grid = 10^-1.5, 0.2\nsweep.trials = 3\nsweep.L = 80\n";

#[test]
fn diagnose_se_block() {
    let o = covlab(&[
        "diagnose", "--kernel", "se", "--lambda", "0.01", "--L", "1250", "--q", "0.5", "--N", "35",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let r_eff: f64 = value(&out, "r_eff").unwrap().parse().unwrap();
    assert!((r_eff - 39.9).abs() < 0.05 * 39.9);
    assert!(value(&out, "m_star").is_some());
    let eps: f64 = value(&out, "eps_star").unwrap().parse().unwrap();
    assert!(eps > 0.0 && eps <= 1.0);
    let g1: f64 = value(&out, "gamma1.q0.5").unwrap().parse().unwrap();
    assert!(g1 >= 1.0);
    assert!(stderr(&o).contains("resolved:"));
}

#[test]
fn diagnose_usage_errors() {
    assert_eq!(
        covlab(&["diagnose", "--kernel", "se", "--L", "50"])
            .status
            .code(),
        Some(2)
    );
    let o = covlab(&[
        "diagnose", "--kernel", "se", "--lambda", "0.1", "--L", "50", "--q", "1.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = covlab(&[
        "diagnose", "--kernel", "pwc", "--lambda", "0.1", "--L", "50", "--cells", "7",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn diagnose_gamma2_and_pwc() {
    let o = covlab(&[
        "diagnose",
        "--kernel",
        "pwc",
        "--lambda",
        "0.2",
        "--L",
        "100",
        "--cells",
        "10",
        "--mc-samples",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(value(&out, "gamma2").is_some() && value(&out, "gamma2_se").is_some());
    let r_eff: f64 = value(&out, "r_eff").unwrap().parse().unwrap();
    assert!(r_eff <= 10.0 + 1e-9);
}

#[test]
fn minimax_f2_desk_passes() {
    let o = covlab(&[
        "minimax-check",
        "--class",
        "f2",
        "--r",
        "256",
        "--N",
        "200",
        "--tau",
        "0.003",
        "--samples",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("f2.lambda_min pass=50/50"));
    assert!(out.trim_end().ends_with("all_pass=true"));
}

#[test]
fn minimax_precondition_exit_two() {
    let o = covlab(&[
        "minimax-check",
        "--class",
        "f2",
        "--r",
        "4",
        "--N",
        "1000000",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("r > m*^d"));
    let o = covlab(&["minimax-check", "--class", "sparse", "--r", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn minimax_sparse_prints_capacity_bound() {
    let o = covlab(&[
        "minimax-check",
        "--class",
        "sparse",
        "--samples",
        "20",
        "--pairs",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out
        .lines()
        .find(|l| l.starts_with("sparse.gamma2_monte_carlo "))
        .unwrap();
    let bound = (2.0 * 231f64.ln()).sqrt();
    assert!(line.contains(&format!("bound={bound}")), "{line}");
}

#[test]
fn estimate_prints_errors_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("m");
    let csv = dir.path().join("trial.csv");
    let o = covlab(&[
        "estimate",
        "--kernel",
        "se",
        "--lambda",
        "0.05",
        "--L",
        "60",
        "--N",
        "12",
        "--estimator",
        "all",
        "--dump-matrices",
        dump.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for key in ["err_sample", "err_taper", "err_thresh"] {
        assert!(value(&out, key).is_some(), "{key} missing");
    }
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "kernel,lambda,d,L,N,trial,seed,kappa,rho_hat,err_sample,err_taper,err_thresh\n"
    ));

    let bytes = fs::read(dump.join("truth.covm")).unwrap();
    assert_eq!(&bytes[..4], b"COVM");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 60);
    assert_eq!(&bytes[8..16], &[0u8; 8]);
    assert_eq!(bytes.len(), 16 + 60 * 60 * 8);
    let truth = read_matrix(bytes.as_slice()).unwrap();
    let grid = build_grid(60, 1).unwrap();
    let expected = KernelSpec::squared_exponential(0.05)
        .unwrap()
        .discretize(&grid)
        .unwrap();
    assert_eq!(&truth, expected.entries());
    let mut again = Vec::new();
    write_matrix(&mut again, &truth).unwrap();
    assert_eq!(again, bytes);
    for name in ["sample", "taper", "threshold"] {
        assert!(dump.join(format!("{name}.covm")).exists());
    }
}

#[test]
fn estimate_single_estimator_and_bad_n() {
    let o = covlab(&[
        "estimate",
        "--kernel",
        "matern",
        "--lambda",
        "0.1",
        "--L",
        "40",
        "--N",
        "8",
        "--estimator",
        "taper",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(value(&out, "err_taper").is_some());
    assert!(value(&out, "err_sample").is_none() && value(&out, "err_thresh").is_none());
    let o = covlab(&[
        "estimate", "--kernel", "se", "--lambda", "0.1", "--L", "40", "--N", "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_thread_count_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    let a = covlab(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        one.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    let b = covlab(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        four.to_str().unwrap(),
        "--threads",
        "4",
        "--plot",
    ]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    for file in ["trials.csv", "summary.csv"] {
        assert_eq!(
            fs::read(one.join(file)).unwrap(),
            fs::read(four.join(file)).unwrap()
        );
    }
    assert_eq!(
        fs::read_to_string(one.join("trials.csv"))
            .unwrap()
            .lines()
            .count(),
        13
    );
    let svg = fs::read_to_string(four.join("se.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(stderr(&a).contains("sweep.lambda_grid="));
}

#[test]
fn sweep_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let missing = dir.path().join("missing.cfg");
    let o = covlab(&[
        "sweep",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), SMALL);
    let o = covlab(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--set",
        "sweep.trails=2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep.trails"));
}

#[test]
fn sweep_partial_failure_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "kernel.list = se\nsweep.lambda_grid = 0.05, 0.5\nsweep.trials = 2\nsweep.L = 200\nsampling.jitter_budget = 0\n",
    );
    let out = dir.path().join("o");
    let o = covlab(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("failed kernel=se lambda=0.5 trial=0"));
    assert!(out.join("trials.csv").exists());
}

#[test]
fn seed_environment_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let plain = dir.path().join("plain");
    let env = dir.path().join("env");
    covlab(&["sweep", "--config", &cfg, "--out", plain.to_str().unwrap()]);
    let o = Command::new(env!("CARGO_BIN_EXE_covlab"))
        .args([
            "sweep",
            "--config",
            &cfg,
            "--out",
            env.to_str().unwrap(),
            "--set",
            "sweep.seed=3",
        ])
        .env("COVLAB_SEED", "777")
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("sweep.seed=777"));
    assert_ne!(
        fs::read(plain.join("trials.csv")).unwrap(),
        fs::read(env.join("trials.csv")).unwrap()
    );
    let bad = Command::new(env!("CARGO_BIN_EXE_covlab"))
        .args(["sweep", "--config", &cfg, "--out", env.to_str().unwrap()])
        .env("COVLAB_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn plot_from_summary_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "kernel.list = se\nsweep.lambda_grid = 0.05, 0.2\nsweep.trials = 2\nsweep.L = 60\n",
    );
    let out = dir.path().join("o");
    assert_eq!(
        covlab(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    for input in ["summary.csv", "trials.csv"] {
        let figs = dir.path().join(format!("fig-{input}"));
        let o = covlab(&[
            "plot",
            "--input",
            out.join(input).to_str().unwrap(),
            "--out",
            figs.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(figs.join("se.svg").exists());
    }
    let bogus = dir.path().join("bogus.csv");
    fs::write(&bogus, "a,b\n1,2\n").unwrap();
    let o = covlab(&[
        "plot",
        "--input",
        bogus.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
