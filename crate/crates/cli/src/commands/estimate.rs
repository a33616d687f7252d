use std::fs;

use covlab::experiments::{
    emit_csv, run_trial_with_matrices, ExperimentConfig, ExperimentKernel, NuSpec,
};
use covlab::io::save_matrix;
use log::info;

use super::{check_lambda, kernel_label, resolve_seed, template, DEFAULT_SEED};
use crate::error::{CliError, CliResult};
use crate::{EstimateArgs, EstimatorChoice};

pub fn estimate(a: &EstimateArgs) -> CliResult<()> {
    let k = &a.kernel;
    check_lambda(k.lambda)?;
    let Some(tpl) = template(k)? else {
        return Err(CliError::usage("estimate does not support the pwc kernel"));
    };
    let mut kernel = ExperimentKernel::new(tpl);
    if let Some(nu) = &k.nu {
        kernel.nu = NuSpec::parse(nu)?;
    }
    let defaults = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        kernels: vec![kernel.clone()],
        lambda_grid: vec![k.lambda],
        points_per_axis: k.points_per_axis,
        dim: k.dim,
        trials: a.trial + 1,
        n_fixed: a.n_samples,
        c0: a.c0.unwrap_or(defaults.c0),
        base_seed: resolve_seed(k.seed, DEFAULT_SEED)?,
        threads: Some(1),
        ..defaults
    };
    info!(
        "resolved: {} N={} estimator={:?} trial={}\n{cfg}",
        kernel_label(k),
        cfg.n_samples(k.lambda),
        a.estimator,
        a.trial
    );
    let (record, matrices) = run_trial_with_matrices(&kernel, k.lambda, &cfg, a.trial)?;

    let all = a.estimator == EstimatorChoice::All;
    let wants = |e: EstimatorChoice| all || a.estimator == e;
    println!("kernel={}", record.kernel);
    println!("lambda={}", record.lambda);
    println!("N={}", record.n_samples);
    println!("trial={}", record.trial);
    println!("seed={}", record.seed);
    if wants(EstimatorChoice::Sample) {
        println!("err_sample={}", record.err_sample);
    }
    if wants(EstimatorChoice::Taper) {
        println!("kappa={}", record.kappa);
        println!("err_taper={}", record.err_taper);
    }
    if wants(EstimatorChoice::Threshold) {
        println!("rho_hat={}", record.rho_hat);
        println!("err_thresh={}", record.err_thresh);
    }
    if let Some(path) = &a.csv {
        emit_csv(std::slice::from_ref(&record), path)?;
    }
    if let Some(dir) = &a.dump_matrices {
        fs::create_dir_all(dir)?;
        let mut dumps = vec![("truth", &matrices.truth)];
        if wants(EstimatorChoice::Sample) {
            dumps.push(("sample", &matrices.sample));
        }
        if wants(EstimatorChoice::Taper) {
            dumps.push(("taper", &matrices.taper));
        }
        if wants(EstimatorChoice::Threshold) {
            dumps.push(("threshold", &matrices.threshold));
        }
        for (name, m) in dumps {
            let path = dir.join(format!("{name}.covm"));
            save_matrix(&path, m.entries())?;
            info!("wrote {}", path.display());
        }
    }
    Ok(())
}
