//! Relative-error sweeps over kernels and lengthscales, their summaries, CSV files and SVG figures.

mod config;
mod csv_io;
mod summary;
mod svg;

pub use config::{log_grid, ExperimentConfig, ExperimentKernel, KappaRule, KernelTemplate, NuSpec};
pub use csv_io::{
    emit_csv, read_summaries, read_trials, write_csv, CsvRow, SUMMARY_HEADER, TRIAL_HEADER,
};
pub use summary::{summarize, t_quantile_975, SummaryRow};
pub use svg::{emit_svg, render_svg, SvgAxes};

use log::info;
use nalgebra::DMatrix;

use crate::diagnostics::{m_star, rel_error_with_norm, spectral_norm, NuSequence, NORM_TOL};
use crate::error::{CovError, Result};
use crate::estimators::{
    adaptive_threshold, kappa_scale, sample_cov, taper_estimate, threshold_estimate,
    EstimatorConfig, KappaScaleMode,
};
use crate::grid_kernel::{build_grid, permutation, CovMatrix, Grid};
use crate::rng::mix_seed;
use crate::sampling::{cholesky_psd, draw_paths, CholFactor};

const PERMUTATION_LABEL: u64 = 0x5045_524d;

/// One estimation trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub kernel: String,
    pub lambda: f64,
    pub dim: usize,
    pub points_per_axis: usize,
    pub n_samples: usize,
    pub trial: usize,
    pub seed: u64,
    pub kappa: f64,
    pub rho_hat: f64,
    pub err_sample: f64,
    pub err_taper: f64,
    pub err_thresh: f64,
    /// Effective dimension of the true matrix; not stored in the trial CSV.
    pub r_eff: Option<f64>,
}

/// Matrices of one trial, in the (possibly permuted) trial ordering.
#[derive(Debug, Clone)]
pub struct TrialMatrices {
    pub truth: CovMatrix,
    pub sample: CovMatrix,
    pub taper: CovMatrix,
    pub threshold: CovMatrix,
}

/// A trial that could not be completed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub kernel: String,
    pub lambda: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

impl SweepOutcome {
    /// Plain-text list of failed trials, empty when every trial succeeded.
    pub fn trailer(&self) -> String {
        self.failures
            .iter()
            .map(|f| {
                format!(
                    "failed kernel={} lambda={} trial={}: {}\n",
                    f.kernel, f.lambda, f.trial, f.message
                )
            })
            .collect()
    }
}

fn name_label(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of trial `trial` for `kernel` at lengthscale `lambda`.
pub fn trial_seed(
    cfg: &ExperimentConfig,
    kernel: &ExperimentKernel,
    lambda: f64,
    trial: usize,
) -> u64 {
    mix_seed(
        cfg.base_seed,
        &[
            name_label(kernel.template.name()),
            lambda.to_bits(),
            trial as u64,
        ],
    )
}

/// Everything shared by the trials of one (kernel, lambda) cell.
struct Group<'a> {
    cfg: &'a ExperimentConfig,
    kernel: &'a ExperimentKernel,
    lambda: f64,
    grid: Grid,
    truth: CovMatrix,
    factor: CholFactor,
    norm: f64,
    r_eff: f64,
    n_samples: usize,
    nu: NuSequence,
    fixed_permutation: Option<(Vec<usize>, CovMatrix)>,
}

fn permute(c: &CovMatrix, perm: &[usize]) -> CovMatrix {
    let n = c.n();
    let e = c.entries();
    CovMatrix::new(
        DMatrix::from_fn(n, n, |i, j| e[(perm[i], perm[j])]),
        c.grid_h(),
    )
    .expect("permuted matrix stays symmetric")
}

impl<'a> Group<'a> {
    fn new(cfg: &'a ExperimentConfig, kernel: &'a ExperimentKernel, lambda: f64) -> Result<Self> {
        let context = |e: CovError| {
            CovError::Numeric(format!(
                "kernel={} lambda={lambda} L={} d={}: {e}",
                kernel.template.name(),
                cfg.points_per_axis,
                cfg.dim
            ))
        };
        let grid = build_grid(cfg.points_per_axis, cfg.dim)?;
        let truth = kernel.template.base(lambda)?.discretize(&grid)?;
        let factor = cholesky_psd(truth.entries(), cfg.jitter_budget).map_err(context)?;
        let norm = spectral_norm(truth.entries(), NORM_TOL).map_err(context)?;
        let r_eff = truth.entries().trace() / norm;
        let nu = NuSequence::new(kernel.nu.resolve(&kernel.template, cfg.dim))?;
        let fixed_permutation =
            if kernel.template == KernelTemplate::Shuffled && !cfg.permute_per_trial {
                let seed = mix_seed(
                    cfg.base_seed,
                    &[
                        name_label(kernel.template.name()),
                        lambda.to_bits(),
                        PERMUTATION_LABEL,
                    ],
                );
                let perm = permutation(truth.n(), seed);
                let permuted = permute(&truth, &perm);
                Some((perm, permuted))
            } else {
                None
            };
        Ok(Self {
            cfg,
            kernel,
            lambda,
            grid,
            truth,
            factor,
            norm,
            r_eff,
            n_samples: cfg.n_samples(lambda),
            nu,
            fixed_permutation,
        })
    }

    fn run(&self, trial: usize) -> Result<TrialRecord> {
        self.run_detailed(trial, false).map(|(r, _)| r)
    }

    fn run_detailed(
        &self,
        trial: usize,
        keep: bool,
    ) -> Result<(TrialRecord, Option<TrialMatrices>)> {
        let cfg = self.cfg;
        let seed = trial_seed(cfg, self.kernel, self.lambda, trial);
        let mut paths = draw_paths(&self.factor, self.n_samples, seed)?;
        let mut owned = None;
        let truth = if self.kernel.template == KernelTemplate::Shuffled {
            let (perm, permuted) = match &self.fixed_permutation {
                Some((p, c)) => (p.clone(), c),
                None => {
                    let p = permutation(self.truth.n(), mix_seed(seed, &[PERMUTATION_LABEL]));
                    let c = owned.insert(permute(&self.truth, &p));
                    (p, &*c)
                }
            };
            paths = paths.permuted(&perm)?;
            permuted
        } else {
            &self.truth
        };
        let chat = sample_cov(&paths, self.grid.cell_weight())?;
        let scale = match cfg.kappa_rule {
            KappaRule::Lengthscale => self.lambda,
            KappaRule::PluginEffectiveDim => {
                kappa_scale(KappaScaleMode::PluginEffectiveDim, &chat, cfg.dim)?
            }
        };
        let kappa = m_star(&self.nu, self.n_samples, cfg.dim)? as f64 * scale;
        let tapered = taper_estimate(&chat, kappa, &self.grid)?;
        let est_cfg = EstimatorConfig {
            c0: cfg.c0,
            k_inf_mode: cfg.k_inf,
            kappa_scale_mode: KappaScaleMode::Lengthscale(scale),
        };
        let rho_hat = adaptive_threshold(&paths, &est_cfg)?;
        let thresholded = threshold_estimate(&chat, rho_hat)?;
        let record = TrialRecord {
            kernel: self.kernel.template.name().to_string(),
            lambda: self.lambda,
            dim: cfg.dim,
            points_per_axis: cfg.points_per_axis,
            n_samples: self.n_samples,
            trial,
            seed,
            kappa,
            rho_hat,
            err_sample: rel_error_with_norm(&chat, truth, self.norm)?,
            err_taper: rel_error_with_norm(&tapered, truth, self.norm)?,
            err_thresh: rel_error_with_norm(&thresholded, truth, self.norm)?,
            r_eff: Some(self.r_eff),
        };
        info!(
            "trial kernel={} lambda={} N={} trial={} err_sample={} err_taper={} err_thresh={}",
            record.kernel,
            record.lambda,
            record.n_samples,
            trial,
            record.err_sample,
            record.err_taper,
            record.err_thresh
        );
        let matrices = keep.then(|| TrialMatrices {
            truth: truth.clone(),
            sample: chat,
            taper: tapered,
            threshold: thresholded,
        });
        Ok((record, matrices))
    }
}

/// Runs one trial from scratch.
pub fn run_trial(
    kernel: &ExperimentKernel,
    lambda: f64,
    cfg: &ExperimentConfig,
    trial: usize,
) -> Result<TrialRecord> {
    cfg.validate()?;
    Group::new(cfg, kernel, lambda)?.run(trial)
}

/// Runs one trial and also returns the true and estimated matrices.
pub fn run_trial_with_matrices(
    kernel: &ExperimentKernel,
    lambda: f64,
    cfg: &ExperimentConfig,
    trial: usize,
) -> Result<(TrialRecord, TrialMatrices)> {
    cfg.validate()?;
    let (record, matrices) = Group::new(cfg, kernel, lambda)?.run_detailed(trial, true)?;
    Ok((record, matrices.expect("matrices requested")))
}

/// All trials over `kernels x lambda_grid x trials`, in that canonical order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CovError::InvalidParameter(format!("thread pool: {e}")))?;
    let mut outcome = SweepOutcome::default();
    for kernel in &cfg.kernels {
        for &lambda in &cfg.lambda_grid {
            let fail = |trial: usize, e: &CovError| TrialFailure {
                kernel: kernel.template.name().to_string(),
                lambda,
                trial,
                message: e.to_string(),
            };
            let group = match pool.install(|| Group::new(cfg, kernel, lambda)) {
                Ok(g) => g,
                Err(e) => {
                    outcome
                        .failures
                        .extend((0..cfg.trials).map(|t| fail(t, &e)));
                    continue;
                }
            };
            let results: Vec<Result<TrialRecord>> = pool.install(|| {
                use rayon::prelude::*;
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| group.run(t))
                    .collect()
            });
            for (t, r) in results.into_iter().enumerate() {
                match r {
                    Ok(rec) => outcome.records.push(rec),
                    Err(e) => outcome.failures.push(fail(t, &e)),
                }
            }
        }
    }
    Ok(outcome)
}
