use covlab::diagnostics::{self, DiagnoseOptions, NuSequence, NuSource, RadialProfile};
use covlab::experiments::{ExperimentConfig, NuSpec};
use covlab::grid_kernel::build_grid;
use log::info;

use super::{kernel_label, kernel_spec, resolve_seed, template, DEFAULT_SEED};
use crate::error::{CliError, CliResult};
use crate::{DiagnoseArgs, KernelArgs, KernelName};

/// Normalized closed forms in one dimension, the integrated profile otherwise.
fn default_nu(args: &KernelArgs) -> CliResult<NuSource> {
    if args.dim > 1 {
        let profile = match template(args)? {
            Some(t) => t.radial_profile(),
            None => RadialProfile::SquaredExponential,
        };
        return Ok(NuSource::Numeric {
            profile,
            dim: args.dim,
        });
    }
    Ok(match args.kernel {
        KernelName::Matern => NuSource::ClosedFormExponential,
        _ => NuSource::ClosedFormSeD1,
    })
}

pub(crate) fn resolve_nu(args: &KernelArgs) -> CliResult<NuSource> {
    let Some(text) = &args.nu else {
        return default_nu(args);
    };
    match NuSpec::parse(text)? {
        NuSpec::Source(s) => Ok(s),
        NuSpec::Numeric => {
            let profile = match template(args)? {
                Some(t) => t.radial_profile(),
                None => RadialProfile::SquaredExponential,
            };
            Ok(NuSource::Numeric {
                profile,
                dim: args.dim,
            })
        }
    }
}

pub fn diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let k = &a.kernel;
    let seed = resolve_seed(k.seed, DEFAULT_SEED)?;
    let q = if a.q.is_empty() {
        vec![1.0]
    } else {
        a.q.clone()
    };
    if let Some(bad) = q.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(CliError::usage(format!(
            "--q must lie in (0, 1], got {bad}"
        )));
    }
    if a.n_samples == Some(0) {
        return Err(CliError::usage("--N must be at least 1"));
    }
    if a.mc_samples.is_some_and(|m| m < 2) {
        return Err(CliError::usage("--mc-samples must be at least 2"));
    }
    let nu = resolve_nu(k)?;
    let jitter = ExperimentConfig::default().jitter_budget;
    info!(
        "resolved: {} q={:?} mc_samples={:?} N={:?} nu={} seed={seed} jitter_budget={jitter}",
        kernel_label(k),
        q,
        a.mc_samples,
        a.n_samples,
        NuSpec::Source(nu.clone())
    );
    let grid = build_grid(k.points_per_axis, k.dim)?;
    let c = kernel_spec(k, seed)?.discretize(&grid)?;
    let opts = DiagnoseOptions {
        q,
        gamma2: a.mc_samples.map(|m| (m, seed, jitter)),
        truncation: match a.n_samples {
            Some(n) => Some((NuSequence::new(nu)?, n, k.dim)),
            None => None,
        },
    };
    let report = diagnostics::diagnose(&c, &grid, &opts)?;
    print!("{report}");
    Ok(())
}
