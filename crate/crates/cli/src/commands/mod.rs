mod diagnose;
mod estimate;
mod minimax;
mod plot;
mod sweep;

pub use diagnose::diagnose;
pub use estimate::estimate;
pub use minimax::minimax_check;
pub use plot::plot;
pub use sweep::sweep;

use covlab::experiments::KernelTemplate;
use covlab::grid_kernel::{KernelSpec, MaternSmoothness};
use log::info;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};
use crate::settings::{seed_override, SEED_ENV};
use crate::{KernelArgs, KernelName};

pub const DEFAULT_SEED: u64 = 20240501;

/// `COVLAB_SEED` if set, else the flag, else `fallback`.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> CliResult<u64> {
    match seed_override()? {
        Some(s) => {
            info!("{SEED_ENV}={s} overrides the configured seed");
            Ok(s)
        }
        None => Ok(flag.unwrap_or(fallback)),
    }
}

fn check_lambda(lambda: f64) -> CliResult<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "--lambda must be positive, got {lambda}"
        )))
    }
}

/// Template whose radial profile and naming the kernel shares; `None` for `pwc`.
fn template(args: &KernelArgs) -> CliResult<Option<KernelTemplate>> {
    Ok(match args.kernel {
        KernelName::Se => Some(KernelTemplate::SquaredExponential),
        KernelName::Matern => Some(KernelTemplate::Matern(MaternSmoothness::from_value(
            args.zeta,
        )?)),
        KernelName::Periodic => Some(KernelTemplate::Periodic {
            period: args.period,
        }),
        KernelName::Permuted => Some(KernelTemplate::Shuffled),
        KernelName::Pwc => None,
    })
}

/// Squared-exponential kernel at lengthscale `lambda` sampled at the centres of
/// `cells` equal tensor cells.
fn cell_matrix(cells: usize, dim: usize, lambda: f64) -> CliResult<DMatrix<f64>> {
    let side = covlab::grid_kernel::cells_per_axis(cells, dim)?;
    let centre = |mut t: usize| {
        let mut c = vec![0.0; dim];
        for a in (0..dim).rev() {
            c[a] = ((t % side) as f64 + 0.5) / side as f64;
            t /= side;
        }
        c
    };
    let centres: Vec<Vec<f64>> = (0..cells).map(centre).collect();
    Ok(DMatrix::from_fn(cells, cells, |i, j| {
        let d2: f64 = centres[i]
            .iter()
            .zip(&centres[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        (-d2 / (2.0 * lambda * lambda)).exp()
    }))
}

fn kernel_spec(args: &KernelArgs, seed: u64) -> CliResult<KernelSpec> {
    check_lambda(args.lambda)?;
    match template(args)? {
        Some(t) => Ok(t.instantiate(args.lambda, seed)?),
        None => Ok(KernelSpec::piecewise_constant(cell_matrix(
            args.cells,
            args.dim,
            args.lambda,
        )?)?),
    }
}

fn kernel_label(args: &KernelArgs) -> String {
    let name = format!("{:?}", args.kernel).to_lowercase();
    let mut s = format!(
        "kernel={name} lambda={} L={} d={}",
        args.lambda, args.points_per_axis, args.dim
    );
    match args.kernel {
        KernelName::Matern => s.push_str(&format!(" zeta={}", args.zeta)),
        KernelName::Periodic => s.push_str(&format!(" period={}", args.period)),
        KernelName::Pwc => s.push_str(&format!(" cells={}", args.cells)),
        _ => {}
    }
    s
}
