use std::fs;

use covlab::experiments::{emit_csv, emit_svg, run_sweep, summarize, SvgAxes};
use log::info;

use super::resolve_seed;
use crate::error::{CliError, CliResult};
use crate::settings::{parse_overrides, parse_threads, read_flat, resolve_experiment};
use crate::SweepArgs;

pub fn sweep(a: &SweepArgs) -> CliResult<()> {
    let file = read_flat(&a.config)?;
    let mut cfg = resolve_experiment(&[file, parse_overrides(&a.set)?])?;
    if let Some(t) = &a.threads {
        cfg.threads = parse_threads(t)?;
    }
    cfg.base_seed = resolve_seed(Some(cfg.base_seed), cfg.base_seed)?;
    info!("resolved config:\n{cfg}");

    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", a.out.display())))?;
    let outcome = run_sweep(&cfg)?;
    let summaries = summarize(&outcome.records);
    emit_csv(&outcome.records, &a.out.join("trials.csv"))?;
    emit_csv(&summaries, &a.out.join("summary.csv"))?;
    info!(
        "wrote {} trials and {} summary rows to {}",
        outcome.records.len(),
        summaries.len(),
        a.out.display()
    );
    if a.plot {
        for path in emit_svg(&summaries, &a.out, &SvgAxes::default())? {
            info!("wrote {}", path.display());
        }
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(outcome.trailer()))
    }
}
