use std::fs;

use covlab::experiments::{emit_svg, read_summaries, read_trials, summarize, SvgAxes};
use covlab::CovError;
use log::info;

use crate::error::{CliError, CliResult};
use crate::PlotArgs;

pub fn plot(a: &PlotArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.input)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", a.input.display())))?;
    let summaries = match read_summaries(text.as_bytes()) {
        Ok(s) => s,
        Err(CovError::Parse(_)) => summarize(&read_trials(text.as_bytes())?),
        Err(e) => return Err(e.into()),
    };
    if summaries.is_empty() {
        return Err(CliError::usage(format!(
            "{} has no rows",
            a.input.display()
        )));
    }
    fs::create_dir_all(&a.out)?;
    let axes = SvgAxes {
        y_max: a.y_max,
        ..SvgAxes::default()
    };
    for path in emit_svg(&summaries, &a.out, &axes)? {
        info!("wrote {}", path.display());
        println!("{}", path.display());
    }
    Ok(())
}
