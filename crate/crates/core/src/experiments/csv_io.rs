use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{SummaryRow, TrialRecord};
use crate::error::{CovError, Result};

pub const TRIAL_HEADER: [&str; 12] = [
    "kernel",
    "lambda",
    "d",
    "L",
    "N",
    "trial",
    "seed",
    "kappa",
    "rho_hat",
    "err_sample",
    "err_taper",
    "err_thresh",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "kernel",
    "lambda",
    "N",
    "trials",
    "mean_sample",
    "ci_sample",
    "mean_taper",
    "ci_taper",
    "mean_thresh",
    "ci_thresh",
];

const MISSING: &str = "NA";

/// A type persisted as one CSV row under a fixed header.
pub trait CsvRow: Sized {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
    fn from_fields(fields: &csv::StringRecord) -> Result<Self>;
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| x.to_string())
}

fn field<T: FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| CovError::Parse(format!("missing column '{name}'")))?;
    raw.parse()
        .map_err(|_| CovError::Parse(format!("invalid value '{raw}' in column '{name}'")))
}

fn opt_field(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<f64>> {
    if rec.get(idx) == Some(MISSING) {
        Ok(None)
    } else {
        field(rec, idx, name).map(Some)
    }
}

impl CsvRow for TrialRecord {
    fn header() -> &'static [&'static str] {
        &TRIAL_HEADER
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.kernel.clone(),
            self.lambda.to_string(),
            self.dim.to_string(),
            self.points_per_axis.to_string(),
            self.n_samples.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.kappa.to_string(),
            self.rho_hat.to_string(),
            self.err_sample.to_string(),
            self.err_taper.to_string(),
            self.err_thresh.to_string(),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> Result<Self> {
        let h = &TRIAL_HEADER;
        Ok(Self {
            kernel: field(r, 0, h[0])?,
            lambda: field(r, 1, h[1])?,
            dim: field(r, 2, h[2])?,
            points_per_axis: field(r, 3, h[3])?,
            n_samples: field(r, 4, h[4])?,
            trial: field(r, 5, h[5])?,
            seed: field(r, 6, h[6])?,
            kappa: field(r, 7, h[7])?,
            rho_hat: field(r, 8, h[8])?,
            err_sample: field(r, 9, h[9])?,
            err_taper: field(r, 10, h[10])?,
            err_thresh: field(r, 11, h[11])?,
            r_eff: None,
        })
    }
}

impl CsvRow for SummaryRow {
    fn header() -> &'static [&'static str] {
        &SUMMARY_HEADER
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.kernel.clone(),
            self.lambda.to_string(),
            self.n_samples.to_string(),
            self.trials.to_string(),
            self.mean_sample.to_string(),
            opt(self.ci_sample),
            self.mean_taper.to_string(),
            opt(self.ci_taper),
            self.mean_thresh.to_string(),
            opt(self.ci_thresh),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> Result<Self> {
        let h = &SUMMARY_HEADER;
        Ok(Self {
            kernel: field(r, 0, h[0])?,
            lambda: field(r, 1, h[1])?,
            n_samples: field(r, 2, h[2])?,
            trials: field(r, 3, h[3])?,
            mean_sample: field(r, 4, h[4])?,
            ci_sample: opt_field(r, 5, h[5])?,
            mean_taper: field(r, 6, h[6])?,
            ci_taper: opt_field(r, 7, h[7])?,
            mean_thresh: field(r, 8, h[8])?,
            ci_thresh: opt_field(r, 9, h[9])?,
        })
    }
}

pub fn write_csv<T: CsvRow, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(T::header())?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv<T: CsvRow>(rows: &[T], path: &Path) -> Result<()> {
    write_csv(rows, File::create(path)?)
}

fn read_csv<T: CsvRow, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(T::header().iter().copied()) {
        return Err(CovError::Parse(format!(
            "unexpected CSV header '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.records().map(|rec| T::from_fields(&rec?)).collect()
}

pub fn read_trials<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    read_csv(input)
}

pub fn read_summaries<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    read_csv(input)
}
