use statrs::distribution::{ContinuousCDF, StudentsT};

use super::TrialRecord;

/// Per-(kernel, lambda) means and 95% confidence half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kernel: String,
    pub lambda: f64,
    pub n_samples: usize,
    pub trials: usize,
    pub mean_sample: f64,
    pub ci_sample: Option<f64>,
    pub mean_taper: f64,
    pub ci_taper: Option<f64>,
    pub mean_thresh: f64,
    pub ci_thresh: Option<f64>,
}

/// 0.975 quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

fn mean_and_half_width(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(t_quantile_975(n - 1) * (var / n as f64).sqrt()))
}

/// Groups records by (kernel, lambda) in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(&str, f64, Vec<&TrialRecord>)> = Vec::new();
    for r in records {
        match groups
            .iter_mut()
            .find(|(k, l, _)| *k == r.kernel && l.to_bits() == r.lambda.to_bits())
        {
            Some(g) => g.2.push(r),
            None => groups.push((&r.kernel, r.lambda, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(kernel, lambda, rs)| {
            let col = |f: fn(&TrialRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (mean_sample, ci_sample) = mean_and_half_width(&col(|r| r.err_sample));
            let (mean_taper, ci_taper) = mean_and_half_width(&col(|r| r.err_taper));
            let (mean_thresh, ci_thresh) = mean_and_half_width(&col(|r| r.err_thresh));
            SummaryRow {
                kernel: kernel.to_string(),
                lambda,
                n_samples: rs[0].n_samples,
                trials: rs.len(),
                mean_sample,
                ci_sample,
                mean_taper,
                ci_taper,
                mean_thresh,
                ci_thresh,
            }
        })
        .collect()
}
