use std::fmt;

use crate::error::{CovError, Result};

/// Diagnostic summary of one covariance operator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticReport {
    pub trace_op: f64,
    pub op_norm: f64,
    pub r_eff: f64,
    /// `(q, gamma1(q))` pairs in request order.
    pub gamma1: Vec<(f64, f64)>,
    /// Estimate and standard error.
    pub gamma2: Option<(f64, f64)>,
    pub m_star: Option<usize>,
    pub eps_star: Option<f64>,
}

impl DiagnosticReport {
    /// Parses the `key=value` block written by `Display`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut report = DiagnosticReport::default();
        let mut gamma2 = None;
        let mut gamma2_se = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CovError::Parse(format!("expected key=value, got {line:?}")))?;
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|e| CovError::Parse(format!("{key}: {e}")))
            };
            match key {
                "trace_op" => report.trace_op = num()?,
                "op_norm" => report.op_norm = num()?,
                "r_eff" => report.r_eff = num()?,
                "gamma2" => gamma2 = Some(num()?),
                "gamma2_se" => gamma2_se = Some(num()?),
                "m_star" => {
                    report.m_star = Some(
                        value
                            .parse()
                            .map_err(|e| CovError::Parse(format!("m_star: {e}")))?,
                    )
                }
                "eps_star" => report.eps_star = Some(num()?),
                k if k.starts_with("gamma1.q") => {
                    let q = k["gamma1.q".len()..]
                        .parse::<f64>()
                        .map_err(|e| CovError::Parse(format!("{k}: {e}")))?;
                    report.gamma1.push((q, num()?));
                }
                other => return Err(CovError::Parse(format!("unknown key {other}"))),
            }
        }
        report.gamma2 = match (gamma2, gamma2_se) {
            (Some(g), Some(se)) => Some((g, se)),
            (None, None) => None,
            _ => {
                return Err(CovError::Parse(
                    "gamma2 and gamma2_se must appear together".into(),
                ))
            }
        };
        Ok(report)
    }
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trace_op={}", self.trace_op)?;
        writeln!(f, "op_norm={}", self.op_norm)?;
        writeln!(f, "r_eff={}", self.r_eff)?;
        for (q, g) in &self.gamma1 {
            writeln!(f, "gamma1.q{q}={g}")?;
        }
        if let Some((g, se)) = self.gamma2 {
            writeln!(f, "gamma2={g}")?;
            writeln!(f, "gamma2_se={se}")?;
        }
        if let Some(m) = self.m_star {
            writeln!(f, "m_star={m}")?;
        }
        if let Some(e) = self.eps_star {
            writeln!(f, "eps_star={e}")?;
        }
        Ok(())
    }
}
