use std::fmt;

use crate::diagnostics::{NuSource, RadialProfile};
use crate::error::{CovError, Result};
use crate::estimators::KInfMode;
use crate::grid_kernel::{KernelSpec, MaternSmoothness};

/// A kernel family with the lengthscale left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelTemplate {
    SquaredExponential,
    Matern(MaternSmoothness),
    Periodic {
        period: f64,
    },
    /// Squared exponential evaluated on a randomly permuted grid.
    Shuffled,
}

impl KernelTemplate {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SquaredExponential => "se",
            Self::Matern(_) => "matern",
            Self::Periodic { .. } => "periodic",
            Self::Shuffled => "shuffled",
        }
    }

    /// Parses `se`, `matern`, `periodic` or `shuffled`.
    pub fn parse(name: &str, matern: MaternSmoothness, period: f64) -> Result<Self> {
        match name {
            "se" => Ok(Self::SquaredExponential),
            "matern" => Ok(Self::Matern(matern)),
            "periodic" => Ok(Self::Periodic { period }),
            "shuffled" => Ok(Self::Shuffled),
            other => Err(CovError::Parse(format!(
                "unknown kernel '{other}' (expected se, matern, periodic or shuffled)"
            ))),
        }
    }

    /// Kernel at lengthscale `lambda`; `perm_seed` only matters for the shuffled template.
    pub fn instantiate(&self, lambda: f64, perm_seed: u64) -> Result<KernelSpec> {
        match self {
            Self::SquaredExponential => KernelSpec::squared_exponential(lambda),
            Self::Matern(s) => KernelSpec::matern(s.value(), lambda),
            Self::Periodic { period } => KernelSpec::periodic(lambda, *period),
            Self::Shuffled => {
                KernelSpec::permuted(KernelSpec::squared_exponential(lambda)?, perm_seed)
            }
        }
    }

    /// Unshuffled kernel at lengthscale `lambda`.
    pub fn base(&self, lambda: f64) -> Result<KernelSpec> {
        match self {
            Self::Shuffled => KernelSpec::squared_exponential(lambda),
            other => other.instantiate(lambda, 0),
        }
    }

    pub fn radial_profile(&self) -> RadialProfile {
        match self {
            Self::Matern(s) => RadialProfile::Matern(*s),
            _ => RadialProfile::SquaredExponential,
        }
    }

    /// `exp(-m^2/2)` for the Gaussian-type kernels, `exp(-m)` for Matérn.
    pub fn default_nu(&self) -> NuSpec {
        match self {
            Self::Matern(_) => NuSpec::Source(NuSource::ExpPower {
                rate: 1.0,
                power: 1.0,
            }),
            _ => NuSpec::Source(NuSource::ExpPower {
                rate: 0.5,
                power: 2.0,
            }),
        }
    }
}

/// Tail sequence choice; `Numeric` integrates the kernel's own radial profile.
#[derive(Debug, Clone, PartialEq)]
pub enum NuSpec {
    Source(NuSource),
    Numeric,
}

impl NuSpec {
    /// Parses `se`, `exp`, `numeric`, `power:<alpha>` or `exp_power:<rate>:<power>`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CovError::Parse(format!("invalid number '{s}' in nu setting '{text}'")))
        };
        let spec = match parts.as_slice() {
            ["se"] => Self::Source(NuSource::ClosedFormSeD1),
            ["exp"] => Self::Source(NuSource::ClosedFormExponential),
            ["numeric"] => Self::Numeric,
            ["power", a] => Self::Source(NuSource::PowerLaw { alpha: num(a)? }),
            ["exp_power", r, p] => Self::Source(NuSource::ExpPower {
                rate: num(r)?,
                power: num(p)?,
            }),
            _ => return Err(CovError::Parse(format!("unknown nu setting '{text}'"))),
        };
        if let Self::Source(s) = &spec {
            s.validate()?;
        }
        Ok(spec)
    }

    pub fn resolve(&self, template: &KernelTemplate, dim: usize) -> NuSource {
        match self {
            Self::Source(s) => s.clone(),
            Self::Numeric => NuSource::Numeric {
                profile: template.radial_profile(),
                dim,
            },
        }
    }
}

impl fmt::Display for NuSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Numeric => write!(f, "numeric"),
            Self::Source(NuSource::ClosedFormSeD1) => write!(f, "se"),
            Self::Source(NuSource::ClosedFormExponential) => write!(f, "exp"),
            Self::Source(NuSource::PowerLaw { alpha }) => write!(f, "power:{alpha}"),
            Self::Source(NuSource::ExpPower { rate, power }) => {
                write!(f, "exp_power:{rate}:{power}")
            }
            Self::Source(other) => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentKernel {
    pub template: KernelTemplate,
    pub nu: NuSpec,
}

impl ExperimentKernel {
    pub fn new(template: KernelTemplate) -> Self {
        Self {
            nu: template.default_nu(),
            template,
        }
    }
}

/// Scale multiplying `m*` in the taper radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaRule {
    Lengthscale,
    PluginEffectiveDim,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernels: Vec<ExperimentKernel>,
    pub lambda_grid: Vec<f64>,
    pub points_per_axis: usize,
    pub dim: usize,
    pub trials: usize,
    /// `N = ceil(n_mult * ln(lambda^{-d}))` unless `n_fixed` is set.
    pub n_mult: f64,
    pub n_fixed: Option<usize>,
    pub c0: f64,
    pub k_inf: KInfMode,
    pub kappa_rule: KappaRule,
    pub base_seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    pub permute_per_trial: bool,
    pub jitter_budget: f64,
}

/// `10^e` for `e = start, start + step, ...` up to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| 10f64.powf(start + k as f64 * step))
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernels: vec![ExperimentKernel::new(KernelTemplate::SquaredExponential)],
            lambda_grid: vec![0.01],
            points_per_axis: 1250,
            dim: 1,
            trials: 30,
            n_mult: 5.0,
            n_fixed: None,
            c0: 2.0,
            k_inf: KInfMode::PluginMaxDiag,
            kappa_rule: KappaRule::Lengthscale,
            base_seed: 20240501,
            threads: None,
            permute_per_trial: true,
            jitter_budget: 1e-6,
        }
    }
}

impl ExperimentConfig {
    /// SE and Matérn 3/2 on `lambda = 10^{-3}, 10^{-2.7}, ..., 10^{-0.3}, 10^{-0.1}`.
    pub fn figure2() -> Self {
        let mut grid = log_grid(-3.0, -0.3, 0.3);
        grid.push(10f64.powf(-0.1));
        Self {
            kernels: vec![
                ExperimentKernel::new(KernelTemplate::SquaredExponential),
                ExperimentKernel::new(KernelTemplate::Matern(MaternSmoothness::ThreeHalves)),
            ],
            lambda_grid: grid,
            ..Self::default()
        }
    }

    /// Periodic (`eta = 0.4`) and shuffled SE on `lambda = 10^{-2.2}, 10^{-1.9}, ..., 10^{-0.1}`.
    pub fn figure3() -> Self {
        Self {
            kernels: vec![
                ExperimentKernel::new(KernelTemplate::Periodic { period: 0.4 }),
                ExperimentKernel::new(KernelTemplate::Shuffled),
            ],
            lambda_grid: log_grid(-2.2, -0.1, 0.3),
            ..Self::default()
        }
    }

    pub fn n_samples(&self, lambda: f64) -> usize {
        match self.n_fixed {
            Some(n) => n,
            None => (self.n_mult * self.dim as f64 * (1.0 / lambda).ln())
                .ceil()
                .max(0.0) as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CovError::InvalidParameter(msg));
        if self.kernels.is_empty() {
            return bad("kernel list is empty".into());
        }
        if self.lambda_grid.is_empty() {
            return bad("lambda grid is empty".into());
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return bad(format!("lengthscales must lie in (0, 1), got {l}"));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.points_per_axis < 2 || self.dim == 0 {
            return bad(format!(
                "grid needs L >= 2 and d >= 1, got L = {}, d = {}",
                self.points_per_axis, self.dim
            ));
        }
        if !(self.n_mult > 0.0 && self.n_mult.is_finite()) {
            return bad(format!("n_mult must be positive, got {}", self.n_mult));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| self.n_samples(**l) == 0) {
            return bad(format!("sample-size rule gives N = 0 at lambda = {l}"));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return bad(format!("c0 must be positive, got {}", self.c0));
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if !(self.jitter_budget >= 0.0) {
            return bad(format!(
                "jitter budget must be non-negative, got {}",
                self.jitter_budget
            ));
        }
        for k in &self.kernels {
            if let KernelTemplate::Periodic { period } = k.template {
                if !(period > 0.0 && period.is_finite()) {
                    return bad(format!("period must be positive, got {period}"));
                }
            }
            if let NuSpec::Source(s) = &k.nu {
                s.validate()?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.kernels.iter().map(|k| k.template.name()).collect();
        writeln!(f, "kernel.list={}", names.join(","))?;
        for k in &self.kernels {
            match k.template {
                KernelTemplate::Matern(s) => writeln!(f, "kernel.matern_smoothness={}", s.value())?,
                KernelTemplate::Periodic { period } => writeln!(f, "kernel.period={period}")?,
                _ => {}
            }
        }
        let grid: Vec<String> = self.lambda_grid.iter().map(|l| l.to_string()).collect();
        writeln!(f, "sweep.lambda_grid={}", grid.join(","))?;
        writeln!(f, "sweep.trials={}", self.trials)?;
        writeln!(f, "sweep.L={}", self.points_per_axis)?;
        writeln!(f, "sweep.d={}", self.dim)?;
        writeln!(f, "sweep.n_mult={}", self.n_mult)?;
        match self.n_fixed {
            Some(n) => writeln!(f, "sweep.N={n}")?,
            None => writeln!(f, "sweep.N=rule")?,
        }
        writeln!(f, "sweep.seed={}", self.base_seed)?;
        match self.threads {
            Some(t) => writeln!(f, "sweep.threads={t}")?,
            None => writeln!(f, "sweep.threads=auto")?,
        }
        writeln!(f, "sweep.permute_per_trial={}", self.permute_per_trial)?;
        writeln!(f, "estimator.c0={}", self.c0)?;
        let k_inf = match self.k_inf {
            KInfMode::Known(v) => format!("{v}"),
            KInfMode::PluginMaxDiag => "plugin_max_diag".into(),
            KInfMode::PluginMaxAbs => "plugin_max_abs".into(),
        };
        writeln!(f, "estimator.k_inf={k_inf}")?;
        let kappa = match self.kappa_rule {
            KappaRule::Lengthscale => "lengthscale",
            KappaRule::PluginEffectiveDim => "plugin",
        };
        writeln!(f, "estimator.kappa_scale={kappa}")?;
        for k in &self.kernels {
            writeln!(f, "nu.{}={}", k.template.name(), k.nu)?;
        }
        write!(f, "sampling.jitter_budget={}", self.jitter_budget)
    }
}
