//! Flat `key=value` configuration files and their resolution into an
//! [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::path::Path;

use covlab::estimators::KInfMode;
use covlab::experiments::{ExperimentConfig, ExperimentKernel, KappaRule, KernelTemplate, NuSpec};
use covlab::grid_kernel::MaternSmoothness;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "COVLAB_SEED";

const KEYS: &[&str] = &[
    "kernel.list",
    "kernel.matern_smoothness",
    "kernel.period",
    "sweep.lambda_grid",
    "sweep.trials",
    "sweep.L",
    "sweep.d",
    "sweep.n_mult",
    "sweep.N",
    "sweep.seed",
    "sweep.threads",
    "sweep.permute_per_trial",
    "estimator.c0",
    "estimator.k_inf",
    "estimator.kappa_scale",
    "sampling.jitter_budget",
];

/// One layer of settings, in file order.
pub type Layer = Vec<(String, String)>;

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_flat(text: &str) -> CliResult<Layer> {
    let mut out: Layer = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("line {}: expected key=value, got '{line}'", no + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::usage(format!("line {}: empty key", no + 1)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(CliError::usage(format!(
                "line {}: duplicate key '{key}'",
                no + 1
            )));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn read_flat(path: &Path) -> CliResult<Layer> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_flat(&text)
}

/// Parses `--set key=value` arguments.
pub fn parse_overrides(items: &[String]) -> CliResult<Layer> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::usage(format!("--set expects key=value, got '{s}'")))
        })
        .collect()
}

/// A real number, also accepting `10^x`.
pub fn parse_real(text: &str) -> CliResult<f64> {
    let t = text.trim();
    let value = match t.strip_prefix("10^") {
        Some(exp) => exp.trim().parse::<f64>().map(|e| 10f64.powf(e)),
        None => t.parse::<f64>(),
    };
    value.map_err(|_| CliError::usage(format!("invalid number '{t}'")))
}

fn parse_list(text: &str) -> Vec<&str> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("{key}: invalid value '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(CliError::usage(format!(
            "{key}: expected true or false, got '{other}'"
        ))),
    }
}

/// `auto` or a positive count.
pub fn parse_threads(value: &str) -> CliResult<Option<usize>> {
    if value == "auto" {
        return Ok(None);
    }
    match value.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(CliError::usage(format!(
            "threads: expected a positive integer or 'auto', got '{value}'"
        ))),
    }
}

fn is_known(key: &str) -> bool {
    KEYS.contains(&key) || key.strip_prefix("nu.").is_some_and(|k| !k.is_empty())
}

/// Merges layers (later layers win) on top of the defaults.
pub fn resolve_experiment(layers: &[Layer]) -> CliResult<ExperimentConfig> {
    let mut map: BTreeMap<&str, &str> = BTreeMap::new();
    for layer in layers {
        for (k, v) in layer {
            if !is_known(k) {
                return Err(CliError::usage(format!("unknown config key '{k}'")));
            }
            map.insert(k, v);
        }
    }
    let mut cfg = ExperimentConfig::default();
    let get = |k: &str| map.get(k).copied();

    let matern = match get("kernel.matern_smoothness") {
        Some(v) => MaternSmoothness::from_value(parse_num("kernel.matern_smoothness", v)?)?,
        None => MaternSmoothness::ThreeHalves,
    };
    let period = match get("kernel.period") {
        Some(v) => parse_real(v)?,
        None => 0.4,
    };
    if let Some(list) = get("kernel.list") {
        cfg.kernels = parse_list(list)
            .into_iter()
            .map(|name| KernelTemplate::parse(name, matern, period).map(ExperimentKernel::new))
            .collect::<Result<_, _>>()?;
    }
    for (key, value) in map.iter().filter(|(k, _)| k.starts_with("nu.")) {
        let name = &key["nu.".len()..];
        let kernel = cfg
            .kernels
            .iter_mut()
            .find(|k| k.template.name() == name)
            .ok_or_else(|| {
                CliError::usage(format!("{key}: kernel '{name}' is not in kernel.list"))
            })?;
        kernel.nu = NuSpec::parse(value)?;
    }
    if let Some(v) = get("sweep.lambda_grid") {
        cfg.lambda_grid = parse_list(v)
            .into_iter()
            .map(parse_real)
            .collect::<CliResult<_>>()?;
    }
    if let Some(v) = get("sweep.trials") {
        cfg.trials = parse_num("sweep.trials", v)?;
    }
    if let Some(v) = get("sweep.L") {
        cfg.points_per_axis = parse_num("sweep.L", v)?;
    }
    if let Some(v) = get("sweep.d") {
        cfg.dim = parse_num("sweep.d", v)?;
    }
    if let Some(v) = get("sweep.n_mult") {
        cfg.n_mult = parse_real(v)?;
    }
    if let Some(v) = get("sweep.N") {
        cfg.n_fixed = if v == "rule" {
            None
        } else {
            Some(parse_num("sweep.N", v)?)
        };
    }
    if let Some(v) = get("sweep.seed") {
        cfg.base_seed = parse_num("sweep.seed", v)?;
    }
    if let Some(v) = get("sweep.threads") {
        cfg.threads = parse_threads(v)?;
    }
    if let Some(v) = get("sweep.permute_per_trial") {
        cfg.permute_per_trial = parse_bool("sweep.permute_per_trial", v)?;
    }
    if let Some(v) = get("estimator.c0") {
        cfg.c0 = parse_real(v)?;
    }
    if let Some(v) = get("estimator.k_inf") {
        cfg.k_inf = match v {
            "plugin_max_diag" => KInfMode::PluginMaxDiag,
            "plugin_max_abs" => KInfMode::PluginMaxAbs,
            other => KInfMode::Known(parse_real(other)?),
        };
    }
    if let Some(v) = get("estimator.kappa_scale") {
        cfg.kappa_rule = match v {
            "lengthscale" => KappaRule::Lengthscale,
            "plugin" => KappaRule::PluginEffectiveDim,
            other => {
                return Err(CliError::usage(format!(
                    "estimator.kappa_scale: expected lengthscale or plugin, got '{other}'"
                )))
            }
        };
    }
    if let Some(v) = get("sampling.jitter_budget") {
        cfg.jitter_budget = parse_real(v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The `COVLAB_SEED` override, if set.
pub fn seed_override() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{SEED_ENV}: invalid seed '{v}'"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::usage(format!("{SEED_ENV}: {e}"))),
    }
}
