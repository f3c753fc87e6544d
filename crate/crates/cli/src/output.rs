use std::io::Write;
use std::path::{Path, PathBuf};

use lora_capacity::scenario::ScenarioFile;
use lora_capacity::{CellPreset, ScenarioSpec};

use crate::{CliError, CliResult, Common};

pub const SCHEMA_LINE: &str = "#schema=1";

/// Directory searched for relative scenario paths that do not exist as given.
pub const CONFIG_DIR_ENV: &str = "LORA_CAPACITY_CONFIG_DIR";

/// Scenario loaded when `simulate` gets no path at all.
const DEFAULT_SCENARIO: &str = "scenario.toml";

/// Resolves a scenario path against the working directory, then against
/// `$LORA_CAPACITY_CONFIG_DIR`.
pub fn resolve_config(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(CONFIG_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

pub(crate) fn load_scenario(path: &Path) -> CliResult<ScenarioFile> {
    ScenarioFile::load(&resolve_config(path)).map_err(CliError::config)
}

/// The scenario named on the command line, or the default one in the
/// config directory.
pub(crate) fn required_scenario(common: &Common, positional: Option<&Path>) -> CliResult<ScenarioFile> {
    match (positional, common.config.as_deref()) {
        (Some(_), Some(_)) => Err(CliError::Config("give the scenario either positionally or with --config".into())),
        (Some(p), None) | (None, Some(p)) => load_scenario(p),
        (None, None) => {
            if std::env::var_os(CONFIG_DIR_ENV).is_none() {
                return Err(CliError::Config(format!("no scenario given and {CONFIG_DIR_ENV} is not set")));
            }
            load_scenario(Path::new(DEFAULT_SCENARIO))
        }
    }
}

/// Template for analytic sweeps: the scenario file if given, else the EU868
/// defaults with the chosen cell preset.
pub(crate) fn base_spec(common: &Common) -> CliResult<ScenarioSpec> {
    if let Some(path) = &common.config {
        if common.preset.is_some() {
            return Err(CliError::Config("--preset and --config are exclusive".into()));
        }
        return load_scenario(path)?.spec().map_err(CliError::config);
    }
    let mut spec = ScenarioSpec::eu868(1, 10, 0.0);
    spec.sf_probabilities = preset(common)?.cell().probabilities;
    Ok(spec)
}

pub(crate) fn preset(common: &Common) -> CliResult<CellPreset> {
    let name = common.preset.as_deref().unwrap_or("paper-urban");
    CellPreset::from_name(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))
}

pub(crate) fn seed_list(common: &Common, file: Option<&ScenarioFile>) -> CliResult<Vec<u64>> {
    match (common.seeds, file) {
        (Some(0), _) => Err(CliError::Config("--seeds must be at least 1".into())),
        (Some(k), _) => Ok((1..=k).collect()),
        (None, Some(f)) => Ok(f.traffic.seeds.clone()),
        (None, None) => Ok(vec![1]),
    }
}

/// Writes `text` to `path`, or to stdout.
pub(crate) fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(CliError::runtime),
    }
}

/// Sample mean and the 95% normal half-width of the mean (0 for one sample).
pub(crate) fn mean_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}
