//! Loading and validating the JSON inputs of a run.

use std::fs;
use std::path::{Path, PathBuf};

use nonplanar_core::models::ModelKind;
use nonplanar_core::params::VehicleParams;
use nonplanar_core::simulation::InputSchedule;
use nonplanar_core::surface::SurfaceConfig;
use nonplanar_nlp::SolverOptions;
use nonplanar_raceline::{CollocationOptions, DEFAULT_GUESS_FACTORS};
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("unknown model `{0}` (expected one of two_track, kinematic, kinematic_planar, dynamic_bicycle)")]
    UnknownModel(String),
    #[error("invalid option: {0}")]
    Option(String),
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn invalid(path: &Path, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a track file and checks it against the surface invariants,
/// including the arc cross-section domain `|κ|·half_width < 1`.
pub fn load_track(path: &Path) -> Result<SurfaceConfig, ConfigError> {
    let track: SurfaceConfig = read_json(path)?;
    track.validate().map_err(|e| invalid(path, e.to_string()))?;
    Ok(track)
}

pub fn load_vehicle(path: &Path) -> Result<VehicleParams, ConfigError> {
    let vehicle: VehicleParams = read_json(path)?;
    vehicle.validate().map_err(|e| invalid(path, e))?;
    Ok(vehicle)
}

/// Collocation options; keys left out keep their documented defaults.
pub fn load_options(path: &Path) -> Result<CollocationOptions, ConfigError> {
    read_json(path)
}

pub fn load_schedule(path: &Path) -> Result<InputSchedule, ConfigError> {
    read_json(path)
}

pub fn parse_model(name: &str) -> Result<ModelKind, ConfigError> {
    ModelKind::parse(name).ok_or_else(|| ConfigError::UnknownModel(name.to_string()))
}

/// Everything one command needs, validated together.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub track: SurfaceConfig,
    pub vehicle: VehicleParams,
    pub models: Vec<ModelKind>,
    pub options: CollocationOptions,
    pub out_dir: PathBuf,
    /// Cruise-speed multipliers of the centerline starting guesses.
    pub guess_factors: Vec<f64>,
    /// Also start non-kinematic models from a kinematic raceline.
    pub warm_start: bool,
    pub solver: SolverOptions,
}

/// Command-line level description of a run before any file is read.
#[derive(Clone, Debug, Default)]
pub struct RunPaths {
    pub track: PathBuf,
    pub vehicle: PathBuf,
    pub models: Vec<String>,
    pub options: Option<PathBuf>,
    pub intervals: Option<usize>,
    pub degree: Option<usize>,
    pub out_dir: PathBuf,
    pub guess_factors: Option<Vec<f64>>,
    pub warm_start: bool,
    pub max_iterations: Option<usize>,
}

pub fn load_configs(paths: &RunPaths) -> Result<RunConfig, ConfigError> {
    let track = load_track(&paths.track)?;
    let vehicle = load_vehicle(&paths.vehicle)?;
    let mut options = match &paths.options {
        Some(p) => load_options(p)?,
        None => CollocationOptions::default(),
    };
    if let Some(k) = paths.intervals {
        options.intervals = k;
    }
    if let Some(d) = paths.degree {
        options.degree = d;
    }
    options.validate().map_err(|e| ConfigError::Option(e.to_string()))?;
    if options.closed == Some(true) && !track.closed {
        return Err(ConfigError::Option(format!(
            "`closed` is set but track `{}` is open",
            track.name
        )));
    }
    let guess_factors = paths
        .guess_factors
        .clone()
        .unwrap_or_else(|| DEFAULT_GUESS_FACTORS.to_vec());
    if guess_factors.is_empty() || guess_factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(ConfigError::Option(
            "`guess_factors` must be a non-empty list of positive numbers".into(),
        ));
    }
    let mut solver = SolverOptions::default();
    if let Some(n) = paths.max_iterations {
        if n == 0 {
            return Err(ConfigError::Option("`max_iterations` must be at least 1".into()));
        }
        solver.max_iterations = n;
    }
    let models = paths
        .models
        .iter()
        .map(|m| parse_model(m))
        .collect::<Result<Vec<_>, _>>()?;
    if models.is_empty() {
        return Err(ConfigError::Option("no model selected".into()));
    }
    Ok(RunConfig {
        track,
        vehicle,
        models,
        options,
        out_dir: paths.out_dir.clone(),
        guess_factors,
        warm_start: paths.warm_start,
        solver,
    })
}
