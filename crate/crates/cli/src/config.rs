//! Experiment configuration: a flat TOML file.
//!
//! ```toml
//! eigenvalues = [1.0, 2.0]
//! resolution = 0.2
//! r_max = 128.0          # or t_max = 14.0
//! r_window = [8.0, 128.0]
//! seed = 1
//! output_dir = "out"
//!
//! [tolerances]
//! growth_approx = 0.4
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use horolab::growth::{approx_r_valid, required_t_max, t_max_for};
use horolab::HeintzeGroup;
use serde::{Deserialize, Serialize};

/// Named tolerances and their defaults.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("growth_approx", 0.4),
    ("growth_horosphere", 0.4),
    ("growth_euclidean", 0.2),
    ("compare_horosphere", 0.4),
    ("compare_approx", 0.3),
    ("curvature", 1e-3),
    ("curvature_plane", 1e-4),
    ("conservation", 1e-8),
    ("distance", 1e-4),
    ("rho_growth", 1.0),
    ("face_volume", 0.01),
    ("face_volume_refined", 0.0025),
    ("volume_ratio", 0.02),
    ("sandwich", 1e-6),
    ("projection", 0.05),
    ("drift", 1.05),
    ("controlled_volume", 0.2),
    ("qi_window", 0.25),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    eigenvalues: Vec<f64>,
    resolution: Option<f64>,
    t_max: Option<f64>,
    r_max: Option<f64>,
    r_window: Option<[f64; 2]>,
    seed: Option<u64>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
    output_dir: Option<PathBuf>,
    sheet_resolution: Option<f64>,
    sheet_t_max: Option<f64>,
    y_cut: Option<f64>,
    samples: Option<usize>,
    export_mesh: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub eigenvalues: Vec<f64>,
    pub resolution: f64,
    pub t_max: f64,
    pub r_window: (f64, f64),
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub output_dir: Option<PathBuf>,
    /// Layout resolution and depth for the sampled horosphere sheet.
    pub sheet_resolution: f64,
    pub sheet_t_max: f64,
    pub y_cut: f64,
    /// Sample count for the randomized audits.
    pub samples: usize,
    pub export_mesh: bool,
    /// Messages produced while defaulting (e.g. reordered eigenvalues).
    #[serde(skip)]
    pub notices: Vec<String>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn group(&self) -> HeintzeGroup {
        HeintzeGroup::new(self.eigenvalues.clone()).expect("validated at load")
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    let mut notices = Vec::new();
    let g = HeintzeGroup::new(raw.eigenvalues.clone()).map_err(|e| ConfigError(e.to_string()))?;
    if g.lambdas() != raw.eigenvalues.as_slice() {
        notices.push(format!("eigenvalues reordered to {:?}", g.lambdas()));
    }
    if g.dim() > 4 {
        return Err(ConfigError(format!(
            "dimension {} is too large to mesh; use at most 4 eigenvalues",
            g.dim()
        )));
    }
    let resolution = raw.resolution.unwrap_or(0.2);
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(ConfigError(format!(
            "resolution must lie in (0, 0.5], got {resolution}"
        )));
    }
    let r_window = raw.r_window.map(|w| (w[0], w[1])).unwrap_or((8.0, 128.0));
    if !(r_window.0 > 0.0 && r_window.0 < r_window.1) {
        return Err(ConfigError(format!(
            "r_window must satisfy 0 < lo < hi, got {r_window:?}"
        )));
    }
    let t_max = match (raw.t_max, raw.r_max) {
        (Some(_), Some(_)) => return Err(ConfigError("give either t_max or r_max, not both".into())),
        (Some(t), None) => t,
        (None, r) => t_max_for(&g, r.unwrap_or(r_window.1), 4.0),
    };
    if !(t_max > 0.0) {
        return Err(ConfigError(format!("t_max must be positive, got {t_max}")));
    }
    let r_valid = approx_r_valid(&g, t_max);
    if r_window.1 > r_valid {
        return Err(ConfigError(format!(
            "r_window upper end {} exceeds the truncation-valid radius {r_valid:.3} of t_max = {t_max}; need t_max >= {:.3}",
            r_window.1,
            required_t_max(&g, r_window.1)
        )));
    }
    let mut tolerances: BTreeMap<String, f64> = TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in raw.tolerances {
        if !tolerances.contains_key(&k) {
            return Err(ConfigError(format!(
                "unknown tolerance '{k}'; known: {}",
                TOLERANCES.iter().map(|t| t.0).collect::<Vec<_>>().join(", ")
            )));
        }
        if !(v >= 0.0) {
            return Err(ConfigError(format!("tolerance '{k}' must be nonnegative, got {v}")));
        }
        tolerances.insert(k, v);
    }
    let sheet_resolution = raw.sheet_resolution.unwrap_or(0.25);
    if !(sheet_resolution > 0.0 && sheet_resolution <= 0.5) {
        return Err(ConfigError(format!(
            "sheet_resolution must lie in (0, 0.5], got {sheet_resolution}"
        )));
    }
    let sheet_t_max = raw
        .sheet_t_max
        .unwrap_or_else(|| 2.0 / g.lambda_min() * r_window.1.ln() + 0.8);
    let y_cut = raw.y_cut.unwrap_or(-2.0);
    if !(y_cut < 0.0 && y_cut > -sheet_t_max) {
        return Err(ConfigError(format!("y_cut must lie in (−sheet_t_max, 0), got {y_cut}")));
    }
    let samples = raw.samples.unwrap_or(200);
    if samples == 0 {
        return Err(ConfigError("samples must be positive".into()));
    }
    Ok(ExperimentConfig {
        eigenvalues: g.lambdas().to_vec(),
        resolution,
        t_max,
        r_window,
        seed: raw.seed.unwrap_or(1),
        tolerances,
        output_dir: raw.output_dir,
        sheet_resolution,
        sheet_t_max,
        y_cut,
        samples,
        export_mesh: raw.export_mesh.unwrap_or(false),
        notices,
    })
}
