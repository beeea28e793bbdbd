//! Experiment configuration: JSON schema, CLI overrides, validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use treegauss::entropy::geometric_grid;
use treegauss::metrics::MetricKind;
use treegauss::sim::Statistic;
use treegauss::{TreeSpec, WeightSystem};

/// Seed used when neither the config nor the command line supplies one.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Replica count used when none is supplied.
pub const DEFAULT_REPLICAS: u64 = 100;

/// A configuration problem (missing file, bad JSON, invalid field values).
/// Mapped to exit code 2 by `main`.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Geometric radius grid, largest to smallest.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        geometric_grid(self.start, self.stop, self.points)
            .map_err(|e| ConfigError(format!("radius grid: {e}")))
    }
}

/// One experiment, as stored in a JSON file. Subcommands read the fields
/// they need; unknown keys are rejected so typos fail loudly.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSystem>,
    /// Additional weight systems for batch criteria runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub batch: Vec<WeightSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depths: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<Statistic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
}

/// Command-line values that override config fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub depths: Option<Vec<u32>>,
    pub eps_start: Option<f64>,
    pub eps_stop: Option<f64>,
    pub eps_points: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Deserialization alone does not validate weights; check them here so
    /// every bad config fails before any work starts.
    fn validate(&self) -> Result<(), ConfigError> {
        for w in self.weights.iter().chain(self.batch.iter()) {
            w.revalidate()
                .map_err(|e| ConfigError(format!("weights: {e}")))?;
        }
        if let Some(g) = &self.grid {
            g.values()?;
        }
        Ok(())
    }

    /// Fold command-line flags over the file values, then resolve defaults
    /// so the embedded copy in every artifact is complete.
    pub fn resolve(mut self, over: &Overrides) -> Result<ExperimentConfig, ConfigError> {
        if let Some(s) = over.seed {
            self.seed = Some(s);
        }
        if let Some(r) = over.replicas {
            self.replicas = Some(r);
        }
        if let Some(d) = &over.depths {
            self.depths = d.clone();
        }
        if over.eps_start.is_some() || over.eps_stop.is_some() || over.eps_points.is_some() {
            let base = self.grid;
            let (start, stop, points) = (
                over.eps_start.or(base.map(|g| g.start)),
                over.eps_stop.or(base.map(|g| g.stop)),
                over.eps_points.or(base.map(|g| g.points)),
            );
            match (start, stop, points) {
                (Some(start), Some(stop), Some(points)) => {
                    self.grid = Some(GridSpec { start, stop, points });
                }
                _ => {
                    return bad(
                        "a radius grid needs all of --eps-start, --eps-stop, --eps-points \
                         (or a grid block in the config)",
                    )
                }
            }
        }
        self.seed = Some(self.seed.unwrap_or(DEFAULT_SEED));
        self.replicas = Some(self.replicas.unwrap_or(DEFAULT_REPLICAS));
        self.validate()?;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn replicas(&self) -> u64 {
        self.replicas.unwrap_or(DEFAULT_REPLICAS)
    }

    pub fn require_tree(&self) -> Result<&TreeSpec, ConfigError> {
        match &self.tree {
            Some(t) => Ok(t),
            None => bad("this subcommand needs a \"tree\" block in the config"),
        }
    }

    pub fn require_weights(&self) -> Result<&WeightSystem, ConfigError> {
        match &self.weights {
            Some(w) => Ok(w),
            None => bad("this subcommand needs a \"weights\" block in the config"),
        }
    }

    pub fn require_grid(&self) -> Result<Vec<f64>, ConfigError> {
        match &self.grid {
            Some(g) => g.values(),
            None => bad(
                "this subcommand needs a radius grid (\"grid\" block or \
                 --eps-start/--eps-stop/--eps-points)",
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_validates_weights_and_grid() {
        let ok = r#"{
            "tree": {"kind": "chain", "depth": 8},
            "weights": {"mode": "level",
                        "alpha": {"family": "constant", "c": 1.0},
                        "sigma": {"family": "power", "gamma": 1.0}},
            "grid": {"start": 1.0, "stop": 0.01, "points": 8}
        }"#;
        let cfg = ExperimentConfig::parse(ok).unwrap();
        assert_eq!(cfg.seed(), DEFAULT_SEED);

        // sigma must be non-increasing; geometric growth is rejected.
        let bad_weights = r#"{
            "weights": {"mode": "level",
                        "alpha": {"family": "constant", "c": 1.0},
                        "sigma": {"family": "geometric", "q": 2.0}}
        }"#;
        assert!(ExperimentConfig::parse(bad_weights).is_err());

        let bad_grid = r#"{"grid": {"start": 0.01, "stop": 1.0, "points": 8}}"#;
        assert!(ExperimentConfig::parse(bad_grid).is_err());

        assert!(ExperimentConfig::parse(r#"{"grdi": {}}"#).is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let cfg = ExperimentConfig::parse(r#"{"seed": 7, "depths": [4]}"#).unwrap();
        let over = Overrides {
            seed: Some(9),
            depths: Some(vec![2, 3]),
            eps_start: Some(1.0),
            eps_stop: Some(0.5),
            eps_points: Some(2),
            ..Overrides::default()
        };
        let cfg = cfg.resolve(&over).unwrap();
        assert_eq!(cfg.seed(), 9);
        assert_eq!(cfg.depths, vec![2, 3]);
        assert_eq!(cfg.grid.unwrap().points, 2);

        // A partial grid override with no grid in the file is an error.
        let cfg = ExperimentConfig::parse("{}").unwrap();
        let over = Overrides {
            eps_start: Some(1.0),
            ..Overrides::default()
        };
        assert!(cfg.resolve(&over).is_err());
    }
}
