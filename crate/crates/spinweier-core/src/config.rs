//! Key-value configuration for the pipeline commands: scenario selection,
//! refinement levels, tolerances, gauge vertex, and RNG seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenarios::Scenario;

/// Which geometry the pipeline runs on: a built-in analytic scenario or a
/// triangle mesh loaded from an OBJ file.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Builtin(Scenario),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub geometry: Geometry,
    /// refinement level for built-in scenarios
    pub level: u32,
    /// levels used by convergence studies
    pub levels: Vec<u32>,
    pub gauge_vertex: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for ScenarioConfig {
    fn default() -> ScenarioConfig {
        let mut tolerances = BTreeMap::new();
        for (name, value) in [
            ("gram", 1e-8),
            ("nonvec", 1e-8),
            ("plane_exact", 1e-12),
            ("norm_const", 1e-8),
            ("slope_min", 0.9),
            ("isometry", 0.1),
        ] {
            tolerances.insert(name.to_string(), value);
        }
        ScenarioConfig {
            geometry: Geometry::Builtin(Scenario::Sphere),
            level: 2,
            levels: vec![2, 3, 4, 5],
            gauge_vertex: 0,
            seed: 0,
            tolerances,
        }
    }
}

impl ScenarioConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are
    /// rejected except for the open-ended `tol.<name>` namespace.
    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: {what}", lineno + 1));
            match key {
                "scenario" => {
                    cfg.geometry = Geometry::Builtin(
                        Scenario::from_str(value).map_err(|e| bad(&e.to_string()))?,
                    );
                }
                "mesh" => cfg.geometry = Geometry::File(PathBuf::from(value)),
                "level" => cfg.level = value.parse().map_err(|_| bad("level must be an integer"))?,
                "levels" => {
                    cfg.levels = value
                        .split(',')
                        .map(|s| s.trim().parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("levels must be comma-separated integers"))?;
                    if cfg.levels.is_empty() {
                        return Err(bad("levels must be non-empty"));
                    }
                }
                "gauge_vertex" => {
                    cfg.gauge_vertex =
                        value.parse().map_err(|_| bad("gauge_vertex must be an index"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed must be an integer"))?,
                _ => {
                    if let Some(name) = key.strip_prefix("tol.") {
                        let v: f64 =
                            value.parse().map_err(|_| bad("tolerance must be a number"))?;
                        cfg.tolerances.insert(name.to_string(), v);
                    } else {
                        return Err(bad(&format!("unknown key {key:?}")));
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        ScenarioConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(1e-8)
    }
}
