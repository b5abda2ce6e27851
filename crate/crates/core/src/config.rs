//! Run configuration: JSON schema with defaults, validation and environment
//! overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Dimension, GasModel, MomentumGrid, ParticleModel, PotentialSpec};

/// Prefix of environment variables that override configuration keys.
pub const ENV_PREFIX: &str = "QLBE_";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConfig {
    pub beta: f64,
    /// Gas particle mass.
    pub m: f64,
    /// Test particle mass.
    #[serde(rename = "M")]
    pub big_m: f64,
    pub n_gas: f64,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            m: 1.0,
            big_m: 10.0,
            n_gas: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dimension: usize,
    pub spacing: f64,
    pub half_extent: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dimension: 1,
            spacing: 0.5,
            half_extent: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    /// Time step; `null` selects the largest stable step.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub record_every: usize,
    /// Centre and momentum width of the default initial wave packet.
    pub initial_center: f64,
    pub initial_width: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            dt: None,
            t_final: 1.0,
            record_every: 10,
            initial_center: 0.0,
            initial_width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub seed: u64,
    pub n_trajectories: usize,
    /// Time between recorded ensemble statistics; `null` records 20 intervals.
    pub record_interval: Option<f64>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_trajectories: 10_000,
            record_interval: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "qlbe-out".into(),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub physical: PhysicalConfig,
    pub potential: PotentialSpec,
    pub grid: GridConfig,
    pub evolution: EvolutionSection,
    pub monte_carlo: MonteCarloConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            physical: PhysicalConfig::default(),
            potential: PotentialSpec::Gaussian { g: 1.0, sigma: 1.0 },
            grid: GridConfig::default(),
            evolution: EvolutionSection::default(),
            monte_carlo: MonteCarloConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn require_positive(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return config_error(format!("{key} must be > 0 (got {v})"));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("physical.beta", self.physical.beta)?;
        require_positive("physical.m", self.physical.m)?;
        require_positive("physical.M", self.physical.big_m)?;
        require_positive("physical.n_gas", self.physical.n_gas)?;
        match self.potential {
            PotentialSpec::Gaussian { g, sigma } => {
                if !g.is_finite() {
                    return config_error(format!("potential.g must be finite (got {g})"));
                }
                require_positive("potential.sigma", sigma)?;
            }
            PotentialSpec::CutoffConstant { g, q_max } => {
                if !g.is_finite() {
                    return config_error(format!("potential.g must be finite (got {g})"));
                }
                require_positive("potential.q_max", q_max)?;
            }
        }
        if self.grid.dimension != 1 && self.grid.dimension != 3 {
            return config_error(format!("grid.dimension must be 1 or 3 (got {})", self.grid.dimension));
        }
        require_positive("grid.spacing", self.grid.spacing)?;
        if self.grid.half_extent == 0 {
            return config_error("grid.half_extent must be >= 1");
        }
        if let Some(dt) = self.evolution.dt {
            require_positive("evolution.dt", dt)?;
        }
        if !(self.evolution.t_final >= 0.0 && self.evolution.t_final.is_finite()) {
            return config_error(format!("evolution.t_final must be >= 0 (got {})", self.evolution.t_final));
        }
        if self.evolution.record_every == 0 {
            return config_error("evolution.record_every must be >= 1");
        }
        if !self.evolution.initial_center.is_finite() {
            return config_error("evolution.initial_center must be finite");
        }
        require_positive("evolution.initial_width", self.evolution.initial_width)?;
        if self.monte_carlo.n_trajectories == 0 {
            return config_error("monte_carlo.n_trajectories must be >= 1");
        }
        if let Some(r) = self.monte_carlo.record_interval {
            require_positive("monte_carlo.record_interval", r)?;
        }
        if self.output.directory.is_empty() {
            return config_error("output.directory must not be empty");
        }
        Ok(())
    }

    pub fn gas(&self) -> Result<GasModel> {
        GasModel::new(self.physical.beta, self.physical.m, self.physical.n_gas)
    }

    pub fn particle(&self) -> Result<ParticleModel> {
        ParticleModel::new(self.physical.big_m)
    }

    pub fn momentum_grid(&self) -> Result<MomentumGrid> {
        MomentumGrid::new(
            Dimension::from_count(self.grid.dimension)?,
            self.grid.spacing,
            self.grid.half_extent,
        )
    }

    /// Ensemble recording interval.
    pub fn record_interval(&self) -> f64 {
        self.monte_carlo
            .record_interval
            .unwrap_or(self.evolution.t_final / 20.0)
            .max(f64::MIN_POSITIVE)
    }
}

/// Parses and validates a JSON configuration; missing keys take defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    from_value(value)
}

fn from_value(value: Value) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Every leaf key path of the schema, e.g. `physical.beta`.
fn leaf_paths(v: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if child.is_object() {
                leaf_paths(child, &path, out);
            } else {
                out.push(path);
            }
        }
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) {
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for k in &keys[..keys.len() - 1] {
        let map = node.as_object_mut().expect("schema sections are objects");
        node = map.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .expect("schema sections are objects")
        .insert(keys[keys.len() - 1].to_string(), v);
}

/// Applies `QLBE_<KEY>` overrides. The key is the dotted path, either as
/// written (`QLBE_physical.M`) or upper-cased with `.` or `_` separators
/// (`QLBE_PHYSICAL_BETA`). An upper-cased key that matches two paths, such as
/// `PHYSICAL_M`, is rejected.
pub fn apply_env_overrides<I>(text: &str, vars: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut paths = Vec::new();
    let mut schema = serde_json::to_value(RunConfig::default())?;
    // both potential kinds contribute keys
    set_path(&mut schema, "potential.q_max", Value::Null);
    set_path(&mut schema, "potential.sigma", Value::Null);
    leaf_paths(&schema, "", &mut paths);
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let key = &key[ENV_PREFIX.len()..];
        let path = if paths.iter().any(|p| p == key) {
            key.to_string()
        } else {
            let norm = |s: &str| s.to_uppercase().replace('.', "_");
            let hits: Vec<&String> = paths.iter().filter(|p| norm(p) == norm(key)).collect();
            match hits.as_slice() {
                [one] => (*one).clone(),
                [] => return config_error(format!("{ENV_PREFIX}{key} does not name a configuration key")),
                _ => {
                    return config_error(format!(
                        "{ENV_PREFIX}{key} is ambiguous between {}; spell the key as written, e.g. {ENV_PREFIX}{}",
                        hits.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" and "),
                        hits[0]
                    ))
                }
            }
        };
        let v = serde_json::from_str(&raw).unwrap_or(Value::String(raw.clone()));
        set_path(&mut value, &path, v);
    }
    from_value(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let cfg = parse_config(r#"{"physical": {"beta": 2.0}}"#).unwrap();
        assert_eq!(cfg.physical.beta, 2.0);
        assert_eq!(cfg.physical.big_m, 10.0);
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echoed["physical"]["M"], 10.0);
        assert_eq!(echoed["potential"]["kind"], "gaussian");
    }

    #[test]
    fn negative_beta_names_the_key() {
        let err = parse_config(r#"{"physical": {"beta": -1}}"#).unwrap_err();
        assert!(err.to_string().contains("physical.beta must be > 0"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config(r#"{"ghe": 1}"#).is_err());
        assert!(parse_config(r#"{"physical": {"ghe": 1}}"#).is_err());
    }

    #[test]
    fn environment_overrides_apply() {
        let vars = vec![
            ("QLBE_PHYSICAL_BETA".to_string(), "3.5".to_string()),
            ("QLBE_physical.M".to_string(), "7".to_string()),
            ("QLBE_MONTE_CARLO.SEED".to_string(), "9".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let cfg = apply_env_overrides("{}", vars).unwrap();
        assert_eq!(cfg.physical.beta, 3.5);
        assert_eq!(cfg.physical.big_m, 7.0);
        assert_eq!(cfg.monte_carlo.seed, 9);
    }

    #[test]
    fn ambiguous_or_unknown_overrides_fail() {
        let amb = apply_env_overrides("{}", vec![("QLBE_PHYSICAL_M".into(), "2".into())]);
        assert!(amb.unwrap_err().to_string().contains("ambiguous"));
        assert!(apply_env_overrides("{}", vec![("QLBE_NOPE".into(), "2".into())]).is_err());
    }

    #[test]
    fn cutoff_potential_parses() {
        let cfg = parse_config(r#"{"potential": {"kind": "cutoff_constant", "g": 0.5, "q_max": 2.0}}"#).unwrap();
        assert_eq!(cfg.potential, PotentialSpec::CutoffConstant { g: 0.5, q_max: 2.0 });
        assert!(parse_config(r#"{"potential": {"kind": "cutoff_constant", "g": 0.5, "q_max": -2.0}}"#).is_err());
    }
}
