//! Run configuration: a TOML file layered over the defaults table, then
//! command-line overrides.
//!
//! Defaults (every physical knob lives here):
//!
//! | key                              | default                              |
//! |----------------------------------|--------------------------------------|
//! | `seed`                           | 0                                    |
//! | `jobs`                           | 1                                    |
//! | `record_wall_time`               | true                                 |
//! | `grid.theta`                     | `"0:pi/2:0.01,1.30:1.45:0.0002"`     |
//! | `grid.chi`                       | `[32]`                               |
//! | `grid.solver`                    | `"vumps"`                            |
//! | `power.tol`                      | 1e-10                                |
//! | `power.max_layers`               | 5000                                 |
//! | `vumps.tol`                      | 1e-9                                 |
//! | `vumps.max_iter`                 | 1000                                 |
//! | `diagnostics.transfer_k`         | 8                                    |
//! | `diagnostics.degeneracy_threshold` | 0.01                               |
//! | `critical.chi`                   | `[8, 16, 24, 32]`                    |
//! | `critical.bracket`               | `[1.30, 1.45]`                       |
//! | `critical.resolution`            | 0.002                                |
//! | `critical.vumps_tol`             | 1e-9                                 |
//! | `critical.vumps_max_iter`        | 600                                  |
//! | `critical.power_check_layers`    | 40                                   |
//! | `critical.coarse_points`         | 3                                    |
//! | `finite.theta`                   | `"1.33:1.41:0.005"`                  |
//! | `finite.n`                       | `[100]`                              |
//! | `finite.bc`                      | `"periodic"`                         |
//! | `finite.chi`                     | 16                                   |
//! | `finite.tol`                     | 1e-10                                |
//! | `finite.max_sweeps`              | 30                                   |
//! | `noise.theta`                    | 1.4                                  |
//! | `noise.epsilon`                  | 0.01                                 |
//! | `noise.layers`                   | 200                                  |
//! | `noise.seeds`                    | `[1, 2, 3]`                          |
//! | `noise.chi`                      | 16                                   |
//! | `noise.reference`                | true                                 |

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use edgephase::BoundaryCondition;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Angles are either a grid expression (`"A:B:STEP"` segments and single
/// values, comma separated; `pi` and `pi/2` are accepted) or a plain list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Single(f64),
    List(Vec<f64>),
    Expr(String),
}

impl ThetaSpec {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let raw = match self {
            ThetaSpec::Single(t) => vec![*t],
            ThetaSpec::List(v) => v.clone(),
            ThetaSpec::Expr(s) => parse_theta_expr(s)?,
        };
        normalize_grid(raw)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Power,
    Vumps,
    Both,
}

impl std::str::FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power" => Ok(SolverChoice::Power),
            "vumps" => Ok(SolverChoice::Vumps),
            "both" => Ok(SolverChoice::Both),
            other => Err(format!("unknown solver '{other}' (expected power, vumps or both)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub theta: ThetaSpec,
    pub chi: Vec<usize>,
    pub solver: SolverChoice,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            theta: ThetaSpec::Expr("0:pi/2:0.01,1.30:1.45:0.0002".into()),
            chi: vec![32],
            solver: SolverChoice::Vumps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub tol: f64,
    pub max_layers: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig { tol: 1e-10, max_layers: 5000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VumpsConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for VumpsConfig {
    fn default() -> Self {
        VumpsConfig { tol: 1e-9, max_iter: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Leading transfer-matrix eigenvalues computed per point.
    pub transfer_k: usize,
    pub degeneracy_threshold: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { transfer_k: 8, degeneracy_threshold: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticalConfig {
    pub chi: Vec<usize>,
    pub bracket: [f64; 2],
    pub resolution: f64,
    pub vumps_tol: f64,
    pub vumps_max_iter: usize,
    pub power_check_layers: usize,
    pub coarse_points: usize,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        CriticalConfig {
            chi: vec![8, 16, 24, 32],
            bracket: [1.30, 1.45],
            resolution: 2e-3,
            vumps_tol: 1e-9,
            vumps_max_iter: 600,
            power_check_layers: 40,
            coarse_points: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteConfig {
    pub theta: ThetaSpec,
    pub n: Vec<usize>,
    pub bc: BoundaryCondition,
    pub chi: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FiniteConfig {
    fn default() -> Self {
        FiniteConfig {
            theta: ThetaSpec::Expr("1.33:1.41:0.005".into()),
            n: vec![100],
            bc: BoundaryCondition::Periodic,
            chi: 16,
            tol: 1e-10,
            max_sweeps: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub theta: f64,
    pub epsilon: f64,
    pub layers: usize,
    pub seeds: Vec<u64>,
    pub chi: usize,
    /// Also run the noiseless trajectory for comparison.
    pub reference: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { theta: 1.4, epsilon: 0.01, layers: 200, seeds: vec![1, 2, 3], chi: 16, reference: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    /// Worker threads for independent grid points.
    pub jobs: usize,
    /// When false, `wall_time_s` is written as 0 so repeated runs are
    /// byte-identical.
    pub record_wall_time: bool,
    pub grid: GridConfig,
    pub power: PowerConfig,
    pub vumps: VumpsConfig,
    pub diagnostics: DiagnosticsConfig,
    pub critical: CriticalConfig,
    pub finite: FiniteConfig,
    pub noise: NoiseConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            jobs: 1,
            record_wall_time: true,
            grid: GridConfig::default(),
            power: PowerConfig::default(),
            vumps: VumpsConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            critical: CriticalConfig::default(),
            finite: FiniteConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

/// Walks `user` against the defaults and reports the first key the defaults
/// do not have, as a dotted path.
fn check_keys(user: &toml::Table, reference: &toml::Table, prefix: &str) -> Result<(), ConfigError> {
    for (key, value) in user {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match reference.get(key) {
            None => return err(format!("unknown config key '{path}'")),
            Some(toml::Value::Table(sub)) => match value {
                toml::Value::Table(u) => check_keys(u, sub, &path)?,
                _ => return err(format!("config key '{path}' must be a table")),
            },
            Some(_) => {
                if value.is_table() {
                    return err(format!("config key '{path}' must be a value, not a table"));
                }
            }
        }
    }
    Ok(())
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config, ConfigError> {
        let user: toml::Table = toml::from_str(text).map_err(|e| ConfigError(format!("config is not valid TOML: {e}")))?;
        let reference = toml::Table::try_from(Config::default()).expect("defaults serialize");
        check_keys(&user, &reference, "")?;
        let cfg: Config = serde_path_to_error::deserialize(toml::Value::Table(user))
            .map_err(|e| ConfigError(format!("config key '{}': {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Config::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// One-line JSON form embedded in output headers.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_chi_list("grid.chi", &self.grid.chi)?;
        self.grid.theta.values().map_err(|e| ConfigError(format!("config key 'grid.theta': {e}")))?;
        check_chi_list("critical.chi", &self.critical.chi)?;
        let [lo, hi] = self.critical.bracket;
        if !(0.0..=FRAC_PI_2).contains(&lo) || !(0.0..=FRAC_PI_2).contains(&hi) || lo >= hi {
            return err(format!("config key 'critical.bracket': need 0 <= lo < hi <= pi/2, got [{lo}, {hi}]"));
        }
        positive("critical.resolution", self.critical.resolution)?;
        positive("power.tol", self.power.tol)?;
        positive("vumps.tol", self.vumps.tol)?;
        positive("critical.vumps_tol", self.critical.vumps_tol)?;
        positive("finite.tol", self.finite.tol)?;
        if self.jobs == 0 {
            return err("config key 'jobs': must be at least 1");
        }
        if self.diagnostics.transfer_k < 2 {
            return err("config key 'diagnostics.transfer_k': must be at least 2");
        }
        self.finite.theta.values().map_err(|e| ConfigError(format!("config key 'finite.theta': {e}")))?;
        if self.finite.n.is_empty() || self.finite.n.iter().any(|&n| n < 2) {
            return err("config key 'finite.n': need a non-empty list of sizes >= 2");
        }
        check_chi_list("finite.chi", &[self.finite.chi])?;
        if !(0.0..=FRAC_PI_2).contains(&self.noise.theta) {
            return err(format!("config key 'noise.theta': {} is outside [0, pi/2]", self.noise.theta));
        }
        if !(self.noise.epsilon >= 0.0) {
            return err(format!("config key 'noise.epsilon': must be non-negative, got {}", self.noise.epsilon));
        }
        if self.noise.layers == 0 {
            return err("config key 'noise.layers': must be at least 1");
        }
        if self.noise.seeds.is_empty() {
            return err("config key 'noise.seeds': empty list");
        }
        check_chi_list("noise.chi", &[self.noise.chi])?;
        Ok(())
    }
}

fn positive(key: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        err(format!("config key '{key}': must be positive, got {x}"))
    }
}

fn check_chi_list(key: &str, chi: &[usize]) -> Result<(), ConfigError> {
    if chi.is_empty() {
        return err(format!("config key '{key}': empty bond-dimension list"));
    }
    if let Some(c) = chi.iter().find(|&&c| c == 0 || c > 512) {
        return err(format!("config key '{key}': bond dimension {c} outside 1..=512"));
    }
    Ok(())
}

fn parse_number(tok: &str) -> Result<f64, ConfigError> {
    match tok.trim() {
        "pi" => Ok(PI),
        "pi/2" => Ok(FRAC_PI_2),
        "pi/4" => Ok(PI / 4.0),
        t => t.parse::<f64>().map_err(|_| ConfigError(format!("'{t}' is not a number"))),
    }
}

/// Comma-separated list of values and inclusive `A:B:STEP` ranges.
pub fn parse_theta_expr(s: &str) -> Result<Vec<f64>, ConfigError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [x] => out.push(parse_number(x)?),
            [a, b, step] => {
                let (a, b, step) = (parse_number(a)?, parse_number(b)?, parse_number(step)?);
                if !(step > 0.0) || b < a {
                    return err(format!("range '{part}' needs A <= B and STEP > 0"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                if count > 1_000_000 {
                    return err(format!("range '{part}' has too many points"));
                }
                out.extend((0..=count).map(|i| a + i as f64 * step));
            }
            _ => return err(format!("'{part}' is neither a value nor A:B:STEP")),
        }
    }
    if out.is_empty() {
        return err("empty angle grid");
    }
    Ok(out)
}

/// Rounds to 12 decimals (so `0.1 * 3` prints as `0.3`), sorts, merges
/// duplicates and checks the range.
fn normalize_grid(raw: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
    let mut v: Vec<f64> = raw.into_iter().map(|t| if t.is_finite() { (t * 1e12).round() / 1e12 } else { t }).collect();
    if let Some(bad) = v.iter().find(|t| !(-1e-12..=FRAC_PI_2 + 1e-12).contains(*t)) {
        return err(format!("angle {bad} is outside [0, pi/2]"));
    }
    v.iter_mut().for_each(|t| *t = t.clamp(0.0, FRAC_PI_2));
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if v.is_empty() {
        return err("empty angle grid");
    }
    Ok(v)
}

pub fn parse_chi_list(s: &str) -> Result<Vec<usize>, ConfigError> {
    let v: Result<Vec<usize>, _> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(str::parse).collect();
    let v = v.map_err(|_| ConfigError(format!("--chi: '{s}' is not a comma-separated list of integers")))?;
    check_chi_list("--chi", &v)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
        let grid = Config::default().grid.theta.values().unwrap();
        assert_eq!(grid[0], 0.0);
        assert!(grid.contains(&1.3002));
        assert!(*grid.last().unwrap() < FRAC_PI_2);
    }

    #[test]
    fn range_includes_endpoint_and_rounds() {
        let v = ThetaSpec::Expr("0:1.55:0.05".into()).values().unwrap();
        assert_eq!(v.len(), 32);
        assert_eq!(v[3], 0.15);
        assert_eq!(*v.last().unwrap(), 1.55);
    }

    #[test]
    fn mixed_expression_is_sorted_and_deduplicated() {
        let v = ThetaSpec::Expr("1.2, 0:0.2:0.1, 0.1".into()).values().unwrap();
        assert_eq!(v, vec![0.0, 0.1, 0.2, 1.2]);
        assert_eq!(ThetaSpec::Expr("pi/2".into()).values().unwrap(), vec![FRAC_PI_2]);
    }

    #[test]
    fn bad_angles_are_rejected() {
        assert!(ThetaSpec::List(vec![2.0]).values().is_err());
        assert!(ThetaSpec::Expr("1:0:0.1".into()).values().is_err());
        assert!(ThetaSpec::Expr("a:b".into()).values().is_err());
        assert!(ThetaSpec::Expr("".into()).values().is_err());
    }

    #[test]
    fn unknown_nested_key_reports_full_path() {
        let e = Config::from_toml_str("[vumps]\ntol = 1e-8\nmax_iters = 3\n").unwrap_err();
        assert_eq!(e.0, "unknown config key 'vumps.max_iters'");
        let e = Config::from_toml_str("sed = 3\n").unwrap_err();
        assert_eq!(e.0, "unknown config key 'sed'");
    }

    #[test]
    fn type_errors_report_path() {
        let e = Config::from_toml_str("[grid]\nchi = [8, \"x\"]\n").unwrap_err();
        assert!(e.0.starts_with("config key 'grid.chi[1]'"), "{}", e.0);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = Config::from_toml_str("seed = 7\n[grid]\ntheta = [0.3, 1.2]\nsolver = \"both\"\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.grid.solver, SolverChoice::Both);
        assert_eq!(cfg.grid.chi, vec![32]);
        assert_eq!(cfg.power, PowerConfig::default());
    }

    #[test]
    fn empty_chi_is_a_config_error() {
        let e = Config::from_toml_str("[critical]\nchi = []\n").unwrap_err();
        assert!(e.0.contains("critical.chi"));
        assert!(parse_chi_list("").is_err());
        assert_eq!(parse_chi_list("8,16").unwrap(), vec![8, 16]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }
}
