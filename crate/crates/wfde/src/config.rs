//! Flat, typed key-value experiment configs with dotted sections.
//!
//! Unknown keys are errors — physics parameters never default silently.
//! Example:
//!
//! ```text
//! params.d = 3
//! params.gamma = 0.0
//! params.beta = 0.0
//! params.m = 0.6666666666666666
//! grid.r_min = 1e-2
//! grid.r_max = 1e4
//! grid.cells_per_decade = 24
//! initial.profile = barenblatt
//! initial.t_shift = 1.0
//! time.t0 = 0.1
//! time.t_end = 10.0
//! time.outputs = 16
//! checks = mass, sandwich-empirical
//! output.dir = out/run1
//! ```

use crate::params::{validate_parameters, ParameterSet};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config key `{0}`: {1}")]
    Key(String, String),
    #[error("missing required config key `{0}`")]
    Missing(String),
    #[error("unknown config key `{0}`")]
    Unknown(String),
    #[error("unknown check name `{0}`")]
    UnknownCheck(String),
    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad config line {line}: `{text}` (expected `key = value`)")]
    Line { line: usize, text: String },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub cells_per_decade: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum InitialConfig {
    Barenblatt { mass: Option<f64>, t_shift: f64 },
    Indicator { radius: f64 },
    W0,
    Subsolution { a: f64, b: f64, epsilon: f64, t0: f64 },
    Supersolution { e: f64, f: f64, epsilon: f64, t0: f64, h: Option<f64> },
    /// Perturbed Barenblatt: 𝔅(t_shift) · (1 + amplitude · log-Gaussian bump).
    PerturbedBarenblatt { mass: Option<f64>, t_shift: f64, amplitude: f64, bump_center: f64, bump_width: f64 },
    /// Slow-decay datum A/(1+B|x|²)^α with unit mass, α = 1/(1-m) - ε/2;
    /// ε either given directly or derived from a target rate gap δ.
    SlowDecay { epsilon: Option<f64>, delta: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeSpacing {
    Linear,
    Log,
    /// Uniform in the self-similar time ln(1 + t).
    Tau,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeConfig {
    pub t0: f64,
    pub t_end: f64,
    pub outputs: usize,
    pub spacing: TimeSpacing,
    /// Accuracy cap dt <= dt_rel_cap * (t + t0) for the implicit stepper.
    pub dt_rel_cap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOptions {
    pub urec_threshold: f64,
    pub cone_upsilon: f64,
    pub cone_threshold: f64,
    pub tail_exponent_target: Option<f64>,
    pub tail_exponent_tol: f64,
    pub rates_window: Option<(f64, f64)>,
    pub rates_slope_range: (f64, f64),
    pub no_rates_delta: f64,
    pub entropy_window: Option<(f64, f64)>,
    pub mass_rtol: f64,
    /// Relative floor zeroing vacuum-artifact dust before snapshot
    /// classification; 0 disables (for everywhere-positive data).
    pub classify_floor_rel: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            urec_threshold: 0.05,
            cone_upsilon: 1.0,
            cone_threshold: 0.05,
            tail_exponent_target: None,
            tail_exponent_tol: 0.1,
            rates_window: None,
            rates_slope_range: (-1.1, -0.9),
            no_rates_delta: 0.5,
            entropy_window: None,
            mass_rtol: 1e-6,
            classify_floor_rel: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KappaConfig {
    pub star: f64,
    pub bar1: f64,
    pub bar2: f64,
    pub under1: f64,
    pub under: f64,
    pub calibrate: bool,
}

impl Default for KappaConfig {
    fn default() -> Self {
        KappaConfig { star: 1.0, bar1: 1.0, bar2: 1.0, under1: 1.0, under: 1.0, calibrate: false }
    }
}

pub const KNOWN_CHECKS: &[&str] = &[
    "mass",
    "positivity",
    "benilan-crandall",
    "smoothing",
    "sandwich-empirical",
    "sandwich-analytic",
    "urec",
    "cone-error",
    "classify-invariance",
    "tail-exponent",
    "rates",
    "entropy",
    "xnorm-flow",
    "no-rates",
    "harnack-cone",
    "harnack-boundary",
    "outer-mass",
    "tail-limits",
];

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub params: ParameterSet,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    pub checks: Vec<String>,
    pub output_dir: String,
    pub format: OutputFormat,
    pub options: CheckOptions,
    pub kappa: KappaConfig,
    pub seed: u64,
}

/// Raw `key = value` map with consumption tracking.
struct RawMap {
    map: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl RawMap {
    fn take(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.map.get(key).cloned()
    }
    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::Key(key.into(), format!("cannot parse `{s}`"))),
        }
    }
    fn require<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        self.parse(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }
    fn leftovers(&self) -> Vec<String> {
        self.map.keys().filter(|k| !self.used.contains(*k)).cloned().collect()
    }
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Line { line: ln + 1, text: raw.to_string() })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut raw = RawMap { map, used: Default::default() };

    let d: i64 = raw.require("params.d")?;
    let gamma: f64 = raw.require("params.gamma")?;
    let beta: f64 = raw.require("params.beta")?;
    let m: f64 = raw.require("params.m")?;
    let params = validate_parameters(d, gamma, beta, m)
        .map_err(|e| ConfigError::Key("params".into(), e.to_string()))?;

    let grid = GridConfig {
        r_min: raw.require("grid.r_min")?,
        r_max: raw.require("grid.r_max")?,
        cells_per_decade: raw.require("grid.cells_per_decade")?,
    };

    let profile: String = raw.require("initial.profile")?;
    let initial = match profile.as_str() {
        "barenblatt" => InitialConfig::Barenblatt {
            mass: raw.parse("initial.mass")?,
            t_shift: raw.parse("initial.t_shift")?.unwrap_or(1.0),
        },
        "indicator" => InitialConfig::Indicator { radius: raw.parse("initial.radius")?.unwrap_or(1.0) },
        "w0" => InitialConfig::W0,
        "subsolution" => InitialConfig::Subsolution {
            a: raw.parse("initial.a")?.unwrap_or(1.0),
            b: raw.parse("initial.b")?.unwrap_or(1.0),
            epsilon: raw.require("initial.epsilon")?,
            t0: raw.parse("initial.t0")?.unwrap_or(1.0),
        },
        "supersolution" => InitialConfig::Supersolution {
            e: raw.parse("initial.e")?.unwrap_or(1.0),
            f: raw.parse("initial.f")?.unwrap_or(1.0),
            epsilon: raw.require("initial.epsilon")?,
            t0: raw.parse("initial.t0")?.unwrap_or(1.0),
            h: raw.parse("initial.h")?,
        },
        "perturbed-barenblatt" => InitialConfig::PerturbedBarenblatt {
            mass: raw.parse("initial.mass")?,
            t_shift: raw.parse("initial.t_shift")?.unwrap_or(1.0),
            amplitude: raw.parse("initial.amplitude")?.unwrap_or(0.25),
            bump_center: raw.parse("initial.bump_center")?.unwrap_or(2.0),
            bump_width: raw.parse("initial.bump_width")?.unwrap_or(0.5),
        },
        "slow-decay" => InitialConfig::SlowDecay {
            epsilon: raw.parse("initial.epsilon")?,
            delta: raw.parse("initial.delta")?,
        },
        other => return Err(ConfigError::Key("initial.profile".into(), format!("unknown profile `{other}`"))),
    };

    let spacing = match raw.take("time.spacing").as_deref() {
        None => {
            if raw.parse::<bool>("time.log_spaced")?.unwrap_or(true) {
                TimeSpacing::Log
            } else {
                TimeSpacing::Linear
            }
        }
        Some("log") => TimeSpacing::Log,
        Some("linear") => TimeSpacing::Linear,
        Some("tau") => TimeSpacing::Tau,
        Some(other) => {
            return Err(ConfigError::Key("time.spacing".into(), format!("unknown spacing `{other}`")))
        }
    };
    let time = TimeConfig {
        t0: raw.require("time.t0")?,
        t_end: raw.require("time.t_end")?,
        outputs: raw.parse("time.outputs")?.unwrap_or(24),
        spacing,
        dt_rel_cap: raw.parse("time.dt_rel_cap")?.unwrap_or(1e-3),
    };
    if !(time.t0 > 0.0 && time.t_end > time.t0) {
        return Err(ConfigError::Key("time".into(), "need 0 < t0 < t_end".into()));
    }

    let checks: Vec<String> = raw
        .take("checks")
        .map(|s| {
            s.split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect()
        })
        .unwrap_or_default();
    for c in &checks {
        if !KNOWN_CHECKS.contains(&c.as_str()) {
            return Err(ConfigError::UnknownCheck(c.clone()));
        }
    }

    let defaults = CheckOptions::default();
    let rates_window = match (raw.parse::<f64>("rates.t_lo")?, raw.parse::<f64>("rates.t_hi")?) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(ConfigError::Key("rates.t_lo".into(), "both or neither of rates.t_lo/t_hi".into())),
    };
    let entropy_window =
        match (raw.parse::<f64>("entropy.window_lo")?, raw.parse::<f64>("entropy.window_hi")?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => {
                return Err(ConfigError::Key(
                    "entropy.window_lo".into(),
                    "both or neither of entropy.window_lo/hi".into(),
                ))
            }
        };
    let options = CheckOptions {
        urec_threshold: raw.parse("urec.threshold")?.unwrap_or(defaults.urec_threshold),
        cone_upsilon: raw.parse("cone.upsilon")?.unwrap_or(defaults.cone_upsilon),
        cone_threshold: raw.parse("cone.threshold")?.unwrap_or(defaults.cone_threshold),
        tail_exponent_target: raw.parse("tail-exponent.target")?,
        tail_exponent_tol: raw.parse("tail-exponent.tol")?.unwrap_or(defaults.tail_exponent_tol),
        rates_window,
        rates_slope_range: (
            raw.parse("rates.slope_lo")?.unwrap_or(defaults.rates_slope_range.0),
            raw.parse("rates.slope_hi")?.unwrap_or(defaults.rates_slope_range.1),
        ),
        no_rates_delta: raw.parse("no-rates.delta")?.unwrap_or(defaults.no_rates_delta),
        entropy_window,
        mass_rtol: raw.parse("mass.rtol")?.unwrap_or(defaults.mass_rtol),
        classify_floor_rel: raw
            .parse("classify.floor_rel")?
            .unwrap_or(defaults.classify_floor_rel),
    };

    let kappa = KappaConfig {
        star: raw.parse("kappa.star")?.unwrap_or(1.0),
        bar1: raw.parse("kappa.bar1")?.unwrap_or(1.0),
        bar2: raw.parse("kappa.bar2")?.unwrap_or(1.0),
        under1: raw.parse("kappa.under1")?.unwrap_or(1.0),
        under: raw.parse("kappa.under")?.unwrap_or(1.0),
        calibrate: raw.parse("kappa.calibrate")?.unwrap_or(false),
    };

    let output_dir = raw.take("output.dir").unwrap_or_else(|| "out".into());
    let format = match raw.take("output.format").as_deref() {
        None | Some("both") => OutputFormat::Both,
        Some("csv") => OutputFormat::Csv,
        Some("json") => OutputFormat::Json,
        Some(other) => {
            return Err(ConfigError::Key("output.format".into(), format!("unknown format `{other}`")))
        }
    };
    let seed: u64 = raw.parse("seed")?.unwrap_or(0);

    let leftovers = raw.leftovers();
    if let Some(k) = leftovers.first() {
        return Err(ConfigError::Unknown(k.clone()));
    }

    Ok(ExperimentConfig {
        params,
        grid,
        initial,
        time,
        checks,
        output_dir,
        format,
        options,
        kappa,
        seed,
    })
}

pub fn parse_config_file(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

impl ExperimentConfig {
    /// Requested output times spaced per `time.spacing` on [t0, t_end].
    pub fn output_times(&self) -> Vec<f64> {
        let n = self.time.outputs.max(2);
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                match self.time.spacing {
                    TimeSpacing::Log => self.time.t0 * (self.time.t_end / self.time.t0).powf(s),
                    TimeSpacing::Linear => self.time.t0 + s * (self.time.t_end - self.time.t0),
                    TimeSpacing::Tau => {
                        (1.0 + self.time.t0)
                            * ((1.0 + self.time.t_end) / (1.0 + self.time.t0)).powf(s)
                            - 1.0
                    }
                }
            })
            .collect()
    }

    /// Apply a `--sweep` style override `key = value` returning the new
    /// config (re-parses the merged map so validation reruns).
    pub fn with_override(&self, source: &str, key: &str, value: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut out = String::new();
        let mut replaced = false;
        for line in source.lines() {
            let stripped = line.split('#').next().unwrap_or("").trim();
            if let Some((k, _)) = stripped.split_once('=') {
                if k.trim() == key {
                    out.push_str(&format!("{key} = {value}\n"));
                    replaced = true;
                    continue;
                }
            }
            out.push_str(line);
            out.push('\n');
        }
        if !replaced {
            out.push_str(&format!("{key} = {value}\n"));
        }
        parse_config_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
params.d = 3
params.gamma = 0.0
params.beta = 0.0
params.m = 0.6666666666666666
grid.r_min = 1e-2
grid.r_max = 1e3
grid.cells_per_decade = 16
initial.profile = barenblatt
initial.t_shift = 1.0
time.t0 = 0.1
time.t_end = 2.0
time.outputs = 6
checks = mass, positivity
"#;

    #[test]
    fn parses_base_config() {
        let cfg = parse_config_str(BASE).unwrap();
        assert_eq!(cfg.params.d(), 3);
        assert_eq!(cfg.checks, vec!["mass", "positivity"]);
        let times = cfg.output_times();
        assert_eq!(times.len(), 6);
        assert!((times[0] - 0.1).abs() < 1e-12 && (times[5] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_is_error() {
        let text = format!("{BASE}\nnot.a.key = 1\n");
        assert!(matches!(parse_config_str(&text), Err(ConfigError::Unknown(_))));
    }

    #[test]
    fn unknown_check_is_error() {
        let text = BASE.replace("checks = mass, positivity", "checks = masss");
        match parse_config_str(&text) {
            Err(ConfigError::UnknownCheck(name)) => assert_eq!(name, "masss"),
            other => panic!("expected UnknownCheck, got {other:?}"),
        }
    }

    #[test]
    fn invalid_regime_is_error() {
        let text = BASE.replace("params.m = 0.6666666666666666", "params.m = 0.2");
        assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn override_replaces_key() {
        let cfg = parse_config_str(BASE).unwrap();
        let swept = cfg.with_override(BASE, "grid.cells_per_decade", "32").unwrap();
        assert_eq!(swept.grid.cells_per_decade, 32);
    }
}
