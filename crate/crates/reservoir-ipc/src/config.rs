//! Run configuration: INI-style config files and named presets.
//!
//! The format is plain `key = value` lines under `[section]` headers, chosen
//! so configs diff cleanly and parse without a dependency. Unknown sections
//! or keys are rejected outright; every key has a default, so the empty file
//! is a valid config (the desk-scale analytic-model verification run).

use crate::esn::EsnConfig;
use crate::fit::{DEFAULT_ZERO_A_TOL, DEFAULT_ZERO_SLOPE_TOL};
use crate::harness::{ExperimentPlan, TaskSpec, DEFAULT_NARMA_WARMUP};
use crate::tasks::{LegendreTaskSpec, LegendreTerm, Narma10Params};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Default base seed of every preset.
pub const DEFAULT_SEED: u64 = 29;
/// Default chi-square tail probability for thresholds.
pub const DEFAULT_P_VALUE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("inconsistent config: {0}")]
    Inconsistent(String),
    #[error("unknown preset `{0}` (try simple-verify, legendre1, legendre15, narma10)")]
    UnknownPreset(String),
}

/// Which benchmark a run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Simple,
    Legendre,
    Narma10,
}

/// Full run configuration: experiment plan plus fit and output options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub reservoir: Option<EsnConfig>,
    pub fix_reservoir: bool,
    pub t_grid: Vec<u64>,
    pub ratio_num: u64,
    pub ratio_den: u64,
    pub trials: u64,
    pub washout: u64,
    pub seed: u64,
    pub threads: usize,
    /// Chi-square tail probability for the empirical-capacity threshold.
    pub p_value: f64,
    /// Readout parameter count for thresholds; `None` derives it from the
    /// task (hidden nodes for ESN tasks, 1 for the analytic model).
    pub dof: Option<u64>,
    pub a_tol: f64,
    pub slope_tol: f64,
    pub out_dir: PathBuf,
    /// Also emit a gnuplot script next to the plot data.
    pub gnuplot: bool,
}

impl RunConfig {
    /// Desk-scale defaults for a task kind. These are the preset bodies; the
    /// empty config file maps to `defaults(TaskKind::Simple)`.
    pub fn defaults(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Simple => RunConfig {
                task: TaskSpec::Simple,
                reservoir: None,
                fix_reservoir: false,
                t_grid: vec![200, 300, 400, 500, 600],
                ratio_num: 2,
                ratio_den: 1,
                trials: 10_000,
                washout: 50,
                seed: DEFAULT_SEED,
                threads: 0,
                p_value: DEFAULT_P_VALUE,
                dof: None,
                a_tol: DEFAULT_ZERO_A_TOL,
                slope_tol: DEFAULT_ZERO_SLOPE_TOL,
                out_dir: PathBuf::from("out"),
                gnuplot: false,
            },
            TaskKind::Legendre | TaskKind::Narma10 => RunConfig {
                task: match kind {
                    TaskKind::Legendre => TaskSpec::Legendre(
                        LegendreTaskSpec::new(vec![LegendreTerm {
                            delay: 1,
                            degree: 1,
                        }])
                        .expect("default term is valid"),
                    ),
                    _ => TaskSpec::Narma10 {
                        params: Narma10Params::default(),
                        warmup: DEFAULT_NARMA_WARMUP,
                    },
                },
                reservoir: Some(EsnConfig {
                    nodes: 50,
                    ..EsnConfig::default()
                }),
                // One realized reservoir per run: the capacity under study is
                // a property of that draw. Redrawing per trial buries the 1/T
                // variance decay under reservoir-to-reservoir scatter.
                fix_reservoir: true,
                t_grid: (1..=8).map(|i| 500 * i).collect(),
                ratio_num: 1,
                ratio_den: 1,
                trials: 100,
                washout: 500,
                seed: DEFAULT_SEED,
                threads: 0,
                p_value: DEFAULT_P_VALUE,
                dof: None,
                a_tol: DEFAULT_ZERO_A_TOL,
                slope_tol: DEFAULT_ZERO_SLOPE_TOL,
                out_dir: PathBuf::from("out"),
                gnuplot: false,
            },
        }
    }

    /// The experiment plan this config describes.
    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            task: self.task.clone(),
            reservoir: self.reservoir,
            t_grid: self.t_grid.clone(),
            ratio_num: self.ratio_num,
            ratio_den: self.ratio_den,
            trials: self.trials,
            washout: self.washout,
            base_seed: self.seed,
            threads: self.threads,
            fix_reservoir: self.fix_reservoir,
        }
    }

    /// Threshold degrees of freedom: explicit override or the task default.
    pub fn effective_dof(&self) -> u64 {
        self.dof.unwrap_or_else(|| self.plan().default_dof())
    }

    /// Parse a config file from disk.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_ini(&text)
    }

    /// Parse INI text. Unknown sections and keys are errors, not warnings.
    pub fn from_ini(text: &str) -> Result<Self, ConfigError> {
        let raw = RawIni::parse(text)?;
        raw.check_sections()?;

        let kind = match raw.get("task", "kind") {
            None => TaskKind::Simple,
            Some(v) => match v.as_str() {
                "simple" => TaskKind::Simple,
                "legendre" => TaskKind::Legendre,
                "narma10" => TaskKind::Narma10,
                other => {
                    return Err(ConfigError::BadValue {
                        key: "task.kind".into(),
                        message: format!("unknown task `{other}`"),
                    })
                }
            },
        };
        let mut config = Self::defaults(kind);

        // [task]
        for (key, value) in raw.section("task") {
            match (kind, key.as_str()) {
                (_, "kind") => {}
                (TaskKind::Legendre, "terms") => {
                    let terms = parse_terms(value)?;
                    config.task =
                        TaskSpec::Legendre(LegendreTaskSpec::new(terms).map_err(|e| {
                            ConfigError::BadValue {
                                key: "task.terms".into(),
                                message: e.to_string(),
                            }
                        })?);
                }
                (TaskKind::Narma10, "alpha" | "beta" | "gamma" | "delta" | "warmup") => {
                    if let TaskSpec::Narma10 { params, warmup } = &mut config.task {
                        match key.as_str() {
                            "alpha" => params.alpha = parse_num(key, value)?,
                            "beta" => params.beta = parse_num(key, value)?,
                            "gamma" => params.gamma = parse_num(key, value)?,
                            "delta" => params.delta = parse_num(key, value)?,
                            _ => *warmup = parse_num(key, value)?,
                        }
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        section: "task".into(),
                        key: key.clone(),
                    })
                }
            }
        }

        // [reservoir]
        let reservoir_keys = raw.section("reservoir");
        if kind == TaskKind::Simple {
            if !reservoir_keys.is_empty() {
                return Err(ConfigError::Inconsistent(
                    "the analytic model takes no [reservoir] section".into(),
                ));
            }
        } else {
            let cfg = config
                .reservoir
                .as_mut()
                .expect("ESN defaults carry a reservoir");
            for (key, value) in reservoir_keys {
                match key.as_str() {
                    "nodes" => cfg.nodes = parse_num(key, value)?,
                    "spectral_radius" => cfg.spectral_radius = parse_num(key, value)?,
                    "density" => cfg.density = parse_num(key, value)?,
                    "input_scale" => cfg.input_scale = parse_num(key, value)?,
                    "bias_scale" => cfg.bias_scale = parse_num(key, value)?,
                    "fix" => config.fix_reservoir = parse_bool(key, value)?,
                    _ => {
                        return Err(ConfigError::UnknownKey {
                            section: "reservoir".into(),
                            key: key.clone(),
                        })
                    }
                }
            }
        }

        // [experiment]
        for (key, value) in raw.section("experiment") {
            match key.as_str() {
                "t_grid" => config.t_grid = parse_grid(value)?,
                "ratio" => (config.ratio_num, config.ratio_den) = parse_ratio(value)?,
                "trials" => config.trials = parse_num(key, value)?,
                "washout" => config.washout = parse_num(key, value)?,
                "seed" => config.seed = parse_num(key, value)?,
                "threads" => config.threads = parse_num(key, value)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        section: "experiment".into(),
                        key: key.clone(),
                    })
                }
            }
        }

        // [fit]
        for (key, value) in raw.section("fit") {
            match key.as_str() {
                "p_value" => config.p_value = parse_num(key, value)?,
                "dof" => config.dof = Some(parse_num(key, value)?),
                "a_tol" => config.a_tol = parse_num(key, value)?,
                "slope_tol" => config.slope_tol = parse_num(key, value)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        section: "fit".into(),
                        key: key.clone(),
                    })
                }
            }
        }

        // [output]
        for (key, value) in raw.section("output") {
            match key.as_str() {
                "dir" => config.out_dir = PathBuf::from(value),
                "gnuplot" => config.gnuplot = parse_bool(key, value)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        section: "output".into(),
                        key: key.clone(),
                    })
                }
            }
        }

        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !self.p_value.is_finite() || self.p_value <= 0.0 || self.p_value >= 1.0 {
            return Err(ConfigError::BadValue {
                key: "fit.p_value".into(),
                message: "must lie strictly inside (0, 1)".into(),
            });
        }
        if !(self.a_tol.is_finite() && self.a_tol > 0.0)
            || !(self.slope_tol.is_finite() && self.slope_tol > 0.0)
        {
            return Err(ConfigError::BadValue {
                key: "fit.a_tol/slope_tol".into(),
                message: "zero-capacity thresholds must be positive".into(),
            });
        }
        self.plan()
            .validated()
            .map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        Ok(())
    }

    /// Canonical INI form: parsing the output reproduces this config.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[task]");
        match &self.task {
            TaskSpec::Simple => {
                let _ = writeln!(s, "kind = simple");
            }
            TaskSpec::Legendre(spec) => {
                let _ = writeln!(s, "kind = legendre");
                let terms: Vec<String> = spec
                    .terms()
                    .iter()
                    .map(|t| format!("{}:{}", t.delay, t.degree))
                    .collect();
                let _ = writeln!(s, "terms = {}", terms.join(","));
            }
            TaskSpec::Narma10 { params, warmup } => {
                let _ = writeln!(s, "kind = narma10");
                let _ = writeln!(s, "alpha = {}", params.alpha);
                let _ = writeln!(s, "beta = {}", params.beta);
                let _ = writeln!(s, "gamma = {}", params.gamma);
                let _ = writeln!(s, "delta = {}", params.delta);
                let _ = writeln!(s, "warmup = {warmup}");
            }
        }
        if let Some(cfg) = &self.reservoir {
            let _ = writeln!(s, "\n[reservoir]");
            let _ = writeln!(s, "nodes = {}", cfg.nodes);
            let _ = writeln!(s, "spectral_radius = {}", cfg.spectral_radius);
            let _ = writeln!(s, "density = {}", cfg.density);
            let _ = writeln!(s, "input_scale = {}", cfg.input_scale);
            let _ = writeln!(s, "bias_scale = {}", cfg.bias_scale);
            let _ = writeln!(s, "fix = {}", self.fix_reservoir);
        }
        let _ = writeln!(s, "\n[experiment]");
        let grid: Vec<String> = self.t_grid.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "t_grid = {}", grid.join(","));
        if self.ratio_den == 1 {
            let _ = writeln!(s, "ratio = {}", self.ratio_num);
        } else {
            let _ = writeln!(s, "ratio = {}/{}", self.ratio_num, self.ratio_den);
        }
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "washout = {}", self.washout);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "\n[fit]");
        let _ = writeln!(s, "p_value = {}", self.p_value);
        if let Some(dof) = self.dof {
            let _ = writeln!(s, "dof = {dof}");
        }
        let _ = writeln!(s, "a_tol = {}", self.a_tol);
        let _ = writeln!(s, "slope_tol = {}", self.slope_tol);
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.out_dir.display());
        let _ = writeln!(s, "gnuplot = {}", self.gnuplot);
        s
    }
}

/// Named parameter sets mirroring the benchmark experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Analytic one-node model, T = 200..600, T' = 2T.
    SimpleVerify,
    /// First-order Legendre delay task on an ESN.
    Legendre1,
    /// Fifteenth-order Legendre task at delay 5 (zero true capacity).
    Legendre15,
    /// NARMA10 benchmark on an ESN.
    Narma10,
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        match name {
            "simple-verify" => Ok(Preset::SimpleVerify),
            "legendre1" => Ok(Preset::Legendre1),
            "legendre15" => Ok(Preset::Legendre15),
            "narma10" => Ok(Preset::Narma10),
            other => Err(ConfigError::UnknownPreset(other.into())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::SimpleVerify => "simple-verify",
            Preset::Legendre1 => "legendre1",
            Preset::Legendre15 => "legendre15",
            Preset::Narma10 => "narma10",
        }
    }

    /// Materialize the preset. Desk scale keeps every run in the minutes
    /// range on a laptop; paper scale restores the published experiment
    /// sizes (hundred-node reservoir, ten times the trials, lengths to 10^4)
    /// and takes correspondingly longer.
    pub fn config(self, paper_scale: bool) -> RunConfig {
        let mut config = match self {
            Preset::SimpleVerify => RunConfig::defaults(TaskKind::Simple),
            Preset::Legendre1 => RunConfig::defaults(TaskKind::Legendre),
            Preset::Legendre15 => {
                let mut c = RunConfig::defaults(TaskKind::Legendre);
                c.task = TaskSpec::Legendre(
                    LegendreTaskSpec::new(vec![LegendreTerm {
                        delay: 5,
                        degree: 15,
                    }])
                    .expect("preset term is valid"),
                );
                c
            }
            Preset::Narma10 => RunConfig::defaults(TaskKind::Narma10),
        };
        if paper_scale {
            match self {
                Preset::SimpleVerify => config.trials = 100_000,
                _ => {
                    config.trials = 1000;
                    config.t_grid = (1..=10).map(|i| 1000 * i).collect();
                    if let Some(cfg) = &mut config.reservoir {
                        cfg.nodes = 100;
                    }
                }
            }
        }
        config
    }
}

struct RawIni {
    // section -> ordered key/value pairs
    sections: BTreeMap<String, Vec<(String, String)>>,
}

impl RawIni {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: idx + 1,
                    message: "unterminated section header".into(),
                })?;
                current = Some(name.trim().to_string());
                sections.entry(name.trim().to_string()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let section = current.clone().ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                message: "key outside any [section]".into(),
            })?;
            sections
                .entry(section)
                .or_default()
                .push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(Self { sections })
    }

    fn check_sections(&self) -> Result<(), ConfigError> {
        for name in self.sections.keys() {
            if !matches!(
                name.as_str(),
                "task" | "reservoir" | "experiment" | "fit" | "output"
            ) {
                return Err(ConfigError::UnknownSection(name.clone()));
            }
        }
        Ok(())
    }

    fn section(&self, name: &str) -> &[(String, String)] {
        self.sections.get(name).map_or(&[], Vec::as_slice)
    }

    fn get(&self, section: &str, key: &str) -> Option<&String> {
        self.section(section)
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        message: format!("{e}"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(ConfigError::BadValue {
            key: key.to_string(),
            message: format!("expected true/false, found `{other}`"),
        }),
    }
}

/// `1:1,2:2` -> delay:degree pairs.
fn parse_terms(value: &str) -> Result<Vec<LegendreTerm>, ConfigError> {
    value
        .split(',')
        .map(|part| {
            let (delay, degree) =
                part.trim()
                    .split_once(':')
                    .ok_or_else(|| ConfigError::BadValue {
                        key: "task.terms".into(),
                        message: format!("expected delay:degree, found `{part}`"),
                    })?;
            Ok(LegendreTerm {
                delay: parse_num("task.terms", delay.trim())?,
                degree: parse_num("task.terms", degree.trim())?,
            })
        })
        .collect()
}

/// Comma list `500,1000,...` or range `start:stop:step` (inclusive stop).
fn parse_grid(value: &str) -> Result<Vec<u64>, ConfigError> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(ConfigError::BadValue {
                key: "experiment.t_grid".into(),
                message: "range form is start:stop:step".into(),
            });
        }
        let start: u64 = parse_num("experiment.t_grid", parts[0].trim())?;
        let stop: u64 = parse_num("experiment.t_grid", parts[1].trim())?;
        let step: u64 = parse_num("experiment.t_grid", parts[2].trim())?;
        if step == 0 || stop < start {
            return Err(ConfigError::BadValue {
                key: "experiment.t_grid".into(),
                message: "need step > 0 and stop >= start".into(),
            });
        }
        Ok((start..=stop).step_by(step as usize).collect())
    } else {
        value
            .split(',')
            .map(|v| parse_num("experiment.t_grid", v.trim()))
            .collect()
    }
}

/// `2`, `1/2`, or `3/4` -> (numerator, denominator).
fn parse_ratio(value: &str) -> Result<(u64, u64), ConfigError> {
    if let Some((num, den)) = value.split_once('/') {
        Ok((
            parse_num("experiment.ratio", num.trim())?,
            parse_num("experiment.ratio", den.trim())?,
        ))
    } else {
        Ok((parse_num("experiment.ratio", value.trim())?, 1))
    }
}
