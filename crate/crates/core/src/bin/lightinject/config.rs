//! Flat `key = value` scenario files.
//!
//! Blank lines and `#` comments are ignored. Numeric values accept a single
//! number, a comma list (`0,1,3`) or an inclusive range (`0:6:0.1`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use lightinject::analysis::grid;

pub const KEYS: &[&str] = &[
    "link_loss_db",
    "total_loss_db",
    "delta_loss_db",
    "detector_efficiency",
    "y0",
    "e_d",
    "e0",
    "f_e",
    "mu_min",
    "mu_max",
    "nu1_min",
    "nu1_max",
    "coarse_grid",
    "refine_iterations",
    "workers",
    "out",
    "data",
    "sample",
    "injected_uw",
    "isolator_db",
    "filter_db",
    "extra_isolation_db",
    "isolator_degradation_db",
    "monitor_threshold_uw",
    "monitor_noise_floor_uw",
    "monitor_position",
    "budget_db",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: None,
            message: message.into(),
        }
    }

    fn at(line: usize, key: Option<&str>, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            key: key.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Raw values with the line each came from (0 for command-line overrides).
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, None, "expected key = value"))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::at(line, Some(key), "unknown key"));
            }
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError::at(line, Some(key), "empty value"));
            }
            if values
                .insert(key.to_string(), (line, value.to_string()))
                .is_some()
            {
                return Err(ConfigError::at(line, Some(key), "duplicate key"));
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        Config::parse(&text).map_err(|mut e| {
            e.message = format!("{}: {}", path.display(), e.message);
            e
        })
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.values.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.values.get(key).map(|v| v.0).filter(|&l| l > 0);
        ConfigError {
            line,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|v| v.1.as_str())
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.text(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(key, format!("not a number: {v:?}")))
            })
            .transpose()
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    pub fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.text(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| self.err(key, format!("not a non-negative integer: {v:?}")))
            })
            .transpose()
    }

    /// A number, comma list or `start:stop:step` range.
    pub fn values(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.text(key) else {
            return Ok(None);
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| self.err(key, format!("not a number: {:?}", s.trim())))
        };
        let parts: Vec<&str> = v.split(':').collect();
        let out = match parts.as_slice() {
            [single] => single.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
            [a, b, c] => {
                grid(num(a)?, num(b)?, num(c)?).map_err(|e| self.err(key, e.to_string()))?
            }
            _ => return Err(self.err(key, "expected a value, a list or start:stop:step")),
        };
        Ok(Some(out))
    }
}
