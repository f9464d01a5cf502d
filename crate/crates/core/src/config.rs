//! Flat `key=value` configuration files whose keys mirror command-line flags.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::tasks::TaskKind;
use crate::trainer::{Method, TrainConfig};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("key {key:?}: {message}")]
    Value { key: String, message: String },
}

pub type ConfigMap = BTreeMap<String, String>;

/// Keys understood by [`train_config_from_map`].
pub const TRAIN_KEYS: &[&str] = &[
    "task",
    "base",
    "digits",
    "board",
    "pieces",
    "method",
    "tau",
    "iters",
    "seed",
    "gate-every",
    "max-phase-iters",
    "lr",
    "init-scale",
    "separation",
    "sigma",
    "dim",
    "train-size",
    "val-size",
    "pool-size",
    "wall-time",
];

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<ConfigMap, ConfigError> {
    let mut map = ConfigMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |message: String| ConfigError::Syntax { line: i + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax("expected key=value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let valid = !key.is_empty()
            && key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_');
        if !valid {
            return Err(syntax(format!("invalid key {key:?}")));
        }
        if map.insert(key.to_owned(), value.to_owned()).is_some() {
            return Err(syntax(format!("duplicate key {key:?}")));
        }
    }
    Ok(map)
}

pub fn render_config(map: &ConfigMap) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn value<T: std::str::FromStr>(map: &ConfigMap, key: &str) -> Result<Option<T>, ConfigError> {
    map.get(key)
        .map(|v| {
            v.parse().map_err(|_| ConfigError::Value {
                key: key.to_owned(),
                message: format!("cannot parse {v:?}"),
            })
        })
        .transpose()
}

/// Builds a training configuration; absent keys take their defaults.
pub fn train_config_from_map(map: &ConfigMap) -> Result<TrainConfig, ConfigError> {
    if let Some(key) = map.keys().find(|k| !TRAIN_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(key.clone()));
    }
    let task = match map.get("task").map(String::as_str) {
        Some("addition") => TaskKind::Addition {
            base: value(map, "base")?.unwrap_or(10),
            digits: value(map, "digits")?.unwrap_or(1),
        },
        Some("chess") => TaskKind::Chess {
            board: value(map, "board")?.unwrap_or(8),
            pieces: value(map, "pieces")?.unwrap_or(3),
        },
        Some(other) => {
            return Err(ConfigError::Value {
                key: "task".into(),
                message: format!("unknown task {other:?}"),
            })
        }
        None => return Err(ConfigError::Missing("task")),
    };
    let method = match map.get("method") {
        Some(m) => m.parse::<Method>().map_err(|message| ConfigError::Value {
            key: "method".into(),
            message,
        })?,
        None => Method::Cabl,
    };
    let mut c = TrainConfig::new(task, method, value(map, "seed")?.unwrap_or(0));
    c.tau = match map.get("tau").map(String::as_str) {
        Some("none") => None,
        Some(_) => value(map, "tau")?,
        None => c.tau,
    };
    if let Some(iters) = value(map, "iters")? {
        c.max_iterations = iters;
    }
    c.max_phase_iterations = value(map, "max-phase-iters")?.unwrap_or(c.max_phase_iterations.min(c.max_iterations));
    c.gate_every = value(map, "gate-every")?.unwrap_or(c.gate_every.min(c.max_phase_iterations));
    c.learning_rate = value(map, "lr")?.unwrap_or(c.learning_rate);
    c.init_scale = value(map, "init-scale")?.unwrap_or(c.init_scale);
    c.record_wall_time = value(map, "wall-time")?.unwrap_or(false);
    let d = &mut c.dataset;
    d.separation = value(map, "separation")?.unwrap_or(d.separation);
    d.sigma = value(map, "sigma")?.unwrap_or(d.sigma);
    d.dim = value(map, "dim")?.unwrap_or(d.dim);
    d.train_size = value(map, "train-size")?.unwrap_or(d.train_size);
    d.val_size = value(map, "val-size")?.unwrap_or(d.val_size);
    d.pool_size = value(map, "pool-size")?.unwrap_or(d.pool_size);
    Ok(c)
}

/// Every effective setting, in a form [`train_config_from_map`] reads back.
pub fn train_config_to_map(c: &TrainConfig) -> ConfigMap {
    let mut map = ConfigMap::new();
    let mut put = |k: &str, v: String| {
        map.insert(k.to_owned(), v);
    };
    match c.task {
        TaskKind::Addition { base, digits } => {
            put("task", "addition".into());
            put("base", base.to_string());
            put("digits", digits.to_string());
        }
        TaskKind::Chess { board, pieces } => {
            put("task", "chess".into());
            put("board", board.to_string());
            put("pieces", pieces.to_string());
        }
    }
    put("method", c.method.to_string());
    put("tau", c.tau.map_or("none".into(), |t| t.to_string()));
    put("iters", c.max_iterations.to_string());
    put("seed", c.seed.to_string());
    put("gate-every", c.gate_every.to_string());
    put("max-phase-iters", c.max_phase_iterations.to_string());
    put("lr", c.learning_rate.to_string());
    put("init-scale", c.init_scale.to_string());
    put("separation", c.dataset.separation.to_string());
    put("sigma", c.dataset.sigma.to_string());
    put("dim", c.dataset.dim.to_string());
    put("train-size", c.dataset.train_size.to_string());
    put("val-size", c.dataset.val_size.to_string());
    put("pool-size", c.dataset.pool_size.to_string());
    put("wall-time", c.record_wall_time.to_string());
    map
}
