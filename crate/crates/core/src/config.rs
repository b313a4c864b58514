//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments and blank lines are ignored
//! threshold = 0.14
//! tap_threshold = 0.04
//! distance = euclidean        # or chebyshev
//! text_policy = lenient       # or strict
//! text_counts = true
//! scroll_mode = axis          # or strict
//! aggregation = mean          # or steps
//! workers = 4
//! seed = 0
//! ```

use std::path::Path;

use thiserror::Error;

use crate::matching::{AggregationMode, DistanceMetric, MatchConfig, ScrollMode, TextPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Values present in a config file. Unset keys stay `None`, so a file can be
/// layered between defaults and command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub threshold: Option<f64>,
    pub tap_threshold: Option<f64>,
    pub distance: Option<DistanceMetric>,
    pub text_policy: Option<TextPolicy>,
    pub text_counts: Option<bool>,
    pub scroll_mode: Option<ScrollMode>,
    pub aggregation: Option<AggregationMode>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

fn choice<T: Copy>(value: &str, options: &[(&str, T)]) -> Result<T, String> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            format!("`{value}` is not one of {}", names.join(", "))
        })
}

pub fn parse_distance(v: &str) -> Result<DistanceMetric, String> {
    choice(
        v,
        &[
            ("euclidean", DistanceMetric::Euclidean),
            ("chebyshev", DistanceMetric::Chebyshev),
        ],
    )
}

pub fn parse_text_policy(v: &str) -> Result<TextPolicy, String> {
    choice(
        v,
        &[
            ("lenient", TextPolicy::Lenient),
            ("strict", TextPolicy::Strict),
        ],
    )
}

pub fn parse_scroll_mode(v: &str) -> Result<ScrollMode, String> {
    choice(
        v,
        &[("axis", ScrollMode::Axis), ("strict", ScrollMode::Strict)],
    )
}

pub fn parse_aggregation(v: &str) -> Result<AggregationMode, String> {
    choice(
        v,
        &[
            ("mean", AggregationMode::Mean),
            ("steps", AggregationMode::Steps),
        ],
    )
}

fn number<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("`{v}` is not a valid number"))
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Parse {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let value = value.trim();
            match key.trim() {
                "threshold" => s.threshold = Some(number(value).map_err(err)?),
                "tap_threshold" => s.tap_threshold = Some(number(value).map_err(err)?),
                "distance" => s.distance = Some(parse_distance(value).map_err(err)?),
                "text_policy" => s.text_policy = Some(parse_text_policy(value).map_err(err)?),
                "text_counts" => {
                    s.text_counts = Some(
                        value
                            .parse()
                            .map_err(|_| err(format!("`{value}` is not true or false")))?,
                    )
                }
                "scroll_mode" => s.scroll_mode = Some(parse_scroll_mode(value).map_err(err)?),
                "aggregation" => s.aggregation = Some(parse_aggregation(value).map_err(err)?),
                "workers" => s.workers = Some(number(value).map_err(err)?),
                "seed" => s.seed = Some(number(value).map_err(err)?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Settings::parse(&text)
    }

    /// Values set in `other` win.
    pub fn overlay(self, other: Settings) -> Settings {
        Settings {
            threshold: other.threshold.or(self.threshold),
            tap_threshold: other.tap_threshold.or(self.tap_threshold),
            distance: other.distance.or(self.distance),
            text_policy: other.text_policy.or(self.text_policy),
            text_counts: other.text_counts.or(self.text_counts),
            scroll_mode: other.scroll_mode.or(self.scroll_mode),
            aggregation: other.aggregation.or(self.aggregation),
            workers: other.workers.or(self.workers),
            seed: other.seed.or(self.seed),
        }
    }

    pub fn match_config(&self) -> MatchConfig {
        let d = MatchConfig::default();
        MatchConfig {
            click_threshold: self.threshold.unwrap_or(d.click_threshold),
            tap_threshold: self.tap_threshold.unwrap_or(d.tap_threshold),
            distance: self.distance.unwrap_or(d.distance),
            text_policy: self.text_policy.unwrap_or(d.text_policy),
            scroll_mode: self.scroll_mode.unwrap_or(d.scroll_mode),
            aggregation: self.aggregation.unwrap_or(d.aggregation),
            text_counts: self.text_counts.unwrap_or(d.text_counts),
        }
    }
}
