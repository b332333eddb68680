//! Run configuration file: flat `key = value` lines (TOML syntax) with a
//! mandatory `version`.

use serde::{Deserialize, Serialize};
use spillnet::layout::DegreeConvention;
use spillnet::RollingConfig;

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: Option<u32>,
    pub window_length: Option<usize>,
    pub lags: Option<usize>,
    pub horizon: Option<usize>,
    pub alpha: Option<f64>,
    pub folds: Option<usize>,
    pub layout_iterations: Option<usize>,
    pub lambda_count: Option<usize>,
    pub lambda_min_ratio: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub scaling: Option<f64>,
    pub edge_weight_influence: Option<u8>,
    pub tolerance: Option<f64>,
    pub adaptive_tolerance: Option<bool>,
    /// `published` (N), `neighbours` (N − 1) or an explicit integer.
    pub degrees: Option<String>,
}

pub fn parse_degrees(s: &str) -> CliResult<DegreeConvention> {
    match s.trim().to_ascii_lowercase().as_str() {
        "published" => Ok(DegreeConvention::Published),
        "neighbours" | "neighbors" => Ok(DegreeConvention::Neighbours),
        other => other.parse().map(DegreeConvention::Fixed).map_err(|_| {
            CliError::validation(format!(
                "degrees must be `published`, `neighbours` or an integer, got `{s}`"
            ))
        }),
    }
}

fn degrees_text(d: DegreeConvention) -> String {
    match d {
        DegreeConvention::Published => "published".into(),
        DegreeConvention::Neighbours => "neighbours".into(),
        DegreeConvention::Fixed(n) => n.to_string(),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| CliError::validation(format!("config file: {e}")))?;
        match file.version {
            Some(CONFIG_VERSION) => Ok(file),
            Some(v) => Err(CliError::validation(format!(
                "config version {v} is not supported (expected {CONFIG_VERSION})"
            ))),
            None => Err(CliError::validation("config file has no `version` key")),
        }
    }

    /// Overwrites the fields of `cfg` that are set here.
    pub fn apply(&self, cfg: &mut RollingConfig) -> CliResult<()> {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(
            window_length,
            lags,
            horizon,
            alpha,
            folds,
            layout_iterations,
            lambda_count,
            lambda_min_ratio,
            seed,
            scaling,
            edge_weight_influence,
            tolerance,
            adaptive_tolerance
        );
        if self.lambda.is_some() {
            cfg.lambda = self.lambda;
        }
        if let Some(d) = &self.degrees {
            cfg.degrees = parse_degrees(d)?;
        }
        Ok(())
    }

    pub fn from_config(cfg: &RollingConfig) -> Self {
        Self {
            version: Some(CONFIG_VERSION),
            window_length: Some(cfg.window_length),
            lags: Some(cfg.lags),
            horizon: Some(cfg.horizon),
            alpha: Some(cfg.alpha),
            folds: Some(cfg.folds),
            layout_iterations: Some(cfg.layout_iterations),
            lambda_count: Some(cfg.lambda_count),
            lambda_min_ratio: Some(cfg.lambda_min_ratio),
            lambda: cfg.lambda,
            seed: Some(cfg.seed),
            scaling: Some(cfg.scaling),
            edge_weight_influence: Some(cfg.edge_weight_influence),
            tolerance: Some(cfg.tolerance),
            adaptive_tolerance: Some(cfg.adaptive_tolerance),
            degrees: Some(degrees_text(cfg.degrees)),
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = ConfigFile::from_config(&RollingConfig::default()).to_text();
        assert!(text.starts_with("version = 1\n"));
        let mut cfg = RollingConfig {
            seed: 99,
            ..Default::default()
        };
        ConfigFile::parse(&text).unwrap().apply(&mut cfg).unwrap();
        assert_eq!(cfg, RollingConfig::default());
    }

    #[test]
    fn partial_file_overrides_only_its_keys() {
        let f = ConfigFile::parse("version = 1\nalpha = 0.9\ndegrees = \"neighbours\"\n").unwrap();
        let mut cfg = RollingConfig::default();
        f.apply(&mut cfg).unwrap();
        assert_eq!(cfg.alpha, 0.9);
        assert_eq!(cfg.degrees, DegreeConvention::Neighbours);
        assert_eq!(cfg.lags, 3);
    }

    #[test]
    fn rejects_missing_version_and_unknown_keys() {
        assert!(ConfigFile::parse("alpha = 0.5").is_err());
        assert!(ConfigFile::parse("version = 2").is_err());
        assert!(ConfigFile::parse("version = 1\nalfa = 0.5").is_err());
        assert!(parse_degrees("many").is_err());
        assert_eq!(parse_degrees("96").unwrap(), DegreeConvention::Fixed(96));
    }
}
