use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::SplitRatios;
use crate::error::{KwsError, Result};
use crate::mfcc::MfccConfig;
use crate::tm::TMHyperparams;

/// Named keyword sets.
pub const PRESETS: &[(&str, &[&str])] = &[
    ("baseline3", &["yes", "no", "stop"]),
    ("baseline4", &["yes", "no", "stop", "seven"]),
    ("similar4", &["yes", "no", "stop", "go"]),
    (
        "nine",
        &["yes", "no", "stop", "seven", "zero", "nine", "five", "one", "two"],
    ),
];

/// Expands a preset name, or splits a `,`/`+` separated keyword list.
pub fn resolve_keywords(spec: &str) -> Vec<String> {
    if let Some((_, words)) = PRESETS.iter().find(|(name, _)| *name == spec) {
        return words.iter().map(|w| w.to_string()).collect();
    }
    spec.split([',', '+'])
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    WindowLengthS,
    WindowStepS,
    NBins,
    Keywords,
    ClausesPerClass,
    #[serde(rename = "T")]
    Threshold,
    S,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::WindowLengthS => "window_length_s",
            SweepParam::WindowStepS => "window_step_s",
            SweepParam::NBins => "n_bins",
            SweepParam::Keywords => "keywords",
            SweepParam::ClausesPerClass => "clauses_per_class",
            SweepParam::Threshold => "T",
            SweepParam::S => "s",
        }
    }

    /// Whether changing this parameter invalidates the feature cache.
    pub fn affects_features(self) -> bool {
        matches!(
            self,
            SweepParam::WindowLengthS | SweepParam::WindowStepS | SweepParam::NBins | SweepParam::Keywords
        )
    }
}

impl std::str::FromStr for SweepParam {
    type Err = KwsError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "window_length_s" | "window-length-s" => SweepParam::WindowLengthS,
            "window_step_s" | "window-step-s" => SweepParam::WindowStepS,
            "n_bins" | "n-bins" => SweepParam::NBins,
            "keywords" => SweepParam::Keywords,
            "clauses_per_class" | "clauses-per-class" => SweepParam::ClausesPerClass,
            "T" | "threshold" => SweepParam::Threshold,
            "s" | "s-param" | "s_param" => SweepParam::S,
            other => return Err(KwsError::InvalidConfig(format!("unknown sweep parameter `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus_root: PathBuf,
    pub keywords: Vec<String>,
    pub mfcc: MfccConfig,
    pub n_bins: usize,
    pub hyperparams: TMHyperparams,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    pub output_dir: PathBuf,
    /// Shared feature cache; defaults to `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub split_ratios: SplitRatios,
    /// Run sweep points concurrently.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus_root: PathBuf::from("speech_commands"),
            keywords: resolve_keywords("baseline4"),
            // 40 ms windows every 30 ms: 33 frames x 13 coefficients per 1 s clip
            mfcc: MfccConfig {
                window_length_s: 0.04,
                window_step_s: 0.03,
                fft_size: 1024,
                ..MfccConfig::default()
            },
            n_bins: 2,
            hyperparams: TMHyperparams::default(),
            sweep: None,
            output_dir: PathBuf::from("runs/default"),
            cache_dir: None,
            split_ratios: SplitRatios::default(),
            parallel: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| KwsError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| KwsError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| KwsError::Parse(e.to_string()))?;
        fs::write(path, text).map_err(|e| KwsError::io(path, e))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.keywords.is_empty() {
            return Err(KwsError::InvalidConfig("no keywords configured".into()));
        }
        if self.n_bins < 2 {
            return Err(KwsError::InvalidConfig(format!(
                "n_bins must be >= 2, got {}",
                self.n_bins
            )));
        }
        self.mfcc.validate()?;
        self.hyperparams.validate()
    }

    /// Copy of this config with one sweep value applied. Window changes also
    /// grow `fft_size` when the new window no longer fits.
    pub fn with_sweep_value(&self, param: SweepParam, value: &str) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.sweep = None;
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| KwsError::InvalidConfig(format!("`{value}` is not a number for {}", param.name())))
        };
        let int = || {
            value
                .parse::<usize>()
                .map_err(|_| KwsError::InvalidConfig(format!("`{value}` is not an integer for {}", param.name())))
        };
        match param {
            SweepParam::WindowLengthS => {
                cfg.mfcc.window_length_s = num()?;
                cfg.mfcc = cfg.mfcc.with_fitting_fft();
            }
            SweepParam::WindowStepS => cfg.mfcc.window_step_s = num()?,
            SweepParam::NBins => cfg.n_bins = int()?,
            SweepParam::Keywords => {
                cfg.keywords = match value.parse::<usize>() {
                    Ok(n) if n >= 1 && n <= self.keywords.len() => self.keywords[..n].to_vec(),
                    Ok(n) => {
                        return Err(KwsError::InvalidConfig(format!(
                            "cannot take {n} of {} configured keywords",
                            self.keywords.len()
                        )))
                    }
                    Err(_) => resolve_keywords(value),
                }
            }
            SweepParam::ClausesPerClass => cfg.hyperparams.clauses_per_class = int()?,
            SweepParam::Threshold => {
                cfg.hyperparams.threshold = value
                    .parse()
                    .map_err(|_| KwsError::InvalidConfig(format!("`{value}` is not a valid T")))?
            }
            SweepParam::S => cfg.hyperparams.s = num()?,
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_and_lists() {
        assert_eq!(resolve_keywords("baseline3"), ["yes", "no", "stop"]);
        assert_eq!(resolve_keywords("similar4")[3], "go");
        assert_eq!(resolve_keywords("nine").len(), 9);
        assert!(!resolve_keywords("nine").contains(&"go".to_string()));
        assert_eq!(resolve_keywords("yes+no, stop"), ["yes", "no", "stop"]);
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.mfcc.frame_len(), 640);
    }

    #[test]
    fn sweep_values_apply() {
        let cfg = ExperimentConfig::default();
        let longer = cfg.with_sweep_value(SweepParam::WindowLengthS, "0.1").unwrap();
        assert_eq!(longer.mfcc.fft_size, 2048);
        longer.validate().unwrap();
        let two = cfg.with_sweep_value(SweepParam::Keywords, "2").unwrap();
        assert_eq!(two.keywords, ["yes", "no"]);
        assert!(cfg.with_sweep_value(SweepParam::Keywords, "7").is_err());
        assert_eq!(
            cfg.with_sweep_value(SweepParam::Threshold, "2")
                .unwrap()
                .hyperparams
                .threshold,
            2
        );
        assert!(cfg.with_sweep_value(SweepParam::NBins, "x").is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ExperimentConfig {
            sweep: Some(SweepSpec {
                parameter: SweepParam::Threshold,
                values: vec!["2".into(), "23".into()],
            }),
            ..ExperimentConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"T\""));
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    }
}
