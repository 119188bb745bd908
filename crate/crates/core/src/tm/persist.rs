//! JSON model envelope.
//!
//! ```text
//! { format_version, keywords[], hyperparams{s,T,N,m,epochs,seed},
//!   feature_meta{F, n_bins, boundaries}, ta_states }
//! ```
//!
//! `ta_states` is base64 of one byte per automaton holding `value - 1`,
//! class-major, then clause, then literal.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::booleanizer::QuantileEncoder;
use crate::error::{KwsError, Result};

use super::bank::ClauseBank;
use super::machine::TsetlinMachine;
use super::TMHyperparams;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained machine with the vocabulary and encoder it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct KwsModel {
    pub keywords: Vec<String>,
    pub machine: TsetlinMachine,
    pub encoder: Option<QuantileEncoder>,
}

#[derive(Serialize, Deserialize)]
struct FeatureMeta {
    #[serde(rename = "F")]
    n_features: usize,
    n_bins: Option<usize>,
    boundaries: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    keywords: Vec<String>,
    hyperparams: TMHyperparams,
    feature_meta: FeatureMeta,
    ta_states: String,
}

impl KwsModel {
    pub fn to_json(&self) -> Result<String> {
        let bank = self.machine.bank();
        if bank.n_classes() != self.keywords.len() {
            return Err(KwsError::ModelDataMismatch(format!(
                "{} keywords for {} classes",
                self.keywords.len(),
                bank.n_classes()
            )));
        }
        let bytes: Vec<u8> = bank.states().iter().map(|&v| (v - 1) as u8).collect();
        let envelope = Envelope {
            format_version: MODEL_FORMAT_VERSION,
            keywords: self.keywords.clone(),
            hyperparams: *self.machine.hyperparams(),
            feature_meta: FeatureMeta {
                n_features: bank.n_features(),
                n_bins: self.encoder.as_ref().map(|e| e.n_bins),
                boundaries: self.encoder.as_ref().map(|e| e.boundaries.clone()),
            },
            ta_states: STANDARD.encode(bytes),
        };
        serde_json::to_string_pretty(&envelope).map_err(|e| KwsError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| KwsError::Parse(format!("model file: {e}")))?;
        let version = raw
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| KwsError::Parse("model file lacks format_version".into()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(KwsError::ModelVersion(version.min(u32::MAX as u64) as u32));
        }
        let env: Envelope = serde_json::from_value(raw).map_err(|e| KwsError::Parse(format!("model file: {e}")))?;

        let bytes = STANDARD
            .decode(env.ta_states.as_bytes())
            .map_err(|e| KwsError::Parse(format!("ta_states: {e}")))?;
        let hyper = env.hyperparams;
        hyper
            .validate()
            .map_err(|e| KwsError::Parse(format!("hyperparams: {e}")))?;
        let states = bytes.into_iter().map(|b| b as u16 + 1).collect();
        let bank = ClauseBank::from_states(
            env.keywords.len(),
            hyper.clauses_per_class,
            env.feature_meta.n_features,
            hyper.states_per_action,
            states,
        )
        .map_err(|e| KwsError::Parse(format!("ta_states: {e}")))?;

        let encoder = match (env.feature_meta.n_bins, env.feature_meta.boundaries) {
            (Some(n_bins), Some(boundaries)) => {
                let enc = QuantileEncoder {
                    n_bins,
                    n_features: boundaries.len(),
                    boundaries,
                };
                if enc.total_booleans() != env.feature_meta.n_features {
                    return Err(KwsError::Parse("encoder width disagrees with F".into()));
                }
                Some(enc)
            }
            _ => None,
        };

        Ok(KwsModel {
            keywords: env.keywords,
            machine: TsetlinMachine::from_bank(bank, hyper)?,
            encoder,
        })
    }
}

pub fn save_model(model: &KwsModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_json()?).map_err(|e| KwsError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<KwsModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| KwsError::io(path, e))?;
    KwsModel::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tm::TAState;

    fn model() -> KwsModel {
        let hyper = TMHyperparams {
            clauses_per_class: 4,
            states_per_action: 128,
            ..TMHyperparams::default()
        };
        let mut machine = TsetlinMachine::new(2, 3, hyper).unwrap();
        machine.bank_mut().set_state(1, 2, 5, TAState::new(256, 128).unwrap());
        machine.bank_mut().set_state(0, 0, 0, TAState::new(1, 128).unwrap());
        KwsModel {
            keywords: vec!["yes".into(), "no".into()],
            machine,
            encoder: None,
        }
    }

    #[test]
    fn round_trip_at_full_byte_range() {
        let m = model();
        assert_eq!(KwsModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn version_and_corruption() {
        let text = model().to_json().unwrap();
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 999");
        assert!(matches!(KwsModel::from_json(&bumped), Err(KwsError::ModelVersion(999))));
        assert!(matches!(
            KwsModel::from_json(&text[..text.len() / 2]),
            Err(KwsError::Parse(_))
        ));
    }

    #[test]
    fn wrong_state_count_is_parse_error() {
        let text = model().to_json().unwrap();
        let short = text.replace("\"m\": 4", "\"m\": 6");
        assert!(matches!(KwsModel::from_json(&short), Err(KwsError::Parse(_))));
    }
}
