//! Keyword spotting with a Tsetlin Machine.
//!
//! Raw PCM16 WAV clips are turned into MFCC matrices, flattened, quantile
//! Booleanized and classified by a multiclass Tsetlin Machine. The
//! [`harness`] module drives the whole pipeline over a speech-commands style
//! corpus and runs parameter sweeps.

pub mod audio;
pub mod booleanizer;
pub mod error;
pub mod harness;
pub mod mfcc;
pub mod tm;

pub use audio::{AudioClip, DatasetSplit, Partition, SplitRatios};
pub use booleanizer::{BooleanFeatureVector, QuantileEncoder};
pub use error::{KwsError, Result};
pub use mfcc::{MfccConfig, MfccMatrix};
pub use tm::{OpCounters, TMHyperparams, TsetlinMachine};
