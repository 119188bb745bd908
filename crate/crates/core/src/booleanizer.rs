//! Quantile Booleanization of real-valued features.
//!
//! Each feature column gets `B - 1` nearest-rank quantile boundaries fitted on
//! training data. A value is mapped to the number of boundaries strictly below
//! it, and that bin index is written big-endian in `ceil(log2(B))` bits.

use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};
use crate::mfcc::MfccMatrix;

/// Bits needed to binary-code a bin index in `0..n_bins`.
pub fn bits_per_feature(n_bins: usize) -> usize {
    assert!(n_bins >= 2, "need at least two bins");
    (usize::BITS - (n_bins - 1).leading_zeros()) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEncoder {
    pub n_bins: usize,
    pub n_features: usize,
    /// One ascending list of `n_bins - 1` thresholds per feature.
    pub boundaries: Vec<Vec<f64>>,
}

/// A Boolean feature vector; each entry is 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanFeatureVector {
    pub bits: Vec<u8>,
}

impl BooleanFeatureVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl From<Vec<u8>> for BooleanFeatureVector {
    fn from(bits: Vec<u8>) -> Self {
        BooleanFeatureVector { bits }
    }
}

impl QuantileEncoder {
    /// Fits boundaries on `rows`, each of which must have the same length.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(KwsError::InvalidConfig(format!("n_bins must be >= 2, got {n_bins}")));
        }
        if rows.len() < n_bins {
            return Err(KwsError::InsufficientData {
                rows: rows.len(),
                bins: n_bins,
            });
        }
        let n_features = rows[0].as_ref().len();
        for r in rows {
            if r.as_ref().len() != n_features {
                return Err(KwsError::Dimension {
                    expected: n_features,
                    got: r.as_ref().len(),
                });
            }
        }

        let n = rows.len();
        let mut column = vec![0.0; n];
        let mut boundaries = Vec::with_capacity(n_features);
        for f in 0..n_features {
            for (slot, r) in column.iter_mut().zip(rows) {
                *slot = r.as_ref()[f];
            }
            column.sort_by(f64::total_cmp);
            let cuts = (1..n_bins)
                .map(|j| {
                    // nearest rank: 1-indexed position ceil(n * j / B)
                    let rank = (n * j).div_ceil(n_bins);
                    column[rank - 1]
                })
                .collect();
            boundaries.push(cuts);
        }

        Ok(QuantileEncoder {
            n_bins,
            n_features,
            boundaries,
        })
    }

    pub fn bits_per_feature(&self) -> usize {
        bits_per_feature(self.n_bins)
    }

    pub fn total_booleans(&self) -> usize {
        self.n_features * self.bits_per_feature()
    }

    /// Bin of `value` for feature `f`: the count of boundaries strictly below it.
    pub fn bin_index(&self, f: usize, value: f64) -> usize {
        self.boundaries[f].partition_point(|&b| b < value)
    }

    pub fn transform(&self, features: &[f64]) -> Result<BooleanFeatureVector> {
        if features.len() != self.n_features {
            return Err(KwsError::Dimension {
                expected: self.n_features,
                got: features.len(),
            });
        }
        let width = self.bits_per_feature();
        let mut bits = Vec::with_capacity(self.total_booleans());
        for (f, &v) in features.iter().enumerate() {
            let bin = self.bin_index(f, v);
            bits.extend((0..width).rev().map(|shift| ((bin >> shift) & 1) as u8));
        }
        Ok(BooleanFeatureVector { bits })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| KwsError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let enc: QuantileEncoder = serde_json::from_str(text).map_err(|e| KwsError::Parse(e.to_string()))?;
        if enc.n_bins < 2
            || enc.boundaries.len() != enc.n_features
            || enc.boundaries.iter().any(|b| b.len() != enc.n_bins - 1)
        {
            return Err(KwsError::Parse(
                "encoder boundaries inconsistent with n_bins/n_features".into(),
            ));
        }
        Ok(enc)
    }
}

/// Row-major flattening: frame 0's coefficients first.
pub fn flatten_mfcc(matrix: &MfccMatrix) -> Vec<f64> {
    matrix.values.clone()
}

/// Decodes the big-endian bin index stored at feature `f` of an encoded vector.
pub fn decode_bin(bits: &[u8], f: usize, width: usize) -> usize {
    bits[f * width..(f + 1) * width]
        .iter()
        .fold(0, |acc, &b| (acc << 1) | b as usize)
}
