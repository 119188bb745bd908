//! On-disk feature cache produced by `prepare`.
//!
//! ```text
//! <cache>/meta.json                 CacheMeta, written last
//! <cache>/split.json                split manifest
//! <cache>/encoder.json              fitted QuantileEncoder
//! <cache>/raw_<split>.bin           "KWSR" v1: rows, cols, then per row u32 label + cols f64
//! <cache>/bool_<split>.bin          "KWSB" v1: rows, bits, then per row u32 label + packed bits (MSB first)
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{self, DatasetSplit, Partition, SplitRatios, CLIP_SECONDS};
use crate::booleanizer::{flatten_mfcc, BooleanFeatureVector, QuantileEncoder};
use crate::error::{KwsError, Result};
use crate::mfcc::{MfccConfig, MfccExtractor};
use crate::tm::{LabeledLiterals, LiteralSet};

use super::config::ExperimentConfig;

const RAW_MAGIC: &[u8; 4] = b"KWSR";
const BOOL_MAGIC: &[u8; 4] = b"KWSB";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub validation: usize,
}

/// Everything the cache was built from, plus derived shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub content_hash: String,
    pub keywords: Vec<String>,
    pub mfcc: MfccConfig,
    pub n_bins: usize,
    pub seed: u64,
    pub split_ratios: SplitRatios,
    pub frames: usize,
    pub coeffs_per_frame: usize,
    /// Raw MFCC feature count (`frames × coeffs_per_frame`).
    pub n_features: usize,
    pub bits_per_feature: usize,
    pub total_booleans: usize,
    pub counts: SplitCounts,
}

impl CacheMeta {
    pub fn load(cache_dir: &Path) -> Result<Self> {
        let path = cache_dir.join("meta.json");
        let text = fs::read_to_string(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                KwsError::StaleCache(format!(
                    "no feature cache at {}; run prepare first",
                    cache_dir.display()
                ))
            } else {
                KwsError::io(&path, e)
            }
        })?;
        serde_json::from_str(&text).map_err(|e| KwsError::Parse(format!("{}: {e}", path.display())))
    }

    /// Fails with `StaleCache` when the cache was built from a different configuration.
    pub fn check_matches(&self, config: &ExperimentConfig) -> Result<()> {
        let mut diffs = Vec::new();
        if self.keywords != config.keywords {
            diffs.push("keywords");
        }
        if self.mfcc != config.mfcc {
            diffs.push("mfcc");
        }
        if self.n_bins != config.n_bins {
            diffs.push("n_bins");
        }
        if self.seed != config.hyperparams.seed {
            diffs.push("seed");
        }
        if self.split_ratios != config.split_ratios {
            diffs.push("split_ratios");
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(KwsError::StaleCache(format!(
                "cache was built with different {}; rerun prepare",
                diffs.join(", ")
            )))
        }
    }
}

/// Real-valued features with labels, one row per clip.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub cols: usize,
    pub labels: Vec<u32>,
    pub values: Vec<f64>,
}

impl RawFeatures {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Booleanized features with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BoolFeatures {
    pub bits: usize,
    pub labels: Vec<u32>,
    pub rows: Vec<BooleanFeatureVector>,
}

impl BoolFeatures {
    pub fn to_literals(&self) -> LabeledLiterals {
        LabeledLiterals::new(
            self.rows.iter().map(LiteralSet::from_features).collect(),
            self.labels.iter().map(|&l| l as usize).collect(),
        )
    }
}

pub fn write_raw(path: &Path, data: &RawFeatures) -> Result<()> {
    let mut out = Vec::with_capacity(24 + data.rows() * (4 + 8 * data.cols));
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(data.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(data.cols as u64).to_le_bytes());
    for (i, &label) in data.labels.iter().enumerate() {
        out.extend_from_slice(&label.to_le_bytes());
        for v in data.row(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| KwsError::io(path, e))
}

fn read_header(bytes: &[u8], magic: &[u8; 4], path: &Path) -> Result<(usize, usize)> {
    if bytes.len() < 24 || &bytes[0..4] != magic {
        return Err(KwsError::Parse(format!("{}: not a feature cache file", path.display())));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(KwsError::StaleCache(format!(
            "{}: cache format version {version}",
            path.display()
        )));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    Ok((rows, cols))
}

pub fn read_raw(path: &Path) -> Result<RawFeatures> {
    let bytes = fs::read(path).map_err(|e| KwsError::io(path, e))?;
    let (rows, cols) = read_header(&bytes, RAW_MAGIC, path)?;
    let stride = 4 + 8 * cols;
    if bytes.len() != 24 + rows * stride {
        return Err(KwsError::Parse(format!("{}: truncated", path.display())));
    }
    let mut labels = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows * cols);
    for rec in bytes[24..].chunks_exact(stride) {
        labels.push(u32::from_le_bytes(rec[0..4].try_into().unwrap()));
        values.extend(
            rec[4..]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap())),
        );
    }
    Ok(RawFeatures { cols, labels, values })
}

pub fn write_bool(path: &Path, data: &BoolFeatures) -> Result<()> {
    let row_bytes = data.bits.div_ceil(8);
    let mut out = Vec::with_capacity(24 + data.rows.len() * (4 + row_bytes));
    out.extend_from_slice(BOOL_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(data.rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&(data.bits as u64).to_le_bytes());
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        out.extend_from_slice(&label.to_le_bytes());
        let mut packed = vec![0u8; row_bytes];
        for (i, &b) in row.bits.iter().enumerate() {
            if b != 0 {
                packed[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    fs::write(path, out).map_err(|e| KwsError::io(path, e))
}

pub fn read_bool(path: &Path) -> Result<BoolFeatures> {
    let bytes = fs::read(path).map_err(|e| KwsError::io(path, e))?;
    let (rows, bits) = read_header(&bytes, BOOL_MAGIC, path)?;
    let row_bytes = bits.div_ceil(8);
    let stride = 4 + row_bytes;
    if bytes.len() != 24 + rows * stride {
        return Err(KwsError::Parse(format!("{}: truncated", path.display())));
    }
    let mut labels = Vec::with_capacity(rows);
    let mut out = Vec::with_capacity(rows);
    for rec in bytes[24..].chunks_exact(stride) {
        labels.push(u32::from_le_bytes(rec[0..4].try_into().unwrap()));
        let packed = &rec[4..];
        let row = (0..bits).map(|i| (packed[i / 8] >> (7 - i % 8)) & 1).collect();
        out.push(BooleanFeatureVector { bits: row });
    }
    Ok(BoolFeatures {
        bits,
        labels,
        rows: out,
    })
}

pub fn raw_path(cache_dir: &Path, part: Partition) -> PathBuf {
    cache_dir.join(format!("raw_{}.bin", part.as_str()))
}

pub fn bool_path(cache_dir: &Path, part: Partition) -> PathBuf {
    cache_dir.join(format!("bool_{}.bin", part.as_str()))
}

#[derive(Serialize)]
struct HashKey<'a> {
    keywords: &'a [String],
    mfcc: &'a MfccConfig,
    n_bins: usize,
    seed: u64,
    split_ratios: SplitRatios,
    clip_seconds: u32,
    cache_version: u32,
}

/// SHA-256 over the feature-relevant config and every corpus file's id and bytes.
pub fn content_hash(config: &ExperimentConfig, split: &DatasetSplit) -> Result<String> {
    let key = HashKey {
        keywords: &config.keywords,
        mfcc: &config.mfcc,
        n_bins: config.n_bins,
        seed: config.hyperparams.seed,
        split_ratios: config.split_ratios,
        clip_seconds: CLIP_SECONDS,
        cache_version: CACHE_VERSION,
    };
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&key).map_err(|e| KwsError::Parse(e.to_string()))?);

    let mut clips: Vec<_> = Partition::ALL.iter().flat_map(|&p| split.part(p)).collect();
    clips.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    for clip in clips {
        let bytes = fs::read(&clip.path).map_err(|e| KwsError::io(&clip.path, e))?;
        hasher.update((clip.source_id.len() as u64).to_le_bytes());
        hasher.update(clip.source_id.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub cache_dir: PathBuf,
    /// True when an up-to-date cache already existed and nothing was rewritten.
    pub reused: bool,
    pub meta: CacheMeta,
}

/// Extracts MFCCs for every clip, fits the encoder on the training split and
/// writes the cache. A no-op when the content hash is unchanged.
pub fn cmd_prepare(config: &ExperimentConfig) -> Result<PrepareSummary> {
    config.validate()?;
    let split = audio::build_split(
        &config.corpus_root,
        &config.keywords,
        config.split_ratios,
        config.hyperparams.seed,
    )?;
    let hash = content_hash(config, &split)?;
    let cache_dir = config.cache_dir();

    if let Ok(meta) = CacheMeta::load(&cache_dir) {
        if meta.content_hash == hash {
            return Ok(PrepareSummary {
                cache_dir,
                reused: true,
                meta,
            });
        }
    }

    let parent = cache_dir.parent().map(Path::to_path_buf).unwrap_or_default();
    fs::create_dir_all(&parent).map_err(|e| KwsError::io(&parent, e))?;
    let staging = parent.join(format!(
        ".{}.partial-{}",
        cache_dir.file_name().and_then(|n| n.to_str()).unwrap_or("cache"),
        std::process::id()
    ));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| KwsError::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| KwsError::io(&staging, e))?;

    let built = build_cache(config, &split, hash, &staging);
    let meta = match built {
        Ok(meta) => meta,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    if cache_dir.exists() {
        fs::remove_dir_all(&cache_dir).map_err(|e| KwsError::io(&cache_dir, e))?;
    }
    fs::rename(&staging, &cache_dir).map_err(|e| KwsError::io(&cache_dir, e))?;
    Ok(PrepareSummary {
        cache_dir,
        reused: false,
        meta,
    })
}

fn extract_part(
    extractor: &MfccExtractor,
    split: &DatasetSplit,
    part: Partition,
) -> Result<(RawFeatures, (usize, usize))> {
    let clips = split.part(part);
    let rows: Vec<(Vec<f64>, usize, usize)> = clips
        .par_iter()
        .map(|c| {
            let clip = audio::load_clip(c, &split.keywords, CLIP_SECONDS)?;
            let m = extractor.extract(&clip)?;
            Ok((flatten_mfcc(&m), m.frames, m.coeffs_per_frame))
        })
        .collect::<Result<_>>()?;

    let shape = rows.first().map(|r| (r.1, r.2)).unwrap_or((0, 0));
    let cols = shape.0 * shape.1;
    let mut values = Vec::with_capacity(rows.len() * cols);
    for (clip, (row, _, _)) in clips.iter().zip(&rows) {
        if row.len() != cols {
            return Err(KwsError::Parse(format!(
                "{}: {} features where other clips have {cols}",
                clip.source_id,
                row.len()
            )));
        }
        values.extend_from_slice(row);
    }
    Ok((
        RawFeatures {
            cols,
            labels: clips.iter().map(|c| c.label as u32).collect(),
            values,
        },
        shape,
    ))
}

fn build_cache(config: &ExperimentConfig, split: &DatasetSplit, hash: String, dir: &Path) -> Result<CacheMeta> {
    let extractor = MfccExtractor::new(config.mfcc)?;
    let (train, shape) = extract_part(&extractor, split, Partition::Train)?;
    let (test, _) = extract_part(&extractor, split, Partition::Test)?;
    let (validation, _) = extract_part(&extractor, split, Partition::Validation)?;

    let train_rows: Vec<&[f64]> = (0..train.rows()).map(|i| train.row(i)).collect();
    let encoder = QuantileEncoder::fit(&train_rows, config.n_bins)?;

    for (part, raw) in [
        (Partition::Train, &train),
        (Partition::Test, &test),
        (Partition::Validation, &validation),
    ] {
        if raw.rows() > 0 && raw.cols != encoder.n_features {
            return Err(KwsError::Dimension {
                expected: encoder.n_features,
                got: raw.cols,
            });
        }
        write_raw(&raw_path(dir, part), raw)?;
        let rows = (0..raw.rows())
            .map(|i| encoder.transform(raw.row(i)))
            .collect::<Result<Vec<_>>>()?;
        write_bool(
            &bool_path(dir, part),
            &BoolFeatures {
                bits: encoder.total_booleans(),
                labels: raw.labels.clone(),
                rows,
            },
        )?;
    }

    write_json(&dir.join("encoder.json"), &encoder)?;
    write_json(&dir.join("split.json"), &split.manifest())?;
    let meta = CacheMeta {
        content_hash: hash,
        keywords: config.keywords.clone(),
        mfcc: config.mfcc,
        n_bins: config.n_bins,
        seed: config.hyperparams.seed,
        split_ratios: config.split_ratios,
        frames: shape.0,
        coeffs_per_frame: shape.1,
        n_features: encoder.n_features,
        bits_per_feature: encoder.bits_per_feature(),
        total_booleans: encoder.total_booleans(),
        counts: SplitCounts {
            train: train.rows(),
            test: test.rows(),
            validation: validation.rows(),
        },
    };
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(meta)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| KwsError::Parse(e.to_string()))?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| KwsError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| KwsError::io(path, e))
}

pub fn load_encoder(cache_dir: &Path) -> Result<QuantileEncoder> {
    let path = cache_dir.join("encoder.json");
    let text = fs::read_to_string(&path).map_err(|e| KwsError::io(&path, e))?;
    QuantileEncoder::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_and_bool_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let raw = RawFeatures {
            cols: 3,
            labels: vec![0, 2],
            values: vec![1.0, -2.0, 0.5, 3.0, 4.0, f64::MIN_POSITIVE],
        };
        let p = dir.path().join("r.bin");
        write_raw(&p, &raw).unwrap();
        assert_eq!(read_raw(&p).unwrap(), raw);

        let bools = BoolFeatures {
            bits: 11,
            labels: vec![1, 0],
            rows: vec![vec![1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1].into(), vec![0; 11].into()],
        };
        let q = dir.path().join("b.bin");
        write_bool(&q, &bools).unwrap();
        assert_eq!(fs::metadata(&q).unwrap().len(), 24 + 2 * (4 + 2));
        assert_eq!(read_bool(&q).unwrap(), bools);

        assert!(matches!(read_bool(&p), Err(KwsError::Parse(_))));
    }
}
