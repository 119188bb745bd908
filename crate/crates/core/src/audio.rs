//! WAV ingestion, clip length normalization and deterministic dataset splits.
//!
//! The corpus layout is `<root>/<keyword>/<file>.wav`. Only RIFF/WAVE files
//! carrying 16-bit signed PCM mono audio are accepted.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};

/// Default clip duration in seconds. Every corpus clip is padded or cut to this.
pub const CLIP_SECONDS: u32 = 1;

/// Mono audio normalized to `[-1.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub label: String,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioClip {
            samples,
            sample_rate,
            label: String::new(),
            source_id: String::new(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads a PCM16 mono WAV file. Label and source id are left empty.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| KwsError::io(path, e))?;
    parse_wav(&bytes)
}

/// Parses an in-memory RIFF/WAVE byte buffer.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(KwsError::Parse("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(KwsError::Parse("missing RIFF/WAVE magic".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| KwsError::Parse(format!("chunk `{}` overruns the file", String::from_utf8_lossy(id))))?;

        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(KwsError::Parse("fmt chunk shorter than 16 bytes".into()));
                }
                fmt = Some((
                    le_u16(bytes, body),
                    le_u16(bytes, body + 2),
                    le_u32(bytes, body + 4),
                    le_u16(bytes, body + 14),
                ));
            }
            b"data" => {
                let (format, channels, sample_rate, bits) =
                    fmt.ok_or_else(|| KwsError::Parse("data chunk before fmt chunk".into()))?;
                if format != 1 {
                    return Err(KwsError::UnsupportedFormat(format!(
                        "format code {format}, only PCM (1) is supported"
                    )));
                }
                if channels != 1 {
                    return Err(KwsError::UnsupportedFormat(format!(
                        "{channels} channels, only mono is supported"
                    )));
                }
                if bits != 16 {
                    return Err(KwsError::UnsupportedFormat(format!(
                        "{bits}-bit samples, only 16-bit is supported"
                    )));
                }
                if sample_rate == 0 {
                    return Err(KwsError::Parse("sample rate of zero".into()));
                }
                if !size.is_multiple_of(2) {
                    return Err(KwsError::Parse("odd byte count in 16-bit data chunk".into()));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                    .collect();
                return Ok(AudioClip::new(samples, sample_rate));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }

    Err(KwsError::Parse("no data chunk".into()))
}

/// Encodes samples as a canonical 44-byte-header PCM16 mono WAV.
pub fn encode_wav(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(samples, sample_rate)).map_err(|e| KwsError::io(path, e))
}

/// Zero-pads or truncates at the end so the clip has exactly `target_samples`.
pub fn normalize_length(mut clip: AudioClip, target_samples: usize) -> AudioClip {
    clip.samples.resize(target_samples, 0.0);
    clip
}

/// Relative train/test/validation weights. Buckets are `hash mod (train+test+validation)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub test: u32,
    pub validation: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 8,
            test: 1,
            validation: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
    Validation,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Test, Partition::Validation];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
            Partition::Validation => "validation",
        }
    }
}

impl std::str::FromStr for Partition {
    type Err = KwsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "test" => Ok(Partition::Test),
            "validation" | "val" => Ok(Partition::Validation),
            other => Err(KwsError::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

/// A corpus file assigned to a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipRef {
    /// `<keyword>/<file name>`, always with forward slashes.
    pub source_id: String,
    pub label: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub seed: u64,
    pub keywords: Vec<String>,
    pub class_index: BTreeMap<String, usize>,
    pub train: Vec<ClipRef>,
    pub test: Vec<ClipRef>,
    pub validation: Vec<ClipRef>,
}

/// Manifest written next to the feature cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub keywords: Vec<String>,
    pub assignments: BTreeMap<String, Partition>,
}

impl DatasetSplit {
    pub fn part(&self, which: Partition) -> &[ClipRef] {
        match which {
            Partition::Train => &self.train,
            Partition::Test => &self.test,
            Partition::Validation => &self.validation,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.test.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn manifest(&self) -> SplitManifest {
        let mut assignments = BTreeMap::new();
        for which in Partition::ALL {
            for clip in self.part(which) {
                assignments.insert(clip.source_id.clone(), which);
            }
        }
        SplitManifest {
            seed: self.seed,
            keywords: self.keywords.clone(),
            assignments,
        }
    }
}

/// FNV-1a over the seed and source id, followed by a splitmix64 finalizer.
/// Stable across platforms and toolchains, unlike `std`'s hasher.
pub fn stable_hash(source_id: &str, seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(source_id.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

pub fn assign_partition(source_id: &str, seed: u64, ratios: SplitRatios) -> Partition {
    let total = (ratios.train + ratios.test + ratios.validation) as u64;
    let bucket = stable_hash(source_id, seed) % total;
    if bucket < ratios.train as u64 {
        Partition::Train
    } else if bucket < (ratios.train + ratios.test) as u64 {
        Partition::Test
    } else {
        Partition::Validation
    }
}

/// Lists `<root>/<keyword>/*.wav` as `(source_id, path)`, sorted by source id.
pub fn list_class_files(corpus_root: &Path, keyword: &str) -> Result<Vec<(String, PathBuf)>> {
    let dir = corpus_root.join(keyword);
    if !dir.is_dir() {
        return Err(KwsError::MissingClass(keyword.to_string()));
    }
    let entries = fs::read_dir(&dir).map_err(|e| KwsError::io(&dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| KwsError::io(&dir, e))?;
        let path = entry.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            files.push((format!("{keyword}/{name}"), path));
        }
    }
    if files.is_empty() {
        return Err(KwsError::EmptyClass(keyword.to_string()));
    }
    files.sort();
    Ok(files)
}

/// Assigns every corpus file for `keywords` to a partition by hashing its source id.
pub fn build_split(
    corpus_root: impl AsRef<Path>,
    keywords: &[String],
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit> {
    let corpus_root = corpus_root.as_ref();
    if keywords.is_empty() {
        return Err(KwsError::InvalidConfig("keyword list is empty".into()));
    }
    if ratios.train + ratios.test + ratios.validation == 0 {
        return Err(KwsError::InvalidConfig("split ratios sum to zero".into()));
    }

    let mut class_index = BTreeMap::new();
    for (i, k) in keywords.iter().enumerate() {
        if class_index.insert(k.clone(), i).is_some() {
            return Err(KwsError::InvalidConfig(format!("duplicate keyword `{k}`")));
        }
    }

    let mut split = DatasetSplit {
        seed,
        keywords: keywords.to_vec(),
        class_index,
        train: Vec::new(),
        test: Vec::new(),
        validation: Vec::new(),
    };
    for (label, keyword) in keywords.iter().enumerate() {
        for (source_id, path) in list_class_files(corpus_root, keyword)? {
            let part = assign_partition(&source_id, seed, ratios);
            let clip = ClipRef { source_id, label, path };
            match part {
                Partition::Train => split.train.push(clip),
                Partition::Test => split.test.push(clip),
                Partition::Validation => split.validation.push(clip),
            }
        }
    }
    for list in [&mut split.train, &mut split.test, &mut split.validation] {
        list.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    }
    Ok(split)
}

/// Reads a corpus clip, normalizes its length to `clip_seconds` and fills in label metadata.
pub fn load_clip(clip: &ClipRef, keywords: &[String], clip_seconds: u32) -> Result<AudioClip> {
    let mut audio = read_wav(&clip.path)?;
    audio.label = keywords[clip.label].clone();
    audio.source_id = clip.source_id.clone();
    let target = audio.sample_rate as usize * clip_seconds as usize;
    Ok(normalize_length(audio, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_with_samples(raw: &[i16]) -> Vec<u8> {
        let samples: Vec<f64> = raw.iter().map(|&v| v as f64 / 32768.0).collect();
        encode_wav(&samples, 16000)
    }

    #[test]
    fn canonical_header_is_44_bytes() {
        assert_eq!(wav_with_samples(&[]).len(), 44);
    }

    #[test]
    fn max_sample_normalizes_below_one() {
        let clip = parse_wav(&wav_with_samples(&[0x7FFF])).unwrap();
        assert_eq!(clip.samples, vec![32767.0 / 32768.0]);
        assert!((clip.samples[0] - 0.999969).abs() < 1e-6);
        assert_eq!(clip.sample_rate, 16000);
    }

    #[test]
    fn min_sample_is_exactly_minus_one() {
        let clip = parse_wav(&wav_with_samples(&[i16::MIN])).unwrap();
        assert_eq!(clip.samples, vec![-1.0]);
    }

    #[test]
    fn stereo_is_unsupported() {
        let mut bytes = wav_with_samples(&[1, 2]);
        bytes[22] = 2;
        assert!(matches!(parse_wav(&bytes), Err(KwsError::UnsupportedFormat(_))));
    }

    #[test]
    fn non_pcm_and_wide_samples_are_unsupported() {
        let mut float = wav_with_samples(&[1, 2]);
        float[20] = 3;
        assert!(matches!(parse_wav(&float), Err(KwsError::UnsupportedFormat(_))));

        let mut wide = wav_with_samples(&[1, 2]);
        wide[34] = 24;
        assert!(matches!(parse_wav(&wide), Err(KwsError::UnsupportedFormat(_))));
    }

    #[test]
    fn malformed_headers_are_parse_errors() {
        assert!(matches!(parse_wav(b"RIFF"), Err(KwsError::Parse(_))));
        let mut bad_magic = wav_with_samples(&[1]);
        bad_magic[8..12].copy_from_slice(b"AVI ");
        assert!(matches!(parse_wav(&bad_magic), Err(KwsError::Parse(_))));

        // data chunk claims more bytes than present
        let mut truncated = wav_with_samples(&[1, 2, 3]);
        truncated.truncate(truncated.len() - 2);
        assert!(matches!(parse_wav(&truncated), Err(KwsError::Parse(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let base = wav_with_samples(&[100, -100]);
        let mut bytes = base[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]); // odd chunk plus pad byte
        bytes.extend_from_slice(&base[36..]);
        let clip = parse_wav(&bytes).unwrap();
        assert_eq!(clip.samples.len(), 2);
        assert_eq!(clip.samples[0], 100.0 / 32768.0);
    }

    #[test]
    fn normalize_pads_and_truncates_at_end() {
        let short = normalize_length(AudioClip::new(vec![0.5; 15000], 16000), 16000);
        assert_eq!(short.samples.len(), 16000);
        assert!(short.samples[15000..].iter().all(|&s| s == 0.0));
        assert_eq!(short.samples[14999], 0.5);

        let exact = AudioClip::new((0..16000).map(|i| i as f64 / 16000.0).collect(), 16000);
        assert_eq!(normalize_length(exact.clone(), 16000), exact);

        let long = AudioClip::new((0..17000).map(|i| i as f64 / 17000.0).collect(), 16000);
        let cut = normalize_length(long.clone(), 16000);
        assert_eq!(cut.samples[..], long.samples[..16000]);
    }

    #[test]
    fn hash_is_stable() {
        // frozen so that splits never silently change between releases
        assert_eq!(stable_hash("yes/0a7c2a8d_nohash_0.wav", 42), 0x7f84_92a0_0bca_8459);
        assert_eq!(stable_hash("no/ffd2ba2f_nohash_4.wav", 0), 0xb5f1_9d26_194f_ea3f);
        assert_ne!(stable_hash("yes/a.wav", 1), stable_hash("yes/a.wav", 2));
    }

    #[test]
    fn partition_follows_bucket_ranges() {
        let ratios = SplitRatios::default();
        for i in 0..500 {
            let id = format!("no/{i:05}.wav");
            let bucket = stable_hash(&id, 7) % 10;
            let expected = match bucket {
                0..=7 => Partition::Train,
                8 => Partition::Test,
                _ => Partition::Validation,
            };
            assert_eq!(assign_partition(&id, 7, ratios), expected);
        }
    }
}
