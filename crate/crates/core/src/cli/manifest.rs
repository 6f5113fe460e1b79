//! Manifest CSV ingestion and per-corpus label protocols.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::LabeledUtterance;
use crate::train_eval::SplitItem;

/// Class vocabulary and label mapping of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// IEMOCAP, angry / happy / neutral / sad.
    #[serde(rename = "IEMOCAP_EXP1")]
    IemocapExp1,
    /// IEMOCAP with excited in place of happy.
    #[serde(rename = "IEMOCAP_EXP2")]
    IemocapExp2,
    /// SAVEE without surprise.
    #[serde(rename = "SAVEE6")]
    Savee6,
    /// RAVDESS speech, calm merged into neutral, surprised dropped.
    #[serde(rename = "RAVDESS6")]
    Ravdess6,
    /// Labels taken verbatim; classes sorted by name.
    #[serde(rename = "CUSTOM")]
    Custom,
}

const SIX: &[&str] = &["angry", "happy", "neutral", "sad", "fear", "disgust"];

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::IemocapExp1,
        Protocol::IemocapExp2,
        Protocol::Savee6,
        Protocol::Ravdess6,
        Protocol::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::IemocapExp1 => "IEMOCAP_EXP1",
            Protocol::IemocapExp2 => "IEMOCAP_EXP2",
            Protocol::Savee6 => "SAVEE6",
            Protocol::Ravdess6 => "RAVDESS6",
            Protocol::Custom => "CUSTOM",
        }
    }

    /// Fixed class order; `None` for [`Protocol::Custom`].
    pub fn classes(self) -> Option<&'static [&'static str]> {
        match self {
            Protocol::IemocapExp1 => Some(&["angry", "happy", "neutral", "sad"]),
            Protocol::IemocapExp2 => Some(&["angry", "excited", "neutral", "sad"]),
            Protocol::Savee6 | Protocol::Ravdess6 => Some(SIX),
            Protocol::Custom => None,
        }
    }

    /// Class name for a raw label, or `None` if the protocol excludes it.
    pub fn map_label(self, raw: &str) -> Option<String> {
        if self == Protocol::Custom {
            let label = raw.trim().to_lowercase();
            return (!label.is_empty()).then_some(label);
        }
        let label = canonical_label(raw);
        let label = match (self, label.as_str()) {
            (Protocol::Ravdess6, "calm") => "neutral".to_string(),
            _ => label,
        };
        self.classes()?
            .iter()
            .find(|c| **c == label)
            .map(|c| c.to_string())
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Protocol::ALL.iter().map(|p| p.name()).collect();
                format!(
                    "unknown protocol {s:?}; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

/// Lower-cases and expands common corpus abbreviations and word forms.
pub fn canonical_label(raw: &str) -> String {
    let l = raw.trim().to_lowercase();
    let mapped = match l.as_str() {
        "ang" | "anger" | "a" => "angry",
        "hap" | "happiness" | "h" | "joy" => "happy",
        "exc" => "excited",
        "neu" | "n" => "neutral",
        "sadness" | "sa" => "sad",
        "fea" | "fearful" | "f" => "fear",
        "dis" | "disgusted" | "d" => "disgust",
        "sur" | "surprise" | "su" => "surprised",
        "fru" => "frustrated",
        other => other,
    };
    mapped.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestRow {
    pub utterance_id: String,
    /// Resolved against the manifest's directory when relative.
    pub audio_path: PathBuf,
    pub raw_label: String,
    pub label: usize,
    pub speaker: Option<String>,
    pub session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub protocol: Protocol,
    pub class_names: Vec<String>,
    pub rows: Vec<ManifestRow>,
    /// Rows dropped by the protocol, keyed by canonical raw label.
    pub excluded: BTreeMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest is missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: empty {column}")]
    EmptyField { line: u64, column: &'static str },
    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),
    #[error("no rows left after applying {protocol} (excluded: {excluded:?})")]
    Empty {
        protocol: Protocol,
        excluded: BTreeMap<String, usize>,
    },
}

impl Manifest {
    pub fn utterances(&self) -> Vec<LabeledUtterance> {
        self.rows
            .iter()
            .map(|r| LabeledUtterance {
                id: r.utterance_id.clone(),
                audio_path: r.audio_path.clone(),
                label: r.label,
            })
            .collect()
    }

    pub fn split_items(&self) -> Vec<SplitItem<'_>> {
        self.rows
            .iter()
            .map(|r| SplitItem {
                id: &r.utterance_id,
                label: r.label,
                speaker: r.speaker.as_deref(),
            })
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for r in &self.rows {
            counts[r.label] += 1;
        }
        counts
    }
}

pub fn ingest_manifest(path: &Path, protocol: Protocol) -> Result<Manifest, ManifestError> {
    let file = std::fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(file, path.parent().unwrap_or(Path::new("")), protocol)
}

/// Parses manifest CSV from any reader; relative audio paths are joined to `base_dir`.
pub fn parse_manifest(
    reader: impl Read,
    base_dir: &Path,
    protocol: Protocol,
) -> Result<Manifest, ManifestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = col("utterance_id").ok_or(ManifestError::MissingColumn("utterance_id"))?;
    let path_col = col("audio_path").ok_or(ManifestError::MissingColumn("audio_path"))?;
    let label_col = col("label").ok_or(ManifestError::MissingColumn("label"))?;
    let speaker_col = col("speaker");
    let session_col = col("session");

    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut excluded: BTreeMap<String, usize> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, column: &'static str| -> Result<String, ManifestError> {
            let v = record.get(i).unwrap_or("");
            if v.is_empty() {
                Err(ManifestError::EmptyField { line, column })
            } else {
                Ok(v.to_string())
            }
        };
        let optional = |i: Option<usize>| {
            i.and_then(|i| record.get(i))
                .filter(|v| !v.is_empty())
                .map(str::to_string)
        };
        let id = field(id_col, "utterance_id")?;
        let raw_label = field(label_col, "label")?;
        let audio = field(path_col, "audio_path")?;
        if !seen.insert(id.clone()) {
            return Err(ManifestError::DuplicateId(id));
        }
        match protocol.map_label(&raw_label) {
            Some(class) => kept.push((
                id,
                audio,
                raw_label,
                class,
                optional(speaker_col),
                optional(session_col),
            )),
            None => *excluded.entry(canonical_label(&raw_label)).or_default() += 1,
        }
    }

    let class_names: Vec<String> = match protocol.classes() {
        Some(c) => c.iter().map(|s| s.to_string()).collect(),
        None => {
            let mut names: Vec<String> = kept.iter().map(|k| k.3.clone()).collect();
            names.sort();
            names.dedup();
            names
        }
    };
    if kept.is_empty() {
        return Err(ManifestError::Empty { protocol, excluded });
    }
    let rows = kept
        .into_iter()
        .map(
            |(utterance_id, audio, raw_label, class, speaker, session)| {
                let p = PathBuf::from(audio);
                ManifestRow {
                    utterance_id,
                    audio_path: if p.is_absolute() { p } else { base_dir.join(p) },
                    raw_label,
                    label: class_names
                        .iter()
                        .position(|c| *c == class)
                        .expect("mapped into vocabulary"),
                    speaker,
                    session,
                }
            },
        )
        .collect();
    Ok(Manifest {
        protocol,
        class_names,
        rows,
        excluded,
    })
}
