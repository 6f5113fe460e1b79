//! Manifest generators for corpora with self-describing file layouts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusLayout {
    Ravdess,
    Savee,
}

impl std::str::FromStr for CorpusLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ravdess" => Ok(CorpusLayout::Ravdess),
            "savee" => Ok(CorpusLayout::Savee),
            _ => Err(format!(
                "unknown corpus layout {s:?}; expected ravdess or savee"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub utterance_id: String,
    pub path: PathBuf,
    pub label: String,
    pub speaker: String,
}

/// RAVDESS name `MM-VV-EE-II-SS-RR-AA.wav`. Returns `None` for non-speech
/// (vocal channel other than 01) or malformed names.
pub fn parse_ravdess_name(file_name: &str) -> Option<(String, String)> {
    let stem = file_name
        .strip_suffix(".wav")
        .or_else(|| file_name.strip_suffix(".WAV"))?;
    let parts: Vec<&str> = stem.split('-').collect();
    if parts.len() != 7
        || parts
            .iter()
            .any(|p| p.len() != 2 || !p.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    if parts[1] != "01" {
        return None;
    }
    let label = match parts[2] {
        "01" => "neutral",
        "02" => "calm",
        "03" => "happy",
        "04" => "sad",
        "05" => "angry",
        "06" => "fearful",
        "07" => "disgust",
        "08" => "surprised",
        _ => return None,
    };
    Some((label.to_string(), format!("actor{}", parts[6])))
}

/// SAVEE name `a01.wav`, optionally prefixed by the speaker as `DC_a01.wav`.
/// Returns `(label, speaker prefix if present)`.
pub fn parse_savee_name(file_name: &str) -> Option<(String, Option<String>)> {
    let stem = file_name
        .strip_suffix(".wav")
        .or_else(|| file_name.strip_suffix(".WAV"))?;
    let (speaker, code) = match stem.split_once('_') {
        Some((s, c)) => (Some(s.to_string()), c),
        None => (None, stem),
    };
    let split = code.find(|c: char| c.is_ascii_digit())?;
    let (prefix, num) = code.split_at(split);
    if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let label = match prefix {
        "a" => "angry",
        "d" => "disgust",
        "f" => "fear",
        "h" => "happy",
        "n" => "neutral",
        "sa" => "sad",
        "su" => "surprise",
        _ => return None,
    };
    Some((label.to_string(), speaker))
}

fn wav_files(root: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
            {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Walks `root` and labels every recognizable file. Unrecognized files are skipped.
pub fn scan_corpus(root: &Path, layout: CorpusLayout) -> io::Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for path in wav_files(root)? {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let stem = name
            .rsplit_once('.')
            .map_or(name.as_str(), |(s, _)| s)
            .to_string();
        let entry = match layout {
            CorpusLayout::Ravdess => {
                parse_ravdess_name(&name).map(|(label, speaker)| CorpusEntry {
                    utterance_id: stem,
                    path: path.clone(),
                    label,
                    speaker,
                })
            }
            CorpusLayout::Savee => parse_savee_name(&name).map(|(label, prefix)| {
                // speaker from the file prefix, else the parent directory name
                let speaker = prefix.unwrap_or_else(|| {
                    path.parent()
                        .and_then(|p| p.file_name())
                        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
                });
                CorpusEntry {
                    utterance_id: format!("{speaker}_{}", stem.rsplit('_').next().unwrap_or(&stem)),
                    path: path.clone(),
                    label,
                    speaker,
                }
            }),
        };
        match entry {
            Some(e) => out.push(e),
            None => log::debug!("skipping {}", path.display()),
        }
    }
    Ok(out)
}

/// Writes `utterance_id,audio_path,label,speaker`; paths are relative to
/// the CSV's directory when possible.
pub fn write_corpus_manifest(path: &Path, entries: &[CorpusEntry]) -> io::Result<()> {
    let base = path
        .parent()
        .map(|p| p.canonicalize().unwrap_or_else(|_| p.to_path_buf()));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["utterance_id", "audio_path", "label", "speaker"])?;
    for e in entries {
        let abs = e.path.canonicalize().unwrap_or_else(|_| e.path.clone());
        let shown = base
            .as_ref()
            .and_then(|b| abs.strip_prefix(b).ok())
            .map_or_else(|| abs.clone(), Path::to_path_buf);
        w.write_record([
            e.utterance_id.as_str(),
            &shown.to_string_lossy(),
            &e.label,
            &e.speaker,
        ])?;
    }
    w.flush()
}
