use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Vocab;

/// One manifest line as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    pub id: String,
    /// Mel cache path, relative to the manifest's directory.
    pub mel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyrics: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyric_ids: Option<Vec<u32>>,
    pub genres: Vec<String>,
    /// Source WAV, relative to the manifest's directory; only `preprocess`
    /// reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
}

/// A validated track: resolved mel path, token ids and sorted genre ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackSample {
    pub id: String,
    pub mel_path: PathBuf,
    pub lyric_tokens: Vec<u32>,
    pub genres: Vec<usize>,
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<TrackRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrackRecord = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records(path: impl AsRef<Path>, records: &[TrackRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_genres(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let genres: Vec<String> = serde_json::from_str(&fs::read_to_string(path)?)?;
    let unique: BTreeSet<&String> = genres.iter().collect();
    if unique.len() != genres.len() {
        return Err(Error::Config("genre vocabulary has duplicate names".into()));
    }
    Ok(genres)
}

pub fn save_genres(path: impl AsRef<Path>, genres: &[String]) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(genres)?)?;
    Ok(())
}

/// Reads and validates a manifest against the genre and token vocabularies.
/// Raw `lyrics` text is tokenized with `vocab`; `lyric_ids` are taken as is.
pub fn load_manifest(path: impl AsRef<Path>, genres: &[String], vocab: &Vocab) -> Result<Vec<TrackSample>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut samples = Vec::new();
    let mut line = 0;
    let reader = BufReader::new(File::open(path)?);
    for text in reader.lines() {
        line += 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let r: TrackRecord = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if r.genres.is_empty() {
            return Err(err(format!("track {:?} has no genres", r.id)));
        }
        let unknown: Vec<&str> = r
            .genres
            .iter()
            .filter(|g| !genres.contains(g))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(err(format!("unknown genres: {}", unknown.join(", "))));
        }
        let ids: BTreeSet<usize> = r
            .genres
            .iter()
            .map(|g| genres.iter().position(|x| x == g).unwrap())
            .collect();
        let lyric_tokens = match (&r.lyrics, &r.lyric_ids) {
            (Some(_), Some(_)) => return Err(err("give either lyrics or lyric_ids, not both".into())),
            (Some(text), None) => vocab.encode(text),
            (None, Some(ids)) => {
                if let Some(bad) = ids.iter().find(|&&t| t as usize >= vocab.len()) {
                    return Err(err(format!("token id {bad} outside vocabulary of {}", vocab.len())));
                }
                ids.clone()
            }
            (None, None) => return Err(err("missing lyrics or lyric_ids".into())),
        };
        let mel_path = base.join(&r.mel);
        if !mel_path.is_file() {
            return Err(err(format!("mel file {} does not exist", mel_path.display())));
        }
        samples.push(TrackSample {
            id: r.id,
            mel_path,
            lyric_tokens,
            genres: ids.into_iter().collect(),
        });
    }
    Ok(samples)
}
