//! Narrative texts, tokenization and ingestion of human annotation files.
//!
//! Every boundary index in the crate refers to the token numbering produced
//! by [`tokenize`]: tokens are maximal non-whitespace runs with punctuation
//! attached, and a boundary at index `i` lies just prior to token `i`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: row {row}: {message}")]
    Malformed { path: PathBuf, row: u64, message: String },
    #[error("participant {participant}: boundary index {index} invalid for narrative {narrative_id} ({token_count} tokens)")]
    InvalidBoundary { participant: String, narrative_id: String, index: usize, token_count: usize },
    #[error("participant {participant}: {message}")]
    InvalidRating { participant: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    pub index: usize,
    pub is_sentence_end: bool,
}

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201D}', '\u{2019}', '\u{00BB}'];

fn ends_sentence(surface: &str) -> bool {
    let core = surface.trim_end_matches(CLOSERS);
    core.ends_with(['.', '!', '?'])
}

/// Casefold and strip leading/trailing non-alphanumeric characters.
pub fn normalize(surface: &str) -> String {
    surface.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .enumerate()
        .map(|(index, surface)| Token {
            surface: surface.to_string(),
            normalized: normalize(surface),
            index,
            is_sentence_end: ends_sentence(surface),
        })
        .collect()
}

pub fn detect_sentence_ends(tokens: &[Token]) -> BTreeSet<usize> {
    tokens.iter().filter(|t| t.is_sentence_end).map(|t| t.index).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Narrative {
    pub id: String,
    pub title: String,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Narrative {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self { id: id.into(), title: title.into(), text, tokens }
    }

    /// Loads a UTF-8 text file; the id and title are the file stem.
    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)
            .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self::new(stem.clone(), stem, text))
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn sentence_ends(&self) -> BTreeSet<usize> {
        detect_sentence_ends(&self.tokens)
    }

    /// Positions just after each sentence end that still fall inside the
    /// text, i.e. the places a between-sentence mark can be drawn.
    pub fn sentence_starts(&self) -> BTreeSet<usize> {
        self.sentence_ends().into_iter().map(|i| i + 1).filter(|&i| i < self.token_count()).collect()
    }

    /// Splits the token sequence at the given boundaries and joins each
    /// event's surfaces with single spaces.
    pub fn segment_texts(&self, boundaries: &BoundarySet) -> Vec<String> {
        let mut cuts: Vec<usize> = vec![0];
        cuts.extend(boundaries.iter().filter(|&b| b > 0 && b < self.token_count()));
        cuts.push(self.token_count());
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                self.tokens[w[0]..w[1]].iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
            })
            .collect()
    }
}

/// Sorted, unique boundary token indices, each in `1..token_count`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundarySet(Vec<usize>);

impl BoundarySet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        Self(set.into_iter().collect())
    }

    /// Builds a set and checks `0 < index < token_count` for every entry.
    pub fn validated(indices: impl IntoIterator<Item = usize>, token_count: usize) -> Result<Self, usize> {
        let set = Self::new(indices);
        match set.0.iter().find(|&&i| i == 0 || i >= token_count) {
            Some(&bad) => Err(bad),
            None => Ok(set),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl FromIterator<usize> for BoundarySet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanAnnotation {
    pub participant_id: String,
    pub narrative_id: String,
    pub boundaries: BoundarySet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub participant_id: String,
    pub narrative_id: String,
    pub mark_token_index: usize,
    pub judged_boundary: bool,
    pub confidence: u8,
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    participant_id: String,
    narrative_id: String,
    #[serde(default)]
    boundaries: String,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(file))
}

fn row_of(err: &csv::Error) -> u64 {
    err.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_index_list(raw: &str) -> Result<Vec<usize>, String> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| format!("bad boundary index {s:?}: {e}")))
        .collect()
}

fn read_annotation_rows(path: &Path) -> Result<Vec<(u64, AnnotationRow)>, CorpusError> {
    let malformed = |row: u64, message: String| CorpusError::Malformed { path: path.to_path_buf(), row, message };
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| malformed(row_of(&e), e.to_string()))?.clone();
    let mut record = csv::StringRecord::new();
    let mut rows = Vec::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(malformed(row_of(&e), e.to_string())),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: AnnotationRow = record.deserialize(Some(&headers)).map_err(|e| malformed(line, e.to_string()))?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn annotation_from_row(
    path: &Path,
    line: u64,
    row: AnnotationRow,
    narrative: &Narrative,
) -> Result<HumanAnnotation, CorpusError> {
    let raw = parse_index_list(&row.boundaries)
        .map_err(|message| CorpusError::Malformed { path: path.to_path_buf(), row: line, message })?;
    let boundaries = BoundarySet::validated(raw, narrative.token_count()).map_err(|index| {
        CorpusError::InvalidBoundary {
            participant: row.participant_id.clone(),
            narrative_id: narrative.id.clone(),
            index,
            token_count: narrative.token_count(),
        }
    })?;
    Ok(HumanAnnotation { participant_id: row.participant_id, narrative_id: row.narrative_id, boundaries })
}

/// Reads annotation rows for every narrative in `narratives`; rows naming an
/// unknown narrative are reported as malformed.
pub fn ingest_annotations_for(path: &Path, narratives: &[Narrative]) -> Result<Vec<HumanAnnotation>, CorpusError> {
    read_annotation_rows(path)?
        .into_iter()
        .map(|(line, row)| {
            let narrative = narratives.iter().find(|n| n.id == row.narrative_id).ok_or_else(|| {
                CorpusError::Malformed {
                    path: path.to_path_buf(),
                    row: line,
                    message: format!("unknown narrative {:?}", row.narrative_id),
                }
            })?;
            annotation_from_row(path, line, row, narrative)
        })
        .collect()
}

/// Annotation rows for a single narrative; rows for other narratives are skipped.
pub fn ingest_human_annotations(path: &Path, narrative: &Narrative) -> Result<Vec<HumanAnnotation>, CorpusError> {
    read_annotation_rows(path)?
        .into_iter()
        .filter(|(_, row)| row.narrative_id == narrative.id)
        .map(|(line, row)| annotation_from_row(path, line, row, narrative))
        .collect()
}

pub fn write_annotations(path: &Path, annotations: &[HumanAnnotation]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(["participant_id", "narrative_id", "boundaries"]).map_err(|e| io(e.into()))?;
    for a in annotations {
        let joined = a.boundaries.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([a.participant_id.as_str(), a.narrative_id.as_str(), joined.as_str()])
            .map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

pub fn ingest_ratings(path: &Path) -> Result<Vec<RatingRecord>, CorpusError> {
    let mut reader = csv_reader(path)?;
    let mut out = Vec::new();
    for result in reader.deserialize::<RatingRecord>() {
        let rec: RatingRecord = result.map_err(|e| CorpusError::Malformed {
            path: path.to_path_buf(),
            row: row_of(&e),
            message: e.to_string(),
        })?;
        if !(1..=10).contains(&rec.confidence) {
            return Err(CorpusError::InvalidRating {
                participant: rec.participant_id,
                message: format!("confidence {} outside 1..=10", rec.confidence),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_ratings(path: &Path, ratings: &[RatingRecord]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    for r in ratings {
        w.serialize(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}
