use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RecallError;

/// One rater's 0–10 gist score for one narrative event in one recall.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanScore {
    pub participant_id: String,
    pub narrative_id: String,
    pub event_index: usize,
    pub gist_score: u8,
}

pub fn read_human_scores(path: &Path) -> Result<Vec<HumanScore>, RecallError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| RecallError::Csv(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<HumanScore>() {
        let s = row.map_err(|e| RecallError::Csv(format!("{}: {e}", path.display())))?;
        if s.gist_score > 10 {
            return Err(RecallError::Csv(format!(
                "{}: gist score {} for {}/{} event {} outside 0..=10",
                path.display(),
                s.gist_score,
                s.participant_id,
                s.narrative_id,
                s.event_index
            )));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_human_scores(path: &Path, scores: &[HumanScore]) -> Result<(), RecallError> {
    let err = |e: csv::Error| RecallError::Csv(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for s in scores {
        w.serialize(s).map_err(err)?;
    }
    w.flush().map_err(|e| RecallError::Csv(format!("{}: {e}", path.display())))
}
