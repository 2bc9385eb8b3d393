use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{story_from_prompt, BackendError, ChatBackend, SegmentationRequest};
use crate::cache::{key_u64, temperature_bytes};
use crate::corpus::{detect_sentence_ends, tokenize, BoundarySet};
use crate::stats::RngStream;

/// Corruption model for the offline backend. All rates are per token or per segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockCorruption {
    pub substitution_rate: f64,
    pub segment_drop_rate: f64,
    /// Standard deviation in tokens of the shift applied to each boundary.
    pub boundary_jitter_sd: f64,
    /// Extra jitter sd per unit of temperature.
    pub temperature_jitter_gain: f64,
    /// Boundary spacing, in sentences, for narratives with no ground truth.
    pub sentences_per_event: usize,
    pub seed: u64,
}

impl Default for MockCorruption {
    fn default() -> Self {
        Self {
            substitution_rate: 0.0,
            segment_drop_rate: 0.0,
            boundary_jitter_sd: 0.0,
            temperature_jitter_gain: 0.0,
            sentences_per_event: 5,
            seed: 0,
        }
    }
}

/// Deterministic stand-in for a chat model: copies the story from the prompt
/// with line breaks at ground-truth boundaries, optionally corrupted.
pub struct MockChatBackend {
    corruption: MockCorruption,
    ground_truth: HashMap<String, BoundarySet>,
}

impl MockChatBackend {
    pub fn new(corruption: MockCorruption, ground_truth: HashMap<String, BoundarySet>) -> Self {
        Self { corruption, ground_truth }
    }

    fn default_boundaries(&self, sentence_starts: &[usize]) -> BoundarySet {
        let k = self.corruption.sentences_per_event.max(1);
        sentence_starts.iter().copied().skip(k - 1).step_by(k).collect()
    }

    /// The segmented copy for one request, given the story text.
    pub fn segmented_copy(&self, request: &SegmentationRequest, story: &str) -> String {
        let c = &self.corruption;
        let tokens = tokenize(story);
        let n = tokens.len();
        if n == 0 {
            return String::new();
        }
        let master = key_u64(&[
            &c.seed.to_le_bytes(),
            request.narrative_id.as_bytes(),
            request.model_id.as_bytes(),
            &temperature_bytes(request.temperature),
        ]);
        let mut rng = RngStream::new(master, request.instance_index as u64);
        let boundaries = match self.ground_truth.get(&request.narrative_id) {
            Some(b) => b.clone(),
            None => {
                let starts: Vec<usize> =
                    detect_sentence_ends(&tokens).into_iter().map(|e| e + 1).filter(|&s| s < n).collect();
                self.default_boundaries(&starts)
            }
        };
        let sd = c.boundary_jitter_sd + c.temperature_jitter_gain * request.temperature;
        let boundaries: BoundarySet = boundaries
            .iter()
            .filter(|&b| b > 0 && b < n)
            .map(|b| {
                if sd > 0.0 {
                    let shifted = b as f64 + rng.normal(0.0, sd).round();
                    shifted.clamp(1.0, (n - 1) as f64) as usize
                } else {
                    b
                }
            })
            .collect();

        let mut cuts = vec![0];
        cuts.extend(boundaries.iter());
        cuts.push(n);
        let mut segments: Vec<String> = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let keep = c.segment_drop_rate <= 0.0 || !rng.bernoulli(c.segment_drop_rate);
            let words: Vec<String> = tokens[w[0]..w[1]]
                .iter()
                .map(|t| {
                    if c.substitution_rate > 0.0 && rng.bernoulli(c.substitution_rate) {
                        substitute(&t.surface, &mut rng)
                    } else {
                        t.surface.clone()
                    }
                })
                .collect();
            if keep {
                segments.push(words.join(" "));
            }
        }
        if segments.is_empty() {
            segments.push(tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "));
        }
        segments.join("\n")
    }
}

/// A nonsense word carrying the original's trailing punctuation.
fn substitute(surface: &str, rng: &mut RngStream) -> String {
    let tail: String = surface.chars().rev().take_while(|c| !c.is_alphanumeric()).collect::<Vec<_>>().into_iter().rev().collect();
    let letters: String = (0..5).map(|_| (b'a' + rng.below(26) as u8) as char).collect();
    format!("xq{letters}{tail}")
}

impl ChatBackend for MockChatBackend {
    fn chat(&self, request: &SegmentationRequest, prompt: &str) -> Result<String, BackendError> {
        let story = story_from_prompt(prompt)
            .ok_or_else(|| BackendError::Malformed("prompt does not follow the segmentation template".into()))?;
        Ok(self.segmented_copy(request, story))
    }

    fn name(&self) -> &str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::corpus::Narrative;
    use crate::llm::{build_segmentation_prompt, LlmGateway};

    const STORY: &str = "Ann woke up. She ate toast. The bus came late. Work was slow. \
                         Lunch was soup. She met Bo. They talked. Night fell.";

    fn truth(b: &[usize]) -> HashMap<String, BoundarySet> {
        [("n".to_string(), BoundarySet::new(b.iter().copied()))].into_iter().collect()
    }

    #[test]
    fn canned_boundaries_echo_the_story() {
        let m = MockChatBackend::new(MockCorruption::default(), truth(&[3, 6]));
        let req = SegmentationRequest::new("n", "mock", 0.0, 0);
        let out = m.chat(&req, &build_segmentation_prompt("a b c d e f g h").unwrap()).unwrap();
        assert_eq!(out, "a b c\nd e f\ng h");
    }

    #[test]
    fn default_spacing_uses_sentences() {
        let c = MockCorruption { sentences_per_event: 2, ..Default::default() };
        let m = MockChatBackend::new(c, HashMap::new());
        let out = m.segmented_copy(&SegmentationRequest::new("x", "mock", 0.0, 0), STORY);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "Ann woke up. She ate toast.");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn corruption_is_seeded() {
        let c = MockCorruption { substitution_rate: 0.2, boundary_jitter_sd: 1.0, segment_drop_rate: 0.1, ..Default::default() };
        let m = MockChatBackend::new(c, truth(&[4, 9, 13]));
        let a = m.segmented_copy(&SegmentationRequest::new("n", "mock", 0.5, 3), STORY);
        let b = m.segmented_copy(&SegmentationRequest::new("n", "mock", 0.5, 3), STORY);
        let other = m.segmented_copy(&SegmentationRequest::new("n", "mock", 0.5, 4), STORY);
        assert_eq!(a, b);
        assert_ne!(a, other);
        assert!(a.contains("xq"));
    }

    #[test]
    fn gateway_runs_are_reproducible() {
        let c = MockCorruption { boundary_jitter_sd: 2.0, seed: 9, ..Default::default() };
        let gw = LlmGateway::new(Arc::new(MockChatBackend::new(c, truth(&[4, 9, 13]))));
        let narrative = Narrative::new("n", "t", STORY);
        let a: Vec<String> = gw.run_instances(&narrative, "mock", 1.0, 20).unwrap().into_iter().map(|r| r.raw_text).collect();
        let b: Vec<String> = gw.run_instances(&narrative, "mock", 1.0, 20).unwrap().into_iter().map(|r| r.raw_text).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_foreign_prompt() {
        let m = MockChatBackend::new(MockCorruption::default(), HashMap::new());
        assert!(m.chat(&SegmentationRequest::new("n", "mock", 0.0, 0), "hello").is_err());
    }
}
