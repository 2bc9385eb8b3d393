use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cache::key_u64;
use crate::corpus::{BoundarySet, HumanAnnotation, Narrative, RatingRecord};
use crate::embed::{recall_owner, EmbeddingVector};
use crate::recall::HumanScore;
use crate::scalar::Real;
use crate::seg_metrics::{select_non_boundaries, NormativeBoundaries};
use crate::stats::RngStream;

use super::config::SimulateConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCohortSpec {
    pub ground_truth: BoundarySet,
    pub n_participants: usize,
    pub jitter_sd: f64,
    pub miss_rate: f64,
    /// Per-token probability of a spurious boundary.
    pub false_alarm_rate: f64,
    pub seed: u64,
}

pub fn participant_id(i: usize) -> String {
    format!("p{:02}", i + 1)
}

fn stream_seed(seed: u64, label: &str) -> u64 {
    key_u64(&[&seed.to_le_bytes(), label.as_bytes()])
}

/// Noisy human annotations around a ground truth: each true boundary is
/// kept with probability `1 − miss_rate` and shifted by a rounded Gaussian
/// offset, then false alarms are added token by token.
pub fn simulate_cohort(spec: &SyntheticCohortSpec, narrative: &Narrative) -> Vec<HumanAnnotation> {
    let n = narrative.token_count();
    let master = stream_seed(spec.seed, &narrative.id);
    (0..spec.n_participants)
        .map(|p| {
            let mut rng = RngStream::new(master, p as u64);
            let mut marks = Vec::new();
            if n >= 2 {
                for b in spec.ground_truth.iter().filter(|&b| b > 0 && b < n) {
                    if spec.miss_rate > 0.0 && rng.bernoulli(spec.miss_rate) {
                        continue;
                    }
                    let shift = if spec.jitter_sd > 0.0 { rng.normal(0.0, spec.jitter_sd).round() } else { 0.0 };
                    marks.push((b as f64 + shift).clamp(1.0, (n - 1) as f64) as usize);
                }
                if spec.false_alarm_rate > 0.0 {
                    marks.extend((1..n).filter(|_| rng.bernoulli(spec.false_alarm_rate)));
                }
            }
            HumanAnnotation {
                participant_id: participant_id(p),
                narrative_id: narrative.id.clone(),
                boundaries: BoundarySet::new(marks),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecallOrder {
    Original,
    Reversed,
    Permuted,
}

/// Recall vectors as reordered narrative vectors plus elementwise Gaussian noise.
pub fn simulate_recall_vectors<T: Real>(
    narrative_vecs: &[EmbeddingVector<T>],
    participant_id: &str,
    noise_sd: f64,
    order: RecallOrder,
    seed: u64,
) -> Vec<EmbeddingVector<T>> {
    let Some(first) = narrative_vecs.first() else { return Vec::new() };
    let mut rng = RngStream::new(stream_seed(seed, &recall_owner(participant_id, &first.owner_id)), 0);
    let mut idx: Vec<usize> = (0..narrative_vecs.len()).collect();
    match order {
        RecallOrder::Original => {}
        RecallOrder::Reversed => idx.reverse(),
        RecallOrder::Permuted => rng.shuffle(&mut idx),
    }
    let owner = recall_owner(participant_id, &first.owner_id);
    idx.iter()
        .enumerate()
        .map(|(k, &i)| EmbeddingVector {
            owner_id: owner.clone(),
            event_index: k,
            model_id: narrative_vecs[i].model_id.clone(),
            values: narrative_vecs[i]
                .values
                .iter()
                .map(|&v| if noise_sd > 0.0 { v + T::of(rng.normal(0.0, noise_sd)) } else { v })
                .collect(),
        })
        .collect()
}

const COMMON_WORDS: [&str; 24] = [
    "the", "a", "and", "then", "she", "he", "was", "to", "of", "in", "with", "they", "it", "that", "on", "at",
    "for", "as", "by", "from", "her", "his", "there", "one",
];
const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

fn pseudo_word(rng: &mut RngStream) -> String {
    let syllables = 2 + rng.index(2);
    (0..syllables).map(|_| format!("{}{}", ONSETS[rng.index(ONSETS.len())], VOWELS[rng.index(VOWELS.len())])).collect()
}

fn in_range(rng: &mut RngStream, (lo, hi): (usize, usize)) -> usize {
    lo + rng.index(hi - lo + 1)
}

fn sentence(rng: &mut RngStream, topic: &[String], topic_share: f64, words: usize) -> String {
    let mut ws: Vec<String> = (0..words.max(1))
        .map(|_| {
            if rng.bernoulli(topic_share) {
                topic[rng.index(topic.len())].clone()
            } else {
                COMMON_WORDS[rng.index(COMMON_WORDS.len())].to_string()
            }
        })
        .collect();
    let mut chars = ws[0].chars();
    if let Some(c) = chars.next() {
        ws[0] = c.to_uppercase().chain(chars).collect();
    }
    let last = ws.len() - 1;
    ws[last].push('.');
    ws.join(" ")
}

/// A generated narrative with its event structure.
#[derive(Debug, Clone)]
pub struct SyntheticNarrative {
    pub narrative: Narrative,
    pub ground_truth: BoundarySet,
    pub topics: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticRecall {
    pub participant_id: String,
    pub narrative_id: String,
    pub text: String,
    /// Token indices where a new recalled event starts.
    pub ground_truth: BoundarySet,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorkspace {
    pub narratives: Vec<SyntheticNarrative>,
    pub annotations: Vec<HumanAnnotation>,
    pub ratings: Vec<RatingRecord>,
    pub recalls: Vec<SyntheticRecall>,
    pub human_scores: Vec<HumanScore>,
}

impl SyntheticWorkspace {
    /// Mock-backend boundaries for narratives and recall transcripts.
    pub fn ground_truth(&self) -> BTreeMap<String, Vec<usize>> {
        let mut m: BTreeMap<String, Vec<usize>> =
            self.narratives.iter().map(|s| (s.narrative.id.clone(), s.ground_truth.as_slice().to_vec())).collect();
        for r in &self.recalls {
            m.insert(recall_owner(&r.participant_id, &r.narrative_id), r.ground_truth.as_slice().to_vec());
        }
        m
    }
}

fn generate_narrative(k: usize, cfg: &SimulateConfig, rng: &mut RngStream, used: &mut HashSet<String>) -> SyntheticNarrative {
    let mut topics = Vec::with_capacity(cfg.events_per_narrative);
    for _ in 0..cfg.events_per_narrative {
        let mut t = Vec::new();
        while t.len() < 12 {
            let w = pseudo_word(rng);
            if used.insert(w.clone()) {
                t.push(w);
            }
        }
        topics.push(t);
    }
    let mut sentences = Vec::new();
    let mut starts = Vec::new();
    let mut tokens = 0;
    for topic in &topics {
        starts.push(tokens);
        for _ in 0..in_range(rng, cfg.sentences_per_event) {
            let words = in_range(rng, cfg.words_per_sentence);
            sentences.push(sentence(rng, topic, 0.55, words));
            tokens += words;
        }
    }
    let id = format!("story{}", k + 1);
    SyntheticNarrative {
        narrative: Narrative::new(&id, format!("Story {}", k + 1), sentences.join(" ")),
        ground_truth: starts.into_iter().filter(|&s| s > 0).collect(),
        topics,
    }
}

/// Narratives, annotations, ratings, recall transcripts and gist scores, all from `seed`.
pub fn simulate_workspace(cfg: &SimulateConfig, seed: u64) -> SyntheticWorkspace {
    let mut rng = RngStream::new(stream_seed(seed, "narratives"), 0);
    let mut used = HashSet::new();
    let narratives: Vec<SyntheticNarrative> =
        (0..cfg.n_narratives).map(|k| generate_narrative(k, cfg, &mut rng, &mut used)).collect();

    let mut annotations = Vec::new();
    for s in &narratives {
        let spec = SyntheticCohortSpec {
            ground_truth: s.ground_truth.clone(),
            n_participants: cfg.n_participants,
            jitter_sd: cfg.jitter_sd,
            miss_rate: cfg.miss_rate,
            false_alarm_rate: cfg.false_alarm_rate,
            seed,
        };
        annotations.extend(simulate_cohort(&spec, &s.narrative));
    }

    let mut ratings = Vec::new();
    for s in &narratives {
        let nb = NormativeBoundaries {
            narrative_id: s.narrative.id.clone(),
            n: s.ground_truth.len(),
            indices: s.ground_truth.as_slice().to_vec(),
            flagged: false,
        };
        let (controls, _) = select_non_boundaries(&nb, &s.narrative.sentence_starts(), s.narrative.token_count());
        let mut rng = RngStream::new(stream_seed(seed, &format!("ratings/{}", s.narrative.id)), 0);
        for r in 0..cfg.n_raters {
            let rater = format!("r{:02}", r + 1);
            let marks = nb.indices.iter().map(|&i| (i, true)).chain(controls.iter().map(|&i| (i, false)));
            for (idx, is_boundary) in marks {
                let (p_yes, conf_mean, conf_sd) = if is_boundary { (0.9, 8.0, 1.5) } else { (0.5, 4.0, 2.0) };
                ratings.push(RatingRecord {
                    participant_id: rater.clone(),
                    narrative_id: s.narrative.id.clone(),
                    mark_token_index: idx,
                    judged_boundary: rng.bernoulli(p_yes),
                    confidence: rng.normal(conf_mean, conf_sd).round().clamp(1.0, 10.0) as u8,
                });
            }
        }
    }

    let mut recalls = Vec::new();
    let mut human_scores = Vec::new();
    for s in &narratives {
        for p in 0..cfg.n_participants {
            let pid = participant_id(p);
            let mut rng = RngStream::new(stream_seed(seed, &recall_owner(&pid, &s.narrative.id)), 0);
            let mut recalled: Vec<(usize, f64)> = (0..s.topics.len())
                .filter_map(|e| {
                    let f = cfg.recall_fidelity.0 + (cfg.recall_fidelity.1 - cfg.recall_fidelity.0) * rng.uniform();
                    rng.bernoulli(cfg.recall_rate).then_some((e, f))
                })
                .collect();
            if recalled.is_empty() {
                recalled.push((0, cfg.recall_fidelity.1));
            }
            // occasional transposition of neighbouring events
            for k in 1..recalled.len() {
                if rng.bernoulli(0.1) {
                    recalled.swap(k - 1, k);
                }
            }
            let mut sentences = Vec::new();
            let mut starts = Vec::new();
            let mut tokens = 0;
            for &(e, f) in &recalled {
                starts.push(tokens);
                for _ in 0..1 + rng.index(2) {
                    let words = in_range(&mut rng, cfg.words_per_sentence);
                    sentences.push(sentence(&mut rng, &s.topics[e], f, words));
                    tokens += words;
                }
            }
            for e in 0..s.topics.len() {
                let gist = match recalled.iter().find(|r| r.0 == e) {
                    Some(&(_, f)) => (10.0 * f + rng.normal(0.0, 1.0)).round().clamp(0.0, 10.0) as u8,
                    None => 0,
                };
                human_scores.push(HumanScore {
                    participant_id: pid.clone(),
                    narrative_id: s.narrative.id.clone(),
                    event_index: e,
                    gist_score: gist,
                });
            }
            recalls.push(SyntheticRecall {
                participant_id: pid,
                narrative_id: s.narrative.id.clone(),
                text: sentences.join(" "),
                ground_truth: starts.into_iter().filter(|&t| t > 0).collect(),
            });
        }
    }
    SyntheticWorkspace { narratives, annotations, ratings, recalls, human_scores }
}
