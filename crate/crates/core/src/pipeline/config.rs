use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::cache_key;
use crate::extract::DEFAULT_COVERAGE_THRESHOLD;
use crate::llm::{MockCorruption, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::recall::BaselineMode;
use crate::retry::RetryPolicy;
use crate::seg_metrics::RatingScale;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

/// Input locations. Unset paths fall back to the simulator's layout under `{out}/synthetic`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Directory of `*.txt` narratives; the file stem is the narrative id.
    pub narrative_dir: Option<PathBuf>,
    /// `participant_id,narrative_id,boundaries` rows with `;`-separated indices.
    pub annotations: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    /// `{participant}/{narrative}.txt` recall transcripts.
    pub recall_dir: Option<PathBuf>,
    /// `participant_id,narrative_id,event_index,gist_score` rows.
    pub human_scores: Option<PathBuf>,
    /// Precomputed embedding JSONL; when set, the embedding backend is not called.
    pub vectors: Option<PathBuf>,
    /// Mock-backend boundaries as `{"narrative_id": [indices…]}`.
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub backend: BackendKind,
    pub base_url: String,
    pub api_key_env: String,
    pub models: Vec<String>,
    pub temperatures: Vec<f64>,
    pub n_instances: usize,
    pub max_output_tokens: u32,
    pub parallelism: usize,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    /// Relative paths resolve against the output directory.
    pub cache_dir: Option<PathBuf>,
    pub mock: MockCorruption,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            models: vec!["gpt-4".into()],
            temperatures: vec![0.0, 0.5, 1.0],
            n_instances: 20,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            parallelism: 4,
            timeout_secs: 300,
            retry: RetryPolicy::default(),
            cache_dir: Some("cache/llm".into()),
            mock: MockCorruption { temperature_jitter_gain: 3.0, substitution_rate: 0.01, ..MockCorruption::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub coverage_threshold: f64,
    /// Keep flagged LLM instances in group statistics.
    pub include_flagged: bool,
    pub group_size: usize,
    pub consistency_iterations: usize,
    /// Token window for matching peaks across groups.
    pub tolerance: usize,
    /// Source of normative boundaries and of recall/narrative event segments.
    pub normative_model: String,
    pub normative_temperature: f64,
    pub rating_scale: RatingScale,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
            include_flagged: false,
            group_size: 10,
            consistency_iterations: 100,
            tolerance: 0,
            normative_model: "gpt-4".into(),
            normative_temperature: 0.0,
            rating_scale: RatingScale::Tenths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub backend: BackendKind,
    pub base_url: String,
    pub api_key_env: String,
    pub models: Vec<String>,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub cache_dir: Option<PathBuf>,
    pub mock_dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            models: vec!["mock-embed".into()],
            batch_size: 64,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
            cache_dir: Some("cache/embed".into()),
            mock_dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecallConfig {
    pub split_half_iterations: usize,
    pub baseline_mode: BaselineMode,
    /// LLM instances per recall transcript when segmenting recalls.
    pub segmentation_instances: usize,
}

impl Default for RecallConfig {
    fn default() -> Self {
        Self { split_half_iterations: 10_000, baseline_mode: BaselineMode::NarrativeMean, segmentation_instances: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_narratives: usize,
    pub events_per_narrative: usize,
    pub sentences_per_event: (usize, usize),
    pub words_per_sentence: (usize, usize),
    pub n_participants: usize,
    pub n_raters: usize,
    pub jitter_sd: f64,
    pub miss_rate: f64,
    pub false_alarm_rate: f64,
    /// Probability that a participant recalls a given event.
    pub recall_rate: f64,
    /// Share of words in a recalled sentence drawn from the event's own vocabulary.
    pub recall_fidelity: (f64, f64),
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_narratives: 3,
            events_per_narrative: 15,
            sentences_per_event: (6, 10),
            words_per_sentence: (9, 15),
            n_participants: 20,
            n_raters: 11,
            jitter_sd: 2.0,
            miss_rate: 0.2,
            false_alarm_rate: 0.002,
            recall_rate: 0.7,
            recall_fidelity: (0.2, 0.8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Output root; not part of the config hash.
    pub out: PathBuf,
    pub corpus: CorpusConfig,
    pub llm: LlmConfig,
    pub segmentation: SegmentationConfig,
    pub embedding: EmbeddingConfig,
    pub recall: RecallConfig,
    pub simulate: SimulateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: "out".into(),
            corpus: CorpusConfig::default(),
            llm: LlmConfig::default(),
            segmentation: SegmentationConfig::default(),
            embedding: EmbeddingConfig::default(),
            recall: RecallConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

fn unit(name: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} = {p} is outside [0, 1]")))
    }
}

fn positive(name: &str, n: usize) -> Result<(), ConfigError> {
    if n >= 1 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be at least 1")))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over the config with `out` cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        cache_key(&[c.to_toml().as_bytes()])[..16].to_string()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let l = &self.llm;
        positive("llm.n_instances", l.n_instances)?;
        positive("llm.parallelism", l.parallelism)?;
        positive("llm.retry.max_attempts", l.retry.max_attempts as usize)?;
        if l.models.is_empty() || l.temperatures.is_empty() {
            return Err(ConfigError::Invalid("llm.models and llm.temperatures must be non-empty".into()));
        }
        for &t in &l.temperatures {
            unit("llm.temperatures", t)?;
        }
        unit("llm.mock.substitution_rate", l.mock.substitution_rate)?;
        unit("llm.mock.segment_drop_rate", l.mock.segment_drop_rate)?;
        if l.mock.boundary_jitter_sd < 0.0 || l.mock.temperature_jitter_gain < 0.0 {
            return Err(ConfigError::Invalid("mock jitter parameters must be non-negative".into()));
        }
        let s = &self.segmentation;
        unit("segmentation.coverage_threshold", s.coverage_threshold)?;
        positive("segmentation.group_size", s.group_size)?;
        positive("segmentation.consistency_iterations", s.consistency_iterations)?;
        if !l.models.contains(&s.normative_model) {
            return Err(ConfigError::Invalid(format!("segmentation.normative_model {} is not in llm.models", s.normative_model)));
        }
        if !l.temperatures.contains(&s.normative_temperature) {
            return Err(ConfigError::Invalid(format!(
                "segmentation.normative_temperature {} is not in llm.temperatures",
                s.normative_temperature
            )));
        }
        let e = &self.embedding;
        positive("embedding.batch_size", e.batch_size)?;
        if e.models.is_empty() {
            return Err(ConfigError::Invalid("embedding.models must be non-empty".into()));
        }
        if e.mock_dim < 2 {
            return Err(ConfigError::Invalid("embedding.mock_dim must be at least 2".into()));
        }
        positive("recall.split_half_iterations", self.recall.split_half_iterations)?;
        positive("recall.segmentation_instances", self.recall.segmentation_instances)?;
        let m = &self.simulate;
        positive("simulate.n_narratives", m.n_narratives)?;
        positive("simulate.events_per_narrative", m.events_per_narrative)?;
        positive("simulate.n_participants", m.n_participants)?;
        positive("simulate.n_raters", m.n_raters)?;
        for (name, (lo, hi)) in [("sentences_per_event", m.sentences_per_event), ("words_per_sentence", m.words_per_sentence)] {
            if lo == 0 || lo > hi {
                return Err(ConfigError::Invalid(format!("simulate.{name} must be a range with 1 <= min <= max")));
            }
        }
        unit("simulate.miss_rate", m.miss_rate)?;
        unit("simulate.false_alarm_rate", m.false_alarm_rate)?;
        unit("simulate.recall_rate", m.recall_rate)?;
        unit("simulate.recall_fidelity.0", m.recall_fidelity.0)?;
        unit("simulate.recall_fidelity.1", m.recall_fidelity.1)?;
        if m.jitter_sd < 0.0 {
            return Err(ConfigError::Invalid("simulate.jitter_sd must be non-negative".into()));
        }
        Ok(())
    }

    /// A path from the config, resolved against the output directory when relative.
    pub fn under_out(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(p)
        }
    }
}
