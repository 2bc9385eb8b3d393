//! Batch pipeline: each [`Command`] reads earlier artifacts under the output
//! root and writes its own, stamped with the config hash and seed.

pub mod config;
pub mod output;
mod recall;
mod report;
mod segmentation;
pub mod simulate;
pub mod svg;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub use config::{BackendKind, ConfigError, PipelineConfig};
pub use output::{fmt_sig, read_json, Meta, Writer};

use crate::cache::key_u64;
use crate::corpus::{BoundarySet, Narrative};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Segment,
    IngestHuman,
    AnalyzeSeg,
    Embed,
    ScoreRecall,
    Validate,
    Report,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Segment => "segment",
            Command::IngestHuman => "ingest-human",
            Command::AnalyzeSeg => "analyze-seg",
            Command::Embed => "embed",
            Command::ScoreRecall => "score-recall",
            Command::Validate => "validate",
            Command::Report => "report",
            Command::All => "all",
        }
    }
}

/// Directories skipped by the manifest.
const UNLISTED: &[&str] = &["cache"];

/// Resolved input locations.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub narrative_dir: PathBuf,
    pub annotations: PathBuf,
    pub ratings: PathBuf,
    pub recall_dir: PathBuf,
    pub human_scores: PathBuf,
    pub vectors: Option<PathBuf>,
    pub ground_truth: PathBuf,
}

impl Inputs {
    fn resolve(cfg: &PipelineConfig) -> Self {
        let syn = cfg.out.join("synthetic");
        let c = &cfg.corpus;
        let or = |p: &Option<PathBuf>, fallback: &str| p.clone().unwrap_or_else(|| syn.join(fallback));
        Self {
            narrative_dir: or(&c.narrative_dir, "narratives"),
            annotations: or(&c.annotations, "annotations.csv"),
            ratings: or(&c.ratings, "ratings.csv"),
            recall_dir: or(&c.recall_dir, "recalls"),
            human_scores: or(&c.human_scores, "human_scores.csv"),
            vectors: c.vectors.clone(),
            ground_truth: or(&c.ground_truth, "ground_truth.json"),
        }
    }

    /// True when some input still points at the simulator's layout.
    fn uses_synthetic(cfg: &PipelineConfig) -> bool {
        let c = &cfg.corpus;
        c.narrative_dir.is_none() || c.annotations.is_none() || c.recall_dir.is_none() || c.human_scores.is_none()
    }
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    pub w: Writer,
    pub inputs: Inputs,
}

impl Ctx<'_> {
    /// Seed for one named sub-computation.
    pub fn sub_seed(&self, parts: &[&str]) -> u64 {
        let mut bytes: Vec<&[u8]> = vec![b"seed"];
        let seed = self.cfg.seed.to_le_bytes();
        bytes.push(&seed);
        bytes.extend(parts.iter().map(|p| p.as_bytes()));
        key_u64(&bytes)
    }

    pub fn narratives(&self) -> Result<Vec<Narrative>> {
        load_narratives(&self.inputs.narrative_dir)
    }

    /// `{"id": [indices]}` for the mock LLM; empty when the file is absent.
    pub fn ground_truth(&self) -> Result<HashMap<String, BoundarySet>> {
        let p = &self.inputs.ground_truth;
        if !p.exists() {
            return Ok(HashMap::new());
        }
        let m: BTreeMap<String, Vec<usize>> = read_json(p)?;
        Ok(m.into_iter().map(|(k, v)| (k, BoundarySet::new(v))).collect())
    }

    pub fn artifact(&self, rel: &str) -> Result<PathBuf> {
        let p = self.w.path(rel);
        if !p.exists() {
            bail!("{} not found; run the earlier pipeline steps first", p.display());
        }
        Ok(p)
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    v.sort();
    Ok(v)
}

/// Every `*.txt` in `dir`, sorted by file name; the stem is the narrative id.
pub fn load_narratives(dir: &Path) -> Result<Vec<Narrative>> {
    let narratives: Vec<Narrative> = sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .map(|p| Narrative::from_file(&p).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    if narratives.is_empty() {
        bail!("no .txt narratives in {}", dir.display());
    }
    Ok(narratives)
}

/// Recall transcripts laid out as `{dir}/{participant}/{narrative}.txt`,
/// returned as `(participant, narrative, text)` sorted by both ids.
pub fn load_recalls(dir: &Path) -> Result<Vec<(String, String, String)>> {
    let mut out = Vec::new();
    for p in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let pid = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for f in sorted_entries(&p)?.into_iter().filter(|f| f.extension().is_some_and(|e| e == "txt")) {
            let nid = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let text = fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
            out.push((pid.clone(), nid, text));
        }
    }
    Ok(out)
}

/// File-name-safe form of an identifier.
pub(crate) fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Group label for one model and temperature, e.g. `gpt-4@t0.5`.
pub fn llm_group(model: &str, temperature: f64) -> String {
    format!("{model}@t{}", fmt_sig(temperature, 6))
}

fn run_one(ctx: &Ctx, cmd: Command) -> Result<()> {
    log::info!("{}", cmd.name());
    match cmd {
        Command::Simulate => simulate_cmd(ctx),
        Command::Segment => segmentation::segment(ctx),
        Command::IngestHuman => segmentation::ingest_human(ctx),
        Command::AnalyzeSeg => segmentation::analyze(ctx),
        Command::Embed => recall::embed(ctx),
        Command::ScoreRecall => recall::score(ctx),
        Command::Validate => recall::validate(ctx),
        Command::Report => report::report(ctx),
        Command::All => {
            if Inputs::uses_synthetic(ctx.cfg) {
                simulate_cmd(ctx)?;
            }
            for c in [
                Command::Segment,
                Command::IngestHuman,
                Command::AnalyzeSeg,
                Command::Embed,
                Command::ScoreRecall,
                Command::Validate,
                Command::Report,
            ] {
                run_one(ctx, c).with_context(|| format!("{} failed", c.name()))?;
            }
            Ok(())
        }
    }
}

/// Runs one command and refreshes `manifest.json`, also after a failure so
/// the artifacts already written stay listed.
pub fn run(cmd: Command, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let ctx = Ctx { cfg, w: Writer::new(&cfg.out, Meta::new(cfg.hash(), cfg.seed)), inputs: Inputs::resolve(cfg) };
    // the hashed form, so the copy does not depend on where output goes
    let mut echoed = cfg.clone();
    echoed.out = PathBuf::new();
    ctx.w.text("config.toml", &echoed.to_toml())?;
    let result = run_one(&ctx, cmd);
    output::write_manifest(&ctx.w, UNLISTED)?;
    result
}

fn simulate_cmd(ctx: &Ctx) -> Result<()> {
    use crate::corpus::HumanAnnotation;
    let ws = simulate::simulate_workspace(&ctx.cfg.simulate, ctx.sub_seed(&["simulate"]));
    let w = &ctx.w;
    for s in &ws.narratives {
        w.text(&format!("synthetic/narratives/{}.txt", s.narrative.id), &format!("{}\n", s.narrative.text))?;
    }
    w.json("synthetic/ground_truth.json", &ws.ground_truth())?;
    let joined = |a: &HumanAnnotation| a.boundaries.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(";");
    let rows: Vec<Vec<String>> =
        ws.annotations.iter().map(|a| vec![a.participant_id.clone(), a.narrative_id.clone(), joined(a)]).collect();
    w.csv("synthetic/annotations.csv", &["participant_id", "narrative_id", "boundaries"], &rows)?;
    let rows: Vec<Vec<String>> = ws
        .ratings
        .iter()
        .map(|r| {
            vec![
                r.participant_id.clone(),
                r.narrative_id.clone(),
                r.mark_token_index.to_string(),
                r.judged_boundary.to_string(),
                r.confidence.to_string(),
            ]
        })
        .collect();
    w.csv(
        "synthetic/ratings.csv",
        &["participant_id", "narrative_id", "mark_token_index", "judged_boundary", "confidence"],
        &rows,
    )?;
    for r in &ws.recalls {
        w.text(&format!("synthetic/recalls/{}/{}.txt", r.participant_id, r.narrative_id), &format!("{}\n", r.text))?;
    }
    let rows: Vec<Vec<String>> = ws
        .human_scores
        .iter()
        .map(|h| vec![h.participant_id.clone(), h.narrative_id.clone(), h.event_index.to_string(), h.gist_score.to_string()])
        .collect();
    w.csv("synthetic/human_scores.csv", &["participant_id", "narrative_id", "event_index", "gist_score"], &rows)?;
    Ok(())
}
