//! `segment`, `ingest-human` and `analyze-seg`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use super::output::csv_num;
use super::{llm_group, load_recalls, read_json, slug, BackendKind, Ctx};
use crate::cache::{key_u64, DiskCache};
use crate::corpus::{ingest_annotations_for, ingest_ratings, HumanAnnotation, Narrative};
use crate::embed::recall_owner;
use crate::extract::{extract_boundaries, InstanceBoundaries, SourceInfo, SourceKind};
use crate::llm::{ChatBackend, HttpChatBackend, LlmGateway, MockChatBackend};
use crate::seg_metrics::{
    between_group_consistency, classify_shared_distinct, cross_agreement, loo_agreement,
    mean_series, normative_boundaries, rating_summary, select_non_boundaries, to_series, BoundaryKind, BoundarySeries,
    ConsistencyParams, MarkKind, RatingSummary,
};
use crate::stats;

pub(crate) const INSTANCES: &str = "segmentation/instances.json";
pub(crate) const RECALLS: &str = "segmentation/recalls.json";
pub(crate) const HUMAN_ANNOTATIONS: &str = "segmentation/human/annotations.csv";
pub(crate) const HUMAN_RATINGS: &str = "segmentation/human/ratings.csv";
pub(crate) const NORMATIVE: &str = "segmentation/normative.json";
pub(crate) const SUMMARY: &str = "segmentation/summary.json";

fn gateway(ctx: &Ctx) -> Result<LlmGateway> {
    let l = &ctx.cfg.llm;
    let backend: Arc<dyn ChatBackend> = match l.backend {
        BackendKind::Http => {
            Arc::new(HttpChatBackend::from_env(&l.base_url, &l.api_key_env, Duration::from_secs(l.timeout_secs)))
        }
        BackendKind::Mock => {
            let mut mock = l.mock;
            mock.seed = key_u64(&[&ctx.cfg.seed.to_le_bytes(), &l.mock.seed.to_le_bytes()]);
            Arc::new(MockChatBackend::new(mock, ctx.ground_truth()?))
        }
    };
    let mut g = LlmGateway::new(backend)
        .with_retry(l.retry)
        .with_parallelism(l.parallelism)
        .with_max_output_tokens(l.max_output_tokens);
    if let Some(dir) = &l.cache_dir {
        g = g.with_cache(DiskCache::open(ctx.cfg.under_out(dir))?);
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Failure {
    pub target: String,
    pub group: String,
    pub instance_index: Option<usize>,
    pub error: String,
}

/// Runs `n` instances on one text and extracts their boundaries.
fn segment_text(
    ctx: &Ctx,
    g: &LlmGateway,
    narrative: &Narrative,
    model: &str,
    temperature: f64,
    n: usize,
    failures: &mut Vec<Failure>,
) -> Result<Vec<InstanceBoundaries>> {
    let group = llm_group(model, temperature);
    let threshold = ctx.cfg.segmentation.coverage_threshold;
    let mut out = Vec::new();
    let results = match g.run_instances_partial(narrative, model, temperature, n) {
        Ok(r) => r,
        Err(e) => {
            failures.push(Failure { target: narrative.id.clone(), group, instance_index: None, error: e.to_string() });
            return Ok(out);
        }
    };
    for (i, r) in results.into_iter().enumerate() {
        let fail = |e: String| Failure { target: narrative.id.clone(), group: group.clone(), instance_index: Some(i), error: e };
        let record = match r {
            Ok(r) => r,
            Err(e) => {
                failures.push(fail(e.to_string()));
                continue;
            }
        };
        match extract_boundaries(narrative, &record.raw_text, threshold) {
            Ok(x) => out.push(InstanceBoundaries {
                narrative_id: narrative.id.clone(),
                source: SourceInfo {
                    kind: if g.backend_name() == "mock" { SourceKind::Mock } else { SourceKind::Llm },
                    model_id: Some(model.to_string()),
                    temperature: Some(temperature),
                    instance_index: Some(i),
                    participant_id: None,
                },
                boundaries: x.boundaries.as_slice().to_vec(),
                coverage: x.coverage,
                flagged: x.flagged,
                reason: x.reason,
            }),
            Err(e) => failures.push(fail(e.to_string())),
        }
    }
    Ok(out)
}

/// Event boundaries of one recall transcript, agreed over LLM instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RecallSegmentation {
    pub participant_id: String,
    pub narrative_id: String,
    pub boundaries: Vec<usize>,
    pub n_instances: usize,
    pub n_flagged: usize,
}

fn group_series(
    instances: &[&InstanceBoundaries],
    n: &Narrative,
    include_flagged: bool,
) -> Result<(Vec<BoundarySeries>, usize)> {
    let mut series = Vec::new();
    let mut excluded = 0;
    for inst in instances {
        if inst.flagged && !include_flagged {
            excluded += 1;
            continue;
        }
        let set = inst.boundaries.iter().copied().collect();
        series.push(to_series(&set, n.token_count(), &n.id, &inst.source.label())?);
    }
    Ok((series, excluded))
}

pub(crate) fn segment(ctx: &Ctx) -> Result<()> {
    let narratives = ctx.narratives()?;
    let g = gateway(ctx)?;
    let l = &ctx.cfg.llm;
    let mut failures = Vec::new();
    let mut all = Vec::new();
    for n in &narratives {
        for model in &l.models {
            for &t in &l.temperatures {
                let insts = segment_text(ctx, &g, n, model, t, l.n_instances, &mut failures)?;
                let dir = format!("segmentation/instances/{}/{}", slug(&n.id), slug(&llm_group(model, t)));
                for inst in &insts {
                    ctx.w.json(&format!("{dir}/{:02}.json", inst.source.instance_index.unwrap_or_default()), inst)?;
                }
                all.extend(insts);
            }
        }
    }
    ctx.w.json(INSTANCES, &all)?;

    if ctx.inputs.recall_dir.is_dir() {
        let s = &ctx.cfg.segmentation;
        let mut recalls = Vec::new();
        for (pid, nid, text) in load_recalls(&ctx.inputs.recall_dir)? {
            let owner = recall_owner(&pid, &nid);
            let r = Narrative::new(&owner, &owner, text);
            let n_inst = ctx.cfg.recall.segmentation_instances;
            let insts =
                segment_text(ctx, &g, &r, &s.normative_model, s.normative_temperature, n_inst, &mut failures)?;
            let refs: Vec<&InstanceBoundaries> = insts.iter().collect();
            let (mut series, n_flagged) = group_series(&refs, &r, false)?;
            if series.is_empty() {
                series = group_series(&refs, &r, true)?.0;
            }
            if series.is_empty() {
                continue;
            }
            let members: Vec<&BoundarySeries> = series.iter().collect();
            let nb = normative_boundaries(&members)?;
            recalls.push(RecallSegmentation {
                participant_id: pid,
                narrative_id: nid,
                boundaries: nb.indices,
                n_instances: insts.len(),
                n_flagged,
            });
        }
        ctx.w.json(RECALLS, &recalls)?;
    }
    if !failures.is_empty() {
        ctx.w.json("segmentation/failures.json", &failures)?;
        bail!("{} segmentation request(s) failed; see segmentation/failures.json", failures.len());
    }
    Ok(())
}

pub(crate) fn ingest_human(ctx: &Ctx) -> Result<()> {
    let narratives = ctx.narratives()?;
    let anns = ingest_annotations_for(&ctx.inputs.annotations, &narratives)?;
    let rows: Vec<Vec<String>> = anns
        .iter()
        .map(|a| {
            let joined = a.boundaries.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(";");
            vec![a.participant_id.clone(), a.narrative_id.clone(), joined]
        })
        .collect();
    ctx.w.csv(HUMAN_ANNOTATIONS, &["participant_id", "narrative_id", "boundaries"], &rows)?;
    if ctx.inputs.ratings.exists() {
        let ratings = ingest_ratings(&ctx.inputs.ratings)?;
        let rows: Vec<Vec<String>> = ratings
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
        ctx.w.csv(
            HUMAN_RATINGS,
            &["participant_id", "narrative_id", "mark_token_index", "judged_boundary", "confidence"],
            &rows,
        )?;
    }
    Ok(())
}

/// Per-narrative statistics for one segmenter group.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct GroupSummary {
    pub narrative_id: String,
    pub group: String,
    pub n_members: usize,
    pub n_flagged_excluded: usize,
    pub mean_count: Option<f64>,
    pub sd_count: Option<f64>,
    pub per_1000: Option<f64>,
    pub loo_mean: Option<f64>,
    pub loo_sd: Option<f64>,
    /// Humans against this group's mean series (LLM groups only).
    pub human_cross_mean: Option<f64>,
    pub shared_mean: Option<f64>,
    pub distinct_mean: Option<f64>,
    pub n_shared: usize,
    pub n_distinct: usize,
    pub consistency_hh_mean: Option<f64>,
    pub consistency_hl_mean: Option<f64>,
    pub consistency_defined: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct SegSummary {
    pub groups: Vec<GroupSummary>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct NormativeRecord {
    pub narrative_id: String,
    pub n: usize,
    pub indices: Vec<usize>,
    pub flagged: bool,
    pub non_boundary_indices: Vec<usize>,
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    (stats::mean(xs).ok(), stats::sample_sd(xs).ok())
}

const HUMAN: &str = "human";

pub(crate) fn analyze(ctx: &Ctx) -> Result<()> {
    let s = &ctx.cfg.segmentation;
    let narratives = ctx.narratives()?;
    let humans: Vec<HumanAnnotation> = ingest_annotations_for(&ctx.artifact(HUMAN_ANNOTATIONS)?, &narratives)?;
    let instances: Vec<InstanceBoundaries> = read_json(&ctx.artifact(INSTANCES)?)?;
    let mut summary = SegSummary::default();
    let (mut counts, mut agreement, mut shared, mut consistency) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut normative = Vec::new();

    for n in &narratives {
        let tc = n.token_count();
        let human_series: Vec<BoundarySeries> = humans
            .iter()
            .filter(|a| a.narrative_id == n.id)
            .map(|a| to_series(&a.boundaries, tc, &n.id, &format!("human:{}", a.participant_id)))
            .collect::<Result<_, _>>()?;
        let h: Vec<&BoundarySeries> = human_series.iter().collect();

        let mut by_group: BTreeMap<String, Vec<&InstanceBoundaries>> = BTreeMap::new();
        for inst in instances.iter().filter(|i| i.narrative_id == n.id) {
            let model = inst.source.model_id.as_deref().unwrap_or("unknown");
            by_group.entry(llm_group(model, inst.source.temperature.unwrap_or_default())).or_default().push(inst);
        }

        let mut groups: Vec<(String, Vec<BoundarySeries>, usize)> = vec![(HUMAN.into(), human_series.clone(), 0)];
        for (label, insts) in &by_group {
            let (series, excluded) = group_series(insts, n, s.include_flagged)?;
            groups.push((label.clone(), series, excluded));
        }

        for (label, series, excluded) in &groups {
            let members: Vec<&BoundarySeries> = series.iter().collect();
            let mut gs = GroupSummary {
                narrative_id: n.id.clone(),
                group: label.clone(),
                n_members: members.len(),
                n_flagged_excluded: *excluded,
                ..Default::default()
            };
            let c: Vec<f64> = members.iter().map(|m| m.boundary_count() as f64).collect();
            (gs.mean_count, gs.sd_count) = mean_sd(&c);
            gs.per_1000 = gs.mean_count.filter(|_| tc > 0).map(|m| 1000.0 * m / tc as f64);
            for m in &members {
                counts.push(vec![n.id.clone(), label.clone(), m.source_id.clone(), m.boundary_count().to_string()]);
            }
            if members.len() >= 2 {
                let loo = loo_agreement::<f64>(&members)?;
                let vals: Vec<f64> = loo.iter().filter_map(|a| a.value).collect();
                (gs.loo_mean, gs.loo_sd) = mean_sd(&vals);
                for a in &loo {
                    agreement.push(vec![n.id.clone(), label.clone(), "loo".into(), a.source_id.clone(), csv_num(a.value)]);
                }
            } else {
                summary.diagnostics.push(format!("{}/{label}: {} member(s), no leave-one-out agreement", n.id, members.len()));
            }
            if label == HUMAN || members.is_empty() {
                summary.groups.push(gs);
                continue;
            }
            let mean = mean_series::<f64>(&members, label)?;
            let mut cross = Vec::new();
            for hs in &h {
                let a = cross_agreement(hs, &mean)?;
                agreement.push(vec![n.id.clone(), label.clone(), "human_vs_llm".into(), a.source_id.clone(), csv_num(a.value)]);
                cross.extend(a.value);
            }
            gs.human_cross_mean = stats::mean(&cross).ok();

            let classes = classify_shared_distinct(&h, &members, s.tolerance)?;
            let (mut sh, mut di) = (Vec::new(), Vec::new());
            for c in &classes {
                let kind = match c.kind {
                    BoundaryKind::Shared => {
                        sh.push(c.human_proportion);
                        "shared"
                    }
                    BoundaryKind::Distinct => {
                        di.push(c.human_proportion);
                        "distinct"
                    }
                };
                shared.push(vec![n.id.clone(), label.clone(), c.token_index.to_string(), kind.into(), csv_num(Some(c.human_proportion))]);
            }
            (gs.shared_mean, gs.distinct_mean, gs.n_shared, gs.n_distinct) =
                (stats::mean(&sh).ok(), stats::mean(&di).ok(), sh.len(), di.len());

            let params = ConsistencyParams {
                group_size: s.group_size,
                iterations: s.consistency_iterations,
                seed: ctx.sub_seed(&["consistency", &n.id, label]),
                tolerance: s.tolerance,
            };
            match between_group_consistency(&h, &members, &params) {
                Ok(its) => {
                    let hh: Vec<f64> = its.iter().filter_map(|i| i.prop_human_human).collect();
                    let hl: Vec<f64> = its.iter().filter_map(|i| i.prop_human_llm).collect();
                    gs.consistency_hh_mean = stats::mean(&hh).ok();
                    gs.consistency_hl_mean = stats::mean(&hl).ok();
                    gs.consistency_defined = its.iter().filter(|i| i.prop_human_human.is_some() && i.prop_human_llm.is_some()).count();
                    for it in &its {
                        consistency.push(vec![
                            n.id.clone(),
                            label.clone(),
                            it.iteration.to_string(),
                            csv_num(it.prop_human_human),
                            csv_num(it.prop_human_llm),
                            it.n_events_used.to_string(),
                            it.n_events_used_llm.to_string(),
                        ]);
                        summary.diagnostics.extend(it.diagnostic.as_ref().map(|d| format!("{}/{label}: {d}", n.id)));
                    }
                }
                Err(e) => summary.diagnostics.push(format!("{}/{label}: consistency skipped ({e})", n.id)),
            }
            summary.groups.push(gs);
        }

        let norm_label = llm_group(&s.normative_model, s.normative_temperature);
        match groups.iter().find(|g| g.0 == norm_label).filter(|g| !g.1.is_empty()) {
            Some((_, series, _)) => {
                let members: Vec<&BoundarySeries> = series.iter().collect();
                let nb = normative_boundaries(&members)?;
                let (controls, diags) = select_non_boundaries(&nb, &n.sentence_starts(), tc);
                summary.diagnostics.extend(diags.into_iter().map(|d| format!("{}: {d}", n.id)));
                normative.push(NormativeRecord {
                    narrative_id: n.id.clone(),
                    n: nb.n,
                    indices: nb.indices,
                    flagged: nb.flagged,
                    non_boundary_indices: controls,
                });
            }
            None => summary.diagnostics.push(format!("{}: no usable {norm_label} instances for normative boundaries", n.id)),
        }
    }

    let w = &ctx.w;
    w.csv("segmentation/boundary_counts.csv", &["narrative_id", "group", "source_id", "boundary_count"], &counts)?;
    w.csv("segmentation/agreement.csv", &["narrative_id", "group", "comparison", "source_id", "agreement"], &agreement)?;
    w.csv("segmentation/shared_distinct.csv", &["narrative_id", "group", "token_index", "kind", "human_proportion"], &shared)?;
    w.csv(
        "segmentation/consistency.csv",
        &["narrative_id", "group", "iteration", "prop_human_human", "prop_human_llm", "n_events_used", "n_events_used_llm"],
        &consistency,
    )?;
    w.json(NORMATIVE, &normative)?;

    if let Ok(p) = ctx.artifact(HUMAN_RATINGS) {
        let ratings = ingest_ratings(&p)?;
        let mut kinds = HashMap::new();
        for r in &normative {
            kinds.extend(r.indices.iter().map(|&i| ((r.narrative_id.clone(), i), MarkKind::Boundary)));
            kinds.extend(r.non_boundary_indices.iter().map(|&i| ((r.narrative_id.clone(), i), MarkKind::NonBoundary)));
        }
        let rs: RatingSummary<f64> =
            rating_summary(&ratings, &kinds, s.rating_scale).context("summarizing boundary ratings")?;
        w.json("segmentation/ratings_summary.json", &rs)?;
    }
    w.json(SUMMARY, &summary)?;
    Ok(())
}
