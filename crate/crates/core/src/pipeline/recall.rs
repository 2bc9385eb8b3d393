//! `embed`, `score-recall` and `validate`.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use super::output::csv_num;
use super::segmentation::{NormativeRecord, RecallSegmentation, NORMATIVE, RECALLS};
use super::{load_recalls, read_json, slug, BackendKind, Ctx};
use crate::cache::DiskCache;
use crate::corpus::{BoundarySet, Narrative};
use crate::embed::{
    export_vectors, import_vectors, recall_owner, EmbedGateway, EmbeddingBackend, EmbeddingStore, EmbeddingVector,
    HttpEmbeddingBackend, MockEmbeddingBackend, SegmentRecord,
};
use crate::recall::{
    baseline_scores, event_recall_scores, intersubject_agreement, read_human_scores, resize_square, similarity_matrix,
    split_half, standardized_regression, RecallReport, RegressionResult, SplitHalfResult,
};
use crate::stats::{self, zscore};

pub(crate) const VECTORS: &str = "recall/vectors.jsonl";
pub(crate) const REPORTS: &str = "recall/reports.json";
pub(crate) const SUMMARY: &str = "recall/summary.json";
pub(crate) const VALIDATION: &str = "recall/validation.json";

fn gateway(ctx: &Ctx) -> Result<EmbedGateway> {
    let e = &ctx.cfg.embedding;
    let backend: Arc<dyn EmbeddingBackend> = match e.backend {
        BackendKind::Http => {
            Arc::new(HttpEmbeddingBackend::from_env(&e.base_url, &e.api_key_env, Duration::from_secs(e.timeout_secs)))
        }
        BackendKind::Mock => Arc::new(MockEmbeddingBackend::new(e.mock_dim, ctx.sub_seed(&["embedding"]))),
    };
    let mut g = EmbedGateway::new(backend).with_retry(e.retry).with_batch_size(e.batch_size);
    if let Some(dir) = &e.cache_dir {
        g = g.with_cache(DiskCache::open(ctx.cfg.under_out(dir))?);
    }
    Ok(g)
}

/// Narrative events at the normative boundaries and recall events at their agreed boundaries.
fn segments(ctx: &Ctx) -> Result<Vec<SegmentRecord>> {
    let narratives = ctx.narratives()?;
    let normative: Vec<NormativeRecord> = read_json(&ctx.artifact(NORMATIVE)?)?;
    let mut out = Vec::new();
    for nr in &normative {
        let n = narratives.iter().find(|n| n.id == nr.narrative_id).context("normative record for unknown narrative")?;
        let texts = n.segment_texts(&BoundarySet::new(nr.indices.iter().copied()));
        out.extend(texts.into_iter().enumerate().map(|(k, t)| SegmentRecord::new(&n.id, k, t)));
    }
    let recall_segs: Vec<RecallSegmentation> = read_json(&ctx.artifact(RECALLS)?)?;
    let by_owner: BTreeMap<String, &RecallSegmentation> =
        recall_segs.iter().map(|r| (recall_owner(&r.participant_id, &r.narrative_id), r)).collect();
    for (pid, nid, text) in load_recalls(&ctx.inputs.recall_dir)? {
        let owner = recall_owner(&pid, &nid);
        let Some(seg) = by_owner.get(&owner) else {
            log::warn!("{owner}: no segmentation, skipped");
            continue;
        };
        let r = Narrative::new(&owner, &owner, text);
        let texts = r.segment_texts(&BoundarySet::new(seg.boundaries.iter().copied()));
        out.extend(texts.into_iter().enumerate().map(|(k, t)| SegmentRecord::new(&owner, k, t)));
    }
    Ok(out)
}

pub(crate) fn embed(ctx: &Ctx) -> Result<()> {
    let vectors: Vec<EmbeddingVector<f64>> = match &ctx.inputs.vectors {
        Some(p) => import_vectors(p)?,
        None => {
            let segs = segments(ctx)?;
            ctx.w.json("recall/segments.json", &segs)?;
            let g = gateway(ctx)?;
            let mut all = Vec::new();
            for model in &ctx.cfg.embedding.models {
                all.extend(g.embed_texts::<f64>(&segs, model)?);
            }
            all
        }
    };
    // validates dimensions and duplicates before anything is written
    EmbeddingStore::from_vectors(vectors.clone())?;
    let p = ctx.w.path(VECTORS);
    std::fs::create_dir_all(p.parent().expect("nested path"))?;
    export_vectors(&p, &vectors)?;
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct ModelRecallSummary {
    pub model_id: String,
    pub n_recalls: usize,
    pub intersubject_diag_mean: Option<f64>,
    pub intersubject_rev_mean: Option<f64>,
    pub n_diag_above_rev: usize,
    pub n_intersubject: usize,
    pub matched_mean: Option<f64>,
    pub baseline_mean: Option<f64>,
    pub n_matched_above_baseline: usize,
    pub n_with_baseline: usize,
    /// `recall/matrices/…` files holding mean narrative-by-recall matrices.
    pub matrices: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct RecallSummary {
    pub models: Vec<ModelRecallSummary>,
    pub diagnostics: Vec<String>,
}

fn split_owner(owner: &str) -> Option<(&str, &str)> {
    owner.split_once('/')
}

pub(crate) fn score(ctx: &Ctx) -> Result<()> {
    let store = EmbeddingStore::<f64>::from_vectors(import_vectors(&ctx.artifact(VECTORS)?)?)?;
    let mode = ctx.cfg.recall.baseline_mode;
    let mut summary = RecallSummary::default();
    let (mut inter_rows, mut score_rows, mut event_rows) = (Vec::new(), Vec::new(), Vec::new());
    let mut all_reports = Vec::new();

    for model in store.models() {
        let owners = store.owners(&model);
        let narratives: Vec<&str> = owners.iter().filter(|o| !o.contains('/')).map(String::as_str).collect();
        let mut ms = ModelRecallSummary { model_id: model.clone(), ..Default::default() };
        let mut reports: Vec<RecallReport<f64>> = Vec::new();
        let (mut diag, mut rev) = (Vec::new(), Vec::new());

        for &nid in &narratives {
            let nv = store.get(&model, nid).expect("listed owner");
            let recalls: Vec<(String, Vec<EmbeddingVector<f64>>)> = owners
                .iter()
                .filter_map(|o| split_owner(o).filter(|(_, n)| *n == nid).map(|(p, _)| (p.to_string(), o)))
                .map(|(p, o)| (p, store.get(&model, o).expect("listed owner").to_vec()))
                .collect();
            match intersubject_agreement(&recalls, nv.len()) {
                Ok(r) => {
                    for s in &r.scores {
                        inter_rows.push(vec![
                            model.clone(),
                            nid.to_string(),
                            s.participant_id.clone(),
                            csv_num(Some(s.diag_mean)),
                            csv_num(Some(s.rev_diag_mean)),
                            s.n_pairs.to_string(),
                        ]);
                        diag.push(s.diag_mean);
                        rev.push(s.rev_diag_mean);
                        ms.n_diag_above_rev += usize::from(s.diag_mean > s.rev_diag_mean);
                    }
                    summary.diagnostics.extend(r.diagnostics.into_iter().map(|d| format!("{model}/{nid}: {d}")));
                }
                Err(e) => summary.diagnostics.push(format!("{model}/{nid}: intersubject agreement skipped ({e})")),
            }

            let others: Vec<&[EmbeddingVector<f64>]> =
                narratives.iter().filter(|&&o| o != nid).map(|o| store.get(&model, o).expect("listed owner")).collect();
            let mut sum = vec![vec![0.0; nv.len()]; nv.len()];
            let mut n_used = 0usize;
            for (_, rv) in &recalls {
                let mut rep = event_recall_scores(nv, rv)?;
                if !others.is_empty() {
                    rep.baseline_mean = Some(baseline_scores(rv, &others, mode)?);
                }
                let m = resize_square(&similarity_matrix(nv, rv)?, nv.len());
                for (acc, row) in sum.iter_mut().zip(m.to_rows()) {
                    for (a, v) in acc.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                n_used += 1;
                reports.push(rep);
            }
            if n_used > 0 {
                let rel = format!("recall/matrices/{}/{}.csv", slug(&model), slug(nid));
                let header: Vec<String> = (0..nv.len()).map(|j| format!("recall_event_{j}")).collect();
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let rows: Vec<Vec<String>> =
                    sum.iter().map(|r| r.iter().map(|v| csv_num(Some(v / n_used as f64))).collect()).collect();
                ctx.w.csv(&rel, &header, &rows)?;
                ms.matrices.push(rel);
            }
        }

        // matched and baseline means share one standardization per model
        let mut joint: Vec<f64> = reports.iter().map(|r| r.mean_score).collect();
        joint.extend(reports.iter().filter_map(|r| r.baseline_mean));
        match zscore(&joint) {
            Ok(z) => {
                let mut rest = z[reports.len()..].iter();
                for (r, &zm) in reports.iter_mut().zip(&z) {
                    r.z_score = Some(zm);
                    if r.baseline_mean.is_some() {
                        r.baseline_z_score = rest.next().copied();
                    }
                }
            }
            Err(e) => summary.diagnostics.push(format!("{model}: recall scores not standardized ({e})")),
        }

        let matched: Vec<f64> = reports.iter().map(|r| r.mean_score).collect();
        let base: Vec<f64> = reports.iter().filter_map(|r| r.baseline_mean).collect();
        ms.n_recalls = reports.len();
        ms.intersubject_diag_mean = stats::mean(&diag).ok();
        ms.intersubject_rev_mean = stats::mean(&rev).ok();
        ms.n_intersubject = diag.len();
        ms.matched_mean = stats::mean(&matched).ok();
        ms.baseline_mean = stats::mean(&base).ok();
        ms.n_with_baseline = base.len();
        ms.n_matched_above_baseline = reports.iter().filter(|r| r.baseline_mean.is_some_and(|b| r.mean_score > b)).count();
        for r in &reports {
            score_rows.push(vec![
                r.model_id.clone(),
                r.participant_id.clone(),
                r.narrative_id.clone(),
                csv_num(Some(r.mean_score)),
                csv_num(r.baseline_mean),
                csv_num(r.z_score),
                csv_num(r.baseline_z_score),
            ]);
            for (k, &s) in r.per_event_scores.iter().enumerate() {
                event_rows.push(vec![
                    r.model_id.clone(),
                    r.participant_id.clone(),
                    r.narrative_id.clone(),
                    k.to_string(),
                    csv_num(Some(s)),
                ]);
            }
        }
        summary.models.push(ms);
        all_reports.extend(reports);
    }

    let w = &ctx.w;
    w.csv(
        "recall/intersubject.csv",
        &["model_id", "narrative_id", "participant_id", "diag_mean", "rev_diag_mean", "n_pairs"],
        &inter_rows,
    )?;
    w.csv(
        "recall/recall_scores.csv",
        &["model_id", "participant_id", "narrative_id", "mean_score", "baseline_mean", "z_score", "baseline_z_score"],
        &score_rows,
    )?;
    w.csv("recall/event_scores.csv", &["model_id", "participant_id", "narrative_id", "event_index", "score"], &event_rows)?;
    w.json(REPORTS, &all_reports)?;
    w.json(SUMMARY, &summary)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ModelValidation {
    pub model_id: String,
    pub n_units: usize,
    pub split_half: Option<SplitHalfResult<f64>>,
    pub regression: Option<RegressionResult<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct Validation {
    pub models: Vec<ModelValidation>,
    pub diagnostics: Vec<String>,
}

pub(crate) fn validate(ctx: &Ctx) -> Result<()> {
    let reports: Vec<RecallReport<f64>> = read_json(&ctx.artifact(REPORTS)?)?;
    let human: BTreeMap<(String, String, usize), f64> = read_human_scores(&ctx.inputs.human_scores)?
        .into_iter()
        .map(|h| ((h.participant_id, h.narrative_id, h.event_index), f64::from(h.gist_score)))
        .collect();
    let mut by_model: BTreeMap<&str, Vec<&RecallReport<f64>>> = BTreeMap::new();
    for r in &reports {
        by_model.entry(&r.model_id).or_default().push(r);
    }
    let mut out = Validation::default();
    let mut rows = Vec::new();
    for (model, reps) in by_model {
        let (mut auto, mut hum, mut pids) = (Vec::new(), Vec::new(), Vec::new());
        let mut unmatched = 0;
        for r in reps {
            for (k, &s) in r.per_event_scores.iter().enumerate() {
                match human.get(&(r.participant_id.clone(), r.narrative_id.clone(), k)) {
                    Some(&h) => {
                        auto.push(s);
                        hum.push(h);
                        pids.push(r.participant_id.clone());
                    }
                    None => unmatched += 1,
                }
            }
        }
        if unmatched > 0 {
            out.diagnostics.push(format!("{model}: {unmatched} event score(s) have no human score"));
        }
        let sh = split_half(&auto, &hum, &pids, ctx.cfg.recall.split_half_iterations, ctx.sub_seed(&["split_half", model]));
        let sh = match sh {
            Ok(r) => Some(r),
            Err(e) => {
                out.diagnostics.push(format!("{model}: split-half skipped ({e})"));
                None
            }
        };
        let reg = match (zscore(&auto), zscore(&hum)) {
            (Ok(a), Ok(h)) => match standardized_regression(&a, &h) {
                Ok(r) => Some(r),
                Err(e) => {
                    out.diagnostics.push(format!("{model}: regression skipped ({e})"));
                    None
                }
            },
            (a, h) => {
                let e = a.err().or(h.err()).expect("one side failed");
                out.diagnostics.push(format!("{model}: regression skipped ({e})"));
                None
            }
        };
        rows.push(vec![
            model.to_string(),
            auto.len().to_string(),
            csv_num(sh.as_ref().map(|s| s.rho_mean)),
            csv_num(sh.as_ref().map(|s| s.rho_sb)),
            csv_num(sh.as_ref().map(|s| s.p_value)),
            csv_num(reg.as_ref().map(|r| r.beta)),
            csv_num(reg.as_ref().and_then(|r| r.t_statistic)),
            csv_num(reg.as_ref().and_then(|r| r.p_value)),
        ]);
        out.models.push(ModelValidation { model_id: model.to_string(), n_units: auto.len(), split_half: sh, regression: reg });
    }
    ctx.w.csv(
        "recall/validation.csv",
        &["model_id", "n_units", "rho_mean", "rho_sb", "split_half_p", "beta", "t", "regression_p"],
        &rows,
    )?;
    ctx.w.json(VALIDATION, &out)?;
    Ok(())
}
