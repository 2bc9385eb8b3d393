//! `report`: SVG figures and a Markdown digest built from the stage summaries.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{Context, Result};

use super::output::fmt_sig;
use super::recall::{RecallSummary, Validation, SUMMARY as RECALL_SUMMARY, VALIDATION};
use super::segmentation::{SegSummary, SUMMARY as SEG_SUMMARY};
use super::svg::{bar_chart, heatmap, Bar};
use super::{read_json, Ctx};
use crate::stats;

fn avg(xs: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.into_iter().flatten().collect();
    stats::mean(&v).ok()
}

fn bar(label: impl Into<String>, value: Option<f64>, err: Option<f64>) -> Option<Bar> {
    value.map(|value| Bar { label: label.into(), value, err })
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| fmt_sig(v, 4))
}

fn read_matrix(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    r.records()
        .map(|rec| {
            rec?.iter().map(|v| v.parse::<f64>().with_context(|| format!("{}: bad cell {v:?}", path.display()))).collect()
        })
        .collect()
}

pub(crate) fn report(ctx: &Ctx) -> Result<()> {
    let w = &ctx.w;
    let meta = &w.meta;
    let mut md = format!("# Analysis report\n\n`{}`\n", meta.header_line());

    if let Ok(p) = ctx.artifact(SEG_SUMMARY) {
        let seg: SegSummary = read_json(&p)?;
        let mut by_group: BTreeMap<&str, Vec<_>> = BTreeMap::new();
        for g in &seg.groups {
            by_group.entry(g.group.as_str()).or_default().push(g);
        }
        let mut counts = Vec::new();
        let mut agreement = Vec::new();
        let mut shared = Vec::new();
        let mut consistency = Vec::new();
        md.push_str("\n## Segmentation\n\n| group | boundaries | per 1000 tokens | LOO agreement | human vs group | shared | distinct | consistency h-h | consistency h-llm |\n|---|---|---|---|---|---|---|---|---|\n");
        for (label, gs) in &by_group {
            let mean_count = avg(gs.iter().map(|g| g.mean_count));
            let loo = avg(gs.iter().map(|g| g.loo_mean));
            let cross = avg(gs.iter().map(|g| g.human_cross_mean));
            let (sh, di) = (avg(gs.iter().map(|g| g.shared_mean)), avg(gs.iter().map(|g| g.distinct_mean)));
            let (hh, hl) = (avg(gs.iter().map(|g| g.consistency_hh_mean)), avg(gs.iter().map(|g| g.consistency_hl_mean)));
            counts.extend(bar(*label, mean_count, avg(gs.iter().map(|g| g.sd_count))));
            agreement.extend(bar(format!("{label} LOO"), loo, avg(gs.iter().map(|g| g.loo_sd))));
            agreement.extend(bar(format!("human vs {label}"), cross, None));
            shared.extend(bar(format!("{label} shared"), sh, None));
            shared.extend(bar(format!("{label} distinct"), di, None));
            consistency.extend(bar(format!("{label} h-h"), hh, None));
            consistency.extend(bar(format!("{label} h-llm"), hl, None));
            let _ = writeln!(
                md,
                "| {label} | {} | {} | {} | {} | {} | {} | {} | {} |",
                cell(mean_count),
                cell(avg(gs.iter().map(|g| g.per_1000))),
                cell(loo),
                cell(cross),
                cell(sh),
                cell(di),
                cell(hh),
                cell(hl)
            );
        }
        w.text("figures/boundary_counts.svg", &bar_chart("Event boundaries per segmenter", "boundaries", &counts, meta))?;
        w.text("figures/agreement.svg", &bar_chart("Segmentation agreement", "point-biserial r", &agreement, meta))?;
        w.text(
            "figures/shared_distinct.svg",
            &bar_chart("Human proportion at shared and distinct boundaries", "proportion", &shared, meta),
        )?;
        w.text("figures/consistency.svg", &bar_chart("Between-group peak consistency", "proportion", &consistency, meta))?;
        if !seg.diagnostics.is_empty() {
            let _ = writeln!(md, "\n{} segmentation diagnostic(s) in `{SEG_SUMMARY}`.", seg.diagnostics.len());
        }
    }

    if let Ok(p) = ctx.artifact("segmentation/ratings_summary.json") {
        let v: serde_json::Value = read_json(&p)?;
        let get = |k: &str, f: &str| v[k][f].as_f64();
        let bars: Vec<Bar> = [("boundary", "boundary"), ("non-boundary", "non_boundary")]
            .iter()
            .filter_map(|(label, k)| bar(*label, get(k, "mean"), get(k, "sd")))
            .collect();
        w.text("figures/ratings.svg", &bar_chart("Boundary ratings", "signed confidence", &bars, meta))?;
        let _ = writeln!(
            md,
            "\n## Boundary ratings\n\nboundary mean {}, non-boundary mean {}, Welch p {}\n",
            cell(get("boundary", "mean")),
            cell(get("non_boundary", "mean")),
            cell(v["welch"]["p"].as_f64())
        );
    }

    if let Ok(p) = ctx.artifact(RECALL_SUMMARY) {
        let rs: RecallSummary = read_json(&p)?;
        let mut inter = Vec::new();
        let mut matched = Vec::new();
        md.push_str("\n## Recall\n\n| model | recalls | diagonal | reverse diagonal | diag > rev | matched | baseline | matched > baseline |\n|---|---|---|---|---|---|---|---|\n");
        for m in &rs.models {
            inter.extend(bar(format!("{} diagonal", m.model_id), m.intersubject_diag_mean, None));
            inter.extend(bar(format!("{} reverse", m.model_id), m.intersubject_rev_mean, None));
            matched.extend(bar(format!("{} matched", m.model_id), m.matched_mean, None));
            matched.extend(bar(format!("{} baseline", m.model_id), m.baseline_mean, None));
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {}/{} | {} | {} | {}/{} |",
                m.model_id,
                m.n_recalls,
                cell(m.intersubject_diag_mean),
                cell(m.intersubject_rev_mean),
                m.n_diag_above_rev,
                m.n_intersubject,
                cell(m.matched_mean),
                cell(m.baseline_mean),
                m.n_matched_above_baseline,
                m.n_with_baseline
            );
            for rel in &m.matrices {
                let rows = read_matrix(&w.path(rel))?;
                let fig = rel.replacen("recall/matrices/", "figures/matrices/", 1).replace(".csv", ".svg");
                w.text(&fig, &heatmap(&format!("Mean similarity {rel}"), "narrative event", "recall event", &rows, meta))?;
            }
        }
        w.text("figures/intersubject.svg", &bar_chart("Intersubject recall agreement", "Spearman rho", &inter, meta))?;
        w.text("figures/recall_vs_baseline.svg", &bar_chart("Recall scores against baseline", "Spearman rho", &matched, meta))?;
    }

    if let Ok(p) = ctx.artifact(VALIDATION) {
        let v: Validation = read_json(&p)?;
        let mut bars = Vec::new();
        md.push_str("\n## Validation against human scores\n\n| model | units | rho | rho SB | p | beta | regression p |\n|---|---|---|---|---|---|---|\n");
        for m in &v.models {
            let sh = m.split_half.as_ref();
            let reg = m.regression.as_ref();
            bars.extend(bar(format!("{} rho SB", m.model_id), sh.map(|s| s.rho_sb), None));
            bars.extend(bar(format!("{} beta", m.model_id), reg.map(|r| r.beta), None));
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} |",
                m.model_id,
                m.n_units,
                cell(sh.map(|s| s.rho_mean)),
                cell(sh.map(|s| s.rho_sb)),
                cell(sh.map(|s| s.p_value)),
                cell(reg.map(|r| r.beta)),
                cell(reg.and_then(|r| r.p_value))
            );
        }
        w.text("figures/validation.svg", &bar_chart("Automated against human scores", "coefficient", &bars, meta))?;
    }
    w.text("report.md", &md)?;
    Ok(())
}
