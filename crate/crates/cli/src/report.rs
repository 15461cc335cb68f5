//! Static report: distribution summary, per-cluster keywords and the most
//! OOD test instances with their salient words.

use std::fmt::Write as _;

use oodlens_core::analysis::AnalysisBundle;
use oodlens_core::clustering::KeywordCount;
use oodlens_core::saliency::{instance_saliency, InstanceSaliency};
use oodlens_service::views::{self, DistributionView};
use oodlens_service::{InstanceRecord, QuerySpec, SetFilter, SortKey};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const REPORT_FORMAT: &str = "oodlens-report/1";
pub const EXEMPLAR_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub format: String,
    pub dataset: String,
    pub epsilon: f64,
    pub n_opt: usize,
    pub distribution: DistributionView,
    pub clusters: Vec<ClusterSection>,
    pub exemplars: Vec<Exemplar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub cluster_id: usize,
    pub size: usize,
    pub ood_count: usize,
    pub keywords: Vec<KeywordCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exemplar {
    pub instance: InstanceRecord,
    /// Salient words per factor group, heaviest first; `None` without activations.
    pub salient_words: Option<Vec<Vec<String>>>,
}

pub fn build_report(bundle: &AnalysisBundle, bins: usize) -> Result<Report, CliError> {
    let view_err = |e: oodlens_service::ViewError| CliError::new("report", e.to_string());
    let eps = bundle.epsilon();
    let distribution = views::distribution(bundle, None, Some(bins)).map_err(view_err)?;

    let r = &bundle.clustering;
    let clusters = (0..r.n_opt)
        .map(|k| {
            let spec = QuerySpec { set: SetFilter::All, cluster: Some(k), ..Default::default() };
            let members = views::filtered_positions(bundle, &spec).map_err(view_err)?;
            let ood_count = members.iter().filter(|&&p| bundle.scores.scores[p] as f64 > eps).count();
            Ok(ClusterSection { cluster_id: k, size: members.len(), ood_count, keywords: bundle.keywords[k].keywords.clone() })
        })
        .collect::<Result<_, CliError>>()?;

    let spec = QuerySpec { set: SetFilter::Ood, sort: Some(SortKey::ScoreDesc), page_size: EXEMPLAR_COUNT, ..Default::default() };
    let top = views::query_instances(bundle, &spec).map_err(view_err)?;
    let exemplars = top
        .items
        .into_iter()
        .map(|instance| {
            let s = instance_saliency(&bundle.dataset, instance.id, &bundle.config.saliency)
                .map_err(|e| CliError::new("saliency", format!("instance {}: {e}", instance.id)))?;
            let salient_words = match s {
                InstanceSaliency::Ok { result, .. } => {
                    Some(result.groups.into_iter().map(|g| g.members.into_iter().map(|m| m.token).collect()).collect())
                }
                InstanceSaliency::NoActivations { .. } => None,
            };
            Ok(Exemplar { instance, salient_words })
        })
        .collect::<Result<_, CliError>>()?;

    Ok(Report {
        format: REPORT_FORMAT.into(),
        dataset: bundle.dataset.name.clone(),
        epsilon: eps,
        n_opt: r.n_opt,
        distribution,
        clusters,
        exemplars,
    })
}

/// Parses and checks a JSON report against the typed schema.
pub fn parse_json_report(text: &str) -> Result<Report, CliError> {
    let report: Report = serde_json::from_str(text).map_err(|e| CliError::new("report", format!("schema: {e}")))?;
    if report.format != REPORT_FORMAT {
        return Err(CliError::new("report", format!("unsupported format {:?}", report.format)));
    }
    if report.clusters.len() != report.n_opt {
        return Err(CliError::new("report", "cluster section count differs from n_opt"));
    }
    Ok(report)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;max-width:60em;margin:2em auto;color:#222}\
table{border-collapse:collapse}td,th{padding:2px 8px;text-align:right}\
.bar{display:inline-block;height:10px}.train{background:#7aa6d8}.test{background:#e8945a}\
.icons span{display:inline-block;width:10px;height:10px;margin:1px}.id{background:#7aa6d8}.ood{background:#d9534f}\
mark{background:#fde68a}section.cluster{border-top:1px solid #ddd}";

fn icon_row(label: &str, icons: Option<&oodlens_core::scoring::IconArray>) -> String {
    let Some(a) = icons else {
        return format!("<p>{label}: no instances</p>");
    };
    let cells = "<span class=\"id\"></span>".repeat(a.id_icons) + &"<span class=\"ood\"></span>".repeat(a.ood_icons);
    format!("<p>{label}: {} ID / {} OOD</p><div class=\"icons\">{cells}</div>", a.id_icons, a.ood_icons)
}

pub fn render_html(report: &Report) -> String {
    let d = &report.distribution;
    let mut h = String::new();
    let _ = write!(
        h,
        "<!doctype html><html><head><meta charset=\"utf-8\"><title>{name}: OOD report</title><style>{STYLE}</style></head><body>\
         <h1>{name}</h1><h2 id=\"distribution\">Distribution</h2>\
         <p>Threshold &epsilon; = {eps}. Train: {tr_id} ID, {tr_ood} OOD. Test: {te_id} ID, <span id=\"test-ood\">{te_ood}</span> OOD.</p>",
        name = escape(&report.dataset),
        eps = report.epsilon,
        tr_id = d.train_counts.id,
        tr_ood = d.train_counts.ood,
        te_id = d.test_counts.id,
        te_ood = d.test_counts.ood,
    );
    h += &icon_row("Train", d.train_icons.as_ref());
    h += &icon_row("Test", d.test_icons.as_ref());

    let max = d.histogram.train_counts.iter().chain(&d.histogram.test_counts).copied().max().unwrap_or(0).max(1);
    h += "<table><tr><th>score</th><th>train</th><th>test</th><th></th></tr>";
    for (b, (tr, te)) in d.histogram.train_counts.iter().zip(&d.histogram.test_counts).enumerate() {
        let _ = write!(
            h,
            "<tr><td>{:.3}&ndash;{:.3}</td><td>{tr}</td><td>{te}</td><td style=\"text-align:left\">\
             <span class=\"bar train\" style=\"width:{}px\"></span><span class=\"bar test\" style=\"width:{}px\"></span></td></tr>",
            d.histogram.bin_edges[b],
            d.histogram.bin_edges[b + 1],
            tr * 200 / max,
            te * 200 / max,
        );
    }
    h += "</table>";

    let _ = write!(h, "<h2 id=\"clusters\">Clusters ({})</h2>", report.n_opt);
    for c in &report.clusters {
        let words: Vec<String> = c.keywords.iter().map(|k| format!("{} ({})", escape(&k.term), k.count)).collect();
        let _ = write!(
            h,
            "<section class=\"cluster\" data-cluster=\"{id}\"><h3>Cluster {id}</h3><p>{size} instances, {ood} OOD</p><p>{words}</p></section>",
            id = c.cluster_id,
            size = c.size,
            ood = c.ood_count,
            words = words.join(", "),
        );
    }

    let _ = write!(h, "<h2 id=\"exemplars\">Top {} OOD instances</h2><ol>", report.exemplars.len());
    for e in &report.exemplars {
        let salient: Vec<&str> = e.salient_words.iter().flatten().flatten().map(String::as_str).collect();
        let text: Vec<String> = e
            .instance
            .text
            .split_whitespace()
            .map(|w| {
                if salient.iter().any(|s| s.eq_ignore_ascii_case(w)) {
                    format!("<mark>{}</mark>", escape(w))
                } else {
                    escape(w)
                }
            })
            .collect();
        let cluster = e.instance.cluster.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        let groups = match &e.salient_words {
            Some(g) => g.iter().map(|ws| escape(&ws.join(" "))).collect::<Vec<_>>().join(" | "),
            None => "no activations".into(),
        };
        let _ = write!(
            h,
            "<li class=\"exemplar\" data-id=\"{id}\"><p>#{id} score {score} &middot; predicted {pred} &middot; cluster {cluster}</p>\
             <p>{text}</p><p><small>salient: {groups}</small></p></li>",
            id = e.instance.id,
            score = e.instance.ood_score,
            pred = escape(&e.instance.prediction_name),
            text = text.join(" "),
        );
    }
    h += "</ol></body></html>\n";
    h
}
