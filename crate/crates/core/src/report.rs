//! Campaign reports: raw and adjusted aggregates per method, rankings,
//! agreement, separation, metric correlation and post-editing summaries.
//!
//! The service and the CLI both render reports through this module, so the
//! same inputs give byte-identical output from either. The text layout is
//! described in `docs/report-format.md`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibmath::{
    consensus_target, AdjustmentFunction, AdjustmentKind, AggregateScore, Method, DEFAULT_HT_TARGET,
};
use crate::ingest::latest_wins;
use crate::metrics::{pe_report, MetricError};
use crate::model::{AutoScoreRecord, Campaign, LanguagePair, RawJudgment, TranslationSource};
use crate::pipeline::{
    aggregate_by_lp, apply_per_evaluator, apply_to_aggregates, calibrate, check_coverage,
    AdjustedAggregate, Dataset, Level, PipelineError, Targets,
};
use crate::protocols::Protocol;
use crate::stats::{
    agreement_table, bootstrap_cv_linreg, kappa_category, pearson, r_squared, separation_check,
    AgreementObservation, AgreementReport, CorrelationMethod, CorrelationReport, DirectionFilter,
    SeparationReport, StatsError, DEFAULT_RESAMPLES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl ReportError {
    pub fn is_insufficient_data(&self) -> bool {
        matches!(
            self,
            ReportError::Pipeline(PipelineError::InsufficientData(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub methods: Vec<Method>,
    pub level: Level,
    pub ht_target: f64,
    /// Expected descending order of sources for separation checks, e.g.
    /// `HT0, MT1, MT2`. Empty: references first, then machine systems,
    /// each sorted by id.
    pub order: Vec<String>,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            level: Level::LanguagePair,
            ht_target: DEFAULT_HT_TARGET,
            order: Vec::new(),
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

/// Externally computed aggregates or functions to use instead of fitting.
/// Used when the CLI pipeline is run step by step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Precomputed {
    pub aggregates: Option<Vec<AggregateScore>>,
    pub functions: BTreeMap<Method, Vec<AdjustmentFunction>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub lp: LanguagePair,
    pub system_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub label: String,
    pub functions: Vec<AdjustmentFunction>,
    pub adjusted: Vec<AdjustedAggregate>,
    /// Machine-translation aggregates, highest first.
    pub ranking: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeGroup {
    pub lp: LanguagePair,
    pub system_id: String,
    pub n: usize,
    pub mean_levenshtein: f64,
    pub mean_chrf: f64,
    pub mean_critical_errors: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCorrelation {
    pub metric: String,
    #[serde(flatten)]
    pub report: CorrelationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub campaign_id: String,
    pub protocol: Protocol,
    pub level: Level,
    pub ht_target: f64,
    pub consensus_target: Option<f64>,
    pub n_judgments: usize,
    pub aggregates: Vec<AggregateScore>,
    pub methods: Vec<MethodReport>,
    pub agreement: AgreementReport,
    pub separation: Vec<SeparationReport>,
    pub correlations: Vec<MetricCorrelation>,
    pub post_edits: Vec<PeGroup>,
    pub warnings: Vec<String>,
}

fn ranking(adjusted: &[AdjustedAggregate]) -> Vec<RankEntry> {
    let mut rows: Vec<RankEntry> = adjusted
        .iter()
        .filter_map(|a| match &a.source {
            TranslationSource::Machine(id) => Some(RankEntry {
                rank: 0,
                lp: a.language_pair.clone(),
                system_id: id.clone(),
                score: a.adjusted,
            }),
            _ => None,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.lp.to_string().cmp(&b.lp.to_string()))
            .then_with(|| a.system_id.cmp(&b.system_id))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}

fn default_order(aggregates: &[AggregateScore]) -> Vec<String> {
    let mut refs = std::collections::BTreeSet::new();
    let mut systems = std::collections::BTreeSet::new();
    for a in aggregates {
        match &a.source {
            TranslationSource::HumanReference(id) => {
                refs.insert(id.clone());
            }
            TranslationSource::Machine(id) => {
                systems.insert(id.clone());
            }
            TranslationSource::Calibration => {}
        }
    }
    refs.into_iter().chain(systems).collect()
}

fn separation(aggregates: &[AggregateScore], order: &[String]) -> Vec<SeparationReport> {
    if order.len() < 2 {
        return Vec::new();
    }
    let mut by_lp: BTreeMap<&LanguagePair, BTreeMap<String, f64>> = BTreeMap::new();
    for a in aggregates.iter().filter(|a| !a.source.is_calibration()) {
        by_lp
            .entry(&a.language_pair)
            .or_default()
            .insert(a.source.label().to_string(), a.mean_of_medians);
    }
    by_lp
        .into_iter()
        .filter_map(|(lp, scores)| separation_check(lp.to_string(), &scores, order).ok())
        .collect()
}

fn agreement(protocol: Protocol, ds: &Dataset) -> AgreementReport {
    let observations: Vec<AgreementObservation> = ds
        .points
        .iter()
        .filter(|p| !p.source.is_calibration())
        .map(|p| AgreementObservation {
            direction: p.lp.direction(),
            protocol,
            language: p.lp.foreign().to_string(),
            source: p.source.label().to_string(),
            item_id: p.item_id.clone(),
            category: kappa_category(&p.payload),
        })
        .collect();
    agreement_table(&observations)
}

fn correlations(
    methods: &[MethodReport],
    automatic: &[AutoScoreRecord],
    options: &ReportOptions,
    warnings: &mut Vec<String>,
) -> Vec<MetricCorrelation> {
    let mut by_metric: BTreeMap<&str, Vec<(LanguagePair, &str, f64)>> = BTreeMap::new();
    for a in automatic {
        match a.language_pair() {
            Ok(lp) => by_metric.entry(a.metric.as_str()).or_default().push((
                lp,
                a.system_id.as_str(),
                a.value,
            )),
            Err(e) => warnings.push(format!("automatic score skipped: {e}")),
        }
    }
    let mut out = Vec::new();
    for (metric, scores) in by_metric {
        for m in methods {
            let human: HashMap<(&LanguagePair, &str), f64> = m
                .adjusted
                .iter()
                .filter_map(|a| match &a.source {
                    TranslationSource::Machine(id) => {
                        Some(((&a.language_pair, id.as_str()), a.adjusted))
                    }
                    _ => None,
                })
                .collect();
            for filter in DirectionFilter::ALL {
                let (x, y): (Vec<f64>, Vec<f64>) = scores
                    .iter()
                    .filter(|(lp, _, _)| filter.admits(lp.direction()))
                    .filter_map(|(lp, sys, v)| human.get(&(lp, *sys)).map(|h| (*v, *h)))
                    .unzip();
                for cm in CorrelationMethod::ALL {
                    let value = match cm {
                        CorrelationMethod::Pearson => pearson(&x, &y),
                        CorrelationMethod::RSquared => r_squared(&x, &y),
                        CorrelationMethod::LinregCv => {
                            bootstrap_cv_linreg(&x, &y, options.resamples, options.seed)
                        }
                    };
                    match value {
                        Ok(value) => out.push(MetricCorrelation {
                            metric: metric.to_string(),
                            report: CorrelationReport {
                                adjustment: m.method,
                                method: cm,
                                direction: filter,
                                value,
                                n: x.len(),
                            },
                        }),
                        Err(StatsError::TooFewPoints { .. }) if x.is_empty() => {}
                        Err(e) => warnings.push(format!(
                            "{metric} {} {} {}: {e}",
                            m.method.label(),
                            cm.label(),
                            filter.label()
                        )),
                    }
                }
            }
        }
    }
    out
}

fn post_edits(campaign: &Campaign, judgments: &[RawJudgment]) -> Result<Vec<PeGroup>, MetricError> {
    let items: HashMap<&str, _> = campaign
        .items
        .iter()
        .map(|i| (i.item_id.as_str(), i))
        .collect();
    let mut groups: BTreeMap<(LanguagePair, String), (usize, usize, f64, u64)> = BTreeMap::new();
    for j in judgments.iter().filter(|j| j.protocol == Protocol::Pe) {
        let Some(item) = items.get(j.item_id.as_str()) else {
            continue;
        };
        let Some(lp) = item.languages.pair() else {
            continue;
        };
        let pe = pe_report(&item.item_id, &item.text_b, &j.payload)?;
        let g = groups
            .entry((lp.clone(), item.provenance.label().to_string()))
            .or_default();
        g.0 += 1;
        g.1 += pe.levenshtein;
        g.2 += pe.chrf;
        g.3 += pe.critical_errors as u64;
    }
    Ok(groups
        .into_iter()
        .map(|((lp, system_id), (n, lev, chrf, crit))| PeGroup {
            lp,
            system_id,
            n,
            mean_levenshtein: lev as f64 / n as f64,
            mean_chrf: chrf / n as f64,
            mean_critical_errors: crit as f64 / n as f64,
        })
        .collect())
}

pub fn compute_report(
    campaign: &Campaign,
    judgments: &[RawJudgment],
    automatic: &[AutoScoreRecord],
    options: &ReportOptions,
) -> Result<CampaignReport, ReportError> {
    compute_report_with(
        campaign,
        judgments,
        automatic,
        options,
        &Precomputed::default(),
    )
}

/// Builds a report over the latest-wins view of `judgments`.
///
/// A method whose anchors are missing is left out with a warning; if every
/// requested method fails, the first error is returned.
pub fn compute_report_with(
    campaign: &Campaign,
    judgments: &[RawJudgment],
    automatic: &[AutoScoreRecord],
    options: &ReportOptions,
    pre: &Precomputed,
) -> Result<CampaignReport, ReportError> {
    let judgments = latest_wins(judgments.iter().cloned());
    let ds = Dataset::build(campaign, &judgments);
    check_coverage(campaign, &ds)?;

    let mut warnings = Vec::new();
    if !ds.unattributed.is_empty() {
        warnings.push(format!(
            "{} judgment(s) could not be tied to a language pair and were ignored",
            ds.unattributed.len()
        ));
    }
    let aggregates = pre
        .aggregates
        .clone()
        .unwrap_or_else(|| aggregate_by_lp(&ds));
    let consensus = consensus_target(&campaign.calibration_items).ok();
    // Without calibration items the CS methods fail on their missing anchor
    // before the target is ever read.
    let targets = Targets {
        consensus: consensus.unwrap_or(f64::NAN),
        ht: options.ht_target,
    };

    let mut methods = Vec::new();
    let mut first_error = None;
    if campaign.protocol.is_ordinal() {
        for &method in &options.methods {
            let fitted = match pre.functions.get(&method) {
                Some(functions) => {
                    let adjusted = if functions.iter().any(|f| f.evaluator.is_some()) {
                        apply_per_evaluator(functions, &ds, &aggregates)
                    } else {
                        apply_to_aggregates(functions, &aggregates)
                    };
                    Ok((functions.clone(), adjusted, Vec::new()))
                }
                None => calibrate(method, options.level, &ds, &aggregates, targets)
                    .map(|c| (c.functions, c.adjusted, c.warnings)),
            };
            match fitted {
                Ok((functions, adjusted, w)) => {
                    warnings.extend(w);
                    for a in adjusted.iter().filter(|a| a.out_of_scale()) {
                        warnings.push(format!(
                            "{} {} {}: adjusted score {:.3} lies outside the 1-5 scale",
                            method.label(),
                            a.language_pair,
                            a.source.label(),
                            a.adjusted
                        ));
                    }
                    methods.push(MethodReport {
                        method,
                        label: method.label().to_string(),
                        ranking: ranking(&adjusted),
                        functions,
                        adjusted,
                    });
                }
                Err(e) => {
                    warnings.push(format!("{} omitted: {e}", method.label()));
                    first_error.get_or_insert(e);
                }
            }
        }
        if methods.is_empty() {
            if let Some(e) = first_error {
                return Err(e.into());
            }
        }
    }

    let order = if options.order.is_empty() {
        default_order(&aggregates)
    } else {
        options.order.clone()
    };
    let correlations = correlations(&methods, automatic, options, &mut warnings);
    Ok(CampaignReport {
        campaign_id: campaign.campaign_id.clone(),
        protocol: campaign.protocol,
        level: options.level,
        ht_target: options.ht_target,
        consensus_target: consensus,
        n_judgments: judgments.len(),
        separation: separation(&aggregates, &order),
        agreement: agreement(campaign.protocol, &ds),
        post_edits: post_edits(campaign, &judgments)?,
        aggregates,
        methods,
        correlations,
        warnings,
    })
}

/// Pretty JSON with a trailing newline.
pub fn render_json(report: &CampaignReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn function_cell(f: &AdjustmentFunction) -> String {
    match f.kind {
        AdjustmentKind::Identity => "identity".to_string(),
        AdjustmentKind::Shift => format!("a={:+.3}", f.alpha),
        AdjustmentKind::Affine => format!("a={:+.3} b={:.3}", f.alpha, f.beta),
    }
}

/// Aligned plain-text rendering.
pub fn render_text(report: &CampaignReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "campaign   {}", report.campaign_id);
    let _ = writeln!(w, "protocol   {}", report.protocol.display_name());
    let _ = writeln!(
        w,
        "level      {}",
        match report.level {
            Level::LanguagePair => "lp",
            Level::Evaluator => "evaluator",
        }
    );
    let _ = writeln!(w, "judgments  {}", report.n_judgments);
    let _ = writeln!(
        w,
        "targets    consensus {}  HT {:.3}",
        report
            .consensus_target
            .map(|c| format!("{c:.3}"))
            .unwrap_or_else(|| "-".into()),
        report.ht_target
    );

    if !report.methods.is_empty() {
        let _ = writeln!(w, "\n== Ranked MT scores ==");
        let cell = 22;
        let mut header = format!("{:>4}", "#");
        for m in &report.methods {
            let _ = write!(header, "  {:<cell$}", m.label);
        }
        let _ = writeln!(w, "{}", header.trim_end());
        let rows = report
            .methods
            .iter()
            .map(|m| m.ranking.len())
            .max()
            .unwrap_or(0);
        for i in 0..rows {
            let mut line = format!("{:>4}", i + 1);
            for m in &report.methods {
                let text = m
                    .ranking
                    .get(i)
                    .map(|r| {
                        format!(
                            "{:<9} {:<5} {:>6.2}",
                            r.lp.to_string(),
                            r.system_id,
                            r.score
                        )
                    })
                    .unwrap_or_default();
                let _ = write!(line, "  {text:<cell$}");
            }
            let _ = writeln!(w, "{}", line.trim_end());
        }

        let _ = writeln!(w, "\n== Adjustment functions ==");
        let mut header = format!("{:<10}", "lp");
        for m in &report.methods {
            let _ = write!(header, "  {:<22}", m.label);
        }
        let _ = writeln!(w, "{}", header.trim_end());
        let mut keys: Vec<(LanguagePair, Option<String>)> = report
            .methods
            .iter()
            .flat_map(|m| {
                m.functions
                    .iter()
                    .map(|f| (f.language_pair.clone(), f.evaluator.clone()))
            })
            .collect();
        keys.sort();
        keys.dedup();
        for (lp, evaluator) in keys {
            let name = match &evaluator {
                Some(e) => format!("{lp}/{e}"),
                None => lp.to_string(),
            };
            let mut line = format!("{name:<10}");
            for m in &report.methods {
                let cell = m
                    .functions
                    .iter()
                    .find(|f| f.language_pair == lp && f.evaluator == evaluator)
                    .map(function_cell)
                    .unwrap_or_else(|| "-".into());
                let _ = write!(line, "  {cell:<22}");
            }
            let _ = writeln!(w, "{}", line.trim_end());
        }

        let _ = writeln!(w, "\n== Aggregates ==");
        let mut header = format!("{:<10}  {:<16}  {:>5}  {:>7}", "lp", "source", "n", "raw");
        for m in report.methods.iter().filter(|m| m.method != Method::Raw) {
            let _ = write!(header, "  {:>7}", m.label);
        }
        let _ = writeln!(w, "{header}");
        for (i, a) in report.aggregates.iter().enumerate() {
            let mut line = format!(
                "{:<10}  {:<16}  {:>5}  {:>7.3}",
                a.language_pair.to_string(),
                a.source.label(),
                a.n_items,
                a.mean_of_medians
            );
            for m in report.methods.iter().filter(|m| m.method != Method::Raw) {
                match m.adjusted.get(i) {
                    Some(adj) => {
                        let _ = write!(line, "  {:>7.3}", adj.adjusted);
                    }
                    None => line.push_str("        -"),
                }
            }
            let _ = writeln!(w, "{line}");
        }
    }

    if !report.agreement.averages.is_empty() {
        let _ = writeln!(w, "\n== Inter-rater agreement (Fleiss kappa) ==");
        let mut languages: Vec<&str> = report
            .agreement
            .languages
            .iter()
            .map(|l| l.language.as_str())
            .collect();
        languages.sort();
        languages.dedup();
        let mut header = format!("{:<6}  {:<8}", "dir", "protocol");
        for l in &languages {
            let _ = write!(header, "  {l:>6}");
        }
        let _ = write!(header, "  {:>6}  {:>4}", "AVG", "rank");
        let _ = writeln!(w, "{header}");
        for avg in &report.agreement.averages {
            let mut line = format!(
                "{:<6}  {:<8}",
                avg.direction.label(),
                avg.protocol.display_name()
            );
            for l in &languages {
                let cell = report
                    .agreement
                    .languages
                    .iter()
                    .find(|k| {
                        k.direction == avg.direction
                            && k.protocol == avg.protocol
                            && k.language == *l
                    })
                    .map(|k| format!("{:.2}", k.kappa))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(line, "  {cell:>6}");
            }
            let _ = write!(line, "  {:>6.2}  {:>4}", avg.avg, avg.rank);
            let _ = writeln!(w, "{line}");
        }
        if report.agreement.excluded_items > 0 {
            let _ = writeln!(
                w,
                "({} item(s) excluded for missing ratings)",
                report.agreement.excluded_items
            );
        }
    }

    if !report.separation.is_empty() {
        let _ = writeln!(w, "\n== Separation ==");
        for s in &report.separation {
            let links: Vec<String> = s
                .links
                .iter()
                .map(|l| format!("{} > {} ({:+.2})", l.higher, l.lower, l.margin))
                .collect();
            let _ = writeln!(
                w,
                "{:<10}  {}  {}",
                s.label,
                if s.pass { "ok  " } else { "FAIL" },
                links.join(", ")
            );
        }
    }

    if !report.correlations.is_empty() {
        let _ = writeln!(w, "\n== Correlation with automatic metrics ==");
        let mut header = format!("{:<8}  {:<6}", "metric", "method");
        for cm in CorrelationMethod::ALL {
            for f in DirectionFilter::ALL {
                let _ = write!(header, "  {:>16}", format!("{} {}", cm.label(), f.label()));
            }
        }
        let _ = writeln!(w, "{header}");
        let mut rows: Vec<(&str, Method)> = report
            .correlations
            .iter()
            .map(|c| (c.metric.as_str(), c.report.adjustment))
            .collect();
        rows.dedup();
        for (metric, method) in rows {
            let mut line = format!("{metric:<8}  {:<6}", method.label());
            for cm in CorrelationMethod::ALL {
                for f in DirectionFilter::ALL {
                    let cell = report
                        .correlations
                        .iter()
                        .find(|c| {
                            c.metric == metric
                                && c.report.adjustment == method
                                && c.report.method == cm
                                && c.report.direction == f
                        })
                        .map(|c| format!("{:.3}", c.report.value))
                        .unwrap_or_else(|| "-".into());
                    let _ = write!(line, "  {cell:>16}");
                }
            }
            let _ = writeln!(w, "{line}");
        }
    }

    if !report.post_edits.is_empty() {
        let _ = writeln!(w, "\n== Post-editing ==");
        let _ = writeln!(
            w,
            "{:<10}  {:<8}  {:>5}  {:>11}  {:>6}  {:>8}",
            "lp", "system", "n", "levenshtein", "chrF", "critical"
        );
        for g in &report.post_edits {
            let _ = writeln!(
                w,
                "{:<10}  {:<8}  {:>5}  {:>11.2}  {:>6.2}  {:>8.2}",
                g.lp.to_string(),
                g.system_id,
                g.n,
                g.mean_levenshtein,
                g.mean_chrf,
                g.mean_critical_errors
            );
        }
    }

    if !report.warnings.is_empty() {
        let _ = writeln!(w, "\n== Warnings ==");
        for warning in &report.warnings {
            let _ = writeln!(w, "- {warning}");
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(format!("unknown format {other:?} (json, text)")),
        }
    }
}

pub fn render(report: &CampaignReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Text => render_text(report),
    }
}
