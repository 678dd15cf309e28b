//! From accepted judgments to raw and adjusted aggregates.
//!
//! Cross-lingual judgments count toward their item's language pair.
//! Monolingual judgments (calibration items, MSTS) count toward every
//! effective pair of the judging evaluator that contains the item's
//! language, so one evaluator's calibration judgments anchor each pair
//! they work on.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibmath::{
    aggregate, apply, consensus_target, fit_affine, fit_ht_shift, fit_shift, median_of_judgments,
    AdjustmentFunction, AggregateScore, CalibError, ItemScore, Method,
};
use crate::model::{Campaign, ItemLanguages, LanguagePair, RawJudgment, TranslationSource};
use crate::protocols::{Protocol, ScorePayload};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{lp}{}: no {anchor} judgments to anchor the adjustment", evaluator.as_ref().map(|e| format!(" / {e}")).unwrap_or_default())]
    MissingAnchor {
        lp: LanguagePair,
        evaluator: Option<String>,
        anchor: &'static str,
    },
    #[error(transparent)]
    Calib(#[from] CalibError),
}

/// Whether adjustment functions are fitted per language pair or per
/// evaluator within a language pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    #[serde(rename = "lp")]
    LanguagePair,
    Evaluator,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lp" | "language_pair" => Ok(Level::LanguagePair),
            "evaluator" => Ok(Level::Evaluator),
            other => Err(format!("unknown level {other:?} (lp, evaluator)")),
        }
    }
}

/// One judgment attributed to one language pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub lp: LanguagePair,
    pub source: TranslationSource,
    pub evaluator: String,
    pub item_id: String,
    pub payload: ScorePayload,
}

impl DataPoint {
    /// Ordinal score, if the payload has one.
    pub fn score(&self) -> Option<f64> {
        match self.payload {
            ScorePayload::Ordinal(s) => Some(s as f64),
            ScorePayload::PostEdit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub protocol: Option<Protocol>,
    pub points: Vec<DataPoint>,
    /// Ids of judged items that could not be tied to any language pair.
    pub unattributed: Vec<String>,
}

impl Dataset {
    /// Attributes judgments that have already passed ingestion. Judgments
    /// on unknown items or by unknown evaluators are skipped.
    pub fn build(campaign: &Campaign, judgments: &[RawJudgment]) -> Dataset {
        let items: HashMap<&str, _> = campaign
            .all_items()
            .map(|i| (i.item_id.as_str(), i))
            .collect();
        let pairs: HashMap<&str, Vec<LanguagePair>> = campaign
            .evaluators
            .iter()
            .map(|e| (e.id.as_str(), campaign.effective_pairs(e)))
            .collect();

        let mut ds = Dataset {
            protocol: Some(campaign.protocol),
            ..Dataset::default()
        };
        for j in judgments {
            let (Some(item), Some(eval_pairs)) = (
                items.get(j.item_id.as_str()),
                pairs.get(j.evaluator_id.as_str()),
            ) else {
                continue;
            };
            let targets: Vec<LanguagePair> = match &item.languages {
                ItemLanguages::CrossLingual(lp) => vec![lp.clone()],
                ItemLanguages::Monolingual(lang) => eval_pairs
                    .iter()
                    .filter(|lp| lp.source() == lang || lp.target() == lang)
                    .cloned()
                    .collect(),
            };
            if targets.is_empty() {
                ds.unattributed.push(j.item_id.clone());
            }
            for lp in targets {
                ds.points.push(DataPoint {
                    lp,
                    source: item.provenance.clone(),
                    evaluator: j.evaluator_id.clone(),
                    item_id: j.item_id.clone(),
                    payload: j.payload.clone(),
                });
            }
        }
        ds
    }

    pub fn scored(&self) -> impl Iterator<Item = (&DataPoint, f64)> {
        self.points.iter().filter_map(|p| p.score().map(|s| (p, s)))
    }
}

/// Per-key item medians, items in id order.
fn medians_by<K: Ord>(
    scores: impl IntoIterator<Item = (K, String, f64)>,
) -> BTreeMap<K, Vec<ItemScore>> {
    let mut grouped: BTreeMap<K, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for (k, item, s) in scores {
        grouped
            .entry(k)
            .or_default()
            .entry(item)
            .or_default()
            .push(s);
    }
    grouped
        .into_iter()
        .map(|(k, items)| {
            let medians = items
                .iter()
                .map(|(id, s)| median_of_judgments(id, s).expect("group has judgments"))
                .collect();
            (k, medians)
        })
        .collect()
}

fn aggregates_of(
    scores: impl IntoIterator<Item = ((LanguagePair, TranslationSource), String, f64)>,
) -> Vec<AggregateScore> {
    medians_by(scores)
        .into_iter()
        .map(|((lp, source), medians)| aggregate(lp, source, &medians).expect("non-empty group"))
        .collect()
}

/// Mean of item medians per `(language pair, source)`, sorted by key.
pub fn aggregate_by_lp(ds: &Dataset) -> Vec<AggregateScore> {
    aggregates_of(
        ds.scored()
            .map(|(p, s)| ((p.lp.clone(), p.source.clone()), p.item_id.clone(), s)),
    )
}

/// Per-evaluator aggregates, keyed by `(language pair, evaluator, source)`.
pub fn aggregate_by_evaluator(
    ds: &Dataset,
) -> BTreeMap<(LanguagePair, String), Vec<AggregateScore>> {
    let per: BTreeMap<(LanguagePair, String, TranslationSource), Vec<ItemScore>> =
        medians_by(ds.scored().map(|(p, s)| {
            (
                (p.lp.clone(), p.evaluator.clone(), p.source.clone()),
                p.item_id.clone(),
                s,
            )
        }));
    let mut out: BTreeMap<(LanguagePair, String), Vec<AggregateScore>> = BTreeMap::new();
    for ((lp, evaluator, source), medians) in per {
        let agg = aggregate(lp.clone(), source, &medians).expect("non-empty group");
        out.entry((lp, evaluator)).or_default().push(agg);
    }
    out
}

/// Anchor targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    /// Mean consensus score of the calibration set.
    pub consensus: f64,
    /// Where the human reference should land.
    pub ht: f64,
}

impl Targets {
    pub fn for_campaign(campaign: &Campaign, ht: f64) -> Result<Self, PipelineError> {
        Ok(Targets {
            consensus: consensus_target(&campaign.calibration_items)?,
            ht,
        })
    }
}

/// The human-reference aggregates of one pair pooled into one, weighting
/// each reference by its item count.
fn pooled_reference(aggs: &[&AggregateScore]) -> Option<AggregateScore> {
    let refs: Vec<&AggregateScore> = aggs
        .iter()
        .copied()
        .filter(|a| matches!(a.source, TranslationSource::HumanReference(_)))
        .collect();
    match refs.as_slice() {
        [] => None,
        [one] => Some((*one).clone()),
        many => {
            let n: usize = many.iter().map(|a| a.n_items).sum();
            let total: f64 = many
                .iter()
                .map(|a| a.mean_of_medians * a.n_items as f64)
                .sum();
            let ids: Vec<&str> = many.iter().map(|a| a.source.label()).collect();
            Some(AggregateScore {
                language_pair: many[0].language_pair.clone(),
                source: TranslationSource::HumanReference(ids.join("+")),
                mean_of_medians: total / n as f64,
                n_items: n,
            })
        }
    }
}

/// Fits one function from the anchor aggregates of a single group
/// (a language pair, or an evaluator within one).
fn fit_one(
    method: Method,
    lp: &LanguagePair,
    evaluator: Option<&str>,
    aggs: &[&AggregateScore],
    targets: Targets,
    warnings: &mut Vec<String>,
) -> Result<AdjustmentFunction, PipelineError> {
    let missing = |anchor| PipelineError::MissingAnchor {
        lp: lp.clone(),
        evaluator: evaluator.map(str::to_string),
        anchor,
    };
    let cs = || {
        aggs.iter()
            .find(|a| a.source.is_calibration())
            .copied()
            .ok_or_else(|| missing("calibration"))
    };
    let ht = || pooled_reference(aggs).ok_or_else(|| missing("human reference"));
    let who = match evaluator {
        Some(e) => format!("{lp} / {e}"),
        None => lp.to_string(),
    };

    let f = match method {
        Method::Raw => AdjustmentFunction::identity(lp.clone()),
        Method::Cs => fit_shift(cs()?, targets.consensus)?,
        Method::Ht => fit_ht_shift(&ht()?, targets.ht)?,
        Method::CsHt => {
            let (cs, ht) = (cs()?, ht()?);
            match fit_affine(
                lp.clone(),
                cs.mean_of_medians,
                targets.consensus,
                ht.mean_of_medians,
                targets.ht,
            ) {
                Ok(f) => {
                    if f.beta < 0.0 {
                        warnings.push(format!(
                            "{who}: CS+HT slope is negative ({:.3}); rankings within the pair are reversed",
                            f.beta
                        ));
                    }
                    f
                }
                Err(CalibError::DegenerateAnchors { .. }) => {
                    warnings.push(format!(
                        "{who}: calibration and reference anchors coincide; fell back to CS shift"
                    ));
                    fit_shift(cs, targets.consensus)?
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    Ok(match evaluator {
        Some(e) => f.for_evaluator(e),
        None => f,
    })
}

/// Fits per-pair functions for `method` from per-pair aggregates. One
/// function per pair that has a non-calibration aggregate.
pub fn fit_from_aggregates(
    method: Method,
    aggregates: &[AggregateScore],
    targets: Targets,
    warnings: &mut Vec<String>,
) -> Result<Vec<AdjustmentFunction>, PipelineError> {
    let mut by_lp: BTreeMap<&LanguagePair, Vec<&AggregateScore>> = BTreeMap::new();
    for a in aggregates {
        by_lp.entry(&a.language_pair).or_default().push(a);
    }
    by_lp
        .into_iter()
        .filter(|(_, aggs)| aggs.iter().any(|a| !a.source.is_calibration()))
        .map(|(lp, aggs)| fit_one(method, lp, None, &aggs, targets, warnings))
        .collect()
}

/// A group's aggregate before and after adjustment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedAggregate {
    #[serde(rename = "lp")]
    pub language_pair: LanguagePair,
    #[serde(flatten)]
    pub source: TranslationSource,
    pub raw: f64,
    pub adjusted: f64,
    pub n_items: usize,
}

impl AdjustedAggregate {
    pub fn out_of_scale(&self) -> bool {
        !(1.0..=5.0).contains(&self.adjusted)
    }
}

/// Applies per-pair functions to per-pair aggregates. Pairs without a
/// function pass through unchanged.
pub fn apply_to_aggregates(
    functions: &[AdjustmentFunction],
    aggregates: &[AggregateScore],
) -> Vec<AdjustedAggregate> {
    let by_lp: HashMap<&LanguagePair, &AdjustmentFunction> = functions
        .iter()
        .filter(|f| f.evaluator.is_none())
        .map(|f| (&f.language_pair, f))
        .collect();
    aggregates
        .iter()
        .map(|a| AdjustedAggregate {
            language_pair: a.language_pair.clone(),
            source: a.source.clone(),
            raw: a.mean_of_medians,
            adjusted: by_lp
                .get(&a.language_pair)
                .map(|f| apply(f, a.mean_of_medians))
                .unwrap_or(a.mean_of_medians),
            n_items: a.n_items,
        })
        .collect()
}

/// Adjusts every judgment with its evaluator's function, then re-aggregates.
pub fn apply_per_evaluator(
    functions: &[AdjustmentFunction],
    ds: &Dataset,
    raw: &[AggregateScore],
) -> Vec<AdjustedAggregate> {
    let by_key: HashMap<(&LanguagePair, &str), &AdjustmentFunction> = functions
        .iter()
        .filter_map(|f| f.evaluator.as_deref().map(|e| ((&f.language_pair, e), f)))
        .collect();
    let adjusted = aggregates_of(ds.scored().map(|(p, s)| {
        let s = by_key
            .get(&(&p.lp, p.evaluator.as_str()))
            .map(|f| apply(f, s))
            .unwrap_or(s);
        ((p.lp.clone(), p.source.clone()), p.item_id.clone(), s)
    }));
    raw.iter()
        .zip(adjusted)
        .map(|(r, a)| AdjustedAggregate {
            language_pair: r.language_pair.clone(),
            source: r.source.clone(),
            raw: r.mean_of_medians,
            adjusted: a.mean_of_medians,
            n_items: r.n_items,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub method: Method,
    pub level: Level,
    pub functions: Vec<AdjustmentFunction>,
    pub adjusted: Vec<AdjustedAggregate>,
    pub warnings: Vec<String>,
}

/// Fits and applies `method` at `level`. `raw` must be
/// [`aggregate_by_lp`] of `ds`.
pub fn calibrate(
    method: Method,
    level: Level,
    ds: &Dataset,
    raw: &[AggregateScore],
    targets: Targets,
) -> Result<Calibrated, PipelineError> {
    let mut warnings = Vec::new();
    let (functions, adjusted) = match (level, method) {
        (Level::LanguagePair, _) | (Level::Evaluator, Method::Raw) => {
            let functions = fit_from_aggregates(method, raw, targets, &mut warnings)?;
            let adjusted = apply_to_aggregates(&functions, raw);
            (functions, adjusted)
        }
        (Level::Evaluator, _) => {
            let mut functions = Vec::new();
            for ((lp, evaluator), aggs) in aggregate_by_evaluator(ds) {
                if aggs.iter().all(|a| a.source.is_calibration()) {
                    continue;
                }
                let refs: Vec<&AggregateScore> = aggs.iter().collect();
                functions.push(fit_one(
                    method,
                    &lp,
                    Some(&evaluator),
                    &refs,
                    targets,
                    &mut warnings,
                )?);
            }
            let adjusted = apply_per_evaluator(&functions, ds, raw);
            (functions, adjusted)
        }
    };
    Ok(Calibrated {
        method,
        level,
        functions,
        adjusted,
        warnings,
    })
}

/// Fails when nothing was judged, or when some `(pair, source)` group
/// that has items received no scored judgment.
pub fn check_coverage(campaign: &Campaign, ds: &Dataset) -> Result<(), PipelineError> {
    if ds.points.is_empty() {
        return Err(PipelineError::InsufficientData("no judgments".into()));
    }
    let ordinal = campaign.protocol.is_ordinal();
    let judged: std::collections::BTreeSet<(&LanguagePair, &TranslationSource)> = ds
        .points
        .iter()
        .filter(|p| !ordinal || p.score().is_some())
        .map(|p| (&p.lp, &p.source))
        .collect();
    for item in &campaign.items {
        if let Some(lp) = item.languages.pair() {
            if !judged.contains(&(lp, &item.provenance)) {
                return Err(PipelineError::InsufficientData(format!(
                    "{lp} / {} has items but no judgments",
                    item.provenance.label()
                )));
            }
        }
    }
    if !campaign.calibration_items.is_empty() {
        for lp in campaign.language_pairs() {
            if !judged.contains(&(&lp, &TranslationSource::Calibration)) {
                return Err(PipelineError::InsufficientData(format!(
                    "{lp} / calibration has items but no judgments"
                )));
            }
        }
    }
    Ok(())
}
