//! Aggregation and score adjustment.
//!
//! Per item, judgments from different evaluators collapse to their median;
//! per `(language pair, source)` group, medians are averaged. Adjustment
//! functions are linear maps `f(x) = beta * x + alpha` fitted so that one or
//! two anchor groups (the calibration set, the human reference) land on a
//! fixed target:
//!
//! * shift on the calibration set: `alpha = consensus - cs_raw`, `beta = 1`
//! * shift on the human reference: `alpha = ht_target - ht_raw`, `beta = 1`
//! * affine through both anchors.
//!
//! Adjusted values are never clamped to the rating scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EvaluationItem, LanguagePair, TranslationSource};

/// Default human-reference anchor: the mean HT score across all language
/// pairs of the calibration study.
pub const DEFAULT_HT_TARGET: f64 = 4.687;

/// Anchor separation below which the affine fit is refused.
pub const DEGENERATE_ANCHOR_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("no judgments to take a median of")]
    EmptyInput,
    #[error("cannot aggregate an empty group")]
    EmptyGroup,
    #[error("calibration item {0} has no consensus score")]
    MissingConsensus(String),
    #[error("anchor must come from {expected}, got {found}")]
    WrongSource {
        expected: &'static str,
        found: String,
    },
    #[error(
        "calibration ({cs_raw}) and reference ({ht_raw}) anchors coincide; affine fit is undefined"
    )]
    DegenerateAnchors { cs_raw: f64, ht_raw: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub item_id: String,
    pub median_score: f64,
    pub n_judgments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    #[serde(rename = "lp")]
    pub language_pair: LanguagePair,
    #[serde(flatten)]
    pub source: TranslationSource,
    pub mean_of_medians: f64,
    pub n_items: usize,
}

/// Median of a non-empty sample; even counts average the two middle values.
pub fn median(values: &[f64]) -> Result<f64, CalibError> {
    if values.is_empty() {
        return Err(CalibError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

pub fn median_of_judgments(item_id: &str, scores: &[f64]) -> Result<ItemScore, CalibError> {
    Ok(ItemScore {
        item_id: item_id.to_string(),
        median_score: median(scores)?,
        n_judgments: scores.len(),
    })
}

/// Arithmetic mean, summed in slice order.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub fn aggregate(
    language_pair: LanguagePair,
    source: TranslationSource,
    item_scores: &[ItemScore],
) -> Result<AggregateScore, CalibError> {
    let medians: Vec<f64> = item_scores.iter().map(|s| s.median_score).collect();
    let mean_of_medians = mean(&medians).ok_or(CalibError::EmptyGroup)?;
    Ok(AggregateScore {
        language_pair,
        source,
        mean_of_medians,
        n_items: item_scores.len(),
    })
}

/// Mean consensus score of the calibration set.
pub fn consensus_target<'a, I>(calibration_items: I) -> Result<f64, CalibError>
where
    I: IntoIterator<Item = &'a EvaluationItem>,
{
    let scores = calibration_items
        .into_iter()
        .map(|item| {
            item.consensus_score
                .ok_or_else(|| CalibError::MissingConsensus(item.item_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    mean(&scores).ok_or(CalibError::EmptyGroup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustmentKind {
    Identity,
    Shift,
    Affine,
}

/// `f(x) = beta * x + alpha` for one language pair, or for one evaluator
/// within a language pair when calibrating per evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentFunction {
    #[serde(rename = "lp")]
    pub language_pair: LanguagePair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluator: Option<String>,
    pub kind: AdjustmentKind,
    pub alpha: f64,
    pub beta: f64,
}

impl AdjustmentFunction {
    pub fn identity(language_pair: LanguagePair) -> Self {
        Self {
            language_pair,
            evaluator: None,
            kind: AdjustmentKind::Identity,
            alpha: 0.0,
            beta: 1.0,
        }
    }

    pub fn for_evaluator(mut self, evaluator: impl Into<String>) -> Self {
        self.evaluator = Some(evaluator.into());
        self
    }
}

pub fn apply(f: &AdjustmentFunction, raw: f64) -> f64 {
    match f.kind {
        AdjustmentKind::Identity => raw,
        AdjustmentKind::Shift => raw + f.alpha,
        AdjustmentKind::Affine => f.beta * raw + f.alpha,
    }
}

fn shift(language_pair: LanguagePair, alpha: f64) -> AdjustmentFunction {
    AdjustmentFunction {
        language_pair,
        evaluator: None,
        kind: AdjustmentKind::Shift,
        alpha,
        beta: 1.0,
    }
}

/// Shift anchored on the calibration set.
pub fn fit_shift(
    calibration_aggregate: &AggregateScore,
    target: f64,
) -> Result<AdjustmentFunction, CalibError> {
    if !calibration_aggregate.source.is_calibration() {
        return Err(CalibError::WrongSource {
            expected: "calibration",
            found: calibration_aggregate.source.tag().to_string(),
        });
    }
    Ok(shift(
        calibration_aggregate.language_pair.clone(),
        target - calibration_aggregate.mean_of_medians,
    ))
}

/// Shift anchored on the human reference translation.
pub fn fit_ht_shift(
    ht_aggregate: &AggregateScore,
    ht_target: f64,
) -> Result<AdjustmentFunction, CalibError> {
    if !matches!(ht_aggregate.source, TranslationSource::HumanReference(_)) {
        return Err(CalibError::WrongSource {
            expected: "human_reference",
            found: ht_aggregate.source.tag().to_string(),
        });
    }
    Ok(shift(
        ht_aggregate.language_pair.clone(),
        ht_target - ht_aggregate.mean_of_medians,
    ))
}

/// Line through `(cs_raw, cs_target)` and `(ht_raw, ht_target)`.
pub fn fit_affine(
    language_pair: LanguagePair,
    cs_raw: f64,
    cs_target: f64,
    ht_raw: f64,
    ht_target: f64,
) -> Result<AdjustmentFunction, CalibError> {
    let spread = ht_raw - cs_raw;
    if spread.abs() < DEGENERATE_ANCHOR_EPS {
        return Err(CalibError::DegenerateAnchors { cs_raw, ht_raw });
    }
    let beta = (ht_target - cs_target) / spread;
    let alpha = cs_target - beta * cs_raw;
    Ok(AdjustmentFunction {
        language_pair,
        evaluator: None,
        kind: AdjustmentKind::Affine,
        alpha,
        beta,
    })
}

/// Which adjustment a report column uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Raw,
    Cs,
    Ht,
    CsHt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Raw, Method::Cs, Method::Ht, Method::CsHt];

    pub fn label(self) -> &'static str {
        match self {
            Method::Raw => "Raw",
            Method::Cs => "CS",
            Method::Ht => "HT",
            Method::CsHt => "CS+HT",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Cs => "cs",
            Method::Ht => "ht",
            Method::CsHt => "cs_ht",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Method::Raw),
            "cs" => Ok(Method::Cs),
            "ht" => Ok(Method::Ht),
            "cs_ht" | "cs+ht" => Ok(Method::CsHt),
            other => Err(format!("unknown method {other:?} (raw, cs, ht, cs+ht)")),
        }
    }
}
