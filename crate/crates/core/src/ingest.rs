//! Checking submitted judgment records against a campaign.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Campaign, EvaluationItem, JudgmentRecord, ModelError, RawJudgment};
use crate::protocols::{validate_judgment, JudgmentError, Protocol};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("unknown evaluator {0:?}")]
    UnknownEvaluator(String),
    #[error("evaluator {evaluator:?} is not assigned item {item:?}")]
    NotAssigned { evaluator: String, item: String },
    #[error("campaign uses {expected}, record says {found}")]
    WrongProtocol { expected: Protocol, found: Protocol },
    #[error(transparent)]
    Malformed(#[from] ModelError),
    #[error(transparent)]
    Judgment(#[from] JudgmentError),
}

/// A rejected record, reported by position in its batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub index: usize,
    pub item_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOutcome {
    pub accepted: Vec<RawJudgment>,
    pub errors: Vec<RecordError>,
}

/// Validates records against one campaign. Builds an item index once.
pub struct Ingestor<'a> {
    campaign: &'a Campaign,
    items: HashMap<&'a str, &'a EvaluationItem>,
}

impl<'a> Ingestor<'a> {
    pub fn new(campaign: &'a Campaign) -> Self {
        Self {
            campaign,
            items: campaign
                .all_items()
                .map(|i| (i.item_id.as_str(), i))
                .collect(),
        }
    }

    pub fn check(&self, record: JudgmentRecord) -> Result<RawJudgment, IngestError> {
        let judgment = RawJudgment::try_from(record)?;
        let evaluator = self
            .campaign
            .evaluator(&judgment.evaluator_id)
            .ok_or_else(|| IngestError::UnknownEvaluator(judgment.evaluator_id.clone()))?;
        let item = *self
            .items
            .get(judgment.item_id.as_str())
            .ok_or_else(|| IngestError::UnknownItem(judgment.item_id.clone()))?;
        if !self.campaign.is_assigned(evaluator, item) {
            return Err(IngestError::NotAssigned {
                evaluator: evaluator.id.clone(),
                item: item.item_id.clone(),
            });
        }
        if judgment.protocol != self.campaign.protocol {
            return Err(IngestError::WrongProtocol {
                expected: self.campaign.protocol,
                found: judgment.protocol,
            });
        }
        let validated = validate_judgment(judgment.protocol, judgment.payload, item)?;
        Ok(RawJudgment {
            payload: validated.payload,
            ..judgment
        })
    }

    /// Checks every record; valid ones are accepted in input order.
    pub fn ingest(&self, records: impl IntoIterator<Item = JudgmentRecord>) -> IngestOutcome {
        let mut out = IngestOutcome::default();
        for (index, record) in records.into_iter().enumerate() {
            let item_id = record.item_id.clone();
            match self.check(record) {
                Ok(j) => out.accepted.push(j),
                Err(e) => out.errors.push(RecordError {
                    index,
                    item_id,
                    error: e.to_string(),
                }),
            }
        }
        out
    }
}

/// Keeps the last judgment per `(evaluator, item, protocol)` in input
/// order, and returns them sorted by `(item, evaluator, protocol)` so that
/// downstream sums see a canonical order.
pub fn latest_wins(judgments: impl IntoIterator<Item = RawJudgment>) -> Vec<RawJudgment> {
    let mut latest: BTreeMap<(String, String, Protocol), RawJudgment> = BTreeMap::new();
    for j in judgments {
        latest.insert((j.item_id.clone(), j.evaluator_id.clone(), j.protocol), j);
    }
    latest.into_values().collect()
}
