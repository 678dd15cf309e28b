//! Builds an evaluator's blinded task: the evaluator's assigned campaign
//! items plus the full calibration set, shuffled by a generator keyed on
//! `(campaign.seed, evaluator_id)`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Campaign, EvaluationItem, ItemLanguages};
use crate::protocols::Protocol;
use crate::rng::{shuffle, KeyedRng, Rng64};

/// How calibration items are mixed into the regular items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interleave {
    /// One uniform shuffle of regular items followed by calibration items.
    UniformShuffle,
}

pub const INTERLEAVE: Interleave = Interleave::UniformShuffle;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssemblyError {
    #[error("evaluator {0:?} is not part of this campaign")]
    UnknownEvaluator(String),
}

/// What the evaluator sees for one item. Carries no provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedItem {
    pub item_id: String,
    pub left_text: String,
    pub right_text: String,
    pub position: usize,
    pub orientation_swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub evaluator_id: String,
    pub campaign_id: String,
    pub protocol: Protocol,
    pub items: Vec<PresentedItem>,
}

/// Places one item. Monolingual pairs are swapped with probability 1/2
/// (top bit of one draw); cross-lingual pairs keep the source side left and
/// consume no randomness.
pub fn orient<R: Rng64>(item: &EvaluationItem, position: usize, rng: &mut R) -> PresentedItem {
    let swapped = match item.languages {
        ItemLanguages::Monolingual(_) => rng.next_u64() >> 63 == 1,
        ItemLanguages::CrossLingual(_) => false,
    };
    let (left, right) = if swapped {
        (&item.text_b, &item.text_a)
    } else {
        (&item.text_a, &item.text_b)
    };
    PresentedItem {
        item_id: item.item_id.clone(),
        left_text: left.clone(),
        right_text: right.clone(),
        position,
        orientation_swapped: swapped,
    }
}

pub fn assemble_task(campaign: &Campaign, evaluator_id: &str) -> Result<Task, AssemblyError> {
    let evaluator = campaign
        .evaluator(evaluator_id)
        .ok_or_else(|| AssemblyError::UnknownEvaluator(evaluator_id.to_string()))?;

    let mut order: Vec<&EvaluationItem> = campaign
        .items
        .iter()
        .filter(|item| campaign.is_assigned(evaluator, item))
        .chain(campaign.calibration_items.iter())
        .collect();

    let mut rng = KeyedRng::for_label(campaign.seed, evaluator_id);
    match INTERLEAVE {
        Interleave::UniformShuffle => shuffle(&mut order, &mut rng),
    }
    let items = order
        .into_iter()
        .enumerate()
        .map(|(position, item)| orient(item, position, &mut rng))
        .collect();

    Ok(Task {
        evaluator_id: evaluator_id.to_string(),
        campaign_id: campaign.campaign_id.clone(),
        protocol: campaign.protocol,
        items,
    })
}

/// Writes one `PresentedItem` per line.
pub fn write_task_jsonl<W: Write>(task: &Task, mut out: W) -> io::Result<()> {
    for item in &task.items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Recovers `(text_a, text_b)` for a presented item.
pub fn unorient(item: &PresentedItem) -> (&str, &str) {
    if item.orientation_swapped {
        (&item.right_text, &item.left_text)
    } else {
        (&item.left_text, &item.right_text)
    }
}
