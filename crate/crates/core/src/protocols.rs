//! Evaluation protocols, their score payloads, and the scoring rubrics.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EvaluationItem, ItemLanguages};

const BUILTIN_RUBRIC: &str = include_str!("../data/rubric.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Cross-lingual semantic similarity, 5-point.
    Xsts,
    /// XSTS with levels 4 and 5 merged.
    Xsts4,
    /// Source-based direct assessment on a 5-point scale.
    Da,
    /// Monolingual STS: translation vs. English reference, XSTS scale.
    Msts,
    /// MSTS on a human back-translation of an English–X output.
    BtMsts,
    /// Post-editing with a critical error count.
    Pe,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::Xsts,
        Protocol::Xsts4,
        Protocol::Da,
        Protocol::Msts,
        Protocol::BtMsts,
        Protocol::Pe,
    ];

    /// Ordinal scale, or `None` for post-editing.
    pub fn scale(self) -> Option<RangeInclusive<u8>> {
        match self {
            Protocol::Xsts4 => Some(1..=4),
            Protocol::Pe => None,
            _ => Some(1..=5),
        }
    }

    pub fn is_ordinal(self) -> bool {
        self.scale().is_some()
    }

    pub fn arrangement(self) -> Arrangement {
        match self {
            Protocol::Msts | Protocol::BtMsts => Arrangement::Monolingual,
            _ => Arrangement::CrossLingual,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Xsts => "xsts",
            Protocol::Xsts4 => "xsts4",
            Protocol::Da => "da",
            Protocol::Msts => "msts",
            Protocol::BtMsts => "bt_msts",
            Protocol::Pe => "pe",
        }
    }

    /// Column label used in printed tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Protocol::Xsts => "XSTS",
            Protocol::Xsts4 => "XSTS4",
            Protocol::Da => "DA",
            Protocol::Msts => "MSTS",
            Protocol::BtMsts => "BT+MSTS",
            Protocol::Pe => "PE",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown protocol {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    CrossLingual,
    Monolingual,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScorePayload {
    Ordinal(u8),
    PostEdit {
        edited_text: String,
        critical_errors: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgmentError {
    #[error("score {score} outside the {protocol} scale")]
    OutOfRange { protocol: Protocol, score: u8 },
    #[error("payload shape does not match protocol {protocol}")]
    WrongPayload { protocol: Protocol },
    #[error("{protocol} cannot be applied to this item's language arrangement")]
    LanguageMismatch { protocol: Protocol },
}

/// A judgment payload known to fit its protocol and item.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedJudgment {
    pub protocol: Protocol,
    pub payload: ScorePayload,
}

/// Checks payload shape, scale range, and language arrangement.
///
/// Calibration items are exempt from the arrangement check: they are
/// English–English pairs judged under whatever protocol the campaign uses.
pub fn validate_judgment(
    protocol: Protocol,
    payload: ScorePayload,
    item: &EvaluationItem,
) -> Result<ValidatedJudgment, JudgmentError> {
    match (&payload, protocol.scale()) {
        (ScorePayload::Ordinal(score), Some(scale)) => {
            if !scale.contains(score) {
                return Err(JudgmentError::OutOfRange {
                    protocol,
                    score: *score,
                });
            }
        }
        (ScorePayload::PostEdit { edited_text, .. }, None) => {
            if edited_text.is_empty() {
                return Err(JudgmentError::WrongPayload { protocol });
            }
        }
        _ => return Err(JudgmentError::WrongPayload { protocol }),
    }
    let arrangement = match &item.languages {
        ItemLanguages::CrossLingual(_) => Arrangement::CrossLingual,
        ItemLanguages::Monolingual(_) => Arrangement::Monolingual,
    };
    if !item.provenance.is_calibration() && arrangement != protocol.arrangement() {
        return Err(JudgmentError::LanguageMismatch { protocol });
    }
    Ok(ValidatedJudgment { protocol, payload })
}

/// Maps a 5-point XSTS score onto the collapsed 4-point scale.
pub fn collapse_xsts(score5: u8) -> Result<u8, JudgmentError> {
    match score5 {
        1..=4 => Ok(score5),
        5 => Ok(4),
        _ => Err(JudgmentError::OutOfRange {
            protocol: Protocol::Xsts,
            score: score5,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricExample {
    pub text_1: String,
    pub text_2: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricEntry {
    pub score: u8,
    pub title: String,
    pub guidance: String,
    #[serde(default)]
    pub examples: Vec<RubricExample>,
}

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("{0} has no ordinal rubric")]
    Unsupported(Protocol),
    #[error("rubric file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("rubric for {protocol} must have exactly {expected} entries numbered 1..={expected}")]
    Shape { protocol: Protocol, expected: usize },
}

/// Rubric text per protocol, keyed by protocol name in the data file.
/// MSTS and BT+MSTS share the XSTS wording unless the file overrides them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    entries: BTreeMap<Protocol, Vec<RubricEntry>>,
}

impl Rubric {
    pub fn from_json(text: &str) -> Result<Self, RubricError> {
        let entries: BTreeMap<Protocol, Vec<RubricEntry>> = serde_json::from_str(text)?;
        let rubric = Rubric { entries };
        for protocol in Protocol::ALL.into_iter().filter(|p| p.is_ordinal()) {
            if let Ok(list) = rubric.for_protocol(protocol) {
                let expected = protocol.scale().map(|s| s.count()).unwrap_or(0);
                let numbered = list
                    .iter()
                    .enumerate()
                    .all(|(i, e)| e.score as usize == i + 1);
                if list.len() != expected || !numbered {
                    return Err(RubricError::Shape { protocol, expected });
                }
            }
        }
        Ok(rubric)
    }

    pub fn builtin() -> &'static Rubric {
        static RUBRIC: OnceLock<Rubric> = OnceLock::new();
        RUBRIC.get_or_init(|| Rubric::from_json(BUILTIN_RUBRIC).expect("builtin rubric is valid"))
    }

    pub fn for_protocol(&self, protocol: Protocol) -> Result<&[RubricEntry], RubricError> {
        if !protocol.is_ordinal() {
            return Err(RubricError::Unsupported(protocol));
        }
        let fallback = match protocol {
            Protocol::Msts | Protocol::BtMsts => Some(Protocol::Xsts),
            _ => None,
        };
        self.entries
            .get(&protocol)
            .or_else(|| fallback.and_then(|p| self.entries.get(&p)))
            .map(Vec::as_slice)
            .ok_or(RubricError::Unsupported(protocol))
    }
}

/// The built-in rubric for `protocol`.
pub fn rubric(protocol: Protocol) -> Result<Vec<RubricEntry>, RubricError> {
    Rubric::builtin().for_protocol(protocol).map(<[_]>::to_vec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LanguagePair, TranslationSource};

    fn cross() -> EvaluationItem {
        EvaluationItem {
            item_id: "i".into(),
            text_a: "Ana are mere.".into(),
            text_b: "Ana has apples.".into(),
            languages: ItemLanguages::CrossLingual(LanguagePair::new("ro", "en").unwrap()),
            provenance: TranslationSource::Machine("MT1".into()),
            consensus_score: None,
        }
    }

    fn mono(source: TranslationSource) -> EvaluationItem {
        EvaluationItem {
            item_id: "m".into(),
            text_a: "The cat sat.".into(),
            text_b: "A cat was sitting.".into(),
            languages: ItemLanguages::Monolingual("en".into()),
            consensus_score: source.is_calibration().then_some(3.0),
            provenance: source,
        }
    }

    fn pe(text: &str) -> ScorePayload {
        ScorePayload::PostEdit {
            edited_text: text.into(),
            critical_errors: 1,
        }
    }

    #[test]
    fn xsts_accepts_in_range() {
        assert!(validate_judgment(Protocol::Xsts, ScorePayload::Ordinal(5), &cross()).is_ok());
    }

    #[test]
    fn xsts_rejects_six() {
        assert_eq!(
            validate_judgment(Protocol::Xsts, ScorePayload::Ordinal(6), &cross()),
            Err(JudgmentError::OutOfRange {
                protocol: Protocol::Xsts,
                score: 6
            })
        );
    }

    #[test]
    fn xsts4_rejects_five() {
        assert!(matches!(
            validate_judgment(Protocol::Xsts4, ScorePayload::Ordinal(5), &cross()),
            Err(JudgmentError::OutOfRange { .. })
        ));
    }

    #[test]
    fn msts_on_cross_lingual_is_mismatch() {
        assert_eq!(
            validate_judgment(Protocol::Msts, ScorePayload::Ordinal(3), &cross()),
            Err(JudgmentError::LanguageMismatch {
                protocol: Protocol::Msts
            })
        );
        let regular_mono = mono(TranslationSource::Machine("MT1".into()));
        assert!(validate_judgment(Protocol::Msts, ScorePayload::Ordinal(3), &regular_mono).is_ok());
        assert!(matches!(
            validate_judgment(Protocol::Xsts, ScorePayload::Ordinal(3), &regular_mono),
            Err(JudgmentError::LanguageMismatch { .. })
        ));
    }

    #[test]
    fn calibration_items_are_scored_under_any_protocol() {
        let c = mono(TranslationSource::Calibration);
        assert!(validate_judgment(Protocol::Xsts, ScorePayload::Ordinal(2), &c).is_ok());
        assert!(validate_judgment(Protocol::Msts, ScorePayload::Ordinal(2), &c).is_ok());
    }

    #[test]
    fn payload_shape_must_match() {
        assert_eq!(
            validate_judgment(Protocol::Xsts, pe("x"), &cross()),
            Err(JudgmentError::WrongPayload {
                protocol: Protocol::Xsts
            })
        );
        assert_eq!(
            validate_judgment(Protocol::Pe, ScorePayload::Ordinal(3), &cross()),
            Err(JudgmentError::WrongPayload {
                protocol: Protocol::Pe
            })
        );
        assert!(validate_judgment(Protocol::Pe, pe("Ana has apples."), &cross()).is_ok());
        assert!(validate_judgment(Protocol::Pe, pe(""), &cross()).is_err());
    }

    /// Exhaustive: every protocol against scores 0..=7 and a PE payload on
    /// an item of the protocol's own arrangement.
    #[test]
    fn acceptance_is_exactly_the_scale() {
        for protocol in Protocol::ALL {
            let item = match protocol.arrangement() {
                Arrangement::CrossLingual => cross(),
                Arrangement::Monolingual => mono(TranslationSource::Machine("MT1".into())),
            };
            for score in 0..=7u8 {
                let ok = validate_judgment(protocol, ScorePayload::Ordinal(score), &item).is_ok();
                let expected = match protocol {
                    Protocol::Pe => false,
                    Protocol::Xsts4 => (1..=4).contains(&score),
                    _ => (1..=5).contains(&score),
                };
                assert_eq!(ok, expected, "{protocol} score {score}");
            }
            let ok = validate_judgment(protocol, pe("edited"), &item).is_ok();
            assert_eq!(ok, protocol == Protocol::Pe, "{protocol} pe payload");
        }
    }

    #[test]
    fn collapse_maps_five_to_four() {
        assert_eq!(collapse_xsts(5), Ok(4));
        assert_eq!(collapse_xsts(4), Ok(4));
        assert_eq!(collapse_xsts(2), Ok(2));
        assert!(collapse_xsts(0).is_err());
        assert!(collapse_xsts(6).is_err());
    }

    #[test]
    fn collapse_is_monotone() {
        for a in 1..=5 {
            for b in a..=5 {
                assert!(collapse_xsts(a).unwrap() <= collapse_xsts(b).unwrap());
            }
        }
    }

    #[test]
    fn xsts_rubric_has_five_levels() {
        let r = rubric(Protocol::Xsts).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r[3].guidance.contains("paraphrases of each other"));
        assert!(r[0]
            .guidance
            .starts_with("The two sentences are not equivalent"));
        assert!(r.iter().all(|e| !e.examples.is_empty()));
    }

    #[test]
    fn other_rubrics() {
        assert_eq!(rubric(Protocol::Xsts4).unwrap().len(), 4);
        assert_eq!(
            rubric(Protocol::Msts).unwrap(),
            rubric(Protocol::Xsts).unwrap()
        );
        assert_eq!(
            rubric(Protocol::BtMsts).unwrap(),
            rubric(Protocol::Xsts).unwrap()
        );
        assert_eq!(rubric(Protocol::Da).unwrap().len(), 5);
        assert!(matches!(
            rubric(Protocol::Pe),
            Err(RubricError::Unsupported(Protocol::Pe))
        ));
    }

    #[test]
    fn override_file_is_shape_checked() {
        let bad = r#"{"xsts": [{"score": 1, "title": "t", "guidance": "g"}]}"#;
        assert!(matches!(
            Rubric::from_json(bad),
            Err(RubricError::Shape { .. })
        ));
        let ok = r#"{"xsts4": [
            {"score": 1, "title": "a", "guidance": "a"},
            {"score": 2, "title": "b", "guidance": "b"},
            {"score": 3, "title": "c", "guidance": "c"},
            {"score": 4, "title": "d", "guidance": "d"}]}"#;
        let r = Rubric::from_json(ok).unwrap();
        assert_eq!(r.for_protocol(Protocol::Xsts4).unwrap()[3].title, "d");
        assert!(r.for_protocol(Protocol::Xsts).is_err());
    }
}
