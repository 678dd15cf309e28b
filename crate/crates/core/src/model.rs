//! Domain types shared by every stage of a campaign, plus the canonical
//! JSONL record schemas used on disk and on the wire.
//!
//! Two layers live here. The record structs (`ItemRecord`, `JudgmentRecord`,
//! `CampaignManifest`) mirror the serialized schemas field for field. The
//! domain types (`EvaluationItem`, `RawJudgment`, `Campaign`) are what the
//! rest of the crate computes on. Conversions between the two reject
//! structurally malformed records; semantic invariants (duplicate ids,
//! missing consensus scores, empty texts) are reported by
//! [`validate_campaign`] so a caller can see every problem at once.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::protocols::{Arrangement, Protocol, ScorePayload};

/// The pivot language every language pair must contain.
pub const ENGLISH: &str = "en";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid language code {0:?}: expected 2-3 lowercase ASCII letters")]
    InvalidLanguage(String),
    #[error("language pair {0}-{1} must have English on exactly one side")]
    NotEnglishPivot(String, String),
    #[error("malformed language pair {0:?}: expected <src>-<tgt>")]
    MalformedPair(String),
    #[error("unknown provenance {0:?}")]
    UnknownProvenance(String),
    #[error("provenance {0} requires a non-empty system_id")]
    MissingSystemId(String),
    #[error("calibration items must not carry a system_id")]
    UnexpectedSystemId,
    #[error(
        "judgment record must carry either a score or a post-edit payload, not both or neither"
    )]
    MalformedPayload,
    #[error("unknown evaluator language assignment {0:?}")]
    BadAssignment(String),
}

fn check_lang(code: &str) -> Result<(), ModelError> {
    let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidLanguage(code.to_string()))
    }
}

/// Translation direction relative to English.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "x-en")]
    IntoEnglish,
    #[serde(rename = "en-x")]
    OutOfEnglish,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::IntoEnglish => "x-en",
            Direction::OutOfEnglish => "en-x",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// An X–English or English–X language pair. Serialized as `"src-tgt"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguagePair {
    source: String,
    target: String,
}

impl LanguagePair {
    pub fn new(source: &str, target: &str) -> Result<Self, ModelError> {
        check_lang(source)?;
        check_lang(target)?;
        if (source == ENGLISH) == (target == ENGLISH) {
            return Err(ModelError::NotEnglishPivot(source.into(), target.into()));
        }
        Ok(Self {
            source: source.to_string(),
            target: target.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn direction(&self) -> Direction {
        if self.target == ENGLISH {
            Direction::IntoEnglish
        } else {
            Direction::OutOfEnglish
        }
    }

    /// The non-English side.
    pub fn foreign(&self) -> &str {
        match self.direction() {
            Direction::IntoEnglish => &self.source,
            Direction::OutOfEnglish => &self.target,
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl FromStr for LanguagePair {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (src, tgt) = s
            .split_once('-')
            .ok_or_else(|| ModelError::MalformedPair(s.to_string()))?;
        LanguagePair::new(src, tgt)
    }
}

impl Serialize for LanguagePair {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LanguagePair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the two texts of an item relate linguistically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ItemLanguages {
    /// Source-language text vs. target-language text.
    CrossLingual(LanguagePair),
    /// Two texts in the same language (calibration pairs, MSTS).
    Monolingual(String),
}

impl ItemLanguages {
    pub fn arrangement(&self) -> Arrangement {
        match self {
            ItemLanguages::CrossLingual(_) => Arrangement::CrossLingual,
            ItemLanguages::Monolingual(_) => Arrangement::Monolingual,
        }
    }

    pub fn pair(&self) -> Option<&LanguagePair> {
        match self {
            ItemLanguages::CrossLingual(lp) => Some(lp),
            ItemLanguages::Monolingual(_) => None,
        }
    }

    fn codes(&self) -> (&str, &str) {
        match self {
            ItemLanguages::CrossLingual(lp) => (lp.source(), lp.target()),
            ItemLanguages::Monolingual(l) => (l, l),
        }
    }
}

/// Where the translated side of an item came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "provenance", content = "system_id", rename_all = "snake_case")]
pub enum TranslationSource {
    Machine(String),
    HumanReference(String),
    Calibration,
}

impl TranslationSource {
    pub const CALIBRATION_TAG: &'static str = "calibration";

    /// Display label: the system or reference id, or `calibration`.
    pub fn label(&self) -> &str {
        match self {
            TranslationSource::Machine(id) | TranslationSource::HumanReference(id) => id,
            TranslationSource::Calibration => Self::CALIBRATION_TAG,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            TranslationSource::Machine(_) => "machine",
            TranslationSource::HumanReference(_) => "human_reference",
            TranslationSource::Calibration => Self::CALIBRATION_TAG,
        }
    }

    pub fn system_id(&self) -> Option<&str> {
        match self {
            TranslationSource::Machine(id) | TranslationSource::HumanReference(id) => Some(id),
            TranslationSource::Calibration => None,
        }
    }

    pub fn from_parts(tag: &str, system_id: Option<&str>) -> Result<Self, ModelError> {
        let id = system_id.filter(|s| !s.is_empty()).map(str::to_string);
        match tag {
            "machine" => id
                .map(TranslationSource::Machine)
                .ok_or_else(|| ModelError::MissingSystemId(tag.into())),
            "human_reference" => id
                .map(TranslationSource::HumanReference)
                .ok_or_else(|| ModelError::MissingSystemId(tag.into())),
            "calibration" if system_id.is_none() => Ok(TranslationSource::Calibration),
            "calibration" => Err(ModelError::UnexpectedSystemId),
            other => Err(ModelError::UnknownProvenance(other.into())),
        }
    }

    pub fn is_calibration(&self) -> bool {
        matches!(self, TranslationSource::Calibration)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationItem {
    pub item_id: String,
    pub text_a: String,
    pub text_b: String,
    pub languages: ItemLanguages,
    pub provenance: TranslationSource,
    /// Agreed quality on the 1–5 scale; calibration items only.
    pub consensus_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawJudgment {
    pub evaluator_id: String,
    pub item_id: String,
    pub protocol: Protocol,
    pub payload: ScorePayload,
    /// RFC 3339; informational only.
    pub submitted_at: Option<String>,
}

/// An evaluator and the language pairs they are assigned to. An empty
/// assignment means every language pair present in the campaign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluator {
    pub id: String,
    pub language_pairs: Vec<LanguagePair>,
    pub token: Option<String>,
}

impl Evaluator {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            language_pairs: Vec::new(),
            token: None,
        }
    }

    pub fn assigned(id: impl Into<String>, pairs: Vec<LanguagePair>) -> Self {
        Self {
            id: id.into(),
            language_pairs: pairs,
            token: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub campaign_id: String,
    pub protocol: Protocol,
    pub seed: u64,
    pub evaluators: Vec<Evaluator>,
    pub items: Vec<EvaluationItem>,
    pub calibration_items: Vec<EvaluationItem>,
}

impl Campaign {
    /// Builds a campaign and rejects it unless [`validate_campaign`] is clean.
    pub fn new(
        campaign_id: impl Into<String>,
        protocol: Protocol,
        seed: u64,
        evaluators: Vec<Evaluator>,
        items: Vec<EvaluationItem>,
        calibration_items: Vec<EvaluationItem>,
    ) -> Result<Self, ValidationReport> {
        let campaign = Self {
            campaign_id: campaign_id.into(),
            protocol,
            seed,
            evaluators,
            items,
            calibration_items,
        };
        let report = validate_campaign(&campaign);
        if report.is_valid() {
            Ok(campaign)
        } else {
            Err(report)
        }
    }

    pub fn evaluator(&self, id: &str) -> Option<&Evaluator> {
        self.evaluators.iter().find(|e| e.id == id)
    }

    pub fn all_items(&self) -> impl Iterator<Item = &EvaluationItem> {
        self.items.iter().chain(self.calibration_items.iter())
    }

    pub fn item(&self, item_id: &str) -> Option<&EvaluationItem> {
        self.all_items().find(|i| i.item_id == item_id)
    }

    /// Distinct language pairs of the cross-lingual regular items, sorted.
    pub fn language_pairs(&self) -> Vec<LanguagePair> {
        let set: BTreeSet<LanguagePair> = self
            .items
            .iter()
            .filter_map(|i| i.languages.pair().cloned())
            .collect();
        set.into_iter().collect()
    }

    /// Language pairs an evaluator's monolingual judgments count toward.
    pub fn effective_pairs(&self, evaluator: &Evaluator) -> Vec<LanguagePair> {
        if evaluator.language_pairs.is_empty() {
            self.language_pairs()
        } else {
            let mut pairs = evaluator.language_pairs.clone();
            pairs.sort();
            pairs.dedup();
            pairs
        }
    }

    /// Whether `item` belongs in `evaluator`'s task.
    pub fn is_assigned(&self, evaluator: &Evaluator, item: &EvaluationItem) -> bool {
        match item.languages.pair() {
            None => true,
            Some(_) if evaluator.language_pairs.is_empty() => true,
            Some(lp) => evaluator.language_pairs.contains(lp),
        }
    }

    pub fn to_records(&self) -> Vec<ItemRecord> {
        self.all_items().map(ItemRecord::from).collect()
    }
}

/// One invariant violation found by [`validate_campaign`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    DuplicateId { item_id: String },
    MissingConsensus { item_id: String },
    UnexpectedConsensus { item_id: String },
    ConsensusOutOfRange { item_id: String, consensus: f64 },
    EmptyText { item_id: String },
    EmptyId,
    MisplacedItem { item_id: String },
    LanguageMismatch { item_id: String },
    DuplicateEvaluator { evaluator: String },
    NoEvaluators,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { item_id } => write!(f, "duplicate id: {item_id}"),
            Violation::MissingConsensus { item_id } => write!(f, "missing consensus: {item_id}"),
            Violation::UnexpectedConsensus { item_id } => {
                write!(f, "unexpected consensus on non-calibration item: {item_id}")
            }
            Violation::ConsensusOutOfRange { item_id, consensus } => {
                write!(f, "consensus {consensus} outside [1,5]: {item_id}")
            }
            Violation::EmptyText { item_id } => write!(f, "empty text: {item_id}"),
            Violation::EmptyId => f.write_str("empty item id"),
            Violation::MisplacedItem { item_id } => {
                write!(f, "provenance does not match item list: {item_id}")
            }
            Violation::LanguageMismatch { item_id } => {
                write!(
                    f,
                    "language arrangement does not suit the protocol: {item_id}"
                )
            }
            Violation::DuplicateEvaluator { evaluator } => {
                write!(f, "duplicate evaluator: {evaluator}")
            }
            Violation::NoEvaluators => f.write_str("campaign has no evaluators"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// Lists every invariant violation of `campaign`. Empty iff valid.
pub fn validate_campaign(campaign: &Campaign) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();

    let regular = campaign.items.iter().map(|i| (i, false));
    let calibration = campaign.calibration_items.iter().map(|i| (i, true));
    for (item, in_calibration_list) in regular.chain(calibration) {
        let id = &item.item_id;
        if id.is_empty() {
            violations.push(Violation::EmptyId);
        } else if !seen.insert(id.as_str()) {
            violations.push(Violation::DuplicateId {
                item_id: id.clone(),
            });
        }
        if item.text_a.is_empty() || item.text_b.is_empty() {
            violations.push(Violation::EmptyText {
                item_id: id.clone(),
            });
        }
        if item.provenance.is_calibration() != in_calibration_list {
            violations.push(Violation::MisplacedItem {
                item_id: id.clone(),
            });
        }
        match (item.provenance.is_calibration(), item.consensus_score) {
            (true, None) => violations.push(Violation::MissingConsensus {
                item_id: id.clone(),
            }),
            (true, Some(c)) if !(1.0..=5.0).contains(&c) => {
                violations.push(Violation::ConsensusOutOfRange {
                    item_id: id.clone(),
                    consensus: c,
                })
            }
            (false, Some(_)) => violations.push(Violation::UnexpectedConsensus {
                item_id: id.clone(),
            }),
            _ => {}
        }
        if !item.provenance.is_calibration()
            && item.languages.arrangement() != campaign.protocol.arrangement()
        {
            violations.push(Violation::LanguageMismatch {
                item_id: id.clone(),
            });
        }
    }

    if campaign.evaluators.is_empty() {
        violations.push(Violation::NoEvaluators);
    }
    let mut evaluators = HashSet::new();
    for e in &campaign.evaluators {
        if !evaluators.insert(e.id.as_str()) {
            violations.push(Violation::DuplicateEvaluator {
                evaluator: e.id.clone(),
            });
        }
    }

    ValidationReport { violations }
}

// ---------------------------------------------------------------------------
// Serialized record schemas.

/// Item line of `items.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: String,
    pub text_a: String,
    pub text_b: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub provenance: String,
    pub system_id: Option<String>,
    pub consensus: Option<f64>,
}

impl From<&EvaluationItem> for ItemRecord {
    fn from(item: &EvaluationItem) -> Self {
        let (src, tgt) = item.languages.codes();
        ItemRecord {
            item_id: item.item_id.clone(),
            text_a: item.text_a.clone(),
            text_b: item.text_b.clone(),
            src_lang: src.to_string(),
            tgt_lang: tgt.to_string(),
            provenance: item.provenance.tag().to_string(),
            system_id: item.provenance.system_id().map(str::to_string),
            consensus: item.consensus_score,
        }
    }
}

impl TryFrom<ItemRecord> for EvaluationItem {
    type Error = ModelError;

    fn try_from(r: ItemRecord) -> Result<Self, Self::Error> {
        let languages = if r.src_lang == r.tgt_lang {
            check_lang(&r.src_lang)?;
            ItemLanguages::Monolingual(r.src_lang)
        } else {
            ItemLanguages::CrossLingual(LanguagePair::new(&r.src_lang, &r.tgt_lang)?)
        };
        let provenance = TranslationSource::from_parts(&r.provenance, r.system_id.as_deref())?;
        Ok(EvaluationItem {
            item_id: r.item_id,
            text_a: r.text_a,
            text_b: r.text_b,
            languages,
            provenance,
            consensus_score: r.consensus,
        })
    }
}

/// Judgment line of `judgments.jsonl`. Fields a protocol does not use are null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub evaluator: String,
    pub item_id: String,
    pub protocol: Protocol,
    pub score: Option<u8>,
    pub edited_text: Option<String>,
    pub critical_errors: Option<u32>,
    pub ts: Option<String>,
}

impl From<&RawJudgment> for JudgmentRecord {
    fn from(j: &RawJudgment) -> Self {
        let (score, edited_text, critical_errors) = match &j.payload {
            ScorePayload::Ordinal(s) => (Some(*s), None, None),
            ScorePayload::PostEdit {
                edited_text,
                critical_errors,
            } => (None, Some(edited_text.clone()), Some(*critical_errors)),
        };
        JudgmentRecord {
            evaluator: j.evaluator_id.clone(),
            item_id: j.item_id.clone(),
            protocol: j.protocol,
            score,
            edited_text,
            critical_errors,
            ts: j.submitted_at.clone(),
        }
    }
}

impl TryFrom<JudgmentRecord> for RawJudgment {
    type Error = ModelError;

    fn try_from(r: JudgmentRecord) -> Result<Self, Self::Error> {
        let payload = match (r.score, r.edited_text, r.critical_errors) {
            (Some(s), None, None) => ScorePayload::Ordinal(s),
            (None, Some(edited_text), Some(critical_errors)) => ScorePayload::PostEdit {
                edited_text,
                critical_errors,
            },
            _ => return Err(ModelError::MalformedPayload),
        };
        Ok(RawJudgment {
            evaluator_id: r.evaluator,
            item_id: r.item_id,
            protocol: r.protocol,
            payload,
            submitted_at: r.ts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorRecord {
    pub id: String,
    #[serde(default)]
    pub lps: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

/// An automatic metric score (e.g. BLEU) for one system on one language pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoScoreRecord {
    pub src_lang: String,
    pub tgt_lang: String,
    pub system_id: String,
    pub metric: String,
    pub value: f64,
}

impl AutoScoreRecord {
    pub fn language_pair(&self) -> Result<LanguagePair, ModelError> {
        LanguagePair::new(&self.src_lang, &self.tgt_lang)
    }
}

/// `campaign.json`: everything about a campaign except its items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub campaign_id: String,
    pub protocol: Protocol,
    pub seed: u64,
    pub evaluators: Vec<EvaluatorRecord>,
    #[serde(default)]
    pub automatic_scores: Vec<AutoScoreRecord>,
}

impl CampaignManifest {
    /// Assembles a campaign from this manifest and its item records.
    /// Structural errors fail here; invariant checks are left to the caller.
    pub fn into_campaign(self, items: Vec<ItemRecord>) -> Result<Campaign, ModelError> {
        let mut regular = Vec::new();
        let mut calibration = Vec::new();
        for record in items {
            let item = EvaluationItem::try_from(record)?;
            if item.provenance.is_calibration() {
                calibration.push(item);
            } else {
                regular.push(item);
            }
        }
        let evaluators = self
            .evaluators
            .into_iter()
            .map(|e| {
                let pairs = e
                    .lps
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<LanguagePair>, _>>()?;
                Ok(Evaluator {
                    id: e.id,
                    language_pairs: pairs,
                    token: e.token,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Campaign {
            campaign_id: self.campaign_id,
            protocol: self.protocol,
            seed: self.seed,
            evaluators,
            items: regular,
            calibration_items: calibration,
        })
    }

    pub fn from_campaign(
        campaign: &Campaign,
        automatic_scores: Vec<AutoScoreRecord>,
        include_tokens: bool,
    ) -> Self {
        CampaignManifest {
            campaign_id: campaign.campaign_id.clone(),
            protocol: campaign.protocol,
            seed: campaign.seed,
            evaluators: campaign
                .evaluators
                .iter()
                .map(|e| EvaluatorRecord {
                    id: e.id.clone(),
                    lps: e.language_pairs.iter().map(|lp| lp.to_string()).collect(),
                    token: if include_tokens {
                        e.token.clone()
                    } else {
                        None
                    },
                })
                .collect(),
            automatic_scores,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn item(id: &str, lp: &str, source: TranslationSource) -> EvaluationItem {
        EvaluationItem {
            item_id: id.into(),
            text_a: format!("a {id}"),
            text_b: format!("b {id}"),
            languages: ItemLanguages::CrossLingual(lp.parse().unwrap()),
            provenance: source,
            consensus_score: None,
        }
    }

    fn calib(id: &str, consensus: Option<f64>) -> EvaluationItem {
        EvaluationItem {
            item_id: id.into(),
            text_a: format!("mt {id}"),
            text_b: format!("ref {id}"),
            languages: ItemLanguages::Monolingual("en".into()),
            provenance: TranslationSource::Calibration,
            consensus_score: consensus,
        }
    }

    fn campaign(items: Vec<EvaluationItem>, calibration: Vec<EvaluationItem>) -> Campaign {
        Campaign {
            campaign_id: "c".into(),
            protocol: Protocol::Xsts,
            seed: 1,
            evaluators: vec![Evaluator::new("e1")],
            items,
            calibration_items: calibration,
        }
    }

    #[test]
    fn language_pair_requires_english_pivot() {
        assert!(LanguagePair::new("ro", "en").is_ok());
        assert!(LanguagePair::new("en", "sw").is_ok());
        assert!(matches!(
            LanguagePair::new("ro", "sw"),
            Err(ModelError::NotEnglishPivot(..))
        ));
        assert!(matches!(
            LanguagePair::new("en", "en"),
            Err(ModelError::NotEnglishPivot(..))
        ));
        assert!(LanguagePair::new("RO", "en").is_err());
        let lp: LanguagePair = "en-ka".parse().unwrap();
        assert_eq!(lp.direction(), Direction::OutOfEnglish);
        assert_eq!(lp.foreign(), "ka");
        assert_eq!(lp.reversed().to_string(), "ka-en");
    }

    #[test]
    fn valid_campaign_has_empty_report() {
        let c = campaign(
            vec![item(
                "i1",
                "ro-en",
                TranslationSource::Machine("MT1".into()),
            )],
            vec![calib("c1", Some(3.5))],
        );
        assert!(validate_campaign(&c).is_valid());
    }

    #[test]
    fn missing_consensus_is_reported() {
        let c = campaign(vec![], vec![calib("c1", None)]);
        let report = validate_campaign(&c);
        assert_eq!(
            report.violations,
            vec![Violation::MissingConsensus {
                item_id: "c1".into()
            }]
        );
        assert!(report.to_string().contains("missing consensus"));
    }

    #[test]
    fn duplicate_id_is_reported() {
        let c = campaign(
            vec![item("x", "ro-en", TranslationSource::Machine("MT1".into()))],
            vec![calib("x", Some(2.0))],
        );
        let report = validate_campaign(&c);
        assert_eq!(
            report.violations,
            vec![Violation::DuplicateId {
                item_id: "x".into()
            }]
        );
        assert!(report.to_string().contains("duplicate id"));
    }

    #[test]
    fn empty_text_and_stray_consensus_are_reported() {
        let mut bad = item("i1", "ro-en", TranslationSource::Machine("MT1".into()));
        bad.text_b.clear();
        bad.consensus_score = Some(4.0);
        let c = campaign(vec![bad], vec![calib("c1", Some(7.0))]);
        let v = validate_campaign(&c).violations;
        assert!(v.contains(&Violation::EmptyText {
            item_id: "i1".into()
        }));
        assert!(v.contains(&Violation::UnexpectedConsensus {
            item_id: "i1".into()
        }));
        assert!(v.contains(&Violation::ConsensusOutOfRange {
            item_id: "c1".into(),
            consensus: 7.0
        }));
    }

    #[test]
    fn campaign_new_rejects_invalid() {
        let err = Campaign::new(
            "c",
            Protocol::Xsts,
            0,
            vec![Evaluator::new("e")],
            vec![],
            vec![calib("c1", None)],
        )
        .unwrap_err();
        assert_eq!(err.violations.len(), 1);
    }

    #[test]
    fn msts_campaign_rejects_cross_lingual_items() {
        let mut c = campaign(
            vec![item(
                "i1",
                "ro-en",
                TranslationSource::Machine("MT1".into()),
            )],
            vec![],
        );
        c.protocol = Protocol::Msts;
        assert_eq!(
            validate_campaign(&c).violations,
            vec![Violation::LanguageMismatch {
                item_id: "i1".into()
            }]
        );
    }

    #[test]
    fn item_record_has_exact_field_names() {
        let rec = ItemRecord::from(&calib("c1", Some(3.0)));
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            json,
            r#"{"item_id":"c1","text_a":"mt c1","text_b":"ref c1","src_lang":"en","tgt_lang":"en","provenance":"calibration","system_id":null,"consensus":3.0}"#
        );
    }

    #[test]
    fn judgment_record_nulls_irrelevant_fields() {
        let j = RawJudgment {
            evaluator_id: "e1".into(),
            item_id: "i1".into(),
            protocol: Protocol::Xsts,
            payload: ScorePayload::Ordinal(4),
            submitted_at: Some("2022-05-01T10:00:00Z".into()),
        };
        let json = serde_json::to_string(&JudgmentRecord::from(&j)).unwrap();
        assert_eq!(
            json,
            r#"{"evaluator":"e1","item_id":"i1","protocol":"xsts","score":4,"edited_text":null,"critical_errors":null,"ts":"2022-05-01T10:00:00Z"}"#
        );
    }

    #[test]
    fn malformed_records_are_rejected() {
        let rec = JudgmentRecord {
            evaluator: "e".into(),
            item_id: "i".into(),
            protocol: Protocol::Pe,
            score: Some(3),
            edited_text: Some("x".into()),
            critical_errors: Some(0),
            ts: None,
        };
        assert_eq!(
            RawJudgment::try_from(rec),
            Err(ModelError::MalformedPayload)
        );

        let rec = ItemRecord {
            item_id: "i".into(),
            text_a: "a".into(),
            text_b: "b".into(),
            src_lang: "ro".into(),
            tgt_lang: "en".into(),
            provenance: "machine".into(),
            system_id: None,
            consensus: None,
        };
        assert!(matches!(
            EvaluationItem::try_from(rec),
            Err(ModelError::MissingSystemId(_))
        ));
    }
}
