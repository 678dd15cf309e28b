//! Cross-lingual evaluation campaigns with calibration.
//!
//! The crate covers the data model, judgment protocols, task assembly,
//! aggregation and calibration, agreement and correlation statistics,
//! automatic metrics, a synthetic-evaluator simulator and report
//! generation. The HTTP service and the CLI are thin layers over it.

pub mod assembly;
pub mod calibmath;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod protocols;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use assembly::{assemble_task, PresentedItem, Task};
pub use calibmath::{AdjustmentFunction, AggregateScore, CalibError, ItemScore, Method};
pub use model::{
    Campaign, CampaignManifest, Direction, EvaluationItem, Evaluator, ItemLanguages, ItemRecord,
    JudgmentRecord, LanguagePair, RawJudgment, TranslationSource,
};
pub use protocols::{Protocol, ScorePayload};
