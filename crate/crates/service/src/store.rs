//! File-backed campaign storage.
//!
//! Each campaign lives in `<data dir>/<campaign id>/`:
//!
//! * `campaign.json`, `items.jsonl`: the definition, written once.
//! * `events.jsonl`: append-only log. One line per status change or per
//!   accepted judgment batch. A line counts only once its newline is on
//!   disk; on startup an unterminated tail is dropped and truncated away.
//!
//! Readers work on immutable snapshots swapped in after each append.
//! Appends to one campaign are serialized by its writer lock.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use arc_swap::ArcSwap;
use serde::{Deserialize, Serialize};
use xcal_core::assembly::{assemble_task, Task};
use xcal_core::ingest::{latest_wins, Ingestor, RecordError};
use xcal_core::io::{to_jsonl, CAMPAIGN_FILE, ITEMS_FILE};
use xcal_core::model::{
    validate_campaign, AutoScoreRecord, Campaign, CampaignManifest, EvaluatorRecord, ItemRecord,
    JudgmentRecord, RawJudgment,
};
use xcal_core::protocols::Protocol;
use xcal_core::report::{compute_report, CampaignReport, ReportOptions};

use crate::error::ServiceError;

pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Draft,
    Collecting,
    Closed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Status { status: Status },
    Judgments { records: Vec<JudgmentRecord> },
}

/// Body of `POST /campaigns`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignDefinition {
    pub protocol: Protocol,
    #[serde(default)]
    pub seed: u64,
    pub evaluators: Vec<EvaluatorRecord>,
    pub items: Vec<ItemRecord>,
    #[serde(default)]
    pub automatic_scores: Vec<AutoScoreRecord>,
    /// Start in `draft` instead of `collecting`.
    #[serde(default)]
    pub draft: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: usize,
    pub errors: Vec<RecordError>,
}

/// One immutable view of a campaign.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub campaign: Arc<Campaign>,
    pub automatic_scores: Arc<Vec<AutoScoreRecord>>,
    pub status: Status,
    /// Accepted batches in log order.
    pub batches: Vec<Arc<Vec<RawJudgment>>>,
}

impl Snapshot {
    /// Latest judgment per `(evaluator, item, protocol)`.
    pub fn judgments(&self) -> Vec<RawJudgment> {
        latest_wins(self.batches.iter().flat_map(|b| b.iter().cloned()))
    }

    fn apply(&mut self, event: Event) -> Result<(), ServiceError> {
        match event {
            Event::Status { status } => self.status = status,
            Event::Judgments { records } => {
                let batch = records
                    .into_iter()
                    .map(RawJudgment::try_from)
                    .collect::<Result<Vec<_>, _>>()?;
                self.batches.push(Arc::new(batch));
            }
        }
        Ok(())
    }
}

pub struct CampaignHandle {
    dir: PathBuf,
    snapshot: ArcSwap<Snapshot>,
    writer: tokio::sync::Mutex<File>,
}

impl CampaignHandle {
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.load_full()
    }

    /// Writes one event line and syncs it, then publishes the new snapshot.
    /// Caller holds the writer lock.
    fn append(&self, file: &mut File, event: Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(&event).expect("event serializes");
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        let mut next = (*self.snapshot.load_full()).clone();
        next.apply(event)?;
        self.snapshot.store(Arc::new(next));
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

pub struct Store {
    root: PathBuf,
    campaigns: RwLock<HashMap<String, Arc<CampaignHandle>>>,
}

/// Reads the log, dropping an unterminated last line. Returns the events
/// and the byte length of the committed prefix.
fn read_events(path: &Path) -> Result<(Vec<Event>, u64), ServiceError> {
    let mut text = String::new();
    if path.exists() {
        File::open(path)?.read_to_string(&mut text)?;
    }
    let committed = text.rfind('\n').map(|i| i + 1).unwrap_or(0);
    let mut events = Vec::new();
    for (n, line) in text[..committed].lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(line)
            .map_err(|e| ServiceError::Corrupt(format!("{}:{}: {e}", path.display(), n + 1)))?;
        events.push(event);
    }
    Ok((events, committed as u64))
}

fn load_campaign(dir: &Path) -> Result<CampaignHandle, ServiceError> {
    let corrupt = |e: xcal_core::io::IoError| ServiceError::Corrupt(e.to_string());
    let manifest: CampaignManifest =
        xcal_core::io::read_json(&dir.join(CAMPAIGN_FILE)).map_err(corrupt)?;
    let items: Vec<ItemRecord> =
        xcal_core::io::read_jsonl(&dir.join(ITEMS_FILE)).map_err(corrupt)?;
    let automatic_scores = manifest.automatic_scores.clone();
    let campaign = manifest.into_campaign(items)?;

    let events_path = dir.join(EVENTS_FILE);
    let (events, committed) = read_events(&events_path)?;
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&events_path)?;
    if file.metadata()?.len() != committed {
        tracing::warn!(path = %events_path.display(), "dropping incomplete trailing event");
        file.set_len(committed)?;
        file.sync_data()?;
    }

    let mut snapshot = Snapshot {
        campaign: Arc::new(campaign),
        automatic_scores: Arc::new(automatic_scores),
        status: Status::Collecting,
        batches: Vec::new(),
    };
    for event in events {
        snapshot.apply(event)?;
    }
    Ok(CampaignHandle {
        dir: dir.to_path_buf(),
        snapshot: ArcSwap::from_pointee(snapshot),
        writer: tokio::sync::Mutex::new(file),
    })
}

impl Store {
    /// Opens `root`, creating it if needed, and replays every campaign log.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut campaigns = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let entry = entry?;
            let path = entry.path();
            if !path.join(CAMPAIGN_FILE).exists() {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            campaigns.insert(id, Arc::new(load_campaign(&path)?));
        }
        tracing::info!(root = %root.display(), campaigns = campaigns.len(), "store opened");
        Ok(Store {
            root,
            campaigns: RwLock::new(campaigns),
        })
    }

    pub fn get(&self, id: &str) -> Result<Arc<CampaignHandle>, ServiceError> {
        self.campaigns
            .read()
            .expect("campaign map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownCampaign(id.to_string()))
    }

    /// Validates and persists a campaign under a fresh id.
    pub fn create(&self, def: CampaignDefinition) -> Result<String, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        let manifest = CampaignManifest {
            campaign_id: id.clone(),
            protocol: def.protocol,
            seed: def.seed,
            evaluators: def.evaluators,
            automatic_scores: def.automatic_scores,
        };
        let campaign = manifest.clone().into_campaign(def.items.clone())?;
        let report = validate_campaign(&campaign);
        if !report.is_valid() {
            return Err(ServiceError::ValidationFailed(report));
        }

        // Written under a temporary name and renamed, so a crash never
        // leaves a half-created campaign behind.
        let staging = self.root.join(format!(".{id}.tmp"));
        fs::create_dir_all(&staging)?;
        let mut manifest_text =
            serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        manifest_text.push('\n');
        fs::write(staging.join(CAMPAIGN_FILE), manifest_text)?;
        fs::write(staging.join(ITEMS_FILE), to_jsonl(&def.items))?;
        let status = if def.draft {
            Status::Draft
        } else {
            Status::Collecting
        };
        let mut first = serde_json::to_string(&Event::Status { status }).expect("event serializes");
        first.push('\n');
        fs::write(staging.join(EVENTS_FILE), first)?;
        let dir = self.root.join(&id);
        fs::rename(&staging, &dir)?;

        let handle = load_campaign(&dir)?;
        self.campaigns
            .write()
            .expect("campaign map lock")
            .insert(id.clone(), Arc::new(handle));
        tracing::info!(campaign = %id, items = campaign.items.len() + campaign.calibration_items.len(), "campaign created");
        Ok(id)
    }

    /// Resolves which evaluator a request acts for. Evaluators configured
    /// with a token must present it; evaluators without one are open.
    pub fn authorize(
        &self,
        campaign: &Campaign,
        claimed: Option<&str>,
        token: Option<&str>,
    ) -> Result<String, ServiceError> {
        if let Some(token) = token {
            let evaluator = campaign
                .evaluators
                .iter()
                .find(|e| e.token.as_deref() == Some(token))
                .ok_or(ServiceError::Unauthorized)?;
            if claimed.is_some_and(|c| c != evaluator.id) {
                return Err(ServiceError::Unauthorized);
            }
            return Ok(evaluator.id.clone());
        }
        let claimed = claimed.ok_or(ServiceError::Unauthorized)?;
        let evaluator = campaign
            .evaluator(claimed)
            .ok_or_else(|| ServiceError::UnknownEvaluator(claimed.to_string()))?;
        if evaluator.token.is_some() {
            return Err(ServiceError::Unauthorized);
        }
        Ok(evaluator.id.clone())
    }

    pub fn task(
        &self,
        id: &str,
        evaluator: &str,
        token: Option<&str>,
    ) -> Result<Task, ServiceError> {
        let snapshot = self.get(id)?.snapshot();
        if snapshot.campaign.evaluator(evaluator).is_none() {
            return Err(ServiceError::UnknownEvaluator(evaluator.to_string()));
        }
        let evaluator = self.authorize(&snapshot.campaign, Some(evaluator), token)?;
        assemble_task(&snapshot.campaign, &evaluator)
            .map_err(|_| ServiceError::UnknownEvaluator(evaluator.clone()))
    }

    /// Validates each record; the valid ones are appended as one batch.
    /// With a token, every record must name the token's evaluator.
    pub async fn submit(
        &self,
        id: &str,
        token: Option<&str>,
        records: Vec<JudgmentRecord>,
    ) -> Result<SubmitOutcome, ServiceError> {
        let handle = self.get(id)?;
        let mut file = handle.writer.lock().await;
        let snapshot = handle.snapshot();
        match snapshot.status {
            Status::Closed => return Err(ServiceError::CampaignClosed),
            Status::Draft => return Err(ServiceError::NotCollecting),
            Status::Collecting => {}
        }
        let acting = match token {
            Some(_) => Some(self.authorize(&snapshot.campaign, None, token)?),
            None => None,
        };

        let ingestor = Ingestor::new(&snapshot.campaign);
        let mut accepted = Vec::new();
        let mut errors = Vec::new();
        for (index, record) in records.into_iter().enumerate() {
            let item_id = record.item_id.clone();
            let checked = match (&acting, snapshot.campaign.evaluator(&record.evaluator)) {
                (Some(who), _) if *who != record.evaluator => {
                    Err("record evaluator does not match the bearer token".to_string())
                }
                (None, Some(e)) if e.token.is_some() => {
                    Err("evaluator requires a bearer token".to_string())
                }
                _ => ingestor
                    .check(record.clone())
                    .map(|_| record)
                    .map_err(|e| e.to_string()),
            };
            match checked {
                Ok(record) => accepted.push(record),
                Err(error) => errors.push(RecordError {
                    index,
                    item_id,
                    error,
                }),
            }
        }

        let n = accepted.len();
        if n > 0 {
            handle.append(&mut file, Event::Judgments { records: accepted })?;
        }
        tracing::debug!(campaign = %id, accepted = n, rejected = errors.len(), "batch submitted");
        Ok(SubmitOutcome {
            accepted: n,
            errors,
        })
    }

    pub async fn set_status(&self, id: &str, status: Status) -> Result<Status, ServiceError> {
        let handle = self.get(id)?;
        let mut file = handle.writer.lock().await;
        let current = handle.snapshot().status;
        let allowed = matches!(
            (current, status),
            (Status::Draft, Status::Collecting)
                | (Status::Collecting, Status::Closed)
                | (Status::Draft, Status::Closed)
        );
        if current == status {
            return Ok(status);
        }
        if !allowed {
            return Err(match current {
                Status::Closed => ServiceError::CampaignClosed,
                _ => {
                    ServiceError::BadRequest(format!("cannot move from {current:?} to {status:?}"))
                }
            });
        }
        handle.append(&mut file, Event::Status { status })?;
        Ok(status)
    }

    /// Report over the current snapshot. CPU-bound; call off the async
    /// executor.
    pub fn report(
        &self,
        id: &str,
        options: &ReportOptions,
    ) -> Result<CampaignReport, ServiceError> {
        let snapshot = self.get(id)?.snapshot();
        Ok(compute_report(
            &snapshot.campaign,
            &snapshot.judgments(),
            &snapshot.automatic_scores,
            options,
        )?)
    }

    /// Export files: the manifest without tokens, the items, and the
    /// latest-wins judgments.
    pub fn export(&self, id: &str, file: &str) -> Result<String, ServiceError> {
        let snapshot = self.get(id)?.snapshot();
        match file {
            CAMPAIGN_FILE => {
                let manifest = CampaignManifest::from_campaign(
                    &snapshot.campaign,
                    (*snapshot.automatic_scores).clone(),
                    false,
                );
                let mut text =
                    serde_json::to_string_pretty(&manifest).expect("manifest serializes");
                text.push('\n');
                Ok(text)
            }
            ITEMS_FILE => Ok(to_jsonl(&snapshot.campaign.to_records())),
            xcal_core::io::JUDGMENTS_FILE => {
                let records: Vec<JudgmentRecord> = snapshot
                    .judgments()
                    .iter()
                    .map(JudgmentRecord::from)
                    .collect();
                Ok(to_jsonl(&records))
            }
            other => Err(ServiceError::BadRequest(format!(
                "no export named {other:?}"
            ))),
        }
    }
}
