//! Synthetic evaluator populations with known ground truth.
//!
//! Each language pair gets its own evaluators, a machine system whose item
//! qualities centre on a per-pair mean, and a human reference. Every
//! evaluator also judges one shared calibration set. A judgment is
//! `clip(round(scale_use * (t - 3) + 3 + leniency + N(0, noise_sd)))`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibmath::Method;
use crate::io::Bundle;
use crate::model::{
    AutoScoreRecord, Campaign, CampaignManifest, EvaluationItem, Evaluator, ItemLanguages,
    JudgmentRecord, LanguagePair, RawJudgment, TranslationSource, ENGLISH,
};
use crate::pipeline::{aggregate_by_lp, calibrate, Dataset, Level, PipelineError, Targets};
use crate::protocols::{Protocol, ScorePayload};
use crate::rng::mix64;
use crate::stats::{kendall_tau, pearson, StatsError};

/// Foreign languages used for simulated pairs, X-en first, then en-X.
pub const LANGUAGES: [&str; 14] = [
    "am", "ar", "az", "bs", "bg", "ka", "hi", "pt", "ro", "sd", "sl", "sw", "ur", "zu",
];

pub const MT_SYSTEM: &str = "MT1";
pub const HT_REFERENCE: &str = "HT0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorModel {
    pub evaluator_id: String,
    pub leniency: f64,
    pub noise_sd: f64,
    pub scale_use: f64,
}

impl EvaluatorModel {
    /// Expected judgment before rounding, for true quality `t`.
    pub fn latent(&self, t: f64) -> f64 {
        self.scale_use * (t - 3.0) + 3.0 + self.leniency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    /// Per-pair mean MT quality is uniform on this range.
    pub pair_mean_low: f64,
    pub pair_mean_high: f64,
    /// Spread of MT item quality around the pair mean.
    pub item_sd: f64,
    pub reference_mean: f64,
    pub reference_sd: f64,
    /// Round every item truth to an integer.
    pub integer: bool,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            pair_mean_low: 2.5,
            pair_mean_high: 4.8,
            item_sd: 0.6,
            reference_mean: 4.6,
            reference_sd: 0.3,
            integer: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub leniency_low: f64,
    pub leniency_high: f64,
    pub noise_sd: f64,
    pub scale_use_low: f64,
    pub scale_use_high: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            leniency_low: -0.6,
            leniency_high: 0.6,
            noise_sd: 0.4,
            scale_use_low: 1.0,
            scale_use_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_language_pairs: usize,
    /// MT items per pair.
    pub n_items: usize,
    /// Human reference items per pair.
    pub n_reference_items: usize,
    /// Size of the shared calibration set.
    pub n_calibration_items: usize,
    pub n_evaluators_per_pair: usize,
    pub truth: TruthConfig,
    pub evaluators: PopulationConfig,
    pub protocol: Protocol,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_language_pairs: 14,
            n_items: 1012,
            n_reference_items: 100,
            n_calibration_items: 1000,
            n_evaluators_per_pair: 3,
            truth: TruthConfig::default(),
            evaluators: PopulationConfig::default(),
            protocol: Protocol::Xsts,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.n_language_pairs == 0 || self.n_language_pairs > 2 * LANGUAGES.len() {
            return bad("n_language_pairs must be in 1..=28");
        }
        if self.n_items == 0 || self.n_calibration_items == 0 || self.n_evaluators_per_pair == 0 {
            return bad("item, calibration and evaluator counts must be positive");
        }
        if self.n_items.max(self.n_reference_items) >= 1 << 20 {
            return bad("at most 1048575 items per source and pair");
        }
        if !self.protocol.is_ordinal() {
            return bad("only ordinal protocols can be simulated");
        }
        let t = &self.truth;
        let p = &self.evaluators;
        let finite = [
            t.pair_mean_low,
            t.pair_mean_high,
            t.item_sd,
            t.reference_mean,
            t.reference_sd,
            p.leniency_low,
            p.leniency_high,
            p.noise_sd,
            p.scale_use_low,
            p.scale_use_high,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all distribution parameters must be finite");
        }
        if t.pair_mean_low > t.pair_mean_high
            || p.leniency_low > p.leniency_high
            || p.scale_use_low > p.scale_use_high
        {
            return bad("range bounds are reversed");
        }
        if t.item_sd < 0.0 || t.reference_sd < 0.0 || p.noise_sd < 0.0 {
            return bad("standard deviations must be non-negative");
        }
        Ok(())
    }

    pub fn language_pair(k: usize) -> LanguagePair {
        let foreign = LANGUAGES[k % LANGUAGES.len()];
        let result = if k < LANGUAGES.len() {
            LanguagePair::new(foreign, ENGLISH)
        } else {
            LanguagePair::new(ENGLISH, foreign)
        };
        result.expect("built-in codes are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTruth {
    pub lp: LanguagePair,
    /// Mean of the pair's MT item truths.
    pub mt_mean: f64,
    pub evaluators: Vec<EvaluatorModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub pairs: Vec<PairTruth>,
    pub items: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub campaign: Campaign,
    pub judgments: Vec<RawJudgment>,
    pub truth: GroundTruth,
    pub automatic_scores: Vec<AutoScoreRecord>,
}

impl Simulation {
    /// The campaign as the standard on-disk files.
    pub fn to_bundle(&self) -> Bundle {
        Bundle {
            manifest: CampaignManifest::from_campaign(
                &self.campaign,
                self.automatic_scores.clone(),
                true,
            ),
            items: self.campaign.to_records(),
            judgments: self.judgments.iter().map(JudgmentRecord::from).collect(),
        }
    }
}

fn gaussian(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("validated sd")
}

fn clamp_truth(t: f64, integer: bool) -> f64 {
    let t = t.clamp(1.0, 5.0);
    if integer {
        t.round()
    } else {
        t
    }
}

/// Item ids are opaque so they carry no provenance to evaluators.
fn opaque_id(seed: u64, n: u64) -> String {
    format!("i{:016x}", mix64(seed ^ mix64(n)))
}

/// Draws a campaign and its judgments. Identical configs give identical
/// output.
pub fn simulate(config: &SimConfig) -> Result<Simulation, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let t = &config.truth;
    let pop = &config.evaluators;
    let top = *config.protocol.scale().expect("ordinal").end() as f64;
    let mut truths = BTreeMap::new();

    // Calibration truths are stratified over [1, 5] so the set covers the
    // scale evenly; consensus is the truth rounded to the nearest half.
    let n_cal = config.n_calibration_items;
    let mut calibration_items = Vec::with_capacity(n_cal);
    for i in 0..n_cal {
        let u: f64 = rng.random();
        let truth = clamp_truth(1.0 + 4.0 * (i as f64 + u) / n_cal as f64, t.integer);
        let id = opaque_id(config.seed, i as u64);
        truths.insert(id.clone(), truth);
        calibration_items.push(EvaluationItem {
            text_a: format!("first text {id}"),
            text_b: format!("second text {id}"),
            item_id: id,
            languages: ItemLanguages::Monolingual(ENGLISH.to_string()),
            provenance: TranslationSource::Calibration,
            consensus_score: Some((truth * 2.0).round() / 2.0),
        });
    }

    let noise = gaussian(0.0, pop.noise_sd);
    let judge = |rng: &mut ChaCha8Rng, e: &EvaluatorModel, truth: f64| -> u8 {
        let x = e.latent(truth) + noise.sample(rng);
        x.round().clamp(1.0, top) as u8
    };

    let mut items = Vec::new();
    let mut evaluators = Vec::new();
    let mut judgments = Vec::new();
    let mut pairs = Vec::new();
    let mut automatic_scores = Vec::new();
    for k in 0..config.n_language_pairs {
        let lp = SimConfig::language_pair(k);
        let pair_mean = rng.random_range(t.pair_mean_low..=t.pair_mean_high);
        let models: Vec<EvaluatorModel> = (0..config.n_evaluators_per_pair)
            .map(|e| EvaluatorModel {
                evaluator_id: format!("{lp}-e{e}"),
                leniency: rng.random_range(pop.leniency_low..=pop.leniency_high),
                noise_sd: pop.noise_sd,
                scale_use: rng.random_range(pop.scale_use_low..=pop.scale_use_high),
            })
            .collect();

        let mt_dist = gaussian(pair_mean, t.item_sd);
        let ref_dist = gaussian(t.reference_mean, t.reference_sd);
        let mut pair_items = Vec::new();
        let mut mt_sum = 0.0;
        for i in 0..config.n_items {
            let truth = clamp_truth(mt_dist.sample(&mut rng), t.integer);
            mt_sum += truth;
            pair_items.push((
                opaque_id(config.seed, (1 << 40) | ((k as u64) << 20) | i as u64),
                TranslationSource::Machine(MT_SYSTEM.into()),
                truth,
            ));
        }
        for i in 0..config.n_reference_items {
            let truth = clamp_truth(ref_dist.sample(&mut rng), t.integer);
            pair_items.push((
                opaque_id(config.seed, (2 << 40) | ((k as u64) << 20) | i as u64),
                TranslationSource::HumanReference(HT_REFERENCE.into()),
                truth,
            ));
        }

        for model in &models {
            for (id, _, truth) in &pair_items {
                judgments.push((
                    model.evaluator_id.clone(),
                    id.clone(),
                    judge(&mut rng, model, *truth),
                ));
            }
            for cal in &calibration_items {
                let truth = truths[&cal.item_id];
                judgments.push((
                    model.evaluator_id.clone(),
                    cal.item_id.clone(),
                    judge(&mut rng, model, truth),
                ));
            }
        }

        let mt_mean = mt_sum / config.n_items as f64;
        let bleu =
            (5.0 + 12.0 * (mt_mean - 2.5) + gaussian(0.0, 2.0).sample(&mut rng)).clamp(0.0, 100.0);
        automatic_scores.push(AutoScoreRecord {
            src_lang: lp.source().to_string(),
            tgt_lang: lp.target().to_string(),
            system_id: MT_SYSTEM.into(),
            metric: "bleu".into(),
            value: bleu,
        });

        for (id, source, truth) in pair_items {
            truths.insert(id.clone(), truth);
            items.push(EvaluationItem {
                text_a: format!("first text {id}"),
                text_b: format!("second text {id}"),
                item_id: id,
                languages: ItemLanguages::CrossLingual(lp.clone()),
                provenance: source,
                consensus_score: None,
            });
        }
        evaluators.extend(
            models
                .iter()
                .map(|m| Evaluator::assigned(m.evaluator_id.clone(), vec![lp.clone()])),
        );
        pairs.push(PairTruth {
            lp,
            mt_mean,
            evaluators: models,
        });
    }

    let judgments = judgments
        .into_iter()
        .map(|(evaluator_id, item_id, score)| RawJudgment {
            evaluator_id,
            item_id,
            protocol: config.protocol,
            payload: ScorePayload::Ordinal(score),
            submitted_at: None,
        })
        .collect();

    Ok(Simulation {
        campaign: Campaign {
            campaign_id: format!("sim-{}", config.seed),
            protocol: config.protocol,
            seed: config.seed,
            evaluators,
            items,
            calibration_items,
        },
        judgments,
        truth: GroundTruth {
            seed: config.seed,
            pairs,
            items: truths,
        },
        automatic_scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEvaluation {
    pub method: Method,
    /// Pearson between adjusted per-pair MT aggregates and true pair means.
    pub pearson: f64,
    pub kendall_tau: f64,
    /// Adjusted MT aggregate per pair, in pair order.
    pub adjusted: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Runs each method through the pipeline and scores it against the truth.
pub fn evaluate_calibration(
    sim: &Simulation,
    methods: &[Method],
    ht_target: f64,
) -> Result<Vec<MethodEvaluation>, EvaluateError> {
    let ds = Dataset::build(&sim.campaign, &sim.judgments);
    let raw = aggregate_by_lp(&ds);
    let targets = Targets::for_campaign(&sim.campaign, ht_target)?;
    let truth: Vec<f64> = sim.truth.pairs.iter().map(|p| p.mt_mean).collect();
    methods
        .iter()
        .map(|&method| {
            let c = calibrate(method, Level::LanguagePair, &ds, &raw, targets)?;
            let adjusted: Vec<f64> = sim
                .truth
                .pairs
                .iter()
                .map(|p| {
                    c.adjusted
                        .iter()
                        .find(|a| {
                            a.language_pair == p.lp
                                && matches!(&a.source, TranslationSource::Machine(_))
                        })
                        .map(|a| a.adjusted)
                        .unwrap_or(f64::NAN)
                })
                .collect();
            Ok(MethodEvaluation {
                method,
                pearson: pearson(&adjusted, &truth)?,
                kendall_tau: kendall_tau(&adjusted, &truth)?,
                adjusted,
            })
        })
        .collect()
}
