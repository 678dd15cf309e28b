//! Agreement and correlation statistics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibmath::Method;
use crate::model::Direction;
use crate::protocols::{Protocol, ScorePayload};
use crate::rng::{shuffle, KeyedRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("rating matrix needs at least one item and one category")]
    EmptyMatrix,
    #[error("rating matrix rows must all have {expected} categories")]
    RaggedMatrix { expected: usize },
    #[error("row {row} sums to {found} raters, expected {expected}")]
    UnevenRaters {
        row: usize,
        expected: u32,
        found: u32,
    },
    #[error("at least two raters per item are required")]
    TooFewRaters,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("input is constant; correlation is undefined")]
    ConstantInput,
    #[error("could not draw a non-degenerate split within {attempts} attempts")]
    DegenerateSplit { attempts: usize },
    #[error("expected source {0:?} is missing")]
    MissingSource(String),
}

/// `counts[i][j]`: how many raters put item `i` in category `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    counts: Vec<Vec<u32>>,
    raters: u32,
}

impl RatingMatrix {
    pub fn new(counts: Vec<Vec<u32>>) -> Result<Self, StatsError> {
        let categories = counts.first().map(Vec::len).unwrap_or(0);
        if counts.is_empty() || categories == 0 {
            return Err(StatsError::EmptyMatrix);
        }
        if counts.iter().any(|row| row.len() != categories) {
            return Err(StatsError::RaggedMatrix {
                expected: categories,
            });
        }
        let raters: u32 = counts[0].iter().sum();
        for (row, r) in counts.iter().enumerate() {
            let found: u32 = r.iter().sum();
            if found != raters {
                return Err(StatsError::UnevenRaters {
                    row,
                    expected: raters,
                    found,
                });
            }
        }
        if raters < 2 {
            return Err(StatsError::TooFewRaters);
        }
        Ok(Self { counts, raters })
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    /// Every rating fell in one category, so chance agreement is 1 and
    /// kappa is set to 1 by convention.
    pub perfect_expected: bool,
}

/// Fleiss' kappa for a fixed number of raters per item.
pub fn fleiss_kappa(m: &RatingMatrix) -> Kappa {
    let n = m.raters as f64;
    let items = m.items() as f64;
    let categories = m.counts[0].len();

    let mut column_totals = vec![0u64; categories];
    let mut agreement_sum = 0.0;
    for row in &m.counts {
        let mut squares = 0u64;
        for (j, &c) in row.iter().enumerate() {
            column_totals[j] += c as u64;
            squares += c as u64 * c as u64;
        }
        agreement_sum += (squares as f64 - n) / (n * (n - 1.0));
    }
    let observed = agreement_sum / items;
    let total = items * n;
    let expected: f64 = column_totals
        .iter()
        .map(|&t| {
            let p = t as f64 / total;
            p * p
        })
        .sum();

    if (1.0 - expected).abs() < 1e-15 {
        return Kappa {
            value: 1.0,
            perfect_expected: true,
        };
    }
    Kappa {
        value: (observed - expected) / (1.0 - expected),
        perfect_expected: false,
    }
}

/// Number of kappa categories for a protocol. Post-editing is bucketed by
/// critical error count into {0, 1, 2, >=3}.
pub fn kappa_categories(protocol: Protocol) -> usize {
    protocol.scale().map(|s| s.count()).unwrap_or(4)
}

/// Zero-based kappa category of a payload.
pub fn kappa_category(payload: &ScorePayload) -> usize {
    match payload {
        ScorePayload::Ordinal(s) => (*s as usize).saturating_sub(1),
        ScorePayload::PostEdit {
            critical_errors, ..
        } => (*critical_errors as usize).min(3),
    }
}

/// One judgment as seen by the agreement table.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementObservation {
    pub direction: Direction,
    pub protocol: Protocol,
    pub language: String,
    pub source: String,
    pub item_id: String,
    pub category: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaCell {
    pub direction: Direction,
    pub protocol: Protocol,
    pub language: String,
    pub source: String,
    pub kappa: f64,
    pub perfect_expected: bool,
    pub n_items: usize,
    pub n_raters: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageKappa {
    pub direction: Direction,
    pub protocol: Protocol,
    pub language: String,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolAverage {
    pub direction: Direction,
    pub protocol: Protocol,
    pub avg: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub cells: Vec<KappaCell>,
    pub languages: Vec<LanguageKappa>,
    pub averages: Vec<ProtocolAverage>,
    /// Items dropped because they lacked the group's rater count.
    pub excluded_items: usize,
    /// Groups with fewer than two raters or no complete items.
    pub skipped_groups: usize,
}

type GroupKey = (Direction, Protocol, String, String);

/// Kappa per `(direction, protocol, language, source)`, averaged over
/// sources per language, then over languages per protocol, ranked by that
/// average within each direction (rank 1 = highest).
///
/// The group's rater count is the largest number of judgments any of its
/// items received; items with fewer are excluded and counted.
pub fn agreement_table(observations: &[AgreementObservation]) -> AgreementReport {
    let mut groups: BTreeMap<GroupKey, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for o in observations {
        groups
            .entry((
                o.direction,
                o.protocol,
                o.language.clone(),
                o.source.clone(),
            ))
            .or_default()
            .entry(o.item_id.as_str())
            .or_default()
            .push(o.category);
    }

    let mut report = AgreementReport::default();
    for ((direction, protocol, language, source), items) in groups {
        let raters = items.values().map(Vec::len).max().unwrap_or(0);
        let categories = kappa_categories(protocol);
        let mut rows = Vec::new();
        for cats in items.values() {
            if cats.len() != raters {
                report.excluded_items += 1;
                continue;
            }
            let mut row = vec![0u32; categories];
            for &c in cats {
                row[c.min(categories - 1)] += 1;
            }
            rows.push(row);
        }
        let n_items = rows.len();
        match RatingMatrix::new(rows) {
            Ok(m) => {
                let k = fleiss_kappa(&m);
                report.cells.push(KappaCell {
                    direction,
                    protocol,
                    language,
                    source,
                    kappa: k.value,
                    perfect_expected: k.perfect_expected,
                    n_items,
                    n_raters: m.raters(),
                });
            }
            Err(_) => report.skipped_groups += 1,
        }
    }

    let mut per_language: BTreeMap<(Direction, Protocol, String), Vec<f64>> = BTreeMap::new();
    for c in &report.cells {
        per_language
            .entry((c.direction, c.protocol, c.language.clone()))
            .or_default()
            .push(c.kappa);
    }
    let mut per_protocol: BTreeMap<(Direction, Protocol), Vec<f64>> = BTreeMap::new();
    for ((direction, protocol, language), ks) in per_language {
        let kappa = ks.iter().sum::<f64>() / ks.len() as f64;
        per_protocol
            .entry((direction, protocol))
            .or_default()
            .push(kappa);
        report.languages.push(LanguageKappa {
            direction,
            protocol,
            language,
            kappa,
        });
    }

    let mut by_direction: BTreeMap<Direction, Vec<(Protocol, f64)>> = BTreeMap::new();
    for ((direction, protocol), ks) in per_protocol {
        let avg = ks.iter().sum::<f64>() / ks.len() as f64;
        by_direction
            .entry(direction)
            .or_default()
            .push((protocol, avg));
    }
    for (direction, mut rows) in by_direction {
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, (protocol, avg)) in rows.into_iter().enumerate() {
            report.averages.push(ProtocolAverage {
                direction,
                protocol,
                avg,
                rank: i + 1,
            });
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationLink {
    pub higher: String,
    pub lower: String,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub label: String,
    pub links: Vec<SeparationLink>,
    pub pass: bool,
}

/// Checks that aggregates strictly decrease along `expected_order`
/// (e.g. `HT0 > MT1 > MT2`).
pub fn separation_check(
    label: impl Into<String>,
    scores: &BTreeMap<String, f64>,
    expected_order: &[String],
) -> Result<SeparationReport, StatsError> {
    let values = expected_order
        .iter()
        .map(|s| {
            scores
                .get(s)
                .copied()
                .ok_or_else(|| StatsError::MissingSource(s.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let links: Vec<SeparationLink> = expected_order
        .windows(2)
        .zip(values.windows(2))
        .map(|(names, v)| SeparationLink {
            higher: names[0].clone(),
            lower: names[1].clone(),
            margin: v[0] - v[1],
            pass: v[0] > v[1],
        })
        .collect();
    Ok(SeparationReport {
        label: label.into(),
        pass: links.iter().all(|l| l.pass),
        links,
    })
}

fn check_pair(x: &[f64], y: &[f64], needed: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < needed {
        return Err(StatsError::TooFewPoints {
            needed,
            got: x.len(),
        });
    }
    Ok(())
}

fn centered_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 2)?;
    let (mx, my) = (centered_mean(x), centered_mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Coefficient of determination of the full-data least-squares line,
/// i.e. the squared Pearson coefficient.
pub fn r_squared(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    pearson(x, y).map(|r| r * r)
}

/// Least-squares line `(slope, intercept)`, or `None` for constant `x`.
fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (mx, my) = (centered_mean(x), centered_mean(y));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Held-out r² of a line fitted on `train` and scored on `test`, or `None`
/// when either half is degenerate.
fn holdout_r2(x: &[f64], y: &[f64], train: &[usize], test: &[usize]) -> Option<f64> {
    let tx: Vec<f64> = train.iter().map(|&i| x[i]).collect();
    let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let (slope, intercept) = fit_line(&tx, &ty)?;
    let test_mean = test.iter().map(|&i| y[i]).sum::<f64>() / test.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &i in test {
        let predicted = slope * x[i] + intercept;
        ss_res += (y[i] - predicted) * (y[i] - predicted);
        ss_tot += (y[i] - test_mean) * (y[i] - test_mean);
    }
    if ss_tot == 0.0 {
        return None;
    }
    Some(1.0 - ss_res / ss_tot)
}

pub const DEFAULT_RESAMPLES: usize = 5000;

/// Mean held-out r² over `resamples` random 1:1 train/test splits of the
/// indices (train takes the extra point on odd counts). Resample `r` draws
/// from the stream `(seed, r)`; a split with constant train `x` or
/// constant test `y` is redrawn from the same stream. The result may be
/// negative.
pub fn bootstrap_cv_linreg(
    x: &[f64],
    y: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    check_pair(x, y, 4)?;
    if resamples == 0 {
        return Err(StatsError::TooFewPoints { needed: 1, got: 0 });
    }
    let n = x.len();
    let n_train = n.div_ceil(2);
    let cap = resamples.saturating_mul(10);
    let mut attempts = 0usize;
    let mut total = 0.0;
    let mut indices: Vec<usize> = Vec::with_capacity(n);
    for r in 0..resamples {
        let mut rng = KeyedRng::new(seed, r as u64);
        loop {
            attempts += 1;
            if attempts > cap {
                return Err(StatsError::DegenerateSplit { attempts: cap });
            }
            indices.clear();
            indices.extend(0..n);
            shuffle(&mut indices, &mut rng);
            let (train, test) = indices.split_at(n_train);
            if let Some(r2) = holdout_r2(x, y, train, test) {
                total += r2;
                break;
            }
        }
    }
    Ok(total / resamples as f64)
}

/// Kendall's tau-b.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 2)?;
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => ties_x += 1,
                (_, 0) => ties_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (concordant + discordant + ties_x) as f64;
    let n1 = (concordant + discordant + ties_y) as f64;
    if n0 == 0.0 || n1 == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((concordant - discordant) as f64 / (n0 * n1).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Pearson,
    RSquared,
    LinregCv,
}

impl CorrelationMethod {
    pub const ALL: [CorrelationMethod; 3] = [
        CorrelationMethod::Pearson,
        CorrelationMethod::RSquared,
        CorrelationMethod::LinregCv,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "Pearson's R",
            CorrelationMethod::RSquared => "r2",
            CorrelationMethod::LinregCv => "LinReg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DirectionFilter {
    #[serde(rename = "x-en")]
    IntoEnglish,
    #[serde(rename = "en-x")]
    OutOfEnglish,
    #[serde(rename = "both")]
    Both,
}

impl DirectionFilter {
    pub const ALL: [DirectionFilter; 3] = [
        DirectionFilter::IntoEnglish,
        DirectionFilter::OutOfEnglish,
        DirectionFilter::Both,
    ];

    pub fn admits(self, d: Direction) -> bool {
        match self {
            DirectionFilter::IntoEnglish => d == Direction::IntoEnglish,
            DirectionFilter::OutOfEnglish => d == Direction::OutOfEnglish,
            DirectionFilter::Both => true,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DirectionFilter::IntoEnglish => "X-EN",
            DirectionFilter::OutOfEnglish => "EN-X",
            DirectionFilter::Both => "both",
        }
    }
}

impl fmt::Display for DirectionFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub adjustment: Method,
    pub method: CorrelationMethod,
    pub direction: DirectionFilter,
    pub value: f64,
    pub n: usize,
}
