//! Cleaning, careless-response exclusion and total-score labelling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cohort, ParticipantRecord, N_ITEMS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    /// Any single interval above this (seconds) excludes the participant.
    pub max_rt_s: f64,
    /// Mean interval below this (seconds) marks a careless responder.
    pub min_mean_rt_s: f64,
    /// Sample variance (n - 1 denominator, s^2) above this marks a careless responder.
    pub max_rt_variance_s2: f64,
    /// Total score at or above which a participant is labelled 1.
    pub label_threshold: i64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig { max_rt_s: 60.0, min_mean_rt_s: 1.5, max_rt_variance_s2: 6.0, label_threshold: 7 }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.max_rt_s, self.min_mean_rt_s, self.max_rt_variance_s2];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("screening thresholds must be finite and > 0".into()));
        }
        if !(0..=28).contains(&self.label_threshold) {
            return Err(Error::Config(format!("label_threshold {} outside 0..=28", self.label_threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Included,
    ExcludedMissing,
    ExcludedOutlierRt,
    ExcludedCareless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Missing,
    MaxRt,
    MinMeanRt,
    MaxRtVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disposition {
    pub participant_id: String,
    pub verdict: Verdict,
    pub rule: Option<Rule>,
    /// The value that tripped the rule: seconds, seconds^2, or the item index for missing data.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningCounts {
    pub included: usize,
    pub excluded_missing: usize,
    pub excluded_outlier_rt: usize,
    pub excluded_careless: usize,
}

impl ScreeningCounts {
    pub fn total(&self) -> usize {
        self.included + self.excluded_missing + self.excluded_outlier_rt + self.excluded_careless
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub counts: ScreeningCounts,
    pub dispositions: Vec<Disposition>,
}

/// Sample mean and variance (n - 1 denominator).
pub fn mean_and_sample_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, if xs.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

/// Decide one record. Rules fire in the fixed order missing, outlier, careless.
pub fn classify(record: &ParticipantRecord, config: &ScreeningConfig) -> Disposition {
    let verdict = |verdict, rule, value| Disposition {
        participant_id: record.participant_id.clone(),
        verdict,
        rule,
        value,
    };
    let first_missing = (0..N_ITEMS).find(|&i| {
        record.rt_ms.get(i).copied().flatten().is_none() || record.item_scores.get(i).copied().flatten().is_none()
    });
    if let Some(i) = first_missing {
        return verdict(Verdict::ExcludedMissing, Some(Rule::Missing), Some(i as f64));
    }
    let rt = record.rt_seconds().expect("no missing entries");
    if let Some(&worst) = rt.iter().filter(|&&v| v > config.max_rt_s).max_by(|a, b| a.total_cmp(b)) {
        return verdict(Verdict::ExcludedOutlierRt, Some(Rule::MaxRt), Some(worst));
    }
    let (mean, var) = mean_and_sample_variance(&rt);
    if mean < config.min_mean_rt_s {
        return verdict(Verdict::ExcludedCareless, Some(Rule::MinMeanRt), Some(mean));
    }
    if var > config.max_rt_variance_s2 {
        return verdict(Verdict::ExcludedCareless, Some(Rule::MaxRtVariance), Some(var));
    }
    verdict(Verdict::Included, None, None)
}

/// Split a cohort into included records and a report covering every input record.
pub fn screen(cohort: &Cohort, config: &ScreeningConfig) -> (Cohort, ScreeningReport) {
    let mut counts = ScreeningCounts::default();
    let mut included = Vec::new();
    let mut dispositions = Vec::with_capacity(cohort.len());
    for record in &cohort.records {
        let d = classify(record, config);
        match d.verdict {
            Verdict::Included => {
                counts.included += 1;
                included.push(record.clone());
            }
            Verdict::ExcludedMissing => counts.excluded_missing += 1,
            Verdict::ExcludedOutlierRt => counts.excluded_outlier_rt += 1,
            Verdict::ExcludedCareless => counts.excluded_careless += 1,
        }
        dispositions.push(d);
    }
    let kept = Cohort { records: included, source: cohort.source.clone(), ingest_warnings: Vec::new() };
    (kept, ScreeningReport { counts, dispositions })
}

pub fn total_score(record: &ParticipantRecord) -> Result<i64> {
    if record.item_scores.len() != N_ITEMS {
        return Err(Error::Precondition(format!("expected {N_ITEMS} item scores")));
    }
    record
        .item_scores
        .iter()
        .enumerate()
        .try_fold(0, |acc, (i, s)| s.map(|v| acc + v).ok_or(Error::MissingScore(i)))
}

/// 1 iff the total score reaches `threshold`.
pub fn label(record: &ParticipantRecord, threshold: i64) -> Result<u8> {
    Ok(u8::from(total_score(record)? >= threshold))
}
