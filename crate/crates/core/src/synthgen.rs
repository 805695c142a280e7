//! Synthetic cohorts with planted, recoverable structure.
//!
//! Each item's response time follows a quadratic curve in its score plus a
//! group shift, a per-person offset and symmetric truncated-normal noise.
//! Careless, outlier and missing-data artifacts are injected at configured
//! rates and recorded in a ground-truth sidecar.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cohort, Gender, ParticipantRecord, N_ITEMS};
use crate::screening::{screen, Rule, ScreeningConfig, Verdict};
use crate::seed;
use crate::stats::{quadratic_ols, RegressionFit};

pub const DEFAULT_BETA1: [f64; N_ITEMS] = [1.17, 1.56, 1.25, 0.82, 1.53, 1.01, 0.99];
pub const DEFAULT_BETA2: [f64; N_ITEMS] = [-0.18, -0.32, -0.20, -0.12, -0.33, -0.22, -0.30];
pub const DEFAULT_BETA0: f64 = 2.0;
/// Target medians of the total response time (seconds) per group.
pub const TARGET_TOTAL_MEDIAN: [f64; 2] = [22.0, 28.0];

const NON_INSOMNIA_SCORES: [f64; 5] = [0.70, 0.22, 0.06, 0.02, 0.0];
const INSOMNIA_SCORES: [f64; 5] = [0.05, 0.25, 0.40, 0.20, 0.10];
const RECORD_TAG: u64 = 0x5EC0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRates {
    /// Fast or erratic responders.
    pub careless: f64,
    /// Share of careless records that are erratic rather than fast.
    pub erratic_share: f64,
    /// One interval replaced by a pause longer than 60 s.
    pub outlier: f64,
    /// One interval or score blanked.
    pub missing: f64,
}

impl ArtifactRates {
    pub fn none() -> Self {
        ArtifactRates { careless: 0.0, erratic_share: 0.5, outlier: 0.0, missing: 0.0 }
    }
}

impl Default for ArtifactRates {
    fn default() -> Self {
        ArtifactRates { careless: 0.05, erratic_share: 0.5, outlier: 0.03, missing: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_records: usize,
    pub insomnia_prevalence: f64,
    /// Per-item categorical score distributions, `[group][item][score]`,
    /// group 0 = non-insomnia.
    pub score_probs: [Vec<[f64; 5]>; 2],
    pub beta0: [f64; N_ITEMS],
    pub beta1: [f64; N_ITEMS],
    pub beta2: [f64; N_ITEMS],
    /// Per-item noise standard deviation (seconds) before truncation.
    pub noise_sd: [f64; N_ITEMS],
    /// Standard deviation of a per-person offset shared by all items.
    pub person_sd: f64,
    pub floor_s: f64,
    /// Added to every participant's total response time, split evenly over items.
    pub baseline_total_shift_s: f64,
    /// Added on top for the insomnia group, split evenly over items.
    pub group_total_shift_s: f64,
    pub artifacts: ArtifactRates,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let mut spec = SyntheticSpec {
            n_records: 2000,
            insomnia_prevalence: 0.08,
            score_probs: [vec![NON_INSOMNIA_SCORES; N_ITEMS], vec![INSOMNIA_SCORES; N_ITEMS]],
            beta0: [DEFAULT_BETA0; N_ITEMS],
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            noise_sd: [1.3; N_ITEMS],
            person_sd: 0.5,
            floor_s: 0.2,
            baseline_total_shift_s: 0.0,
            group_total_shift_s: 0.0,
            artifacts: ArtifactRates::default(),
        };
        spec.calibrate_shifts();
        spec
    }
}

impl SyntheticSpec {
    /// Expected total response time of a group before shifts and noise.
    pub fn expected_curve_total(&self, group: usize) -> f64 {
        (0..N_ITEMS)
            .map(|i| {
                let p = &self.score_probs[group][i];
                self.beta0[i]
                    + (0..5).map(|s| p[s] * (self.beta1[i] * s as f64 + self.beta2[i] * (s * s) as f64)).sum::<f64>()
            })
            .sum()
    }

    /// Set both shifts so the expected group totals hit the target medians.
    /// The noise is symmetric, so expectations stand in for medians.
    pub fn calibrate_shifts(&mut self) {
        let [e0, e1] = [self.expected_curve_total(0), self.expected_curve_total(1)];
        self.baseline_total_shift_s = TARGET_TOTAL_MEDIAN[0] - e0;
        self.group_total_shift_s = TARGET_TOTAL_MEDIAN[1] - TARGET_TOTAL_MEDIAN[0] - (e1 - e0);
    }

    /// No artifacts and no group shift: the setting in which per-item
    /// quadratic fits are correctly specified.
    pub fn clean(mut self) -> Self {
        self.artifacts = ArtifactRates::none();
        self.group_total_shift_s = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.insomnia_prevalence > 0.0 && self.insomnia_prevalence < 1.0) {
            return bad(format!("prevalence {} must lie strictly between 0 and 1", self.insomnia_prevalence));
        }
        for (g, items) in self.score_probs.iter().enumerate() {
            if items.len() != N_ITEMS {
                return bad(format!("group {g} needs {N_ITEMS} score distributions"));
            }
            for (i, p) in items.iter().enumerate() {
                if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad(format!("group {g} item {} probabilities must be >= 0 and sum to 1", i + 1));
                }
            }
        }
        if self.noise_sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("noise_sd must be > 0".into());
        }
        if !(self.person_sd >= 0.0 && self.person_sd.is_finite()) {
            return bad("person_sd must be >= 0".into());
        }
        if !(self.floor_s > 0.0) {
            return bad("floor_s must be > 0".into());
        }
        let a = &self.artifacts;
        let rates = [a.careless, a.outlier, a.missing, a.erratic_share];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) || a.careless + a.outlier + a.missing > 1.0 {
            return bad("artifact rates must lie in [0, 1] and sum to at most 1".into());
        }
        Ok(())
    }

    /// Noise-free mean response time for an item, group and score.
    pub fn planted_mean(&self, item: usize, group: u8, score: i64) -> f64 {
        let s = score as f64;
        let shift = self.baseline_total_shift_s + f64::from(group) * self.group_total_shift_s;
        self.beta0[item] + self.beta1[item] * s + self.beta2[item] * s * s + shift / N_ITEMS as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    None,
    CarelessFast,
    CarelessErratic,
    Outlier,
    Missing,
}

impl Artifact {
    pub fn is_careless(self) -> bool {
        matches!(self, Artifact::CarelessFast | Artifact::CarelessErratic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub participant_id: String,
    pub group: u8,
    pub artifact: Artifact,
    /// Item position touched by an outlier or missing injection.
    pub artifact_item: Option<usize>,
    pub person_offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub spec: SyntheticSpec,
    pub records: Vec<RecordTruth>,
}

/// Zero-mean normal truncated symmetrically at `±bound`.
fn symmetric_truncated(rng: &mut ChaCha8Rng, sd: f64, bound: f64) -> f64 {
    if bound <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sd).expect("positive sd");
    loop {
        let v = normal.sample(rng);
        if v.abs() <= bound {
            return v;
        }
    }
}

fn draw_score(rng: &mut ChaCha8Rng, p: &[f64; 5]) -> i64 {
    let mut u = rng.random::<f64>();
    for (s, &w) in p.iter().enumerate() {
        if u < w {
            return s as i64;
        }
        u -= w;
    }
    p.iter().rposition(|&w| w > 0.0).unwrap_or(0) as i64
}

fn to_ms(seconds: f64) -> i64 {
    (seconds * 1000.0).round() as i64
}

/// Fixed truncation bounds: the person offset lies in `±offset` and item
/// noise in `±noise[i]`, chosen so the lowest planted mean of each item stays
/// above the floor. Constant bounds keep the noise homoscedastic.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    offset: f64,
    noise: [f64; N_ITEMS],
}

impl SyntheticSpec {
    /// Lowest planted mean of an item over both groups and all scores.
    pub fn min_planted_mean(&self, item: usize) -> f64 {
        (0..2u8)
            .flat_map(|g| (0..5).map(move |s| (g, s)))
            .map(|(g, s)| self.planted_mean(item, g, s))
            .fold(f64::INFINITY, f64::min)
    }

    fn bounds(&self) -> Bounds {
        let headroom: [f64; N_ITEMS] = std::array::from_fn(|i| self.min_planted_mean(i) - self.floor_s);
        let min_headroom = headroom.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
        let offset = (3.0 * self.person_sd).min(0.5 * min_headroom);
        let noise = std::array::from_fn(|i| (3.0 * self.noise_sd[i]).min(headroom[i] - offset).max(0.0));
        Bounds { offset, noise }
    }
}

fn generate_one(spec: &SyntheticSpec, bounds: &Bounds, index: usize, seed: u64) -> (ParticipantRecord, RecordTruth) {
    let mut rng = seed::rng(seed);
    let group = u8::from(rng.random::<f64>() < spec.insomnia_prevalence);
    let scores: [i64; N_ITEMS] = std::array::from_fn(|i| draw_score(&mut rng, &spec.score_probs[usize::from(group)][i]));
    let offset = if spec.person_sd > 0.0 { symmetric_truncated(&mut rng, spec.person_sd, bounds.offset) } else { 0.0 };
    let rt: [f64; N_ITEMS] = std::array::from_fn(|i| {
        let mu = spec.planted_mean(i, group, scores[i]) + offset;
        (mu + symmetric_truncated(&mut rng, spec.noise_sd[i], bounds.noise[i])).max(spec.floor_s)
    });
    let mut rt_ms = rt.map(to_ms);

    let a = &spec.artifacts;
    let u = rng.random::<f64>();
    let (artifact, artifact_item) = if u < a.careless {
        if rng.random::<f64>() < a.erratic_share {
            let high = sample(&mut rng, N_ITEMS, 3).into_vec();
            for (i, v) in rt_ms.iter_mut().enumerate() {
                let s = if high.contains(&i) { rng.random_range(9.0..15.0) } else { rng.random_range(0.5..1.5) };
                *v = to_ms(s);
            }
            (Artifact::CarelessErratic, None)
        } else {
            rt_ms.iter_mut().for_each(|v| *v = to_ms(rng.random_range(0.3..1.3)));
            (Artifact::CarelessFast, None)
        }
    } else if u < a.careless + a.outlier {
        let i = rng.random_range(0..N_ITEMS);
        rt_ms[i] = to_ms(rng.random_range(61.0..180.0));
        (Artifact::Outlier, Some(i))
    } else if u < a.careless + a.outlier + a.missing {
        (Artifact::Missing, Some(rng.random_range(0..N_ITEMS)))
    } else {
        (Artifact::None, None)
    };

    let id = format!("S{index:05}");
    let mut record = ParticipantRecord::new(id.clone(), rt_ms, scores);
    record.age = Some(rng.random_range(18..=70));
    record.gender = if rng.random::<bool>() { Gender::Female } else { Gender::Male };
    if artifact == Artifact::Missing {
        let i = artifact_item.expect("missing item chosen");
        if rng.random::<bool>() {
            record.rt_ms[i] = None;
        } else {
            record.item_scores[i] = None;
        }
    }
    let truth = RecordTruth { participant_id: id, group, artifact, artifact_item, person_offset_s: offset };
    (record, truth)
}

/// Generate a cohort and its ground truth. Records are independent and
/// seeded by index, so the output does not depend on thread scheduling.
pub fn generate_cohort(spec: &SyntheticSpec, seed: u64) -> Result<(Cohort, GroundTruth)> {
    spec.validate()?;
    let bounds = spec.bounds();
    let pairs: Vec<(ParticipantRecord, RecordTruth)> = (0..spec.n_records)
        .into_par_iter()
        .map(|i| generate_one(spec, &bounds, i, seed::derive(seed, &[RECORD_TAG, i as u64])))
        .collect();
    let (records, truths): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((Cohort::new(records, format!("synthetic:seed={seed}")), GroundTruth { seed, spec: spec.clone(), records: truths }))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SidecarLine {
    Spec { seed: u64, spec: Box<SyntheticSpec> },
    Record(RecordTruth),
}

/// Sidecar JSONL: one `spec` line, then one `record` line per participant.
pub fn write_sidecar<W: Write>(truth: &GroundTruth, mut out: W) -> Result<()> {
    let head = SidecarLine::Spec { seed: truth.seed, spec: Box::new(truth.spec.clone()) };
    writeln!(out, "{}", serde_json::to_string(&head)?)?;
    for r in &truth.records {
        writeln!(out, "{}", serde_json::to_string(&SidecarLine::Record(r.clone()))?)?;
    }
    Ok(())
}

pub fn read_sidecar<R: BufRead>(input: R) -> Result<GroundTruth> {
    let mut head = None;
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })? {
            SidecarLine::Spec { seed, spec } => head = Some((seed, *spec)),
            SidecarLine::Record(r) => records.push(r),
        }
    }
    let (seed, spec) = head.ok_or_else(|| Error::Validation("sidecar has no spec line".into()))?;
    Ok(GroundTruth { seed, spec, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecall {
    pub artifact: Artifact,
    pub injected: usize,
    /// Excluded by the rule that targets this artifact.
    pub caught: usize,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecovery {
    pub item: usize,
    pub planted: [f64; 3],
    pub estimated: [f64; 3],
    pub gap: [f64; 3],
    /// Whether each 95% interval contains the planted value.
    pub covered: [bool; 3],
    pub fit: RegressionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n_records: usize,
    pub n_included: usize,
    pub recall: Vec<RuleRecall>,
    /// Injected records caught by their rule, over all injected records.
    pub overall_recall: Option<f64>,
    /// Excluded records that carry an injected artifact, over all exclusions.
    pub exclusion_precision: Option<f64>,
    pub clean_records: usize,
    pub clean_excluded: usize,
    pub false_exclusion_rate: Option<f64>,
    /// Per-item quadratic fits on included records. The planted intercept
    /// includes the baseline shift; a nonzero group shift or person offsets
    /// make the intercept a population average.
    pub items: Vec<ItemRecovery>,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

pub fn recovery_check(cohort: &Cohort, truth: &GroundTruth) -> Result<RecoveryReport> {
    let by_id: HashMap<&str, &RecordTruth> = truth.records.iter().map(|r| (r.participant_id.as_str(), r)).collect();
    let (kept, report) = screen(cohort, &ScreeningConfig::default());

    let kinds = [Artifact::CarelessFast, Artifact::CarelessErratic, Artifact::Outlier, Artifact::Missing];
    let mut injected = [0usize; 4];
    let mut caught = [0usize; 4];
    let (mut clean, mut clean_excluded, mut excluded, mut excluded_injected) = (0, 0, 0, 0);
    for d in &report.dispositions {
        let t = by_id
            .get(d.participant_id.as_str())
            .ok_or_else(|| Error::Validation(format!("{:?} not in sidecar", d.participant_id)))?;
        let is_excluded = d.verdict != Verdict::Included;
        excluded += usize::from(is_excluded);
        if t.artifact == Artifact::None {
            clean += 1;
            clean_excluded += usize::from(is_excluded);
            continue;
        }
        excluded_injected += usize::from(is_excluded);
        let k = kinds.iter().position(|a| *a == t.artifact).expect("known artifact");
        injected[k] += 1;
        let hit = match t.artifact {
            Artifact::CarelessFast | Artifact::CarelessErratic => {
                matches!(d.rule, Some(Rule::MinMeanRt) | Some(Rule::MaxRtVariance))
            }
            Artifact::Outlier => d.rule == Some(Rule::MaxRt),
            Artifact::Missing => d.rule == Some(Rule::Missing),
            Artifact::None => false,
        };
        caught[k] += usize::from(hit);
    }
    let recall = kinds
        .iter()
        .enumerate()
        .map(|(k, &artifact)| RuleRecall { artifact, injected: injected[k], caught: caught[k], recall: ratio(caught[k], injected[k]) })
        .collect();

    let spec = &truth.spec;
    let mut items = Vec::with_capacity(N_ITEMS);
    for i in 0..N_ITEMS {
        let (x, y): (Vec<f64>, Vec<f64>) = kept
            .records
            .iter()
            .map(|r| (r.item_scores[i].expect("screened") as f64, r.rt_ms[i].expect("screened") as f64 / 1000.0))
            .unzip();
        let fit = quadratic_ols(&x, &y)?;
        let planted = [spec.beta0[i] + spec.baseline_total_shift_s / N_ITEMS as f64, spec.beta1[i], spec.beta2[i]];
        items.push(ItemRecovery {
            item: i + 1,
            planted,
            estimated: fit.beta,
            gap: std::array::from_fn(|c| fit.beta[c] - planted[c]),
            covered: std::array::from_fn(|c| fit.ci95[c][0] <= planted[c] && planted[c] <= fit.ci95[c][1]),
            fit,
        });
    }
    Ok(RecoveryReport {
        n_records: cohort.len(),
        n_included: kept.len(),
        recall,
        overall_recall: ratio(caught.iter().sum(), injected.iter().sum()),
        exclusion_precision: ratio(excluded_injected, excluded),
        clean_records: clean,
        clean_excluded,
        false_exclusion_rate: ratio(clean_excluded, clean),
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_free() -> SyntheticSpec {
        SyntheticSpec {
            n_records: 400,
            noise_sd: [1e-9; N_ITEMS],
            person_sd: 0.0,
            baseline_total_shift_s: 0.0,
            group_total_shift_s: 0.0,
            artifacts: ArtifactRates::none(),
            ..Default::default()
        }
    }

    #[test]
    fn noise_free_item_curve() {
        let (cohort, _) = generate_cohort(&noise_free(), 1).unwrap();
        for r in &cohort.records {
            let s = r.item_scores[1].unwrap() as f64;
            let rt = r.rt_seconds().unwrap()[1];
            assert!((rt - (2.0 + 1.56 * s - 0.32 * s * s)).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_free_recovery_is_exact() {
        let (cohort, truth) = generate_cohort(&noise_free(), 2).unwrap();
        let rep = recovery_check(&cohort, &truth).unwrap();
        assert_eq!(rep.n_included, 400);
        for it in &rep.items {
            for g in it.gap {
                assert!(g.abs() < 1e-8, "item {} gap {g}", it.item);
            }
        }
    }

    #[test]
    fn careless_rate_within_binomial_bound() {
        let spec = SyntheticSpec {
            n_records: 1000,
            artifacts: ArtifactRates { careless: 0.1, erratic_share: 0.5, outlier: 0.0, missing: 0.0 },
            ..Default::default()
        };
        let (_, truth) = generate_cohort(&spec, 3).unwrap();
        let k = truth.records.iter().filter(|r| r.artifact.is_careless()).count() as f64;
        assert!((k - 100.0).abs() <= 3.0 * (1000.0 * 0.1 * 0.9_f64).sqrt(), "{k}");
    }

    #[test]
    fn deterministic_and_floored() {
        let spec = SyntheticSpec { n_records: 300, ..Default::default() };
        let (a, ta) = generate_cohort(&spec, 5).unwrap();
        let (b, tb) = generate_cohort(&spec, 5).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(ta, tb);
        for r in &a.records {
            assert!(r.rt_ms.iter().flatten().all(|&v| v >= 200));
        }
    }

    #[test]
    fn prevalence_bounds() {
        for p in [0.0, 1.0] {
            let spec = SyntheticSpec { insomnia_prevalence: p, ..Default::default() };
            assert!(matches!(generate_cohort(&spec, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let spec = SyntheticSpec { n_records: 20, ..Default::default() };
        let (_, truth) = generate_cohort(&spec, 6).unwrap();
        let mut buf = Vec::new();
        write_sidecar(&truth, &mut buf).unwrap();
        assert_eq!(read_sidecar(buf.as_slice()).unwrap(), truth);
    }

    #[test]
    fn calibrated_medians() {
        let spec = SyntheticSpec { n_records: 4000, artifacts: ArtifactRates::none(), ..Default::default() };
        let (cohort, truth) = generate_cohort(&spec, 7).unwrap();
        for g in 0..2u8 {
            let totals: Vec<f64> = cohort
                .records
                .iter()
                .zip(&truth.records)
                .filter(|(_, t)| t.group == g)
                .map(|(r, _)| r.rt_seconds().unwrap().iter().sum())
                .collect();
            let m = crate::stats::median(&totals);
            assert!((m - TARGET_TOTAL_MEDIAN[usize::from(g)]).abs() < 1.0, "group {g} median {m}");
        }
    }
}
