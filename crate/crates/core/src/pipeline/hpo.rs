//! Hyperparameter search: uniform random sampling or a tree-structured Parzen
//! estimator (TPE). Objectives are maximized.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{Algorithm, ModelConfig};
use crate::seed;
use crate::stats::dist::normal_sf;

const TRIAL_TAG: u64 = 0x7_21A1;
const GAMMA: f64 = 0.25;
const N_CANDIDATES: usize = 24;
const MIN_STARTUP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Float { low: f64, high: f64, #[serde(default)] log: bool },
    Int { low: i64, high: i64, #[serde(default)] log: bool },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Category(String),
}

impl ParamValue {
    fn to_json(&self) -> serde_json::Value {
        match self {
            ParamValue::Int(v) => (*v).into(),
            ParamValue::Float(v) => (*v).into(),
            ParamValue::Category(s) => s.clone().into(),
        }
    }
}

pub type Assignment = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    #[default]
    Tpe,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Assignment,
    pub seed: u64,
    pub value: Option<f64>,
    /// Objective failure message; failed trials never become best.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub method: SearchMethod,
    pub trials: Vec<Trial>,
    pub best: Option<usize>,
}

impl TrialLog {
    pub fn best_trial(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best_trial().and_then(|t| t.value)
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("search space is empty".into()));
        }
        for p in &self.params {
            let ok = match &p.domain {
                Domain::Float { low, high, log } => low < high && low.is_finite() && high.is_finite() && (!log || *low > 0.0),
                Domain::Int { low, high, log } => low <= high && (!log || *low > 0),
                Domain::Categorical { choices } => !choices.is_empty(),
            };
            if !ok {
                return Err(Error::Config(format!("invalid domain for parameter {}", p.name)));
            }
        }
        Ok(())
    }
}

/// Continuous internal coordinate of a numeric domain: the value or its log.
fn bounds(domain: &Domain) -> Option<(f64, f64, bool)> {
    match domain {
        Domain::Float { low, high, log } => Some(if *log { (low.ln(), high.ln(), true) } else { (*low, *high, false) }),
        Domain::Int { low, high, log } => {
            let (lo, hi) = (*low as f64 - 0.5, *high as f64 + 0.5);
            Some(if *log { (lo.max(0.5).ln(), hi.ln(), true) } else { (lo, hi, false) })
        }
        Domain::Categorical { .. } => None,
    }
}

fn to_internal(domain: &Domain, v: &ParamValue) -> f64 {
    let log = bounds(domain).is_some_and(|b| b.2);
    let raw = match v {
        ParamValue::Int(i) => *i as f64,
        ParamValue::Float(f) => *f,
        ParamValue::Category(_) => 0.0,
    };
    if log { raw.ln() } else { raw }
}

fn from_internal(domain: &Domain, u: f64) -> ParamValue {
    match domain {
        Domain::Float { low, high, log } => ParamValue::Float((if *log { u.exp() } else { u }).clamp(*low, *high)),
        Domain::Int { low, high, log } => {
            let v = if *log { u.exp() } else { u };
            ParamValue::Int((v.round() as i64).clamp(*low, *high))
        }
        Domain::Categorical { choices } => ParamValue::Category(choices[u as usize].clone()),
    }
}

fn sample_prior(domain: &Domain, rng: &mut ChaCha8Rng) -> ParamValue {
    match domain {
        Domain::Categorical { choices } => ParamValue::Category(choices[rng.random_range(0..choices.len())].clone()),
        _ => {
            let (lo, hi, _) = bounds(domain).expect("numeric");
            from_internal(domain, lo + rng.random::<f64>() * (hi - lo))
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    1.0 - normal_sf(z)
}

/// Truncated-Gaussian mixture over one numeric coordinate, with a wide prior
/// component centred on the interval.
struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Parzen {
    fn new(obs: &[f64], lo: f64, hi: f64) -> Self {
        let range = hi - lo;
        let mut mus: Vec<f64> = obs.to_vec();
        mus.push(0.5 * (lo + hi));
        let n = obs.len();
        let mut sorted: Vec<f64> = obs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let min_sigma = range / (100.0_f64).min(1.0 + n as f64);
        let mut sigmas: Vec<f64> = obs
            .iter()
            .map(|&m| {
                let k = sorted.partition_point(|v| *v < m);
                let left = if k == 0 { m - lo } else { m - sorted[k - 1] };
                let right = sorted.iter().copied().find(|v| *v > m).map_or(hi - m, |v| v - m);
                left.max(right).clamp(min_sigma, range)
            })
            .collect();
        sigmas.push(range);
        Parzen { mus, sigmas, lo, hi }
    }

    fn log_density(&self, u: f64) -> f64 {
        let w = 1.0 / self.mus.len() as f64;
        let p: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .map(|(&m, &s)| {
                let z = (u - m) / s;
                let mass = std_normal_cdf((self.hi - m) / s) - std_normal_cdf((self.lo - m) / s);
                w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt() * mass.max(1e-300))
            })
            .sum();
        p.max(1e-300).ln()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let c = rng.random_range(0..self.mus.len());
        let normal = rand_distr::Normal::new(self.mus[c], self.sigmas[c]).expect("positive sigma");
        for _ in 0..100 {
            let u = rand_distr::Distribution::sample(&normal, rng);
            if (self.lo..=self.hi).contains(&u) {
                return u;
            }
        }
        self.mus[c].clamp(self.lo, self.hi)
    }
}

fn categorical_weights(obs: &[usize], k: usize) -> Vec<f64> {
    let mut w = vec![1.0; k];
    obs.iter().for_each(|&c| w[c] += 1.0);
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn tpe_propose(space: &SearchSpace, history: &[(&Assignment, f64)], rng: &mut ChaCha8Rng) -> Assignment {
    let mut ranked: Vec<&(&Assignment, f64)> = history.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let n_good = ((GAMMA * ranked.len() as f64).ceil() as usize).max(1);
    let (good, bad) = ranked.split_at(n_good);

    let mut candidates: Vec<(Assignment, f64)> = (0..N_CANDIDATES).map(|_| (Assignment::new(), 0.0)).collect();
    for p in &space.params {
        match &p.domain {
            Domain::Categorical { choices } => {
                let idx = |set: &[&(&Assignment, f64)]| -> Vec<usize> {
                    set.iter()
                        .filter_map(|(a, _)| match a.get(&p.name) {
                            Some(ParamValue::Category(s)) => choices.iter().position(|c| c == s),
                            _ => None,
                        })
                        .collect()
                };
                let l = categorical_weights(&idx(good), choices.len());
                let g = categorical_weights(&idx(bad), choices.len());
                for (cand, score) in candidates.iter_mut() {
                    let mut r = rng.random::<f64>();
                    let mut c = 0;
                    while c + 1 < l.len() && r >= l[c] {
                        r -= l[c];
                        c += 1;
                    }
                    *score += l[c].ln() - g[c].ln();
                    cand.insert(p.name.clone(), ParamValue::Category(choices[c].clone()));
                }
            }
            domain => {
                let (lo, hi, _) = bounds(domain).expect("numeric");
                let coords = |set: &[&(&Assignment, f64)]| -> Vec<f64> {
                    set.iter().filter_map(|(a, _)| a.get(&p.name).map(|v| to_internal(domain, v))).collect()
                };
                let l = Parzen::new(&coords(good), lo, hi);
                let g = Parzen::new(&coords(bad), lo, hi);
                for (cand, score) in candidates.iter_mut() {
                    let u = l.sample(rng);
                    *score += l.log_density(u) - g.log_density(u);
                    cand.insert(p.name.clone(), from_internal(domain, u));
                }
            }
        }
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.1 > candidates[best].1 {
            best = i;
        }
    }
    candidates.swap_remove(best).0
}

/// Run `trials` evaluations of `objective(params, trial_seed)`, maximizing.
/// Errors from the objective are logged as failed trials.
pub fn hpo_search<F>(
    space: &SearchSpace,
    mut objective: F,
    trials: usize,
    seed: u64,
    method: SearchMethod,
) -> Result<TrialLog>
where
    F: FnMut(&Assignment, u64) -> Result<f64>,
{
    space.validate()?;
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let startup = MIN_STARTUP.max(trials / 5);
    let mut log = TrialLog { method, trials: Vec::with_capacity(trials), best: None };
    for index in 0..trials {
        let trial_seed = seed::derive(seed, &[TRIAL_TAG, index as u64]);
        let mut rng = seed::rng(trial_seed);
        let history: Vec<(&Assignment, f64)> =
            log.trials.iter().filter_map(|t| t.value.map(|v| (&t.params, v))).collect();
        let params = if method == SearchMethod::Tpe && index >= startup && !history.is_empty() {
            tpe_propose(space, &history, &mut rng)
        } else {
            space.params.iter().map(|p| (p.name.clone(), sample_prior(&p.domain, &mut rng))).collect()
        };
        let (value, error) = match objective(&params, trial_seed) {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite objective {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(v) = value {
            if log.best_value().is_none_or(|b| v > b) {
                log.best = Some(index);
            }
        }
        log.trials.push(Trial { index, params, seed: trial_seed, value, error });
    }
    Ok(log)
}

/// Overlay sampled parameters onto a base configuration by key.
pub fn apply_assignment(base: &ModelConfig, params: &Assignment) -> Result<ModelConfig> {
    let mut v = serde_json::to_value(base)?;
    let obj = v.as_object_mut().expect("config serializes to an object");
    for (k, p) in params {
        if !obj.contains_key(k) {
            return Err(Error::Config(format!("{} has no parameter {k:?}", base.algorithm())));
        }
        obj.insert(k.clone(), p.to_json());
    }
    let cfg: ModelConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Search ranges around the hyperparameters each algorithm exposes.
pub fn default_space(algorithm: Algorithm) -> SearchSpace {
    let float = |name: &str, low, high, log| ParamDef { name: name.into(), domain: Domain::Float { low, high, log } };
    let int = |name: &str, low, high| ParamDef { name: name.into(), domain: Domain::Int { low, high, log: false } };
    let cat = |name: &str, choices: &[&str]| ParamDef {
        name: name.into(),
        domain: Domain::Categorical { choices: choices.iter().map(|s| s.to_string()).collect() },
    };
    let params = match algorithm {
        Algorithm::Logreg => vec![float("C", 1e-3, 1e2, true)],
        Algorithm::Dtree => vec![int("max_depth", 1, 12), int("min_samples_split", 2, 20), int("min_samples_leaf", 1, 10)],
        Algorithm::SvmRbf => vec![float("C", 1e-2, 1e2, true), float("gamma", 1e-3, 1.0, true)],
        Algorithm::Knn => vec![int("n_neighbors", 1, 30), cat("weights", &["uniform", "distance"])],
        Algorithm::Mlp => vec![
            int("hidden_layer_sizes", 10, 200),
            cat("activation", &["identity", "logistic", "tanh", "relu"]),
            float("alpha", 1e-5, 1e-1, true),
            float("learning_rate_init", 1e-4, 1e-2, true),
        ],
    };
    SearchSpace { params }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_space() -> SearchSpace {
        SearchSpace { params: vec![ParamDef { name: "c".into(), domain: Domain::Float { low: 0.0, high: 10.0, log: false } }] }
    }

    fn quad(a: &Assignment, _: u64) -> Result<f64> {
        match a["c"] {
            ParamValue::Float(c) => Ok(-(c - 1.0).powi(2)),
            _ => unreachable!(),
        }
    }

    fn best_c(log: &TrialLog) -> f64 {
        match log.best_trial().unwrap().params["c"] {
            ParamValue::Float(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn tpe_finds_the_optimum() {
        let log = hpo_search(&quad_space(), quad, 50, 3, SearchMethod::Tpe).unwrap();
        assert!((best_c(&log) - 1.0).abs() <= 0.1, "c = {}", best_c(&log));
        let max = log.trials.iter().filter_map(|t| t.value).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(log.best_value(), Some(max));
    }

    #[test]
    fn single_trial_is_best() {
        let log = hpo_search(&quad_space(), quad, 1, 0, SearchMethod::Random).unwrap();
        assert_eq!(log.best, Some(0));
    }

    #[test]
    fn failures_are_recorded() {
        let log = hpo_search(
            &quad_space(),
            |a, s| if s % 2 == 0 { Err(Error::Domain("boom".into())) } else { quad(a, s) },
            20,
            1,
            SearchMethod::Tpe,
        )
        .unwrap();
        assert!(log.trials.iter().any(|t| t.error.is_some()));
        assert!(log.best_trial().unwrap().value.is_some());
    }

    #[test]
    fn deterministic() {
        let a = hpo_search(&quad_space(), quad, 30, 9, SearchMethod::Tpe).unwrap();
        let b = hpo_search(&quad_space(), quad, 30, 9, SearchMethod::Tpe).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixed_spaces_and_assignment() {
        for alg in Algorithm::ALL {
            let space = default_space(alg);
            let base = ModelConfig::default_for(alg);
            let log = hpo_search(&space, |a, _| apply_assignment(&base, a).map(|_| 0.0), 15, 2, SearchMethod::Tpe).unwrap();
            assert!(log.trials.iter().all(|t| t.error.is_none()), "{alg}: {:?}", log.trials[0].error);
        }
        let base = ModelConfig::default_for(Algorithm::Logreg);
        let bad: Assignment = [("gamma".to_string(), ParamValue::Float(1.0))].into();
        assert!(apply_assignment(&base, &bad).is_err());
    }
}
