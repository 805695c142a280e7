use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rtlab_core::dimred::{pca_fit, pca_transform, tsne_embed, TsneConfig};
use rtlab_core::explain::{explain_model, global_importance, linear_shap, Attribution, DEFAULT_BACKGROUND_ROWS};
use rtlab_core::features::feature_associations;
use rtlab_core::learners::{fit, Algorithm, InputMode, ModelConfig, TrainedModel};
use rtlab_core::model::{export_dataset, parse_dataset, Cohort, Format, N_ITEMS};
use rtlab_core::pipeline::experiment::{design_matrix, embedding_seed};
use rtlab_core::pipeline::hpo::{apply_assignment, default_space};
use rtlab_core::pipeline::{
    cross_validate, evaluate as cv_evaluate, hpo_search, sequential_backward_selection, Dataset, FeatureOptions,
    MetricsReport, ResamplePlan, SbsOptions,
};
use rtlab_core::report::{build_report, Cell, ModelSummary, ReportOptions};
use rtlab_core::screening::{label, screen as screen_cohort, total_score, ScreeningConfig, ScreeningReport};
use rtlab_core::seed;
use rtlab_core::stats::{anova_oneway, mann_whitney_u, pearson, quadratic_ols, t_test_two_sample, TVariant, UMode};
use rtlab_core::synthgen::{generate_cohort, recovery_check, write_sidecar, SyntheticSpec};

use crate::artifacts::Run;
use crate::{
    AnalyzeArgs, CliError, DataArgs, EmbedArgs, EmbedMethod, EvaluateArgs, ExplainArgs, FeaturesArgs, Globals, GroupBy,
    IngestArgs, ModelArgs, ReportArgs, ScreenArgs, ScreenCmd, SelectArgs, SimulateArgs, TestKind, TrainArgs, TuneArgs,
};

const TUNE_TAG: u64 = 0x7E_57;
const SHUFFLE_TAG: u64 = 0x5_4FF1E;

type Res<T = ()> = Result<T, CliError>;

fn snapshot<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).unwrap_or(Value::Null)
}

fn format_for(name: &str, explicit: Option<&str>) -> Res<Format> {
    match explicit {
        Some(f) => Ok(f.parse()?),
        None if name.ends_with(".csv") => Ok(Format::Csv),
        None => Ok(Format::Jsonl),
    }
}

fn load_cohort(run: &mut Run, data: &DataArgs) -> Res<Cohort> {
    let format = format_for(&data.input, data.format.as_deref())?;
    let bytes = run.read_input(&data.input)?;
    Ok(parse_dataset(bytes.as_slice(), format, data.input.clone())?)
}

fn screening_config(a: &ScreenArgs) -> Res<ScreeningConfig> {
    let cfg = ScreeningConfig {
        max_rt_s: a.max_rt,
        min_mean_rt_s: a.min_mean_rt,
        max_rt_variance_s2: a.max_variance,
        label_threshold: a.threshold,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Load and screen. Screening is idempotent, so an already screened file passes through.
fn load_screened(run: &mut Run, data: &DataArgs, s: &ScreenArgs) -> Res<(Cohort, ScreeningReport)> {
    let cfg = screening_config(s)?;
    let cohort = load_cohort(run, data)?;
    Ok(screen_cohort(&cohort, &cfg))
}

fn load_dataset(run: &mut Run, data: &DataArgs, s: &ScreenArgs) -> Res<Dataset> {
    let (kept, _) = load_screened(run, data, s)?;
    Ok(Dataset::from_cohort(&kept, s.threshold)?)
}

/// Strip the embedded manifest and decode the rest of an artifact.
fn decode_artifact<T: for<'de> Deserialize<'de>>(bytes: &[u8], name: &str) -> Res<T> {
    let mut v: Value =
        serde_json::from_slice(bytes).map_err(|e| CliError::validation(format!("{name}: {e}")))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("manifest");
    }
    serde_json::from_value(v).map_err(|e| CliError::validation(format!("{name}: {e}")))
}

fn model_config(run: &mut Run, m: &ModelArgs, seed: u64) -> Res<ModelConfig> {
    let cfg = match &m.config {
        None => ModelConfig::tuned(m.model, m.mode),
        Some(name) => {
            let bytes = run.read_input(name)?;
            let cfg: ModelConfig = decode_artifact(&bytes, name).map_err(|e| CliError::config(e.message))?;
            if cfg.algorithm() != m.model {
                return Err(CliError::config(format!("{name} configures {}, not {}", cfg.algorithm(), m.model)));
            }
            cfg
        }
    };
    let cfg = cfg.with_seed(seed);
    cfg.validate()?;
    Ok(cfg)
}

fn tag(alg: Algorithm, mode: InputMode) -> String {
    format!("{alg}_{mode}", alg = alg.as_str(), mode = mode.as_str())
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Res<Vec<u8>> {
    let err = |e: csv::Error| CliError::validation(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::validation(e.to_string()))
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn ingest(g: &Globals, a: &IngestArgs) -> Res {
    let mut run = Run::new(&g.dir, "ingest", snapshot(a), g.seed)?;
    let label = a.input.display().to_string();
    let format = format_for(&label, a.format.as_deref())?;
    let bytes = run.read_path(&a.input, &label)?;
    let cohort = parse_dataset(bytes.as_slice(), format, label)?;
    run.declare("cohort.jsonl");
    run.declare("ingest.json");
    run.write_with("cohort.jsonl", |buf| export_dataset(&cohort, Format::Jsonl, buf))?;
    run.write_json("ingest.json", &json!({ "records": cohort.len(), "warnings": cohort.ingest_warnings }))
}

pub(crate) fn screen(g: &Globals, a: &ScreenCmd) -> Res {
    let mut run = Run::new(&g.dir, "screen", snapshot(a), g.seed)?;
    let (kept, report) = load_screened(&mut run, &a.data, &a.screening)?;
    run.declare("screened.jsonl");
    run.declare("screening_report.json");
    run.write_with("screened.jsonl", |buf| export_dataset(&kept, Format::Jsonl, buf))?;
    run.write_json("screening_report.json", &report)
}

fn value_of(rt: &[f64; N_ITEMS], score_total: i64, value: &str) -> Res<f64> {
    match value {
        "total_rt" => Ok(rt.iter().sum()),
        "total_score" => Ok(score_total as f64),
        v => match v.strip_prefix("rt").and_then(|i| i.parse::<usize>().ok()) {
            Some(i) if (1..=N_ITEMS).contains(&i) => Ok(rt[i - 1]),
            _ => Err(CliError::config(format!("unknown value {value:?} (total_rt, total_score, rt1..rt{N_ITEMS})"))),
        },
    }
}

pub(crate) fn analyze(g: &Globals, a: &AnalyzeArgs) -> Res {
    let mut run = Run::new(&g.dir, "analyze", snapshot(a), g.seed)?;
    let test = serde_json::to_value(a.test).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let out = format!("analysis_{test}.json");
    run.declare(&out);
    let (kept, _) = load_screened(&mut run, &a.data, &a.screening)?;

    let mut rows = Vec::with_capacity(kept.len());
    for r in &kept.records {
        let rt = r.rt_seconds().expect("screened");
        let scores = r.scores().expect("screened");
        let total = total_score(r)?;
        rows.push((rt, scores, total, label(r, a.screening.threshold)?));
    }

    let body = match a.test {
        TestKind::Ols => {
            let items = (0..N_ITEMS)
                .map(|i| {
                    let x: Vec<f64> = rows.iter().map(|r| r.1[i] as f64).collect();
                    let y: Vec<f64> = rows.iter().map(|r| r.0[i]).collect();
                    Ok(json!({ "item": i + 1, "fit": quadratic_ols(&x, &y)? }))
                })
                .collect::<Res<Vec<_>>>()?;
            json!({ "test": "ols", "model": "rt = b0 + b1*score + b2*score^2", "items": items })
        }
        TestKind::Pearson => {
            let x: Vec<f64> = rows.iter().map(|r| value_of(&r.0, r.2, &a.value)).collect::<Res<_>>()?;
            let y: Vec<f64> = rows.iter().map(|r| r.2 as f64).collect();
            json!({ "test": "pearson", "value": a.value, "against": "total_score", "result": pearson(&x, &y)? })
        }
        TestKind::Mwu | TestKind::Ttest | TestKind::Anova => {
            let mut groups: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
            for r in &rows {
                let key = match a.group_by {
                    GroupBy::Label => i64::from(r.3),
                    GroupBy::ItemScore => {
                        let item = a
                            .value
                            .strip_prefix("rt")
                            .and_then(|i| i.parse::<usize>().ok())
                            .filter(|i| (1..=N_ITEMS).contains(i))
                            .ok_or_else(|| CliError::config("--group-by item-score needs --value rt1..rt7"))?;
                        r.1[item - 1]
                    }
                };
                groups.entry(key).or_default().push(value_of(&r.0, r.2, &a.value)?);
            }
            let keys: Vec<i64> = groups.keys().copied().collect();
            let samples: Vec<Vec<f64>> = groups.into_values().collect();
            let two = || -> Res<(&[f64], &[f64])> {
                match samples.as_slice() {
                    [x, y] => Ok((x, y)),
                    _ => Err(CliError::validation(format!("{} groups present; this test needs exactly 2", samples.len()))),
                }
            };
            let result = match a.test {
                TestKind::Mwu => {
                    let (x, y) = two()?;
                    json!(mann_whitney_u(x, y, UMode::Auto)?)
                }
                TestKind::Ttest => {
                    let (x, y) = two()?;
                    json!({
                        "pooled": t_test_two_sample(x, y, TVariant::Pooled)?,
                        "welch": t_test_two_sample(x, y, TVariant::Welch)?,
                    })
                }
                _ => json!(anova_oneway(&samples)?),
            };
            json!({ "test": test, "value": a.value, "group_by": a.group_by, "groups": keys, "result": result })
        }
    };
    run.write_json(&out, &body)
}

fn feature_options(no_embeddings: bool, no_prune: bool) -> FeatureOptions {
    let mut opts = FeatureOptions::default();
    if no_embeddings {
        opts.spec = opts.spec.without_embeddings();
    }
    if no_prune {
        opts.prune = None;
    }
    opts
}

pub(crate) fn features(g: &Globals, a: &FeaturesArgs) -> Res {
    let mut run = Run::new(&g.dir, "features", snapshot(a), g.seed)?;
    run.declare("features.csv");
    run.declare("features.json");
    let ds = load_dataset(&mut run, &a.data, &a.screening)?;
    let opts = feature_options(a.no_embeddings, a.no_prune);
    let all: Vec<usize> = (0..ds.len()).collect();
    let fm = design_matrix(&ds, InputMode::Feature, &all, &opts, embedding_seed(g.seed))?;
    run.write_with("features.csv", |buf| fm.write_csv(Some(&ds.labels), buf))?;
    let assoc = feature_associations(&fm, &ds.labels)?;
    run.write_json(
        "features.json",
        &json!({ "options": opts, "candidates": opts.spec.names(), "kept": fm.names, "associations": assoc }),
    )
}

pub(crate) fn embed(g: &Globals, a: &EmbedArgs) -> Res {
    let mut run = Run::new(&g.dir, "embed", snapshot(a), g.seed)?;
    let method = match a.method {
        EmbedMethod::Pca => "pca",
        EmbedMethod::Tsne => "tsne",
    };
    let (csv_name, json_name) = (format!("embedding_{method}.csv"), format!("embedding_{method}.json"));
    run.declare(&csv_name);
    run.declare(&json_name);
    let ds = load_dataset(&mut run, &a.data, &a.screening)?;
    let (coords, summary): (Array2<f64>, Value) = match a.method {
        EmbedMethod::Pca => {
            let fit = pca_fit(ds.rt.view(), a.components)?;
            (pca_transform(&fit, ds.rt.view())?, json!(fit))
        }
        EmbedMethod::Tsne => {
            let cfg = TsneConfig {
                out_dims: a.components,
                perplexity: a.perplexity,
                iterations: a.iterations,
                seed: embedding_seed(g.seed),
                ..TsneConfig::default()
            };
            let res = tsne_embed(ds.rt.view(), &cfg)?;
            let summary = json!({
                "config": cfg,
                "kl_divergence": res.kl_divergence,
                "kl_trace": res.kl_trace,
                "perplexity_used": res.perplexity_used,
            });
            (res.embedding, summary)
        }
    };
    let mut header = vec!["participant_id".to_string(), "label".to_string()];
    header.extend((1..=coords.ncols()).map(|k| format!("{method}_{k}")));
    let rows = coords.rows().into_iter().enumerate().map(|(i, r)| {
        let mut row = vec![ds.ids[i].clone(), ds.labels[i].to_string()];
        row.extend(r.iter().map(|v| num(*v)));
        row
    });
    run.write_bytes(&csv_name, &csv_bytes(&header, rows)?)?;
    run.write_json(&json_name, &summary)
}

/// Trained model plus what is needed to rebuild its design matrix.
#[derive(Serialize, Deserialize)]
struct ModelArtifact {
    mode: InputMode,
    label_threshold: i64,
    feature_options: FeatureOptions,
    design_seed: u64,
    feature_names: Vec<String>,
    model: TrainedModel,
}

pub(crate) fn train(g: &Globals, a: &TrainArgs) -> Res {
    let mut run = Run::new(&g.dir, "train", snapshot(a), g.seed)?;
    let out = format!("model_{}.json", tag(a.model.model, a.model.mode));
    run.declare(&out);
    let cfg = model_config(&mut run, &a.model, g.seed)?;
    let ds = load_dataset(&mut run, &a.data, &a.screening)?;
    let opts = FeatureOptions::default();
    let design_seed = embedding_seed(g.seed);
    let all: Vec<usize> = (0..ds.len()).collect();
    let fm = design_matrix(&ds, a.model.mode, &all, &opts, design_seed)?;
    let model = fit(&cfg, fm.values.view(), &ds.labels)?;
    let artifact = ModelArtifact {
        mode: a.model.mode,
        label_threshold: a.screening.threshold,
        feature_options: opts,
        design_seed,
        feature_names: fm.names,
        model,
    };
    run.write_json(&out, &artifact)
}

pub(crate) fn evaluate(g: &Globals, a: &EvaluateArgs) -> Res {
    let mut run = Run::new(&g.dir, "evaluate", snapshot(a), g.seed)?;
    let suffix = if a.shuffle_labels { "_shuffled" } else { "" };
    let name = tag(a.model.model, a.model.mode);
    let (json_name, roc_name) = (format!("metrics_{name}{suffix}.json"), format!("roc_{name}{suffix}.csv"));
    run.declare(&json_name);
    run.declare(&roc_name);
    let cfg = model_config(&mut run, &a.model, g.seed)?;
    let mut ds = load_dataset(&mut run, &a.data, &a.screening)?;
    if a.shuffle_labels {
        ds = ds.with_shuffled_labels(seed::derive(g.seed, &[SHUFFLE_TAG]));
    }
    let report = cv_evaluate(&ds, &cfg, a.model.mode, &FeatureOptions::default(), &ResamplePlan::new(a.repeats, g.seed), a.folds)?;
    let header = ["fpr".to_string(), "tpr".to_string()];
    run.write_bytes(&roc_name, &csv_bytes(&header, report.roc.iter().map(|p| vec![num(p[0]), num(p[1])]))?)?;
    run.write_json(&json_name, &report)
}

pub(crate) fn select(g: &Globals, a: &SelectArgs) -> Res {
    let mut run = Run::new(&g.dir, "select", snapshot(a), g.seed)?;
    let out = format!("selection_{}.json", tag(a.model.model, a.model.mode));
    run.declare(&out);
    let cfg = model_config(&mut run, &a.model, g.seed)?;
    let ds = load_dataset(&mut run, &a.data, &a.screening)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let fm = design_matrix(&ds, a.model.mode, &all, &FeatureOptions::default(), embedding_seed(g.seed))?;
    let opts = SbsOptions { cap: a.cap, folds: a.folds, metric: a.metric, seed: g.seed };
    let trace = sequential_backward_selection(fm.values.view(), &ds.labels, &fm.names, &cfg, &opts)?;
    run.write_json(&out, &trace)
}

pub(crate) fn tune(g: &Globals, a: &TuneArgs) -> Res {
    let mut run = Run::new(&g.dir, "tune", snapshot(a), g.seed)?;
    let name = tag(a.model.model, a.model.mode);
    let (log_name, cfg_name) = (format!("tuning_{name}.json"), format!("config_{name}.json"));
    run.declare(&log_name);
    run.declare(&cfg_name);
    let base = model_config(&mut run, &a.model, g.seed)?;
    let ds = load_dataset(&mut run, &a.data, &a.screening)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let fm = design_matrix(&ds, a.model.mode, &all, &FeatureOptions::default(), embedding_seed(g.seed))?;
    let space = default_space(a.model.model);
    let objective = |params: &_, trial_seed| {
        let cfg = apply_assignment(&base, params)?;
        let report = cross_validate(&cfg, fm.values.view(), &ds.labels, &ResamplePlan::new(1, trial_seed), a.folds)?;
        Ok(report.auroc.mean)
    };
    let log = hpo_search(&space, objective, a.trials, seed::derive(g.seed, &[TUNE_TAG]), a.method)?;
    let best = log
        .best_trial()
        .ok_or_else(|| CliError::validation("every trial failed; see the trial log".to_string()));
    run.write_json(&log_name, &json!({ "objective": "mean AUROC", "space": space, "log": log }))?;
    let best = apply_assignment(&base, &best?.params)?;
    run.write_json(&cfg_name, &best)
}

pub(crate) fn explain(g: &Globals, a: &ExplainArgs) -> Res {
    let mut run = Run::new(&g.dir, "explain", snapshot(a), g.seed)?;
    let bytes = run.read_input(&a.model_file)?;
    let art: ModelArtifact = decode_artifact(&bytes, &a.model_file)?;
    let name = tag(art.model.algorithm(), art.mode);
    let (csv_name, json_name) = (format!("shap_{name}.csv"), format!("importance_{name}.json"));
    run.declare(&csv_name);
    run.declare(&json_name);
    let ds = load_dataset(&mut run, &a.data, &a.screening)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let fm = design_matrix(&ds, art.mode, &all, &art.feature_options, art.design_seed)?;
    if fm.names != art.feature_names {
        return Err(CliError::validation(format!(
            "{}: features rebuilt from {} differ from the ones the model was trained on",
            a.model_file, a.data.input
        )));
    }
    let take = a.rows.min(ds.len());
    let x = fm.values.slice(ndarray::s![..take, ..]);
    let (explainer, attrs): (&str, Vec<Attribution>) = if art.model.algorithm() == Algorithm::Logreg {
        let means = fm.values.mean_axis(Axis(0)).expect("non-empty").to_vec();
        ("linear", linear_shap(&art.model, x, &means)?)
    } else {
        let bg = if a.background == 0 { DEFAULT_BACKGROUND_ROWS } else { a.background };
        ("kernel", explain_model(&art.model, x, fm.values.view(), bg, a.budget, g.seed)?)
    };
    let mut header = vec!["participant_id".to_string(), "base_value".to_string(), "margin".to_string()];
    header.extend(fm.names.iter().map(|n| format!("phi_{n}")));
    let rows = attrs.iter().enumerate().map(|(i, at)| {
        let mut row = vec![fm.ids[i].clone(), num(at.base_value), num(at.margin)];
        row.extend(at.phi.iter().map(|v| num(*v)));
        row
    });
    run.write_bytes(&csv_name, &csv_bytes(&header, rows)?)?;
    let worst = attrs.iter().map(|at| at.local_sum_check).fold(0.0, f64::max);
    let importance = global_importance(&attrs, &fm.names)?;
    run.write_json(
        &json_name,
        &json!({ "explainer": explainer, "rows": take, "max_local_sum_error": worst, "importance": importance }),
    )
}

pub(crate) fn simulate(g: &Globals, a: &SimulateArgs) -> Res {
    let mut run = Run::new(&g.dir, "simulate", snapshot(a), g.seed)?;
    for out in ["cohort.jsonl", "truth.jsonl", "simulate.json"] {
        run.declare(out);
    }
    let mut spec = SyntheticSpec { n_records: a.n, insomnia_prevalence: a.prevalence, ..SyntheticSpec::default() };
    if a.clean {
        spec = spec.clean();
    }
    spec.validate()?;
    let (cohort, truth) = generate_cohort(&spec, g.seed)?;
    run.write_with("cohort.jsonl", |buf| export_dataset(&cohort, Format::Jsonl, buf))?;
    run.write_with("truth.jsonl", |buf| write_sidecar(&truth, buf))?;
    let recovery = if a.check { Some(recovery_check(&cohort, &truth)?) } else { None };
    let groups = [0u8, 1].map(|gr| truth.records.iter().filter(|r| r.group == gr).count());
    run.write_json("simulate.json", &json!({ "spec": spec, "group_counts": groups, "recovery": recovery }))
}

pub(crate) fn report(g: &Globals, a: &ReportArgs) -> Res {
    let mut run = Run::new(&g.dir, "report", snapshot(a), g.seed)?;
    let mut models = Vec::new();
    for m in &a.metrics {
        let bytes = run.read_input(m)?;
        let rep: MetricsReport = decode_artifact(&bytes, m)?;
        let stem = Path::new(m).file_stem().and_then(|s| s.to_str()).unwrap_or(m);
        models.push((stem.strip_prefix("metrics_").unwrap_or(stem).to_string(), rep));
    }
    let (kept, _) = load_screened(&mut run, &a.data, &a.screening)?;
    let summaries: Vec<ModelSummary<'_>> = models.iter().map(|(n, r)| ModelSummary { name: n, report: r }).collect();
    let opts = ReportOptions { histogram_bins: a.bins, label_threshold: a.screening.threshold };
    let bundle = build_report(&kept, &summaries, &opts)?;
    run.declare("report.json");
    for s in &bundle.sections {
        run.declare(&format!("report/{}.csv", s.name));
    }
    for s in &bundle.sections {
        let header = s.columns.clone();
        let rows = s.rows.iter().map(|r| {
            r.iter()
                .map(|c| match c {
                    Cell::Num(v) => num(*v),
                    Cell::Text(t) => t.clone(),
                })
                .collect()
        });
        run.write_bytes(&format!("report/{}.csv", s.name), &csv_bytes(&header, rows)?)?;
    }
    run.write_json("report.json", &bundle)
}
