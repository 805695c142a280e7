//! End-to-end use of the library on a small synthetic cohort.

use rtlab_core::explain::{explain_model, global_importance, linear_shap};
use rtlab_core::learners::{fit, Algorithm, InputMode, ModelConfig};
use rtlab_core::pipeline::experiment::{design_matrix, embedding_seed};
use rtlab_core::pipeline::{evaluate, Dataset, FeatureOptions, ResamplePlan};
use rtlab_core::screening::{screen, ScreeningConfig};
use rtlab_core::stats::{mann_whitney_u, UMode};
use rtlab_core::synthgen::{generate_cohort, ArtifactRates, SyntheticSpec};

#[test]
fn cohort_to_explanations() {
    let spec = SyntheticSpec { n_records: 600, insomnia_prevalence: 0.2, ..Default::default() };
    let (cohort, _) = generate_cohort(&spec, 21).unwrap();
    let (kept, report) = screen(&cohort, &ScreeningConfig::default());
    assert_eq!(report.counts.total(), 600);
    let ds = Dataset::from_cohort(&kept, 7).unwrap();

    let totals: Vec<f64> = ds.rt.rows().into_iter().map(|r| r.sum()).collect();
    let (g0, g1): (Vec<(f64, u8)>, Vec<(f64, u8)>) = totals.iter().copied().zip(ds.labels.iter().copied()).partition(|p| p.1 == 0);
    let u = mann_whitney_u(
        &g0.iter().map(|p| p.0).collect::<Vec<_>>(),
        &g1.iter().map(|p| p.0).collect::<Vec<_>>(),
        UMode::Auto,
    )
    .unwrap();
    assert!(u.p_two_sided < 1e-6 && u.median_b > u.median_a);

    let opts = FeatureOptions { tsne: rtlab_core::dimred::TsneConfig { iterations: 300, ..Default::default() }, ..Default::default() };
    let cfg = ModelConfig::tuned(Algorithm::Logreg, InputMode::Feature);
    let rep = evaluate(&ds, &cfg, InputMode::Feature, &opts, &ResamplePlan::new(3, 2), 5).unwrap();
    assert!(rep.auroc.mean > 0.6);

    let all: Vec<usize> = (0..ds.len()).collect();
    let fm = design_matrix(&ds, InputMode::Feature, &all, &opts, embedding_seed(2)).unwrap();
    let model = fit(&cfg, fm.values.view(), &ds.labels).unwrap();
    let means: Vec<f64> = fm.values.mean_axis(ndarray::Axis(0)).unwrap().to_vec();
    let attrs = linear_shap(&model, fm.values.view(), &means).unwrap();
    assert!(attrs.iter().all(|a| a.local_sum_check <= 1e-9));
    let ranking = global_importance(&attrs, &fm.names).unwrap();
    assert_eq!(ranking.len(), fm.names.len());

    let raw = design_matrix(&ds, InputMode::Raw, &all, &opts, 0).unwrap();
    let tree = fit(&ModelConfig::tuned(Algorithm::Dtree, InputMode::Raw), raw.values.view(), &ds.labels).unwrap();
    let rows = raw.values.slice(ndarray::s![..3, ..]);
    let k = explain_model(&tree, rows, raw.values.view(), 50, 2048, 4).unwrap();
    assert!(k.iter().all(|a| a.local_sum_check < 1e-6));
}

#[test]
fn null_groups_give_calibrated_u_tests() {
    // Identical score distributions and no group shift: p should be uniform.
    let mut spec = SyntheticSpec { n_records: 150, insomnia_prevalence: 0.4, artifacts: ArtifactRates::none(), ..Default::default() };
    spec.score_probs[1] = spec.score_probs[0].clone();
    spec.group_total_shift_s = 0.0;
    let mut hits = 0;
    for seed in 0..200 {
        let (cohort, truth) = generate_cohort(&spec, seed).unwrap();
        let mut groups = [Vec::new(), Vec::new()];
        for (r, t) in cohort.records.iter().zip(&truth.records) {
            groups[usize::from(t.group)].push(r.rt_seconds().unwrap().iter().sum::<f64>());
        }
        let u = mann_whitney_u(&groups[0], &groups[1], UMode::Auto).unwrap();
        hits += usize::from(u.p_two_sided < 0.05);
    }
    let rate = hits as f64 / 200.0;
    assert!((0.02..=0.10).contains(&rate), "rejection rate {rate}");
}
