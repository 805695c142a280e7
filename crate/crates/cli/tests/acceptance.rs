//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Oracles here are written independently of the library code they check
//! (brute-force enumeration, normal equations, power iteration, permutation
//! Shapley values).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use rtlab_core::dimred::{pca_fit, PcaFit};
use rtlab_core::explain::{kernel_shap, linear_shap};
use rtlab_core::features::{basic_stats, freq_bins};
use rtlab_core::learners::{fit, Algorithm, InputMode, ModelConfig};
use rtlab_core::model::{export_dataset, Format};
use rtlab_core::pipeline::hpo::{hpo_search, Assignment, Domain, ParamDef, ParamValue, SearchMethod, SearchSpace};
use rtlab_core::pipeline::{evaluate, roc_auroc, sequential_backward_selection, Dataset, FeatureOptions, ResamplePlan, SbsOptions};
use rtlab_core::screening::{screen, ScreeningConfig};
use rtlab_core::seed::rng;
use rtlab_core::stats::{mann_whitney_u, quadratic_ols, UMode};
use rtlab_core::synthgen::{generate_cohort, recovery_check, Artifact, SyntheticSpec};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---------------------------------------------------------------- Mann-Whitney

fn brute_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            u += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
        }
    }
    u
}

/// Two-sided p by enumerating every split of the pooled values.
fn brute_exact_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, na) = (pooled.len(), a.len());
    let mean = (na * b.len()) as f64 / 2.0;
    let observed = (brute_u(a, b) - mean).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let (ga, gb): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
            pooled.iter().copied().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
        let ga: Vec<f64> = ga.into_iter().map(|p| p.1).collect();
        let gb: Vec<f64> = gb.into_iter().map(|p| p.1).collect();
        total += 1;
        if (brute_u(&ga, &gb) - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

fn mwu_oracle() -> Outcome {
    let mut r = rng(101);
    let (mut du, mut dp) = (0.0f64, 0.0f64);
    for case in 0..500 {
        let na = r.random_range(1..=6);
        let nb = r.random_range(1..=(12 - na).min(6));
        let tied = case % 2 == 1;
        let mut draw = |_| if tied { f64::from(r.random_range(0..4)) } else { r.random::<f64>() * 100.0 };
        let a: Vec<f64> = (0..na).map(&mut draw).collect();
        let b: Vec<f64> = (0..nb).map(&mut draw).collect();
        let res = mann_whitney_u(&a, &b, UMode::Exact).map_err(|e| e.to_string())?;
        let u = brute_u(&a, &b);
        let p = brute_exact_p(&a, &b);
        du = du.max((res.u_a - u).abs());
        dp = dp.max((res.p_two_sided - p).abs());
        if (res.u_a - u).abs() > 1e-12 || (res.p_two_sided - p).abs() > 1e-9 {
            return Err(format!("case {case}: a={a:?} b={b:?} u {} vs {u}, p {} vs {p}", res.u_a, res.p_two_sided));
        }
    }
    Ok(format!("500 cases, max |du| = {du:e}, max |dp| = {dp:e}"))
}

// ---------------------------------------------------------------- OLS

fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r: usize, k: usize| {
        let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&j| j != k).collect();
        let minor = m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]];
        if (r + k) % 2 == 0 { minor } else { -minor }
    };
    let det: f64 = (0..3).map(|k| m[0][k] * c(0, k)).sum();
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = c(j, i) / det;
        }
    }
    inv
}

fn ols_oracle() -> Outcome {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = 50;
        let x: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..=4))).collect();
        let y: Vec<f64> = x.iter().map(|&s| 2.0 + 1.2 * s - 0.25 * s * s + r.random::<f64>() * 3.0 - 1.5).collect();

        let mut xtx = [[0.0; 3]; 3];
        let mut xty = [0.0; 3];
        for (&s, &v) in x.iter().zip(&y) {
            let row = [1.0, s, s * s];
            for i in 0..3 {
                xty[i] += row[i] * v;
                for j in 0..3 {
                    xtx[i][j] += row[i] * row[j];
                }
            }
        }
        let inv = inverse3(xtx);
        let beta: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i][j] * xty[j]).sum()).collect();
        let fitted: Vec<f64> = x.iter().map(|&s| beta[0] + beta[1] * s + beta[2] * s * s).collect();
        let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
        let ybar = y.iter().sum::<f64>() / n as f64;
        let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        let df = (n - 3) as f64;
        let sigma2 = rss / df;
        let se: Vec<f64> = (0..3).map(|i| (sigma2 * inv[i][i]).sqrt()).collect();
        let tcrit = StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(0.975);
        let r2 = 1.0 - rss / tss;
        let f = ((tss - rss) / 2.0) / sigma2;

        let fit = quadratic_ols(&x, &y).map_err(|e| e.to_string())?;
        let mut pairs = vec![(fit.r2, r2), (fit.f_model, f)];
        for i in 0..3 {
            pairs.push((fit.beta[i], beta[i]));
            pairs.push((fit.se[i], se[i]));
            pairs.push((fit.t[i], beta[i] / se[i]));
            pairs.push((fit.ci95[i][0], beta[i] - tcrit * se[i]));
            pairs.push((fit.ci95[i][1], beta[i] + tcrit * se[i]));
        }
        for (k, (got, want)) in pairs.into_iter().enumerate() {
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
            if !close(got, want, 1e-8) {
                return Err(format!("dataset {case}, quantity {k}: {got} vs oracle {want}"));
            }
        }
    }
    Ok(format!("100 datasets, max relative error {worst:e}"))
}

// ---------------------------------------------------------------- CI coverage

fn ci_coverage() -> Outcome {
    let spec = SyntheticSpec { n_records: 2000, ..SyntheticSpec::default() }.clean();
    let mut covered = [[0usize; 2]; 7];
    for seed in 0..100 {
        let (cohort, truth) = generate_cohort(&spec, 5000 + seed).map_err(|e| e.to_string())?;
        let rep = recovery_check(&cohort, &truth).map_err(|e| e.to_string())?;
        for it in &rep.items {
            covered[it.item - 1][0] += usize::from(it.covered[1]);
            covered[it.item - 1][1] += usize::from(it.covered[2]);
        }
    }
    let min = covered.iter().flatten().copied().min().unwrap();
    let detail = format!("beta1/beta2 coverage per item {covered:?}, min {min}/100");
    if min >= 88 { Ok(detail) } else { Err(detail) }
}

// ---------------------------------------------------------------- AUROC

fn auroc_concordance() -> Outcome {
    let mut r = rng(404);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 200 {
        let n = r.random_range(2..120);
        let coarse = r.random::<bool>();
        let scores: Vec<f64> =
            (0..n).map(|_| if coarse { f64::from(r.random_range(0..6)) / 5.0 } else { r.random::<f64>() }).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < 0.4)).collect();
        if !(labels.contains(&0) && labels.contains(&1)) {
            continue;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        let auc = roc_auroc(&scores, &labels).map_err(|e| e.to_string())?.auroc;
        worst = worst.max((auc - num / den).abs());
        if (auc - num / den).abs() > 1e-12 {
            return Err(format!("set {done}: {auc} vs concordance {}", num / den));
        }
        done += 1;
    }
    Ok(format!("200 sets, max |diff| = {worst:e}"))
}

// ---------------------------------------------------------------- feature identities

fn feature_identities() -> Outcome {
    let mut r = rng(505);
    let edges: Vec<u32> = (1..=10).collect();
    for case in 0..1000 {
        let rt: Vec<f64> = (0..7)
            .map(|_| match r.random_range(0..4) {
                0 => f64::from(r.random_range(0..14)),
                _ => r.random::<f64>() * 14.0 + 0.05,
            })
            .collect();
        let bins = freq_bins(&rt, &edges, false);
        if bins.freq[0] + bins.big_than[0] != 7.0 || bins.cum_freq[9] + bins.big_than[9] != 7.0 {
            return Err(format!("case {case}: bin identity broken for {rt:?}"));
        }
        let s = basic_stats(&rt);
        if (s.cv * s.mean - s.variance.sqrt()).abs() > 1e-12 {
            return Err(format!("case {case}: cv*mean {} vs sd {}", s.cv * s.mean, s.variance.sqrt()));
        }
        let mut shuffled = rt.clone();
        for i in (1..7).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        let t = basic_stats(&shuffled);
        for (u, v) in s.as_array().iter().zip(t.as_array()) {
            if !close(*u, v, 1e-12) {
                return Err(format!("case {case}: basic_stats not permutation invariant ({u} vs {v})"));
            }
        }
    }
    Ok("1000 sequences".into())
}

// ---------------------------------------------------------------- PCA

fn correlation_matrix(x: &Array2<f64>) -> Vec<Vec<f64>> {
    let (n, d) = x.dim();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let c: Vec<f64> = x.column(j).to_vec();
            let m = c.iter().sum::<f64>() / n as f64;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt();
            c.iter().map(|v| (v - m) / sd).collect()
        })
        .collect();
    (0..d).map(|a| (0..d).map(|b| cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum()).collect()).collect()
}

/// Eigenvalues by power iteration with Hotelling deflation.
fn power_eigenvalues(mut m: Vec<Vec<f64>>, k: usize) -> Vec<f64> {
    let d = m.len();
    let mut out = Vec::new();
    for c in 0..k {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i * 7 + c * 3) as f64 % 5.0).collect();
        let mut lambda = 0.0;
        for _ in 0..200_000 {
            let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| m[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
            let rq: f64 = (0..d).map(|i| next[i] * (0..d).map(|j| m[i][j] * next[j]).sum::<f64>()).sum();
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            let settled = (rq - lambda).abs() < 1e-15 && delta < 1e-13;
            lambda = rq;
            if settled {
                break;
            }
        }
        out.push(lambda);
        for i in 0..d {
            for j in 0..d {
                m[i][j] -= lambda * v[i] * v[j];
            }
        }
    }
    out
}

fn pca_identities() -> Outcome {
    let mut r = rng(606);
    let mut worst_eig = 0.0f64;
    for case in 0..10 {
        let n = r.random_range(40..200);
        // correlated columns with a spread-out spectrum
        let mix: Vec<Vec<f64>> = (0..7).map(|i| (0..7).map(|j| if j <= i { r.random::<f64>() * (i + 1) as f64 } else { 0.0 }).collect()).collect();
        let z: Vec<Vec<f64>> = (0..n).map(|_| (0..7).map(|j| (r.random::<f64>() - 0.5) * (j + 1) as f64).collect()).collect();
        let x = Array2::from_shape_fn((n, 7), |(i, j)| (0..7).map(|k| z[i][k] * mix[j][k]).sum::<f64>() + 3.0);
        let fit: PcaFit = pca_fit(x.view(), 7).map_err(|e| e.to_string())?;
        for a in 0..7 {
            for b in 0..7 {
                let dot: f64 = fit.loadings[a].iter().zip(&fit.loadings[b]).map(|(p, q)| p * q).sum();
                if (dot - f64::from(u8::from(a == b))).abs() > 1e-9 {
                    return Err(format!("matrix {case}: loadings {a},{b} dot {dot}"));
                }
            }
        }
        if fit.explained_variance_ratio.windows(2).any(|w| w[0] < w[1]) {
            return Err(format!("matrix {case}: EVR not descending"));
        }
        let scores = rtlab_core::dimred::pca_transform(&fit, x.view()).map_err(|e| e.to_string())?;
        for i in 0..n {
            for j in 0..7 {
                let zhat: f64 = (0..7).map(|c| scores[(i, c)] * fit.loadings[c][j]).sum();
                let back = fit.means[j] + fit.sds[j] * zhat;
                if !close(back, x[(i, j)], 1e-9) {
                    return Err(format!("matrix {case}: reconstruction {back} vs {}", x[(i, j)]));
                }
            }
        }
        let oracle = power_eigenvalues(correlation_matrix(&x), 7);
        for (got, want) in fit.eigenvalues.iter().zip(&oracle) {
            worst_eig = worst_eig.max((got - want).abs());
            if (got - want).abs() > 1e-8 {
                return Err(format!("matrix {case}: eigenvalue {got} vs power iteration {want}"));
            }
        }
    }
    Ok(format!("10 matrices, max eigenvalue gap {worst_eig:e}"))
}

// ---------------------------------------------------------------- SHAP

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn shap_exactness() -> Outcome {
    let mut r = rng(707);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let d = 2 + case % 7;
        let w: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let v: Vec<f64> = (0..d * d).map(|_| r.random::<f64>() - 0.5).collect();
        let f = move |row: &[f64]| -> f64 {
            let mut s = (row[0] * 1.3).sin();
            for j in 0..row.len() {
                s += w[j] * row[j];
                for k in j + 1..row.len() {
                    s += v[j * row.len() + k] * row[j] * row[k];
                }
            }
            s
        };
        let background = Array2::from_shape_fn((8, d), |_| r.random::<f64>() * 4.0 - 2.0);
        let x = Array1::from_shape_fn(d, |_| r.random::<f64>() * 4.0 - 2.0);

        let value = |mask: usize| -> f64 {
            let mut total = 0.0;
            for b in background.rows() {
                let row: Vec<f64> = (0..d).map(|j| if mask & (1 << j) != 0 { x[j] } else { b[j] }).collect();
                total += f(&row);
            }
            total / background.nrows() as f64
        };
        let table: Vec<f64> = (0..1usize << d).map(value).collect();
        let mut phi = vec![0.0; d];
        let mut count = 0.0;
        permutations(&mut (0..d).collect(), 0, &mut |perm| {
            let mut mask = 0usize;
            for &j in perm {
                let before = table[mask];
                mask |= 1 << j;
                phi[j] += table[mask] - before;
            }
            count += 1.0;
        });
        phi.iter_mut().for_each(|p| *p /= count);

        let margin = |m: ndarray::ArrayView2<'_, f64>| Ok(m.rows().into_iter().map(|row| f(&row.to_vec())).collect());
        let att = kernel_shap(margin, x.view(), background.view(), 4096, case as u64).map_err(|e| e.to_string())?;
        for j in 0..d {
            worst = worst.max((att.phi[j] - phi[j]).abs());
            if (att.phi[j] - phi[j]).abs() > 1e-6 {
                return Err(format!("model {case} (d={d}): phi[{j}] {} vs exact {}", att.phi[j], phi[j]));
            }
        }
    }

    let mut worst_local = 0.0f64;
    for case in 0..5 {
        let d = 3 + case;
        let x = Array2::from_shape_fn((150, d), |_| r.random::<f64>() * 10.0 - 5.0);
        let y: Vec<u8> = x.rows().into_iter().map(|row| u8::from(row[0] - 0.5 * row[1] + r.random::<f64>() * 2.0 > 1.0)).collect();
        let model = fit(&ModelConfig::default_for(Algorithm::Logreg), x.view(), &y).map_err(|e| e.to_string())?;
        let means: Vec<f64> = x.mean_axis(ndarray::Axis(0)).unwrap().to_vec();
        let far = Array2::from_shape_fn((50, d), |_| r.random::<f64>() * 200.0 - 100.0);
        for probe in [x.view(), far.view()] {
            for a in linear_shap(&model, probe, &means).map_err(|e| e.to_string())? {
                worst_local = worst_local.max(a.local_sum_check);
            }
        }
    }
    if worst_local > 1e-9 {
        return Err(format!("linear SHAP local accuracy {worst_local:e}"));
    }
    Ok(format!("20 models, max |phi - exact| = {worst:e}; linear local accuracy {worst_local:e}"))
}

// ---------------------------------------------------------------- pipeline

fn pipeline_replication() -> Outcome {
    let (cohort, _) = generate_cohort(&SyntheticSpec::default(), 2024).map_err(|e| e.to_string())?;
    let (kept, _) = screen(&cohort, &ScreeningConfig::default());
    let ds = Dataset::from_cohort(&kept, 7).map_err(|e| e.to_string())?;
    let cfg = ModelConfig::tuned(Algorithm::Logreg, InputMode::Feature);
    let plan = ResamplePlan::new(10, 2024);
    let opts = FeatureOptions::default();
    let real = evaluate(&ds, &cfg, InputMode::Feature, &opts, &plan, 10).map_err(|e| e.to_string())?;
    let null = evaluate(&ds.with_shuffled_labels(99), &cfg, InputMode::Feature, &opts, &plan, 10).map_err(|e| e.to_string())?;
    let detail = format!(
        "AUROC {:.3} +/- {:.3}, shuffled {:.3} (n = {}, {} per repeat)",
        real.auroc.mean, real.auroc.std, null.auroc.mean, ds.len(), real.n_per_repeat
    );
    if (0.70..=0.90).contains(&real.auroc.mean) && (0.40..=0.60).contains(&null.auroc.mean) { Ok(detail) } else { Err(detail) }
}

// ---------------------------------------------------------------- screening recall

fn screening_recall() -> Outcome {
    let (mut injected, mut caught) = (0, 0);
    let mut worst_false = 0.0f64;
    for seed in 0..5 {
        let (cohort, truth) = generate_cohort(&SyntheticSpec::default(), 800 + seed).map_err(|e| e.to_string())?;
        let rep = recovery_check(&cohort, &truth).map_err(|e| e.to_string())?;
        for rr in &rep.recall {
            if matches!(rr.artifact, Artifact::CarelessFast | Artifact::CarelessErratic | Artifact::Outlier) {
                injected += rr.injected;
                caught += rr.caught;
            }
        }
        worst_false = worst_false.max(rep.false_exclusion_rate.unwrap_or(0.0));
    }
    let recall = caught as f64 / injected as f64;
    let detail = format!("recall {recall:.4} ({caught}/{injected}), worst false-exclusion rate {worst_false:.4}");
    if recall >= 0.95 && worst_false <= 0.02 { Ok(detail) } else { Err(detail) }
}

// ---------------------------------------------------------------- SBS

fn sbs_retention() -> Outcome {
    let mut hits = 0;
    let names: Vec<String> = (0..23).map(|j| if j < 3 { format!("signal_{j}") } else { format!("noise_{j}") }).collect();
    for run in 0..20u64 {
        let mut r = rng(900 + run);
        let n = 240;
        let x = Array2::from_shape_fn((n, 23), |_| r.random::<f64>() * 2.0 - 1.0);
        let y: Vec<u8> = x
            .rows()
            .into_iter()
            .map(|row| {
                let z = 2.5 * (row[0] + row[1] + row[2]);
                u8::from(r.random::<f64>() < 1.0 / (1.0 + (-z).exp()))
            })
            .collect();
        let opts = SbsOptions { seed: run, ..SbsOptions::default() };
        let trace = sequential_backward_selection(x.view(), &y, &names, &ModelConfig::default_for(Algorithm::Logreg), &opts)
            .map_err(|e| e.to_string())?;
        let kept = trace.final_indices.iter().filter(|&&j| j < 3).count();
        hits += usize::from(kept >= 2);
    }
    let detail = format!("{hits}/20 runs kept at least 2 of 3 informative features");
    if hits >= 18 { Ok(detail) } else { Err(detail) }
}

// ---------------------------------------------------------------- HPO

fn hpo_sanity() -> Outcome {
    let space = SearchSpace { params: vec![ParamDef { name: "c".into(), domain: Domain::Float { low: 0.0, high: 10.0, log: false } }] };
    let quad = |a: &Assignment, _: u64| match a["c"] {
        ParamValue::Float(c) => Ok(-(c - 1.0).powi(2)),
        _ => unreachable!(),
    };
    let (mut wins, mut near) = (0, 0);
    for run in 0..100u64 {
        let tpe = hpo_search(&space, quad, 50, run, SearchMethod::Tpe).map_err(|e| e.to_string())?;
        let rnd = hpo_search(&space, quad, 50, run, SearchMethod::Random).map_err(|e| e.to_string())?;
        let (t, q) = (tpe.best_value().unwrap(), rnd.best_value().unwrap());
        wins += usize::from(t > q);
        near += usize::from((-t).sqrt() <= 0.1);
    }
    let detail = format!("TPE beat random in {wins}/100 paired runs; best |c - 1| <= 0.1 in {near}/100 TPE runs");
    if wins >= 70 && near == 100 { Ok(detail) } else { Err(detail) }
}

// ---------------------------------------------------------------- determinism

fn rtlab(dir: &Path, threads: usize, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rtlab"))
        .arg("--dir")
        .arg(dir)
        .args(["--threads", &threads.to_string(), "--seed", "7"])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("rtlab {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let raw = root.path().join("raw.csv");
    let (cohort, _) = generate_cohort(&SyntheticSpec { n_records: 300, insomnia_prevalence: 0.15, ..Default::default() }, 3)
        .map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    export_dataset(&cohort, Format::Csv, &mut buf).map_err(|e| e.to_string())?;
    std::fs::write(&raw, buf).map_err(|e| e.to_string())?;
    let raw = raw.to_str().unwrap().to_string();

    let script: Vec<Vec<&str>> = vec![
        vec!["simulate", "--n", "400", "--prevalence", "0.15"],
        vec!["ingest", "--input", &raw],
        vec!["screen"],
        vec!["analyze", "--test", "mwu", "--group-by", "label", "--value", "total_rt"],
        vec!["analyze", "--test", "ols"],
        vec!["features"],
        vec!["embed", "--method", "pca"],
        vec!["embed", "--method", "tsne", "--iterations", "300"],
        vec!["train", "--model", "logreg", "--mode", "feature"],
        vec!["train", "--model", "knn", "--mode", "raw"],
        vec!["evaluate", "--model", "logreg", "--mode", "feature", "--repeats", "3"],
        vec!["select", "--model", "logreg", "--mode", "feature", "--input", "screened.jsonl"],
        vec!["tune", "--model", "svm_rbf", "--mode", "raw", "--trials", "12"],
        vec!["explain", "--model-file", "model_logreg_feature.json"],
        vec!["explain", "--model-file", "model_knn_raw.json", "--rows", "4", "--budget", "256"],
        vec!["report", "--metrics", "metrics_logreg_feature.json"],
    ];
    let runs = [(root.path().join("a"), 1), (root.path().join("b"), 4)];
    for (dir, threads) in &runs {
        for args in &script {
            rtlab(dir, *threads, args)?;
        }
    }
    let first = snapshot(&runs[0].0);
    // re-run everything in place with a third thread count
    for args in &script {
        rtlab(&runs[0].0, 2, args)?;
    }
    let again = snapshot(&runs[0].0);
    let other = snapshot(&runs[1].0);
    for (name, bytes) in &first {
        if again.get(name) != Some(bytes) {
            return Err(format!("{} changed on re-run", name.display()));
        }
        if other.get(name) != Some(bytes) {
            return Err(format!("{} differs between 1 and 4 threads", name.display()));
        }
    }
    if first.len() != other.len() {
        return Err("different artifact sets".into());
    }
    Ok(format!("{} commands, {} artifacts byte-identical across re-runs and thread counts", script.len(), first.len()))
}

fn main() {
    let criteria = [
        Criterion { name: "Mann-Whitney oracle equivalence", budget: Duration::from_secs(30), check: mwu_oracle },
        Criterion { name: "OLS inference oracle", budget: Duration::from_secs(10), check: ols_oracle },
        Criterion { name: "CI coverage on planted coefficients", budget: Duration::from_secs(120), check: ci_coverage },
        Criterion { name: "AUROC = concordance", budget: Duration::from_secs(10), check: auroc_concordance },
        Criterion { name: "Feature identities", budget: Duration::from_secs(5), check: feature_identities },
        Criterion { name: "PCA spectral identities", budget: Duration::from_secs(10), check: pca_identities },
        Criterion { name: "SHAP exactness", budget: Duration::from_secs(60), check: shap_exactness },
        Criterion { name: "Pipeline qualitative replication", budget: Duration::from_secs(180), check: pipeline_replication },
        Criterion { name: "Screening recall on injected artifacts", budget: Duration::from_secs(30), check: screening_recall },
        Criterion { name: "SBS planted-signal retention", budget: Duration::from_secs(120), check: sbs_retention },
        Criterion { name: "HPO sanity", budget: Duration::from_secs(60), check: hpo_sanity },
        Criterion { name: "Determinism", budget: Duration::from_secs(60), check: determinism },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.to_lowercase().contains(&f.to_lowercase())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.check)();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {}s budget", c.budget.as_secs())),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:<42} {:>7.2}s / {:>3}s  {}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            took.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
