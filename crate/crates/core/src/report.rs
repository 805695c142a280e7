//! Plot-ready data bundles: tables only, no rendering.
//!
//! Each [`Section`] is a small named table that serializes to JSON and has a
//! CSV twin with the same columns.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cohort, N_ITEMS};
use crate::pipeline::{Confusion, MetricsReport};
use crate::screening::label;
use crate::stats::descriptive::{quantile_sorted, sorted_copy};

pub const KDE_GRID_POINTS: usize = 256;
pub const DEFAULT_HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Violin,
    Histogram,
    ScoreDistribution,
    GroupOverlay,
    GroupMeans,
    Roc,
    Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub kind: SectionKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Section {
    fn new(name: impl Into<String>, kind: SectionKind, columns: &[&str]) -> Self {
        Section { name: name.into(), kind, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(v) => format!("{v}"),
                Cell::Text(s) => s.clone(),
            }))
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotBundle {
    pub sections: Vec<Section>,
}

impl PlotBundle {
    pub fn of_kind(&self, kind: SectionKind) -> impl Iterator<Item = &Section> {
        self.sections.iter().filter(move |s| s.kind == kind)
    }
}

/// A trained model's cross-validation summary to plot.
pub struct ModelSummary<'a> {
    pub name: &'a str,
    pub report: &'a MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub histogram_bins: usize,
    pub label_threshold: i64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { histogram_bins: DEFAULT_HISTOGRAM_BINS, label_threshold: 7 }
    }
}

/// Silverman's rule of thumb: 0.9 min(sd, IQR/1.34) n^(-1/5).
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    if sorted.len() < 2 {
        return 1.0;
    }
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        // all values equal
        1e-3 * mean.abs().max(1.0)
    }
}

/// Gaussian KDE on an evenly spaced grid spanning the data plus three bandwidths.
pub fn kde_grid(sorted: &[f64], points: usize) -> (f64, Vec<(f64, f64)>) {
    let h = silverman_bandwidth(sorted);
    if sorted.is_empty() {
        return (h, Vec::new());
    }
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[sorted.len() - 1] + 3.0 * h;
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid = (0..points)
        .map(|g| {
            let x = lo + (hi - lo) * g as f64 / (points - 1) as f64;
            let density: f64 = sorted.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm;
            (x, density)
        })
        .collect();
    (h, grid)
}

/// Equal-width bins over [min, max]; the last bin is closed on the right.
pub fn histogram(values: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Ok((vec![0.0, 1.0], vec![0]));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let i = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok((edges, counts))
}

/// Build every section for an (already screened) cohort and any model summaries.
pub fn build_report(cohort: &Cohort, models: &[ModelSummary<'_>], opts: &ReportOptions) -> Result<PlotBundle> {
    let mut rts: Vec<[f64; N_ITEMS]> = Vec::with_capacity(cohort.len());
    let mut scores: Vec<[i64; N_ITEMS]> = Vec::with_capacity(cohort.len());
    let mut labels = Vec::with_capacity(cohort.len());
    for r in &cohort.records {
        let (Some(rt), Some(sc)) = (r.rt_seconds(), r.scores()) else {
            return Err(Error::Validation(format!("record {} has missing entries; screen first", r.participant_id)));
        };
        rts.push(rt);
        scores.push(sc);
        labels.push(label(r, opts.label_threshold)?);
    }
    let mut sections = Vec::new();

    for item in 0..N_ITEMS {
        let sorted = sorted_copy(&rts.iter().map(|r| r[item]).collect::<Vec<_>>());
        let (h, grid) = kde_grid(&sorted, KDE_GRID_POINTS);
        let mut s = Section::new(format!("violin_rt{}", item + 1), SectionKind::Violin, &["part", "x", "y", "bandwidth"]);
        for (i, v) in sorted.iter().enumerate() {
            s.push(vec!["value".into(), i.into(), (*v).into(), h.into()]);
        }
        for (x, d) in grid {
            s.push(vec!["density".into(), x.into(), d.into(), h.into()]);
        }
        sections.push(s);
    }

    let totals: Vec<f64> = rts.iter().map(|r| r.iter().sum()).collect();
    let (edges, counts) = histogram(&totals, opts.histogram_bins)?;
    let mut s = Section::new("total_rt_histogram", SectionKind::Histogram, &["bin_start_s", "bin_end_s", "count"]);
    for (i, c) in counts.iter().enumerate() {
        s.push(vec![edges[i].into(), edges[i + 1].into(), (*c).into()]);
    }
    sections.push(s);

    let mut s = Section::new("score_distribution", SectionKind::ScoreDistribution, &["item", "score", "count"]);
    for item in 0..N_ITEMS {
        for score in 0..=4 {
            let n = scores.iter().filter(|sc| sc[item] == score).count();
            s.push(vec![(item + 1).into(), (score as f64).into(), n.into()]);
        }
    }
    sections.push(s);

    let mut s = Section::new("total_rt_by_group", SectionKind::GroupOverlay, &["group", "x", "density"]);
    for g in 0..=1u8 {
        let sorted = sorted_copy(&totals.iter().zip(&labels).filter(|(_, l)| **l == g).map(|(t, _)| *t).collect::<Vec<_>>());
        for (x, d) in kde_grid(&sorted, KDE_GRID_POINTS).1 {
            s.push(vec![(g as f64).into(), x.into(), d.into()]);
        }
    }
    sections.push(s);

    let mut s = Section::new("item_group_means", SectionKind::GroupMeans, &["item", "group", "n", "mean_s", "sd_s"]);
    for item in 0..N_ITEMS {
        for g in 0..=1u8 {
            let v: Vec<f64> = rts.iter().zip(&labels).filter(|(_, l)| **l == g).map(|(r, _)| r[item]).collect();
            let n = v.len() as f64;
            let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / n };
            let sd = if v.len() < 2 { f64::NAN } else { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
            s.push(vec![(item + 1).into(), (g as f64).into(), v.len().into(), mean.into(), sd.into()]);
        }
    }
    sections.push(s);

    for m in models {
        let mut s = Section::new(format!("roc_{}", m.name), SectionKind::Roc, &["fpr", "tpr"]);
        for p in &m.report.roc {
            s.push(vec![p[0].into(), p[1].into()]);
        }
        sections.push(s);
        let Confusion { tp, fp, tn, fn_ } = m.report.confusion;
        let mut s = Section::new(format!("confusion_{}", m.name), SectionKind::Confusion, &["actual", "predicted", "count"]);
        for (a, p, c) in [(0, 0, tn), (0, 1, fp), (1, 0, fn_), (1, 1, tp)] {
            s.push(vec![(a as f64).into(), (p as f64).into(), c.into()]);
        }
        sections.push(s);
    }
    Ok(PlotBundle { sections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParticipantRecord;

    fn cohort() -> Cohort {
        let records = (0..40)
            .map(|i| {
                let rt = std::array::from_fn(|j| 2000 + 97 * ((i * 7 + j * 3) % 23) as i64);
                let sc = std::array::from_fn(|j| ((i + j) % 5) as i64);
                ParticipantRecord::new(format!("p{i}"), rt, sc)
            })
            .collect();
        Cohort::new(records, "t")
    }

    #[test]
    fn kde_integrates_to_one() {
        let v = sorted_copy(&[1.0, 2.0, 2.5, 4.0, 7.0, 7.5]);
        let (_, grid) = kde_grid(&v, KDE_GRID_POINTS);
        let dx = grid[1].0 - grid[0].0;
        let area: f64 = grid.iter().map(|p| p.1).sum::<f64>() * dx;
        assert!((area - 1.0).abs() < 0.01, "{area}");
    }

    #[test]
    fn histogram_conserves_counts() {
        let v: Vec<f64> = (0..101).map(|i| (i as f64).sqrt()).collect();
        let (edges, counts) = histogram(&v, 7).unwrap();
        assert_eq!(edges.len(), 8);
        assert_eq!(counts.iter().sum::<usize>(), 101);
        assert_eq!(*edges.last().unwrap(), 10.0);
    }

    #[test]
    fn bundle_shape() {
        let b = build_report(&cohort(), &[], &ReportOptions::default()).unwrap();
        assert_eq!(b.of_kind(SectionKind::Violin).count(), 7);
        let hist = b.of_kind(SectionKind::Histogram).next().unwrap();
        let total: f64 = hist.rows.iter().map(|r| if let Cell::Num(c) = r[2] { c } else { 0.0 }).sum();
        assert_eq!(total, 40.0);
        let mut buf = Vec::new();
        hist.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("bin_start_s,bin_end_s,count\n"));
    }
}
