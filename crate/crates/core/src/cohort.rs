//! Two-group comparisons: descriptive statistics, Cohen's d, and
//! plot-ready histogram and box summaries.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::{StudentAggregate, UnknownMetricName};

pub const DEFAULT_CUT: f64 = 0.5;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CohortError {
    #[error("no values to describe")]
    EmptyInput,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("histogram edges must be strictly increasing and at least two")]
    BadEdges,
    #[error(transparent)]
    UnknownMetric(#[from] UnknownMetricName),
}

/// Students below the cut go low; the boundary goes high.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSplit {
    pub cut: f64,
    pub low: BTreeSet<String>,
    pub high: BTreeSet<String>,
}

pub fn split_groups(students: &[StudentAggregate], cut: f64) -> GroupSplit {
    let mut split = GroupSplit {
        cut,
        low: BTreeSet::new(),
        high: BTreeSet::new(),
    };
    for s in students {
        match s.ww_score {
            Some(score) if score < cut => {
                split.low.insert(s.user_id.clone());
            }
            Some(_) => {
                split.high.insert(s.user_id.clone());
            }
            None => {}
        }
    }
    split
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Description {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1); `None` for a single value.
    pub sd: Option<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics at position
/// `p · (n − 1)`. `sorted` must be non-empty and ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn describe(values: &[f64]) -> Result<Description, CohortError> {
    if values.is_empty() {
        return Err(CohortError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = (n >= 2).then(|| {
        let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(Description {
        n,
        mean,
        sd,
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        min: sorted[0],
        max: sorted[n - 1],
    })
}

/// Summary statistics of one group, as published in comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl GroupStats {
    pub fn new(mean: f64, sd: f64, n: usize) -> Self {
        Self { mean, sd, n }
    }
}

/// Standardized mean difference `(a − b) / s_pooled`, with
/// `s_pooled² = ((n_a−1)·sd_a² + (n_b−1)·sd_b²) / (n_a + n_b − 2)`.
pub fn cohens_d(a: GroupStats, b: GroupStats) -> Result<f64, CohortError> {
    if a.n < 2 || b.n < 2 {
        return Err(CohortError::DegenerateInput(
            "each group needs at least two values",
        ));
    }
    let dof = (a.n + b.n - 2) as f64;
    let pooled_var = ((a.n - 1) as f64 * a.sd * a.sd + (b.n - 1) as f64 * b.sd * b.sd) / dof;
    if pooled_var.is_nan() || pooled_var <= 0.0 {
        return Err(CohortError::DegenerateInput(
            "zero pooled standard deviation",
        ));
    }
    Ok((a.mean - b.mean) / pooled_var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

/// Half-open bins `[e_i, e_{i+1})`, except the last, which is closed.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram, CohortError> {
    if edges.len() < 2
        || edges
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(CohortError::BadEdges);
    }
    let last = edges.len() - 1;
    let mut h = Histogram {
        edges: edges.to_vec(),
        counts: vec![0; last],
        underflow: 0,
        overflow: 0,
    };
    for &v in values {
        if v < edges[0] {
            h.underflow += 1;
        } else if v > edges[last] || v.is_nan() {
            h.overflow += 1;
        } else if v == edges[last] {
            h.counts[last - 1] += 1;
        } else {
            // first edge strictly greater than v, minus one
            let bin = edges.partition_point(|&e| e <= v) - 1;
            h.counts[bin] += 1;
        }
    }
    Ok(h)
}

/// `bins` equal-width bins spanning the data range; a constant sample gets
/// a unit-wide range around its value.
pub fn default_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let (lo, hi) = if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bins as f64;
    (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: String,
    pub low: Option<Description>,
    pub high: Option<Description>,
    /// Low group relative to high group; `None` if either side has fewer
    /// than two values or no spread.
    pub cohens_d: Option<f64>,
}

impl MetricComparison {
    /// Render a group as `mean(sd)`, as in published tables.
    pub fn cell(desc: &Option<Description>) -> String {
        match desc {
            None => String::new(),
            Some(d) => match d.sd {
                Some(sd) => format!("{}({})", sig2(d.mean), sig2(sd)),
                None => sig2(d.mean),
            },
        }
    }
}

/// Two significant figures, or whole units from 10 up.
fn sig2(v: f64) -> String {
    let a = v.abs();
    let decimals = if a >= 10.0 {
        0
    } else if a >= 1.0 {
        1
    } else if a == 0.0 {
        0
    } else {
        (1 - a.log10().floor() as i32).max(0) as usize
    };
    format!("{v:.decimals$}")
}

/// Values of `metric` for the given students, skipping undefined entries.
pub fn metric_values(
    students: &[StudentAggregate],
    members: &BTreeSet<String>,
    metric: &str,
) -> Result<Vec<f64>, UnknownMetricName> {
    let mut out = Vec::new();
    for s in students.iter().filter(|s| members.contains(&s.user_id)) {
        if let Some(v) = s.metric(metric)? {
            out.push(v);
        }
    }
    Ok(out)
}

/// One comparison row per requested metric, in the requested order.
pub fn compare_table(
    split: &GroupSplit,
    students: &[StudentAggregate],
    metrics: &[&str],
) -> Result<Vec<MetricComparison>, CohortError> {
    metrics
        .iter()
        .map(|&name| {
            let low = describe(&metric_values(students, &split.low, name)?).ok();
            let high = describe(&metric_values(students, &split.high, name)?).ok();
            let d = match (low, high) {
                (Some(l), Some(h)) => match (l.sd, h.sd) {
                    (Some(ls), Some(hs)) => cohens_d(
                        GroupStats::new(l.mean, ls, l.n),
                        GroupStats::new(h.mean, hs, h.n),
                    )
                    .ok(),
                    _ => None,
                },
                _ => None,
            };
            Ok(MetricComparison {
                metric: name.to_string(),
                low,
                high,
                cohens_d: d,
            })
        })
        .collect()
}
