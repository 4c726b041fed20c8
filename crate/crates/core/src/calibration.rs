//! Inactivity-threshold calibration against LMS time, plus the regression
//! and correlation primitives used across the crate.
//!
//! For each candidate threshold the whole-course time on task of every
//! student is paired with the hours an LMS recorded for them. Students who
//! reached WeBWorK without the LMS show up with far less LMS time than
//! WeBWorK time; they are dropped (`lms < ratio · webwork`). A straight line
//! is fitted to the remaining pairs and the threshold whose slope is closest
//! to 1 wins.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::session::{Threshold, UserActivity};

pub const DEFAULT_OUTLIER_RATIO: f64 = 0.5;

/// Two-sided confidence used for the slope interval.
const CI_LEVEL: f64 = 0.95;

/// Slopes whose distance to 1 differs by less than this are treated as tied.
const SLOPE_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no grid point produced a valid fit")]
    NoValidRows,
    #[error("threshold grid is empty")]
    EmptyGrid,
}

/// A student's WeBWorK hours (`x`) against their LMS hours (`y`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedPoint {
    pub user_id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PairedSample {
    pub points: Vec<PairedPoint>,
}

impl PairedSample {
    pub fn from_xy(xy: &[(f64, f64)]) -> Self {
        Self {
            points: xy
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| PairedPoint {
                    user_id: i.to_string(),
                    x,
                    y,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn user_ids(&self) -> BTreeSet<&str> {
        self.points.iter().map(|p| p.user_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci95: (f64, f64),
    /// `None` when `y` is constant.
    pub pearson_r: Option<f64>,
    pub n_used: usize,
}

struct Moments {
    n: f64,
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn moments(sample: &PairedSample) -> Moments {
    let n = sample.len() as f64;
    let mean_x = sample.points.iter().map(|p| p.x).sum::<f64>() / n;
    let mean_y = sample.points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in &sample.points {
        let dx = p.x - mean_x;
        let dy = p.y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    Moments {
        n,
        mean_x,
        mean_y,
        sxx,
        syy,
        sxy,
    }
}

/// Keep exactly the points with `y ≥ ratio · x`. `ratio` is expected in
/// `(0, 1]`.
pub fn filter_outliers(sample: &PairedSample, ratio: f64) -> PairedSample {
    PairedSample {
        points: sample
            .points
            .iter()
            .filter(|p| p.y >= ratio * p.x)
            .cloned()
            .collect(),
    }
}

/// Product-moment correlation.
pub fn pearson(sample: &PairedSample) -> Result<f64, StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::DegenerateInput("need at least two points"));
    }
    let m = moments(sample);
    if m.sxx == 0.0 || m.syy == 0.0 {
        return Err(StatsError::DegenerateInput("zero variance"));
    }
    Ok((m.sxy / (m.sxx * m.syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided Student-t critical value for `df` degrees of freedom.
pub fn t_critical(df: f64, level: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0)
}

/// Ordinary least squares `y = slope · x + intercept` with a 95% t-interval
/// on the slope.
pub fn ols_fit(sample: &PairedSample) -> Result<FitResult, StatsError> {
    if sample.len() < 3 {
        return Err(StatsError::DegenerateInput("need at least three points"));
    }
    if sample
        .points
        .iter()
        .any(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(StatsError::DegenerateInput("non-finite value"));
    }
    let m = moments(sample);
    if m.sxx == 0.0 {
        return Err(StatsError::DegenerateInput("constant x"));
    }
    let slope = m.sxy / m.sxx;
    let intercept = m.mean_y - slope * m.mean_x;
    let ssr: f64 = sample
        .points
        .iter()
        .map(|p| {
            let r = p.y - (slope * p.x + intercept);
            r * r
        })
        .sum();
    let df = m.n - 2.0;
    let se = (ssr / df / m.sxx).sqrt();
    let half = t_critical(df, CI_LEVEL) * se;
    let pearson_r = (m.syy > 0.0).then(|| (m.sxy / (m.sxx * m.syy).sqrt()).clamp(-1.0, 1.0));
    Ok(FitResult {
        slope,
        intercept,
        slope_ci95: (slope - half, slope + half),
        pearson_r,
        n_used: sample.len(),
    })
}

/// Evenly spaced thresholds from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            lo: 0.10,
            hi: 2.00,
            step: 0.05,
        }
    }
}

impl ThresholdGrid {
    /// Grid values, each rounded to 1e-9 h so that e.g. 0.95 appears as the
    /// literal 0.95 and not an accumulated sum.
    pub fn values(&self) -> Vec<f64> {
        if self.step.is_nan() || self.step <= 0.0 || self.hi < self.lo {
            return Vec::new();
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta_hours: f64,
    pub slope: Option<f64>,
    pub fit: Option<FitResult>,
    /// Mean whole-course hours over every active student, before any
    /// outlier filtering.
    pub mean_total_hours: f64,
    pub n_users: usize,
    pub n_paired: usize,
    pub n_retained: usize,
}

/// Whole-course hours paired with LMS hours. Students missing from the LMS
/// table are left out rather than counted as zero.
pub fn paired_sample(
    users: &BTreeMap<String, UserActivity>,
    lms_hours: &BTreeMap<String, f64>,
    threshold: Threshold,
) -> PairedSample {
    PairedSample {
        points: users
            .iter()
            .filter_map(|(user, activity)| {
                lms_hours.get(user).map(|&y| PairedPoint {
                    user_id: user.clone(),
                    x: activity.course_total_time(threshold),
                    y,
                })
            })
            .collect(),
    }
}

fn sweep_row(
    users: &BTreeMap<String, UserActivity>,
    lms_hours: &BTreeMap<String, f64>,
    threshold: Threshold,
    ratio: f64,
) -> SweepRow {
    let totals: BTreeMap<&str, f64> = users
        .iter()
        .map(|(u, a)| (u.as_str(), a.course_total_time(threshold)))
        .collect();
    let mean_total_hours = if totals.is_empty() {
        0.0
    } else {
        totals.values().sum::<f64>() / totals.len() as f64
    };
    let paired = PairedSample {
        points: totals
            .iter()
            .filter_map(|(&u, &x)| {
                lms_hours.get(u).map(|&y| PairedPoint {
                    user_id: u.to_string(),
                    x,
                    y,
                })
            })
            .collect(),
    };
    let kept = filter_outliers(&paired, ratio);
    let fit = ols_fit(&kept).ok();
    SweepRow {
        theta_hours: threshold.hours(),
        slope: fit.map(|f| f.slope),
        fit,
        mean_total_hours,
        n_users: totals.len(),
        n_paired: paired.len(),
        n_retained: kept.len(),
    }
}

/// One row per grid threshold, in ascending threshold order. A grid point
/// whose fit is degenerate keeps a row with no slope.
pub fn sweep_thresholds(
    users: &BTreeMap<String, UserActivity>,
    lms_hours: &BTreeMap<String, f64>,
    grid: &[Threshold],
    ratio: f64,
) -> Vec<SweepRow> {
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.hours().total_cmp(&b.hours()));
    grid.iter()
        .map(|&t| sweep_row(users, lms_hours, t, ratio))
        .collect()
}

/// Threshold whose slope is closest to 1; ties go to the smaller threshold.
pub fn select_threshold(rows: &[SweepRow]) -> Result<f64, CalibrationError> {
    let best = rows
        .iter()
        .filter_map(|r| r.slope.map(|s| (s - 1.0).abs()))
        .min_by(f64::total_cmp)
        .ok_or(CalibrationError::NoValidRows)?;
    rows.iter()
        .filter(|r| matches!(r.slope, Some(s) if (s - 1.0).abs() <= best + SLOPE_TIE_TOLERANCE))
        .map(|r| r.theta_hours)
        .min_by(f64::total_cmp)
        .ok_or(CalibrationError::NoValidRows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub theta_star: f64,
    pub ratio: f64,
    pub sweep: Vec<SweepRow>,
    pub fit_at_star: FitResult,
    /// Paired students dropped by the outlier filter at the chosen threshold.
    pub outliers_at_star: Vec<String>,
}

pub fn calibrate(
    users: &BTreeMap<String, UserActivity>,
    lms_hours: &BTreeMap<String, f64>,
    grid: &[Threshold],
    ratio: f64,
) -> Result<CalibrationResult, CalibrationError> {
    if grid.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    let sweep = sweep_thresholds(users, lms_hours, grid, ratio);
    let theta_star = select_threshold(&sweep)?;
    let row = sweep
        .iter()
        .find(|r| r.theta_hours == theta_star)
        .expect("selected threshold comes from the sweep");
    let fit_at_star = row.fit.expect("selected row has a fit");

    let threshold = Threshold::from_hours(theta_star).expect("grid thresholds are positive");
    let paired = paired_sample(users, lms_hours, threshold);
    let kept = filter_outliers(&paired, ratio);
    let kept_ids = kept.user_ids();
    let outliers_at_star = paired
        .points
        .iter()
        .filter(|p| !kept_ids.contains(p.user_id.as_str()))
        .map(|p| p.user_id.clone())
        .collect();

    Ok(CalibrationResult {
        theta_star,
        ratio,
        sweep,
        fit_at_star,
        outliers_at_star,
    })
}
