//! Pairs interpolated assessment scores with regressed daily activity and
//! correlates them per participant.
//!
//! Both functions are sampled on activity-eligible days that lie inside the
//! score spline's domain and inside a non-empty regression segment. Visits
//! with a missing score are dropped from the knot list.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::activity::{daily_activity, ActivitySeries};
use crate::approx::{fit_piecewise_regression, spline_interpolate, RegressionMode};
use crate::error::{Error, Result};
use crate::model::{
    AssessmentRecord, CorrelationResult, Id, NotComputable, SensorEvent, StudyDataset,
};
use crate::scoring::tug_points;
use crate::stats::{correlate, spearman_rho};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assessment {
    Sppb,
    Tinetti13,
    Tinetti28,
    /// Correlated through TUG points, not seconds.
    Tug,
    SppbBalance,
    Sppb4m,
    Sppb5crt,
}

impl Assessment {
    pub const MAIN: [Assessment; 4] = [
        Assessment::Sppb,
        Assessment::Tinetti13,
        Assessment::Tinetti28,
        Assessment::Tug,
    ];
    pub const SPPB_ITEMS: [Assessment; 3] = [
        Assessment::SppbBalance,
        Assessment::Sppb4m,
        Assessment::Sppb5crt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Assessment::Sppb => "SPPB",
            Assessment::Tinetti13 => "Tinetti13",
            Assessment::Tinetti28 => "Tinetti28",
            Assessment::Tug => "TUG",
            Assessment::SppbBalance => "SPPB_balance",
            Assessment::Sppb4m => "SPPB_4m",
            Assessment::Sppb5crt => "SPPB_5CRT",
        }
    }

    /// Score of one visit on this scale. TUG falls back to points computed
    /// from seconds when printed points are missing.
    pub fn score(&self, r: &AssessmentRecord) -> Option<f64> {
        let v = match self {
            Assessment::Sppb => r.sppb_total,
            Assessment::Tinetti13 => r.tinetti13,
            Assessment::Tinetti28 => r.tinetti28,
            Assessment::Tug => r.tug_points.or_else(|| {
                r.tug_seconds
                    .and_then(|s| tug_points(s).ok())
                    .map(i32::from)
            }),
            Assessment::SppbBalance => r.sppb_balance,
            Assessment::Sppb4m => r.sppb_gait4m,
            Assessment::Sppb5crt => r.sppb_5crt,
        };
        v.map(f64::from)
    }
}

impl std::fmt::Display for Assessment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    pub participant_id: Id,
    pub assessment: Assessment,
    /// `(date, interpolated score, regressed activity)`, dates increasing.
    pub pairs: Vec<(NaiveDate, f64, f64)>,
}

impl PairedSeries {
    pub fn scores(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn activity(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.2).collect()
    }
}

/// Scored visits of one assessment, as spline knots.
pub fn knots(records: &[AssessmentRecord], assessment: Assessment) -> Vec<(NaiveDate, f64)> {
    records
        .iter()
        .filter_map(|r| assessment.score(r).map(|s| (r.date, s)))
        .collect()
}

/// Daily activity of a participant's flat on every eligible day of their
/// assessment span. Eligible days without motion events have value 0; with
/// default exclusions there are none.
pub fn participant_activity(dataset: &StudyDataset, participant: &Id) -> Result<ActivitySeries> {
    let flat = dataset
        .flat_of(participant)
        .ok_or_else(|| Error::NoFlat(participant.to_string()))?;
    let records = dataset
        .assessments
        .get(participant)
        .filter(|r| !r.is_empty())
        .ok_or(Error::InsufficientAssessments(0))?;
    let (lo, hi) = (records[0].date, records[records.len() - 1].date);

    let mut by_day: BTreeMap<NaiveDate, Vec<SensorEvent>> = BTreeMap::new();
    if let Some(days) = dataset.eligible_days.get(&flat.flat_id) {
        for d in days.range(lo..=hi) {
            by_day.insert(*d, Vec::new());
        }
    }
    for e in dataset.events.get(&flat.flat_id).into_iter().flatten() {
        if e.kind.is_motion() {
            if let Some(v) = by_day.get_mut(&e.date()) {
                v.push(e.clone());
            }
        }
    }
    let points = by_day
        .iter()
        .map(|(d, evs)| daily_activity(*d, evs, flat))
        .collect::<Result<Vec<_>>>()?;
    Ok(ActivitySeries {
        flat_id: flat.flat_id.clone(),
        points,
    })
}

fn pair_with(
    participant: &Id,
    assessment: Assessment,
    knots: &[(NaiveDate, f64)],
    series: &ActivitySeries,
    mode: RegressionMode,
) -> Result<PairedSeries> {
    if knots.len() < 2 {
        return Err(Error::InsufficientAssessments(knots.len()));
    }
    let spline = spline_interpolate(knots)?;
    let dates: Vec<NaiveDate> = knots.iter().map(|k| k.0).collect();
    let regression = fit_piecewise_regression(series, &dates, mode)?;
    let mut pairs = Vec::new();
    for p in &series.points {
        if !spline.contains(p.date) {
            continue;
        }
        match regression.evaluate(p.date) {
            Ok(activity) => pairs.push((p.date, spline.evaluate(p.date)?, activity)),
            Err(Error::EmptySegment(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(PairedSeries {
        participant_id: participant.clone(),
        assessment,
        pairs,
    })
}

pub fn build_paired_series(
    dataset: &StudyDataset,
    participant: &Id,
    assessment: Assessment,
    mode: RegressionMode,
) -> Result<PairedSeries> {
    let records = dataset
        .assessments
        .get(participant)
        .map(Vec::as_slice)
        .unwrap_or(&[]);
    let k = knots(records, assessment);
    if k.len() < 2 {
        return Err(Error::InsufficientAssessments(k.len()));
    }
    let series = participant_activity(dataset, participant)?;
    pair_with(participant, assessment, &k, &series, mode)
}

/// Correlation of a paired series, naming the constant side when rho is
/// undefined.
pub fn correlate_paired(paired: &PairedSeries) -> CorrelationResult {
    let x = paired.scores();
    let y = paired.activity();
    let n = x.len();
    if n == 0 {
        return CorrelationResult::not_computable(0, NotComputable::NoActivityData);
    }
    if n >= 3 && spearman_rho(&x, &y).ok().flatten().is_none() {
        let reason = if x.iter().all(|v| *v == x[0]) {
            NotComputable::ConstantScores
        } else {
            NotComputable::ConstantActivity
        };
        return CorrelationResult::not_computable(n, reason);
    }
    correlate(&x, &y).expect("equal lengths")
}

fn correlate_one(
    participant: &Id,
    assessment: Assessment,
    records: &[AssessmentRecord],
    series: &Result<ActivitySeries>,
    mode: RegressionMode,
) -> CorrelationResult {
    let k = knots(records, assessment);
    if k.len() < 2 {
        return CorrelationResult::not_computable(0, NotComputable::InsufficientAssessments);
    }
    if k.iter().all(|p| p.1 == k[0].1) {
        return CorrelationResult::not_computable(0, NotComputable::ConstantScores);
    }
    let series = match series {
        Ok(s) if !s.is_empty() => s,
        _ => return CorrelationResult::not_computable(0, NotComputable::NoActivityData),
    };
    match pair_with(participant, assessment, &k, series, mode) {
        Ok(p) => correlate_paired(&p),
        Err(_) => CorrelationResult::not_computable(0, NotComputable::NoActivityData),
    }
}

fn correlate_set(
    dataset: &StudyDataset,
    participant: &Id,
    set: &[Assessment],
    mode: RegressionMode,
) -> BTreeMap<Assessment, CorrelationResult> {
    let records = dataset
        .assessments
        .get(participant)
        .map(Vec::as_slice)
        .unwrap_or(&[]);
    let series = participant_activity(dataset, participant);
    set.iter()
        .map(|&a| (a, correlate_one(participant, a, records, &series, mode)))
        .collect()
}

/// SPPB, Tinetti13, Tinetti28 and TUG results for one participant. A score
/// series that is constant over its knots is not computable regardless of
/// activity.
pub fn correlate_participant(
    dataset: &StudyDataset,
    participant: &Id,
    mode: RegressionMode,
) -> BTreeMap<Assessment, CorrelationResult> {
    correlate_set(dataset, participant, &Assessment::MAIN, mode)
}

/// Balance, 4 m gait and chair-rise item results for one participant.
pub fn correlate_sppb_items(
    dataset: &StudyDataset,
    participant: &Id,
    mode: RegressionMode,
) -> BTreeMap<Assessment, CorrelationResult> {
    correlate_set(dataset, participant, &Assessment::SPPB_ITEMS, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    SppbTotal,
    SppbBalance,
    SppbGait4m,
    Sppb5crt,
    Tinetti13,
    Tinetti28,
    TugSeconds,
    TugPoints,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::SppbTotal,
        Measure::SppbBalance,
        Measure::SppbGait4m,
        Measure::Sppb5crt,
        Measure::Tinetti13,
        Measure::Tinetti28,
        Measure::TugSeconds,
        Measure::TugPoints,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Measure::SppbTotal => "sppb_total",
            Measure::SppbBalance => "sppb_balance",
            Measure::SppbGait4m => "sppb_gait4m",
            Measure::Sppb5crt => "sppb_5crt",
            Measure::Tinetti13 => "tinetti13",
            Measure::Tinetti28 => "tinetti28",
            Measure::TugSeconds => "tug_seconds",
            Measure::TugPoints => "tug_points",
        }
    }

    fn value(&self, r: &AssessmentRecord) -> Option<f64> {
        match self {
            Measure::SppbTotal => r.sppb_total.map(f64::from),
            Measure::SppbBalance => r.sppb_balance.map(f64::from),
            Measure::SppbGait4m => r.sppb_gait4m.map(f64::from),
            Measure::Sppb5crt => r.sppb_5crt.map(f64::from),
            Measure::Tinetti13 => r.tinetti13.map(f64::from),
            Measure::Tinetti28 => r.tinetti28.map(f64::from),
            Measure::TugSeconds => r.tug_seconds,
            Measure::TugPoints => r.tug_points.map(f64::from),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single value.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

/// Mean, sample SD and range of each measure over the `visit_index`-th
/// (0-based) record of every participant, skipping missing values. Measures
/// with no values are absent.
pub fn cohort_summary(
    assessments: &BTreeMap<Id, Vec<AssessmentRecord>>,
    visit_index: usize,
) -> Result<BTreeMap<Measure, Summary>> {
    let visits: Vec<&AssessmentRecord> = assessments
        .values()
        .filter_map(|recs| recs.get(visit_index))
        .collect();
    if visits.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut out = BTreeMap::new();
    for m in Measure::ALL {
        let vals: Vec<f64> = visits.iter().filter_map(|r| m.value(r)).collect();
        if vals.is_empty() {
            continue;
        }
        let n = vals.len();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (n > 1).then(|| {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.insert(
            m,
            Summary {
                n,
                mean,
                sd,
                min,
                max,
            },
        );
    }
    Ok(out)
}
