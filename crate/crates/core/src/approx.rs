//! Piecewise linear approximation of score and activity series.
//!
//! Dates are handled as integer day offsets from the function's origin (its
//! first date), which keeps the least-squares fits well conditioned.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::activity::ActivitySeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// One piece of a [`PiecewiseLinear`]; `line` is `None` when the interval had
/// too few points to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub line: Option<Line>,
}

/// Contiguous segments over `[first start, last end]`. Segments are
/// half-open except the last, which is closed. The abscissa of each line is
/// the day offset from `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    origin: NaiveDate,
    segments: Vec<Segment>,
}

impl PiecewiseLinear {
    fn from_segments(segments: Vec<Segment>) -> Self {
        debug_assert!(!segments.is_empty());
        debug_assert!(segments.windows(2).all(|w| w[0].end == w[1].start));
        debug_assert!(segments.iter().all(|s| s.start < s.end));
        PiecewiseLinear {
            origin: segments[0].start,
            segments,
        }
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn domain(&self) -> (NaiveDate, NaiveDate) {
        (self.origin, self.segments[self.segments.len() - 1].end)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        let (lo, hi) = self.domain();
        lo <= date && date <= hi
    }

    pub fn offset(&self, date: NaiveDate) -> f64 {
        (date - self.origin).num_days() as f64
    }

    fn segment_index(&self, x: f64) -> Option<usize> {
        let (_, hi) = self.domain();
        if !(x >= 0.0 && x <= self.offset(hi)) {
            return None;
        }
        // First segment whose end lies beyond x; the last segment is closed.
        let i = self.segments.partition_point(|s| self.offset(s.end) <= x);
        Some(i.min(self.segments.len() - 1))
    }

    pub fn segment_at(&self, date: NaiveDate) -> Option<&Segment> {
        self.segment_index(self.offset(date))
            .map(|i| &self.segments[i])
    }

    /// Value at `date`. No extrapolation beyond the domain.
    pub fn evaluate(&self, date: NaiveDate) -> Result<f64> {
        self.evaluate_at(self.offset(date)).map_err(|e| match e {
            Error::OutOfDomain(_) => Error::OutOfDomain(date.to_string()),
            Error::EmptySegment(_) => Error::EmptySegment(date.to_string()),
            other => other,
        })
    }

    /// Value at a fractional day offset from [`Self::origin`].
    pub fn evaluate_at(&self, x: f64) -> Result<f64> {
        let i = self
            .segment_index(x)
            .ok_or_else(|| Error::OutOfDomain(format!("day offset {x}")))?;
        self.segments[i]
            .line
            .map(|l| l.at(x))
            .ok_or_else(|| Error::EmptySegment(format!("day offset {x}")))
    }
}

/// Linear interpolation through `(date, score)` knots: one segment per pair of
/// consecutive knots, passing through both.
pub fn spline_interpolate(knots: &[(NaiveDate, f64)]) -> Result<PiecewiseLinear> {
    if knots.len() < 2 {
        return Err(Error::InsufficientKnots(knots.len()));
    }
    for w in knots.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::DuplicateKnotDate(w[1].0.to_string()));
        }
    }
    let origin = knots[0].0;
    let x = |d: NaiveDate| (d - origin).num_days() as f64;
    let segments = knots
        .windows(2)
        .map(|w| {
            let ((d0, a0), (d1, a1)) = (w[0], w[1]);
            let (x0, x1) = (x(d0), x(d1));
            let slope = (a1 - a0) / (x1 - x0);
            Segment {
                start: d0,
                end: d1,
                line: Some(Line {
                    slope,
                    intercept: a0 - slope * x0,
                }),
            }
        })
        .collect();
    Ok(PiecewiseLinear::from_segments(segments))
}

/// Ordinary least squares over `(x, v)` points, minimizing
/// `sum (slope * x + intercept - v)^2` jointly over slope and intercept.
pub fn fit_segment_regression(points: &[(f64, f64)]) -> Result<Line> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints(points.len()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_v = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxv) = (0.0, 0.0);
    for &(x, v) in points {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxv += dx * (v - mean_v);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateAbscissa);
    }
    let slope = sxv / sxx;
    Ok(Line {
        slope,
        intercept: mean_v - slope * mean_x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionMode {
    /// One fit per inter-assessment interval.
    #[default]
    Piecewise,
    /// One fit over the whole assessment span, shared by every interval.
    Global,
}

impl std::str::FromStr for RegressionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise" => Ok(RegressionMode::Piecewise),
            "global" => Ok(RegressionMode::Global),
            other => Err(Error::InvalidConfig(format!(
                "regression mode `{other}` (expected piecewise or global)"
            ))),
        }
    }
}

/// Regresses daily activity between consecutive assessment dates.
///
/// Interval `k` takes points dated in `[d_k, d_{k+1})`; the last interval
/// also takes its end date. Intervals with fewer than two points, or with all
/// points on one date, get an empty segment.
pub fn fit_piecewise_regression(
    series: &ActivitySeries,
    assessment_dates: &[NaiveDate],
    mode: RegressionMode,
) -> Result<PiecewiseLinear> {
    if assessment_dates.len() < 2 {
        return Err(Error::InsufficientKnots(assessment_dates.len()));
    }
    for w in assessment_dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::DuplicateKnotDate(w[1].to_string()));
        }
    }
    let origin = assessment_dates[0];
    let last = assessment_dates.len() - 2;
    let interval_points = |k: usize| -> Vec<(f64, f64)> {
        let (lo, hi) = (assessment_dates[k], assessment_dates[k + 1]);
        series
            .points
            .iter()
            .filter(|p| p.date >= lo && (p.date < hi || (k == last && p.date == hi)))
            .map(|p| ((p.date - origin).num_days() as f64, p.value))
            .collect()
    };

    let global = match mode {
        RegressionMode::Global => {
            let all: Vec<_> = (0..=last).flat_map(interval_points).collect();
            fit_segment_regression(&all).ok()
        }
        RegressionMode::Piecewise => None,
    };

    let segments = (0..=last)
        .map(|k| {
            let line = match mode {
                RegressionMode::Piecewise => fit_segment_regression(&interval_points(k)).ok(),
                RegressionMode::Global => global,
            };
            Segment {
                start: assessment_dates[k],
                end: assessment_dates[k + 1],
                line,
            }
        })
        .collect();
    Ok(PiecewiseLinear::from_segments(segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DailyActivity, Id};
    use chrono::Duration;

    fn d(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 7, 1).unwrap() + Duration::days(n)
    }

    fn series(points: &[(i64, f64)]) -> ActivitySeries {
        ActivitySeries {
            flat_id: Id::from("F1"),
            points: points
                .iter()
                .map(|&(x, v)| DailyActivity {
                    flat_id: Id::from("F1"),
                    date: d(x),
                    value: v,
                    per_sensor_window_counts: Default::default(),
                })
                .collect(),
        }
    }

    #[test]
    fn two_knot_midpoint() {
        // Participant 1, Tinetti13 months 1 and 2.
        let f = spline_interpolate(&[(d(0), 5.0), (d(31), 7.0)]).unwrap();
        assert!((f.evaluate_at(15.5).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn constant_spline() {
        let f = spline_interpolate(&[(d(0), 4.0), (d(10), 4.0)]).unwrap();
        for k in 0..=10 {
            assert_eq!(f.evaluate(d(k)).unwrap(), 4.0);
        }
    }

    #[test]
    fn tent() {
        let f = spline_interpolate(&[(d(0), 0.0), (d(10), 10.0), (d(20), 0.0)]).unwrap();
        assert!((f.evaluate(d(5)).unwrap() - 5.0).abs() < 1e-12);
        assert!((f.evaluate(d(15)).unwrap() - 5.0).abs() < 1e-12);
        assert!((f.evaluate(d(10)).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn spline_errors() {
        assert_eq!(
            spline_interpolate(&[(d(0), 1.0)]),
            Err(Error::InsufficientKnots(1))
        );
        assert!(matches!(
            spline_interpolate(&[(d(0), 1.0), (d(0), 2.0)]),
            Err(Error::DuplicateKnotDate(_))
        ));
    }

    #[test]
    fn out_of_domain() {
        let f = spline_interpolate(&[(d(0), 0.0), (d(10), 10.0)]).unwrap();
        assert!(matches!(f.evaluate(d(11)), Err(Error::OutOfDomain(_))));
        assert!(matches!(f.evaluate(d(-1)), Err(Error::OutOfDomain(_))));
        assert_eq!(f.evaluate(d(10)).unwrap(), 10.0);
    }

    #[test]
    fn interior_boundary_takes_right_segment() {
        let f = spline_interpolate(&[(d(0), 0.0), (d(10), 10.0), (d(20), 0.0)]).unwrap();
        let seg = f.segment_at(d(10)).unwrap();
        assert_eq!(seg.start, d(10));
    }

    #[test]
    fn collinear_fit() {
        let l = fit_segment_regression(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-12);
        assert!((l.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_equation_fit() {
        // Normal equations: [3 3; 3 5] [b m]' = [2 3]' gives m = 1/2, b = 1/6.
        let l = fit_segment_regression(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert!((l.slope - 0.5).abs() < 1e-12);
        assert!((l.intercept - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn regression_errors() {
        assert_eq!(
            fit_segment_regression(&[(1.0, 1.0)]),
            Err(Error::InsufficientPoints(1))
        );
        assert_eq!(
            fit_segment_regression(&[(1.0, 1.0), (1.0, 2.0)]),
            Err(Error::DegenerateAbscissa)
        );
    }

    #[test]
    fn piecewise_delegates() {
        let s = series(&[(0, 1.0), (1, 3.0), (2, 5.0)]);
        let f = fit_piecewise_regression(&s, &[d(0), d(2)], RegressionMode::Piecewise).unwrap();
        let l = f.segments()[0].line.unwrap();
        assert!((l.slope - 2.0).abs() < 1e-12);
        assert!((l.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_interval_is_marked() {
        let s = series(&[(0, 1.0), (1, 3.0), (2, 5.0)]);
        let f =
            fit_piecewise_regression(&s, &[d(0), d(5), d(10)], RegressionMode::Piecewise).unwrap();
        assert!(f.segments()[0].line.is_some());
        assert!(f.segments()[1].line.is_none());
        assert!(matches!(f.evaluate(d(7)), Err(Error::EmptySegment(_))));
    }

    #[test]
    fn half_open_intervals_last_closed() {
        // Point at day 5 belongs to the second interval, day 10 to the last.
        let s = series(&[(0, 0.0), (4, 4.0), (5, 100.0), (10, 110.0)]);
        let f =
            fit_piecewise_regression(&s, &[d(0), d(5), d(10)], RegressionMode::Piecewise).unwrap();
        let a = f.segments()[0].line.unwrap();
        let b = f.segments()[1].line.unwrap();
        assert!((a.slope - 1.0).abs() < 1e-12);
        assert!((b.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn global_mode_shares_one_line() {
        let s = series(&[(0, 0.0), (3, 3.0), (6, 6.0), (9, 9.0)]);
        let f = fit_piecewise_regression(&s, &[d(0), d(5), d(9)], RegressionMode::Global).unwrap();
        assert_eq!(f.segments()[0].line, f.segments()[1].line);
        assert!((f.evaluate(d(9)).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn mode_parses() {
        assert_eq!(
            "global".parse::<RegressionMode>().unwrap(),
            RegressionMode::Global
        );
        assert!("cubic".parse::<RegressionMode>().is_err());
    }
}
