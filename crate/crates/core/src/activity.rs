//! Daily activity feature.
//!
//! A day is split into 10800 half-open windows of 8 s aligned to local
//! midnight. For each installed motion sensor we count the windows holding at
//! least one event (several events in one window count once), sum the counts
//! over sensors and divide by the number of installed sensors. Sensors that
//! stayed silent still count in the denominator. Non-motion events are
//! ignored.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DailyActivity, FlatConfig, Id, SensorEvent};

pub const WINDOW_SECONDS: u32 = 8;
pub const WINDOWS_PER_DAY: usize = 10800;

const WORDS: usize = WINDOWS_PER_DAY.div_ceil(64);

/// Window of a flat-local timestamp, in `0..10800`.
pub fn window_index(local: NaiveDateTime) -> usize {
    (local.num_seconds_from_midnight() / WINDOW_SECONDS) as usize
}

/// Window of a UTC instant for a flat `tz_offset_minutes` east of UTC.
pub fn window_index_utc(instant: DateTime<Utc>, tz_offset_minutes: i32) -> usize {
    window_index(to_local(instant, tz_offset_minutes))
}

pub fn to_local(instant: DateTime<Utc>, tz_offset_minutes: i32) -> NaiveDateTime {
    instant.naive_utc() + Duration::minutes(tz_offset_minutes as i64)
}

/// Fixed-size occupancy bitmap over the windows of one day.
struct WindowSet([u64; WORDS]);

impl WindowSet {
    fn new() -> Self {
        WindowSet([0; WORDS])
    }

    fn insert(&mut self, w: usize) {
        self.0[w / 64] |= 1 << (w % 64);
    }

    fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

/// Activity feature of one flat-day.
///
/// Every event must be on `date` and, if it is a motion event, come from a
/// configured motion sensor of `flat`.
pub fn daily_activity(
    date: NaiveDate,
    events: &[SensorEvent],
    flat: &FlatConfig,
) -> Result<DailyActivity> {
    let mut windows: BTreeMap<&Id, WindowSet> = flat
        .motion_sensors()
        .iter()
        .map(|s| (s, WindowSet::new()))
        .collect();

    for e in events {
        if e.flat_id != flat.flat_id {
            return Err(Error::UnknownFlat(e.flat_id.to_string()));
        }
        if e.date() != date {
            return Err(Error::WrongDay {
                expected: date.to_string(),
                found: e.date().to_string(),
            });
        }
        if !e.kind.is_motion() {
            continue;
        }
        let set = windows
            .get_mut(&e.sensor_id)
            .ok_or_else(|| Error::UnknownSensor {
                flat: flat.flat_id.to_string(),
                sensor: e.sensor_id.to_string(),
            })?;
        set.insert(window_index(e.timestamp));
    }

    let per_sensor_window_counts: BTreeMap<Id, u32> = windows
        .into_iter()
        .map(|(s, set)| (s.clone(), set.len()))
        .collect();
    let total: u32 = per_sensor_window_counts.values().sum();
    Ok(DailyActivity {
        flat_id: flat.flat_id.clone(),
        date,
        value: total as f64 / flat.n_sensors() as f64,
        per_sensor_window_counts,
    })
}

/// Daily activity values of one flat, in date order. Days without motion
/// events are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySeries {
    pub flat_id: Id,
    pub points: Vec<DailyActivity>,
}

impl ActivitySeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.points.iter().map(|p| p.date)
    }

    /// Keeps only points whose date satisfies `keep`.
    pub fn retain_dates(&mut self, mut keep: impl FnMut(NaiveDate) -> bool) {
        self.points.retain(|p| keep(p.date));
    }
}

/// Builds the daily series of `flat` over `days`. Events of other flats,
/// non-motion events, and events outside `days` are ignored.
pub fn activity_series(
    events: &[SensorEvent],
    flat: &FlatConfig,
    days: RangeInclusive<NaiveDate>,
) -> Result<ActivitySeries> {
    let mut by_day: BTreeMap<NaiveDate, Vec<SensorEvent>> = BTreeMap::new();
    for e in events {
        if e.flat_id == flat.flat_id && e.kind.is_motion() && days.contains(&e.date()) {
            by_day.entry(e.date()).or_default().push(e.clone());
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
