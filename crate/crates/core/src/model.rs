//! Data types shared across the pipeline.
//!
//! Values are immutable once built. Score fields of [`AssessmentRecord`] are
//! `Option`s: a missing visit or item is `None`, never a sentinel number.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque identifier for flats, sensors and participants.
///
/// Ordering is numeric-aware so that participant "10" sorts after "9".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(String);

impl Id {
    pub fn new(s: impl Into<String>) -> Self {
        Id(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric(&self) -> Option<u64> {
        if self.0.is_empty() || !self.0.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        self.0.parse().ok()
    }
}

impl Ord for Id {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for Id {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Id {
    fn from(s: &str) -> Self {
        Id(s.to_string())
    }
}

impl From<String> for Id {
    fn from(s: String) -> Self {
        Id(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Motion,
    BedConcussion,
    /// Front-door switch; the key number is in `1..=4`.
    OccupancySwitch(u8),
    Power,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Motion => "motion",
            EventKind::BedConcussion => "bed_concussion",
            EventKind::OccupancySwitch(_) => "occupancy_switch",
            EventKind::Power => "power",
        }
    }

    pub fn is_motion(&self) -> bool {
        matches!(self, EventKind::Motion)
    }
}

/// One sensor firing. `timestamp` is wall-clock time local to the flat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorEvent {
    pub flat_id: Id,
    pub sensor_id: Id,
    pub timestamp: NaiveDateTime,
    pub kind: EventKind,
}

impl SensorEvent {
    pub fn motion(
        flat_id: impl Into<Id>,
        sensor_id: impl Into<Id>,
        timestamp: NaiveDateTime,
    ) -> Self {
        SensorEvent {
            flat_id: flat_id.into(),
            sensor_id: sensor_id.into(),
            timestamp,
            kind: EventKind::Motion,
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatConfig {
    pub flat_id: Id,
    motion_sensors: BTreeSet<Id>,
    /// Room label per sensor, where known.
    pub rooms: BTreeMap<Id, String>,
    /// Signed minutes east of UTC.
    pub tz_offset_minutes: i32,
}

impl FlatConfig {
    pub fn new(flat_id: impl Into<Id>, sensors: impl IntoIterator<Item = Id>) -> Result<Self> {
        let flat_id = flat_id.into();
        let mut motion_sensors = BTreeSet::new();
        for s in sensors {
            if !motion_sensors.insert(s.clone()) {
                return Err(Error::InvalidConfig(format!(
                    "flat {flat_id}: duplicate sensor id {s}"
                )));
            }
        }
        if motion_sensors.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "flat {flat_id}: at least one motion sensor is required"
            )));
        }
        Ok(FlatConfig {
            flat_id,
            motion_sensors,
            rooms: BTreeMap::new(),
            tz_offset_minutes: 0,
        })
    }

    pub fn with_tz_offset(mut self, minutes: i32) -> Self {
        self.tz_offset_minutes = minutes;
        self
    }

    pub fn with_room(mut self, sensor: impl Into<Id>, room: impl Into<String>) -> Self {
        self.rooms.insert(sensor.into(), room.into());
        self
    }

    pub fn motion_sensors(&self) -> &BTreeSet<Id> {
        &self.motion_sensors
    }

    /// Number of installed motion sensors, the denominator of the daily feature.
    pub fn n_sensors(&self) -> usize {
        self.motion_sensors.len()
    }

    pub fn has_room(&self, room: &str) -> bool {
        self.rooms.values().any(|r| r == room)
    }
}

/// Daily activity of one flat: the mean number of occupied 8 s windows per
/// installed motion sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyActivity {
    pub flat_id: Id,
    pub date: NaiveDate,
    pub value: f64,
    pub per_sensor_window_counts: BTreeMap<Id, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub participant_id: Id,
    pub date: NaiveDate,
    pub sppb_total: Option<i32>,
    pub sppb_balance: Option<i32>,
    pub sppb_gait4m: Option<i32>,
    pub sppb_5crt: Option<i32>,
    pub tinetti13: Option<i32>,
    pub tinetti28: Option<i32>,
    pub tug_seconds: Option<f64>,
    pub tug_points: Option<i32>,
}

impl AssessmentRecord {
    /// A record with every score missing.
    pub fn empty(participant_id: impl Into<Id>, date: NaiveDate) -> Self {
        AssessmentRecord {
            participant_id: participant_id.into(),
            date,
            sppb_total: None,
            sppb_balance: None,
            sppb_gait4m: None,
            sppb_5crt: None,
            tinetti13: None,
            tinetti28: None,
            tug_seconds: None,
            tug_points: None,
        }
    }

    pub fn all_missing(&self) -> bool {
        self.sppb_total.is_none()
            && self.sppb_balance.is_none()
            && self.sppb_gait4m.is_none()
            && self.sppb_5crt.is_none()
            && self.tinetti13.is_none()
            && self.tinetti28.is_none()
            && self.tug_seconds.is_none()
            && self.tug_points.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub observed: String,
    pub allowed: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: observed {}, allowed {}",
            self.field, self.observed, self.allowed
        )
    }
}

fn check_int(out: &mut Vec<Violation>, field: &'static str, v: Option<i32>, lo: i32, hi: i32) {
    if let Some(v) = v {
        if v < lo || v > hi {
            out.push(Violation {
                field,
                observed: v.to_string(),
                allowed: format!("[{lo}, {hi}]"),
            });
        }
    }
}

/// Lists every scale-bound violation of `record`. Missing fields are never
/// violations.
pub fn validate_record(record: &AssessmentRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    check_int(&mut out, "sppb_total", record.sppb_total, 0, 12);
    check_int(&mut out, "sppb_balance", record.sppb_balance, 0, 4);
    check_int(&mut out, "sppb_gait4m", record.sppb_gait4m, 0, 4);
    check_int(&mut out, "sppb_5crt", record.sppb_5crt, 0, 4);
    if let (Some(t), Some(a), Some(b), Some(c)) = (
        record.sppb_total,
        record.sppb_balance,
        record.sppb_gait4m,
        record.sppb_5crt,
    ) {
        if t != a + b + c {
            out.push(Violation {
                field: "sppb_total",
                observed: t.to_string(),
                allowed: format!("sppb_balance + sppb_gait4m + sppb_5crt = {}", a + b + c),
            });
        }
    }
    check_int(&mut out, "tinetti13", record.tinetti13, 0, 13);
    check_int(&mut out, "tinetti28", record.tinetti28, 0, 28);
    if let (Some(t13), Some(t28)) = (record.tinetti13, record.tinetti28) {
        if t28 < t13 {
            out.push(Violation {
                field: "tinetti28",
                observed: t28.to_string(),
                allowed: format!("tinetti28 < tinetti13 ({t13}) is not allowed"),
            });
        }
    }
    if let Some(s) = record.tug_seconds {
        if !(s.is_finite() && s > 0.0) {
            out.push(Violation {
                field: "tug_seconds",
                observed: s.to_string(),
                allowed: "> 0".to_string(),
            });
        }
    }
    check_int(&mut out, "tug_points", record.tug_points, 1, 3);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Negligible,
    Small,
    Moderate,
    Large,
}

impl Effect {
    pub fn name(&self) -> &'static str {
        match self {
            Effect::Negligible => "negligible",
            Effect::Small => "small",
            Effect::Moderate => "moderate",
            Effect::Large => "large",
        }
    }

    /// At least moderate; the report marks these.
    pub fn is_notable(&self) -> bool {
        *self >= Effect::Moderate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotComputable {
    /// The score series is constant.
    ConstantScores,
    /// The fitted activity series is constant.
    ConstantActivity,
    /// A generic input series is constant (library callers without a score/activity split).
    ConstantSeries,
    InsufficientAssessments,
    InsufficientPairs,
    NoActivityData,
}

impl NotComputable {
    pub fn reason(&self) -> &'static str {
        match self {
            NotComputable::ConstantScores => "constant_scores",
            NotComputable::ConstantActivity => "constant_activity",
            NotComputable::ConstantSeries => "constant_series",
            NotComputable::InsufficientAssessments => "insufficient_assessments",
            NotComputable::InsufficientPairs => "insufficient_pairs",
            NotComputable::NoActivityData => "no_activity_data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Correlation {
    Computed {
        rho: f64,
        p_value: f64,
        effect: Effect,
        significant: bool,
    },
    NotComputable {
        reason: NotComputable,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub n_pairs: usize,
    pub outcome: Correlation,
}

impl CorrelationResult {
    pub fn not_computable(n_pairs: usize, reason: NotComputable) -> Self {
        CorrelationResult {
            n_pairs,
            outcome: Correlation::NotComputable { reason },
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match self.outcome {
            Correlation::Computed { rho, .. } => Some(rho),
            Correlation::NotComputable { .. } => None,
        }
    }

    pub fn p_value(&self) -> Option<f64> {
        match self.outcome {
            Correlation::Computed { p_value, .. } => Some(p_value),
            Correlation::NotComputable { .. } => None,
        }
    }

    pub fn is_computable(&self) -> bool {
        matches!(self.outcome, Correlation::Computed { .. })
    }

    pub fn reason(&self) -> Option<NotComputable> {
        match self.outcome {
            Correlation::NotComputable { reason } => Some(reason),
            Correlation::Computed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionEntry {
    pub entity: String,
    pub rule: String,
    pub detail: String,
}

/// Cleaned study data, the output of [`crate::ingest::apply_exclusions`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDataset {
    pub flats: BTreeMap<Id, FlatConfig>,
    /// Events per flat, in input order.
    pub events: BTreeMap<Id, Vec<SensorEvent>>,
    /// Records per participant, strictly increasing in date.
    pub assessments: BTreeMap<Id, Vec<AssessmentRecord>>,
    /// Days with at least one motion event, per flat.
    pub eligible_days: BTreeMap<Id, BTreeSet<NaiveDate>>,
    pub exclusion_log: Vec<ExclusionEntry>,
}

impl StudyDataset {
    /// Participants and flats share identifiers.
    pub fn flat_of(&self, participant: &Id) -> Option<&FlatConfig> {
        self.flats.get(participant)
    }

    pub fn participants(&self) -> impl Iterator<Item = &Id> {
        self.assessments.keys()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 7, 1).unwrap()
    }

    #[test]
    fn maximal_record_is_valid() {
        let mut r = AssessmentRecord::empty("1", date());
        r.sppb_total = Some(12);
        r.sppb_balance = Some(4);
        r.sppb_gait4m = Some(4);
        r.sppb_5crt = Some(4);
        assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn full_tinetti_is_valid() {
        let mut r = AssessmentRecord::empty("5", date());
        r.tinetti13 = Some(13);
        r.tinetti28 = Some(28);
        assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn tinetti_inversion_is_one_violation() {
        let mut r = AssessmentRecord::empty("5", date());
        r.tinetti13 = Some(13);
        r.tinetti28 = Some(12);
        let v = validate_record(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "tinetti28");
        assert!(v[0].allowed.contains("tinetti28 < tinetti13"));
    }

    #[test]
    fn all_missing_is_valid() {
        assert!(validate_record(&AssessmentRecord::empty("6", date())).is_empty());
    }

    #[test]
    fn item_sum_mismatch() {
        let mut r = AssessmentRecord::empty("1", date());
        r.sppb_total = Some(7);
        r.sppb_balance = Some(2);
        r.sppb_gait4m = Some(2);
        r.sppb_5crt = Some(2);
        let v = validate_record(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "sppb_total");
    }

    #[test]
    fn out_of_range_fields() {
        let mut r = AssessmentRecord::empty("1", date());
        r.tinetti28 = Some(40);
        r.tug_seconds = Some(-1.0);
        r.tug_points = Some(4);
        let fields: Vec<_> = validate_record(&r).iter().map(|v| v.field).collect();
        assert_eq!(fields, vec!["tinetti28", "tug_seconds", "tug_points"]);
    }

    #[test]
    fn ids_sort_numerically() {
        let mut ids: Vec<Id> = ["10", "2", "b", "1", "a"]
            .iter()
            .map(|s| Id::from(*s))
            .collect();
        ids.sort();
        let s: Vec<&str> = ids.iter().map(Id::as_str).collect();
        assert_eq!(s, vec!["1", "2", "10", "a", "b"]);
    }

    #[test]
    fn flat_requires_unique_nonempty_sensors() {
        assert!(FlatConfig::new("F1", Vec::<Id>::new()).is_err());
        assert!(FlatConfig::new("F1", vec![Id::from("S1"), Id::from("S1")]).is_err());
        assert_eq!(
            FlatConfig::new("F1", vec![Id::from("S1")])
                .unwrap()
                .n_sensors(),
            1
        );
    }

    #[test]
    fn effect_order() {
        assert!(Effect::Moderate.is_notable());
        assert!(Effect::Large.is_notable());
        assert!(!Effect::Small.is_notable());
    }
}
