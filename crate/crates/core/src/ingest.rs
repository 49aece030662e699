//! Reading and cleaning study data.
//!
//! File formats (UTF-8, comma-delimited, header row required):
//!
//! * event log: `flat_id,sensor_id,timestamp,kind[,key]`, timestamps are
//!   flat-local ISO-8601 (`2014-07-01T08:00:00`), `key` is required for
//!   `occupancy_switch` rows;
//! * assessment table: `participant_id,date,sppb_total,sppb_balance,
//!   sppb_gait4m,sppb_5crt,tinetti13,tinetti28,tug_seconds,tug_points`,
//!   with literal `N/A` for a missing score;
//! * flat configuration: `flat_id,sensor_id,room,tz_offset_minutes`, one row
//!   per installed motion sensor; `room` may be empty.
//!
//! Malformed rows fail the whole file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::error::{Error, Result};
use crate::model::{
    AssessmentRecord, EventKind, ExclusionEntry, FlatConfig, Id, SensorEvent, StudyDataset,
};

pub const EVENT_HEADER: &str = "flat_id,sensor_id,timestamp,kind[,key]";
pub const ASSESSMENT_HEADER: &str =
    "participant_id,date,sppb_total,sppb_balance,sppb_gait4m,sppb_5crt,tinetti13,tinetti28,tug_seconds,tug_points";
pub const FLATS_HEADER: &str = "flat_id,sensor_id,room,tz_offset_minutes";
pub const MISSING: &str = "N/A";

const TIMESTAMP_FORMATS: [&str; 2] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"];

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads all records, checking the header against `expected` columns.
fn records<R: Read>(
    input: R,
    expected: &[&str],
    optional_tail: usize,
    header_text: &'static str,
) -> Result<Vec<StringRecord>> {
    let mut rdr = reader(input);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Err(Error::MissingHeader),
        Some(h) => h?,
    };
    let cols: Vec<&str> = header.iter().collect();
    let required = expected.len() - optional_tail;
    if cols.len() < required
        || cols.len() > expected.len()
        || cols.iter().zip(expected).any(|(a, b)| a != b)
    {
        return Err(Error::BadHeader {
            line: line_of(&header),
            expected: header_text,
        });
    }
    let mut out = Vec::new();
    for r in rows {
        let r = r?;
        if r.iter().all(str::is_empty) {
            continue;
        }
        if r.len() < required || r.len() > expected.len() {
            return Err(Error::Parse {
                line: line_of(&r),
                field: "row",
                message: format!(
                    "expected {} to {} columns, got {}",
                    required,
                    expected.len(),
                    r.len()
                ),
            });
        }
        out.push(r);
    }
    Ok(out)
}

fn parse_err(line: u64, field: &'static str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field,
        message: message.into(),
    }
}

fn days_in_month(y: i32, m: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(y, m, 1).expect("valid month");
    let next = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days() as u32
}

/// Explains why `s` is not a `YYYY-MM-DD` date.
fn diagnose_date(s: &str) -> String {
    let parts: Vec<&str> = s.split('-').collect();
    if parts.len() != 3 {
        return format!("invalid date `{s}`");
    }
    let (Ok(y), Ok(m), Ok(d)) = (
        parts[0].parse::<i32>(),
        parts[1].parse::<u32>(),
        parts[2].parse::<u32>(),
    ) else {
        return format!("invalid date `{s}`");
    };
    if !(1..=12).contains(&m) {
        return "invalid month".into();
    }
    if d == 0 || d > days_in_month(y, m) {
        return "invalid day".into();
    }
    format!("invalid date `{s}`")
}

fn diagnose_time(s: &str) -> String {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return format!("invalid time `{s}`");
    }
    let sec = parts[2].split('.').next().unwrap_or("");
    match (
        parts[0].parse::<u32>(),
        parts[1].parse::<u32>(),
        sec.parse::<u32>(),
    ) {
        (Ok(h), _, _) if h > 23 => "invalid hour".into(),
        (_, Ok(m), _) if m > 59 => "invalid minute".into(),
        (_, _, Ok(s)) if s > 59 => "invalid second".into(),
        _ => format!("invalid time `{s}`"),
    }
}

pub fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| diagnose_date(s))
}

pub fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, String> {
    for f in TIMESTAMP_FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Ok(t);
        }
    }
    let Some((date, time)) = s.split_once(['T', ' ']) else {
        return Err(format!("invalid timestamp `{s}`"));
    };
    parse_date(date)?;
    Err(diagnose_time(time))
}

fn parse_kind(line: u64, kind: &str, key: Option<&str>) -> Result<EventKind> {
    match kind {
        "motion" => Ok(EventKind::Motion),
        "bed_concussion" => Ok(EventKind::BedConcussion),
        "power" => Ok(EventKind::Power),
        "occupancy_switch" => {
            let key = key
                .filter(|k| !k.is_empty())
                .ok_or_else(|| parse_err(line, "key", "occupancy_switch requires a key"))?;
            match key.parse::<u8>() {
                Ok(k @ 1..=4) => Ok(EventKind::OccupancySwitch(k)),
                _ => Err(parse_err(line, "key", format!("key `{key}` not in 1..4"))),
            }
        }
        other => Err(Error::UnknownKind {
            line,
            kind: other.to_string(),
        }),
    }
}

/// One [`SensorEvent`] per data row, in input order.
pub fn parse_event_log<R: Read>(input: R) -> Result<Vec<SensorEvent>> {
    let rows = records(
        input,
        &["flat_id", "sensor_id", "timestamp", "kind", "key"],
        1,
        EVENT_HEADER,
    )?;
    rows.iter()
        .map(|r| {
            let line = line_of(r);
            let flat = &r[0];
            let sensor = &r[1];
            if flat.is_empty() {
                return Err(parse_err(line, "flat_id", "empty identifier"));
            }
            if sensor.is_empty() {
                return Err(parse_err(line, "sensor_id", "empty identifier"));
            }
            let timestamp = parse_timestamp(&r[2]).map_err(|m| parse_err(line, "timestamp", m))?;
            let kind = parse_kind(line, &r[3], r.get(4))?;
            Ok(SensorEvent {
                flat_id: Id::from(flat),
                sensor_id: Id::from(sensor),
                timestamp,
                kind,
            })
        })
        .collect()
}

fn opt_int(line: u64, field: &'static str, s: &str) -> Result<Option<i32>> {
    if s == MISSING {
        return Ok(None);
    }
    s.parse::<i32>()
        .map(Some)
        .map_err(|_| parse_err(line, field, format!("non-integer points `{s}`")))
}

/// Records ordered by (participant, date). `N/A` cells become `None`.
pub fn parse_assessment_table<R: Read>(input: R) -> Result<Vec<AssessmentRecord>> {
    let cols: Vec<&str> = ASSESSMENT_HEADER.split(',').collect();
    let rows = records(input, &cols, 0, ASSESSMENT_HEADER)?;
    let mut out: Vec<(u64, AssessmentRecord)> = Vec::with_capacity(rows.len());
    for r in &rows {
        let line = line_of(r);
        if r[0].is_empty() {
            return Err(parse_err(line, "participant_id", "empty identifier"));
        }
        let date = parse_date(&r[1]).map_err(|m| parse_err(line, "date", m))?;
        let tug_seconds = match &r[8] {
            MISSING => None,
            s => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| parse_err(line, "tug_seconds", format!("not a number `{s}`")))?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(parse_err(
                        line,
                        "tug_seconds",
                        format!("seconds must be positive, got {s}"),
                    ));
                }
                Some(v)
            }
        };
        out.push((
            line,
            AssessmentRecord {
                participant_id: Id::from(&r[0]),
                date,
                sppb_total: opt_int(line, "sppb_total", &r[2])?,
                sppb_balance: opt_int(line, "sppb_balance", &r[3])?,
                sppb_gait4m: opt_int(line, "sppb_gait4m", &r[4])?,
                sppb_5crt: opt_int(line, "sppb_5crt", &r[5])?,
                tinetti13: opt_int(line, "tinetti13", &r[6])?,
                tinetti28: opt_int(line, "tinetti28", &r[7])?,
                tug_seconds,
                tug_points: opt_int(line, "tug_points", &r[9])?,
            },
        ));
    }
    out.sort_by(|a, b| (&a.1.participant_id, a.1.date).cmp(&(&b.1.participant_id, b.1.date)));
    for w in out.windows(2) {
        if w[0].1.participant_id == w[1].1.participant_id && w[0].1.date == w[1].1.date {
            let (line, r) = if w[0].0 > w[1].0 { &w[0] } else { &w[1] };
            return Err(Error::DuplicateRecord {
                line: *line,
                participant: r.participant_id.to_string(),
                date: r.date.to_string(),
            });
        }
    }
    Ok(out.into_iter().map(|(_, r)| r).collect())
}

/// Flat configurations ordered by flat id.
pub fn parse_flats<R: Read>(input: R) -> Result<Vec<FlatConfig>> {
    let cols: Vec<&str> = FLATS_HEADER.split(',').collect();
    let rows = records(input, &cols, 0, FLATS_HEADER)?;
    let mut grouped: BTreeMap<Id, (i32, Vec<(Id, String)>)> = BTreeMap::new();
    for r in &rows {
        let line = line_of(r);
        if r[0].is_empty() {
            return Err(parse_err(line, "flat_id", "empty identifier"));
        }
        if r[1].is_empty() {
            return Err(parse_err(line, "sensor_id", "empty identifier"));
        }
        let tz: i32 = r[3].parse().map_err(|_| {
            parse_err(
                line,
                "tz_offset_minutes",
                format!("not an integer `{}`", &r[3]),
            )
        })?;
        if tz.abs() > 24 * 60 {
            return Err(parse_err(
                line,
                "tz_offset_minutes",
                format!("offset {tz} out of range"),
            ));
        }
        let entry = grouped.entry(Id::from(&r[0])).or_insert((tz, Vec::new()));
        if entry.0 != tz {
            return Err(parse_err(
                line,
                "tz_offset_minutes",
                "inconsistent offset within flat",
            ));
        }
        if entry.1.iter().any(|(s, _)| s.as_str() == &r[1]) {
            return Err(parse_err(
                line,
                "sensor_id",
                format!("duplicate sensor `{}`", &r[1]),
            ));
        }
        entry.1.push((Id::from(&r[1]), r[2].to_string()));
    }
    grouped
        .into_iter()
        .map(|(flat, (tz, sensors))| {
            let mut f =
                FlatConfig::new(flat, sensors.iter().map(|(s, _)| s.clone()))?.with_tz_offset(tz);
            for (s, room) in sensors {
                if !room.is_empty() {
                    f = f.with_room(s, room);
                }
            }
            Ok(f)
        })
        .collect()
}

fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMATS[0]).to_string()
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string())
        .unwrap_or_else(|| MISSING.to_string())
}

pub fn write_event_log<W: Write>(events: &[SensorEvent], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["flat_id", "sensor_id", "timestamp", "kind", "key"])?;
    for e in events {
        let key = match e.kind {
            EventKind::OccupancySwitch(k) => k.to_string(),
            _ => String::new(),
        };
        w.write_record([
            e.flat_id.as_str(),
            e.sensor_id.as_str(),
            &format_timestamp(&e.timestamp),
            e.kind.name(),
            &key,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_assessment_table<W: Write>(records: &[AssessmentRecord], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(ASSESSMENT_HEADER.split(','))?;
    for r in records {
        w.write_record([
            r.participant_id.to_string(),
            r.date.format("%Y-%m-%d").to_string(),
            cell(r.sppb_total),
            cell(r.sppb_balance),
            cell(r.sppb_gait4m),
            cell(r.sppb_5crt),
            cell(r.tinetti13),
            cell(r.tinetti28),
            cell(r.tug_seconds),
            cell(r.tug_points),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_flats<W: Write>(flats: &[FlatConfig], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(FLATS_HEADER.split(','))?;
    for f in flats {
        for s in f.motion_sensors() {
            w.write_record([
                f.flat_id.as_str(),
                s.as_str(),
                f.rooms.get(s).map(String::as_str).unwrap_or(""),
                &f.tz_offset_minutes.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Meaning of the four front-door switch keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccupancyKeys {
    pub enter_visitor: u8,
    pub leave_visitor: u8,
    pub resident_out: u8,
    pub resident_home: u8,
}

impl Default for OccupancyKeys {
    fn default() -> Self {
        OccupancyKeys {
            enter_visitor: 1,
            leave_visitor: 2,
            resident_out: 3,
            resident_home: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Occupancy {
    /// Maximal closed intervals with more than one person present.
    pub intervals: Vec<(NaiveDateTime, NaiveDateTime)>,
    pub warnings: Vec<String>,
}

impl Occupancy {
    pub fn covers(&self, t: NaiveDateTime) -> bool {
        self.intervals.iter().any(|(a, b)| *a <= t && t <= *b)
    }
}

/// Sweeps the switch presses of one flat, counting people present. The
/// resident starts at home. An interval still open at the end of the stream
/// closes at the last event timestamp.
pub fn occupancy_intervals(events: &[SensorEvent], keys: OccupancyKeys) -> Occupancy {
    let mut presses: Vec<(NaiveDateTime, u8)> = events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::OccupancySwitch(k) => Some((e.timestamp, k)),
            _ => None,
        })
        .collect();
    presses.sort_by_key(|p| p.0);

    let mut out = Occupancy::default();
    let mut visitors: u32 = 0;
    let mut resident = true;
    let mut open: Option<NaiveDateTime> = None;
    for (t, k) in presses {
        if k == keys.enter_visitor {
            visitors += 1;
        } else if k == keys.leave_visitor {
            if visitors == 0 {
                out.warnings
                    .push(format!("{t}: visitor left without entering"));
            } else {
                visitors -= 1;
            }
        } else if k == keys.resident_out {
            if !resident {
                out.warnings.push(format!("{t}: resident left while away"));
            }
            resident = false;
        } else if k == keys.resident_home {
            if resident {
                out.warnings
                    .push(format!("{t}: resident returned while home"));
            }
            resident = true;
        } else {
            out.warnings.push(format!("{t}: unmapped key {k}"));
        }
        let present = visitors + resident as u32;
        match (open, present > 1) {
            (None, true) => open = Some(t),
            (Some(start), false) => {
                out.intervals.push((start, t));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        let end = events.iter().map(|e| e.timestamp).max().unwrap_or(start);
        out.warnings
            .push(format!("{start}: visitor never left, closing at {end}"));
        out.intervals.push((start, end));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionConfig {
    pub exclude_zero_event_days: bool,
    /// Minimum fraction of a participant's study days with motion events.
    pub min_participant_coverage: f64,
    /// Rooms every flat must have a sensor in.
    pub required_sensor_rooms: Option<BTreeSet<String>>,
    pub drop_multi_occupancy_intervals: bool,
    pub occupancy_keys: OccupancyKeys,
}

impl Default for ExclusionConfig {
    fn default() -> Self {
        ExclusionConfig {
            exclude_zero_event_days: true,
            min_participant_coverage: 0.0,
            required_sensor_rooms: None,
            drop_multi_occupancy_intervals: false,
            occupancy_keys: OccupancyKeys::default(),
        }
    }
}

impl ExclusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_participant_coverage) {
            return Err(Error::InvalidConfig(format!(
                "min_participant_coverage {} not in [0, 1]",
                self.min_participant_coverage
            )));
        }
        Ok(())
    }
}

pub mod rules {
    pub const ZERO_EVENT_DAY: &str = "zero_event_day";
    pub const COVERAGE: &str = "coverage";
    pub const REQUIRED_ROOMS: &str = "required_rooms";
    pub const MULTI_OCCUPANCY: &str = "multi_occupancy";
}

/// Motion sensors re-arm 8 s after firing.
pub const COOL_DOWN: Duration = Duration::seconds(8);

/// Two motion events of one sensor closer together than [`COOL_DOWN`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoolDownViolation {
    pub flat_id: Id,
    pub sensor_id: Id,
    pub first: NaiveDateTime,
    pub second: NaiveDateTime,
}

/// Consecutive motion events of the same sensor that break the cool-down.
/// These are reported, not removed; the activity feature caps them anyway.
pub fn cool_down_violations(events: &[SensorEvent]) -> Vec<CoolDownViolation> {
    let mut by_sensor: BTreeMap<(&Id, &Id), Vec<NaiveDateTime>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind.is_motion()) {
        by_sensor
            .entry((&e.flat_id, &e.sensor_id))
            .or_default()
            .push(e.timestamp);
    }
    let mut out = Vec::new();
    for ((flat, sensor), mut ts) in by_sensor {
        ts.sort();
        for w in ts.windows(2) {
            if w[1] - w[0] < COOL_DOWN {
                out.push(CoolDownViolation {
                    flat_id: flat.clone(),
                    sensor_id: sensor.clone(),
                    first: w[0],
                    second: w[1],
                });
            }
        }
    }
    out
}

fn day_range(lo: NaiveDate, hi: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    (0..=(hi - lo).num_days()).map(move |k| lo + Duration::days(k))
}

/// Applies the exclusion rules and returns the cleaned dataset.
///
/// A participant's study span runs from their first to their last assessment
/// date; flats without assessments use the span of their events. Participants
/// and flats share identifiers.
pub fn apply_exclusions(
    events: &[SensorEvent],
    assessments: &[AssessmentRecord],
    flats: &[FlatConfig],
    config: &ExclusionConfig,
) -> Result<StudyDataset> {
    config.validate()?;
    let mut log = Vec::new();

    let mut flat_map: BTreeMap<Id, FlatConfig> = BTreeMap::new();
    for f in flats {
        if flat_map.insert(f.flat_id.clone(), f.clone()).is_some() {
            return Err(Error::InvalidConfig(format!(
                "flat {} configured twice",
                f.flat_id
            )));
        }
    }

    let mut by_flat: BTreeMap<Id, Vec<SensorEvent>> = BTreeMap::new();
    for e in events {
        let flat = flat_map
            .get(&e.flat_id)
            .ok_or_else(|| Error::UnknownFlat(e.flat_id.to_string()))?;
        if e.kind.is_motion() && !flat.motion_sensors().contains(&e.sensor_id) {
            return Err(Error::UnknownSensor {
                flat: e.flat_id.to_string(),
                sensor: e.sensor_id.to_string(),
            });
        }
        by_flat
            .entry(e.flat_id.clone())
            .or_default()
            .push(e.clone());
    }

    let mut by_participant: BTreeMap<Id, Vec<AssessmentRecord>> = BTreeMap::new();
    for r in assessments {
        by_participant
            .entry(r.participant_id.clone())
            .or_default()
            .push(r.clone());
    }
    for (p, recs) in by_participant.iter_mut() {
        recs.sort_by_key(|r| r.date);
        if let Some(w) = recs.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::DuplicateRecord {
                line: 0,
                participant: p.to_string(),
                date: w[0].date.to_string(),
            });
        }
    }

    let drop_participant =
        |pid: &Id,
         rule: &str,
         detail: String,
         log: &mut Vec<ExclusionEntry>,
         flat_map: &mut BTreeMap<Id, FlatConfig>,
         by_flat: &mut BTreeMap<Id, Vec<SensorEvent>>,
         by_participant: &mut BTreeMap<Id, Vec<AssessmentRecord>>| {
            log.push(ExclusionEntry {
                entity: format!("participant {pid}"),
                rule: rule.to_string(),
                detail,
            });
            flat_map.remove(pid);
            by_flat.remove(pid);
            by_participant.remove(pid);
        };

    if let Some(rooms) = &config.required_sensor_rooms {
        let failing: Vec<(Id, Vec<String>)> = by_participant
            .keys()
            .filter_map(|p| {
                let missing: Vec<String> = match flat_map.get(p) {
                    Some(f) => rooms.iter().filter(|r| !f.has_room(r)).cloned().collect(),
                    None => rooms.iter().cloned().collect(),
                };
                (!missing.is_empty()).then(|| (p.clone(), missing))
            })
            .collect();
        for (p, missing) in failing {
            drop_participant(
                &p,
                rules::REQUIRED_ROOMS,
                format!("no sensor in {}", missing.join(", ")),
                &mut log,
                &mut flat_map,
                &mut by_flat,
                &mut by_participant,
            );
        }
    }

    if config.drop_multi_occupancy_intervals {
        for (flat, evs) in by_flat.iter_mut() {
            let occ = occupancy_intervals(evs, config.occupancy_keys);
            if occ.intervals.is_empty() {
                continue;
            }
            evs.retain(|e| {
                let drop = e.kind.is_motion() && occ.covers(e.timestamp);
                if drop {
                    log.push(ExclusionEntry {
                        entity: format!(
                            "event {flat}/{}@{}",
                            e.sensor_id,
                            format_timestamp(&e.timestamp)
                        ),
                        rule: rules::MULTI_OCCUPANCY.to_string(),
                        detail: "motion during multi-occupancy".into(),
                    });
                }
                !drop
            });
        }
    }

    let motion_days = |evs: &[SensorEvent]| -> BTreeSet<NaiveDate> {
        evs.iter()
            .filter(|e| e.kind.is_motion())
            .map(|e| e.date())
            .collect()
    };

    let span_of = |flat: &Id,
                   by_participant: &BTreeMap<Id, Vec<AssessmentRecord>>,
                   days: &BTreeSet<NaiveDate>|
     -> Option<(NaiveDate, NaiveDate)> {
        match by_participant.get(flat) {
            Some(recs) if !recs.is_empty() => Some((recs[0].date, recs[recs.len() - 1].date)),
            _ => Some((*days.first()?, *days.last()?)),
        }
    };

    if config.min_participant_coverage > 0.0 {
        let failing: Vec<(Id, String)> = by_participant
            .iter()
            .filter_map(|(p, recs)| {
                let (lo, hi) = (recs[0].date, recs[recs.len() - 1].date);
                let total = (hi - lo).num_days() + 1;
                let covered = by_flat
                    .get(p)
                    .map(|evs| motion_days(evs).range(lo..=hi).count())
                    .unwrap_or(0);
                let coverage = covered as f64 / total as f64;
                (coverage < config.min_participant_coverage).then(|| {
                    (
                        p.clone(),
                        format!(
                            "activity on {covered} of {total} study days ({coverage:.3} < {})",
                            config.min_participant_coverage
                        ),
                    )
                })
            })
            .collect();
        for (p, detail) in failing {
            drop_participant(
                &p,
                rules::COVERAGE,
                detail,
                &mut log,
                &mut flat_map,
                &mut by_flat,
                &mut by_participant,
            );
        }
    }

    let mut eligible_days = BTreeMap::new();
    for flat in flat_map.keys() {
        let evs = by_flat.get(flat).map(Vec::as_slice).unwrap_or(&[]);
        let mut days = motion_days(evs);
        if let Some((lo, hi)) = span_of(flat, &by_participant, &days) {
            for d in day_range(lo, hi) {
                if days.contains(&d) {
                    continue;
                }
                if config.exclude_zero_event_days {
                    log.push(ExclusionEntry {
                        entity: format!("flat {flat} day {d}"),
                        rule: rules::ZERO_EVENT_DAY.to_string(),
                        detail: "no motion events".into(),
                    });
                } else {
                    days.insert(d);
                }
            }
        }
        eligible_days.insert(flat.clone(), days);
    }

    Ok(StudyDataset {
        flats: flat_map,
        events: by_flat,
        assessments: by_participant,
        eligible_days,
        exclusion_log: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    #[test]
    fn header_only_event_log() {
        let ev = parse_event_log("flat_id,sensor_id,timestamp,kind,key\n".as_bytes()).unwrap();
        assert!(ev.is_empty());
        let ev = parse_event_log("flat_id,sensor_id,timestamp,kind\n".as_bytes()).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn single_event_row() {
        let ev = parse_event_log(
            "flat_id,sensor_id,timestamp,kind\nF1,S3,2014-07-01T08:00:00,motion\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(
            ev,
            vec![SensorEvent::motion("F1", "S3", t("2014-07-01T08:00:00"))]
        );
    }

    #[test]
    fn invalid_month_names_line() {
        let err = parse_event_log(
            "flat_id,sensor_id,timestamp,kind\nF1,S3,2014-13-01T00:00:00,motion\n".as_bytes(),
        )
        .unwrap_err();
        assert!(
            err.to_string().starts_with("line 2: invalid month"),
            "{err}"
        );
    }

    #[test]
    fn timestamp_diagnostics() {
        assert_eq!(
            parse_timestamp("2014-02-30T00:00:00").unwrap_err(),
            "invalid day"
        );
        assert_eq!(
            parse_timestamp("2014-02-01T25:00:00").unwrap_err(),
            "invalid hour"
        );
        assert!(parse_timestamp("yesterday").is_err());
        assert!(parse_timestamp("2014-07-01 08:00:00").is_ok());
    }

    #[test]
    fn unknown_kind_lists_allowed() {
        let err = parse_event_log(
            "flat_id,sensor_id,timestamp,kind\nF1,S3,2014-07-01T08:00:00,door\n".as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownKind { line: 2, .. }));
        assert!(err
            .to_string()
            .contains("motion, bed_concussion, occupancy_switch, power"));
    }

    #[test]
    fn switch_needs_key() {
        let src =
            "flat_id,sensor_id,timestamp,kind,key\nF1,D,2014-07-01T08:00:00,occupancy_switch,\n";
        assert!(parse_event_log(src.as_bytes()).is_err());
        let src =
            "flat_id,sensor_id,timestamp,kind,key\nF1,D,2014-07-01T08:00:00,occupancy_switch,3\n";
        assert_eq!(
            parse_event_log(src.as_bytes()).unwrap()[0].kind,
            EventKind::OccupancySwitch(3)
        );
    }

    #[test]
    fn empty_input_is_missing_header() {
        assert_eq!(parse_event_log("".as_bytes()), Err(Error::MissingHeader));
        assert_eq!(
            parse_assessment_table("".as_bytes()),
            Err(Error::MissingHeader)
        );
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            parse_event_log("a,b,c,d\n".as_bytes()),
            Err(Error::BadHeader { .. })
        ));
    }

    #[test]
    fn assessment_rows() {
        let src = format!(
            "{ASSESSMENT_HEADER}\n2,2014-08-01,8,N/A,N/A,N/A,11,25,14.5,2\n1,2014-07-01,3,N/A,N/A,N/A,5,14,31.6,3\n"
        );
        let recs = parse_assessment_table(src.as_bytes()).unwrap();
        assert_eq!(recs[0].participant_id, Id::from("1"));
        assert_eq!(recs[0].tug_seconds, Some(31.6));
        assert_eq!(recs[1].sppb_balance, None);
    }

    #[test]
    fn assessment_row_errors() {
        let bad_int = format!("{ASSESSMENT_HEADER}\n1,2014-07-01,3.5,N/A,N/A,N/A,5,14,31.6,3\n");
        let e = parse_assessment_table(bad_int.as_bytes()).unwrap_err();
        assert!(matches!(
            e,
            Error::Parse {
                line: 2,
                field: "sppb_total",
                ..
            }
        ));
        let neg = format!("{ASSESSMENT_HEADER}\n1,2014-07-01,3,N/A,N/A,N/A,5,14,-2,3\n");
        let e = parse_assessment_table(neg.as_bytes()).unwrap_err();
        assert!(matches!(
            e,
            Error::Parse {
                field: "tug_seconds",
                ..
            }
        ));
        let dup = format!(
            "{ASSESSMENT_HEADER}\n1,2014-07-01,3,N/A,N/A,N/A,5,14,20,3\n1,2014-07-01,3,N/A,N/A,N/A,5,14,20,3\n"
        );
        assert!(matches!(
            parse_assessment_table(dup.as_bytes()),
            Err(Error::DuplicateRecord { line: 3, .. })
        ));
    }

    #[test]
    fn flats_file() {
        let src = format!("{FLATS_HEADER}\nF1,S1,kitchen,60\nF1,S2,,60\nF2,S1,hall,0\n");
        let flats = parse_flats(src.as_bytes()).unwrap();
        assert_eq!(flats.len(), 2);
        assert_eq!(flats[0].n_sensors(), 2);
        assert!(flats[0].has_room("kitchen"));
        assert_eq!(flats[0].tz_offset_minutes, 60);
        let mixed = format!("{FLATS_HEADER}\nF1,S1,kitchen,60\nF1,S2,,0\n");
        assert!(parse_flats(mixed.as_bytes()).is_err());
    }

    fn switch(ts: &str, key: u8) -> SensorEvent {
        SensorEvent {
            flat_id: Id::from("F1"),
            sensor_id: Id::from("door"),
            timestamp: t(ts),
            kind: EventKind::OccupancySwitch(key),
        }
    }

    #[test]
    fn cool_down_is_flagged_per_sensor() {
        let ev = [
            SensorEvent::motion("1", "S1", t("2014-07-01T08:00:00")),
            SensorEvent::motion("1", "S2", t("2014-07-01T08:00:03")),
            SensorEvent::motion("1", "S1", t("2014-07-01T08:00:07.500")),
            SensorEvent::motion("1", "S1", t("2014-07-01T08:00:15.500")),
        ];
        let v = cool_down_violations(&ev);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].sensor_id, Id::from("S1"));
        assert_eq!(v[0].second, t("2014-07-01T08:00:07.500"));
    }

    #[test]
    fn occupancy_vacuous() {
        let occ = occupancy_intervals(&[], OccupancyKeys::default());
        assert!(occ.intervals.is_empty());
    }

    #[test]
    fn occupancy_single_pair() {
        let ev = [
            switch("2014-07-01T00:01:40", 1),
            switch("2014-07-01T00:08:20", 2),
        ];
        let occ = occupancy_intervals(&ev, OccupancyKeys::default());
        assert_eq!(occ.intervals, vec![(ev[0].timestamp, ev[1].timestamp)]);
        assert!(occ.warnings.is_empty());
    }

    #[test]
    fn occupancy_nested_visitors() {
        let ev = [
            switch("2014-07-01T00:01:40", 1),
            switch("2014-07-01T00:03:20", 1),
            switch("2014-07-01T00:05:00", 2),
            switch("2014-07-01T00:06:40", 2),
        ];
        let occ = occupancy_intervals(&ev, OccupancyKeys::default());
        assert_eq!(occ.intervals, vec![(ev[0].timestamp, ev[3].timestamp)]);
    }

    #[test]
    fn occupancy_unmatched_enter_closes_at_stream_end() {
        let ev = [
            switch("2014-07-01T10:00:00", 1),
            SensorEvent::motion("F1", "S1", t("2014-07-01T12:00:00")),
        ];
        let occ = occupancy_intervals(&ev, OccupancyKeys::default());
        assert_eq!(occ.intervals, vec![(ev[0].timestamp, ev[1].timestamp)]);
        assert_eq!(occ.warnings.len(), 1);
    }

    #[test]
    fn occupancy_unmatched_leave_warns() {
        let ev = [switch("2014-07-01T10:00:00", 2)];
        let occ = occupancy_intervals(&ev, OccupancyKeys::default());
        assert!(occ.intervals.is_empty());
        assert_eq!(occ.warnings.len(), 1);
    }
}
