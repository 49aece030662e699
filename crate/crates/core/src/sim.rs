//! Seeded synthetic flats and assessment schedules.
//!
//! Motion is generated per sensor and 8 s window: on study day `d` every
//! window fires independently with probability
//! `p(d) = clamp(base_rate * r(d) / 450, 0, 1)` where
//! `r(d) = max(0, 1 + trend * d / 30)` is the relative intensity and 450 is the
//! number of windows per hour. An event is stamped at the start of its window,
//! so one sensor never fires twice within 8 s.
//!
//! Randomness comes from ChaCha8 seeded with `seed` (`seed_from_u64`):
//! stream 0 drives motion (one draw per day, sensor and window, in that nesting
//! order, firing iff `(next_u64() >> 11) * 2^-53 < p`), stream 1 drives score
//! noise and stream 2 drives visitor presses.

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity::{WINDOWS_PER_DAY, WINDOW_SECONDS};
use crate::error::{Error, Result};
use crate::model::{AssessmentRecord, EventKind, FlatConfig, Id, SensorEvent};
use crate::scoring::tug_points;

pub const WINDOWS_PER_HOUR: f64 = 450.0;

const ROOMS: [&str; 5] = ["kitchen", "living_room", "hallway", "bedroom", "bathroom"];

/// TUG seconds at full and at zero linked intensity.
const TUG_FAST: f64 = 4.0;
const TUG_SPAN: f64 = 18.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_sensors: usize,
    pub study_days: u32,
    /// Expected motion events per sensor-hour at relative intensity 1.
    pub base_rate: f64,
    /// Relative rate change per 30 days.
    pub trend: f64,
    pub assessment_interval_days: u32,
    /// Bound of the uniform integer noise added to every score.
    pub score_noise: u32,
    /// Slope of the link from relative intensity to each score scale.
    pub coupling: f64,
    /// Expected visitor presses per day.
    pub visitor_rate: f64,
    pub start_date: NaiveDate,
    pub flat_id: Id,
    pub tz_offset_minutes: i32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            n_sensors: 5,
            study_days: 300,
            base_rate: 9.0,
            trend: 0.0,
            assessment_interval_days: 31,
            score_noise: 0,
            coupling: 1.0,
            visitor_rate: 0.0,
            start_date: NaiveDate::from_ymd_opt(2014, 7, 1).expect("valid date"),
            flat_id: Id::from("1"),
            tz_offset_minutes: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_sensors < 1 {
            return bad("n_sensors must be >= 1".into());
        }
        if self.study_days < 60 {
            return bad(format!("study_days must be >= 60, got {}", self.study_days));
        }
        if !(self.base_rate >= 0.0 && self.base_rate <= WINDOWS_PER_HOUR) {
            return bad(format!(
                "base_rate must be in [0, {WINDOWS_PER_HOUR}], got {}",
                self.base_rate
            ));
        }
        if !self.trend.is_finite() {
            return bad("trend must be finite".into());
        }
        if self.assessment_interval_days < 1 {
            return bad("assessment interval must be >= 1 day".into());
        }
        if !self.coupling.is_finite() {
            return bad("coupling must be finite".into());
        }
        if !(self.visitor_rate >= 0.0 && self.visitor_rate <= 1.0) {
            return bad(format!(
                "visitor_rate must be in [0, 1], got {}",
                self.visitor_rate
            ));
        }
        Ok(())
    }

    pub fn relative_intensity(&self, day: u32) -> f64 {
        (1.0 + self.trend * day as f64 / 30.0).max(0.0)
    }

    pub fn window_probability(&self, day: u32) -> f64 {
        (self.base_rate * self.relative_intensity(day) / WINDOWS_PER_HOUR).clamp(0.0, 1.0)
    }

    pub fn sensor_ids(&self) -> Vec<Id> {
        (1..=self.n_sensors)
            .map(|i| Id::new(format!("S{i}")))
            .collect()
    }

    pub fn date(&self, day: u32) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    /// Config for the `index`-th flat of a multi-flat study: same parameters,
    /// flat id `index + 1`, seed derived with splitmix64.
    pub fn for_flat(&self, index: u64) -> SimConfig {
        let mut c = self.clone();
        c.seed = splitmix64(self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        c.flat_id = Id::new((index + 1).to_string());
        c
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generator bookkeeping for one study day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTruth {
    pub date: NaiveDate,
    pub relative_intensity: f64,
    pub window_probability: f64,
    /// Expected daily activity, `10800 * p`.
    pub expected_activity: f64,
    /// Occupied windows per sensor, in sensor order.
    pub window_counts: Vec<u32>,
}

impl DayTruth {
    pub fn observed_activity(&self) -> f64 {
        self.window_counts.iter().sum::<u32>() as f64 / self.window_counts.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedFlat {
    pub flat: FlatConfig,
    /// Sorted by timestamp, then sensor.
    pub events: Vec<SensorEvent>,
    pub truth: Vec<DayTruth>,
}

pub fn simulate_flat(config: &SimConfig) -> Result<SimulatedFlat> {
    config.validate()?;
    let sensors = config.sensor_ids();
    let mut flat = FlatConfig::new(config.flat_id.clone(), sensors.iter().cloned())?
        .with_tz_offset(config.tz_offset_minutes);
    for (i, s) in sensors.iter().enumerate() {
        flat = flat.with_room(s.clone(), ROOMS[i % ROOMS.len()]);
    }

    let mut rng = stream(config.seed, 0);
    let mut events = Vec::new();
    let mut truth = Vec::with_capacity(config.study_days as usize);
    for day in 0..config.study_days {
        let p = config.window_probability(day);
        let midnight = config.date(day).and_time(NaiveTime::MIN);
        let mut counts = Vec::with_capacity(sensors.len());
        for s in &sensors {
            let mut c = 0;
            for w in 0..WINDOWS_PER_DAY {
                if unit(&mut rng) < p {
                    c += 1;
                    events.push(SensorEvent::motion(
                        config.flat_id.clone(),
                        s.clone(),
                        midnight + Duration::seconds((w as u32 * WINDOW_SECONDS) as i64),
                    ));
                }
            }
            counts.push(c);
        }
        truth.push(DayTruth {
            date: config.date(day),
            relative_intensity: config.relative_intensity(day),
            window_probability: p,
            expected_activity: WINDOWS_PER_DAY as f64 * p,
            window_counts: counts,
        });
    }

    if config.visitor_rate > 0.0 {
        events.extend(visitor_presses(config));
    }
    events.sort_by(|a, b| (a.timestamp, &a.sensor_id).cmp(&(b.timestamp, &b.sensor_id)));
    Ok(SimulatedFlat {
        flat,
        events,
        truth,
    })
}

/// Enter/leave presses: on each day with probability `visitor_rate` a
/// visitor arrives at a uniform time between 08:00 and 18:00 and stays 1 to
/// 4 hours.
fn visitor_presses(config: &SimConfig) -> Vec<SensorEvent> {
    let mut rng = stream(config.seed, 2);
    let mut out = Vec::new();
    let press = |t: NaiveDateTime, key: u8| SensorEvent {
        flat_id: config.flat_id.clone(),
        sensor_id: Id::from("door"),
        timestamp: t,
        kind: EventKind::OccupancySwitch(key),
    };
    for day in 0..config.study_days {
        let visit = unit(&mut rng) < config.visitor_rate;
        let arrive = 8 * 3600 + (unit(&mut rng) * 10.0 * 3600.0) as i64;
        let stay = 3600 + (unit(&mut rng) * 3.0 * 3600.0) as i64;
        if visit {
            let midnight = config.date(day).and_time(NaiveTime::MIN);
            out.push(press(midnight + Duration::seconds(arrive), 1));
            out.push(press(midnight + Duration::seconds(arrive + stay), 2));
        }
    }
    out
}

fn uniform_noise(rng: &mut ChaCha8Rng, bound: u32) -> i32 {
    if bound == 0 {
        return 0;
    }
    let span = 2 * bound as u64 + 1;
    (rng.next_u64() % span) as i32 - bound as i32
}

/// Linked intensity in `[0, 1]` for a mean relative intensity.
pub fn link(coupling: f64, mean_intensity: f64) -> f64 {
    (1.0 + coupling * (mean_intensity - 1.0)).clamp(0.0, 1.0)
}

/// One record per assessment interval, dated at the interval start.
///
/// Each score is the linked mean relative intensity over its interval,
/// scaled to the score range, rounded, plus uniform integer noise and
/// clamped: SPPB items to `0..=4` (total is their sum), Tinetti13 to
/// `0..=13`, Tinetti28 to `tinetti13..=28`. TUG seconds fall linearly from
/// 22 s to 4 s as the link rises, get noise in whole seconds, are rounded to
/// 0.1 s and floored at 1 s; points follow from [`tug_points`].
pub fn simulate_assessments(truth: &[DayTruth], config: &SimConfig) -> Vec<AssessmentRecord> {
    let mut rng = stream(config.seed, 1);
    let interval = config.assessment_interval_days.max(1) as usize;
    let mut out = Vec::new();
    for (k, chunk) in truth.chunks(interval).enumerate() {
        let mean = chunk.iter().map(|d| d.relative_intensity).sum::<f64>() / chunk.len() as f64;
        let x = link(config.coupling, mean);
        let mut noise = || uniform_noise(&mut rng, config.score_noise);
        let item = |n: i32| ((4.0 * x).round() as i32 + n).clamp(0, 4);
        let (balance, gait, chair) = (item(noise()), item(noise()), item(noise()));
        let t13 = ((13.0 * x).round() as i32 + noise()).clamp(0, 13);
        let t28 = ((28.0 * x).round() as i32 + noise()).clamp(t13, 28);
        let secs = TUG_FAST + TUG_SPAN * (1.0 - x) + noise() as f64;
        let secs = ((secs * 10.0).round() / 10.0).max(1.0);
        let date = config.start_date + Duration::days((k * interval) as i64);
        out.push(AssessmentRecord {
            participant_id: config.flat_id.clone(),
            date,
            sppb_total: Some(balance + gait + chair),
            sppb_balance: Some(balance),
            sppb_gait4m: Some(gait),
            sppb_5crt: Some(chair),
            tinetti13: Some(t13),
            tinetti28: Some(t28),
            tug_seconds: Some(secs),
            tug_points: Some(tug_points(secs).expect("seconds >= 1") as i32),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_record;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            seed,
            n_sensors: 2,
            study_days: 60,
            base_rate: 4.5,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_rate_no_events() {
        let c = SimConfig {
            base_rate: 0.0,
            ..small(1)
        };
        let s = simulate_flat(&c).unwrap();
        assert!(s.events.is_empty());
        assert!(s.truth.iter().all(|d| d.observed_activity() == 0.0));
    }

    #[test]
    fn deterministic() {
        let a = simulate_flat(&small(7)).unwrap();
        let b = simulate_flat(&small(7)).unwrap();
        assert_eq!(a, b);
        let c = simulate_flat(&small(8)).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn bookkeeping_matches_events() {
        let s = simulate_flat(&small(3)).unwrap();
        let total: u32 = s.truth.iter().flat_map(|d| d.window_counts.iter()).sum();
        assert_eq!(total as usize, s.events.len());
    }

    #[test]
    fn invalid_configs() {
        assert!(simulate_flat(&SimConfig {
            base_rate: -1.0,
            ..small(1)
        })
        .is_err());
        assert!(simulate_flat(&SimConfig {
            base_rate: 451.0,
            ..small(1)
        })
        .is_err());
        assert!(simulate_flat(&SimConfig {
            study_days: 59,
            ..small(1)
        })
        .is_err());
        assert!(simulate_flat(&SimConfig {
            n_sensors: 0,
            ..small(1)
        })
        .is_err());
    }

    #[test]
    fn intensity_clamps_at_zero() {
        let c = SimConfig {
            trend: -0.5,
            ..small(1)
        };
        assert_eq!(c.relative_intensity(0), 1.0);
        assert_eq!(c.relative_intensity(60), 0.0);
        assert_eq!(c.relative_intensity(90), 0.0);
    }

    #[test]
    fn declining_scores_without_noise() {
        let c = SimConfig {
            trend: -0.1,
            study_days: 300,
            base_rate: 0.0,
            ..small(1)
        };
        let s = simulate_flat(&c).unwrap();
        let recs = simulate_assessments(&s.truth, &c);
        assert_eq!(recs.len(), 10);
        for w in recs.windows(2) {
            assert!(w[1].sppb_total <= w[0].sppb_total);
            assert!(w[1].tinetti13 <= w[0].tinetti13);
            assert!(w[1].tinetti28 <= w[0].tinetti28);
            assert!(w[1].tug_seconds >= w[0].tug_seconds);
        }
        assert!(recs.iter().all(|r| validate_record(r).is_empty()));
    }

    #[test]
    fn zero_coupling_constant_scores() {
        let c = SimConfig {
            trend: -0.3,
            coupling: 0.0,
            base_rate: 0.0,
            ..small(1)
        };
        let s = simulate_flat(&c).unwrap();
        let recs = simulate_assessments(&s.truth, &c);
        assert!(recs
            .windows(2)
            .all(|w| w[0].sppb_total == w[1].sppb_total && w[0].tug_points == w[1].tug_points));
    }

    #[test]
    fn noisy_records_stay_valid() {
        let c = SimConfig {
            trend: -0.2,
            score_noise: 3,
            base_rate: 0.0,
            study_days: 300,
            ..small(11)
        };
        let s = simulate_flat(&c).unwrap();
        for r in simulate_assessments(&s.truth, &c) {
            assert!(validate_record(&r).is_empty(), "{r:?}");
        }
    }

    #[test]
    fn visitors_produce_intervals() {
        let c = SimConfig {
            visitor_rate: 0.5,
            ..small(5)
        };
        let s = simulate_flat(&c).unwrap();
        let presses = s
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::OccupancySwitch(_)))
            .count();
        assert!(presses > 0 && presses % 2 == 0);
    }

    #[test]
    fn derived_seeds_differ() {
        let c = SimConfig::default();
        assert_ne!(c.for_flat(0).seed, c.for_flat(1).seed);
        assert_eq!(c.for_flat(4).flat_id, Id::from("5"));
    }
}
