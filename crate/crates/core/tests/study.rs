//! Fixture, exclusion and pairing behaviour on whole datasets.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveTime};

use mobilitycorr::approx::RegressionMode;
use mobilitycorr::fixture;
use mobilitycorr::ingest::{apply_exclusions, rules, ExclusionConfig};
use mobilitycorr::model::{
    AssessmentRecord, FlatConfig, Id, NotComputable, SensorEvent, StudyDataset,
};
use mobilitycorr::pairing::{
    cohort_summary, correlate_participant, correlate_sppb_items, knots, Assessment, Measure,
};
use mobilitycorr::scoring::{crossed_cutoff, sppb_category, tug_audit};
use mobilitycorr::sim::{simulate_assessments, simulate_flat, SimConfig};
use mobilitycorr::Error;

fn by_participant(records: Vec<AssessmentRecord>) -> BTreeMap<Id, Vec<AssessmentRecord>> {
    let mut m: BTreeMap<Id, Vec<AssessmentRecord>> = BTreeMap::new();
    for r in records {
        m.entry(r.participant_id.clone()).or_default().push(r);
    }
    m
}

fn day(n: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 7, 1).unwrap() + Duration::days(n)
}

fn noon(d: NaiveDate) -> chrono::NaiveDateTime {
    d.and_time(NaiveTime::from_hms_opt(12, 0, 0).unwrap())
}

#[test]
fn fixture_shape() {
    let m = by_participant(fixture::assessments().unwrap());
    assert_eq!(m.len(), 12);
    assert_eq!(m[&Id::from("9")].len(), 3);
    assert_eq!(m[&Id::from("8")].len(), 8);
    assert!(m[&Id::from("6")][6].all_missing());
    assert!(m.values().flatten().all(|r| r.sppb_balance.is_none()));
    for recs in m.values() {
        assert!(recs.windows(2).all(|w| w[0].date < w[1].date));
    }
}

#[test]
fn fixture_cutoff_crossings() {
    let m = by_participant(fixture::assessments().unwrap());
    let p8: Vec<i32> = m[&Id::from("8")]
        .iter()
        .filter_map(|r| r.sppb_total)
        .collect();
    assert_eq!(p8, vec![6, 10, 9, 11, 10, 9, 9, 11]);
    let cats: Vec<_> = p8.iter().map(|t| sppb_category(*t).unwrap()).collect();
    assert!(crossed_cutoff(&cats));

    let p1: Vec<i32> = m[&Id::from("1")]
        .iter()
        .filter_map(|r| r.tug_points)
        .collect();
    assert!(p1.iter().all(|p| *p == 3));
    assert!(!crossed_cutoff(&p1));
}

#[test]
fn fixture_errata_are_boundary_rows() {
    let audit = tug_audit(&fixture::assessments().unwrap());
    let rows: Vec<(String, f64, i32)> = audit
        .errata
        .iter()
        .map(|e| {
            (
                e.participant_id.to_string(),
                e.tug_seconds,
                e.points_printed,
            )
        })
        .collect();
    assert_eq!(
        rows,
        vec![
            ("6".into(), 19.0, 3),
            ("6".into(), 19.9, 3),
            ("9".into(), 20.1, 2),
            ("11".into(), 19.6, 3),
            ("12".into(), 19.6, 3),
        ]
    );
}

#[test]
fn fixture_spline_midpoint() {
    let m = by_participant(fixture::assessments().unwrap());
    let k = knots(&m[&Id::from("1")], Assessment::Tinetti13);
    let s = mobilitycorr::approx::spline_interpolate(&k).unwrap();
    let (d0, v0) = k[0];
    let (d1, v1) = k[1];
    let mid = d0 + (d1 - d0) / 2;
    let lambda = (mid - d0).num_days() as f64 / (d1 - d0).num_days() as f64;
    assert!((s.evaluate(mid).unwrap() - (v0 + lambda * (v1 - v0))).abs() < 1e-9);
}

#[test]
fn fixture_first_visit_summary() {
    let m = by_participant(fixture::assessments().unwrap());
    let s = cohort_summary(&m, 0).unwrap();
    assert_eq!(s[&Measure::SppbTotal].n, 12);
    assert!(!s.contains_key(&Measure::SppbBalance));
    let t = &s[&Measure::TugSeconds];
    assert!(t.min <= t.mean && t.mean <= t.max);
    assert!(matches!(cohort_summary(&m, 50), Err(Error::EmptyCohort)));
}

/// One flat "1" with a single sensor and one event at noon on each listed day.
fn one_flat(days: &[i64]) -> (Vec<SensorEvent>, Vec<FlatConfig>) {
    let events = days
        .iter()
        .map(|d| SensorEvent::motion("1", "S1", noon(day(*d))))
        .collect();
    (
        events,
        vec![FlatConfig::new("1", vec![Id::from("S1")]).unwrap()],
    )
}

#[test]
fn coverage_rule_drops_idle_participant() {
    // Participant 2 has a flat but no events across a 280-day span.
    let (events, mut flats) = one_flat(&(0..280).collect::<Vec<_>>());
    flats.push(FlatConfig::new("2", vec![Id::from("S1")]).unwrap());
    let records = vec![
        AssessmentRecord::empty("1", day(0)),
        AssessmentRecord::empty("1", day(279)),
        AssessmentRecord::empty("2", day(0)),
        AssessmentRecord::empty("2", day(279)),
    ];
    let config = ExclusionConfig {
        min_participant_coverage: 0.5,
        ..ExclusionConfig::default()
    };
    let ds = apply_exclusions(&events, &records, &flats, &config).unwrap();
    let coverage: Vec<_> = ds
        .exclusion_log
        .iter()
        .filter(|e| e.rule == rules::COVERAGE)
        .collect();
    assert_eq!(coverage.len(), 1);
    assert!(coverage[0].entity.contains('2'));
    assert!(!ds.assessments.contains_key(&Id::from("2")));
    assert!(ds.assessments.contains_key(&Id::from("1")));
}

#[test]
fn zero_event_day_is_not_eligible() {
    let (events, flats) = one_flat(&[0, 2]);
    let records = vec![
        AssessmentRecord::empty("1", day(0)),
        AssessmentRecord::empty("1", day(2)),
    ];
    let ds = apply_exclusions(&events, &records, &flats, &ExclusionConfig::default()).unwrap();
    let eligible: Vec<_> = ds.eligible_days[&Id::from("1")].iter().copied().collect();
    assert_eq!(eligible, vec![day(0), day(2)]);
    assert!(ds
        .exclusion_log
        .iter()
        .any(|e| e.rule == rules::ZERO_EVENT_DAY && e.entity.contains(&day(1).to_string())));
}

#[test]
fn unknown_flat_is_an_error() {
    let (mut events, flats) = one_flat(&[0]);
    events.push(SensorEvent::motion("99", "S1", noon(day(0))));
    let err = apply_exclusions(&events, &[], &flats, &ExclusionConfig::default()).unwrap_err();
    assert!(matches!(err, Error::UnknownFlat(_)), "{err:?}");
}

fn simulated(config: &SimConfig) -> (Vec<SensorEvent>, Vec<AssessmentRecord>, Vec<FlatConfig>) {
    let sim = simulate_flat(config).unwrap();
    let records = simulate_assessments(&sim.truth, config);
    (sim.events, records, vec![sim.flat])
}

#[test]
fn clean_synthetic_input_logs_nothing() {
    let config = SimConfig {
        n_sensors: 2,
        study_days: 90,
        ..SimConfig::default()
    };
    let (events, records, flats) = simulated(&config);
    let ds = apply_exclusions(&events, &records, &flats, &ExclusionConfig::default()).unwrap();
    assert!(ds.exclusion_log.is_empty(), "{:?}", ds.exclusion_log);
}

fn flatten(ds: &StudyDataset) -> (Vec<SensorEvent>, Vec<AssessmentRecord>, Vec<FlatConfig>) {
    (
        ds.events.values().flatten().cloned().collect(),
        ds.assessments.values().flatten().cloned().collect(),
        ds.flats.values().cloned().collect(),
    )
}

#[test]
fn exclusions_are_idempotent() {
    let config = SimConfig {
        n_sensors: 2,
        study_days: 120,
        trend: -0.3,
        visitor_rate: 0.5,
        ..SimConfig::default()
    };
    let (events, records, flats) = simulated(&config);
    let ex = ExclusionConfig {
        min_participant_coverage: 0.2,
        drop_multi_occupancy_intervals: true,
        ..ExclusionConfig::default()
    };
    let once = apply_exclusions(&events, &records, &flats, &ex).unwrap();
    assert!(!once.exclusion_log.is_empty());
    let (e2, r2, f2) = flatten(&once);
    let twice = apply_exclusions(&e2, &r2, &f2, &ex).unwrap();
    assert_eq!(once.events, twice.events);
    assert_eq!(once.assessments, twice.assessments);
    assert_eq!(once.flats, twice.flats);
    assert_eq!(once.eligible_days, twice.eligible_days);
    assert!(twice
        .exclusion_log
        .iter()
        .all(|e| e.rule == rules::ZERO_EVENT_DAY));
}

#[test]
fn required_rooms_drop_flat() {
    let (events, flats) = one_flat(&[0, 1, 2]);
    let flats: Vec<FlatConfig> = flats
        .into_iter()
        .map(|f| f.with_room("S1", "kitchen"))
        .collect();
    let records = vec![
        AssessmentRecord::empty("1", day(0)),
        AssessmentRecord::empty("1", day(2)),
    ];
    let config = ExclusionConfig {
        required_sensor_rooms: Some(["bathroom".to_string()].into()),
        ..ExclusionConfig::default()
    };
    let ds = apply_exclusions(&events, &records, &flats, &config).unwrap();
    assert!(ds.assessments.is_empty());
    assert_eq!(ds.exclusion_log[0].rule, rules::REQUIRED_ROOMS);
}

#[test]
fn items_equal_to_a_third_of_total_share_its_rho() {
    let config = SimConfig {
        seed: 3,
        n_sensors: 3,
        study_days: 300,
        trend: -0.08,
        score_noise: 0,
        ..SimConfig::default()
    };
    let (events, records, flats) = simulated(&config);
    assert!(records
        .iter()
        .all(|r| r.sppb_total == r.sppb_balance.map(|b| 3 * b)));
    let ds = apply_exclusions(&events, &records, &flats, &ExclusionConfig::default()).unwrap();
    let p = Id::from("1");
    let total = correlate_participant(&ds, &p, RegressionMode::Piecewise)[&Assessment::Sppb]
        .rho()
        .unwrap();
    for (a, r) in correlate_sppb_items(&ds, &p, RegressionMode::Piecewise) {
        assert!((r.rho().unwrap() - total).abs() < 1e-9, "{a}");
    }
}

#[test]
fn declining_items_give_identical_rho() {
    // Three visits, every item stepping down; activity declines in step.
    let dates = [day(0), day(31), day(62)];
    let records: Vec<AssessmentRecord> = dates
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let v = 3 - k as i32;
            AssessmentRecord {
                sppb_total: Some(3 * v),
                sppb_balance: Some(v),
                sppb_gait4m: Some(v),
                sppb_5crt: Some(v),
                ..AssessmentRecord::empty("9", *d)
            }
        })
        .collect();
    let flat = FlatConfig::new("9", vec![Id::from("S1")]).unwrap();
    let mut events = Vec::new();
    for d in 0..=62 {
        for w in 0..(400 - 5 * d) {
            let t = day(d).and_time(NaiveTime::MIN) + Duration::seconds(8 * w);
            events.push(SensorEvent::motion("9", "S1", t));
        }
    }
    let ds = apply_exclusions(&events, &records, &[flat], &ExclusionConfig::default()).unwrap();
    let items = correlate_sppb_items(&ds, &Id::from("9"), RegressionMode::Piecewise);
    let rhos: Vec<f64> = items.values().map(|r| r.rho().unwrap()).collect();
    assert_eq!(rhos.len(), 3);
    assert!(rhos.iter().all(|r| (r - rhos[0]).abs() < 1e-12));
    assert!(rhos[0] > 0.9);
}

#[test]
fn zero_coupling_is_not_computable() {
    let config = SimConfig {
        n_sensors: 2,
        study_days: 120,
        coupling: 0.0,
        trend: -0.2,
        ..SimConfig::default()
    };
    let (events, records, flats) = simulated(&config);
    let ds = apply_exclusions(&events, &records, &flats, &ExclusionConfig::default()).unwrap();
    let res = correlate_participant(&ds, &Id::from("1"), RegressionMode::Piecewise);
    assert_eq!(res.len(), 4);
    assert!(res
        .values()
        .all(|r| r.reason() == Some(NotComputable::ConstantScores)));
}

#[test]
fn global_mode_still_recovers_decline() {
    let config = SimConfig {
        seed: 5,
        n_sensors: 3,
        study_days: 300,
        trend: -0.08,
        ..SimConfig::default()
    };
    let (events, records, flats) = simulated(&config);
    let ds = apply_exclusions(&events, &records, &flats, &ExclusionConfig::default()).unwrap();
    let res = correlate_participant(&ds, &Id::from("1"), RegressionMode::Global);
    assert!(res[&Assessment::Sppb].rho().unwrap() >= 0.9);
    // Three-level TUG points tie heavily, so its bound is looser.
    assert!(res[&Assessment::Tug].rho().unwrap() <= -0.8, "{res:?}");
}
