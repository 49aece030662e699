//! Browser bindings. Each export returns a JSON string; failures come back as
//! `{"error": "..."}`.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use mobilitycorr::approx::{spline_interpolate, RegressionMode};
use mobilitycorr::fixture;
use mobilitycorr::ingest::{apply_exclusions, ExclusionConfig};
use mobilitycorr::model::{AssessmentRecord, Correlation, CorrelationResult, Id};
use mobilitycorr::pairing::{
    build_paired_series, correlate_participant, correlate_sppb_items, knots, participant_activity,
    Assessment,
};
use mobilitycorr::sim::{simulate_assessments, simulate_flat, SimConfig};
use mobilitycorr::stats::{
    assign_ranks, classify_effect, p_value_permutation, p_value_t_approx, spearman_rho,
    PermutationMode, EXACT_PERMUTATION_MAX_N,
};

#[derive(Debug, Serialize)]
pub struct CorrelationView {
    pub assessment: String,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub effect: Option<&'static str>,
    pub significant: Option<bool>,
    pub n_pairs: usize,
    pub reason: Option<&'static str>,
}

impl CorrelationView {
    fn new(assessment: Assessment, r: &CorrelationResult) -> Self {
        let (rho, p, effect, significant) = match r.outcome {
            Correlation::Computed {
                rho,
                p_value,
                effect,
                significant,
            } => (
                Some(rho),
                Some(p_value),
                Some(effect.name()),
                Some(significant),
            ),
            Correlation::NotComputable { .. } => (None, None, None, None),
        };
        CorrelationView {
            assessment: assessment.name().to_string(),
            rho,
            p,
            effect,
            significant,
            n_pairs: r.n_pairs,
            reason: r.reason().map(|n| n.reason()),
        }
    }
}

/// Per-day curves for one assessment of the simulated participant.
#[derive(Debug, Serialize)]
pub struct PairedView {
    pub assessment: String,
    pub dates: Vec<NaiveDate>,
    pub score: Vec<f64>,
    pub activity: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SimulationView {
    pub dates: Vec<NaiveDate>,
    pub activity: Vec<f64>,
    pub expected: Vec<f64>,
    pub assessment_dates: Vec<NaiveDate>,
    pub paired: Vec<PairedView>,
    pub correlations: Vec<CorrelationView>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub seed: u64,
    pub days: u32,
    pub sensors: usize,
    pub base_rate: f64,
    pub trend: f64,
    pub noise: u32,
    pub coupling: f64,
}

/// Simulates one flat, runs the full pipeline and returns the daily series,
/// the paired curves and the correlations.
pub fn simulate_and_correlate(params: SimParams) -> Result<SimulationView, String> {
    let config = SimConfig {
        seed: params.seed,
        study_days: params.days,
        n_sensors: params.sensors,
        base_rate: params.base_rate,
        trend: params.trend,
        score_noise: params.noise,
        coupling: params.coupling,
        ..SimConfig::default()
    };
    let sim = simulate_flat(&config).map_err(|e| e.to_string())?;
    let records = simulate_assessments(&sim.truth, &config);
    let dataset = apply_exclusions(
        &sim.events,
        &records,
        std::slice::from_ref(&sim.flat),
        &ExclusionConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let p = config.flat_id.clone();
    let series = participant_activity(&dataset, &p).map_err(|e| e.to_string())?;

    let mut paired = Vec::new();
    let mut correlations = Vec::new();
    let results = correlate_participant(&dataset, &p, RegressionMode::Piecewise);
    let items = correlate_sppb_items(&dataset, &p, RegressionMode::Piecewise);
    for (a, r) in results.iter().chain(&items) {
        correlations.push(CorrelationView::new(*a, r));
        if let Ok(s) = build_paired_series(&dataset, &p, *a, RegressionMode::Piecewise) {
            paired.push(PairedView {
                assessment: a.name().to_string(),
                dates: s.pairs.iter().map(|q| q.0).collect(),
                score: s.scores(),
                activity: s.activity(),
            });
        }
    }
    let observed: BTreeSet<NaiveDate> = series.dates().collect();
    Ok(SimulationView {
        dates: series.dates().collect(),
        activity: series.points.iter().map(|d| d.value).collect(),
        expected: sim
            .truth
            .iter()
            .filter(|t| observed.contains(&t.date))
            .map(|t| t.expected_activity)
            .collect(),
        assessment_dates: records.iter().map(|r| r.date).collect(),
        paired,
        correlations,
    })
}

#[derive(Debug, Serialize)]
pub struct CurveView {
    pub participant: String,
    pub assessment: String,
    pub knots: Vec<(NaiveDate, f64)>,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

fn assessment_by_name(name: &str) -> Result<Assessment, String> {
    Assessment::MAIN
        .into_iter()
        .chain(Assessment::SPPB_ITEMS)
        .find(|a| a.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| format!("unknown assessment `{name}`"))
}

/// Participants of the bundled score table, in id order.
pub fn fixture_participants() -> Result<Vec<String>, String> {
    let records = fixture::assessments().map_err(|e| e.to_string())?;
    let mut ids: Vec<Id> = records.into_iter().map(|r| r.participant_id).collect();
    ids.dedup();
    Ok(ids.into_iter().map(|i| i.to_string()).collect())
}

/// Score knots of one fixture participant and their daily spline.
pub fn fixture_curve(participant: &str, assessment: &str) -> Result<CurveView, String> {
    let a = assessment_by_name(assessment)?;
    let records: Vec<AssessmentRecord> = fixture::assessments()
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|r| r.participant_id.as_str() == participant)
        .collect();
    if records.is_empty() {
        return Err(format!("no participant `{participant}`"));
    }
    let k = knots(&records, a);
    let spline =
        spline_interpolate(&k).map_err(|e| format!("{} {}: {e}", participant, a.name()))?;
    let (lo, hi) = spline.domain();
    let dates: Vec<NaiveDate> = lo.iter_days().take_while(|d| *d <= hi).collect();
    let values = dates
        .iter()
        .map(|d| spline.evaluate(*d).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(CurveView {
        participant: participant.to_string(),
        assessment: a.name().to_string(),
        knots: k,
        dates,
        values,
    })
}

#[derive(Debug, Serialize)]
pub struct SpearmanView {
    pub x_ranks: Vec<f64>,
    pub y_ranks: Vec<f64>,
    pub rho: Option<f64>,
    pub effect: Option<&'static str>,
    pub p_t: Option<f64>,
    pub p_exact: Option<f64>,
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split([',', ' ', ';', '\n'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: `{t}`")))
        .collect()
}

/// Ranks, rho and both p-values for two comma-separated lists.
pub fn spearman(x: &str, y: &str) -> Result<SpearmanView, String> {
    let (x, y) = (parse_list(x)?, parse_list(y)?);
    let rho = spearman_rho(&x, &y).map_err(|e| e.to_string())?;
    let n = x.len();
    let p_t = match rho {
        Some(r) if n >= 4 => Some(p_value_t_approx(r, n).map_err(|e| e.to_string())?),
        _ => None,
    };
    let p_exact = if n <= EXACT_PERMUTATION_MAX_N {
        p_value_permutation(&x, &y, PermutationMode::Exact).map_err(|e| e.to_string())?
    } else {
        None
    };
    Ok(SpearmanView {
        x_ranks: assign_ranks(&x),
        y_ranks: assign_ranks(&y),
        rho,
        effect: rho.map(|r| classify_effect(r).name()),
        p_t,
        p_exact,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    let v = r.and_then(|v| serde_json::to_value(v).map_err(|e| e.to_string()));
    match v {
        Ok(v) => v.to_string(),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = simulateAndCorrelate)]
#[allow(clippy::too_many_arguments)]
pub fn simulate_and_correlate_js(
    seed: u32,
    days: u32,
    sensors: u32,
    base_rate: f64,
    trend: f64,
    noise: u32,
    coupling: f64,
) -> String {
    to_json(simulate_and_correlate(SimParams {
        seed: seed as u64,
        days,
        sensors: sensors as usize,
        base_rate,
        trend,
        noise,
        coupling,
    }))
}

#[wasm_bindgen(js_name = fixtureParticipants)]
pub fn fixture_participants_js() -> String {
    to_json(fixture_participants())
}

#[wasm_bindgen(js_name = fixtureCurve)]
pub fn fixture_curve_js(participant: &str, assessment: &str) -> String {
    to_json(fixture_curve(participant, assessment))
}

#[wasm_bindgen(js_name = spearman)]
pub fn spearman_js(x: &str, y: &str) -> String {
    to_json(spearman(x, y))
}
