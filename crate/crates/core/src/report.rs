//! Delimited and plain-text renderings of analysis results.

use std::io::Write;

use csv::WriterBuilder;

use crate::approx::RegressionMode;
use crate::error::Result;
use crate::model::{Correlation, CorrelationResult, Id, StudyDataset};
use crate::pairing::{correlate_participant, correlate_sppb_items, Assessment};
use crate::scoring::TugErratum;
use crate::sim::DayTruth;

pub const CORRELATION_HEADER: [&str; 8] = [
    "participant_id",
    "assessment",
    "rho",
    "p",
    "effect",
    "significant",
    "n_pairs",
    "reason",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub participant_id: Id,
    pub assessment: Assessment,
    pub result: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Analysis {
    /// SPPB, Tinetti13, Tinetti28, TUG per participant.
    pub assessments: Vec<ReportRow>,
    /// SPPB balance, 4 m gait, chair rise per participant.
    pub sppb_items: Vec<ReportRow>,
}

/// Correlates every participant, sorted by (participant, assessment).
pub fn analyze(dataset: &StudyDataset, mode: RegressionMode) -> Analysis {
    let mut out = Analysis::default();
    for p in dataset.participants() {
        let rows = |m: std::collections::BTreeMap<Assessment, CorrelationResult>| {
            m.into_iter().map(|(a, r)| ReportRow {
                participant_id: p.clone(),
                assessment: a,
                result: r,
            })
        };
        out.assessments
            .extend(rows(correlate_participant(dataset, p, mode)));
        out.sppb_items
            .extend(rows(correlate_sppb_items(dataset, p, mode)));
    }
    out
}

const NA: &str = "N/A";

fn fields(row: &ReportRow) -> [String; 8] {
    let (rho, p, effect, sig, reason) = match row.result.outcome {
        Correlation::Computed {
            rho,
            p_value,
            effect,
            significant,
        } => (
            format!("{rho:.4}"),
            format!("{p_value:.4e}"),
            effect.name().to_string(),
            significant.to_string(),
            String::new(),
        ),
        Correlation::NotComputable { reason } => (
            NA.into(),
            NA.into(),
            NA.into(),
            NA.into(),
            reason.reason().to_string(),
        ),
    };
    [
        row.participant_id.to_string(),
        row.assessment.name().to_string(),
        rho,
        p,
        effect,
        sig,
        row.result.n_pairs.to_string(),
        reason,
    ]
}

pub fn write_correlations<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(CORRELATION_HEADER)?;
    for r in rows {
        w.write_record(fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Participant-by-assessment table; `*` marks at least moderate effects.
pub fn render_table(rows: &[ReportRow], columns: &[Assessment]) -> String {
    let mut participants: Vec<&Id> = rows.iter().map(|r| &r.participant_id).collect();
    participants.dedup();
    let width = 22;
    let mut s = format!("{:<6}", "ID");
    for c in columns {
        s.push_str(&format!("{:<width$}", c.name()));
    }
    s.truncate(s.trim_end().len());
    s.push('\n');
    for p in participants {
        s.push_str(&format!("{:<6}", p.as_str()));
        for c in columns {
            let cell = rows
                .iter()
                .find(|r| &r.participant_id == p && r.assessment == *c)
                .map(|r| match r.result.outcome {
                    Correlation::Computed {
                        rho,
                        p_value,
                        effect,
                        ..
                    } => format!(
                        "{rho:+.2}{} (p={p_value:.1e})",
                        if effect.is_notable() { "*" } else { "" }
                    ),
                    Correlation::NotComputable { .. } => "N/A (N/A)".to_string(),
                })
                .unwrap_or_default();
            s.push_str(&format!("{cell:<width$}"));
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
    }
    s.push_str("* moderate or stronger (|rho| >= 0.3)\n");
    s
}

pub fn write_errata<W: Write>(errata: &[TugErratum], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record([
        "participant_id",
        "date",
        "tug_seconds",
        "points_printed",
        "points_computed",
    ])?;
    for e in errata {
        w.write_record([
            e.participant_id.to_string(),
            e.date.to_string(),
            e.tug_seconds.to_string(),
            e.points_printed.to_string(),
            e.points_computed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ground_truth<W: Write>(truth: &[DayTruth], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record([
        "date",
        "relative_intensity",
        "window_probability",
        "expected_activity",
        "observed_activity",
    ])?;
    for d in truth {
        w.write_record([
            d.date.to_string(),
            format!("{:.6}", d.relative_intensity),
            format!("{:.8}", d.window_probability),
            format!("{:.4}", d.expected_activity),
            format!("{:.4}", d.observed_activity()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
