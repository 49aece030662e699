//! Per-participant assessment scores of the 12-participant study cohort.
//!
//! Visits are dated every 31 days from a per-participant start
//! (2014-07-01 plus two weeks per participant number); only the month index
//! is published, so the absolute dates are a stand-in. Months after a
//! participant left the study are absent; months with unavailable scores are
//! all-`N/A` rows. SPPB item scores are not published and are `N/A`.

use crate::error::Result;
use crate::ingest::parse_assessment_table;
use crate::model::AssessmentRecord;

pub const ASSESSMENTS_CSV: &str = include_str!("../data/fixture_assessments.csv");

pub fn assessments() -> Result<Vec<AssessmentRecord>> {
    parse_assessment_table(ASSESSMENTS_CSV.as_bytes())
}
