//! Correlating ambient motion-sensor activity with geriatric mobility
//! assessment scores.
//!
//! The pipeline turns raw motion events into a daily activity feature
//! ([`activity`]), approximates both the activity and the assessment scores
//! with piecewise linear functions ([`approx`]), samples them on common days
//! ([`pairing`]) and correlates the samples with ties-aware Spearman's rho
//! ([`stats`]). [`sim`] generates seeded synthetic flats for end-to-end checks.

pub mod activity;
pub mod approx;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod model;
pub mod pairing;
pub mod report;
pub mod scoring;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    AssessmentRecord, Correlation, CorrelationResult, DailyActivity, Effect, EventKind, FlatConfig,
    Id, NotComputable, SensorEvent, StudyDataset,
};
