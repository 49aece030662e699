//! Assessment scoring rules and cut-offs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssessmentRecord, Id};

/// TUG points from seconds: `<= 10` is 1, `(10, 20)` is 2, `>= 20` is 3.
/// Times above 30 s also score 3.
pub fn tug_points(seconds: f64) -> Result<u8> {
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(Error::OutOfRange {
            what: "tug seconds",
            value: seconds.to_string(),
        });
    }
    Ok(if seconds <= 10.0 {
        1
    } else if seconds < 20.0 {
        2
    } else {
        3
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SppbCategory {
    Low,
    Middle,
    High,
}

pub fn sppb_category(total: i32) -> Result<SppbCategory> {
    match total {
        0..=6 => Ok(SppbCategory::Low),
        7..=9 => Ok(SppbCategory::Middle),
        10..=12 => Ok(SppbCategory::High),
        _ => Err(Error::OutOfRange {
            what: "sppb total",
            value: total.to_string(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallRisk {
    HighRisk,
    ModerateRisk,
    LowRisk,
}

pub fn tinetti_fall_risk(total: i32) -> Result<FallRisk> {
    match total {
        0..=18 => Ok(FallRisk::HighRisk),
        19..=23 => Ok(FallRisk::ModerateRisk),
        24..=28 => Ok(FallRisk::LowRisk),
        _ => Err(Error::OutOfRange {
            what: "tinetti total",
            value: total.to_string(),
        }),
    }
}

/// True iff the category changes anywhere in the series.
pub fn crossed_cutoff<C: PartialEq>(series: &[C]) -> bool {
    series.windows(2).any(|w| w[0] != w[1])
}

/// A fixture row whose printed TUG points disagree with [`tug_points`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TugErratum {
    pub participant_id: Id,
    pub date: chrono::NaiveDate,
    pub tug_seconds: f64,
    pub points_printed: i32,
    pub points_computed: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TugAudit {
    /// Records carrying both seconds and printed points.
    pub pairs: usize,
    pub errata: Vec<TugErratum>,
}

impl TugAudit {
    pub fn agreement(&self) -> f64 {
        if self.pairs == 0 {
            return 1.0;
        }
        (self.pairs - self.errata.len()) as f64 / self.pairs as f64
    }
}

/// Compares printed TUG points with the computed mapping. Records with
/// non-positive seconds are skipped; `validate_record` reports those.
pub fn tug_audit<'a>(records: impl IntoIterator<Item = &'a AssessmentRecord>) -> TugAudit {
    let mut audit = TugAudit::default();
    for r in records {
        let (Some(s), Some(printed)) = (r.tug_seconds, r.tug_points) else {
            continue;
        };
        let Ok(computed) = tug_points(s) else {
            continue;
        };
        audit.pairs += 1;
        if computed as i32 != printed {
            audit.errata.push(TugErratum {
                participant_id: r.participant_id.clone(),
                date: r.date,
                tug_seconds: s,
                points_printed: printed,
                points_computed: computed,
            });
        }
    }
    audit
}
