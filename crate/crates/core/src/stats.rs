//! Spearman rank correlation with mid-rank ties, p-values and effect classes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{Correlation, CorrelationResult, Effect, NotComputable};

/// Significance threshold; a result is significant iff `p < ALPHA`.
pub const ALPHA: f64 = 0.001;

/// Tolerance used when comparing permuted statistics against the observed one.
const PERM_EPS: f64 = 1e-12;

/// Ascending ranks starting at 1. Tied values share the mean of the ranks
/// they span.
pub fn assign_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

fn centered(ranks: &[f64]) -> Vec<f64> {
    let mean = (ranks.len() as f64 + 1.0) / 2.0;
    ranks.iter().map(|r| r - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pearson correlation of two centered rank vectors, `None` if either has
/// zero variance.
fn rank_pearson(cx: &[f64], cy: &[f64]) -> Option<f64> {
    let sxx = dot(cx, cx);
    let syy = dot(cy, cy);
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((dot(cx, cy) / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(Error::InsufficientSample {
            needed: min,
            got: x.len(),
        });
    }
    Ok(())
}

/// Spearman's rho as the Pearson correlation of mid-ranks.
///
/// Returns `Ok(None)` when either series is constant, where rho is undefined.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y, 3)?;
    Ok(rank_pearson(
        &centered(&assign_ranks(x)),
        &centered(&assign_ranks(y)),
    ))
}

/// Two-sided p-value of `rho` from `t = rho * sqrt((n - 2) / (1 - rho^2))`
/// against Student's t with `n - 2` degrees of freedom.
pub fn p_value_t_approx(rho: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::InsufficientSample { needed: 4, got: n });
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::OutOfRange {
            what: "rho",
            value: rho.to_string(),
        });
    }
    if rho.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = rho.abs() * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    Ok((2.0 * dist.sf(t)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationMode {
    /// Enumerate all `n!` orderings; `n <= 8`.
    Exact,
    /// Random orderings drawn from a ChaCha8 stream seeded with `seed`.
    MonteCarlo { samples: usize, seed: u64 },
}

pub const EXACT_PERMUTATION_MAX_N: usize = 8;

/// Fraction of orderings of `y` whose |rho| reaches the observed |rho|.
///
/// `Ok(None)` when rho is undefined (a constant series).
pub fn p_value_permutation(x: &[f64], y: &[f64], mode: PermutationMode) -> Result<Option<f64>> {
    check_pair(x, y, 3)?;
    let n = x.len();
    if mode == PermutationMode::Exact && n > EXACT_PERMUTATION_MAX_N {
        return Err(Error::UseMonteCarlo(n));
    }
    let cx = centered(&assign_ranks(x));
    let mut cy = centered(&assign_ranks(y));
    let Some(observed) = rank_pearson(&cx, &cy) else {
        return Ok(None);
    };
    let threshold = observed.abs() - PERM_EPS;
    let norm = (dot(&cx, &cx) * dot(&cy, &cy)).sqrt();
    let stat = |cy: &[f64]| (dot(&cx, cy) / norm).abs();

    let p = match mode {
        PermutationMode::Exact => {
            // Heap's algorithm, iterative form.
            let mut hits = 0u64;
            let mut total = 1u64;
            if stat(&cy) >= threshold {
                hits += 1;
            }
            let mut c = vec![0usize; n];
            let mut i = 1;
            while i < n {
                if c[i] < i {
                    if i % 2 == 0 {
                        cy.swap(0, i);
                    } else {
                        cy.swap(c[i], i);
                    }
                    total += 1;
                    if stat(&cy) >= threshold {
                        hits += 1;
                    }
                    c[i] += 1;
                    i = 1;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
            hits as f64 / total as f64
        }
        PermutationMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidConfig("monte-carlo needs samples > 0".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hits = 0u64;
            for _ in 0..samples {
                cy.shuffle(&mut rng);
                if stat(&cy) >= threshold {
                    hits += 1;
                }
            }
            hits as f64 / samples as f64
        }
    };
    Ok(Some(p))
}

/// Cohen's bands on |rho|; 0.1, 0.3 and 0.5 belong to the upper class.
pub fn classify_effect(rho: f64) -> Effect {
    let a = rho.abs();
    if !(a >= 0.1) {
        Effect::Negligible
    } else if a < 0.3 {
        Effect::Small
    } else if a < 0.5 {
        Effect::Moderate
    } else {
        Effect::Large
    }
}

pub fn is_significant(p: f64) -> bool {
    p < ALPHA
}

/// Full correlation result for two aligned series: rho, t-approximation
/// p-value, effect class and significance.
pub fn correlate(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 4 {
        return Ok(CorrelationResult::not_computable(
            n,
            NotComputable::InsufficientPairs,
        ));
    }
    let Some(rho) = spearman_rho(x, y)? else {
        return Ok(CorrelationResult::not_computable(
            n,
            NotComputable::ConstantSeries,
        ));
    };
    let p_value = p_value_t_approx(rho, n)?;
    Ok(CorrelationResult {
        n_pairs: n,
        outcome: Correlation::Computed {
            rho,
            p_value,
            effect: classify_effect(rho),
            significant: is_significant(p_value),
        },
    })
}
