//! Precision@k / max@k evaluation, class-weighted aggregation, sensor and
//! set-size sweeps, the random-guess baseline, and the sensor-weight grid
//! search.
//!
//! Everything here consumes cached score tables: similarities are
//! weight-independent, so DTW runs once per (instance, sensor) and each
//! weight vector only re-ranks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::ScoreTable;
use crate::dtw::DtwConfig;
use crate::ranking::{rank_candidates, RankedList, RankingMethod};
use crate::types::{AffectiveClass, LogicalSensor, WeightVector};

/// Tolerance against 1.0 when locating max@k on weighted curves; convex
/// combinations of exact 1.0s must still register as 1.0.
pub const MAX_AT_K_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("truth handle {0} missing from ranked list")]
    TruthMissing(String),
    #[error("no ranked lists to evaluate")]
    EmptyInput,
    #[error("reports disagree on {0}")]
    MismatchedReports(String),
    #[error("class weights invalid: {0}")]
    BadClassWeights(String),
    #[error("missing report for class {0}")]
    MissingClass(AffectiveClass),
    #[error("grid step {0} does not divide 1.0 exactly")]
    BadGridStep(f64),
}

/// Per-class weights for the weighted-mean aggregation; non-negative,
/// summing to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub neutral: f64,
    pub stress: f64,
    pub amusement: f64,
}

impl ClassWeights {
    pub fn new(neutral: f64, stress: f64, amusement: f64) -> Result<Self, EvalError> {
        for w in [neutral, stress, amusement] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(EvalError::BadClassWeights(format!("negative weight {w}")));
            }
        }
        let sum = neutral + stress + amusement;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::BadClassWeights(format!("sum {sum} != 1")));
        }
        Ok(ClassWeights {
            neutral,
            stress,
            amusement,
        })
    }

    pub fn component(&self, class: AffectiveClass) -> f64 {
        match class {
            AffectiveClass::Neutral => self.neutral,
            AffectiveClass::Stress => self.stress,
            AffectiveClass::Amusement => self.amusement,
        }
    }
}

impl Default for ClassWeights {
    /// Average appearance of the classes in the reference data.
    fn default() -> Self {
        ClassWeights {
            neutral: 0.53,
            stress: 0.30,
            amusement: 0.17,
        }
    }
}

/// Self-describing record of the configuration a report was computed under.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigDescriptor {
    pub method: Option<RankingMethod>,
    pub class_policy: Option<String>,
    pub weights: Option<WeightVector>,
    pub snippet_fraction: Option<f64>,
    pub dtw: Option<DtwConfig>,
}

/// P@k curve over k = 1..N plus max@k for one evaluation configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionReport {
    pub descriptor: ConfigDescriptor,
    /// p_at_k[k-1] is P@k; non-decreasing, ends at 1.0.
    pub p_at_k: Vec<f64>,
    /// Smallest k with P@k = 1.0.
    pub max_at_k: usize,
    pub n_targets: usize,
    /// Targets dropped because their class-filtered data was absent.
    pub n_skipped: usize,
}

impl PrecisionReport {
    pub fn p(&self, k: usize) -> f64 {
        self.p_at_k[k - 1]
    }

    pub fn n_candidates(&self) -> usize {
        self.p_at_k.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p_at_k\n");
        for (i, p) in self.p_at_k.iter().enumerate() {
            out.push_str(&format!("{},{p}\n", i + 1));
        }
        out
    }
}

fn max_at_k(p_at_k: &[f64]) -> usize {
    p_at_k
        .iter()
        .position(|p| *p >= 1.0 - MAX_AT_K_TOLERANCE)
        .map(|i| i + 1)
        .unwrap_or(p_at_k.len())
}

/// P@k over a set of single-target attacks: for each k, the fraction of
/// targets whose pessimistic rank is at most k. Each list contains exactly
/// one relevant item, so inclusion is 0/1 and results average over targets.
pub fn precision_at_k(
    ranked_lists: &[(RankedList, String)],
    descriptor: ConfigDescriptor,
    n_skipped: usize,
) -> Result<PrecisionReport, EvalError> {
    if ranked_lists.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = ranked_lists[0].0.entries.len();
    let mut truth_ranks = Vec::with_capacity(ranked_lists.len());
    for (list, truth) in ranked_lists {
        let entry = list
            .entry(truth)
            .ok_or_else(|| EvalError::TruthMissing(truth.clone()))?;
        truth_ranks.push(entry.pessimistic_rank);
    }
    let n_targets = truth_ranks.len();
    let p_at_k: Vec<f64> = (1..=n)
        .map(|k| truth_ranks.iter().filter(|r| **r <= k).count() as f64 / n_targets as f64)
        .collect();
    let max_at_k = max_at_k(&p_at_k);
    Ok(PrecisionReport {
        descriptor,
        p_at_k,
        max_at_k,
        n_targets,
        n_skipped,
    })
}

/// Pointwise convex combination of per-class P@k curves; max@k recomputed
/// from the combined curve.
pub fn class_weighted_report(
    reports: &BTreeMap<AffectiveClass, PrecisionReport>,
    weights: &ClassWeights,
) -> Result<PrecisionReport, EvalError> {
    let mut iter = AffectiveClass::ALL.iter();
    let first_class = iter.next().unwrap();
    let first = reports
        .get(first_class)
        .ok_or(EvalError::MissingClass(*first_class))?;
    let n = first.n_candidates();
    let mut p_at_k = vec![0.0; n];
    let mut n_skipped = 0;
    for class in AffectiveClass::ALL {
        let report = reports.get(&class).ok_or(EvalError::MissingClass(class))?;
        if report.n_candidates() != n {
            return Err(EvalError::MismatchedReports("k-range".to_string()));
        }
        if report.n_targets != first.n_targets {
            return Err(EvalError::MismatchedReports("n_targets".to_string()));
        }
        let w = weights.component(class);
        for (acc, p) in p_at_k.iter_mut().zip(&report.p_at_k) {
            *acc += w * p;
        }
        n_skipped += report.n_skipped;
    }
    Ok(PrecisionReport {
        descriptor: ConfigDescriptor {
            class_policy: Some("weighted_mean".to_string()),
            ..first.descriptor.clone()
        },
        max_at_k: max_at_k(&p_at_k),
        p_at_k,
        n_targets: first.n_targets,
        n_skipped,
    })
}

/// Metric-level average of reports (e.g. the mean column over ranking
/// methods).
pub fn average_reports(reports: &[&PrecisionReport]) -> Result<PrecisionReport, EvalError> {
    let first = reports.first().ok_or(EvalError::EmptyInput)?;
    let n = first.n_candidates();
    let mut p_at_k = vec![0.0; n];
    for report in reports {
        if report.n_candidates() != n {
            return Err(EvalError::MismatchedReports("k-range".to_string()));
        }
        for (acc, p) in p_at_k.iter_mut().zip(&report.p_at_k) {
            *acc += p / reports.len() as f64;
        }
    }
    Ok(PrecisionReport {
        descriptor: first.descriptor.clone(),
        max_at_k: max_at_k(&p_at_k),
        p_at_k,
        n_targets: first.n_targets,
        n_skipped: first.n_skipped,
    })
}

/// Ranks cached score tables under one weight vector and evaluates P@k.
pub fn evaluate_tables(
    tables: &[(ScoreTable, String)],
    method: RankingMethod,
    weights: &WeightVector,
    descriptor: ConfigDescriptor,
    n_skipped: usize,
) -> Result<PrecisionReport, EvalError> {
    let ranked: Vec<(RankedList, String)> = tables
        .iter()
        .map(|(table, truth)| (rank_candidates(table, method, weights), truth.clone()))
        .collect();
    precision_at_k(&ranked, descriptor, n_skipped)
}

/// All 15 non-empty subsets of the four logical sensors, in a stable order.
pub fn sensor_combinations() -> Vec<Vec<LogicalSensor>> {
    let sensors = [
        LogicalSensor::Bvp,
        LogicalSensor::Eda,
        LogicalSensor::Acc,
        LogicalSensor::Temp,
    ];
    (1u32..16)
        .map(|mask| {
            sensors
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| *s)
                .collect()
        })
        .collect()
}

pub fn combination_label(sensors: &[LogicalSensor]) -> String {
    sensors
        .iter()
        .map(|s| s.as_str().to_uppercase())
        .collect::<Vec<_>>()
        .join("+")
}

/// Evaluates every non-empty sensor subset with indicator weights normalized
/// over the included sensors.
pub fn sweep_sensor_combinations(
    tables: &[(ScoreTable, String)],
    method: RankingMethod,
    n_skipped: usize,
) -> Result<BTreeMap<String, PrecisionReport>, EvalError> {
    let mut out = BTreeMap::new();
    for combo in sensor_combinations() {
        let weights = WeightVector::indicator(&combo).expect("non-empty subset");
        let descriptor = ConfigDescriptor {
            method: Some(method),
            weights: Some(weights),
            ..Default::default()
        };
        out.insert(
            combination_label(&combo),
            evaluate_tables(tables, method, &weights, descriptor, n_skipped)?,
        );
    }
    Ok(out)
}

/// Enumerates all weight vectors on the given grid (components are multiples
/// of `step`, summing to 1) in lexicographic (acc, bvp, eda, temp) order.
/// 286 vectors for step 0.1.
pub fn weight_grid(step: f64) -> Result<Vec<WeightVector>, EvalError> {
    let units = (1.0 / step).round();
    if !(units.is_finite() && units >= 1.0 && (1.0 / step - units).abs() < 1e-9) {
        return Err(EvalError::BadGridStep(step));
    }
    let units = units as u32;
    if units != 10 {
        // integer-tenths arithmetic keeps the sum constraint exact; other
        // grids enumerate in floating point
        let mut grid = Vec::new();
        for a in 0..=units {
            for b in 0..=units - a {
                for e in 0..=units - a - b {
                    let t = units - a - b - e;
                    let s = step;
                    grid.push(
                        WeightVector::new(a as f64 * s, b as f64 * s, e as f64 * s, t as f64 * s)
                            .map_err(|_| EvalError::BadGridStep(step))?,
                    );
                }
            }
        }
        return Ok(grid);
    }
    let mut grid = Vec::new();
    for a in 0..=10u8 {
        for b in 0..=10 - a {
            for e in 0..=10 - a - b {
                let t = 10 - a - b - e;
                grid.push(WeightVector::from_tenths(a, b, e, t).expect("sums to 10"));
            }
        }
    }
    Ok(grid)
}

/// Result of the per-class weight grid search.
#[derive(Debug, Clone, Serialize)]
pub struct GridSearchResult {
    /// Every vector attaining the maximal P@objective_k, in enumeration
    /// order (lexicographic acc, bvp, eda, temp).
    pub optimal: Vec<WeightVector>,
    pub best_p: f64,
    pub objective_k: usize,
    pub evaluated: usize,
}

/// Exhaustive grid search over sensor weightings for one class's cached
/// tables. Returns all vectors tied on the maximal P@objective_k.
pub fn grid_search_class(
    tables: &[(ScoreTable, String)],
    method: RankingMethod,
    step: f64,
    objective_k: usize,
    n_skipped: usize,
) -> Result<GridSearchResult, EvalError> {
    let grid = weight_grid(step)?;
    let scored: Vec<(WeightVector, f64)> = grid
        .par_iter()
        .map(|w| {
            let report = evaluate_tables(
                tables,
                method,
                w,
                ConfigDescriptor::default(),
                n_skipped,
            )?;
            Ok((*w, report.p(objective_k)))
        })
        .collect::<Result<_, EvalError>>()?;
    let best_p = scored
        .iter()
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal = scored
        .iter()
        .filter(|(_, p)| *p == best_p)
        .map(|(w, _)| *w)
        .collect();
    Ok(GridSearchResult {
        optimal,
        best_p,
        objective_k,
        evaluated: scored.len(),
    })
}

/// Grid search per affective class over per-class cached tables.
pub fn grid_search_weights(
    tables_per_class: &BTreeMap<AffectiveClass, (Vec<(ScoreTable, String)>, usize)>,
    method: RankingMethod,
    step: f64,
    objective_k: usize,
) -> Result<BTreeMap<AffectiveClass, GridSearchResult>, EvalError> {
    let mut out = BTreeMap::new();
    for class in AffectiveClass::ALL {
        let (tables, n_skipped) = tables_per_class
            .get(&class)
            .ok_or(EvalError::MissingClass(class))?;
        out.insert(
            class,
            grid_search_class(tables, method, step, objective_k, *n_skipped)?,
        );
    }
    Ok(out)
}

/// Probability of the target landing in the top-k by random guessing:
/// p(k) = k / n_candidates for k = 1..n_candidates.
pub fn random_baseline(n_candidates: usize) -> Vec<f64> {
    (1..=n_candidates)
        .map(|k| k as f64 / n_candidates as f64)
        .collect()
}
