//! Dynamic Time Warping distance between univariate series, similarity
//! conversion, and three-axis accelerometer fusion.
//!
//! The dynamic program keeps only two rows of the cumulative cost matrix;
//! memory is the binding constraint when aligning long recordings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{LogicalSensor, SensorModality, SubjectRecord};

#[derive(Debug, Error, PartialEq)]
pub enum DtwError {
    #[error("empty input series")]
    EmptyInput,
    #[error("non-finite value in input series")]
    NonFinite,
    #[error("no feasible path: band half-width {band} < length difference {diff}")]
    NoFeasiblePath { band: usize, diff: usize },
    #[error("invalid distance {0}")]
    InvalidDistance(f64),
    #[error("missing modality {0} in record {1}")]
    MissingModality(SensorModality, String),
}

/// Permitted local moves and their weights in the DTW recurrence.
/// `Symmetric2` double-weights diagonal steps (and the origin cell) and is
/// normalized by `len(x) + len(y)`; `Symmetric1` weights all steps equally
/// and is normalized by the optimal path's cell count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepPattern {
    Symmetric1,
    #[default]
    Symmetric2,
}

impl std::str::FromStr for StepPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric1" => Ok(StepPattern::Symmetric1),
            "symmetric2" => Ok(StepPattern::Symmetric2),
            other => Err(format!("unknown step pattern '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceNormalization {
    None,
    #[default]
    PathNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwConfig {
    pub step_pattern: StepPattern,
    /// Sakoe-Chiba band half-width in samples; `None` means unconstrained.
    pub window_constraint: Option<usize>,
    pub distance_normalization: DistanceNormalization,
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig {
            step_pattern: StepPattern::Symmetric2,
            window_constraint: None,
            distance_normalization: DistanceNormalization::PathNormalized,
        }
    }
}

/// Similarity in (0,1] obtained as `1 / (1 + d)` from a normalized distance.
/// Any strictly antitone map yields identical rankings; this one is fixed so
/// exported scores are comparable across runs.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SimilarityScore(pub f64);

impl SimilarityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Converts a non-negative distance to a similarity score.
pub fn to_similarity(d: f64) -> Result<SimilarityScore, DtwError> {
    if !d.is_finite() || d < 0.0 {
        return Err(DtwError::InvalidDistance(d));
    }
    Ok(SimilarityScore(1.0 / (1.0 + d)))
}

/// DTW distance between two univariate series with local cost
/// `c(i,j) = |x_i - y_j|`.
///
/// Symmetric1 recurrence: `D(i,j) = c + min(D(i-1,j), D(i,j-1), D(i-1,j-1))`
/// with `D(1,1) = c(1,1)`. Symmetric2 weights diagonal steps `2c` with
/// `D(1,1) = 2*c(1,1)`. Cost ties between paths are broken toward the path
/// with fewer cells, so symmetric1 path normalization is deterministic.
pub fn dtw_distance(x: &[f64], y: &[f64], config: &DtwConfig) -> Result<f64, DtwError> {
    if x.is_empty() || y.is_empty() {
        return Err(DtwError::EmptyInput);
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(DtwError::NonFinite);
    }
    let diff = x.len().abs_diff(y.len());
    if let Some(band) = config.window_constraint {
        if band < diff {
            return Err(DtwError::NoFeasiblePath { band, diff });
        }
    }

    let (cost, cells) = cumulative_cost(x, y, config);
    Ok(match config.distance_normalization {
        DistanceNormalization::None => cost,
        DistanceNormalization::PathNormalized => match config.step_pattern {
            StepPattern::Symmetric2 => cost / (x.len() + y.len()) as f64,
            StepPattern::Symmetric1 => cost / cells as f64,
        },
    })
}

/// Two-row DP returning the optimal cumulative cost and the cell count of the
/// optimal path (ties on cost resolved toward fewer cells).
fn cumulative_cost(x: &[f64], y: &[f64], config: &DtwConfig) -> (f64, u64) {
    let n = x.len();
    let m = y.len();
    let band = config.window_constraint.unwrap_or(usize::MAX);
    let diag_weight = match config.step_pattern {
        StepPattern::Symmetric1 => 1.0,
        StepPattern::Symmetric2 => 2.0,
    };
    let init_weight = diag_weight;

    let mut prev_cost = vec![f64::INFINITY; m];
    let mut prev_len = vec![0u64; m];
    let mut cur_cost = vec![f64::INFINITY; m];
    let mut cur_len = vec![0u64; m];

    for i in 0..n {
        let (lo, hi) = if band == usize::MAX {
            (0, m - 1)
        } else {
            (i.saturating_sub(band), usize::min(m - 1, i + band))
        };
        cur_cost[..lo].iter_mut().for_each(|c| *c = f64::INFINITY);
        if hi + 1 < m {
            cur_cost[hi + 1..].iter_mut().for_each(|c| *c = f64::INFINITY);
        }
        for j in lo..=hi {
            let c = (x[i] - y[j]).abs();
            if i == 0 && j == 0 {
                cur_cost[0] = init_weight * c;
                cur_len[0] = 1;
                continue;
            }
            // candidates: diagonal, vertical (i-1,j), horizontal (i,j-1)
            let mut best = f64::INFINITY;
            let mut best_len = 0u64;
            if i > 0 && j > 0 && prev_cost[j - 1].is_finite() {
                best = prev_cost[j - 1] + diag_weight * c;
                best_len = prev_len[j - 1] + 1;
            }
            if i > 0 && prev_cost[j].is_finite() {
                let cand = prev_cost[j] + c;
                let cand_len = prev_len[j] + 1;
                if cand < best || (cand == best && cand_len < best_len) {
                    best = cand;
                    best_len = cand_len;
                }
            }
            if j > 0 && cur_cost[j - 1].is_finite() {
                let cand = cur_cost[j - 1] + c;
                let cand_len = cur_len[j - 1] + 1;
                if cand < best || (cand == best && cand_len < best_len) {
                    best = cand;
                    best_len = cand_len;
                }
            }
            cur_cost[j] = best;
            cur_len[j] = best_len;
        }
        std::mem::swap(&mut prev_cost, &mut cur_cost);
        std::mem::swap(&mut prev_len, &mut cur_len);
    }
    (prev_cost[m - 1], prev_len[m - 1])
}

/// Fused accelerometer distance: arithmetic mean of the three per-axis DTW
/// distances. Fusion happens at the distance level, before similarity
/// inversion.
pub fn acc_fused_distance(
    x_axes: [&[f64]; 3],
    y_axes: [&[f64]; 3],
    config: &DtwConfig,
) -> Result<f64, DtwError> {
    let mut sum = 0.0;
    for (x, y) in x_axes.iter().zip(y_axes.iter()) {
        sum += dtw_distance(x, y, config)?;
    }
    Ok(sum / 3.0)
}

/// DTW distance between two subjects on one logical sensor; ACC fuses the
/// three axes.
pub fn sensor_distance(
    a: &SubjectRecord,
    b: &SubjectRecord,
    sensor: LogicalSensor,
    config: &DtwConfig,
) -> Result<f64, DtwError> {
    let series = |rec: &SubjectRecord, m: SensorModality| -> Result<Vec<f64>, DtwError> {
        rec.series_for(m)
            .map(|s| s.values.clone())
            .ok_or_else(|| DtwError::MissingModality(m, rec.subject_id.clone()))
    };
    match sensor {
        LogicalSensor::Acc => {
            let ax = series(a, SensorModality::AccX)?;
            let ay = series(a, SensorModality::AccY)?;
            let az = series(a, SensorModality::AccZ)?;
            let bx = series(b, SensorModality::AccX)?;
            let by = series(b, SensorModality::AccY)?;
            let bz = series(b, SensorModality::AccZ)?;
            acc_fused_distance([&ax, &ay, &az], [&bx, &by, &bz], config)
        }
        other => {
            let m = other.modalities()[0];
            let xs = series(a, m)?;
            let ys = series(b, m)?;
            dtw_distance(&xs, &ys, config)
        }
    }
}

/// Pairwise N x N similarity matrix between subjects on one logical sensor.
/// Symmetric for the symmetric step patterns; diagonal entries are 1.0.
pub fn pairwise_matrix(
    subjects: &[SubjectRecord],
    sensor: LogicalSensor,
    config: &DtwConfig,
) -> Result<Vec<Vec<SimilarityScore>>, DtwError> {
    use rayon::prelude::*;

    let n = subjects.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let scored: Vec<((usize, usize), SimilarityScore)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = sensor_distance(&subjects[i], &subjects[j], sensor, config)?;
            Ok(((i, j), to_similarity(d)?))
        })
        .collect::<Result<_, DtwError>>()?;

    let mut matrix = vec![vec![SimilarityScore(1.0); n]; n];
    for ((i, j), s) in scored {
        matrix[i][j] = s;
        matrix[j][i] = s;
    }
    Ok(matrix)
}
