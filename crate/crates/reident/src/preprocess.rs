//! Common-rate resampling, normalization, class segmentation, and
//! attacker/data-owner splits.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::derive_seed;
use crate::types::{AffectiveClass, SensorModality, SensorSeries, SubjectRecord};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("series too short to resample ({0} samples)")]
    TooShort(usize),
    #[error("snippet fraction {0} outside (0,1)")]
    BadFraction(f64),
    #[error("insufficient class data: need {needed} contiguous samples, found {available}")]
    InsufficientClassData { needed: usize, available: usize },
    #[error("snippet of {snippet} samples would leave no data-owner record ({total} total)")]
    EmptyRemainder { snippet: usize, total: usize },
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("missing modality {0}")]
    MissingModality(SensorModality),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    ZscorePerSubjectPerSensor,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Normalization::None),
            "zscore" | "zscore_per_subject_per_sensor" => {
                Ok(Normalization::ZscorePerSubjectPerSensor)
            }
            other => Err(format!("unknown normalization '{other}'")),
        }
    }
}

/// Which sides of the attack see class-filtered data. The snippet is always
/// cut from a contiguous run of the class; `Both` additionally restricts each
/// candidate series to samples of that class during scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassFilterSide {
    #[default]
    Both,
    SnippetOnly,
}

impl std::str::FromStr for ClassFilterSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "both" => Ok(ClassFilterSide::Both),
            "snippet" | "snippet_only" => Ok(ClassFilterSide::SnippetOnly),
            other => Err(format!("unknown filter side '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub common_rate_hz: f64,
    pub window_ms: f64,
    pub normalization: Normalization,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            common_rate_hz: 64.0,
            window_ms: 210.0,
            normalization: Normalization::ZscorePerSubjectPerSensor,
        }
    }
}

impl PreprocessConfig {
    /// Samples per window at the common rate; 210 ms at 64 Hz gives 13.
    pub fn window_samples(&self) -> usize {
        ((self.window_ms * self.common_rate_hz / 1000.0).floor() as usize).max(1)
    }
}

/// Linear interpolation onto a uniform grid at `target_rate_hz` spanning the
/// original time range. Labels are assigned by nearest original sample.
pub fn resample(series: &SensorSeries, target_rate_hz: f64) -> Result<SensorSeries, PreprocessError> {
    if series.len() < 2 {
        return Err(PreprocessError::TooShort(series.len()));
    }
    let span_s = (series.len() - 1) as f64 / series.rate_hz;
    let n_out = (span_s * target_rate_hz + 1e-9).floor() as usize + 1;
    let ratio = series.rate_hz / target_rate_hz;
    let mut values = Vec::with_capacity(n_out);
    let mut labels = Vec::with_capacity(n_out);
    let last = series.len() - 1;
    for k in 0..n_out {
        let pos = k as f64 * ratio;
        let i0 = (pos.floor() as usize).min(last);
        let i1 = (i0 + 1).min(last);
        let frac = pos - i0 as f64;
        values.push(series.values[i0] * (1.0 - frac) + series.values[i1] * frac);
        let nearest = (pos.round() as usize).min(last);
        labels.push(series.labels[nearest]);
    }
    Ok(SensorSeries {
        modality: series.modality,
        rate_hz: target_rate_hz,
        values,
        labels,
    })
}

/// Z-scores the series in place semantics (returns a new series). A constant
/// series maps to all zeros rather than dividing by zero.
pub fn zscore(series: &SensorSeries) -> SensorSeries {
    let n = series.len() as f64;
    let mean = series.values.iter().sum::<f64>() / n;
    let var = series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let values = if std < 1e-12 {
        vec![0.0; series.len()]
    } else {
        series.values.iter().map(|v| (v - mean) / std).collect()
    };
    SensorSeries {
        modality: series.modality,
        rate_hz: series.rate_hz,
        values,
        labels: series.labels.clone(),
    }
}

/// Resamples all modalities to the common rate, trims them to one shared
/// length, and applies the configured normalization.
pub fn preprocess_record(
    record: &SubjectRecord,
    config: &PreprocessConfig,
) -> Result<SubjectRecord, PreprocessError> {
    let mut resampled = BTreeMap::new();
    for modality in SensorModality::ALL {
        let series = record
            .series_for(modality)
            .ok_or(PreprocessError::MissingModality(modality))?;
        resampled.insert(modality, resample(series, config.common_rate_hz)?);
    }
    let common_len = resampled.values().map(|s| s.len()).min().unwrap();
    let mut out = BTreeMap::new();
    for (modality, mut series) in resampled {
        series.values.truncate(common_len);
        series.labels.truncate(common_len);
        let series = match config.normalization {
            Normalization::None => series,
            Normalization::ZscorePerSubjectPerSensor => zscore(&series),
        };
        out.insert(modality, series);
    }
    Ok(SubjectRecord {
        subject_id: record.subject_id.clone(),
        series: out,
    })
}

pub fn preprocess_dataset(
    records: &[SubjectRecord],
    config: &PreprocessConfig,
) -> Result<Vec<SubjectRecord>, PreprocessError> {
    records.iter().map(|r| preprocess_record(r, config)).collect()
}

/// Outcome of cutting the attacker snippet out of a target record.
#[derive(Debug, Clone)]
pub struct AttackerSplit {
    pub snippet: BTreeMap<SensorModality, SensorSeries>,
    pub shortened: SubjectRecord,
    /// First sample index of the cut, recorded so the original record can be
    /// reassembled for verification.
    pub cut_start: usize,
    pub cut_len: usize,
}

/// Longest contiguous run of `class` in the labels, as (start, end-exclusive).
fn longest_run(labels: &[AffectiveClass], class: AffectiveClass) -> (usize, usize) {
    let mut best = (0, 0);
    let mut start = None;
    for (i, l) in labels.iter().enumerate() {
        if *l == class {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            if i - s > best.1 - best.0 {
                best = (s, i);
            }
        }
    }
    if let Some(s) = start {
        if labels.len() - s > best.1 - best.0 {
            best = (s, labels.len());
        }
    }
    best
}

/// Cuts a snippet from the middle of the eligible region of a preprocessed
/// record and removes the covered sample range from every modality,
/// concatenating the two remaining halves.
///
/// The eligible region is the whole record, or the longest contiguous run of
/// `class_filter` when set. The snippet spans `floor(fraction * total)`
/// samples, with a floor of one window.
pub fn split_attacker_set(
    record: &SubjectRecord,
    fraction: f64,
    class_filter: Option<AffectiveClass>,
    window_samples: usize,
) -> Result<AttackerSplit, PreprocessError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PreprocessError::BadFraction(fraction));
    }
    let reference = record
        .series_for(SensorModality::Bvp)
        .ok_or(PreprocessError::MissingModality(SensorModality::Bvp))?;
    let total = reference.len();
    let snippet_len = ((fraction * total as f64).floor() as usize).max(window_samples);
    if snippet_len >= total {
        return Err(PreprocessError::EmptyRemainder {
            snippet: snippet_len,
            total,
        });
    }

    let (region_start, region_end) = match class_filter {
        None => (0, total),
        Some(class) => longest_run(&reference.labels, class),
    };
    let region_len = region_end - region_start;
    if region_len < snippet_len {
        return Err(PreprocessError::InsufficientClassData {
            needed: snippet_len,
            available: region_len,
        });
    }
    let center = region_start + region_len / 2;
    let cut_start = center
        .saturating_sub(snippet_len / 2)
        .clamp(region_start, region_end - snippet_len);

    let mut snippet = BTreeMap::new();
    let mut shortened = BTreeMap::new();
    for (modality, series) in &record.series {
        let cut = SensorSeries {
            modality: *modality,
            rate_hz: series.rate_hz,
            values: series.values[cut_start..cut_start + snippet_len].to_vec(),
            labels: series.labels[cut_start..cut_start + snippet_len].to_vec(),
        };
        let mut rem_values = series.values[..cut_start].to_vec();
        rem_values.extend_from_slice(&series.values[cut_start + snippet_len..]);
        let mut rem_labels = series.labels[..cut_start].to_vec();
        rem_labels.extend_from_slice(&series.labels[cut_start + snippet_len..]);
        snippet.insert(*modality, cut);
        shortened.insert(
            *modality,
            SensorSeries {
                modality: *modality,
                rate_hz: series.rate_hz,
                values: rem_values,
                labels: rem_labels,
            },
        );
    }
    Ok(AttackerSplit {
        snippet,
        shortened: SubjectRecord {
            subject_id: record.subject_id.clone(),
            series: shortened,
        },
        cut_start,
        cut_len: snippet_len,
    })
}

/// An attacker snippet plus the anonymized data-owner collection for one
/// target. Collection handles are random nonces carrying no subject
/// information; the truth handle is evaluator-side knowledge only.
#[derive(Debug, Clone)]
pub struct AttackInstance {
    pub target_id: String,
    pub attacker_snippet: BTreeMap<SensorModality, SensorSeries>,
    /// One anonymized record per original subject, sorted by handle. The
    /// target appears as its shortened record.
    pub collection: Vec<(String, SubjectRecord)>,
    pub truth_handle: String,
    pub cut_start: usize,
    pub cut_len: usize,
    pub class_filter: Option<AffectiveClass>,
    pub filter_side: ClassFilterSide,
}

fn nonce(rng: &mut impl Rng) -> String {
    (0..16)
        .map(|_| char::from_digit(rng.gen_range(0..16), 16).unwrap())
        .collect()
}

/// Builds one attack instance per subject as target. Each instance's
/// collection holds all N subjects, with the target shortened by the snippet
/// cut. Handles are freshly randomized per instance from the seed.
pub fn build_attack_instances(
    dataset: &[SubjectRecord],
    config: &PreprocessConfig,
    fraction: f64,
    class_filter: Option<AffectiveClass>,
    filter_side: ClassFilterSide,
    seed: u64,
) -> Result<Vec<AttackInstance>, PreprocessError> {
    let (instances, skipped) = build_attack_instances_lenient(
        dataset,
        config,
        fraction,
        class_filter,
        filter_side,
        seed,
    )?;
    if let Some(err) = skipped.into_iter().next() {
        return Err(err.1);
    }
    Ok(instances)
}

/// Like [`build_attack_instances`], but targets whose class-filtered data is
/// too short are skipped and reported instead of failing the whole batch.
/// Silent denominators corrupt P@k, so callers must carry the skip count.
pub fn build_attack_instances_lenient(
    dataset: &[SubjectRecord],
    config: &PreprocessConfig,
    fraction: f64,
    class_filter: Option<AffectiveClass>,
    filter_side: ClassFilterSide,
    seed: u64,
) -> Result<(Vec<AttackInstance>, Vec<(String, PreprocessError)>), PreprocessError> {
    if dataset.len() < 2 {
        return Err(PreprocessError::TooFewSubjects(dataset.len()));
    }
    let window = config.window_samples();
    let mut instances = Vec::with_capacity(dataset.len());
    let mut skipped = Vec::new();
    for (target_idx, target) in dataset.iter().enumerate() {
        let split = match split_attacker_set(target, fraction, class_filter, window) {
            Ok(split) => split,
            Err(err @ PreprocessError::InsufficientClassData { .. }) => {
                skipped.push((target.subject_id.clone(), err));
                continue;
            }
            Err(other) => return Err(other),
        };
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(
            seed,
            &format!("anonymize/{target_idx}"),
        ));
        let mut collection = Vec::with_capacity(dataset.len());
        let mut truth_handle = String::new();
        for (idx, subject) in dataset.iter().enumerate() {
            let handle = nonce(&mut rng);
            let record = if idx == target_idx {
                truth_handle = handle.clone();
                split.shortened.clone()
            } else {
                subject.clone()
            };
            let record = SubjectRecord {
                subject_id: handle.clone(),
                series: record.series,
            };
            collection.push((handle, record));
        }
        collection.sort_by(|a, b| a.0.cmp(&b.0));
        instances.push(AttackInstance {
            target_id: target.subject_id.clone(),
            attacker_snippet: split.snippet,
            collection,
            truth_handle,
            cut_start: split.cut_start,
            cut_len: split.cut_len,
            class_filter,
            filter_side,
        });
    }
    Ok((instances, skipped))
}
