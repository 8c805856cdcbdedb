//! Scores every candidate in the data-owner collection against the attacker
//! snippet, per logical sensor.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dtw::{acc_fused_distance, dtw_distance, to_similarity, DtwConfig, DtwError};
use crate::preprocess::{AttackInstance, ClassFilterSide};
use crate::types::{AffectiveClass, LogicalSensor, SensorModality, SensorSeries, SubjectRecord};

/// Per-candidate, per-sensor similarity scores for one attack.
/// Rows are keyed by anonymous handle; every row has all four logical
/// sensors. Candidates whose class-filtered region was empty score 0 and are
/// listed in `warnings`.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreTable {
    pub target_id: String,
    pub rows: BTreeMap<String, BTreeMap<LogicalSensor, f64>>,
    pub warnings: Vec<String>,
}

impl ScoreTable {
    pub fn handles(&self) -> impl Iterator<Item = &String> {
        self.rows.keys()
    }

    /// Long-format CSV: handle, sensor, similarity.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("handle,sensor,similarity\n");
        for (handle, sensors) in &self.rows {
            for (sensor, sim) in sensors {
                out.push_str(&format!("{handle},{sensor},{sim}\n"));
            }
        }
        out
    }
}

fn filtered_values(series: &SensorSeries, class: Option<AffectiveClass>) -> Vec<f64> {
    match class {
        None => series.values.clone(),
        Some(c) => series
            .values
            .iter()
            .zip(&series.labels)
            .filter(|(_, l)| **l == c)
            .map(|(v, _)| *v)
            .collect(),
    }
}

fn candidate_series(
    record: &SubjectRecord,
    modality: SensorModality,
    class: Option<AffectiveClass>,
) -> Result<Vec<f64>, DtwError> {
    let series = record
        .series_for(modality)
        .ok_or_else(|| DtwError::MissingModality(modality, record.subject_id.clone()))?;
    Ok(filtered_values(series, class))
}

/// Runs one attack: for each candidate and each of BVP/EDA/TEMP the
/// similarity of the snippet against the candidate's (class-filtered)
/// series; for ACC the fused three-axis distance. Deterministic; candidates
/// score independently and in parallel.
pub fn run_attack(instance: &AttackInstance, config: &DtwConfig) -> Result<ScoreTable, DtwError> {
    let candidate_class = match (instance.class_filter, instance.filter_side) {
        (Some(c), ClassFilterSide::Both) => Some(c),
        _ => None,
    };
    let snippet = |m: SensorModality| -> &[f64] { &instance.attacker_snippet[&m].values };

    let scored: Vec<(String, BTreeMap<LogicalSensor, f64>, Vec<String>)> = instance
        .collection
        .par_iter()
        .map(|(handle, record)| {
            let mut sensors = BTreeMap::new();
            let mut warnings = Vec::new();
            for sensor in LogicalSensor::ALL {
                let sim = match sensor {
                    LogicalSensor::Acc => {
                        let cx = candidate_series(record, SensorModality::AccX, candidate_class)?;
                        let cy = candidate_series(record, SensorModality::AccY, candidate_class)?;
                        let cz = candidate_series(record, SensorModality::AccZ, candidate_class)?;
                        if cx.is_empty() {
                            warnings.push(format!("{handle}: empty class-filtered region ({sensor})"));
                            0.0
                        } else {
                            let d = acc_fused_distance(
                                [
                                    snippet(SensorModality::AccX),
                                    snippet(SensorModality::AccY),
                                    snippet(SensorModality::AccZ),
                                ],
                                [&cx, &cy, &cz],
                                config,
                            )?;
                            to_similarity(d)?.value()
                        }
                    }
                    other => {
                        let modality = other.modalities()[0];
                        let cand = candidate_series(record, modality, candidate_class)?;
                        if cand.is_empty() {
                            warnings.push(format!("{handle}: empty class-filtered region ({sensor})"));
                            0.0
                        } else {
                            let d = dtw_distance(snippet(modality), &cand, config)?;
                            to_similarity(d)?.value()
                        }
                    }
                };
                sensors.insert(sensor, sim);
            }
            Ok((handle.clone(), sensors, warnings))
        })
        .collect::<Result<_, DtwError>>()?;

    let mut rows = BTreeMap::new();
    let mut warnings = Vec::new();
    for (handle, sensors, warn) in scored {
        rows.insert(handle, sensors);
        warnings.extend(warn);
    }
    Ok(ScoreTable {
        target_id: instance.target_id.clone(),
        rows,
        warnings,
    })
}

/// Scores a batch of instances, pairing each table with its truth handle.
pub fn score_instances(
    instances: &[AttackInstance],
    config: &DtwConfig,
) -> Result<Vec<(ScoreTable, String)>, DtwError> {
    instances
        .iter()
        .map(|i| Ok((run_attack(i, config)?, i.truth_handle.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{
        build_attack_instances, preprocess_dataset, PreprocessConfig,
    };
    use crate::synth::{generate_synthetic, SyntheticConfig};

    fn instances(seed: u64) -> Vec<AttackInstance> {
        let records = generate_synthetic(&SyntheticConfig {
            n_subjects: 3,
            duration_s: 30.0,
            seed,
            separability: 0.7,
        })
        .unwrap();
        let processed = preprocess_dataset(&records, &PreprocessConfig::default()).unwrap();
        build_attack_instances(
            &processed,
            &PreprocessConfig::default(),
            0.05,
            None,
            ClassFilterSide::Both,
            99,
        )
        .unwrap()
    }

    #[test]
    fn table_has_all_handles_and_sensors() {
        let instances = instances(1);
        let table = run_attack(&instances[0], &DtwConfig::default()).unwrap();
        assert_eq!(table.rows.len(), 3);
        for sensors in table.rows.values() {
            assert_eq!(sensors.len(), 4);
            for sim in sensors.values() {
                assert!((0.0..=1.0).contains(sim));
            }
        }
    }

    #[test]
    fn snippet_against_itself_scores_one() {
        // craft an instance whose truth candidate IS the snippet
        let mut instance = instances(2).remove(0);
        let cloned: BTreeMap<_, _> = instance.attacker_snippet.clone();
        let truth = instance.truth_handle.clone();
        for (handle, record) in instance.collection.iter_mut() {
            if *handle == truth {
                record.series = cloned.clone();
            }
        }
        let table = run_attack(&instance, &DtwConfig::default()).unwrap();
        for (sensor, sim) in &table.rows[&truth] {
            assert_eq!(*sim, 1.0, "sensor {sensor}");
        }
    }

    #[test]
    fn rerun_is_bit_identical() {
        let instances = instances(3);
        let a = run_attack(&instances[0], &DtwConfig::default()).unwrap();
        let b = run_attack(&instances[0], &DtwConfig::default()).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn output_invariant_under_collection_permutation() {
        let mut instance = instances(4).remove(0);
        let a = run_attack(&instance, &DtwConfig::default()).unwrap();
        instance.collection.reverse();
        let b = run_attack(&instance, &DtwConfig::default()).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn csv_export_is_long_format() {
        let instances = instances(5);
        let table = run_attack(&instances[0], &DtwConfig::default()).unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "handle,sensor,similarity");
        assert_eq!(lines.len(), 1 + 3 * 4);
    }
}
