//! Domain types shared by all pipeline stages.
//!
//! Everything here is immutable after construction and safe to share across
//! worker threads. No I/O, no algorithms beyond validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the six raw channels recorded by the wrist device.
///
/// The three accelerometer axes are stored individually; they are only fused
/// at the score level (see [`LogicalSensor::Acc`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorModality {
    Bvp,
    Eda,
    Temp,
    AccX,
    AccY,
    AccZ,
}

impl SensorModality {
    pub const ALL: [SensorModality; 6] = [
        SensorModality::Bvp,
        SensorModality::Eda,
        SensorModality::Temp,
        SensorModality::AccX,
        SensorModality::AccY,
        SensorModality::AccZ,
    ];

    /// The logical sensor this channel contributes to.
    pub fn logical(self) -> LogicalSensor {
        match self {
            SensorModality::Bvp => LogicalSensor::Bvp,
            SensorModality::Eda => LogicalSensor::Eda,
            SensorModality::Temp => LogicalSensor::Temp,
            SensorModality::AccX | SensorModality::AccY | SensorModality::AccZ => {
                LogicalSensor::Acc
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorModality::Bvp => "bvp",
            SensorModality::Eda => "eda",
            SensorModality::Temp => "temp",
            SensorModality::AccX => "acc_x",
            SensorModality::AccY => "acc_y",
            SensorModality::AccZ => "acc_z",
        }
    }
}

impl fmt::Display for SensorModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the four sensors exposed to ranking: BVP, EDA, TEMP, and the fused
/// three-axis accelerometer. The fused ACC never holds raw samples; it exists
/// only as a score label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalSensor {
    Bvp,
    Eda,
    Temp,
    Acc,
}

impl LogicalSensor {
    pub const ALL: [LogicalSensor; 4] = [
        LogicalSensor::Bvp,
        LogicalSensor::Eda,
        LogicalSensor::Temp,
        LogicalSensor::Acc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LogicalSensor::Bvp => "bvp",
            LogicalSensor::Eda => "eda",
            LogicalSensor::Temp => "temp",
            LogicalSensor::Acc => "acc",
        }
    }

    /// Raw channels belonging to this sensor.
    pub fn modalities(self) -> &'static [SensorModality] {
        match self {
            LogicalSensor::Bvp => &[SensorModality::Bvp],
            LogicalSensor::Eda => &[SensorModality::Eda],
            LogicalSensor::Temp => &[SensorModality::Temp],
            LogicalSensor::Acc => &[
                SensorModality::AccX,
                SensorModality::AccY,
                SensorModality::AccZ,
            ],
        }
    }
}

impl fmt::Display for LogicalSensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LogicalSensor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bvp" => Ok(LogicalSensor::Bvp),
            "eda" => Ok(LogicalSensor::Eda),
            "temp" => Ok(LogicalSensor::Temp),
            "acc" => Ok(LogicalSensor::Acc),
            other => Err(format!("unknown sensor '{other}'")),
        }
    }
}

/// Per-sample affective state label. Codes follow the WESAD convention:
/// 1 = neutral, 2 = stress, 3 = amusement. Other codes are dropped at ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffectiveClass {
    Neutral,
    Stress,
    Amusement,
}

impl AffectiveClass {
    pub const ALL: [AffectiveClass; 3] = [
        AffectiveClass::Neutral,
        AffectiveClass::Stress,
        AffectiveClass::Amusement,
    ];

    pub fn code(self) -> u8 {
        match self {
            AffectiveClass::Neutral => 1,
            AffectiveClass::Stress => 2,
            AffectiveClass::Amusement => 3,
        }
    }

    /// Maps a label code to a class; codes outside {1,2,3} yield `None`.
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(AffectiveClass::Neutral),
            2 => Some(AffectiveClass::Stress),
            3 => Some(AffectiveClass::Amusement),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AffectiveClass::Neutral => "neutral",
            AffectiveClass::Stress => "stress",
            AffectiveClass::Amusement => "amusement",
        }
    }
}

impl fmt::Display for AffectiveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AffectiveClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "neutral" => Ok(AffectiveClass::Neutral),
            "stress" => Ok(AffectiveClass::Stress),
            "amusement" => Ok(AffectiveClass::Amusement),
            other => Err(format!("unknown class '{other}'")),
        }
    }
}

/// One modality's uniformly sampled time series with per-sample class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSeries {
    pub modality: SensorModality,
    pub rate_hz: f64,
    pub values: Vec<f64>,
    pub labels: Vec<AffectiveClass>,
}

impl SensorSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.rate_hz
    }
}

/// All sensor series of one subject, keyed by raw modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub series: BTreeMap<SensorModality, SensorSeries>,
}

impl SubjectRecord {
    pub fn series_for(&self, modality: SensorModality) -> Option<&SensorSeries> {
        self.series.get(&modality)
    }
}

/// Checks all `SubjectRecord` invariants and returns a human-readable
/// violation per broken rule. An empty list means the record is valid.
/// Violations are data, not failures.
pub fn validate_subject(record: &SubjectRecord) -> Vec<String> {
    let mut violations = Vec::new();
    if record.subject_id.is_empty() {
        violations.push("empty subject_id".to_string());
    }
    for modality in SensorModality::ALL {
        match record.series.get(&modality) {
            None => violations.push(format!("missing modality {}", modality.as_str().to_uppercase())),
            Some(series) => {
                if series.modality != modality {
                    violations.push(format!(
                        "series keyed {} carries modality {}",
                        modality, series.modality
                    ));
                }
                if series.values.is_empty() {
                    violations.push(format!("empty series in {}", modality.as_str().to_uppercase()));
                }
                if series.values.len() != series.labels.len() {
                    violations.push(format!(
                        "length mismatch in {}: {} values vs {} labels",
                        modality.as_str().to_uppercase(),
                        series.values.len(),
                        series.labels.len()
                    ));
                }
                if !(series.rate_hz > 0.0 && series.rate_hz.is_finite()) {
                    violations.push(format!(
                        "non-positive rate_hz in {}",
                        modality.as_str().to_uppercase()
                    ));
                }
                if let Some(i) = series.values.iter().position(|v| !v.is_finite()) {
                    violations.push(format!(
                        "non-finite value in {} at index {i}",
                        modality.as_str().to_uppercase()
                    ));
                }
            }
        }
    }
    violations
}

/// Per-sensor weights used when aggregating similarity scores. Components are
/// non-negative and sum to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub acc: f64,
    pub bvp: f64,
    pub eda: f64,
    pub temp: f64,
}

impl WeightVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(acc: f64, bvp: f64, eda: f64, temp: f64) -> Result<Self, String> {
        let w = WeightVector { acc, bvp, eda, temp };
        for (name, c) in [("acc", acc), ("bvp", bvp), ("eda", eda), ("temp", temp)] {
            if !(0.0..=1.0).contains(&c) || !c.is_finite() {
                return Err(format!("weight {name}={c} outside [0,1]"));
            }
        }
        let sum = acc + bvp + eda + temp;
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(format!("weights sum to {sum}, expected 1.0"));
        }
        Ok(w)
    }

    /// Equal weight on all four sensors.
    pub fn equal() -> Self {
        WeightVector { acc: 0.25, bvp: 0.25, eda: 0.25, temp: 0.25 }
    }

    /// Indicator weights over a sensor subset, normalized to sum 1.
    pub fn indicator(sensors: &[LogicalSensor]) -> Result<Self, String> {
        if sensors.is_empty() {
            return Err("empty sensor set".to_string());
        }
        let share = 1.0 / sensors.len() as f64;
        let mut w = WeightVector { acc: 0.0, bvp: 0.0, eda: 0.0, temp: 0.0 };
        for s in sensors {
            *w.component_mut(*s) += share;
        }
        Ok(w)
    }

    /// Builds a vector from integer tenths; the grid search works in this
    /// representation so the sum-to-one constraint is exact.
    pub fn from_tenths(acc: u8, bvp: u8, eda: u8, temp: u8) -> Result<Self, String> {
        if acc as u32 + bvp as u32 + eda as u32 + temp as u32 != 10 {
            return Err(format!(
                "tenths ({acc},{bvp},{eda},{temp}) do not sum to 10"
            ));
        }
        Ok(WeightVector {
            acc: acc as f64 / 10.0,
            bvp: bvp as f64 / 10.0,
            eda: eda as f64 / 10.0,
            temp: temp as f64 / 10.0,
        })
    }

    pub fn component(&self, sensor: LogicalSensor) -> f64 {
        match sensor {
            LogicalSensor::Acc => self.acc,
            LogicalSensor::Bvp => self.bvp,
            LogicalSensor::Eda => self.eda,
            LogicalSensor::Temp => self.temp,
        }
    }

    fn component_mut(&mut self, sensor: LogicalSensor) -> &mut f64 {
        match sensor {
            LogicalSensor::Acc => &mut self.acc,
            LogicalSensor::Bvp => &mut self.bvp,
            LogicalSensor::Eda => &mut self.eda,
            LogicalSensor::Temp => &mut self.temp,
        }
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "acc={} bvp={} eda={} temp={}",
            self.acc, self.bvp, self.eda, self.temp
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_series(modality: SensorModality, rate_hz: f64, n: usize) -> SensorSeries {
        SensorSeries {
            modality,
            rate_hz,
            values: vec![0.5; n],
            labels: vec![AffectiveClass::Neutral; n],
        }
    }

    fn full_record() -> SubjectRecord {
        let series = SensorModality::ALL
            .iter()
            .map(|&m| (m, constant_series(m, 4.0, 8)))
            .collect();
        SubjectRecord { subject_id: "S2".to_string(), series }
    }

    #[test]
    fn well_formed_record_has_no_violations() {
        assert!(validate_subject(&full_record()).is_empty());
    }

    #[test]
    fn missing_modality_is_reported() {
        let mut record = full_record();
        record.series.remove(&SensorModality::Temp);
        let violations = validate_subject(&record);
        assert_eq!(violations, vec!["missing modality TEMP"]);
    }

    #[test]
    fn nan_value_is_reported_with_index() {
        let mut record = full_record();
        record
            .series
            .get_mut(&SensorModality::Bvp)
            .unwrap()
            .values[3] = f64::NAN;
        let violations = validate_subject(&record);
        assert_eq!(violations, vec!["non-finite value in BVP at index 3"]);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let mut record = full_record();
        record
            .series
            .get_mut(&SensorModality::Eda)
            .unwrap()
            .labels
            .pop();
        assert!(validate_subject(&record)[0].contains("length mismatch in EDA"));
    }

    #[test]
    fn valid_record_roundtrips_through_serialization() {
        let record = full_record();
        assert!(validate_subject(&record).is_empty());
        let json = serde_json::to_string(&record).unwrap();
        let back: SubjectRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(record, back);
    }

    #[test]
    fn weight_vector_rejects_bad_sum() {
        assert!(WeightVector::new(0.3, 0.3, 0.3, 0.3).is_err());
        assert!(WeightVector::new(0.4, 0.3, 0.2, 0.1).is_ok());
        assert!(WeightVector::new(0.5, 0.5, 0.0, 1e-7).is_err());
    }

    #[test]
    fn weight_vector_rejects_out_of_range_components() {
        assert!(WeightVector::new(-0.1, 0.6, 0.3, 0.2).is_err());
        assert!(WeightVector::new(f64::NAN, 0.5, 0.3, 0.2).is_err());
    }

    #[test]
    fn indicator_weights_normalize() {
        let w = WeightVector::indicator(&[LogicalSensor::Bvp, LogicalSensor::Acc]).unwrap();
        assert_eq!(w.bvp, 0.5);
        assert_eq!(w.acc, 0.5);
        assert_eq!(w.eda, 0.0);
        assert_eq!(w.temp, 0.0);
    }

    #[test]
    fn tenths_constructor_checks_sum() {
        assert!(WeightVector::from_tenths(4, 3, 2, 1).is_ok());
        assert!(WeightVector::from_tenths(4, 3, 2, 2).is_err());
    }

    #[test]
    fn label_codes_follow_wesad_convention() {
        assert_eq!(AffectiveClass::from_code(1), Some(AffectiveClass::Neutral));
        assert_eq!(AffectiveClass::from_code(2), Some(AffectiveClass::Stress));
        assert_eq!(AffectiveClass::from_code(3), Some(AffectiveClass::Amusement));
        for code in [0u8, 4, 5, 6, 7] {
            assert_eq!(AffectiveClass::from_code(code), None);
        }
    }
}
