//! Dataset loading and writing in the plain columnar interchange format.
//!
//! Layout on disk:
//!
//! ```text
//! <root>/manifest.json
//! <root>/<subject_id>/bvp.csv    t,value,label
//! <root>/<subject_id>/eda.csv    t,value,label
//! <root>/<subject_id>/temp.csv   t,value,label
//! <root>/<subject_id>/acc.csv    t,x,y,z,label
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! load of a written dataset reproduces the records bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{validate_subject, AffectiveClass, SensorModality, SensorSeries, SubjectRecord};

/// Native wrist-device default rates, overridable via the manifest.
pub const DEFAULT_RATES: [(&str, f64); 4] =
    [("bvp", 64.0), ("eda", 4.0), ("temp", 4.0), ("acc", 32.0)];

/// File-level sensor groups: BVP/EDA/TEMP are one column each, ACC carries
/// the three axes in one file.
const FILE_SENSORS: [&str; 4] = ["bvp", "eda", "temp", "acc"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at {path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("label code {code} outside 0..=7 at {path}:{line}")]
    BadLabel { path: PathBuf, line: usize, code: i64 },
    #[error("empty series at {path}")]
    EmptySeries { path: PathBuf },
    #[error("no subjects in manifest")]
    NoSubjects,
    #[error("duplicate subject id {0}")]
    DuplicateSubject(String),
    #[error("invalid record for subject {subject}: {violations:?}")]
    InvalidRecord {
        subject: String,
        violations: Vec<String>,
    },
    #[error("bad manifest at {path}: {message}")]
    BadManifest { path: PathBuf, message: String },
}

/// Describes a dataset on disk: where it lives, which subjects it holds, and
/// the nominal rate of each file-level sensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(skip)]
    pub root_dir: PathBuf,
    pub subject_ids: Vec<String>,
    pub rate_hz: BTreeMap<String, f64>,
}

impl DatasetManifest {
    pub fn with_default_rates(root_dir: PathBuf, subject_ids: Vec<String>) -> Self {
        DatasetManifest {
            root_dir,
            subject_ids,
            rate_hz: DEFAULT_RATES
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    /// Reads `manifest.json` from the dataset root.
    pub fn read(root_dir: &Path) -> Result<Self, IngestError> {
        let path = root_dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|source| IngestError::Io {
            path: path.clone(),
            source,
        })?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| IngestError::BadManifest {
                path: path.clone(),
                message: e.to_string(),
            })?;
        manifest.root_dir = root_dir.to_path_buf();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self) -> Result<(), IngestError> {
        let path = self.root_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|source| IngestError::Io { path, source })
    }

    fn validate(&self) -> Result<(), IngestError> {
        if self.subject_ids.is_empty() {
            return Err(IngestError::NoSubjects);
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.subject_ids {
            if !seen.insert(id) {
                return Err(IngestError::DuplicateSubject(id.clone()));
            }
        }
        for sensor in FILE_SENSORS {
            match self.rate_hz.get(sensor) {
                Some(r) if *r > 0.0 && r.is_finite() => {}
                _ => {
                    return Err(IngestError::BadManifest {
                        path: self.root_dir.join("manifest.json"),
                        message: format!("missing or non-positive rate for {sensor}"),
                    })
                }
            }
        }
        Ok(())
    }
}

/// Loads and validates one `SubjectRecord` per manifest subject id.
/// Label codes 0 and 4..=7 (transient/meditation) are dropped; codes outside
/// 0..=7 are rejected.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Vec<SubjectRecord>, IngestError> {
    manifest.validate()?;
    let mut records = Vec::with_capacity(manifest.subject_ids.len());
    for id in &manifest.subject_ids {
        let dir = manifest.root_dir.join(id);
        let mut series = BTreeMap::new();
        for sensor in FILE_SENSORS {
            let rate = manifest.rate_hz[sensor];
            let path = dir.join(format!("{sensor}.csv"));
            if sensor == "acc" {
                let [x, y, z] = load_acc_file(&path, rate)?;
                series.insert(SensorModality::AccX, x);
                series.insert(SensorModality::AccY, y);
                series.insert(SensorModality::AccZ, z);
            } else {
                let modality = match sensor {
                    "bvp" => SensorModality::Bvp,
                    "eda" => SensorModality::Eda,
                    _ => SensorModality::Temp,
                };
                series.insert(modality, load_scalar_file(&path, modality, rate)?);
            }
        }
        let record = SubjectRecord {
            subject_id: id.clone(),
            series,
        };
        let violations = validate_subject(&record);
        if !violations.is_empty() {
            return Err(IngestError::InvalidRecord {
                subject: id.clone(),
                violations,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records under `root_dir` in the interchange layout, plus a
/// `manifest.json`. Inverse of [`load_dataset`].
pub fn write_dataset(root_dir: &Path, records: &[SubjectRecord]) -> Result<(), IngestError> {
    if records.is_empty() {
        return Err(IngestError::NoSubjects);
    }
    let rate_of = |r: &SubjectRecord, m: SensorModality| r.series[&m].rate_hz;
    let first = &records[0];
    let manifest = DatasetManifest {
        root_dir: root_dir.to_path_buf(),
        subject_ids: records.iter().map(|r| r.subject_id.clone()).collect(),
        rate_hz: [
            ("bvp".to_string(), rate_of(first, SensorModality::Bvp)),
            ("eda".to_string(), rate_of(first, SensorModality::Eda)),
            ("temp".to_string(), rate_of(first, SensorModality::Temp)),
            ("acc".to_string(), rate_of(first, SensorModality::AccX)),
        ]
        .into_iter()
        .collect(),
    };
    manifest.validate()?;

    for record in records {
        let dir = root_dir.join(&record.subject_id);
        fs::create_dir_all(&dir).map_err(|source| IngestError::Io {
            path: dir.clone(),
            source,
        })?;
        for (sensor, modality) in [
            ("bvp", SensorModality::Bvp),
            ("eda", SensorModality::Eda),
            ("temp", SensorModality::Temp),
        ] {
            let series = &record.series[&modality];
            let path = dir.join(format!("{sensor}.csv"));
            let mut out = String::from("t,value,label\n");
            for (i, (v, l)) in series.values.iter().zip(&series.labels).enumerate() {
                let t = i as f64 / series.rate_hz;
                out.push_str(&format!("{t},{v},{}\n", l.code()));
            }
            write_file(&path, &out)?;
        }
        let x = &record.series[&SensorModality::AccX];
        let y = &record.series[&SensorModality::AccY];
        let z = &record.series[&SensorModality::AccZ];
        let path = dir.join("acc.csv");
        let mut out = String::from("t,x,y,z,label\n");
        for i in 0..x.len() {
            let t = i as f64 / x.rate_hz;
            out.push_str(&format!(
                "{t},{},{},{},{}\n",
                x.values[i],
                y.values[i],
                z.values[i],
                x.labels[i].code()
            ));
        }
        write_file(&path, &out)?;
    }
    manifest.write()
}

fn write_file(path: &Path, content: &str) -> Result<(), IngestError> {
    let mut f = fs::File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(content.as_bytes())
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn read_lines(path: &Path) -> Result<Vec<String>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

fn parse_label(
    field: &str,
    path: &Path,
    line: usize,
) -> Result<Option<AffectiveClass>, IngestError> {
    let code: i64 = field.trim().parse().map_err(|_| IngestError::Malformed {
        path: path.to_path_buf(),
        line,
        message: format!("bad label '{field}'"),
    })?;
    if !(0..=7).contains(&code) {
        return Err(IngestError::BadLabel {
            path: path.to_path_buf(),
            line,
            code,
        });
    }
    Ok(AffectiveClass::from_code(code as u8))
}

fn parse_value(field: &str, path: &Path, line: usize) -> Result<f64, IngestError> {
    field.trim().parse().map_err(|_| IngestError::Malformed {
        path: path.to_path_buf(),
        line,
        message: format!("bad value '{field}'"),
    })
}

fn load_scalar_file(
    path: &Path,
    modality: SensorModality,
    rate_hz: f64,
) -> Result<SensorSeries, IngestError> {
    let lines = read_lines(path)?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let Some(label) = parse_label(fields[2], path, idx + 1)? else {
            continue; // transient/meditation label, dropped
        };
        values.push(parse_value(fields[1], path, idx + 1)?);
        labels.push(label);
    }
    if values.is_empty() {
        return Err(IngestError::EmptySeries {
            path: path.to_path_buf(),
        });
    }
    Ok(SensorSeries {
        modality,
        rate_hz,
        values,
        labels,
    })
}

fn load_acc_file(path: &Path, rate_hz: f64) -> Result<[SensorSeries; 3], IngestError> {
    let lines = read_lines(path)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let Some(label) = parse_label(fields[4], path, idx + 1)? else {
            continue;
        };
        xs.push(parse_value(fields[1], path, idx + 1)?);
        ys.push(parse_value(fields[2], path, idx + 1)?);
        zs.push(parse_value(fields[3], path, idx + 1)?);
        labels.push(label);
    }
    if xs.is_empty() {
        return Err(IngestError::EmptySeries {
            path: path.to_path_buf(),
        });
    }
    let make = |modality, values: Vec<f64>| SensorSeries {
        modality,
        rate_hz,
        values,
        labels: labels.clone(),
    };
    Ok([
        make(SensorModality::AccX, xs),
        make(SensorModality::AccY, ys),
        make(SensorModality::AccZ, zs),
    ])
}
