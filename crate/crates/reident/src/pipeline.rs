//! End-to-end run orchestration: resolves a [`RunConfig`], wires
//! ingest -> preprocess -> attack -> ranking -> eval, and writes all result
//! artifacts (CSV/JSON) plus the resolved config to the output directory.
//!
//! All randomness flows from the single global seed through
//! [`crate::synth::derive_seed`], so two runs with identical configs produce
//! byte-identical outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{score_instances, ScoreTable};
use crate::dtw::{pairwise_matrix, DtwConfig};
use crate::eval::{
    class_weighted_report, evaluate_tables, grid_search_class, random_baseline,
    sweep_sensor_combinations, ClassWeights, ConfigDescriptor, EvalError, GridSearchResult,
    PrecisionReport,
};
use crate::ingest::{load_dataset, write_dataset, DatasetManifest, IngestError};
use crate::preprocess::{
    build_attack_instances_lenient, preprocess_dataset, ClassFilterSide, PreprocessConfig,
    PreprocessError,
};
use crate::ranking::{rank_candidates, RankingMethod};
use crate::synth::{generate_synthetic, SyntheticConfig, SynthError};
use crate::types::{AffectiveClass, LogicalSensor, SubjectRecord, WeightVector};

pub const DEFAULT_SWEEP_FRACTIONS: [f64; 5] = [0.0001, 0.001, 0.01, 0.05, 0.1];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("config error: {0}")]
    Config(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// CLI exit code: 1 ingest, 2 config, 3 evaluation/runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Ingest(_) => 1,
            PipelineError::Config(_) => 2,
            PipelineError::Eval(_) | PipelineError::Io { .. } => 3,
        }
    }
}

impl From<SynthError> for PipelineError {
    fn from(e: SynthError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<PreprocessError> for PipelineError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::BadFraction(_) | PreprocessError::TooFewSubjects(_) => {
                PipelineError::Config(e.to_string())
            }
            other => PipelineError::Eval(other.to_string()),
        }
    }
}

impl From<crate::dtw::DtwError> for PipelineError {
    fn from(e: crate::dtw::DtwError) -> Self {
        PipelineError::Eval(e.to_string())
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        PipelineError::Eval(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Dataset { dir: PathBuf },
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassPolicy {
    /// No class filtering; snippets come from the whole record.
    All,
    Single(AffectiveClass),
    /// Per-class evaluation combined with the given class weights.
    WeightedMean(ClassWeights),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    Equal,
    /// Indicator weights over a sensor subset, normalized to sum 1.
    Sensors(Vec<LogicalSensor>),
    Explicit(WeightVector),
}

impl WeightSpec {
    pub fn resolve(&self) -> Result<WeightVector, PipelineError> {
        match self {
            WeightSpec::Equal => Ok(WeightVector::equal()),
            WeightSpec::Sensors(sensors) => {
                WeightVector::indicator(sensors).map_err(PipelineError::Config)
            }
            WeightSpec::Explicit(w) => Ok(*w),
        }
    }
}

/// Fully serializable run description; every run emits its resolved config
/// alongside its results so outputs are reproducible from the artifact alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: DataSource,
    pub preprocess: PreprocessConfig,
    pub dtw: DtwConfig,
    pub method: RankingMethod,
    pub class_policy: ClassPolicy,
    pub weights: WeightSpec,
    pub snippet_fraction: f64,
    pub sweep_fractions: Vec<f64>,
    pub filter_side: ClassFilterSide,
    pub grid_step: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn synthetic_defaults(synth: SyntheticConfig, output_dir: PathBuf) -> Self {
        let seed = synth.seed;
        RunConfig {
            source: DataSource::Synthetic(synth),
            preprocess: PreprocessConfig::default(),
            dtw: DtwConfig::default(),
            method: RankingMethod::Score,
            class_policy: ClassPolicy::All,
            weights: WeightSpec::Equal,
            snippet_fraction: 0.0001,
            sweep_fractions: DEFAULT_SWEEP_FRACTIONS.to_vec(),
            filter_side: ClassFilterSide::Both,
            grid_step: 0.1,
            output_dir,
            seed,
        }
    }
}

/// Loads records from the configured source (dataset directory or synthetic
/// generator).
pub fn load_records(source: &DataSource) -> Result<Vec<SubjectRecord>, PipelineError> {
    match source {
        DataSource::Dataset { dir } => {
            let manifest = DatasetManifest::read(dir)?;
            Ok(load_dataset(&manifest)?)
        }
        DataSource::Synthetic(config) => Ok(generate_synthetic(config)?),
    }
}

/// Cached scored tables for one class filter, with the skip count.
pub struct ScoredClass {
    pub tables: Vec<(ScoreTable, String)>,
    pub n_skipped: usize,
}

/// Builds instances for one class filter (None = no filtering) and scores
/// them once; everything downstream re-ranks these cached tables.
pub fn score_class(
    dataset: &[SubjectRecord],
    config: &RunConfig,
    fraction: f64,
    class: Option<AffectiveClass>,
) -> Result<ScoredClass, PipelineError> {
    let (instances, skipped) = build_attack_instances_lenient(
        dataset,
        &config.preprocess,
        fraction,
        class,
        config.filter_side,
        config.seed,
    )?;
    if instances.is_empty() {
        return Err(PipelineError::Eval(
            "no target has sufficient class data".to_string(),
        ));
    }
    let tables = score_instances(&instances, &config.dtw)?;
    Ok(ScoredClass {
        tables,
        n_skipped: skipped.len(),
    })
}

fn descriptor(config: &RunConfig, weights: WeightVector, class_policy: &str) -> ConfigDescriptor {
    ConfigDescriptor {
        method: Some(config.method),
        class_policy: Some(class_policy.to_string()),
        weights: Some(weights),
        snippet_fraction: Some(config.snippet_fraction),
        dtw: Some(config.dtw),
    }
}

/// Evaluates the configured class policy at one snippet fraction, returning
/// the report plus the cached per-class tables for artifact export.
pub fn evaluate_policy(
    dataset: &[SubjectRecord],
    config: &RunConfig,
    fraction: f64,
    weights: WeightVector,
) -> Result<(PrecisionReport, Vec<(Option<AffectiveClass>, ScoredClass)>), PipelineError> {
    match &config.class_policy {
        ClassPolicy::All => {
            let scored = score_class(dataset, config, fraction, None)?;
            let report = evaluate_tables(
                &scored.tables,
                config.method,
                &weights,
                descriptor(config, weights, "all"),
                scored.n_skipped,
            )?;
            Ok((report, vec![(None, scored)]))
        }
        ClassPolicy::Single(class) => {
            let scored = score_class(dataset, config, fraction, Some(*class))?;
            let report = evaluate_tables(
                &scored.tables,
                config.method,
                &weights,
                descriptor(config, weights, class.as_str()),
                scored.n_skipped,
            )?;
            Ok((report, vec![(Some(*class), scored)]))
        }
        ClassPolicy::WeightedMean(class_weights) => {
            let mut reports = BTreeMap::new();
            let mut all_scored = Vec::new();
            for class in AffectiveClass::ALL {
                let scored = score_class(dataset, config, fraction, Some(class))?;
                let report = evaluate_tables(
                    &scored.tables,
                    config.method,
                    &weights,
                    descriptor(config, weights, class.as_str()),
                    scored.n_skipped,
                )?;
                reports.insert(class, report);
                all_scored.push((Some(class), scored));
            }
            let combined = class_weighted_report(&reports, class_weights)?;
            Ok((combined, all_scored))
        }
    }
}

fn write_text(path: &Path, content: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| PipelineError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, content).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::Eval(format!("serialization failed: {e}")))?;
    write_text(path, &(text + "\n"))
}

fn write_resolved_config(config: &RunConfig) -> Result<(), PipelineError> {
    write_json(&config.output_dir.join("resolved_config.json"), config)
}

fn report_summary_csv(rows: &[(String, &PrecisionReport)]) -> String {
    let mut out = String::from("config,p_at_1,p_at_3,p_at_5,max_at_k,n_targets,n_skipped\n");
    for (label, report) in rows {
        let p3 = if report.n_candidates() >= 3 { report.p(3) } else { 1.0 };
        let p5 = if report.n_candidates() >= 5 { report.p(5) } else { 1.0 };
        out.push_str(&format!(
            "{label},{},{p3},{p5},{},{},{}\n",
            report.p(1),
            report.max_at_k,
            report.n_targets,
            report.n_skipped
        ));
    }
    out
}

fn export_scored_tables(
    dir: &Path,
    scored: &[(Option<AffectiveClass>, ScoredClass)],
    config: &RunConfig,
    weights: WeightVector,
) -> Result<(), PipelineError> {
    for (class, scored_class) in scored {
        let sub = match class {
            None => "all".to_string(),
            Some(c) => c.to_string(),
        };
        for (table, truth) in &scored_class.tables {
            let base = dir.join("score_tables").join(&sub);
            write_text(&base.join(format!("{}.csv", table.target_id)), &table.to_csv())?;
            write_json(&base.join(format!("{}.json", table.target_id)), table)?;
            let ranked = rank_candidates(table, config.method, &weights);
            let rdir = dir.join("ranked").join(&sub);
            write_text(&rdir.join(format!("{}.csv", table.target_id)), &ranked.to_csv())?;
            // evaluator-side truth mapping, one file per attack
            write_text(
                &dir.join("truth").join(&sub).join(format!("{}.txt", table.target_id)),
                &format!("{truth}\n"),
            )?;
        }
    }
    Ok(())
}

/// One full attack run: score tables, ranked lists, precision report,
/// baseline curve, and the resolved config land in the output directory.
pub fn cmd_attack(config: &RunConfig) -> Result<PrecisionReport, PipelineError> {
    let records = load_records(&config.source)?;
    let dataset = preprocess_dataset(&records, &config.preprocess)?;
    let weights = config.weights.resolve()?;
    let (report, scored) = evaluate_policy(&dataset, config, config.snippet_fraction, weights)?;

    let out = &config.output_dir;
    write_resolved_config(config)?;
    export_scored_tables(out, &scored, config, weights)?;
    write_json(&out.join("report.json"), &report)?;
    write_text(&out.join("report.csv"), &report.to_csv())?;
    let baseline = random_baseline(report.n_candidates());
    let mut baseline_csv = String::from("k,p_random\n");
    for (i, p) in baseline.iter().enumerate() {
        baseline_csv.push_str(&format!("{},{p}\n", i + 1));
    }
    write_text(&out.join("baseline.csv"), &baseline_csv)?;
    Ok(report)
}

/// Sensor-combination and attacker-set-size sweeps; emits one CSV per sweep.
pub fn cmd_sweep(config: &RunConfig) -> Result<(), PipelineError> {
    if config.sweep_fractions.is_empty() {
        return Err(PipelineError::Config("empty fraction list".to_string()));
    }
    let records = load_records(&config.source)?;
    let dataset = preprocess_dataset(&records, &config.preprocess)?;
    let out = &config.output_dir;
    write_resolved_config(config)?;

    // sensor combinations at the configured fraction
    let scored = score_class(
        &dataset,
        config,
        config.snippet_fraction,
        match &config.class_policy {
            ClassPolicy::Single(c) => Some(*c),
            _ => None,
        },
    )?;
    let combos = sweep_sensor_combinations(&scored.tables, config.method, scored.n_skipped)?;
    let rows: Vec<(String, &PrecisionReport)> =
        combos.iter().map(|(label, report)| (label.clone(), report)).collect();
    write_text(&out.join("sensor_combinations.csv"), &report_summary_csv(&rows))?;

    // attacker set sizes with the configured weights
    let weights = config.weights.resolve()?;
    let mut size_rows = Vec::new();
    let mut size_reports = Vec::new();
    for &fraction in &config.sweep_fractions {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(PipelineError::Config(format!(
                "sweep fraction {fraction} outside (0,1)"
            )));
        }
        let (report, _) = evaluate_policy(&dataset, config, fraction, weights)?;
        size_reports.push((fraction, report));
    }
    for (fraction, report) in &size_reports {
        size_rows.push((format!("{fraction}"), report));
    }
    write_text(&out.join("set_sizes.csv"), &report_summary_csv(&size_rows))?;
    Ok(())
}

/// Grid-search weight optimization per class; emits the per-class optimal
/// weight sets, radar-chart data, and the weighted-vs-naive comparison.
pub fn cmd_optimize(config: &RunConfig) -> Result<(), PipelineError> {
    let records = load_records(&config.source)?;
    let dataset = preprocess_dataset(&records, &config.preprocess)?;
    let out = &config.output_dir;
    write_resolved_config(config)?;

    let class_weights = match &config.class_policy {
        ClassPolicy::WeightedMean(w) => *w,
        _ => ClassWeights::default(),
    };

    // one scoring pass per class; the grid re-ranks cached tables
    let mut scored_per_class = BTreeMap::new();
    for class in AffectiveClass::ALL {
        scored_per_class.insert(
            class,
            score_class(&dataset, config, config.snippet_fraction, Some(class))?,
        );
    }

    let objective_ks = [1usize, 3, 5];
    let mut optimal_csv = String::from("class,k,acc,bvp,eda,temp,multiplicity\n");
    let mut results: BTreeMap<(AffectiveClass, usize), GridSearchResult> = BTreeMap::new();
    for class in AffectiveClass::ALL {
        let scored = &scored_per_class[&class];
        for &k in &objective_ks {
            if k > scored.tables[0].0.rows.len() {
                continue;
            }
            let result = grid_search_class(
                &scored.tables,
                config.method,
                config.grid_step,
                k,
                scored.n_skipped,
            )?;
            for w in &result.optimal {
                optimal_csv.push_str(&format!(
                    "{class},{k},{},{},{},{},{}\n",
                    w.acc,
                    w.bvp,
                    w.eda,
                    w.temp,
                    result.optimal.len()
                ));
            }
            results.insert((class, k), result);
        }
    }
    write_text(&out.join("optimal_weights.csv"), &optimal_csv)?;

    // naive (equal weights, class-weighted mean) vs weighted comparison
    let mut naive_reports = BTreeMap::new();
    for class in AffectiveClass::ALL {
        let scored = &scored_per_class[&class];
        naive_reports.insert(
            class,
            evaluate_tables(
                &scored.tables,
                config.method,
                &WeightVector::equal(),
                descriptor(config, WeightVector::equal(), class.as_str()),
                scored.n_skipped,
            )?,
        );
    }
    let naive = class_weighted_report(&naive_reports, &class_weights)?;

    let mut comparison = String::from("k,naive,weighted\n");
    for &k in &objective_ks {
        if k > naive.n_candidates() {
            continue;
        }
        let weighted: f64 = AffectiveClass::ALL
            .iter()
            .map(|&c| {
                class_weights.component(c)
                    * results.get(&(c, k)).map(|r| r.best_p).unwrap_or(0.0)
            })
            .sum();
        comparison.push_str(&format!("{k},{},{weighted}\n", naive.p(k)));
    }
    write_text(&out.join("naive_vs_weighted.csv"), &comparison)?;
    write_json(&out.join("grid_search.json"), &results.iter().map(|((c, k), r)| {
        serde_json::json!({
            "class": c.as_str(),
            "objective_k": k,
            "best_p": r.best_p,
            "evaluated": r.evaluated,
            "optimal": r.optimal,
        })
    }).collect::<Vec<_>>())?;
    Ok(())
}

/// Pairwise similarity matrices per logical sensor plus their entrywise
/// mean, as CSVs with subject ids on both axes.
pub fn cmd_heatmap(config: &RunConfig) -> Result<(), PipelineError> {
    let records = load_records(&config.source)?;
    let dataset = preprocess_dataset(&records, &config.preprocess)?;
    let out = &config.output_dir;
    write_resolved_config(config)?;

    let ids: Vec<&str> = dataset.iter().map(|r| r.subject_id.as_str()).collect();
    let n = ids.len();
    let mut aggregate = vec![vec![0.0f64; n]; n];
    for sensor in LogicalSensor::ALL {
        let matrix = pairwise_matrix(&dataset, sensor, &config.dtw)?;
        let mut csv = format!("subject,{}\n", ids.join(","));
        for (i, row) in matrix.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|s| format!("{}", s.value())).collect();
            csv.push_str(&format!("{},{}\n", ids[i], cells.join(",")));
            for (j, s) in row.iter().enumerate() {
                aggregate[i][j] += s.value() / LogicalSensor::ALL.len() as f64;
            }
        }
        write_text(&out.join(format!("heatmap_{sensor}.csv")), &csv)?;
    }
    let mut csv = format!("subject,{}\n", ids.join(","));
    for (i, row) in aggregate.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        csv.push_str(&format!("{},{}\n", ids[i], cells.join(",")));
    }
    write_text(&out.join("heatmap_aggregate.csv"), &csv)?;
    Ok(())
}

/// Generates a synthetic dataset and writes it in the interchange layout.
pub fn cmd_synth(synth: &SyntheticConfig, output_dir: &Path) -> Result<(), PipelineError> {
    let records = generate_synthetic(synth)?;
    write_dataset(output_dir, &records)?;
    Ok(())
}

/// Loads a dataset and reports per-subject validation results.
pub fn cmd_validate(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let manifest = DatasetManifest::read(dir)?;
    let records = load_dataset(&manifest)?;
    Ok(records
        .iter()
        .map(|r| format!("{}: ok ({} samples of BVP)", r.subject_id,
            r.series[&crate::types::SensorModality::Bvp].len()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config(dir: &Path) -> RunConfig {
        RunConfig::synthetic_defaults(
            SyntheticConfig {
                n_subjects: 3,
                duration_s: 30.0,
                seed: 17,
                separability: 0.7,
            },
            dir.to_path_buf(),
        )
    }

    #[test]
    fn attack_run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = synth_config(dir.path());
        config.snippet_fraction = 0.05;
        let report = cmd_attack(&config).unwrap();
        assert_eq!(report.n_targets, 3);
        for file in ["resolved_config.json", "report.json", "report.csv", "baseline.csv"] {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }
        assert!(dir.path().join("score_tables/all").read_dir().unwrap().count() >= 3);
    }

    #[test]
    fn identical_configs_produce_identical_outputs() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut a = synth_config(dir_a.path());
        let mut b = synth_config(dir_b.path());
        a.snippet_fraction = 0.05;
        b.snippet_fraction = 0.05;
        cmd_attack(&a).unwrap();
        cmd_attack(&b).unwrap();
        let report_a = fs::read(dir_a.path().join("report.csv")).unwrap();
        let report_b = fs::read(dir_b.path().join("report.csv")).unwrap();
        assert_eq!(report_a, report_b);
    }

    #[test]
    fn sweep_rejects_empty_fraction_list() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = synth_config(dir.path());
        config.sweep_fractions.clear();
        let err = cmd_sweep(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_dataset_dir_is_an_ingest_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = synth_config(dir.path());
        config.source = DataSource::Dataset {
            dir: PathBuf::from("/nonexistent/dataset"),
        };
        let err = cmd_attack(&config).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn synth_then_validate_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let synth = SyntheticConfig {
            n_subjects: 2,
            duration_s: 15.0,
            seed: 5,
            separability: 0.5,
        };
        cmd_synth(&synth, dir.path()).unwrap();
        let lines = cmd_validate(dir.path()).unwrap();
        assert_eq!(lines.len(), 2);
    }

    #[test]
    fn heatmap_outputs_are_symmetric_with_unit_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = synth_config(dir.path());
        // short series keep the pairwise matrices cheap
        config.source = DataSource::Synthetic(SyntheticConfig {
            n_subjects: 3,
            duration_s: 10.0,
            seed: 2,
            separability: 0.5,
        });
        config.preprocess.common_rate_hz = 4.0;
        cmd_heatmap(&config).unwrap();
        let text = fs::read_to_string(dir.path().join("heatmap_bvp.csv")).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
            .collect();
        for i in 0..rows.len() {
            assert_eq!(rows[i][i], 1.0);
            for j in 0..rows.len() {
                assert_eq!(rows[i][j], rows[j][i]);
            }
        }
    }
}
