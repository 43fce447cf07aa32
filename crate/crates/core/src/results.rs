//! Per-condition classifier results: the CSV wire format produced by model
//! evaluators and its JSON metadata sidecar.
//!
//! ```text
//! condition_ordinal,canonical_label,correct,total,accuracy
//! 1,clean,461,500,0.922000
//! ```
//!
//! The sidecar lives next to the CSV with a `.json` extension and holds
//! `{classifier_name, training_label, manifest_digest}`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::BenchmarkManifest;

pub const CSV_HEADER: [&str; 5] = [
    "condition_ordinal",
    "canonical_label",
    "correct",
    "total",
    "accuracy",
];

/// Allowed gap between `accuracy` and `correct / total`.
pub const ACCURACY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: expected header {expected:?}, found {found:?}", path.display())]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: bad sidecar: {source}", path.display())]
    Sidecar {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition_ordinal: u32,
    pub canonical_label: String,
    pub correct: u64,
    pub total: u64,
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
}

impl ResultRow {
    pub fn new(condition_ordinal: u32, canonical_label: &str, correct: u64, total: u64) -> Self {
        Self {
            condition_ordinal,
            canonical_label: canonical_label.to_string(),
            correct,
            total,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub classifier_name: String,
    pub training_label: String,
    pub manifest_digest: Option<String>,
}

/// Accuracies of one trained classifier on every test condition.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResults {
    pub classifier_name: String,
    pub training_label: String,
    pub manifest_digest: Option<String>,
    pub rows: Vec<ResultRow>,
}

impl RunResults {
    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            classifier_name: self.classifier_name.clone(),
            training_label: self.training_label.clone(),
            manifest_digest: self.manifest_digest.clone(),
        }
    }

    pub fn display_name(&self) -> String {
        format!("{}({})", self.classifier_name, self.training_label)
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_csv<W: io::Write>(rows: &[ResultRow], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for r in rows {
        writer.write_record([
            r.condition_ordinal.to_string(),
            r.canonical_label.clone(),
            r.correct.to_string(),
            r.total.to_string(),
            format!("{:.6}", r.accuracy),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R, path: &Path) -> Result<Vec<ResultRow>, ResultsError> {
    let csv_err = |source| ResultsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(ResultsError::Header {
            path: path.to_path_buf(),
            expected: CSV_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    reader
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(csv_err)
}

/// Writes `results` as `csv_path` plus its sidecar.
pub fn write_results(results: &RunResults, csv_path: &Path) -> Result<(), ResultsError> {
    let file = fs::File::create(csv_path).map_err(|source| ResultsError::Io {
        path: csv_path.to_path_buf(),
        source,
    })?;
    write_csv(&results.rows, file).map_err(|source| ResultsError::Csv {
        path: csv_path.to_path_buf(),
        source,
    })?;
    let side = sidecar_path(csv_path);
    let mut json = serde_json::to_string_pretty(&results.sidecar()).expect("sidecar serializes");
    json.push('\n');
    fs::write(&side, json).map_err(|source| ResultsError::Io { path: side, source })
}

/// Reads a results CSV and its sidecar.
pub fn load_results(csv_path: &Path) -> Result<RunResults, ResultsError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ResultsError::Io { path, source }
    };
    let file = fs::File::open(csv_path).map_err(io_err(csv_path))?;
    let rows = read_csv(file, csv_path)?;
    let side = sidecar_path(csv_path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|source| ResultsError::Sidecar { path: side, source })?;
    Ok(RunResults {
        classifier_name: sidecar.classifier_name,
        training_label: sidecar.training_label,
        manifest_digest: sidecar.manifest_digest,
        rows,
    })
}

/// A way in which a results file fails to describe a manifest's conditions.
#[derive(Clone, Debug, PartialEq)]
pub enum Gap {
    Missing { ordinal: u32, label: String },
    Duplicate(u32),
    UnknownCondition(u32),
    LabelMismatch { ordinal: u32, expected: String, found: String },
    BadAccuracy { ordinal: u32, detail: String },
    DigestMismatch { expected: String, found: String },
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gap::Missing { ordinal, label } => write!(f, "missing condition #{ordinal} ({label})"),
            Gap::Duplicate(o) => write!(f, "condition #{o} appears more than once"),
            Gap::UnknownCondition(o) => write!(f, "condition #{o} is not in the manifest"),
            Gap::LabelMismatch {
                ordinal,
                expected,
                found,
            } => write!(f, "condition #{ordinal} is {expected}, row says {found}"),
            Gap::BadAccuracy { ordinal, detail } => {
                write!(f, "condition #{ordinal}: {detail}")
            }
            Gap::DigestMismatch { expected, found } => write!(
                f,
                "results were produced for manifest {found}, not {expected}"
            ),
        }
    }
}

/// Every way `results` fails to cover `manifest` exactly once with
/// consistent accuracies. Empty means valid.
pub fn validate_results(results: &RunResults, manifest: &BenchmarkManifest) -> Vec<Gap> {
    let mut gaps = Vec::new();
    if let Some(found) = &results.manifest_digest {
        if *found != manifest.digest {
            gaps.push(Gap::DigestMismatch {
                expected: manifest.digest.clone(),
                found: found.clone(),
            });
        }
    }

    let labels: BTreeMap<u32, &str> = manifest
        .conditions
        .iter()
        .map(|e| (e.condition.ordinal, e.condition.canonical_label.as_str()))
        .collect();
    let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
    for row in &results.rows {
        let ordinal = row.condition_ordinal;
        *seen.entry(ordinal).or_default() += 1;
        if seen[&ordinal] == 2 {
            gaps.push(Gap::Duplicate(ordinal));
        }
        match labels.get(&ordinal) {
            None => gaps.push(Gap::UnknownCondition(ordinal)),
            Some(&label) if label != row.canonical_label => gaps.push(Gap::LabelMismatch {
                ordinal,
                expected: label.to_string(),
                found: row.canonical_label.clone(),
            }),
            Some(_) => {}
        }
        let bad = |detail: String| Gap::BadAccuracy { ordinal, detail };
        if !(0.0..=1.0).contains(&row.accuracy) {
            gaps.push(bad(format!("accuracy {} outside [0, 1]", row.accuracy)));
        } else if row.total == 0 || row.correct > row.total {
            gaps.push(bad(format!("{} correct of {}", row.correct, row.total)));
        } else if (row.accuracy - row.correct as f64 / row.total as f64).abs()
            > ACCURACY_TOLERANCE
        {
            gaps.push(bad(format!(
                "accuracy {} != {}/{}",
                row.accuracy, row.correct, row.total
            )));
        }
    }
    for (&ordinal, &label) in &labels {
        if !seen.contains_key(&ordinal) {
            gaps.push(Gap::Missing {
                ordinal,
                label: label.to_string(),
            });
        }
    }
    gaps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ConditionEntry, CorpusInfo, SCHEMA_VERSION};
    use crate::grid::{enumerate_conditions, GridConfig};

    fn manifest() -> BenchmarkManifest {
        let config = GridConfig::default();
        let mut m = BenchmarkManifest {
            schema_version: SCHEMA_VERSION,
            master_seed: 1,
            conditions: enumerate_conditions(&config)
                .unwrap()
                .into_iter()
                .map(|c| ConditionEntry {
                    directory: c.directory(),
                    condition: c,
                    files: vec![],
                })
                .collect(),
            grid_config: config,
            corpus: CorpusInfo {
                image_count: 0,
                width: 1,
                height: 1,
                sources: vec![],
            },
            digest: String::new(),
        };
        m.seal();
        m
    }

    fn full_run(m: &BenchmarkManifest) -> RunResults {
        RunResults {
            classifier_name: "Net".into(),
            training_label: "SP0.1".into(),
            manifest_digest: Some(m.digest.clone()),
            rows: m
                .conditions
                .iter()
                .map(|e| ResultRow::new(e.condition.ordinal, &e.condition.canonical_label, 7, 9))
                .collect(),
        }
    }

    #[test]
    fn csv_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let m = manifest();
        let run = full_run(&m);
        write_results(&run, &path).unwrap();
        assert!(dir.path().join("run.json").is_file());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("condition_ordinal,canonical_label,correct,total,accuracy\n1,clean,7,9,0.777778\n"));

        let back = load_results(&path).unwrap();
        assert_eq!(back.classifier_name, "Net");
        assert_eq!(back.rows.len(), 69);
        assert!(validate_results(&back, &m).is_empty());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let input = "ordinal,label,correct,total,accuracy\n1,clean,1,1,1\n";
        assert!(matches!(
            read_csv(input.as_bytes(), Path::new("x.csv")),
            Err(ResultsError::Header { .. })
        ));
    }

    #[test]
    fn gaps_are_reported() {
        let m = manifest();
        let mut run = full_run(&m);
        run.rows.remove(4);
        run.rows[0].canonical_label = "SP0.1".into();
        run.rows[1].accuracy = 0.5;
        run.rows.push(run.rows[2].clone());
        run.rows.push(ResultRow::new(99, "clean", 1, 1));
        let gaps = validate_results(&run, &m);
        assert!(gaps.contains(&Gap::Missing {
            ordinal: 5,
            label: m.conditions[4].condition.canonical_label.clone()
        }));
        assert!(gaps.contains(&Gap::LabelMismatch {
            ordinal: 1,
            expected: "clean".into(),
            found: "SP0.1".into()
        }));
        assert!(gaps.iter().any(|g| matches!(g, Gap::BadAccuracy { ordinal: 2, .. })));
        assert!(gaps.contains(&Gap::Duplicate(3)));
        assert!(gaps.contains(&Gap::UnknownCondition(99)));
        assert_eq!(gaps.len(), 5);
    }

    #[test]
    fn digest_mismatch_is_a_gap() {
        let m = manifest();
        let mut run = full_run(&m);
        run.manifest_digest = Some("abc".into());
        assert!(matches!(
            validate_results(&run, &m).as_slice(),
            [Gap::DigestMismatch { .. }]
        ));
    }
}
