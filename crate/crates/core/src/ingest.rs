//! Fold-log documents: parsing, validation, conversion into cubes and merging
//! into run sets.
//!
//! A fold log is a JSON object describing one run evaluated on one dataset
//! fold. Two payload shapes are accepted:
//!
//! ```json
//! { "runId": "r1", "dataset": "cifar10", "fold": "test", "classes": ["a", "b"],
//!   "labels": [0, 1, 1],
//!   "epochs": [ { "iterationId": 0, "predictions": [0, 1, 0] } ] }
//! ```
//!
//! ```json
//! { "runId": "r1", "dataset": "cifar10", "fold": "test", "classes": ["a", "b"],
//!   "epochs": [ { "iterationId": 0, "confusion": [[1, 0], [1, 1]] } ] }
//! ```
//!
//! Per-instance epochs may carry their own `labels` array, which replaces the
//! top-level labels for that epoch (datasets that grow between iterations).
//! Unknown fields are ignored.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    confusion_from_epochs, ClassAlphabet, ConfusionCube, CountMatrix, EpochConfusion, ModelError, RunMeta, RunSet,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("epoch {iteration}: confusion matrix is {rows}x{cols} but there are {k} classes")]
    AggregatedShapeMismatch {
        iteration: i64,
        rows: usize,
        cols: usize,
        k: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no fold logs to merge")]
    NothingToMerge,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldLog {
    pub run_id: String,
    pub dataset: String,
    pub fold: String,
    pub description: Option<String>,
    pub classes: Vec<String>,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    PerInstance {
        labels: Vec<i64>,
        epochs: Vec<PredictionEpoch>,
    },
    Aggregated {
        epochs: Vec<AggregatedEpoch>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionEpoch {
    pub iteration_id: i64,
    pub predictions: Vec<i64>,
    /// Replaces the top-level labels for this epoch when present.
    pub labels: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedEpoch {
    pub iteration_id: i64,
    pub confusion: Vec<Vec<i64>>,
}

// Wire shape, shared by the parser and the serializer.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireLog {
    run_id: String,
    dataset: String,
    fold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<i64>>,
    epochs: Vec<WireEpoch>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireEpoch {
    iteration_id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predictions: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confusion: Option<Vec<Vec<i64>>>,
}

impl FoldLog {
    /// Number of classes.
    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn epoch_count(&self) -> usize {
        match &self.payload {
            Payload::PerInstance { epochs, .. } => epochs.len(),
            Payload::Aggregated { epochs } => epochs.len(),
        }
    }

    /// Aggregated fold log carrying the counts of `cube`.
    pub fn from_cube(meta: &RunMeta, cube: &ConfusionCube) -> Self {
        FoldLog {
            run_id: meta.run_id.clone(),
            dataset: meta.dataset_name.clone(),
            fold: meta.fold_name.clone(),
            description: meta.description.clone(),
            classes: cube.alphabet().labels().to_vec(),
            payload: Payload::Aggregated {
                epochs: cube
                    .epochs()
                    .iter()
                    .map(|e| AggregatedEpoch {
                        iteration_id: e.iteration,
                        confusion: e.counts.to_rows(),
                    })
                    .collect(),
            },
        }
    }

    fn to_wire(&self) -> WireLog {
        let (labels, epochs) = match &self.payload {
            Payload::PerInstance { labels, epochs } => (
                Some(labels.clone()),
                epochs
                    .iter()
                    .map(|e| WireEpoch {
                        iteration_id: e.iteration_id,
                        predictions: Some(e.predictions.clone()),
                        labels: e.labels.clone(),
                        confusion: None,
                    })
                    .collect(),
            ),
            Payload::Aggregated { epochs } => (
                None,
                epochs
                    .iter()
                    .map(|e| WireEpoch {
                        iteration_id: e.iteration_id,
                        predictions: None,
                        labels: None,
                        confusion: Some(e.confusion.clone()),
                    })
                    .collect(),
            ),
        };
        WireLog {
            run_id: self.run_id.clone(),
            dataset: self.dataset.clone(),
            fold: self.fold.clone(),
            description: self.description.clone(),
            classes: self.classes.clone(),
            labels,
            epochs,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("fold log serialization cannot fail")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_wire()).expect("fold log serialization cannot fail")
    }
}

impl Serialize for FoldLog {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(serializer)
    }
}

pub fn parse_fold_log(bytes: &[u8]) -> Result<FoldLog, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    let wire: WireLog = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => IngestError::SchemaViolation(e.to_string()),
        _ => IngestError::MalformedDocument(e.to_string()),
    })?;
    from_wire(wire)
}

pub fn read_fold_log(path: impl AsRef<Path>) -> Result<FoldLog, IngestError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_fold_log(&bytes)
}

fn from_wire(wire: WireLog) -> Result<FoldLog, IngestError> {
    if wire.classes.len() < 2 {
        return Err(IngestError::SchemaViolation(format!(
            "`classes` needs at least two entries, got {}",
            wire.classes.len()
        )));
    }
    let mut seen = HashSet::new();
    for c in &wire.classes {
        if !seen.insert(c.as_str()) {
            return Err(IngestError::InvariantViolation(format!("duplicate class `{c}`")));
        }
    }
    if wire.epochs.is_empty() {
        return Err(IngestError::InvariantViolation("`epochs` is empty".into()));
    }
    for pair in wire.epochs.windows(2) {
        if pair[1].iteration_id <= pair[0].iteration_id {
            return Err(IngestError::InvariantViolation(format!(
                "iterationId {} follows {}; ids must strictly increase",
                pair[1].iteration_id, pair[0].iteration_id
            )));
        }
    }

    let any_pred = wire.epochs.iter().any(|e| e.predictions.is_some());
    let any_conf = wire.epochs.iter().any(|e| e.confusion.is_some());
    let payload = match (any_pred || wire.labels.is_some(), any_conf) {
        (true, true) => {
            return Err(IngestError::SchemaViolation(
                "document mixes per-instance and aggregated payloads".into(),
            ))
        }
        (false, false) => {
            return Err(IngestError::SchemaViolation(
                "document has neither `labels`/`predictions` nor `confusion`".into(),
            ))
        }
        (true, false) => {
            let labels = wire
                .labels
                .ok_or_else(|| IngestError::SchemaViolation("missing field `labels`".into()))?;
            let epochs = wire
                .epochs
                .into_iter()
                .map(|e| match e.predictions {
                    Some(predictions) => Ok(PredictionEpoch {
                        iteration_id: e.iteration_id,
                        predictions,
                        labels: e.labels,
                    }),
                    None => Err(IngestError::SchemaViolation(format!(
                        "epoch {} is missing `predictions`",
                        e.iteration_id
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Payload::PerInstance { labels, epochs }
        }
        (false, true) => {
            let epochs = wire
                .epochs
                .into_iter()
                .map(|e| {
                    if e.labels.is_some() {
                        return Err(IngestError::SchemaViolation(format!(
                            "epoch {} carries `labels` in an aggregated document",
                            e.iteration_id
                        )));
                    }
                    let confusion = e.confusion.ok_or_else(|| {
                        IngestError::SchemaViolation(format!("epoch {} is missing `confusion`", e.iteration_id))
                    })?;
                    if let Some(first) = confusion.first() {
                        if confusion.iter().any(|row| row.len() != first.len()) {
                            return Err(IngestError::SchemaViolation(format!(
                                "epoch {}: confusion matrix is not rectangular",
                                e.iteration_id
                            )));
                        }
                    }
                    if confusion.iter().flatten().any(|&v| v < 0) {
                        return Err(IngestError::InvariantViolation(format!(
                            "epoch {}: negative confusion count",
                            e.iteration_id
                        )));
                    }
                    Ok(AggregatedEpoch {
                        iteration_id: e.iteration_id,
                        confusion,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Payload::Aggregated { epochs }
        }
    };

    Ok(FoldLog {
        run_id: wire.run_id,
        dataset: wire.dataset,
        fold: wire.fold,
        description: wire.description,
        classes: wire.classes,
        payload,
    })
}

/// Converts a fold log into run metadata and a cube. The hue index stays
/// unassigned until the run joins a [`RunSet`].
pub fn build_run(log: &FoldLog) -> Result<(RunMeta, ConfusionCube), IngestError> {
    let alphabet = ClassAlphabet::new(log.classes.iter().cloned())?;
    let k = alphabet.len();
    let cube = match &log.payload {
        Payload::PerInstance { labels, epochs } => confusion_from_epochs(
            &alphabet,
            epochs.iter().map(|e| {
                (
                    e.iteration_id,
                    e.labels.as_deref().unwrap_or(labels.as_slice()),
                    e.predictions.as_slice(),
                )
            }),
        )?,
        Payload::Aggregated { epochs } => {
            let mut out = Vec::with_capacity(epochs.len());
            for e in epochs {
                let rows = e.confusion.len();
                let cols = e.confusion.first().map_or(0, Vec::len);
                let counts = CountMatrix::from_rows(&e.confusion).filter(|m| m.side() == k).ok_or(
                    IngestError::AggregatedShapeMismatch {
                        iteration: e.iteration_id,
                        rows,
                        cols,
                        k,
                    },
                )?;
                out.push(EpochConfusion::new(e.iteration_id, counts));
            }
            ConfusionCube::new(alphabet, out)?
        }
    };
    let meta = RunMeta {
        run_id: log.run_id.clone(),
        dataset_name: log.dataset.clone(),
        fold_name: log.fold.clone(),
        description: log.description.clone(),
        hue_index: None,
    };
    Ok((meta, cube))
}

/// Merges fold logs into a run set. Hue indices follow input order.
pub fn merge_runs(logs: &[FoldLog]) -> Result<RunSet, IngestError> {
    if logs.is_empty() {
        return Err(IngestError::NothingToMerge);
    }
    let mut set = RunSet::new();
    for log in logs {
        let (meta, cube) = build_run(log)?;
        set.push(meta, cube)?;
    }
    Ok(set)
}
