//! Domain model: class alphabets, per-iteration confusion matrices, confusion
//! cubes and run sets.
//!
//! Orientation is fixed everywhere in this crate: rows are ground-truth
//! classes, columns are predicted classes.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while constructing model values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("a class alphabet needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate class label `{0}`")]
    DuplicateLabel(String),
    #[error("value {value} at epoch {epoch}, position {position} is outside the alphabet [0, {k})")]
    IndexOutOfAlphabet {
        epoch: usize,
        position: usize,
        value: i64,
        k: usize,
    },
    #[error("epoch {epoch} has {found} predictions but {expected} labels")]
    LengthMismatch {
        epoch: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("cube violates its invariants: {0}")]
    InvalidCube(ValidationReport),
    #[error("run `{0}` already exists")]
    DuplicateRunId(String),
    #[error("class alphabet of run `{run_id}` does not match the run set")]
    AlphabetMismatch { run_id: String },
}

/// Ordered, duplicate-free list of class names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ClassAlphabet {
    labels: Vec<String>,
}

impl ClassAlphabet {
    pub fn new<I, S>(labels: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(ModelError::TooFewClasses(labels.len()));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(ModelError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// Alphabet `"0", "1", …, "k-1"`.
    pub fn numbered(k: usize) -> Result<Self, ModelError> {
        Self::new((0..k).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl<'de> Deserialize<'de> for ClassAlphabet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<String>::deserialize(deserializer)?;
        ClassAlphabet::new(labels).map_err(serde::de::Error::custom)
    }
}

/// Square matrix of counts stored row-major.
///
/// Entries are signed so that externally supplied data with negative values
/// can be represented and reported by [`validate_cube`] instead of being
/// rejected at the type level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountMatrix {
    side: usize,
    data: Vec<i64>,
}

impl CountMatrix {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0; side * side],
        }
    }

    /// Builds a matrix from rows. Returns `None` if the rows do not form a
    /// square matrix.
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Option<Self> {
        let side = rows.len();
        let mut data = Vec::with_capacity(side * side);
        for row in rows {
            let row = row.as_ref();
            if row.len() != side {
                return None;
            }
            data.extend_from_slice(row);
        }
        Some(Self { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.data[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: i64) {
        self.data[row * self.side + col] = value;
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: i64) {
        self.data[row * self.side + col] += value;
    }

    pub fn row(&self, row: usize) -> &[i64] {
        &self.data[row * self.side..(row + 1) * self.side]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> {
        self.data.chunks(self.side.max(1)).take(self.side)
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        self.rows().map(<[i64]>::to_vec).collect()
    }

    pub fn total(&self) -> i64 {
        self.data.iter().sum()
    }

    pub fn trace(&self) -> i64 {
        (0..self.side).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, row: usize) -> i64 {
        self.row(row).iter().sum()
    }

    pub fn col_sum(&self, col: usize) -> i64 {
        (0..self.side).map(|r| self.get(r, col)).sum()
    }

    pub fn entries(&self) -> &[i64] {
        &self.data
    }
}

/// Confusion counts logged at one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpochConfusion {
    pub iteration: i64,
    pub counts: CountMatrix,
}

impl EpochConfusion {
    pub fn new(iteration: i64, counts: CountMatrix) -> Self {
        Self { iteration, counts }
    }

    /// Number of instances classified at this iteration.
    pub fn total(&self) -> i64 {
        self.counts.total()
    }
}

/// Iterations × K × K tensor of confusion counts for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCube {
    alphabet: ClassAlphabet,
    epochs: Vec<EpochConfusion>,
}

impl ConfusionCube {
    /// Builds a cube, rejecting it if [`validate_cube`] reports anything.
    pub fn new(alphabet: ClassAlphabet, epochs: Vec<EpochConfusion>) -> Result<Self, ModelError> {
        let cube = Self { alphabet, epochs };
        let report = validate_cube(&cube);
        if report.is_empty() {
            Ok(cube)
        } else {
            Err(ModelError::InvalidCube(report))
        }
    }

    /// Builds a cube without checking invariants. Use [`validate_cube`] to
    /// inspect the result.
    pub fn from_parts_unchecked(alphabet: ClassAlphabet, epochs: Vec<EpochConfusion>) -> Self {
        Self { alphabet, epochs }
    }

    pub fn alphabet(&self) -> &ClassAlphabet {
        &self.alphabet
    }

    pub fn k(&self) -> usize {
        self.alphabet.len()
    }

    pub fn epochs(&self) -> &[EpochConfusion] {
        &self.epochs
    }

    pub fn iterations(&self) -> Vec<i64> {
        self.epochs.iter().map(|e| e.iteration).collect()
    }

    pub fn epoch(&self, iteration: i64) -> Option<&EpochConfusion> {
        self.epochs
            .binary_search_by_key(&iteration, |e| e.iteration)
            .ok()
            .map(|idx| &self.epochs[idx])
    }

    pub fn last_epoch(&self) -> Option<&EpochConfusion> {
        self.epochs.last()
    }

    pub fn into_parts(self) -> (ClassAlphabet, Vec<EpochConfusion>) {
        (self.alphabet, self.epochs)
    }
}

/// A single broken cube invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Violation {
    EmptyCube,
    #[serde(rename_all = "camelCase")]
    NegativeCount {
        epoch: usize,
        row: usize,
        col: usize,
        value: i64,
    },
    #[serde(rename_all = "camelCase")]
    SideMismatch {
        epoch: usize,
        expected: usize,
        found: usize,
    },
    #[serde(rename_all = "camelCase")]
    NonIncreasingIteration {
        epoch: usize,
        previous: i64,
        iteration: i64,
    },
    #[serde(rename_all = "camelCase")]
    NegativeIteration {
        epoch: usize,
        iteration: i64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyCube => write!(f, "cube has no epochs"),
            Violation::NegativeCount { epoch, row, col, value } => {
                write!(f, "epoch {epoch}: negative count {value} at ({row}, {col})")
            }
            Violation::SideMismatch { epoch, expected, found } => {
                write!(f, "epoch {epoch}: matrix side {found}, expected {expected}")
            }
            Violation::NonIncreasingIteration {
                epoch,
                previous,
                iteration,
            } => write!(
                f,
                "epoch {epoch}: iteration {iteration} does not increase on {previous}"
            ),
            Violation::NegativeIteration { epoch, iteration } => {
                write!(f, "epoch {epoch}: negative iteration {iteration}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every cube invariant and lists what is broken. Epochs are named by
/// their position in the cube.
pub fn validate_cube(cube: &ConfusionCube) -> ValidationReport {
    let mut violations = Vec::new();
    if cube.epochs.is_empty() {
        violations.push(Violation::EmptyCube);
    }
    let k = cube.k();
    let mut previous: Option<i64> = None;
    for (epoch, ec) in cube.epochs.iter().enumerate() {
        if ec.iteration < 0 {
            violations.push(Violation::NegativeIteration {
                epoch,
                iteration: ec.iteration,
            });
        }
        if let Some(prev) = previous {
            if ec.iteration <= prev {
                violations.push(Violation::NonIncreasingIteration {
                    epoch,
                    previous: prev,
                    iteration: ec.iteration,
                });
            }
        }
        previous = Some(ec.iteration);

        let side = ec.counts.side();
        if side != k {
            violations.push(Violation::SideMismatch {
                epoch,
                expected: k,
                found: side,
            });
        }
        for row in 0..side {
            for col in 0..side {
                let value = ec.counts.get(row, col);
                if value < 0 {
                    violations.push(Violation::NegativeCount { epoch, row, col, value });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Builds a cube from ground-truth labels and one prediction list per
/// iteration. Iterations are numbered `0, 1, …` in input order.
pub fn confusion_from_predictions<P: AsRef<[i64]>>(
    alphabet: &ClassAlphabet,
    labels: &[i64],
    predictions: &[P],
) -> Result<ConfusionCube, ModelError> {
    confusion_from_epochs(
        alphabet,
        predictions
            .iter()
            .enumerate()
            .map(|(t, p)| (t as i64, labels, p.as_ref())),
    )
}

/// Builds a cube from `(iteration, labels, predictions)` triples. Labels may
/// differ per iteration, which covers datasets that grow over time.
pub fn confusion_from_epochs<'a, I>(alphabet: &ClassAlphabet, epochs: I) -> Result<ConfusionCube, ModelError>
where
    I: IntoIterator<Item = (i64, &'a [i64], &'a [i64])>,
{
    let k = alphabet.len();
    let check = |epoch: usize, position: usize, value: i64| -> Result<usize, ModelError> {
        if value < 0 || value as u64 >= k as u64 {
            Err(ModelError::IndexOutOfAlphabet {
                epoch,
                position,
                value,
                k,
            })
        } else {
            Ok(value as usize)
        }
    };

    let mut out = Vec::new();
    for (epoch, (iteration, labels, predictions)) in epochs.into_iter().enumerate() {
        if labels.is_empty() {
            return Err(ModelError::EmptyInput("no instances"));
        }
        if predictions.len() != labels.len() {
            return Err(ModelError::LengthMismatch {
                epoch,
                expected: labels.len(),
                found: predictions.len(),
            });
        }
        let mut counts = CountMatrix::zeros(k);
        for (position, (&truth, &pred)) in labels.iter().zip(predictions).enumerate() {
            let row = check(epoch, position, truth)?;
            let col = check(epoch, position, pred)?;
            counts.add(row, col, 1);
        }
        out.push(EpochConfusion::new(iteration, counts));
    }
    if out.is_empty() {
        return Err(ModelError::EmptyInput("no iterations"));
    }
    ConfusionCube::new(alphabet.clone(), out)
}

/// Descriptive metadata of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMeta {
    pub run_id: String,
    pub dataset_name: String,
    pub fold_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Assigned when the run joins a [`RunSet`].
    pub hue_index: Option<usize>,
}

impl RunMeta {
    pub fn new(run_id: impl Into<String>, dataset: impl Into<String>, fold: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            dataset_name: dataset.into(),
            fold_name: fold.into(),
            description: None,
            hue_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub meta: RunMeta,
    pub cube: Arc<ConfusionCube>,
}

impl Run {
    pub fn id(&self) -> &str {
        &self.meta.run_id
    }

    pub fn hue(&self) -> usize {
        self.meta.hue_index.expect("runs inside a RunSet always carry a hue")
    }
}

/// Ordered set of comparable runs sharing one class alphabet.
///
/// Hue indices are handed out in insertion order and never reused.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSet {
    runs: Vec<Run>,
}

impl RunSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut meta: RunMeta, cube: ConfusionCube) -> Result<&Run, ModelError> {
        if self.get(&meta.run_id).is_some() {
            return Err(ModelError::DuplicateRunId(meta.run_id));
        }
        if let Some(alphabet) = self.alphabet() {
            if alphabet != cube.alphabet() {
                return Err(ModelError::AlphabetMismatch { run_id: meta.run_id });
            }
        }
        meta.hue_index = Some(self.runs.len());
        self.runs.push(Run {
            meta,
            cube: Arc::new(cube),
        });
        Ok(self.runs.last().expect("just pushed"))
    }

    pub fn alphabet(&self) -> Option<&ClassAlphabet> {
        self.runs.first().map(|r| r.cube.alphabet())
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn get(&self, run_id: &str) -> Option<&Run> {
        self.runs.iter().find(|r| r.meta.run_id == run_id)
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn metas(&self) -> Vec<RunMeta> {
        self.runs.iter().map(|r| r.meta.clone()).collect()
    }
}
