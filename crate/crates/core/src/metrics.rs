//! Global and class-level metric series, relative normalization and display
//! scaling.
//!
//! Rates with a zero denominator are reported as `None` (ABSENT), never as 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassAlphabet, ConfusionCube, CountMatrix, EpochConfusion};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("iteration {0} has no classified instances")]
    EmptyEpoch(i64),
    #[error("class index {index} is outside [0, {k})")]
    UnknownClass { index: usize, k: usize },
    #[error("iteration {0} is not present in the cube")]
    UnknownIteration(i64),
    #[error("metric `{0}` needs a class")]
    ClassRequired(Metric),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "accuracy")]
    Accuracy,
    #[serde(rename = "precision")]
    Precision,
    #[serde(rename = "recall")]
    Recall,
    #[serde(rename = "f1")]
    F1,
    #[serde(rename = "fp")]
    FalsePositives,
    #[serde(rename = "fn")]
    FalseNegatives,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::FalsePositives,
        Metric::FalseNegatives,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::FalsePositives => "fp",
            Metric::FalseNegatives => "fn",
        }
    }

    /// Whether the metric is defined per class.
    pub fn is_class_level(self) -> bool {
        !matches!(self, Metric::Accuracy)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            "f1" => Ok(Metric::F1),
            "fp" => Ok(Metric::FalsePositives),
            "fn" => Ok(Metric::FalseNegatives),
            other => Err(format!(
                "unknown metric `{other}` (expected accuracy, precision, recall, f1, fp or fn)"
            )),
        }
    }
}

/// Absolute counts or counts divided by the per-iteration instance total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Absolute,
    Relative,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" | "abs" => Ok(Normalization::Absolute),
            "relative" | "rel" => Ok(Normalization::Relative),
            other => Err(format!(
                "unknown normalization `{other}` (expected absolute or relative)"
            )),
        }
    }
}

/// One scalar metric over the iterations of a run. `None` marks ABSENT.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricSeries {
    pub metric: Metric,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_index: Option<usize>,
    pub iterations: Vec<i64>,
    pub values: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn with_run(mut self, run_id: impl Into<String>) -> Self {
        self.run_id = Some(run_id.into());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value_at(&self, iteration: i64) -> Option<Option<f64>> {
        self.iterations
            .iter()
            .position(|&t| t == iteration)
            .map(|idx| self.values[idx])
    }
}

/// True positives, false positives and false negatives of one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub tp: i64,
    pub fp: i64,
    #[serde(rename = "fn")]
    pub fn_: i64,
}

impl ClassCounts {
    pub fn of(counts: &CountMatrix, class: usize) -> Self {
        let tp = counts.get(class, class);
        Self {
            tp,
            fp: counts.col_sum(class) - tp,
            fn_: counts.row_sum(class) - tp,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        f1_score(self.precision(), self.recall())
    }
}

fn ratio(num: i64, den: i64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of precision and recall; ABSENT if either is ABSENT or both
/// are zero.
pub fn f1_score(precision: Option<f64>, recall: Option<f64>) -> Option<f64> {
    let (p, r) = (precision?, recall?);
    let sum = p + r;
    (sum > 0.0).then(|| 2.0 * p * r / sum)
}

fn check_class(cube: &ConfusionCube, class: usize) -> Result<(), MetricsError> {
    if class < cube.k() {
        Ok(())
    } else {
        Err(MetricsError::UnknownClass {
            index: class,
            k: cube.k(),
        })
    }
}

fn series<F>(cube: &ConfusionCube, metric: Metric, class: Option<usize>, f: F) -> MetricSeries
where
    F: Fn(&EpochConfusion) -> Option<f64>,
{
    MetricSeries {
        metric,
        run_id: None,
        class_index: class,
        iterations: cube.iterations(),
        values: cube.epochs().iter().map(f).collect(),
    }
}

/// Trace divided by the instance total at every iteration.
pub fn accuracy_series(cube: &ConfusionCube) -> Result<MetricSeries, MetricsError> {
    if let Some(e) = cube.epochs().iter().find(|e| e.total() == 0) {
        return Err(MetricsError::EmptyEpoch(e.iteration));
    }
    Ok(series(cube, Metric::Accuracy, None, |e| {
        Some(e.counts.trace() as f64 / e.total() as f64)
    }))
}

/// Like [`accuracy_series`] but reports empty iterations as ABSENT.
pub fn accuracy_series_lenient(cube: &ConfusionCube) -> MetricSeries {
    series(cube, Metric::Accuracy, None, |e| ratio(e.counts.trace(), e.total()))
}

pub fn class_counts(cube: &ConfusionCube, class: usize, iteration: i64) -> Result<ClassCounts, MetricsError> {
    check_class(cube, class)?;
    let epoch = cube.epoch(iteration).ok_or(MetricsError::UnknownIteration(iteration))?;
    Ok(ClassCounts::of(&epoch.counts, class))
}

pub fn precision_series(cube: &ConfusionCube, class: usize) -> Result<MetricSeries, MetricsError> {
    check_class(cube, class)?;
    Ok(series(cube, Metric::Precision, Some(class), |e| {
        ClassCounts::of(&e.counts, class).precision()
    }))
}

pub fn recall_series(cube: &ConfusionCube, class: usize) -> Result<MetricSeries, MetricsError> {
    check_class(cube, class)?;
    Ok(series(cube, Metric::Recall, Some(class), |e| {
        ClassCounts::of(&e.counts, class).recall()
    }))
}

pub fn f1_series(cube: &ConfusionCube, class: usize) -> Result<MetricSeries, MetricsError> {
    check_class(cube, class)?;
    Ok(series(cube, Metric::F1, Some(class), |e| {
        ClassCounts::of(&e.counts, class).f1()
    }))
}

fn error_series(
    cube: &ConfusionCube,
    class: usize,
    metric: Metric,
    normalization: Normalization,
) -> Result<MetricSeries, MetricsError> {
    check_class(cube, class)?;
    if normalization == Normalization::Relative {
        if let Some(e) = cube.epochs().iter().find(|e| e.total() == 0) {
            return Err(MetricsError::EmptyEpoch(e.iteration));
        }
    }
    Ok(series(cube, metric, Some(class), |e| {
        let c = ClassCounts::of(&e.counts, class);
        let count = if metric == Metric::FalsePositives { c.fp } else { c.fn_ };
        Some(match normalization {
            Normalization::Absolute => count as f64,
            Normalization::Relative => count as f64 / e.total() as f64,
        })
    }))
}

/// False positives of `class` per iteration: column sum minus the diagonal.
/// Under relative normalization the counts are divided by the instance total.
pub fn fp_series(
    cube: &ConfusionCube,
    class: usize,
    normalization: Normalization,
) -> Result<MetricSeries, MetricsError> {
    error_series(cube, class, Metric::FalsePositives, normalization)
}

/// False negatives of `class` per iteration: row sum minus the diagonal.
pub fn fn_series(
    cube: &ConfusionCube,
    class: usize,
    normalization: Normalization,
) -> Result<MetricSeries, MetricsError> {
    error_series(cube, class, Metric::FalseNegatives, normalization)
}

/// Dispatches on `metric`. `class` is required for class-level metrics and
/// ignored for accuracy.
pub fn metric_series(
    cube: &ConfusionCube,
    metric: Metric,
    class: Option<usize>,
    normalization: Normalization,
) -> Result<MetricSeries, MetricsError> {
    let class = || class.ok_or(MetricsError::ClassRequired(metric));
    match metric {
        Metric::Accuracy => accuracy_series(cube),
        Metric::Precision => precision_series(cube, class()?),
        Metric::Recall => recall_series(cube, class()?),
        Metric::F1 => f1_series(cube, class()?),
        Metric::FalsePositives => fp_series(cube, class()?, normalization),
        Metric::FalseNegatives => fn_series(cube, class()?, normalization),
    }
}

/// Instances per ground-truth class (row sums) at one iteration.
pub fn class_distribution(cube: &ConfusionCube, iteration: i64) -> Result<Vec<i64>, MetricsError> {
    let epoch = cube.epoch(iteration).ok_or(MetricsError::UnknownIteration(iteration))?;
    Ok((0..cube.k()).map(|j| epoch.counts.row_sum(j)).collect())
}

/// Instance total per iteration.
pub fn epoch_totals(cube: &ConfusionCube) -> Vec<i64> {
    cube.epochs().iter().map(EpochConfusion::total).collect()
}

/// Cube of ratios: every count divided by its iteration's instance total.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCube {
    alphabet: ClassAlphabet,
    iterations: Vec<i64>,
    // one row-major K×K block per iteration
    values: Vec<Vec<f64>>,
}

impl RatioCube {
    pub fn alphabet(&self) -> &ClassAlphabet {
        &self.alphabet
    }

    pub fn iterations(&self) -> &[i64] {
        &self.iterations
    }

    pub fn get(&self, epoch_index: usize, row: usize, col: usize) -> f64 {
        self.values[epoch_index][row * self.alphabet.len() + col]
    }

    pub fn epoch_values(&self, epoch_index: usize) -> &[f64] {
        &self.values[epoch_index]
    }

    pub fn epoch_sum(&self, epoch_index: usize) -> f64 {
        self.values[epoch_index].iter().sum()
    }

    pub fn to_rows(&self, epoch_index: usize) -> Vec<Vec<f64>> {
        self.values[epoch_index]
            .chunks(self.alphabet.len())
            .map(<[f64]>::to_vec)
            .collect()
    }
}

pub fn normalize_relative(cube: &ConfusionCube) -> Result<RatioCube, MetricsError> {
    let mut values = Vec::with_capacity(cube.epochs().len());
    for e in cube.epochs() {
        let total = e.total();
        if total == 0 {
            return Err(MetricsError::EmptyEpoch(e.iteration));
        }
        let total = total as f64;
        values.push(e.counts.entries().iter().map(|&c| c as f64 / total).collect());
    }
    Ok(RatioCube {
        alphabet: cube.alphabet().clone(),
        iterations: cube.iterations(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("gamma must lie in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("scale maximum must be finite and non-negative, got {0}")]
    BadMaximum(f64),
    #[error("value {value} at position {position} lies outside [0, {vmax}]")]
    OutOfRange { position: usize, value: f64, vmax: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    #[default]
    Linear,
    Log,
    #[serde(rename = "exp")]
    Exponential,
}

impl FromStr for ScaleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" | "lin" => Ok(ScaleMode::Linear),
            "log" => Ok(ScaleMode::Log),
            "exp" | "exponential" => Ok(ScaleMode::Exponential),
            other => Err(format!("unknown scale `{other}` (expected linear, log or exp)")),
        }
    }
}

/// Display values in `[0, 1]`. `all_zero` is set when the maximum is zero, in
/// which case every value is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaled {
    pub values: Vec<f64>,
    pub all_zero: bool,
}

/// Scales `values` against their own maximum.
pub fn apply_scale(values: &[f64], mode: ScaleMode, gamma: f64) -> Result<Scaled, ScaleError> {
    let vmax = values.iter().copied().fold(0.0_f64, f64::max);
    apply_scale_with_max(values, vmax, mode, gamma)
}

/// Maps each `v` in `[0, vmax]` to `[0, 1]`:
/// linear `v/vmax`, log `ln(1+v)/ln(1+vmax)`, exponential `(v/vmax)^gamma`.
pub fn apply_scale_with_max(values: &[f64], vmax: f64, mode: ScaleMode, gamma: f64) -> Result<Scaled, ScaleError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ScaleError::BadGamma(gamma));
    }
    if !vmax.is_finite() || vmax < 0.0 {
        return Err(ScaleError::BadMaximum(vmax));
    }
    if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= vmax)) {
        return Err(ScaleError::OutOfRange { position, value, vmax });
    }
    if vmax == 0.0 {
        return Ok(Scaled {
            values: vec![0.0; values.len()],
            all_zero: true,
        });
    }
    let log_max = vmax.ln_1p();
    let values = values
        .iter()
        .map(|&v| match mode {
            ScaleMode::Linear => v / vmax,
            ScaleMode::Log => v.ln_1p() / log_max,
            ScaleMode::Exponential => (v / vmax).powf(gamma),
        })
        .collect();
    Ok(Scaled {
        values,
        all_zero: false,
    })
}
