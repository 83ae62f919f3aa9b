//! Assembly of matrix view payloads: per-cell time series for every visible
//! class pair and run, FN/FP margins, accuracy, and per-class panels.
//!
//! The lens is applied per run (slice, then class projection) and metrics are
//! computed on the projected cube. Under relative normalization, cell and
//! margin counts are divided by the instance total of the sliced run before
//! projection, so hiding classes never inflates ratios.

use serde::Serialize;
use thiserror::Error;

use crate::lens::{ClassProjection, IterationRange, LensError, LensWarning, Superclass, ViewLens};
use crate::metrics::{self, apply_scale_with_max, ClassCounts, Normalization, ScaleError, ScaleMode};
use crate::model::{ConfusionCube, Run, RunSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViewError {
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("no runs to show")]
    NoRuns,
    #[error(transparent)]
    Lens(#[from] LensError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewRequest {
    /// Runs to show, in display order. Empty means every loaded run.
    pub run_ids: Vec<String>,
    pub lens: ViewLens,
    /// Also return the unscaled values.
    pub raw: bool,
}

impl ViewRequest {
    pub fn new(lens: ViewLens) -> Self {
        Self {
            run_ids: Vec::new(),
            lens,
            raw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRef {
    pub run_id: String,
    pub hue_index: usize,
}

/// One run's lane in a cell, margin or panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DisplaySeries {
    pub run_id: String,
    pub iterations: Vec<i64>,
    pub values: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSeries {
    pub row: usize,
    pub col: usize,
    pub series: Vec<DisplaySeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMargin {
    pub class: usize,
    pub series: Vec<DisplaySeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Margins {
    pub false_negatives: Vec<ClassMargin>,
    pub false_positives: Vec<ClassMargin>,
    pub accuracy: Vec<DisplaySeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceCount {
    pub run_id: String,
    pub iteration: i64,
    pub count: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassPanel {
    pub class: usize,
    pub precision: Vec<DisplaySeries>,
    pub recall: Vec<DisplaySeries>,
    pub f1: Vec<DisplaySeries>,
    /// Instances of this class per run, at the focused iteration when the run
    /// has it, otherwise at the run's last visible iteration.
    pub instances: Vec<InstanceCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ClassesEcho {
    All,
    Subset { indices: Vec<usize> },
    Superclasses { groups: Vec<Superclass> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LensEcho {
    pub classes: ClassesEcho,
    pub range: Option<IterationRange>,
    pub focus: Option<i64>,
    pub normalization: Normalization,
    pub scale: ScaleMode,
    pub gamma: f64,
    pub rotated: bool,
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleInfo {
    /// Maximum raw cell value, mapped to display value 1.
    pub cell_max: f64,
    pub cell_all_zero: bool,
    /// Maximum raw FN/FP margin value.
    pub margin_max: f64,
    pub margin_all_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ViewPayload {
    pub lens: LensEcho,
    pub runs: Vec<RunRef>,
    pub classes: Vec<String>,
    /// Smallest and largest visible iteration over all runs.
    pub extent: IterationRange,
    pub cells: Vec<CellSeries>,
    pub margins: Margins,
    pub class_stats: Vec<ClassPanel>,
    pub scale: ScaleInfo,
    pub warnings: Vec<LensWarning>,
}

struct RunView<'a> {
    run: &'a Run,
    projected: ConfusionCube,
    totals: Vec<i64>,
}

impl RunView<'_> {
    fn normalize(&self, epoch: usize, count: i64, normalization: Normalization) -> Option<f64> {
        match normalization {
            Normalization::Absolute => Some(count as f64),
            Normalization::Relative => {
                let total = self.totals[epoch];
                (total != 0).then(|| count as f64 / total as f64)
            }
        }
    }

    fn lane(&self, values: Vec<Option<f64>>) -> DisplaySeries {
        DisplaySeries {
            run_id: self.run.meta.run_id.clone(),
            iterations: self.projected.iterations(),
            values,
            raw: None,
        }
    }
}

/// Builds the payload for `request`. The result depends only on the run set
/// and the request.
pub fn build_view(runs: &RunSet, request: &ViewRequest) -> Result<ViewPayload, ViewError> {
    let selected: Vec<&Run> = if request.run_ids.is_empty() {
        runs.runs().iter().collect()
    } else {
        request
            .run_ids
            .iter()
            .map(|id| runs.get(id).ok_or_else(|| ViewError::UnknownRun(id.clone())))
            .collect::<Result<_, _>>()?
    };
    let first = selected.first().ok_or(ViewError::NoRuns)?;
    let lens = &request.lens;
    let k = first.cube.k();
    lens.validate(k)?;
    // gamma is checked even when the scale does not use it
    apply_scale_with_max(&[], 0.0, lens.scale, lens.gamma)?;

    let views: Vec<RunView<'_>> = selected
        .iter()
        .map(|run| {
            let sliced = lens.slice(&run.cube)?;
            let totals = metrics::epoch_totals(&sliced);
            let projected = lens.project(&sliced)?;
            Ok(RunView { run, projected, totals })
        })
        .collect::<Result<_, LensError>>()?;

    let classes = views[0].projected.alphabet().labels().to_vec();
    let n = classes.len();
    let norm = lens.normalization;

    let mut cells = Vec::with_capacity(n * n.saturating_sub(1));
    for row in 0..n {
        for col in (0..n).filter(|&c| c != row) {
            let series = views
                .iter()
                .map(|v| {
                    v.lane(
                        v.projected
                            .epochs()
                            .iter()
                            .enumerate()
                            .map(|(t, e)| v.normalize(t, e.counts.get(row, col), norm))
                            .collect(),
                    )
                })
                .collect();
            cells.push(CellSeries { row, col, series });
        }
    }

    let margin = |pick: fn(&ClassCounts) -> i64| -> Vec<ClassMargin> {
        (0..n)
            .map(|class| ClassMargin {
                class,
                series: views
                    .iter()
                    .map(|v| {
                        v.lane(
                            v.projected
                                .epochs()
                                .iter()
                                .enumerate()
                                .map(|(t, e)| v.normalize(t, pick(&ClassCounts::of(&e.counts, class)), norm))
                                .collect(),
                        )
                    })
                    .collect(),
            })
            .collect()
    };
    let mut false_negatives = margin(|c| c.fn_);
    let mut false_positives = margin(|c| c.fp);
    let accuracy: Vec<DisplaySeries> = views
        .iter()
        .map(|v| v.lane(metrics::accuracy_series_lenient(&v.projected).values))
        .collect();

    let cell_max = max_of(cells.iter().flat_map(|c| &c.series));
    let margin_max = max_of(false_negatives.iter().chain(&false_positives).flat_map(|m| &m.series));
    let mut cell_all_zero = false;
    for cell in &mut cells {
        for s in &mut cell.series {
            cell_all_zero |= scale_in_place(s, cell_max, lens, request.raw)?;
        }
    }
    let mut margin_all_zero = false;
    for m in false_negatives.iter_mut().chain(false_positives.iter_mut()) {
        for s in &mut m.series {
            margin_all_zero |= scale_in_place(s, margin_max, lens, request.raw)?;
        }
    }

    let class_stats = (0..n)
        .map(|class| {
            let rate = |f: fn(&ClassCounts) -> Option<f64>| -> Vec<DisplaySeries> {
                views
                    .iter()
                    .map(|v| {
                        v.lane(
                            v.projected
                                .epochs()
                                .iter()
                                .map(|e| f(&ClassCounts::of(&e.counts, class)))
                                .collect(),
                        )
                    })
                    .collect()
            };
            ClassPanel {
                class,
                precision: rate(ClassCounts::precision),
                recall: rate(ClassCounts::recall),
                f1: rate(ClassCounts::f1),
                instances: views
                    .iter()
                    .map(|v| {
                        let epoch = lens
                            .focus
                            .and_then(|t| v.projected.epoch(t))
                            .or_else(|| v.projected.last_epoch())
                            .expect("sliced cubes are non-empty");
                        InstanceCount {
                            run_id: v.run.meta.run_id.clone(),
                            iteration: epoch.iteration,
                            count: epoch.counts.row_sum(class),
                        }
                    })
                    .collect(),
            }
        })
        .collect();

    let extent = IterationRange {
        from: views
            .iter()
            .map(|v| v.projected.epochs()[0].iteration)
            .min()
            .expect("at least one run"),
        to: views
            .iter()
            .map(|v| v.projected.last_epoch().expect("non-empty").iteration)
            .max()
            .expect("at least one run"),
    };

    Ok(ViewPayload {
        lens: LensEcho {
            classes: match &lens.classes {
                ClassProjection::All => ClassesEcho::All,
                ClassProjection::Subset(indices) => ClassesEcho::Subset {
                    indices: indices.clone(),
                },
                ClassProjection::Superclasses(mapping) => ClassesEcho::Superclasses {
                    groups: mapping.groups().to_vec(),
                },
            },
            range: lens.range,
            focus: lens.focus,
            normalization: lens.normalization,
            scale: lens.scale,
            gamma: lens.gamma,
            rotated: lens.rotated,
            raw: request.raw,
        },
        runs: views
            .iter()
            .map(|v| RunRef {
                run_id: v.run.meta.run_id.clone(),
                hue_index: v.run.hue(),
            })
            .collect(),
        classes,
        extent,
        cells,
        margins: Margins {
            false_negatives,
            false_positives,
            accuracy,
        },
        class_stats,
        scale: ScaleInfo {
            cell_max,
            cell_all_zero,
            margin_max,
            margin_all_zero,
        },
        warnings: lens.warnings(k),
    })
}

fn max_of<'a>(series: impl Iterator<Item = &'a DisplaySeries>) -> f64 {
    series
        .flat_map(|s| s.values.iter().flatten())
        .copied()
        .fold(0.0, f64::max)
}

/// Replaces present values by their display values. Returns the all-zero flag.
fn scale_in_place(series: &mut DisplaySeries, vmax: f64, lens: &ViewLens, keep_raw: bool) -> Result<bool, ScaleError> {
    let present: Vec<f64> = series.values.iter().flatten().copied().collect();
    let scaled = apply_scale_with_max(&present, vmax, lens.scale, lens.gamma)?;
    let mut it = scaled.values.into_iter();
    let display = series
        .values
        .iter()
        .map(|v| v.map(|_| it.next().expect("same length")))
        .collect();
    let raw = std::mem::replace(&mut series.values, display);
    if keep_raw {
        series.raw = Some(raw);
    }
    Ok(scaled.all_zero)
}
