//! Temporal, comparative, class-level analysis of classifier confusion.
//!
//! Per-iteration classification logs of several runs are turned into
//! confusion cubes (iterations × K × K counts), from which accuracy,
//! per-class precision/recall/F1 and FN/FP series are derived. Lenses select
//! classes, aggregate them into superclasses and slice the iteration range;
//! the [`view`] module assembles everything a matrix-of-time-series client
//! needs, and [`service`] serves it over HTTP.
//!
//! Runnable examples live in `examples/`:
//!
//! ```bash
//! cargo run -p temporal-confusion --example build_cube
//! cargo run -p temporal-confusion --example compare_folds
//! cargo run -p temporal-confusion --example metric_series
//! cargo run -p temporal-confusion --example display_scaling
//! cargo run -p temporal-confusion --example many_classes
//! cargo run -p temporal-confusion --example timeline
//! cargo run -p temporal-confusion --example view_payload
//! cargo run -p temporal-confusion --example http_service
//! ```

pub mod cli;
pub mod ingest;
pub mod lens;
pub mod metrics;
pub mod model;
pub mod service;
pub mod view;

pub use ingest::{build_run, merge_runs, parse_fold_log, FoldLog, IngestError};
pub use lens::{ClassProjection, IterationRange, SuperclassMapping, ViewLens};
pub use metrics::{Metric, MetricSeries, Normalization, ScaleMode};
pub use model::{
    confusion_from_epochs, confusion_from_predictions, validate_cube, ClassAlphabet, ConfusionCube, CountMatrix,
    EpochConfusion, RunMeta, RunSet,
};
pub use view::{build_view, ViewPayload, ViewRequest};
