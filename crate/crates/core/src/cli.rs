//! Batch command line: `validate`, `metrics`, `rank`, `aggregate`, `serve`.
//!
//! Exit codes: 0 on success, 1 when validation or a domain operation fails,
//! 2 on usage errors.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::ingest::{build_run, read_fold_log, FoldLog};
use crate::lens::{aggregate_superclasses, rank_cells_by_final_confusion, rank_classes_by_final_f1, SuperclassMapping};
use crate::metrics::{Metric, MetricSeries, Normalization};
use crate::model::{validate_cube, RunSet};
use crate::service::{serve, ApiError, MetricQuery, Store};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tconf", version, about = "Temporal confusion analysis of classifier runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankBy {
    F1,
    Confusion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check fold-log files and report invariant violations.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Print metric series of one run.
    Metrics {
        file: PathBuf,
        /// Class label or index; without it only accuracy is printed.
        #[arg(long)]
        class: Option<String>,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, value_parser = parse_norm, default_value = "absolute")]
        norm: Normalization,
    },
    /// Rank classes by final F1 or class pairs by final confusion.
    Rank {
        file: PathBuf,
        #[arg(long, value_enum)]
        by: RankBy,
        #[arg(short = 'k', default_value_t = 10)]
        k: usize,
        /// Best F1 first instead of worst first.
        #[arg(long)]
        descending: bool,
        #[arg(long)]
        json: bool,
    },
    /// Sum a run into superclasses and print the aggregated fold log.
    Aggregate {
        file: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of fold logs loaded at startup; `CF_DATA_DIR` takes precedence.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

fn parse_norm(s: &str) -> Result<Normalization, String> {
    s.parse()
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Validate { files } => return validate(&files, out),
        Command::Metrics {
            file,
            class,
            metric,
            format,
            norm,
        } => metrics(&file, class, metric, format, norm, out),
        Command::Rank {
            file,
            by,
            k,
            descending,
            json,
        } => rank(&file, by, k, !descending, json, out),
        Command::Aggregate { file, mapping } => aggregate(&file, &mapping, out),
        Command::Serve { port, host, data_dir } => {
            let data_dir = std::env::var_os("CF_DATA_DIR").map(PathBuf::from).or(data_dir);
            run_server(&host, port, data_dir)
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            EXIT_FAILURE
        }
    }
}

fn load_single(file: &PathBuf) -> Result<RunSet, ApiError> {
    let log = read_fold_log(file)?;
    let (meta, cube) = build_run(&log)?;
    let mut set = RunSet::new();
    set.push(meta, cube)?;
    Ok(set)
}

fn io_err(e: std::io::Error) -> ApiError {
    ApiError::new(500, "IO_ERROR", e.to_string())
}

fn validate(files: &[PathBuf], out: &mut dyn Write) -> i32 {
    let mut failed = false;
    for file in files {
        let line = match read_fold_log(file).and_then(|log| build_run(&log)) {
            Ok((_, cube)) => {
                let report = validate_cube(&cube);
                failed |= !report.is_empty();
                json!({ "file": file, "ok": report.is_empty(), "violations": report })
            }
            Err(e) => {
                failed = true;
                json!({ "file": file, "ok": false, "error": ApiError::from(e) })
            }
        };
        if writeln!(out, "{line}").is_err() {
            return EXIT_FAILURE;
        }
    }
    if failed {
        EXIT_FAILURE
    } else {
        EXIT_OK
    }
}

fn metrics(
    file: &PathBuf,
    class: Option<String>,
    metric: Option<Metric>,
    format: Format,
    norm: Normalization,
    out: &mut dyn Write,
) -> Result<(), ApiError> {
    let runs = load_single(file)?;
    let run_id = runs.runs()[0].id().to_string();
    let wanted: Vec<Metric> = match (metric, &class) {
        (Some(m), _) => vec![m],
        (None, None) => vec![Metric::Accuracy],
        (None, Some(_)) => Metric::ALL.into_iter().filter(|m| m.is_class_level()).collect(),
    };
    let series = wanted
        .into_iter()
        .map(|metric| {
            MetricQuery {
                run_id: run_id.clone(),
                metric,
                class: class.clone(),
                normalization: norm,
            }
            .evaluate(&runs)
        })
        .collect::<Result<Vec<MetricSeries>, _>>()?;
    match format {
        Format::Json => {
            let text = serde_json::to_string(&series).expect("series serialize");
            writeln!(out, "{text}").map_err(io_err)?;
        }
        Format::Csv => {
            writeln!(out, "run,metric,class,iteration,value").map_err(io_err)?;
            for s in &series {
                let class = s.class_index.map(|c| c.to_string()).unwrap_or_default();
                for (t, v) in s.iterations.iter().zip(&s.values) {
                    let v = v.map(|v| v.to_string()).unwrap_or_default();
                    writeln!(out, "{run_id},{},{class},{t},{v}", s.metric).map_err(io_err)?;
                }
            }
        }
    }
    Ok(())
}

fn rank(
    file: &PathBuf,
    by: RankBy,
    k: usize,
    ascending: bool,
    as_json: bool,
    out: &mut dyn Write,
) -> Result<(), ApiError> {
    let runs = load_single(file)?;
    let cube = &runs.runs()[0].cube;
    let labels = cube.alphabet().labels();
    match by {
        RankBy::F1 => {
            let order = rank_classes_by_final_f1(cube, k, ascending)?;
            let last = cube.last_epoch().expect("validated cubes are non-empty");
            let rows: Vec<_> = order
                .iter()
                .map(|&j| {
                    let f1 = crate::metrics::ClassCounts::of(&last.counts, j).f1();
                    (j, &labels[j], f1)
                })
                .collect();
            if as_json {
                let v: Vec<_> = rows
                    .iter()
                    .map(|(j, l, f1)| json!({ "class": j, "label": l, "f1": f1 }))
                    .collect();
                writeln!(out, "{}", serde_json::Value::from(v)).map_err(io_err)?;
            } else {
                for (j, label, f1) in rows {
                    let f1 = f1.map_or_else(|| "absent".to_string(), |v| format!("{v:.6}"));
                    writeln!(out, "{j}\t{label}\t{f1}").map_err(io_err)?;
                }
            }
        }
        RankBy::Confusion => {
            let ranking = rank_cells_by_final_confusion(cube, k)?;
            if as_json {
                writeln!(out, "{}", serde_json::to_string(&ranking).expect("ranking serializes")).map_err(io_err)?;
            } else {
                for c in &ranking.cells {
                    writeln!(
                        out,
                        "({},{})\t{} -> {}\t{}",
                        c.row, c.col, labels[c.row], labels[c.col], c.count
                    )
                    .map_err(io_err)?;
                }
                let induced: Vec<String> = ranking.induced_classes.iter().map(|c| c.to_string()).collect();
                writeln!(out, "classes: {}", induced.join(",")).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

fn aggregate(file: &PathBuf, mapping: &PathBuf, out: &mut dyn Write) -> Result<(), ApiError> {
    let runs = load_single(file)?;
    let run = &runs.runs()[0];
    let bytes = std::fs::read(mapping).map_err(io_err)?;
    let mapping = SuperclassMapping::from_json(&bytes, run.cube.alphabet())?;
    let aggregated = aggregate_superclasses(&run.cube, &mapping)?;
    let mut meta = run.meta.clone();
    meta.hue_index = None;
    writeln!(out, "{}", FoldLog::from_cube(&meta, &aggregated).to_json_pretty()).map_err(io_err)?;
    Ok(())
}

fn run_server(host: &str, port: u16, data_dir: Option<PathBuf>) -> Result<(), ApiError> {
    let store = match &data_dir {
        Some(dir) => Store::from_dir(dir)?,
        None => Store::default(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(io_err)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port)).await.map_err(io_err)?;
        log::info!(
            "serving {} runs on http://{}",
            store.snapshot().len(),
            listener.local_addr().map_err(io_err)?
        );
        let server = serve(listener, Arc::new(store));
        tokio::select! {
            r = server => r.map_err(io_err),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}
