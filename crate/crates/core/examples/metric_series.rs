//! Per-class precision, recall and F1 over time, plus FN/FP in absolute and
//! relative terms. ABSENT values print as `-`.

use temporal_confusion::ingest::{build_run, read_fold_log};
use temporal_confusion::metrics::{metric_series, Metric, Normalization};

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cifar10-test.json");
    let (_, cube) = build_run(&read_fold_log(path).unwrap()).unwrap();
    let cat = cube.alphabet().index_of("cat").unwrap();

    let series: Vec<_> = [
        (Metric::Precision, Normalization::Absolute),
        (Metric::Recall, Normalization::Absolute),
        (Metric::F1, Normalization::Absolute),
        (Metric::FalseNegatives, Normalization::Absolute),
        (Metric::FalsePositives, Normalization::Relative),
    ]
    .into_iter()
    .map(|(m, n)| metric_series(&cube, m, Some(cat), n).unwrap())
    .collect();

    println!("iter  precision  recall     f1       fn   fp/N");
    for (t, iteration) in cube.iterations().iter().enumerate().step_by(7) {
        let v: Vec<String> = series.iter().map(|s| fmt(s.values[t])).collect();
        println!(
            "{iteration:>4}  {:>9}  {:>6}  {:>5}  {:>7}  {:>5}",
            v[0], v[1], v[2], v[3], v[4]
        );
    }
}
