//! Loads the train, test and held-out folds into one run set and compares
//! their final accuracy. Each run gets a stable hue index in load order.

use temporal_confusion::ingest::read_fold_log;
use temporal_confusion::merge_runs;
use temporal_confusion::metrics::accuracy_series;

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let logs: Vec<_> = ["train", "test", "new-test"]
        .iter()
        .map(|fold| read_fold_log(format!("{data}/cifar10-{fold}.json")).unwrap())
        .collect();
    let runs = merge_runs(&logs).unwrap();

    for run in runs.runs() {
        let acc = accuracy_series(&run.cube).unwrap();
        let last = acc.values.last().copied().flatten().unwrap();
        let peak = acc.values.iter().flatten().copied().fold(0.0, f64::max);
        println!(
            "hue {}  {:<10} fold={:<9} final accuracy {last:.3} (peak {peak:.3})",
            run.hue(),
            run.id(),
            run.meta.fold_name,
        );
    }
}
