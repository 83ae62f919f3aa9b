//! Brushing an iteration range and focusing one iteration.

use temporal_confusion::ingest::{build_run, read_fold_log};
use temporal_confusion::metrics::class_distribution;
use temporal_confusion::{IterationRange, ViewLens};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cifar10-train.json");
    let (_, cube) = build_run(&read_fold_log(path).unwrap()).unwrap();

    let lens = ViewLens {
        range: Some(IterationRange { from: 0, to: 42 }),
        focus: Some(30),
        ..ViewLens::default()
    };
    let brushed = lens.apply(&cube).unwrap();
    println!("{} of {} epochs visible", brushed.epochs().len(), cube.epochs().len());

    let focus = lens.focus.unwrap();
    let e = brushed.epoch(focus).unwrap();
    println!("iteration {focus}: {} correct of {}", e.counts.trace(), e.total());
    println!(
        "instances per class: {:?}",
        class_distribution(&brushed, focus).unwrap()
    );
}
