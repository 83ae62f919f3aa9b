//! The JSON payload a matrix client renders: off-diagonal cell series per run,
//! FN/FP margins, accuracy and per-class panels.

use temporal_confusion::ingest::read_fold_log;
use temporal_confusion::{build_view, merge_runs, ClassProjection, Normalization, ScaleMode, ViewLens, ViewRequest};

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let logs = ["train", "test"].map(|f| read_fold_log(format!("{data}/cifar10-{f}.json")).unwrap());
    let runs = merge_runs(&logs).unwrap();

    let cat = runs.alphabet().unwrap().index_of("cat").unwrap();
    let dog = runs.alphabet().unwrap().index_of("dog").unwrap();
    let request = ViewRequest::new(ViewLens {
        classes: ClassProjection::Subset(vec![cat, dog]),
        normalization: Normalization::Relative,
        scale: ScaleMode::Log,
        ..ViewLens::default()
    });
    let view = build_view(&runs, &request).unwrap();

    for cell in &view.cells {
        for lane in &cell.series {
            let last = lane.values.last().copied().flatten().unwrap_or(0.0);
            println!(
                "{} -> {} [{}]: final display value {last:.3}",
                view.classes[cell.row], view.classes[cell.col], lane.run_id
            );
        }
    }
    let json = serde_json::to_string(&view).unwrap();
    println!("payload: {} bytes, cell max {:.5}", json.len(), view.scale.cell_max);
}
