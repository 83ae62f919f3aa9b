//! Narrowing a large class set: lowest final F1, largest final confusion and
//! superclass aggregation.

use temporal_confusion::ingest::{build_run, read_fold_log};
use temporal_confusion::lens::{aggregate_superclasses, rank_cells_by_final_confusion, rank_classes_by_final_f1};
use temporal_confusion::metrics::{accuracy_series, ClassCounts};
use temporal_confusion::SuperclassMapping;

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let (_, cube) = build_run(&read_fold_log(format!("{data}/cifar10-test.json")).unwrap()).unwrap();
    let labels = cube.alphabet().labels();
    let last = &cube.last_epoch().unwrap().counts;

    println!("worst classes by final F1:");
    for j in rank_classes_by_final_f1(&cube, 3, true).unwrap() {
        println!(
            "  {:<6} {:.3}",
            labels[j],
            ClassCounts::of(last, j).f1().unwrap_or(f64::NAN)
        );
    }

    let ranking = rank_cells_by_final_confusion(&cube, 4).unwrap();
    println!("largest confusions:");
    for c in &ranking.cells {
        println!("  {} -> {}: {}", labels[c.row], labels[c.col], c.count);
    }
    let induced: Vec<&str> = ranking.induced_classes.iter().map(|&i| labels[i].as_str()).collect();
    println!("induced selection: {induced:?}");

    let bytes = std::fs::read(format!("{data}/cifar10-superclasses.json")).unwrap();
    let mapping = SuperclassMapping::from_json(&bytes, cube.alphabet()).unwrap();
    let coarse = aggregate_superclasses(&cube, &mapping).unwrap();
    let acc = accuracy_series(&coarse).unwrap();
    println!(
        "superclass accuracy {:?}: final {:.3}",
        mapping.names(),
        acc.values.last().copied().flatten().unwrap()
    );
}
