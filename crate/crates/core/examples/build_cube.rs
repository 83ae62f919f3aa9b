//! Builds a confusion cube from per-instance predictions and validates it.

use temporal_confusion::{confusion_from_predictions, validate_cube, ClassAlphabet};

fn main() {
    let alphabet = ClassAlphabet::new(["a", "b", "c"]).unwrap();
    let labels = [0, 0, 1, 1, 2];
    let predictions = [vec![0, 1, 1, 1, 2], vec![0, 0, 1, 1, 2]];
    let cube = confusion_from_predictions(&alphabet, &labels, &predictions).unwrap();

    for epoch in cube.epochs() {
        println!("iteration {} (N = {})", epoch.iteration, epoch.total());
        for (label, row) in alphabet.labels().iter().zip(epoch.counts.rows()) {
            println!("  {label}: {row:?}");
        }
    }
    println!("violations: {}", validate_cube(&cube).len());
}
