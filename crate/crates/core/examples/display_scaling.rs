//! Linear, logarithmic and exponential display scaling of one series.

use temporal_confusion::metrics::apply_scale;
use temporal_confusion::ScaleMode;

fn main() {
    let values = [0.0, 1.0, 3.0, 10.0, 40.0, 200.0];
    for (mode, gamma) in [
        (ScaleMode::Linear, 1.0),
        (ScaleMode::Log, 1.0),
        (ScaleMode::Exponential, 0.3),
    ] {
        let scaled = apply_scale(&values, mode, gamma).unwrap();
        let shown: Vec<String> = scaled.values.iter().map(|v| format!("{v:.3}")).collect();
        println!("{:<12} {}", format!("{mode:?}"), shown.join("  "));
    }
    let zeros = apply_scale(&[0.0, 0.0], ScaleMode::Log, 1.0).unwrap();
    println!("all-zero input flagged: {}", zeros.all_zero);
}
