//! Rough single-core training-throughput measurement used to size the
//! experiment defaults. Run with `cargo run -p vfdt-core --example
//! train_bench --release`.

use std::time::Instant;

use vfdt_core::classifier::{train_on, CnnConfig, LabeledExample, TrainConfig};
use vfdt_core::rng::{gaussian, rng_from};
use vfdt_core::vfdt::FeatureMatrix;

fn main() {
    let classes = 10usize;
    let per_class = 54usize;
    let mut rng = rng_from(1, &[1]);
    let mut dataset = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            let level = 1.2 + 0.06 * c as f64;
            let row: Vec<f64> =
                (0..1024).map(|_| level + 0.05 * gaussian(&mut rng)).collect();
            let row1: Vec<f64> =
                (0..1024).map(|_| level + 0.05 * gaussian(&mut rng)).collect();
            dataset.push(LabeledExample {
                features: FeatureMatrix::from_rows(row, row1).unwrap(),
                device_label: c,
                domain_label: "D1".into(),
            });
        }
    }
    let cnn = CnnConfig::default_for(classes, 3);
    let epochs = 3usize;
    let tc = TrainConfig { epochs, ..TrainConfig::default() };
    let started = Instant::now();
    let (_, history) = train_on(&dataset, &dataset[..40], &cnn, &tc).unwrap();
    let dt = started.elapsed().as_secs_f64();
    let passes = epochs * dataset.len();
    println!(
        "{} examples x {} epochs in {:.2} s -> {:.1} example-passes/s (history {:?})",
        dataset.len(),
        epochs,
        dt,
        passes as f64 / dt,
        history.test_accuracy
    );
}
