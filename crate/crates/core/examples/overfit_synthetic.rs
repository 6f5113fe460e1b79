//! Memorize 16 separable 200×34 matrices with the full network.

use std::ops::ControlFlow;
use std::time::Instant;

use mwa_ser::features::ColumnStats;
use mwa_ser::nn::{Architecture, CnnModel};
use mwa_ser::synthetic::separable_examples;
use mwa_ser::train_eval::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let examples = separable_examples(4, 4, 7);
    let stats = ColumnStats::fit(examples.iter().map(|e| &e.features));
    let mut model = CnnModel::new(Architecture::standard(4), 7)?;
    let cfg = TrainConfig {
        epochs: 300,
        seed: 7,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let history = train(&mut model, &examples, Some(&stats), &cfg, |e| {
        println!(
            "epoch {:3}  loss {:.4}  train acc {:.3}",
            e.epoch, e.loss, e.accuracy
        );
        if e.accuracy == 1.0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    let last = history.epochs.last().expect("at least one epoch");
    println!(
        "reached {:.0}% after {} epochs in {:.1?}",
        100.0 * last.accuracy,
        history.epochs.len(),
        start.elapsed()
    );
    Ok(())
}
