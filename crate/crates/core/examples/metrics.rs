//! Confusion matrix and the UA / WAP / WAF1 scores.

use mwa_ser::train_eval::ConfusionMatrix;

fn main() {
    let truth = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
    let predicted = [0, 0, 0, 1, 0, 0, 1, 1, 1, 1];
    let cm = ConfusionMatrix::from_predictions(2, &truth, &predicted);
    println!("confusion {:?}", cm.rows());
    for c in 0..cm.classes() {
        println!(
            "class {c}: recall {:.4}  precision {:.4}  f1 {:.4}",
            cm.recall(c),
            cm.precision(c),
            cm.f1(c)
        );
    }
    let m = cm.metrics();
    println!(
        "UA {:.4}  WAP {:.4}  WAF1 {:.4}  accuracy {:.4}",
        m.ua, m.wap, m.waf1, m.accuracy
    );
}
