//! Extract the 34 short-time features from a synthetic utterance.

use mwa_ser::dsp::WindowSpec;
use mwa_ser::features::{extract_feature_matrix, FeatureConfig, FEATURE_NAMES};
use mwa_ser::synthetic::class_tone;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let buf = class_tone(2, 16_000, 1.5, &mut rng).preprocess()?;
    let cfg = FeatureConfig::default();

    for ms in [25.0, 200.0] {
        let m =
            extract_feature_matrix(&buf, &WindowSpec::half_overlap(ms)?, &cfg, "demo", "memory")?;
        println!(
            "{}: {} frames available, matrix {}x{}",
            m.meta.window.label(),
            m.meta.frame_count,
            m.rows(),
            m.cols()
        );
        let used = m.meta.frame_count.min(m.rows());
        for (c, name) in FEATURE_NAMES.iter().enumerate().take(10) {
            let mean = (0..used).map(|r| m.get(r, c) as f64).sum::<f64>() / used as f64;
            println!("  {name:<20} mean {mean:>10.4}");
        }
    }
    Ok(())
}
