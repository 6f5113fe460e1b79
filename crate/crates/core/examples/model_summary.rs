//! Layer table of the CNN and a finite-difference gradient check of a small variant.

use mwa_ser::nn::gradcheck::check_model;
use mwa_ser::nn::{Architecture, CnnModel, Mode, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = CnnModel::new(Architecture::standard(4), 0)?;
    for layer in model.summary()? {
        println!(
            "{:<10} {:<18} {:>8}",
            layer.name,
            format!("{:?}", layer.output_shape),
            layer.params
        );
    }
    println!("{} trainable parameters", model.param_count());

    let arch = Architecture::tiny(3);
    let small = CnnModel::new(arch.clone(), 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shape = [4, arch.input_height, arch.input_width, arch.input_channels];
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let x = Tensor::new(shape.to_vec(), data)?;
    let checks = check_model(&small, &x, &[0, 1, 2, 1], Mode::FrozenStats, 1e-4, 3, 20)?;
    for c in &checks {
        println!(
            "{:<10} {:<13} {:>3} entries  rel err {:.2e}",
            c.layer_name, c.tensor, c.checked, c.rel_error
        );
    }
    Ok(())
}
