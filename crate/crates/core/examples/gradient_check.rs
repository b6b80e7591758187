//! Compare an MLP's backward pass with central finite differences.
//!
//! `cargo run --example gradient_check -- [seed]`

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uasn_sim::nn::{Mlp, Parameters};

fn main() -> uasn_sim::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mlp = Mlp::new(&[5, 12, 8, 1], &mut rng);
    let x = Array2::from_shape_fn((4, 5), |_| rng.gen_range(-1.0..1.0));
    let up = Array2::from_shape_fn((4, 1), |_| rng.gen_range(-1.0..1.0));

    let cache = mlp.forward_cached(x.view())?;
    let (grad, _) = mlp.backward(&cache, up.view())?;
    let analytic = grad.flat();

    let loss = |m: &Mlp| -> uasn_sim::Result<f64> { Ok((&m.forward(x.view())? * &up).sum()) };
    let h = 1e-6;
    let base = mlp.flat();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] += h;
        mlp.set_flat(&p)?;
        let plus = loss(&mlp)?;
        p[k] -= 2.0 * h;
        mlp.set_flat(&p)?;
        let minus = loss(&mlp)?;
        let numeric = (plus - minus) / (2.0 * h);
        let err = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    mlp.set_flat(&base)?;
    println!("{} parameters, worst relative error {worst:.3e}", base.len());
    Ok(())
}
