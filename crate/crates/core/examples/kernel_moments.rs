//! Draws one kernel step from a fixed point many times and compares the
//! empirical moments of the fluctuation with `0` and `η dt / m`.

use edlab::field::VectorField;
use edlab::kernel::TransitionKernel;
use edlab::{Grid, ModelParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> edlab::Result<()> {
    let grid = Grid::plane([32, 32], [-4.0, -4.0], [4.0, 4.0])?;
    let params = ModelParams::single(1.0, 2.0, 1e-3)?;
    let drift = VectorField::uniform(&grid, &[0.7, -0.3])?;
    let kernel = TransitionKernel::new(drift, &params)?;
    let x = [0.25, -0.5];
    let mean = kernel.spec_at(&x)?.mean;

    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m1 = [0.0; 2];
    let mut m2 = [[0.0; 2]; 2];
    for _ in 0..n {
        let y = kernel.sample_step(&x, &mut rng)?;
        let dw = [y[0] - x[0] - mean[0], y[1] - x[1] - mean[1]];
        for a in 0..2 {
            m1[a] += dw[a] / n as f64;
            for b in 0..2 {
                m2[a][b] += dw[a] * dw[b] / n as f64;
            }
        }
    }
    let var = kernel.variance()[0];
    let se_mean = (var / n as f64).sqrt();
    let se_var = var * (2.0 / n as f64).sqrt();
    println!("expected variance  eta dt / m = {var:.6e}");
    println!("<dw>      = [{:+.3e}, {:+.3e}]  (3 se = {:.1e})", m1[0], m1[1], 3.0 * se_mean);
    println!("<dw dw>   = [[{:.6e}, {:+.3e}], [{:+.3e}, {:.6e}]]", m2[0][0], m2[0][1], m2[1][0], m2[1][1]);
    println!("deviation = {:.2} se (diagonal), {:.2} se (off-diagonal)",
        (m2[0][0] - var).abs().max((m2[1][1] - var).abs()) / se_var,
        m2[0][1].abs() / (var / (n as f64).sqrt()));
    Ok(())
}
