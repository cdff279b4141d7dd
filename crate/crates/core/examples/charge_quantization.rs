//! Quantization verdicts and charges across a sweep of multipliers, and a
//! unit rescaling that leaves the coupling `qA` alone.

use edlab::field::VectorField;
use edlab::winding::{charge_from_multiplier, quantization_check, rescale_units, QUANTIZATION_TOLERANCE};
use edlab::{Grid, ModelParams};

fn main() -> edlab::Result<()> {
    let base = ModelParams::single(1.0, 1.0, 1e-3)?;
    for beta in [0.25, 0.5, 1.0, 2.0, -3.0] {
        let params = base.clone().with_betas(vec![beta]);
        let verdict = quantization_check(&params, QUANTIZATION_TOLERANCE)?[0];
        let charge = charge_from_multiplier(&params, 0)?;
        println!(
            "beta = {beta:+5}: eta beta / hbar = {:+5}  quantized: {:<5}  q = {:+} (mu = {:?})",
            verdict.ratio, verdict.pass, charge.charge, charge.mu
        );
    }

    let grid = Grid::ring(16, 0.0, 1.0)?;
    let a = VectorField::from_fn(&grid, |x| vec![(6.0 * x[0]).sin()])?;
    let (q, a2) = rescale_units(0.5, &a, 3.0)?;
    let worst = a.values().iter().zip(a2.values()).fold(0.0f64, |m, (x, y)| m.max((0.5 * x - q * y).abs()));
    println!("rescale by 3: q = {q}, max |qA - q'A'| = {worst:.1e}");
    Ok(())
}
