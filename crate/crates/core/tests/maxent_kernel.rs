use edlab::field::VectorField;
use edlab::kernel::{entropic_drift, multiplier_alpha, TransitionKernel};
use edlab::stats::{ks_one_sample, mean_variance};
use edlab::{GaugeInput, Grid, ModelParams, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::statistics::Distribution;

fn params(dt: f64) -> ModelParams {
    ModelParams::new(1.5, 0.125, vec![2.0], vec![0.0], 1.0, dt).unwrap()
}

#[test]
fn alpha_is_mass_over_eta_dt() {
    let p = params(0.01);
    assert!((multiplier_alpha(&p, 0).unwrap() - 2.0 / (1.5 * 0.01)).abs() < 1e-12);
    assert!(multiplier_alpha(&p.clone().with_dt(0.0), 0).is_err());
    assert!(multiplier_alpha(&p, 1).is_err());
}

#[test]
fn drift_follows_the_entropy_gradient_and_the_connection() {
    // b = (η/m)(∂S − βA) for linear S and uniform A.
    let grid = Grid::ring(32, 0.0, 4.0).unwrap();
    let p = params(0.01).with_betas(vec![0.5]);
    let s = ScalarField::from_fn(&grid, |x| (std::f64::consts::PI * x[0] / 2.0).sin()).unwrap();
    let gauge = GaugeInput::constant_potential(&grid, &[0.8]).unwrap();
    let b = entropic_drift(&s, Some(&gauge), &p).unwrap();
    let h = grid.spacing(0);
    for i in 0..32 {
        let x = grid.coordinate(0, i);
        let ds = (std::f64::consts::PI / 2.0) * (std::f64::consts::PI * x / 2.0).cos();
        let exact = 1.5 / 2.0 * (ds - 0.5 * 0.8);
        // Central difference of sin(kx): relative error (kh)²/6.
        assert!((b.component(i, 0) - exact).abs() < 0.75 * (std::f64::consts::PI / 2.0).powi(3) * h * h / 6.0 + 1e-12);
    }
}

#[test]
fn log_density_matches_the_normal_pdf() {
    let grid = Grid::line(64, -5.0, 5.0).unwrap();
    let p = params(0.04);
    let k = TransitionKernel::new(VectorField::uniform(&grid, &[0.75]).unwrap(), &p).unwrap();
    let var: f64 = 1.5 * 0.04 / 2.0;
    let normal = Normal::new(0.3 + 0.75 * 0.04, var.sqrt()).unwrap();
    for y in [-0.5, 0.0, 0.33, 0.8] {
        let ours = k.log_density(&[y], &[0.3]).unwrap();
        assert!((ours - normal.ln_pdf(y)).abs() < 1e-12, "{y}");
    }
}

#[test]
fn one_step_displacements_are_normal() {
    let grid = Grid::line(64, -5.0, 5.0).unwrap();
    let p = params(0.02);
    let k = TransitionKernel::new(VectorField::uniform(&grid, &[-0.4]).unwrap(), &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = [0.1];
    let ys: Vec<f64> = (0..20_000).map(|_| k.sample_step(&x, &mut rng).unwrap()[0]).collect();
    let normal = Normal::new(0.1 - 0.4 * 0.02, (1.5 * 0.02 / 2.0f64).sqrt()).unwrap();
    let ks = ks_one_sample(&ys, |y| normal.cdf(y));
    assert!(ks.passes(0.01), "{ks:?}");
    let (mean, var) = mean_variance(&ys);
    assert!((mean - normal.mean().unwrap()).abs() < 4.0 * (var / 20_000.0).sqrt());
}

#[test]
fn variance_scales_with_each_particle_mass() {
    let grid = Grid::plane([8, 8], [0.0, 0.0], [1.0, 1.0]).unwrap().with_layout(edlab::ParticleLayout::OnePerAxis);
    let p = ModelParams::new(2.0, 0.125, vec![1.0, 4.0], vec![0.0, 0.0], 1.0, 0.1).unwrap();
    let k = TransitionKernel::new(VectorField::zeros(&grid), &p).unwrap();
    assert_eq!(k.variance(), &[0.2, 0.05]);
}

#[test]
fn same_seed_same_step() {
    let grid = Grid::ring(16, 0.0, 1.0).unwrap();
    let k = TransitionKernel::new(VectorField::uniform(&grid, &[1.0]).unwrap(), &params(0.01)).unwrap();
    let draw = |seed| k.sample_step(&[0.95], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
    assert!(draw(3)[0] >= 0.0 && draw(3)[0] < 1.0);
}
