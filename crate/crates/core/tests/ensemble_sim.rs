use std::f64::consts::PI;

use edlab::ensemble::{
    compare_densities, estimate_density, evolve_ensemble, init_ensemble, mean_square_displacement, osmotic_velocity,
    EnsembleState, StaticDrift,
};
use edlab::field::VectorField;
use edlab::stats::{ks_one_sample, mean_variance};
use edlab::{Error, Grid, ModelParams, ScalarField};
use statrs::distribution::{ContinuousCDF, Normal};

fn gaussian(grid: &Grid, mu: f64, sigma: f64) -> ScalarField {
    let n = Normal::new(mu, sigma).unwrap();
    ScalarField::from_fn(grid, |x| statrs::distribution::Continuous::pdf(&n, x[0])).unwrap()
}

#[test]
fn initial_walkers_follow_the_density() {
    let grid = Grid::line(256, -7.0, 7.0).unwrap();
    let state = init_ensemble(&gaussian(&grid, 0.5, 1.2), 20_000, 5).unwrap();
    let normal = Normal::new(0.5, 1.2).unwrap();
    let ks = ks_one_sample(&state.axis_samples(0), |x| normal.cdf(x));
    assert!(ks.passes(0.01), "{ks:?}");
}

#[test]
fn planar_initialization_has_normal_marginals() {
    let grid = Grid::plane([64, 64], [-6.0, -6.0], [6.0, 6.0]).unwrap();
    let (nx, ny) = (Normal::new(-1.0, 1.0).unwrap(), Normal::new(0.5, 0.8).unwrap());
    let rho = ScalarField::from_fn(&grid, |x| {
        statrs::distribution::Continuous::pdf(&nx, x[0]) * statrs::distribution::Continuous::pdf(&ny, x[1])
    })
    .unwrap();
    let state = init_ensemble(&rho, 20_000, 9).unwrap();
    assert!(ks_one_sample(&state.axis_samples(0), |x| nx.cdf(x)).passes(0.01));
    assert!(ks_one_sample(&state.axis_samples(1), |x| ny.cdf(x)).passes(0.01));
}

#[test]
fn bad_densities_are_refused() {
    let grid = Grid::ring(32, 0.0, 1.0).unwrap();
    let half = ScalarField::constant(&grid, 0.5);
    assert!(matches!(init_ensemble(&half, 100, 1), Err(Error::Unnormalized { .. })));
    let mut v = vec![1.0; 32];
    v[3] = -0.1;
    v[4] = 1.1;
    let neg = ScalarField::new(grid.clone(), v).unwrap();
    assert!(matches!(init_ensemble(&neg, 100, 1), Err(Error::NegativeDensity { index: 3, .. })));
}

#[test]
fn free_diffusion_spreads_at_eta_over_m() {
    // Zero drift: each step adds variance η dt / m.
    let grid = Grid::ring(64, 0.0, 20.0).unwrap();
    let params = ModelParams::new(0.6, 0.125, vec![1.5], vec![0.0], 1.0, 0.01).unwrap();
    let mut state = init_ensemble(&ScalarField::constant(&grid, 1.0 / 20.0), 40_000, 3).unwrap();
    let start = state.clone();
    evolve_ensemble(&mut state, &mut StaticDrift(VectorField::zeros(&grid)), &params, 100).unwrap();
    let expected = 0.6 * 1.0 / 1.5;
    let msd = mean_square_displacement(&grid, &start, &state).unwrap()[0];
    let se = expected * (2.0 / 40_000.0f64).sqrt();
    assert!((msd - expected).abs() < 4.0 * se, "{msd} vs {expected}");
    assert!((state.time() - 1.0).abs() < 1e-12);
    assert_eq!(state.step(), 100);
}

#[test]
fn uniform_drift_translates_the_mean() {
    let grid = Grid::line(128, -10.0, 10.0).unwrap();
    let params = ModelParams::new(1.0, 0.125, vec![1.0], vec![0.0], 1.0, 0.005).unwrap();
    let mut state = init_ensemble(&gaussian(&grid, -2.0, 0.5), 20_000, 4).unwrap();
    let (m0, _) = mean_variance(&state.axis_samples(0));
    evolve_ensemble(&mut state, &mut StaticDrift(VectorField::uniform(&grid, &[1.5]).unwrap()), &params, 400).unwrap();
    let (m1, var) = mean_variance(&state.axis_samples(0));
    assert!((m1 - m0 - 3.0).abs() < 4.0 * (var / 20_000.0).sqrt());
    assert_eq!(state.clamped(), 0);
}

#[test]
fn open_boundaries_clamp_and_count() {
    let grid = Grid::line(64, -1.0, 1.0).unwrap();
    let params = ModelParams::new(1.0, 0.125, vec![1.0], vec![0.0], 1.0, 0.01).unwrap();
    let mut state = EnsembleState::from_positions(&grid, vec![0.9; 1000], 1).unwrap();
    evolve_ensemble(&mut state, &mut StaticDrift(VectorField::uniform(&grid, &[5.0]).unwrap()), &params, 20).unwrap();
    assert!(state.clamped() > 0);
    assert!(state.positions().iter().all(|&x| (-1.0..=1.0).contains(&x)));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let grid = Grid::ring(64, 0.0, 2.0 * PI).unwrap();
    let params = ModelParams::single(1.0, 1.0, 1e-3).unwrap();
    let drift = VectorField::from_fn(&grid, |x| vec![x[0].sin()]).unwrap();
    let run = |threads: usize, seed: u64| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut s = init_ensemble(&ScalarField::constant(&grid, 0.5 / PI), 5_000, seed).unwrap();
            evolve_ensemble(&mut s, &mut StaticDrift(drift.clone()), &params, 50).unwrap();
            s.positions().to_vec()
        })
    };
    assert_eq!(run(1, 77), run(3, 77));
    assert_ne!(run(1, 77), run(1, 78));
}

#[test]
fn osmotic_velocity_of_a_gaussian_is_linear() {
    // (η/2m) ∂ρ/ρ = −(η/2m) x / σ².
    let grid = Grid::line(512, -5.0, 5.0).unwrap();
    let params = ModelParams::new(1.0, 0.125, vec![2.0], vec![0.0], 1.0, 1e-3).unwrap();
    let u = osmotic_velocity(&gaussian(&grid, 0.0, 1.0), &params).unwrap();
    for i in (50..460).step_by(37) {
        let x = grid.coordinate(0, i);
        assert!((u.component(i, 0) + 0.25 * x).abs() < 1e-3 * (1.0 + x * x), "{x}");
    }
}

#[test]
fn histogram_of_uniform_walkers_is_flat() {
    let grid = Grid::ring(32, 0.0, 2.0).unwrap();
    let uniform = ScalarField::constant(&grid, 0.5);
    let state = init_ensemble(&uniform, 64_000, 2).unwrap();
    let est = estimate_density(&state, &grid).unwrap();
    let d = compare_densities(&est, &uniform).unwrap();
    // Each cell holds ~2000 walkers: relative noise ~2%.
    assert!(d.linf < 0.5 * 0.1 && d.l1 < 0.05, "{d:?}");
}

#[test]
fn trajectory_rows_are_parseable() {
    let grid = Grid::plane([8, 8], [0.0, 0.0], [1.0, 1.0]).unwrap();
    let state = EnsembleState::from_positions(&grid, vec![0.1, 0.2, 0.3, 0.4], 0).unwrap();
    let mut buf = Vec::new();
    state.write_trajectory_rows(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows, vec![vec![0.0, 0.0, 0.1, 0.2], vec![0.0, 1.0, 0.3, 0.4]]);
    assert_eq!(state.trajectory_header(), "step,walker,x0,x1");
}
