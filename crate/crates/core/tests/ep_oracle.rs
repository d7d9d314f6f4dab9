use rand::Rng;
use smoothck::gp::{ep_fit, quadrature_posterior_oracle, KernelConfig, TrainingSet};
use smoothck::rng::stream_rng;
use smoothck::smc::Observation;

/// Random dataset of at most `max_n` points with a random kernel.
fn dataset(seed: u64, max_n: usize) -> (TrainingSet, KernelConfig) {
    let mut rng = stream_rng(seed, 7);
    let n = rng.random_range(1..=max_n);
    let dim = rng.random_range(1..=2);
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let obs = (0..n)
        .map(|_| {
            let m = rng.random_range(1..=20);
            Observation::new(rng.random_range(0..=m), m)
        })
        .collect();
    let amp = rng.random_range(0.3..3.0);
    let ls = (0..dim).map(|_| rng.random_range(0.1..2.0)).collect();
    (
        TrainingSet::new(points, obs).unwrap(),
        KernelConfig::new(amp, ls).unwrap(),
    )
}

#[test]
fn ep_means_match_quadrature_on_small_sets() {
    for seed in 0..12 {
        let (data, kernel) = dataset(seed, 2);
        let state = ep_fit(&data, &kernel).unwrap();
        let exact = quadrature_posterior_oracle(state.points(), state.observations(), &kernel).unwrap();
        for (j, want) in exact.iter().enumerate() {
            let got = state.posterior_mean()[j];
            assert!((got - want).abs() <= 1e-2, "seed {seed} point {j}: EP {got} vs {want}");
        }
    }
}

#[test]
fn no_data_means_prior() {
    let kernel = KernelConfig::isotropic(1.0, 0.5, 1).unwrap();
    let data = TrainingSet::new(
        vec![vec![0.2], vec![0.7]],
        vec![Observation::new(5, 10), Observation::new(5, 10)],
    )
    .unwrap();
    let state = ep_fit(&data, &kernel).unwrap();
    let exact = quadrature_posterior_oracle(state.points(), state.observations(), &kernel).unwrap();
    for (j, e) in exact.iter().enumerate() {
        assert!(e.abs() < 1e-6 && state.posterior_mean()[j].abs() < 1e-6);
    }
}
