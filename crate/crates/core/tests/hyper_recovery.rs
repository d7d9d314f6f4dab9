use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use smoothck::gp::{gram, optimize_hyperparams, probit, HyperBounds, KernelConfig, TrainingSet};
use smoothck::rng::stream_rng;
use smoothck::smc::Observation;

const TRUE_LENGTHSCALE: f64 = 0.2;

/// Binomial counts drawn through a latent function sampled from the prior.
fn synthetic(seed: u64, n: usize, trials: u64) -> TrainingSet {
    let mut rng = stream_rng(seed, 11);
    let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
    let k = KernelConfig::isotropic(1.0, TRUE_LENGTHSCALE, 1).unwrap();
    let g = gram(&k, &xs).unwrap();
    let l: DMatrix<f64> = g.cholesky().l();
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let latent = l * z;
    let obs = latent
        .iter()
        .map(|&f| {
            let p = probit(f);
            let s = (0..trials).filter(|_| rng.random::<f64>() < p).count() as u64;
            Observation::new(s, trials)
        })
        .collect();
    TrainingSet::new(xs, obs).unwrap()
}

#[test]
fn lengthscale_is_recovered_within_a_factor_of_three() {
    let init = KernelConfig::isotropic(1.0, 1.0, 1).unwrap();
    let seeds = 20;
    let mut hits = 0;
    let mut found = Vec::new();
    for seed in 0..seeds {
        let data = synthetic(seed, 50, 20);
        let (cfg, _) = optimize_hyperparams(&data, &init, &HyperBounds::default()).unwrap();
        let l = cfg.lengthscales[0];
        found.push(l);
        if (TRUE_LENGTHSCALE / 3.0..=TRUE_LENGTHSCALE * 3.0).contains(&l) {
            hits += 1;
        }
    }
    assert!(hits * 10 >= seeds * 8, "{hits}/{seeds} recovered: {found:?}");
}
