//! Small random training instances and finite-difference comparisons.

use ndarray::Array2;
use rand::Rng;
use tabinhib::cooccurrence::estimate_corpus;
use tabinhib::fretboard::FretboardConfig;
use tabinhib::inhibition::{inhibition_energy, inhibition_gradient, string_constraint_weights, weights_from_cooccurrence, InhibitionMatrix};
use tabinhib::model::{backward, evaluate_loss, Head, ModelConfig, Params};
use tabinhib::tab::FrameTablature;

use super::*;

pub struct Instance {
    pub config: ModelConfig,
    pub params: Params,
    pub features: Array2<f64>,
    pub targets: Array2<u8>,
}

fn corpus_weights(cfg: &FretboardConfig, seed: u64, boost: u32) -> InhibitionMatrix {
    let mut r = rng(seed ^ 0xc0ffee);
    let tracks: Vec<FrameTablature> = (0..4)
        .map(|_| FrameTablature::new(cfg.clone(), random_frets(cfg, 12, 0.3, &mut r)).unwrap())
        .collect();
    weights_from_cooccurrence(&estimate_corpus(&tracks).unwrap(), boost).unwrap()
}

pub fn instance(seed: u64, head: Head, lambda: f64) -> Instance {
    let cfg = FretboardConfig::new(2, 3, vec![40, 45]).unwrap();
    let mut r = rng(seed);
    let inhibition = match (head, seed % 2) {
        (Head::SixDSoftmax, _) => None,
        (Head::Logistic, 0) => Some(corpus_weights(&cfg, seed, 1 + (seed % 4) as u32)),
        (Head::Logistic, _) => Some(string_constraint_weights(&cfg)),
    };
    let config = ModelConfig {
        fretboard: cfg.clone(),
        input_dim: 4,
        hidden_dim: 5,
        head,
        lambda,
        inhibition,
        seed,
    };
    let mut params = Params::init(&config);
    params.b1.mapv_inplace(|_| r.random_range(-0.5..0.5));
    params.b2.mapv_inplace(|_| r.random_range(-0.5..0.5));
    let frames = 6;
    let features = Array2::from_shape_simple_fn((4, frames), || r.random_range(-1.0..1.0));
    let targets = one_hot(&cfg, &random_frets(&cfg, frames, 0.3, &mut r));
    Instance {
        config,
        params,
        features,
        targets,
    }
}

/// Largest relative error between backward() and central differences of the total loss.
pub fn parameter_gradient_error(inst: &Instance) -> f64 {
    let (_, grads) = backward(&inst.params, &inst.config, inst.features.view(), inst.targets.view()).unwrap();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let mut worst: f64 = 0.0;
    for (tensor, exact) in analytic.iter().enumerate() {
        let mut flat = inst.params.slices()[tensor].to_vec();
        let numeric = numeric_gradient(&mut flat, |x| {
            let mut p = inst.params.clone();
            p.slices_mut()[tensor].copy_from_slice(x);
            evaluate_loss(&p, &inst.config, inst.features.view(), inst.targets.view())
                .unwrap()
                .total
        });
        for (a, n) in exact.iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *n, FD_FLOOR));
        }
    }
    worst
}

/// Largest relative error of the inhibition gradient with respect to the sheet.
pub fn sheet_gradient_error(seed: u64) -> f64 {
    let cfg = FretboardConfig::new(2, 3, vec![40, 45]).unwrap();
    let w = if seed % 2 == 0 {
        corpus_weights(&cfg, seed, 2)
    } else {
        string_constraint_weights(&cfg)
    };
    let mut r = rng(seed);
    let sheet = Array2::from_shape_simple_fn((cfg.num_combos(), 5), || r.random_range(0.0..1.0));
    let exact = inhibition_gradient(sheet.view(), &w).unwrap();
    let mut flat = sheet.iter().copied().collect::<Vec<_>>();
    let numeric = numeric_gradient(&mut flat, |x| {
        let z = Array2::from_shape_vec(sheet.dim(), x.to_vec()).unwrap();
        inhibition_energy(z.view(), &w).unwrap()
    });
    exact
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(*a, *n, FD_FLOOR))
        .fold(0.0, f64::max)
}
