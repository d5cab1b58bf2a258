//! Output-layer formulations on top of a one-hidden-layer trunk.
//!
//! The trunk maps `input_dim x N` features to `C x N` logits through an affine
//! layer, a rectifier and a second affine layer. The head is either one
//! softmax per string block ([`Head::SixDSoftmax`]) or an independent sigmoid
//! per combination ([`Head::Logistic`]); only the latter admits the
//! inhibition term.

mod checkpoint;
mod loss;
mod train;

pub use checkpoint::Checkpoint;
pub use loss::{loss_bce, loss_cce, loss_total, LOG_EPS};
pub use train::{train, HistoryEntry, Sample, Schedule, TrainOutcome};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fretboard::FretboardConfig;
use crate::inhibition::{inhibition_energy, inhibition_gradient, InhibitionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    SixDSoftmax,
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub fretboard: FretboardConfig,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub head: Head,
    pub lambda: f64,
    pub inhibition: Option<InhibitionMatrix>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Validation("input_dim and hidden_dim must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        match (self.head, &self.inhibition) {
            (Head::SixDSoftmax, Some(_)) => {
                return Err(Error::Validation(
                    "the six-d-softmax head cannot be combined with an inhibition matrix".into(),
                ))
            }
            (Head::Logistic, None) if self.lambda > 0.0 => {
                return Err(Error::Validation("lambda > 0 requires an inhibition matrix".into()))
            }
            (_, Some(w)) if w.dim() != self.fretboard.num_combos() => {
                return Err(Error::Dimension(format!(
                    "inhibition matrix is {}x{}, fretboard has {} combinations",
                    w.dim(),
                    w.dim(),
                    self.fretboard.num_combos()
                )))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn num_combos(&self) -> usize {
        self.fretboard.num_combos()
    }

    /// The inhibition term is live only for the logistic head with `lambda > 0`.
    fn active_inhibition(&self) -> Option<&InhibitionMatrix> {
        match (self.head, &self.inhibition) {
            (Head::Logistic, Some(w)) if self.lambda > 0.0 => Some(w),
            _ => None,
        }
    }
}

/// Trunk and projection weights. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `hidden x input`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `C x hidden`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Params {
    pub fn zeros(input_dim: usize, hidden_dim: usize, num_combos: usize) -> Self {
        Params {
            w1: Array2::zeros((hidden_dim, input_dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((num_combos, hidden_dim)),
            b2: Array1::zeros(num_combos),
        }
    }

    /// Uniform in `[-r, r]` with `r = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut uniform = |rows: usize, cols: usize| {
            let r = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-r..=r))
        };
        let w1 = uniform(config.hidden_dim, config.input_dim);
        let w2 = uniform(config.num_combos(), config.hidden_dim);
        Params {
            w1,
            b1: Array1::zeros(config.hidden_dim),
            w2,
            b2: Array1::zeros(config.num_combos()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn num_combos(&self) -> usize {
        self.w2.nrows()
    }

    /// `self += alpha * other`
    pub fn scaled_add(&mut self, alpha: f64, other: &Params) {
        self.w1.scaled_add(alpha, &other.w1);
        self.b1.scaled_add(alpha, &other.b1);
        self.w2.scaled_add(alpha, &other.w2);
        self.b2.scaled_add(alpha, &other.b2);
    }

    /// Flat views in a fixed order (`w1`, `b1`, `w2`, `b2`).
    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    fn check(&self, config: &ModelConfig) -> Result<()> {
        let expected = (config.input_dim, config.hidden_dim, config.num_combos());
        let got = (self.input_dim(), self.hidden_dim(), self.num_combos());
        if expected != got || self.b1.len() != got.1 || self.b2.len() != got.2 || self.w2.ncols() != got.1 {
            return Err(Error::Dimension(format!(
                "parameters are (input, hidden, C) = {got:?}, config expects {expected:?}"
            )));
        }
        Ok(())
    }
}

/// Per-frame head outputs, `C x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSheet {
    pub head: Head,
    pub values: Array2<f64>,
}

struct Trace {
    pre_hidden: Array2<f64>,
    hidden: Array2<f64>,
    logits: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-string softmax over each block of `classes` rows.
fn block_softmax(logits: &Array2<f64>, classes: usize) -> Array2<f64> {
    let mut out = logits.clone();
    let (rows, frames) = out.dim();
    for k in 0..frames {
        for start in (0..rows).step_by(classes) {
            let block = start..start + classes;
            let max = block.clone().map(|r| out[[r, k]]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for r in block.clone() {
                let e = (out[[r, k]] - max).exp();
                out[[r, k]] = e;
                sum += e;
            }
            for r in block {
                out[[r, k]] /= sum;
            }
        }
    }
    out
}

fn apply_head(config: &ModelConfig, logits: &Array2<f64>) -> Array2<f64> {
    match config.head {
        Head::Logistic => logits.mapv(sigmoid),
        Head::SixDSoftmax => block_softmax(logits, config.fretboard.classes_per_string()),
    }
}

fn trace(params: &Params, config: &ModelConfig, features: ArrayView2<f64>) -> Result<Trace> {
    params.check(config)?;
    if features.nrows() != config.input_dim {
        return Err(Error::Dimension(format!(
            "features have {} rows, model expects {}",
            features.nrows(),
            config.input_dim
        )));
    }
    if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite feature value {bad}")));
    }
    let mut pre_hidden = params.w1.dot(&features);
    pre_hidden += &params.b1.view().insert_axis(Axis(1));
    let hidden = pre_hidden.mapv(|v| v.max(0.0));
    let mut logits = params.w2.dot(&hidden);
    logits += &params.b2.view().insert_axis(Axis(1));
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("output layer", "non-finite logits"));
    }
    Ok(Trace {
        pre_hidden,
        hidden,
        logits,
    })
}

/// Logits and head activations for a `input_dim x N` feature sheet.
pub fn forward(params: &Params, config: &ModelConfig, features: ArrayView2<f64>) -> Result<(Array2<f64>, ActivationSheet)> {
    let tr = trace(params, config, features)?;
    let values = apply_head(config, &tr.logits);
    Ok((
        tr.logits,
        ActivationSheet {
            head: config.head,
            values,
        },
    ))
}

/// Per-string argmax; ties go to the lowest fret class (silence first).
pub fn infer(config: &FretboardConfig, activations: ArrayView2<f64>) -> Result<Array2<u8>> {
    if activations.nrows() != config.num_combos() {
        return Err(Error::Dimension(format!(
            "activation sheet has {} rows, fretboard has {} combinations",
            activations.nrows(),
            config.num_combos()
        )));
    }
    let width = config.classes_per_string();
    let mut out = Array2::zeros(activations.dim());
    for n in 0..activations.ncols() {
        for s in 0..config.num_strings() {
            let mut best = s * width;
            for c in s * width + 1..(s + 1) * width {
                if activations[[c, n]] > activations[[best, n]] {
                    best = c;
                }
            }
            out[[best, n]] = 1;
        }
    }
    Ok(out)
}

/// Loss terms for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Cross-entropy of the configured head (categorical or binary).
    pub data: f64,
    /// Unscaled inhibition energy (0 when the term is inactive).
    pub inhibition: f64,
    pub total: f64,
}

/// Total loss of the configured head without gradients.
pub fn evaluate_loss(
    params: &Params,
    config: &ModelConfig,
    features: ArrayView2<f64>,
    targets: ArrayView2<u8>,
) -> Result<LossBreakdown> {
    let (_, act) = forward(params, config, features)?;
    loss_of(config, act.values.view(), targets)
}

fn loss_of(config: &ModelConfig, z: ArrayView2<f64>, targets: ArrayView2<u8>) -> Result<LossBreakdown> {
    let data = match config.head {
        Head::SixDSoftmax => loss_cce(z, targets)?,
        Head::Logistic => loss_bce(z, targets)?,
    };
    let inhibition = match config.active_inhibition() {
        Some(w) => inhibition_energy(z, w)?,
        None => 0.0,
    };
    Ok(LossBreakdown {
        data,
        inhibition,
        total: data + config.lambda * inhibition,
    })
}

fn ensure_finite(layer: &str, values: &Array2<f64>) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(layer, "non-finite gradient"));
    }
    Ok(())
}

/// Loss and exact gradients of every parameter.
///
/// Both cross-entropies are differentiated in their unclamped form, which
/// agrees with the clamped loss wherever no activation is within `LOG_EPS`
/// of 0 or 1.
pub fn backward(
    params: &Params,
    config: &ModelConfig,
    features: ArrayView2<f64>,
    targets: ArrayView2<u8>,
) -> Result<(LossBreakdown, Params)> {
    config.validate()?;
    let tr = trace(params, config, features)?;
    if targets.dim() != tr.logits.dim() {
        return Err(Error::Dimension(format!(
            "targets are {:?}, logits are {:?}",
            targets.dim(),
            tr.logits.dim()
        )));
    }
    let z = apply_head(config, &tr.logits);
    let loss = loss_of(config, z.view(), targets)?;
    if !loss.total.is_finite() {
        return Err(Error::numerical("loss", format!("non-finite loss {}", loss.total)));
    }

    let n = features.ncols().max(1) as f64;
    let d_logits = match config.head {
        Head::Logistic => {
            let mut d = Array2::from_shape_fn(z.dim(), |(c, k)| (z[[c, k]] - targets[[c, k]] as f64) / n);
            if let Some(w) = config.active_inhibition() {
                let g = inhibition_gradient(z.view(), w)?;
                d.zip_mut_with(&(g * &z.mapv(|v| v * (1.0 - v))), |d, g| *d += config.lambda * g);
            }
            d
        }
        Head::SixDSoftmax => {
            // d/dlogit of -sum t log z within a block: z * sum(t) - t
            let width = config.fretboard.classes_per_string();
            let mut d = Array2::zeros(z.dim());
            for k in 0..z.ncols() {
                for s in 0..config.fretboard.num_strings() {
                    let rows = s * width..(s + 1) * width;
                    let mass: f64 = rows.clone().map(|c| targets[[c, k]] as f64).sum();
                    for c in rows {
                        d[[c, k]] = (z[[c, k]] * mass - targets[[c, k]] as f64) / n;
                    }
                }
            }
            d
        }
    };
    ensure_finite("output layer", &d_logits)?;

    let w2 = d_logits.dot(&tr.hidden.t());
    let b2 = d_logits.sum_axis(Axis(1));
    let mut d_hidden = params.w2.t().dot(&d_logits);
    d_hidden.zip_mut_with(&tr.pre_hidden, |d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });
    ensure_finite("hidden layer", &d_hidden)?;
    let w1 = d_hidden.dot(&features.t());
    let b1 = d_hidden.sum_axis(Axis(1));

    Ok((loss, Params { w1, b1, w2, b2 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inhibition::string_constraint_weights;

    fn config(head: Head) -> ModelConfig {
        ModelConfig {
            fretboard: FretboardConfig::default(),
            input_dim: 4,
            hidden_dim: 3,
            head,
            lambda: 0.0,
            inhibition: None,
            seed: 1,
        }
    }

    #[test]
    fn zero_params_logistic() {
        let cfg = config(Head::Logistic);
        let p = Params::zeros(4, 3, 126);
        let (_, act) = forward(&p, &cfg, Array2::ones((4, 5)).view()).unwrap();
        assert!(act.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_params_softmax() {
        let cfg = config(Head::SixDSoftmax);
        let p = Params::zeros(4, 3, 126);
        let (_, act) = forward(&p, &cfg, Array2::ones((4, 2)).view()).unwrap();
        assert!(act.values.iter().all(|&v| (v - 1.0 / 21.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_blocks_normalize() {
        let cfg = config(Head::SixDSoftmax);
        let p = Params::init(&cfg);
        let x = Array2::from_shape_fn((4, 7), |(i, j)| (i as f64 - 1.5) * (j as f64 + 0.3));
        let (_, act) = forward(&p, &cfg, x.view()).unwrap();
        for n in 0..7 {
            for s in 0..6 {
                let sum: f64 = (0..21).map(|k| act.values[[s * 21 + k, n]]).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        assert!(act.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn rejects_non_finite_features() {
        let cfg = config(Head::Logistic);
        let p = Params::init(&cfg);
        let mut x = Array2::zeros((4, 2));
        x[[1, 1]] = f64::NAN;
        assert!(forward(&p, &cfg, x.view()).is_err());
    }

    #[test]
    fn softmax_with_inhibition_is_rejected() {
        let mut cfg = config(Head::SixDSoftmax);
        cfg.inhibition = Some(string_constraint_weights(&cfg.fretboard));
        cfg.lambda = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = config(Head::Logistic);
        cfg.lambda = 1.0;
        assert!(cfg.validate().is_err());
        cfg.inhibition = Some(string_constraint_weights(&cfg.fretboard));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn argmax_and_ties() {
        let fb = FretboardConfig::new(1, 1, vec![40]).unwrap();
        let y = infer(&fb, ndarray::array![[0.1], [0.7], [0.2]].view()).unwrap();
        assert_eq!(y.column(0).to_vec(), vec![0, 1, 0]);
        let y = infer(&fb, ndarray::array![[0.3], [0.3], [0.3]].view()).unwrap();
        assert_eq!(y.column(0).to_vec(), vec![1, 0, 0]);
    }

    #[test]
    fn inference_has_one_class_per_string() {
        let cfg = config(Head::Logistic);
        let p = Params::init(&cfg);
        let x = Array2::from_shape_fn((4, 9), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let (_, act) = forward(&p, &cfg, x.view()).unwrap();
        let y = infer(&cfg.fretboard, act.values.view()).unwrap();
        for n in 0..9 {
            assert_eq!(y.column(n).iter().map(|&v| v as usize).sum::<usize>(), 6);
        }
    }
}
