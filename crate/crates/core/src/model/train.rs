use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, forward, infer, ModelConfig, Params};
use crate::error::{Error, Result};
use crate::metrics::tablature_prf;

/// Features and targets of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub track_id: String,
    /// `input_dim x N`
    pub features: Array2<f64>,
    /// `C x N`
    pub targets: Array2<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// Tracks drawn per iteration.
    pub batch_tracks: usize,
    /// Frames taken from each drawn track.
    pub seq_len: usize,
    pub iterations: usize,
    pub validate_every: usize,
    pub learning_rate: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            batch_tracks: 8,
            seq_len: 32,
            iterations: 2000,
            validate_every: 100,
            learning_rate: 0.05,
        }
    }
}

impl Schedule {
    fn validate(&self) -> Result<()> {
        if self.batch_tracks == 0 || self.seq_len == 0 || self.iterations == 0 || self.validate_every == 0 {
            return Err(Error::Validation("schedule counts must all be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One validation checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// Mean total training loss since the previous checkpoint.
    pub train_loss: f64,
    pub train_data_loss: f64,
    pub train_inhibition: f64,
    /// Track-averaged tablature f-measure on the validation split.
    pub val_f_tab: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the checkpoint with the highest validation f-measure.
    pub params: Params,
    pub best_iteration: usize,
    pub best_val_f_tab: f64,
    pub history: Vec<HistoryEntry>,
}

/// Track-averaged tablature f-measure of the argmax predictions.
pub fn validation_f_tab(params: &Params, config: &ModelConfig, samples: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let (_, act) = forward(params, config, s.features.view())?;
        let pred = infer(&config.fretboard, act.values.view())?;
        total += tablature_prf(&config.fretboard, pred.view(), s.targets.view())?.f_measure;
    }
    Ok(total / samples.len() as f64)
}

fn check_samples(config: &ModelConfig, samples: &[Sample], split: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Validation(format!("{split} split is empty")));
    }
    for s in samples {
        if s.features.nrows() != config.input_dim || s.targets.nrows() != config.num_combos() {
            return Err(Error::Dimension(format!(
                "{split} track {} has {} feature rows and {} target rows, model expects {} and {}",
                s.track_id,
                s.features.nrows(),
                s.targets.nrows(),
                config.input_dim,
                config.num_combos()
            )));
        }
        if s.features.ncols() != s.targets.ncols() || s.features.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "{split} track {} has {} feature frames and {} target frames",
                s.track_id,
                s.features.ncols(),
                s.targets.ncols()
            )));
        }
    }
    Ok(())
}

/// Minibatch gradient descent with a fixed step.
///
/// Each iteration draws `batch_tracks` tracks with replacement and a random
/// window of `seq_len` frames from each. The draws depend only on the seed,
/// so runs that differ only in `lambda` or the weight matrix see the same
/// batches from the same initialization.
pub fn train(train: &[Sample], val: &[Sample], config: &ModelConfig, schedule: &Schedule) -> Result<TrainOutcome> {
    config.validate()?;
    schedule.validate()?;
    check_samples(config, train, "training")?;
    check_samples(config, val, "validation")?;

    let mut params = Params::init(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Params)> = None;
    let (mut acc_total, mut acc_data, mut acc_inh, mut acc_n) = (0.0, 0.0, 0.0, 0usize);

    for it in 1..=schedule.iterations {
        let mut xs = Vec::with_capacity(schedule.batch_tracks);
        let mut ts = Vec::with_capacity(schedule.batch_tracks);
        for _ in 0..schedule.batch_tracks {
            let s = &train[rng.random_range(0..train.len())];
            let frames = s.features.ncols();
            let len = schedule.seq_len.min(frames);
            let start = rng.random_range(0..=frames - len);
            xs.push(s.features.slice(s![.., start..start + len]));
            ts.push(s.targets.slice(s![.., start..start + len]));
        }
        let x = concatenate(Axis(1), &xs).expect("feature rows agree");
        let t = concatenate(Axis(1), &ts).expect("target rows agree");

        let (loss, grad) = backward(&params, config, x.view(), t.view())?;
        if !loss.total.is_finite() {
            return Err(Error::numerical("loss", format!("non-finite loss at iteration {it}")));
        }
        params.scaled_add(-schedule.learning_rate, &grad);
        if params.slices().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::numerical("update", format!("parameters diverged at iteration {it}")));
        }
        acc_total += loss.total;
        acc_data += loss.data;
        acc_inh += loss.inhibition;
        acc_n += 1;

        if it % schedule.validate_every == 0 || it == schedule.iterations {
            let val_f_tab = validation_f_tab(&params, config, val)?;
            history.push(HistoryEntry {
                iteration: it,
                train_loss: acc_total / acc_n as f64,
                train_data_loss: acc_data / acc_n as f64,
                train_inhibition: acc_inh / acc_n as f64,
                val_f_tab,
            });
            (acc_total, acc_data, acc_inh, acc_n) = (0.0, 0.0, 0.0, 0);
            if best.as_ref().is_none_or(|(_, f, _)| val_f_tab > *f) {
                best = Some((it, val_f_tab, params.clone()));
            }
        }
    }

    let (best_iteration, best_val_f_tab, params) = best.expect("at least one checkpoint is logged");
    Ok(TrainOutcome {
        params,
        best_iteration,
        best_val_f_tab,
        history,
    })
}
